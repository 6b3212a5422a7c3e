"""Dense float64 tensors with reverse-mode automatic differentiation.

Exactly the primitives the GRU encoders, bi-attention, and attention
decoder need: matrix products, elementwise arithmetic, concatenation and
slicing, tanh/sigmoid/softmax, inverted dropout, and embedding lookups.
Tensors are rank <= 3 row-major arrays; every op validates that its output
is finite so numerical blowups surface at the op that produced them.

Double precision throughout: the finite-difference gradient checks that
back the test suite are not reliable in float32 at eps = 1e-4.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operands with incompatible shapes."""


class NumericError(ArithmeticError):
    """An operation produced a NaN or infinity."""


_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (inference paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 3:
            raise ShapeError(f"rank {arr.ndim} > 3 not supported")
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor initialized with non-finite values")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._backward: Callable[[np.ndarray], None] | None = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _out(data: np.ndarray, parents: tuple[Tensor, ...], bwd) -> Tensor:
    # Fast screen: a sum over any array containing NaN/Inf is itself
    # non-finite. The precise re-check rules out overflow of finite values.
    if not np.isfinite(data.sum()) and not np.all(np.isfinite(data)):
        raise NumericError("operation produced non-finite values")
    result = Tensor.__new__(Tensor)
    result.data = data
    result.grad = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        result.requires_grad = True
        result._parents = parents
        result._backward = bwd
    else:
        result.requires_grad = False
        result._parents = ()
        result._backward = None
    return result


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> bool:
    """True when b is a row vector to broadcast over matrix a; only that one
    broadcast form is allowed."""
    if a.data.shape == b.data.shape:
        return False
    if a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]:
        return True
    raise ShapeError(f"{op}: incompatible shapes {a.data.shape} and {b.data.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _check_broadcast(a, b, "add")

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g)
        if b.requires_grad:
            b._accum(g.sum(axis=0) if broadcast else g)

    return _out(a.data + b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _check_broadcast(a, b, "mul")

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g * b.data)
        if b.requires_grad:
            gb = g * a.data
            b._accum(gb.sum(axis=0) if broadcast else gb)

    return _out(a.data * b.data, (a, b), bwd)


def scale_shift(a: Tensor, scale: float, shift: float = 0.0) -> Tensor:
    """Elementwise scale * a + shift with Python-scalar coefficients."""

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g * scale)

    return _out(a.data * scale + shift, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for (n,d)@(d,m), (d,)@(d,m), and (n,d)@(d,)."""
    ra, rb = a.data.ndim, b.data.ndim
    if (ra, rb) not in ((2, 2), (1, 2), (2, 1)):
        raise ShapeError(f"matmul: unsupported ranks {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dims differ {a.data.shape} @ {b.data.shape}")

    def bwd(g: np.ndarray) -> None:
        if (ra, rb) == (2, 2):
            if a.requires_grad:
                a._accum(g @ b.data.T)
            if b.requires_grad:
                b._accum(a.data.T @ g)
        elif (ra, rb) == (1, 2):
            if a.requires_grad:
                a._accum(b.data @ g)
            if b.requires_grad:
                b._accum(np.outer(a.data, g))
        else:
            if a.requires_grad:
                a._accum(np.outer(g, b.data))
            if b.requires_grad:
                b._accum(a.data.T @ g)

    return _out(a.data @ b.data, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose needs a matrix, got shape {a.data.shape}")

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g.T)

    return _out(a.data.T.copy(), (a,), bwd)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    ranks = {p.data.ndim for p in parts}
    if len(ranks) != 1:
        raise ShapeError(f"concat: mixed ranks {sorted(ranks)}")
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g: np.ndarray) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p._accum(g[tuple(idx)])

    return _out(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), bwd)


def stack_rows(rows: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one vector per row."""
    if not rows:
        raise ShapeError("stack_rows of zero vectors")
    if any(r.data.ndim != 1 for r in rows):
        raise ShapeError("stack_rows expects vectors")

    def bwd(g: np.ndarray) -> None:
        for i, r in enumerate(rows):
            if r.requires_grad:
                r._accum(g[i])

    return _out(np.stack([r.data for r in rows], axis=0), tuple(rows), bwd)


def row(a: Tensor, i: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"row needs a matrix, got shape {a.data.shape}")

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[i] = g
            a._accum(full)

    return _out(a.data[i].copy(), (a,), bwd)


def segment(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 1:
        raise ShapeError(f"segment needs a vector, got shape {a.data.shape}")

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[start:stop] = g
            a._accum(full)

    return _out(a.data[start:stop].copy(), (a,), bwd)


def pick(a: Tensor, i: int) -> Tensor:
    """Scalar element of a vector."""
    if a.data.ndim != 1:
        raise ShapeError(f"pick needs a vector, got shape {a.data.shape}")

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[i] = g
            a._accum(full)

    return _out(a.data[i].copy(), (a,), bwd)


def sum_all(a: Tensor) -> Tensor:
    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(np.full_like(a.data, float(g)))

    return _out(a.data.sum(), (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g * (1.0 - out_data * out_data))

    return _out(out_data, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    # 0.5 * (1 + tanh(x/2)) is the overflow-free form.
    out_data = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g * out_data * (1.0 - out_data))

    return _out(out_data, (a,), bwd)


def softmax(a: Tensor, axis: int) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out_data = ex / ex.sum(axis=axis, keepdims=True)

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            a._accum(out_data * (g - inner))

    return _out(out_data, (a,), bwd)


def log_softmax(a: Tensor, axis: int) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - lse

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g - np.exp(out_data) * g.sum(axis=axis, keepdims=True))

    return _out(out_data, (a,), bwd)


def gru_cell(gi: Tensor, gh: Tensor, h_prev: Tensor) -> Tensor:
    """Fused GRU state update; the single hot op in every encoder/decoder step.

    gi and gh are the input-side and state-side affine transforms (biases
    already added), both laid out [update; reset; candidate]:

        z = sigmoid(gi_z + gh_z)
        r = sigmoid(gi_r + gh_r)
        c = tanh(gi_c + r * gh_c)
        h = (1 - z) * c + z * h_prev
    """
    n = h_prev.data.shape[0]
    if h_prev.data.ndim != 1 or gi.data.shape != (3 * n,) or gh.data.shape != (3 * n,):
        raise ShapeError(
            f"gru_cell shapes: gi {gi.data.shape}, gh {gh.data.shape}, h {h_prev.data.shape}"
        )
    az = gi.data[:n] + gh.data[:n]
    ar = gi.data[n : 2 * n] + gh.data[n : 2 * n]
    ghc = gh.data[2 * n :]
    z = 0.5 * (1.0 + np.tanh(0.5 * az))
    r = 0.5 * (1.0 + np.tanh(0.5 * ar))
    c = np.tanh(gi.data[2 * n :] + r * ghc)
    out = (1.0 - z) * c + z * h_prev.data

    def bwd(g: np.ndarray) -> None:
        dc = g * (1.0 - z)
        dz = g * (h_prev.data - c)
        dac = dc * (1.0 - c * c)
        daz = dz * z * (1.0 - z)
        dar = dac * ghc * r * (1.0 - r)
        if gi.requires_grad:
            gi._accum(np.concatenate([daz, dar, dac]))
        if gh.requires_grad:
            gh._accum(np.concatenate([daz, dar, dac * r]))
        if h_prev.requires_grad:
            h_prev._accum(g * z)

    return _out(out, (gi, gh, h_prev), bwd)


def dropout(a: Tensor, rate: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """Inverted dropout: kept values scaled by 1/(1-rate); identity in eval."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        def bwd_id(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accum(g)

        return _out(a.data.copy(), (a,), bwd_id)
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g * mask)

    return _out(a.data * mask, (a,), bwd)


def embedding_lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    if table.data.ndim != 2:
        raise ShapeError(f"embedding table must be a matrix, got {table.data.shape}")
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeError("embedding_lookup needs a nonempty 1-D id sequence")
    if idx.min() < 0 or idx.max() >= table.data.shape[0]:
        raise ValueError("embedding id out of range")

    def bwd(g: np.ndarray) -> None:
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, idx, g)
            table._accum(full)

    return _out(table.data[idx].copy(), (table,), bwd)


def backward(loss: Tensor) -> None:
    """Populate .grad on every reachable requires_grad tensor.

    Gradients accumulate additively across uses and across calls; callers
    zero them between optimization steps.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward needs a scalar, got shape {loss.data.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    loss._accum(np.array(1.0))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-4,
    n_samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples up to n_samples coordinates across the parameter set (all of
    them when n_samples is None); error per coordinate is
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params:
        p.zero_grad()
    backward(f())
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    coords = [(ti, j) for ti, p in enumerate(params) for j in range(p.data.size)]
    if n_samples is not None and n_samples < len(coords):
        if rng is None:
            rng = np.random.default_rng(0)
        sel = rng.choice(len(coords), size=n_samples, replace=False)
        coords = [coords[i] for i in sel]

    worst = 0.0
    for ti, j in coords:
        p = params[ti]
        orig = p.data.flat[j]
        p.data.flat[j] = orig + eps
        with no_grad():
            lo_hi = float(f().data)
        p.data.flat[j] = orig - eps
        with no_grad():
            lo_lo = float(f().data)
        p.data.flat[j] = orig
        numeric = (lo_hi - lo_lo) / (2.0 * eps)
        a = float(analytic[ti].flat[j])
        rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, rel)
    return worst
