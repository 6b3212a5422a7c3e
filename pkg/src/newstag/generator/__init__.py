from .beam import (
    DecodeSession,
    RankedSequence,
    beam_search,
    beam_search_ids,
    greedy_ids,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .model import (
    MODES,
    GeneratorConfig,
    HashtagGenerator,
    hybrid_bi_attention,
    merge,
)
from .training import (
    Adam,
    SGD,
    TrainExample,
    TrainResult,
    dataset_loss,
    expand_examples,
    train_model,
)

__all__ = [
    "Adam",
    "CheckpointError",
    "DecodeSession",
    "GeneratorConfig",
    "HashtagGenerator",
    "MODES",
    "RankedSequence",
    "SGD",
    "TrainExample",
    "TrainResult",
    "beam_search",
    "beam_search_ids",
    "dataset_loss",
    "expand_examples",
    "greedy_ids",
    "hybrid_bi_attention",
    "load_checkpoint",
    "merge",
    "save_checkpoint",
    "train_model",
]
