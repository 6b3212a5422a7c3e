"""Time-aware news retrieval and hashtag sequence generation for microblog posts."""

__version__ = "0.1.0"
