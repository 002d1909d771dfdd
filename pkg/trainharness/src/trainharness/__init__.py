"""trainharness: fine-tune a small classifier on groupmood data and inspect it."""

__version__ = "0.1.0"


class HarnessError(Exception):
    """Raised for harness-level failures (bad inputs, broken streams, ...)."""
