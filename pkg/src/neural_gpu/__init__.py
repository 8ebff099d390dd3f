"""Neural GPU: convolutional gated recurrent networks for algorithmic tasks."""

__version__ = "0.1.0"
