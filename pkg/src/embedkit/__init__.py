"""Word-embedding and neural text-classifier benchmark toolkit."""

__version__ = "0.1.0"
