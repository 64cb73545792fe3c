"""Performance-aware digital computing-in-memory macro compiler."""

__version__ = "0.1.0"
