"""casegraph: clinical case-report extraction, temporal reasoning, and retrieval."""

__version__ = "0.1.0"
