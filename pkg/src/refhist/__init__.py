"""Edit histories of inline citations in revisioned wiki articles."""

__version__ = "0.1.0"
