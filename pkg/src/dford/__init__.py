"""Online ordinal regression from directional feedback."""

__version__ = "0.1.0"
