"""Component reliability of coherent systems from masked system failure data."""

__version__ = "0.1.0"
