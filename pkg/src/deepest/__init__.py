"""deepest: one-to-many emotional style transfer for speech."""

__version__ = "0.1.0"
