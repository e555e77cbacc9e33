"""Emotion contagion estimation on localized, dynamically weighted star graphs."""

__version__ = "0.1.0"
