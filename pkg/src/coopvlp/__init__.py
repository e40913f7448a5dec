"""Cooperative localization in visible light positioning networks."""

__version__ = "0.1.0"
