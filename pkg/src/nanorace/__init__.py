"""Desk-scale nano-drone racing simulator and analysis toolkit."""

__version__ = "0.1.0"
