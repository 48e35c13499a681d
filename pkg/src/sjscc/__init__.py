"""Transformer-based joint source-channel coding for short text."""

__version__ = "0.1.0"
