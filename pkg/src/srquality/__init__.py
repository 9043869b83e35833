"""Estimate how well seed-driven rankings will work for a systematic review before screening."""

__version__ = "0.1.0"
