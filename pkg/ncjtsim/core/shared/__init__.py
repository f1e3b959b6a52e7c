"""Shared helpers"""

from .utils import generate_hash, percent_change

__all__ = ["generate_hash", "percent_change"]
