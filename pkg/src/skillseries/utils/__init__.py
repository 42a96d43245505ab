"""Utility modules."""

from skillseries.utils.cache import Cache
from skillseries.utils.files import atomic_write_bytes, atomic_write_text

__all__ = ["Cache", "atomic_write_bytes", "atomic_write_text"]
