"""In-memory LRU cache for extracted feature vectors."""

import hashlib
import threading
from collections import OrderedDict
from typing import Any, Callable, Optional


def make_key(*parts: Any) -> str:
    """Hash arbitrary parts into a stable cache key."""
    return hashlib.md5("|".join(str(p) for p in parts).encode()).hexdigest()


class Cache:
    """Thread-safe LRU cache.

    Feature extraction is pure, so a value computed twice by racing threads is
    identical and either copy may win.
    """

    def __init__(self, max_size: int = 4096) -> None:
        self.max_size = max_size
        self._entries: OrderedDict[str, Any] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: str) -> Optional[Any]:
        """Get item from cache."""
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                self.hits += 1
                return self._entries[key]
            self.misses += 1
        return None

    def set(self, key: str, value: Any) -> None:
        """Set item in cache."""
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self.max_size:
                self._entries.popitem(last=False)

    def get_or_compute(self, key: str, compute_func: Callable[[], Any]) -> Any:
        """Get from cache or compute if missing."""
        value = self.get(key)
        if value is None:
            value = compute_func()
            self.set(key, value)
        return value

    def clear(self) -> None:
        """Clear all cache entries."""
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)
