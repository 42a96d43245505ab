"""Event hooks emitted while experiments fit and evaluate models."""

import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Optional

logger = logging.getLogger(__name__)


class EventType(Enum):
    """Event types."""

    # Model fitting
    FIT = "fit"

    # Experiment progress
    FOLD_STARTED = "fold_started"
    FOLD_FINISHED = "fold_finished"
    EXPERIMENT_FINISHED = "experiment_finished"


@dataclass
class Event:
    """Event container."""

    type: EventType
    data: dict[str, Any]
    timestamp: datetime = field(default_factory=datetime.now)
    source: Optional[str] = None


Handler = Callable[[Event], None]


class EventBus:
    """Synchronous, thread-safe event bus.

    Handlers run on the emitting thread, so fold workers running in a pool
    must not block inside a handler.
    """

    def __init__(self, history_size: int = 100) -> None:
        self._handlers: dict[EventType, list[Handler]] = {}
        self._history: list[Event] = []
        self._history_size = history_size
        self._lock = threading.Lock()

    def subscribe(self, event_type: EventType, handler: Handler) -> None:
        """Subscribe to an event type."""
        with self._lock:
            self._handlers.setdefault(event_type, []).append(handler)

    def unsubscribe(self, event_type: EventType, handler: Handler) -> None:
        """Unsubscribe from an event type."""
        with self._lock:
            if event_type in self._handlers:
                self._handlers[event_type].remove(handler)

    def emit(self, event: Event) -> None:
        """Record an event and call its handlers."""
        with self._lock:
            self._history.append(event)
            if len(self._history) > self._history_size:
                self._history.pop(0)
            handlers = list(self._handlers.get(event.type, []))

        for handler in handlers:
            handler(event)

    @property
    def history(self) -> list[Event]:
        with self._lock:
            return list(self._history)

    def scoped(self, **tags: Any) -> "ScopedBus":
        """A view that merges ``tags`` into every emitted event's data."""
        return ScopedBus(self, tags)


class ScopedBus:
    """Emitter that stamps fixed tags (e.g. fold index) onto event data."""

    def __init__(self, bus: EventBus, tags: dict[str, Any]) -> None:
        self._bus = bus
        self._tags = tags

    def emit(self, event: Event) -> None:
        event.data = {**self._tags, **event.data}
        self._bus.emit(event)

    def scoped(self, **tags: Any) -> "ScopedBus":
        return ScopedBus(self._bus, {**self._tags, **tags})


def emit_fit(
    events: Optional["EventBus | ScopedBus"], component: str, trial_ids: Any, **data: Any
) -> None:
    """Report that ``component`` was fitted on ``trial_ids``."""
    if events is None:
        return
    events.emit(
        Event(
            type=EventType.FIT,
            data={"component": component, "trial_ids": tuple(trial_ids), **data},
            source=component,
        )
    )
