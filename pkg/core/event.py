"""
event.py

Purpose:
    Implements an event/observer pattern for the sweep harness.
    The EventManager lets logging, metrics and any other observer subscribe to sweep lifecycle
    events without the scheduler knowing who listens.

Key Responsibilities:
    - Register and unregister listeners per event type.
    - Broadcast events with keyword data to every registered listener.
    - Keep listener failures from ever breaking a sweep.
    - Define the standard sweep event names (SweepEvent).

Usage:
    events = EventManager()
    events.register(SweepEvent.POINT_FAILED, log_point_failure)
    events.notify(SweepEvent.POINT_FAILED, task=task, exception=exc)
"""
import logging
from collections import defaultdict
from typing import Callable, Optional

logger = logging.getLogger("lowmach.event")


class EventManager:
    """
    Manages event listeners and dispatches notifications to them.
    """
    def __init__(self):
        # event_type -> listeners
        self._listeners = defaultdict(list)

    def register(self, event_type: str, listener: Callable[..., None]):
        """
        Registers a listener for event_type. Registering the same listener twice is a no-op.
        """
        if listener not in self._listeners[event_type]:
            self._listeners[event_type].append(listener)

    def unregister(self, event_type: str, listener: Callable[..., None]):
        if listener in self._listeners[event_type]:
            self._listeners[event_type].remove(listener)

    def notify(self, event_type: str, **event_data):
        """
        Calls every listener for event_type with the event data as keyword arguments.
        A failing listener is logged and skipped.
        """
        for listener in list(self._listeners[event_type]):
            try:
                listener(**event_data)
            except Exception as e:
                logger.error("listener %r for '%s' failed: %s", listener, event_type, e)

    def listeners(self, event_type: str) -> list:
        return list(self._listeners.get(event_type, []))

    def clear_listeners(self, event_type: Optional[str] = None):
        """
        Clears the listeners of one event type, or of all types when none is given.
        """
        if event_type:
            self._listeners[event_type] = []
        else:
            self._listeners.clear()


class SweepEvent:
    SWEEP_STARTED = "sweep_started"
    POINT_STARTED = "point_started"
    POINT_SUCCEEDED = "point_succeeded"
    POINT_FAILED = "point_failed"
    POINT_SKIPPED = "point_skipped"
    SWEEP_COMPLETED = "sweep_completed"
