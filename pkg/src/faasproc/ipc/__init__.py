"""Shared-state primitives backed by the store."""

from . import codec
from .base import DEFAULT_TTL, KIND_NAMES, Resource
from .connection import Connection, Pipe, Queue
from .managers import DictProxy, ListProxy, Manager, ObjectProxy
from .sharedctypes import Array, Value
from .synchronize import Barrier, Condition, Event, Lock, Semaphore

__all__ = [
    "Array",
    "Barrier",
    "Condition",
    "Connection",
    "DEFAULT_TTL",
    "DictProxy",
    "Event",
    "KIND_NAMES",
    "ListProxy",
    "Lock",
    "Manager",
    "ObjectProxy",
    "Pipe",
    "Queue",
    "Resource",
    "Semaphore",
    "Value",
    "codec",
]
