"""Name-based registry for task functions and manager classes.

Tasks never ship code. Both the orchestrating side and every worker resolve a
function by the name it was registered under, so the modules that register
functions must be imported on both sides.
"""

from __future__ import annotations

import importlib
import threading
from typing import Callable

from .errors import UnknownClass, UnknownFunction

_ATTR = "__faasproc_name__"


class Registry:
    def __init__(self):
        self._functions: dict[str, Callable] = {}
        self._classes: dict[str, type] = {}
        self._lock = threading.Lock()

    def register(self, name: str | Callable | None = None):
        """Register a function, usable bare or as ``@register("name")``."""
        if callable(name):
            return self.register()(name)

        def decorator(fn):
            key = name or f"{fn.__module__}.{fn.__qualname__}"
            with self._lock:
                self._functions[key] = fn
            try:
                setattr(fn, _ATTR, key)
            except (AttributeError, TypeError):
                pass
            return fn

        return decorator

    def register_class(self, name: str | None = None, cls: type | None = None):
        def decorator(klass):
            with self._lock:
                self._classes[name or klass.__name__] = klass
            return klass

        return decorator(cls) if cls is not None else decorator

    def get(self, name: str) -> Callable:
        try:
            return self._functions[name]
        except KeyError:
            raise UnknownFunction(f"function {name!r} is not registered") from None

    def get_class(self, name: str) -> type:
        try:
            return self._classes[name]
        except KeyError:
            raise UnknownClass(f"manager class {name!r} is not registered") from None

    def __contains__(self, name) -> bool:
        return name in self._functions

    def names(self) -> list[str]:
        return sorted(self._functions)


default_registry = Registry()
register = default_registry.register
register_class = default_registry.register_class


def function_name(target) -> str:
    """Resolve a task target (a registered function or its name) to a name."""
    if isinstance(target, str):
        return target
    name = getattr(target, _ATTR, None)
    if name is None:
        raise UnknownFunction(f"{target!r} is not a registered task function")
    return name


def load_modules(spec: str | None) -> None:
    """Import a comma-separated list of modules so their registrations run."""
    for module in (spec or "").split(","):
        module = module.strip()
        if module:
            importlib.import_module(module)
