"""Ambient store, blob layer and backend.

Primitives and tasks find their store through :func:`current_store`. Worker
threads bind their own store with :func:`use`; everything else falls back to
process-wide defaults, created on demand from ``FAASPROC_STORE_ADDR``.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

_local = threading.local()
_defaults: dict = {}
_defaults_lock = threading.RLock()


def configure(store=None, blobs=None, backend=None) -> None:
    """Set process-wide defaults; ``None`` leaves a value unchanged."""
    with _defaults_lock:
        if store is not None:
            _defaults["store"] = store
        if blobs is not None:
            _defaults["blobs"] = blobs
        if backend is not None:
            _defaults["backend"] = backend


def reset() -> None:
    with _defaults_lock:
        backend = _defaults.pop("backend", None)
        _defaults.clear()
    if backend is not None:
        backend.close()


def current_store():
    store = getattr(_local, "store", None)
    if store is not None:
        return store
    with _defaults_lock:
        if "store" not in _defaults:
            from .store import connect

            _defaults["store"] = connect()
        return _defaults["store"]


def current_blobs():
    blobs = getattr(_local, "blobs", None)
    if blobs is not None:
        return blobs
    if getattr(_local, "store", None) is not None:
        from .objectfs import StoreBlobStore

        return StoreBlobStore(_local.store)
    with _defaults_lock:
        if "blobs" not in _defaults:
            from .objectfs import StoreBlobStore

            _defaults["blobs"] = StoreBlobStore(current_store())
        return _defaults["blobs"]


def current_backend():
    with _defaults_lock:
        if "backend" not in _defaults:
            from .faas import SimBackend

            _defaults["backend"] = SimBackend(store=current_store(), blobs=current_blobs())
        return _defaults["backend"]


@contextmanager
def use(store=None, blobs=None):
    """Bind a store (and blob layer) to the calling thread for the block."""
    saved = (getattr(_local, "store", None), getattr(_local, "blobs", None))
    _local.store, _local.blobs = store, blobs
    try:
        yield
    finally:
        _local.store, _local.blobs = saved


# Handles restored from task arguments are collected here and dropped by the
# worker once the task (or the pool worker's lifetime) ends.


@contextmanager
def adopting():
    stack = getattr(_local, "adopted", None)
    if stack is None:
        stack = _local.adopted = []
    scope: list = []
    stack.append(scope)
    try:
        yield scope
    finally:
        stack.pop()
        for handle in reversed(scope):
            try:
                handle.drop()
            except Exception:
                pass


def adopt(handle) -> None:
    stack = getattr(_local, "adopted", None)
    if stack:
        stack[-1].append(handle)
