"""The shared-state store: embedded engine, wire protocol, server and client."""

import os

from .client import StoreClient
from .engine import StoreEngine
from .instrument import CountingStore, ThrottledStore
from .server import StoreServer, serve

STORE_ADDR_ENV = "FAASPROC_STORE_ADDR"
EMBEDDED = "embedded"


def connect(address: str | None = None, **kwargs):
    """Open a store by address; ``"embedded"`` (or nothing) gives a fresh engine.

    Without an explicit address the ``FAASPROC_STORE_ADDR`` environment
    variable is consulted.
    """
    if address is None:
        address = os.environ.get(STORE_ADDR_ENV, EMBEDDED)
    if address in ("", EMBEDDED):
        return StoreEngine(**kwargs)
    return StoreClient(address, **kwargs)


__all__ = [
    "CountingStore",
    "EMBEDDED",
    "STORE_ADDR_ENV",
    "StoreClient",
    "StoreEngine",
    "StoreServer",
    "ThrottledStore",
    "connect",
    "serve",
]
