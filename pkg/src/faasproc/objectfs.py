"""File-like access over an immutable blob store.

Objects are written whole: a file opened for writing or appending buffers
everything locally and commits one new object version when it is closed.
Until then other readers keep seeing the previous version.
"""

from __future__ import annotations

import hashlib
import io
import json
import posixpath
import threading
import time
from dataclasses import dataclass

from .errors import CommitFailed, NotFound


@dataclass(frozen=True)
class BlobRef:
    bucket: str
    key: str
    size: int
    etag: str


def etag(data: bytes) -> str:
    return hashlib.md5(data, usedforsecurity=False).hexdigest()


class MemoryBlobStore:
    """Blob backend held in this process's memory."""

    def __init__(self):
        self._objects: dict[tuple[str, str], bytes] = {}
        self._lock = threading.Lock()

    def put(self, bucket: str, key: str, data: bytes) -> BlobRef:
        data = bytes(data)
        with self._lock:
            self._objects[bucket, key] = data
        return BlobRef(bucket, key, len(data), etag(data))

    def get(self, bucket: str, key: str) -> bytes:
        with self._lock:
            try:
                return self._objects[bucket, key]
            except KeyError:
                raise NotFound(f"{bucket}/{key}") from None

    def head(self, bucket: str, key: str) -> BlobRef | None:
        with self._lock:
            data = self._objects.get((bucket, key))
        return None if data is None else BlobRef(bucket, key, len(data), etag(data))

    def delete(self, bucket: str, key: str) -> bool:
        with self._lock:
            return self._objects.pop((bucket, key), None) is not None

    def list(self, bucket: str, prefix: str = "") -> list[str]:
        with self._lock:
            return sorted(k for b, k in self._objects if b == bucket and k.startswith(prefix))


class StoreBlobStore:
    """Blob backend kept in the shared store, so any worker can reach it.

    Each bucket is two hashes, one with the object bytes and one with their
    size and etag; both are written in a single atomic batch.
    """

    def __init__(self, store):
        self.store = store

    @staticmethod
    def _keys(bucket: str) -> tuple[str, str]:
        return f"blobs/{bucket}/data", f"blobs/{bucket}/meta"

    def put(self, bucket: str, key: str, data: bytes) -> BlobRef:
        data = bytes(data)
        ref = BlobRef(bucket, key, len(data), etag(data))
        data_key, meta_key = self._keys(bucket)
        meta = json.dumps({"size": ref.size, "etag": ref.etag}).encode()
        self.store.batch([("hash_set", (data_key, key, data)), ("hash_set", (meta_key, key, meta))])
        return ref

    def get(self, bucket: str, key: str) -> bytes:
        data = self.store.hash_get(self._keys(bucket)[0], key)
        if data is None:
            raise NotFound(f"{bucket}/{key}")
        return data

    def head(self, bucket: str, key: str) -> BlobRef | None:
        meta = self.store.hash_get(self._keys(bucket)[1], key)
        if meta is None:
            return None
        info = json.loads(meta)
        return BlobRef(bucket, key, info["size"], info["etag"])

    def delete(self, bucket: str, key: str) -> bool:
        data_key, meta_key = self._keys(bucket)
        removed, _ = self.store.batch([("hash_del", (data_key, key)), ("hash_del", (meta_key, key))])
        return bool(removed)

    def list(self, bucket: str, prefix: str = "") -> list[str]:
        return sorted(k for k in self.store.hash_get_all(self._keys(bucket)[1]) if k.startswith(prefix))


class ThrottledBlobStore:
    """Bandwidth caps in front of another blob backend.

    Every transfer is limited to ``per_connection_mb_s`` and all transfers
    share one link of ``aggregate_mb_s``; either cap may be ``None``.
    """

    def __init__(self, inner, per_connection_mb_s: float | None = None, aggregate_mb_s: float | None = None):
        self.inner = inner
        self.per_connection = per_connection_mb_s * 1e6 if per_connection_mb_s else None
        self.aggregate = aggregate_mb_s * 1e6 if aggregate_mb_s else None
        self._lock = threading.Lock()
        self._link_free = 0.0

    def _charge(self, nbytes: int, started: float) -> None:
        finish = started
        if self.per_connection:
            finish = started + nbytes / self.per_connection
        if self.aggregate:
            with self._lock:
                begin = max(started, self._link_free)
                self._link_free = begin + nbytes / self.aggregate
                finish = max(finish, self._link_free)
        delay = finish - time.monotonic()
        if delay > 0:
            time.sleep(delay)

    def put(self, bucket, key, data):
        started = time.monotonic()
        ref = self.inner.put(bucket, key, data)
        self._charge(len(data), started)
        return ref

    def get(self, bucket, key):
        started = time.monotonic()
        data = self.inner.get(bucket, key)
        self._charge(len(data), started)
        return data

    def __getattr__(self, name):
        return getattr(self.inner, name)


def normalize(path: str) -> str:
    """Canonical object key for ``path``; rejects any ``..`` component."""
    if any(part == ".." for part in path.replace("\\", "/").split("/")):
        raise ValueError(f"path traversal is not allowed: {path!r}")
    norm = posixpath.normpath("/" + path).lstrip("/")
    return "" if norm == "." else norm


class ObjectFile(io.RawIOBase):
    """A file opened on an :class:`ObjectFS`. Writes commit on close."""

    def __init__(self, fs: "ObjectFS", key: str, mode: str):
        super().__init__()
        self._fs, self._key, self.mode = fs, key, mode
        self._writable = mode[0] in "wa"
        if mode[0] == "r":
            self._buf = io.BytesIO(fs.blobs.get(fs.bucket, key))
        elif mode[0] == "a":
            try:
                existing = fs.blobs.get(fs.bucket, key)
            except NotFound:
                existing = b""
            self._buf = io.BytesIO()
            self._buf.write(existing)
        else:
            self._buf = io.BytesIO()
        self.name = key
        self.committed: BlobRef | None = None

    def _check_closed(self):
        if self.closed:
            raise ValueError("I/O operation on closed file")

    def readable(self):
        return not self._writable

    def writable(self):
        return self._writable

    def seekable(self):
        return not self._writable

    def readinto(self, b):
        self._check_closed()
        data = self._buf.read(len(b))
        b[: len(data)] = data
        return len(data)

    def read(self, size: int = -1) -> bytes:
        self._check_closed()
        if self._writable:
            raise io.UnsupportedOperation("not readable")
        return self._buf.read(None if size is None or size < 0 else size)

    def readall(self) -> bytes:
        return self.read()

    def write(self, data) -> int:
        self._check_closed()
        if not self._writable:
            raise io.UnsupportedOperation("not writable")
        return self._buf.write(data)

    def seek(self, pos, whence=0):
        if self._writable:
            raise io.UnsupportedOperation("seek on a write-only object")
        return self._buf.seek(pos, whence)

    def tell(self):
        return self._buf.tell()

    def getvalue(self) -> bytes:
        """The bytes that will be (or were) committed."""
        return self._buf.getvalue()

    def commit(self) -> BlobRef:
        try:
            self.committed = self._fs.blobs.put(self._fs.bucket, self._key, self._buf.getvalue())
        except Exception as exc:
            raise CommitFailed(self._key, self._buf.getvalue(), exc) from exc
        return self.committed

    def close(self):
        if self.closed:
            return
        if self._writable:
            self.commit()
        super().close()


class ObjectFS:
    """``open``/``os.path``-style access to one bucket of a blob store."""

    def __init__(self, blobs=None, bucket: str = "faasproc-fs"):
        if blobs is None:
            from . import context

            blobs = context.current_blobs()
        self.blobs = blobs
        self.bucket = bucket

    def open(self, path: str, mode: str = "r", encoding: str = "utf-8"):
        base = mode.replace("b", "").replace("t", "")
        if base not in ("r", "w", "a"):
            raise ValueError(f"unsupported mode {mode!r}")
        raw = ObjectFile(self, normalize(path), base)
        if "b" in mode:
            return raw
        if base == "r":
            return io.TextIOWrapper(io.BufferedReader(raw), encoding=encoding)
        return io.TextIOWrapper(io.BufferedWriter(raw), encoding=encoding, write_through=True)

    def read_bytes(self, path: str) -> bytes:
        return self.blobs.get(self.bucket, normalize(path))

    def write_bytes(self, path: str, data: bytes) -> BlobRef:
        return self.blobs.put(self.bucket, normalize(path), data)

    def exists(self, path: str) -> bool:
        key = normalize(path)
        return self.blobs.head(self.bucket, key) is not None or self.isdir(key)

    def isfile(self, path: str) -> bool:
        return self.blobs.head(self.bucket, normalize(path)) is not None

    def isdir(self, path: str) -> bool:
        prefix = normalize(path)
        return bool(self.blobs.list(self.bucket, prefix + "/" if prefix else ""))

    def getsize(self, path: str) -> int:
        ref = self.blobs.head(self.bucket, normalize(path))
        if ref is None:
            raise NotFound(path)
        return ref.size

    def listdir(self, prefix: str = "") -> list[str]:
        """Immediate children of a directory, with ``/`` as the delimiter."""
        base = normalize(prefix)
        base = base + "/" if base else ""
        names = set()
        for key in self.blobs.list(self.bucket, base):
            names.add(key[len(base):].split("/", 1)[0])
        return sorted(names)

    def remove(self, path: str) -> bool:
        return self.blobs.delete(self.bucket, normalize(path))


def open(path: str, mode: str = "r", encoding: str = "utf-8", fs: ObjectFS | None = None):  # noqa: A001
    return (fs or ObjectFS()).open(path, mode, encoding=encoding)
