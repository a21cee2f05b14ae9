"""Manager-style shared dicts, lists and objects.

Objects keep their attributes in a store hash. A method call takes the
object's lock, loads the attributes into a local instance of the registered
class, runs the method there and writes back whatever changed.
"""

from __future__ import annotations

import base64
import functools
import pickle

from ..errors import UnknownMethod
from ..registry import Registry, default_registry
from .base import DEFAULT_TTL, MANAGER_DICT, MANAGER_LIST, MANAGER_OBJECT, Resource, pack_str, unpack_str
from .connection import Pipe, Queue
from .sharedctypes import Array, Value
from .synchronize import TOKEN, Barrier, Condition, Event, Lock, Semaphore, _TokenLock

_P = pickle.HIGHEST_PROTOCOL


def _dumps(v) -> bytes:
    return pickle.dumps(v, protocol=_P)


def encode_field(key) -> str:
    """Hash field name for a dict key; non-string keys are pickled."""
    if isinstance(key, str) and not key.startswith("\x00"):
        return key
    return "\x00" + base64.b64encode(_dumps(key)).decode()


def decode_field(field: str):
    if field.startswith("\x00"):
        return pickle.loads(base64.b64decode(field[1:]))
    return field


class _Locked:
    def __init__(self, lock: _TokenLock):
        self.lock = lock

    def __enter__(self):
        self.lock.acquire()

    def __exit__(self, *exc):
        if self.lock.held():
            self.lock.release()


class DictProxy(Resource):
    """A shared dict. Single-key operations are atomic on their own;
    read-modify-write helpers (``pop``, ``setdefault``...) take an internal lock.
    """

    kind = MANAGER_DICT
    key_names = ("hash", "lock")

    def __init__(self, *args, store=None, ttl: int = DEFAULT_TTL, **kwargs):
        initial = dict(*args, **kwargs)

        def seed():
            calls = [("hash_set", (self.key("hash"), encode_field(k), _dumps(v))) for k, v in initial.items()]
            return calls + [("push_tail", (self.key("lock"), TOKEN))]

        self._create(store, ttl, seed)
        self._setup()

    def _setup(self):
        self._lock = _TokenLock(self, self.key("lock"))

    def _load_fields(self, data: bytes) -> None:
        self._setup()

    def __getitem__(self, key):
        self._touch()
        raw = self._store.hash_get(self.key("hash"), encode_field(key))
        if raw is None:
            raise KeyError(key)
        return pickle.loads(raw)

    def __setitem__(self, key, value) -> None:
        self._touch()
        self._store.hash_set(self.key("hash"), encode_field(key), _dumps(value))

    def __delitem__(self, key) -> None:
        self._touch()
        if not self._store.hash_del(self.key("hash"), encode_field(key)):
            raise KeyError(key)

    def __contains__(self, key) -> bool:
        self._touch()
        return self._store.hash_get(self.key("hash"), encode_field(key)) is not None

    def get(self, key, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def copy(self) -> dict:
        self._touch()
        return {decode_field(f): pickle.loads(v) for f, v in self._store.hash_get_all(self.key("hash")).items()}

    def keys(self):
        return list(self.copy().keys())

    def values(self):
        return list(self.copy().values())

    def items(self):
        return list(self.copy().items())

    def __iter__(self):
        return iter(self.keys())

    def __len__(self) -> int:
        self._touch()
        return len(self._store.hash_get_all(self.key("hash")))

    def update(self, *args, **kwargs) -> None:
        self._touch()
        items = dict(*args, **kwargs)
        if items:
            h = self.key("hash")
            self._store.batch([("hash_set", (h, encode_field(k), _dumps(v))) for k, v in items.items()])

    _MISSING = object()

    def pop(self, key, default=_MISSING):
        with _Locked(self._lock):
            try:
                value = self[key]
            except KeyError:
                if default is DictProxy._MISSING:
                    raise
                return default
            self._store.hash_del(self.key("hash"), encode_field(key))
            return value

    def setdefault(self, key, default=None):
        with _Locked(self._lock):
            try:
                return self[key]
            except KeyError:
                self[key] = default
                return default

    def clear(self) -> None:
        self._touch()
        self._store.batch([("key_delete", (self.key("hash"),)), ("key_expire", (self.key("hash"), self.ttl))])

    def __repr__(self):
        return f"<DictProxy {self.uuid.hex[:8]} {self.copy()!r}>"


class ListProxy(Resource):
    """A shared list. Mutations are serialized by an internal lock."""

    kind = MANAGER_LIST
    key_names = ("items", "lock")

    def __init__(self, seq=(), *, store=None, ttl: int = DEFAULT_TTL):
        initial = [_dumps(v) for v in seq]

        def seed():
            calls = [("push_tail", (self.key("items"), *initial))] if initial else []
            return calls + [("push_tail", (self.key("lock"), TOKEN))]

        self._create(store, ttl, seed)
        self._setup()

    def _setup(self):
        self._lock = _TokenLock(self, self.key("lock"))

    def _load_fields(self, data: bytes) -> None:
        self._setup()

    def _raw(self) -> list[bytes]:
        return self._store.list_range(self.key("items"), 0, -1)

    def _rewrite_calls(self, values: list) -> list:
        items = self.key("items")
        calls = [("key_delete", (items,)), ("key_expire", (items, self.ttl))]
        if values:
            calls.append(("push_tail", (items, *[_dumps(v) for v in values])))
        return calls

    def _mutate(self, fn):
        """Apply ``fn`` to a local copy under the lock and store the result."""
        self._touch()
        self._lock.acquire()
        try:
            values = [pickle.loads(r) for r in self._raw()]
            result = fn(values)
        except BaseException:
            self._lock.release()
            raise
        self._store.batch(self._rewrite_calls(values) + self._lock.release_calls())
        return result

    def _append_many(self, values: list) -> None:
        self._touch()
        if not values:
            return
        self._lock.acquire()
        self._store.batch([("push_tail", (self.key("items"), *[_dumps(v) for v in values]))] + self._lock.release_calls())

    def append(self, value) -> None:
        self._append_many([value])

    def extend(self, values) -> None:
        self._append_many(list(values))

    def __len__(self) -> int:
        self._touch()
        return self._store.list_len(self.key("items"))

    def __getitem__(self, i):
        self._touch()
        if isinstance(i, slice):
            return self.copy()[i]
        return pickle.loads(self._store.list_index_get(self.key("items"), i))

    def __setitem__(self, i, value) -> None:
        if isinstance(i, slice):
            def assign(values):
                values[i] = value

            self._mutate(assign)
            return
        self._touch()
        self._store.list_index_set(self.key("items"), i, _dumps(value))

    def __delitem__(self, i) -> None:
        def delete(values):
            del values[i]

        self._mutate(delete)

    def copy(self) -> list:
        self._touch()
        return [pickle.loads(r) for r in self._raw()]

    def __iter__(self):
        return iter(self.copy())

    def __contains__(self, value) -> bool:
        return value in self.copy()

    def index(self, value, *args) -> int:
        return self.copy().index(value, *args)

    def count(self, value) -> int:
        return self.copy().count(value)

    def pop(self, index: int = -1):
        return self._mutate(lambda values: values.pop(index))

    def insert(self, index: int, value) -> None:
        self._mutate(lambda values: values.insert(index, value))

    def remove(self, value) -> None:
        self._mutate(lambda values: values.remove(value))

    def reverse(self) -> None:
        self._mutate(lambda values: values.reverse())

    def sort(self, key=None, reverse: bool = False) -> None:
        self._mutate(lambda values: values.sort(key=key, reverse=reverse))

    def clear(self) -> None:
        self._mutate(lambda values: values.clear())

    def __repr__(self):
        return f"<ListProxy {self.uuid.hex[:8]} {self.copy()!r}>"


class ObjectProxy(Resource):
    """Proxy for an instance of a registered class whose attributes are shared.

    Public methods of the class can be called directly on the proxy; plain
    attribute reads are served from the store (``None`` when unset).
    """

    kind = MANAGER_OBJECT
    key_names = ("attrs", "lock")

    def __init__(self, class_name: str, attrs: dict | None = None, *, store=None, ttl: int = DEFAULT_TTL,
                 registry: Registry | None = None):
        registry = registry or default_registry
        registry.get_class(class_name)
        self.class_name = class_name
        self._registry = registry
        initial = dict(attrs or {})

        def seed():
            calls = [("hash_set", (self.key("attrs"), k, _dumps(v))) for k, v in initial.items()]
            return calls + [("push_tail", (self.key("lock"), TOKEN))]

        self._create(store, ttl, seed)
        self._setup()

    @classmethod
    def create(cls, class_name: str, *args, store=None, ttl: int = DEFAULT_TTL, registry: Registry | None = None, **kwargs):
        """Instantiate ``class_name`` locally and share its initial attributes."""
        registry = registry or default_registry
        instance = registry.get_class(class_name)(*args, **kwargs)
        return cls(class_name, vars(instance), store=store, ttl=ttl, registry=registry)

    def _setup(self):
        self._lock = _TokenLock(self, self.key("lock"))

    def _fields(self) -> bytes:
        return pack_str(self.class_name)

    def _load_fields(self, data: bytes) -> None:
        self.class_name, _ = unpack_str(data)
        self._registry = default_registry
        self._setup()

    def get_attr(self, name: str):
        self._touch()
        raw = self._store.hash_get(self.key("attrs"), name)
        return None if raw is None else pickle.loads(raw)

    def set_attr(self, name: str, value) -> None:
        self._touch()
        with _Locked(self._lock):
            self._store.hash_set(self.key("attrs"), name, _dumps(value))

    def attrs(self) -> dict:
        self._touch()
        return {k: pickle.loads(v) for k, v in self._store.hash_get_all(self.key("attrs")).items()}

    def call(self, method: str, *args, **kwargs):
        self._touch()
        cls = self._registry.get_class(self.class_name)
        fn = getattr(cls, method, None)
        if method.startswith("_") or not callable(fn):
            raise UnknownMethod(f"{self.class_name} has no public method {method!r}")
        attrs_key = self.key("attrs")
        self._lock.acquire()
        try:
            raw = self._store.hash_get_all(attrs_key)
            obj = cls.__new__(cls)
            obj.__dict__.update({k: pickle.loads(v) for k, v in raw.items()})
            result = fn(obj, *args, **kwargs)
        except BaseException:
            self._lock.release()
            raise
        calls = []
        for k, v in vars(obj).items():
            data = _dumps(v)
            if raw.get(k) != data:
                calls.append(("hash_set", (attrs_key, k, data)))
        calls += [("hash_del", (attrs_key, k)) for k in raw if k not in vars(obj)]
        self._store.batch(calls + self._lock.release_calls())
        return result

    def __getattr__(self, name):
        if name.startswith("_") or name in ("class_name", "uuid", "ttl", "prefix", "refs_key"):
            raise AttributeError(name)
        cls = self._registry.get_class(self.class_name)
        if callable(getattr(cls, name, None)):
            return functools.partial(self.call, name)
        return self.get_attr(name)

    def __repr__(self):
        return f"<ObjectProxy {self.class_name} {self.uuid.hex[:8]}>"


class Manager:
    """Factory for shared objects, mirroring ``multiprocessing.Manager()``.

    There is no server process: every object lives in the store. Objects
    created here are dropped on :meth:`shutdown` (or leaving a ``with``).
    """

    def __init__(self, store=None, ttl: int = DEFAULT_TTL, registry: Registry | None = None):
        self._store = store
        self.ttl = ttl
        self.registry = registry or default_registry
        self._created: list[Resource] = []

    @staticmethod
    def register(typeid: str, callable=None, **_ignored):
        """Register a class so shared instances can be created by name."""
        default_registry.register_class(typeid, callable)

    def _track(self, res):
        if isinstance(res, tuple):
            self._created.extend(res)
        else:
            self._created.append(res)
        return res

    def _kw(self):
        return {"store": self._store, "ttl": self.ttl}

    def start(self) -> "Manager":
        return self

    def shutdown(self) -> None:
        created, self._created = self._created, []
        for res in reversed(created):
            res.drop()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()

    def dict(self, *args, **kwargs) -> DictProxy:
        return self._track(DictProxy(*args, **kwargs, **self._kw()))

    def list(self, seq=()) -> ListProxy:
        return self._track(ListProxy(seq, **self._kw()))

    def object(self, class_name: str, *args, **kwargs) -> ObjectProxy:
        return self._track(ObjectProxy.create(class_name, *args, registry=self.registry, **kwargs, **self._kw()))

    def Lock(self) -> Lock:
        return self._track(Lock(**self._kw()))

    def Semaphore(self, value: int = 1) -> Semaphore:
        return self._track(Semaphore(value, **self._kw()))

    def Condition(self, lock: Lock | None = None) -> Condition:
        return self._track(Condition(lock, **self._kw()))

    def Event(self) -> Event:
        return self._track(Event(**self._kw()))

    def Barrier(self, parties: int, action=None, timeout=None) -> Barrier:
        return self._track(Barrier(parties, action, timeout, **self._kw()))

    def Queue(self, maxsize: int = 0) -> Queue:
        return self._track(Queue(maxsize, **self._kw()))

    def Pipe(self, duplex: bool = True):
        return self._track(Pipe(duplex, **self._kw()))

    def Value(self, typecode, value=None) -> Value:
        return self._track(Value(typecode, value, **self._kw()))

    def Array(self, typecode, size_or_initializer) -> Array:
        return self._track(Array(typecode, size_or_initializer, **self._kw()))

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        self.registry.get_class(name)
        return functools.partial(self.object, name)
