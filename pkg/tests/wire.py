"""Random request/response generators for wire-protocol tests."""

import random

from faasproc.store import protocol as p

_KINDS = {"str", "bytes", "int", "flag"}


def _value(rng: random.Random, kind: str):
    if kind == "str":
        return "".join(rng.choice("abcxyz/é漢0123456789") for _ in range(rng.randint(0, 12)))
    if kind == "bytes":
        return rng.randbytes(rng.randint(0, 40))
    if kind == "int":
        return rng.choice([0, -1, 1, rng.randint(-(2**63), 2**63 - 1), rng.randint(-1000, 1000)])
    if kind == "flag":
        return rng.random() < 0.5
    raise ValueError(kind)


def random_request(rng: random.Random) -> p.Request:
    op = rng.choice(list(p.Op))
    args = []
    for kind in p.REQUEST_SCHEMA[op]:
        if kind.endswith("*"):
            args.extend(_value(rng, kind[:-1]) for _ in range(rng.randint(1, 5)))
        else:
            args.append(_value(rng, kind))
    return p.Request(op, rng.getrandbits(64), tuple(args))


def random_response(rng: random.Random):
    rid = rng.getrandbits(64)
    if rng.random() < 0.2:
        return p.ErrorResponse(rid, rng.choice(list(p.ErrorCode)), _value(rng, "str"))
    op = rng.choice(list(p.Op))
    kind = p.RESPONSE_SCHEMA[op]
    if kind is None:
        value = None
    elif kind == "bytes*":
        value = [_value(rng, "bytes") for _ in range(rng.randint(0, 4))]
    elif kind == "bytes?":
        value = None if rng.random() < 0.3 else _value(rng, "bytes")
    elif kind == "pairs":
        value = {_value(rng, "str"): _value(rng, "bytes") for _ in range(rng.randint(0, 4))}
    else:
        value = _value(rng, kind)
    return p.Response(op, rid, value)
