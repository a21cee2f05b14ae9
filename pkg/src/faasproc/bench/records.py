"""Benchmark records and their CSV schemas."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

# Column -> type. Every CSV a benchmark writes has exactly these columns.
SCHEMAS: dict[str, dict[str, type]] = {
    "forkjoin": {
        "trial": int, "temperature": str, "n_tasks": int, "sleep_s": float, "wall_s": float, "overhead_s": float,
        "serialize_ms": float, "upload_ms": float, "invoke_ms": float, "setup_ms": float, "join_ms": float,
        "total_ms": float,
    },
    "forkjoin_ramp": {
        "trial": int, "task_index": int, "dispatch_s": float, "start_s": float, "end_s": float, "detected_s": float,
    },
    "pipe": {
        "transport": str, "mode": str, "payload_bytes": int, "messages": int, "latency_ms": float, "mb_per_s": float,
        "cap_mb_s": float, "checksum_failures": int,
    },
    "pi": {
        "workers": int, "samples": int, "hits": int, "estimate": float, "abs_error": float, "wall_s": float,
        "speedup": float,
    },
    "sort": {
        "strategy": str, "array_len": int, "workers": int, "merges": int, "round_trips": int, "wall_s": float,
        "matches_oracle": int,
    },
    "blobs": {
        "workers": int, "object_mb": float, "write_mb_s": float, "read_mb_s": float, "hash_failures": int,
    },
    "scattergather": {
        "n_rows": int, "workers": int, "transform": str, "max_partition": int, "min_partition": int, "wall_s": float,
        "order_preserved": int,
    },
}


@dataclass
class BenchmarkRecord:
    """Everything needed to rerun one benchmark, plus what it measured.

    ``trials`` holds one dict per CSV row of the benchmark's schema.
    """

    bench_name: str
    config: dict
    trials: list[dict] = field(default_factory=list)
    repetitions: int = 1
    seed: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def schema(self) -> dict[str, type]:
        return SCHEMAS[self.bench_name]

    def to_csv(self, target=None) -> str:
        text = rows_to_csv(self.trials, self.schema)
        if target is not None:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=str, sort_keys=True)


def _fmt(value, kind) -> str:
    if kind is float:
        return f"{float(value):.6g}"
    if kind is int:
        return str(int(value))
    return str(value)


def rows_to_csv(rows: list[dict], schema: dict[str, type]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(schema)
    for row in rows:
        missing = set(schema) - set(row)
        if missing:
            raise ValueError(f"row lacks columns {sorted(missing)}")
        writer.writerow([_fmt(row[c], t) for c, t in schema.items()])
    return buf.getvalue()


def validate_csv(text: str, bench_name: str) -> list[dict]:
    """Parse ``text`` against the named schema; raises ValueError on any mismatch."""
    schema = SCHEMAS[bench_name]
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != tuple(schema):
        raise ValueError(f"{bench_name}: header {reader.fieldnames} != {list(schema)}")
    rows = []
    for n, raw in enumerate(reader, start=2):
        row = {}
        for column, kind in schema.items():
            value = raw[column]
            if value is None:
                raise ValueError(f"{bench_name}: line {n} is short")
            try:
                row[column] = kind(value)
            except ValueError:
                raise ValueError(f"{bench_name}: line {n}: {column}={value!r} is not {kind.__name__}") from None
        rows.append(row)
    return rows
