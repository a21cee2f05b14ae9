"""``faasproc-bench``: run one benchmark, print a summary table, optionally write CSV."""

from __future__ import annotations

import argparse
import sys

from ..errors import FaasprocError, IntegrityError
from ..faas import COLD, WARM, LatencyModel
from .blobs import bench_blobs
from .forkjoin import bench_forkjoin
from .pi import bench_pi
from .pipe import DEFAULT_SIZES, bench_pipe
from .records import SCHEMAS, BenchmarkRecord, rows_to_csv
from .scattergather import bench_scattergather
from .sort import STRATEGIES, bench_sort
from .tasks import TRANSFORMS


def _ints(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=("sim", "daemons"), default="sim")
    common.add_argument("--store", default="embedded", help="'embedded' or host:port of a store server")
    common.add_argument("--workers", type=_ints, default=None, help="worker count, or a comma list for sweeps")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--csv", default=None, help="write the trial rows here")

    parser = argparse.ArgumentParser(prog="faasproc-bench", description=__doc__)
    sub = parser.add_subparsers(dest="bench", required=True)

    p = sub.add_parser("forkjoin", parents=[common], help="map of sleep tasks, overhead per phase")
    p.add_argument("--tasks", type=int, default=8)
    p.add_argument("--sleep", type=float, default=0.5, help="task sleep in seconds (5 for a full-scale run)")
    p.add_argument("--temperature", choices=(WARM, COLD, "both"), default="both")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--poll-interval", type=float, default=0.05)
    p.add_argument("--latency-config", default=None, help="simulator settings file (key = value)")
    p.add_argument("--zero-latency", action="store_true", help="no injected startup latency")
    p.add_argument("--ramp-csv", default=None, help="write per-task start/end offsets here")

    p = sub.add_parser("pipe", parents=[common], help="pipe latency and streaming throughput")
    p.add_argument("--messages", type=int, default=1000)
    p.add_argument("--payload-bytes", type=int, default=1 << 20)
    p.add_argument("--sizes", type=_ints, default=list(DEFAULT_SIZES), help="latency payload sizes")
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--cap-mb-s", type=float, default=None, help="also stream behind this cap and half of it")

    p = sub.add_parser("pi", parents=[common], help="Monte Carlo pi speedup")
    p.add_argument("--samples", type=int, default=10**7)

    p = sub.add_parser("sort", parents=[common], help="parallel sort strategies")
    p.add_argument("--length", type=int, default=10**5)
    p.add_argument("--strategy", choices=(*STRATEGIES, "all"), default="all")

    p = sub.add_parser("blobs", parents=[common], help="parallel object write/read rates")
    p.add_argument("--object-mb", type=float, default=16.0, help="per-worker object size (1024 for a full-scale run)")
    p.add_argument("--per-connection-mb-s", type=float, default=None)
    p.add_argument("--aggregate-mb-s", type=float, default=None)

    p = sub.add_parser("scattergather", parents=[common], help="partitioned row transform on a pool")
    p.add_argument("--rows", type=int, default=10_000)
    p.add_argument("--transform", choices=sorted(TRANSFORMS), default="identity")
    return parser


def run(args) -> BenchmarkRecord:
    env = {"backend": args.backend, "store": args.store, "seed": args.seed}
    workers = args.workers
    if args.bench == "forkjoin":
        if args.zero_latency:
            latency = LatencyModel.zero(seed=args.seed)
        elif args.latency_config:
            latency = LatencyModel.from_file(args.latency_config)
        else:
            latency = LatencyModel.lambda_defaults(seed=args.seed)
        temps = (WARM, COLD) if args.temperature == "both" else (args.temperature,)
        n_tasks = workers[0] if workers else args.tasks
        return bench_forkjoin(n_tasks, args.sleep, latency, temps, args.repetitions, args.poll_interval, **env)
    if args.bench == "pipe":
        return bench_pipe(args.messages, args.payload_bytes, args.sizes, args.rounds, args.cap_mb_s, **env)
    if args.bench == "pi":
        return bench_pi(args.samples, workers or (1, 2, 4, 8), **env)
    if args.bench == "sort":
        strategies = STRATEGIES if args.strategy == "all" else (args.strategy,)
        return bench_sort(args.length, workers[0] if workers else 4, strategies, **env)
    if args.bench == "blobs":
        return bench_blobs(workers or (1, 2, 4, 8), args.object_mb, args.per_connection_mb_s, args.aggregate_mb_s, **env)
    if args.bench == "scattergather":
        return bench_scattergather(args.rows, workers or (1, 2, 4, 8), args.transform, **env)
    raise ValueError(args.bench)


def format_table(rows: list[dict], columns) -> str:
    def cell(v):
        return f"{v:.4g}" if isinstance(v, float) else str(v)

    cells = [[cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _report(record: BenchmarkRecord, args) -> None:
    print(format_table(record.trials, list(SCHEMAS[record.bench_name])))
    if args.csv:
        record.to_csv(args.csv)
    ramp = record.extra.get("ramp")
    if ramp is not None and getattr(args, "ramp_csv", None):
        with open(args.ramp_csv, "w", newline="") as fh:
            fh.write(rows_to_csv(ramp, SCHEMAS["forkjoin_ramp"]))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        record = run(args)
    except IntegrityError as exc:
        if exc.record is not None:
            _report(exc.record, args)
        print(f"faasproc-bench: integrity failure: {exc}", file=sys.stderr)
        return 1
    except (FaasprocError, ValueError) as exc:
        print(f"faasproc-bench: {exc}", file=sys.stderr)
        return 2
    _report(record, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
