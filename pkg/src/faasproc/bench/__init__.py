"""Desk-scale micro-benchmarks and their command-line harness."""

from . import tasks
from .blobs import bench_blobs
from .env import BenchEnv, make_env
from .forkjoin import bench_forkjoin, run_forkjoin
from .pi import bench_pi, estimate_pi
from .pipe import bench_pipe
from .records import SCHEMAS, BenchmarkRecord, rows_to_csv, validate_csv
from .scattergather import bench_scattergather, partition
from .sort import STRATEGIES, bench_sort, run_sort

__all__ = [
    "BenchEnv",
    "BenchmarkRecord",
    "SCHEMAS",
    "STRATEGIES",
    "bench_blobs",
    "bench_forkjoin",
    "bench_pi",
    "bench_pipe",
    "bench_scattergather",
    "bench_sort",
    "estimate_pi",
    "make_env",
    "partition",
    "rows_to_csv",
    "run_forkjoin",
    "run_sort",
    "tasks",
    "validate_csv",
]
