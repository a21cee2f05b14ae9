"""``faasproc-store`` and ``faasproc-worker`` entry points."""

from __future__ import annotations

import argparse
import logging
import os
import signal
import sys
import threading

from .errors import FaasprocError


def _wait_for_signal() -> None:
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    while not stop.wait(1.0):
        pass


def store_main(argv=None) -> int:
    from .store import serve

    parser = argparse.ArgumentParser(prog="faasproc-store", description="Serve a store over TCP.")
    parser.add_argument("--bind", default="127.0.0.1:6380", help="host:port to listen on (port 0 picks one)")
    parser.add_argument("--sweep-interval-ms", type=float, default=500.0, help="expiry sweep period")
    args = parser.parse_args(argv)
    if args.sweep_interval_ms <= 0:
        parser.error("--sweep-interval-ms must be > 0")
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    try:
        server = serve(args.bind, sweep_interval=args.sweep_interval_ms / 1000.0)
    except FaasprocError as exc:
        print(f"faasproc-store: {exc}", file=sys.stderr)
        return 2
    print(f"listening on {server.address}", flush=True)
    try:
        _wait_for_signal()
    finally:
        server.close()
    return 0


def worker_main(argv=None) -> int:
    from .faas import WorkerDaemon
    from .registry import load_modules
    from .store import STORE_ADDR_ENV, connect

    parser = argparse.ArgumentParser(prog="faasproc-worker", description="Run a worker daemon against a store.")
    parser.add_argument("--store", default=os.environ.get(STORE_ADDR_ENV), help="store address host:port")
    parser.add_argument("--bind", default=None, help="host:port for the JSON status endpoint")
    parser.add_argument("--concurrency", type=int, default=4, help="invocations run at once")
    parser.add_argument("--registry", default="", help="comma-separated modules that register task functions")
    args = parser.parse_args(argv)
    if not args.store or args.store == "embedded":
        parser.error("--store (or FAASPROC_STORE_ADDR) must name a networked store")
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    try:
        load_modules(args.registry)
        store = connect(args.store)
        daemon = WorkerDaemon(store, concurrency=args.concurrency, bind=args.bind).start()
    except (FaasprocError, ImportError, ValueError) as exc:
        print(f"faasproc-worker: {exc}", file=sys.stderr)
        return 2
    print(f"worker {daemon.daemon_id} serving {args.store} with {args.concurrency} slots", flush=True)
    try:
        _wait_for_signal()
    finally:
        daemon.stop()
        store.close()
    return 0
