"""Console entry points: the daemon (hubd) and the benchmark driver
(hubbench)."""

from __future__ import annotations

import argparse
import logging
import signal
import sys

from . import bench
from .config import load_config
from .errors import (
    BindError,
    ConfigError,
    DuplicateServiceNameError,
    HubError,
    UnreachableError,
)
from .hub import Hub

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BIND = 3

_LOG_LEVELS = {
    "trace": logging.DEBUG,
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warn": logging.WARNING,
    "error": logging.ERROR,
}


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=_LOG_LEVELS[level],
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def hubd_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hubd",
        description="Plugin-based control daemon over simulated DAQ hardware.")
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--search-path", action="append", default=[],
                        metavar="DIR", help="plugin search directory (repeatable)")
    parser.add_argument("--log-level", default="info", choices=sorted(_LOG_LEVELS))
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    log = logging.getLogger("hubd")

    try:
        config = load_config(args.config)
    except (FileNotFoundError, ConfigError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG

    hub = Hub(config, search_paths=args.search_path)
    try:
        hub.build()
        hub.start()
    except (BindError, DuplicateServiceNameError) as exc:
        log.error("startup failed: %s", exc)
        hub.stop()
        return EXIT_BIND
    except HubError as exc:
        log.error("startup failed: %s", exc)
        hub.stop()
        return EXIT_CONFIG

    def shutdown(signum, frame):
        log.info("signal %d, shutting down", signum)
        hub._stop_event.set()

    # handlers must be live before the banner invites clients in
    signal.signal(signal.SIGTERM, shutdown)
    signal.signal(signal.SIGINT, shutdown)

    host = config.server_listen.rsplit(":", 1)[0]
    # parse-friendly announcement; also reveals the port when binding :0
    print(f"listening on {host}:{hub.bound_port}", flush=True)
    try:
        hub.wait()
    except KeyboardInterrupt:
        pass
    finally:
        hub.stop()
    return EXIT_OK


def _apply_realtime_priority(log: logging.Logger) -> None:
    """Best effort: raise priority and request FIFO scheduling."""
    import os
    try:
        os.nice(-20)
    except OSError as exc:
        log.warning("cannot raise priority: %s", exc)
    try:
        os.sched_setscheduler(
            0, os.SCHED_FIFO,
            os.sched_param(os.sched_get_priority_max(os.SCHED_FIFO)))
    except (OSError, AttributeError) as exc:
        log.warning("cannot set FIFO scheduling: %s", exc)


def hubbench_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hubbench", description="Latency and throughput benchmarks.")
    parser.add_argument("kind", choices=bench.KINDS)
    parser.add_argument("--sizes", required=True,
                        help="comma-separated array/block sizes")
    parser.add_argument("--reps", type=int, default=1000,
                        help="repetitions per cell")
    parser.add_argument("--direction", default="r", choices=bench.DIRECTIONS)
    parser.add_argument("--variant", default="byte", choices=bench.VARIANTS)
    parser.add_argument("--width", type=int, default=32)
    parser.add_argument("--blocks", type=int, default=256,
                        help="blocks per stream (throughput)")
    parser.add_argument("--target", help="daemon host:port for client paths")
    parser.add_argument("--endpoint", default="regs0")
    parser.add_argument("--attribute", default="raw0")
    parser.add_argument("--out", required=True, help="CSV output path")
    parser.add_argument("--virtual-clock", action="store_true",
                        help="deterministic virtual-clock mode (no wall time)")
    parser.add_argument("--realtime-priority", action="store_true",
                        help="best-effort nice -20 and FIFO scheduling")
    parser.add_argument("--log-level", default="info", choices=sorted(_LOG_LEVELS))
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    log = logging.getLogger("hubbench")

    if args.realtime_priority:
        _apply_realtime_priority(log)

    try:
        sizes = tuple(int(s) for s in args.sizes.split(",") if s)
    except ValueError:
        log.error("unparsable --sizes: %r", args.sizes)
        return EXIT_CONFIG

    try:
        spec = bench.WorkloadSpec(
            kind=args.kind,
            sizes=sizes,
            repetitions=args.reps,
            direction=args.direction,
            width=args.width,
            variant=args.variant,
            blocks=args.blocks,
            virtual_clock=args.virtual_clock,
        )
        if args.kind == "ep-latency":
            records = bench.run_ep_latency(spec)
        elif args.kind == "attr-latency":
            records = bench.run_attr_latency(
                spec, target=args.target, attribute=args.attribute)
        elif args.kind == "client-latency":
            if not args.target:
                raise ConfigError("client-latency needs --target")
            records = bench.run_client_latency(
                spec, args.target, endpoint=args.endpoint)
        else:
            if not args.target:
                raise ConfigError("throughput needs --target")
            records, rates = bench.run_throughput(spec, args.target)
            for size, mbps in rates:
                print(f"blocksize {size} B: {mbps:.1f} Mbit/s")
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except UnreachableError as exc:
        log.error("%s", exc)
        return 1

    bench.emit_csv(records, args.out)
    for r in records:
        print(f"size {r.size}: n={r.n} mean={r.mean_ns:.0f} ns "
              f"median={r.median_ns:.0f} ns q99={r.q99_ns:.0f} ns")
    print(f"wrote {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(hubd_main())
