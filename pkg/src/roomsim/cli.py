"""Command line entry point.

Runs a scenario headless (fast, optionally tracing) or serves it over a
websocket for live viewers. Scenario can be a JSON file path or a built-in
name. Event files replay either a plain JSONL event list or a previously
recorded trace, whose applied events are re-injected at their original times.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import _kernels
from .engine import Engine
from .scenario import ScenarioError, load_scenario
from .scenarios import corridor_scenario, evaluation_scenario, safety_scenario, solo_scenario


def _resolve_scenario(name: str, seed: int | None):
    if os.path.exists(name):
        return load_scenario(name)
    if name == "evaluation":
        return load_scenario(evaluation_scenario())
    if name == "corridor":
        return load_scenario(corridor_scenario())
    if name == "solo":
        return load_scenario(solo_scenario())
    if name == "safety":
        return load_scenario(safety_scenario(seed if seed is not None else 0))
    raise ScenarioError(
        f"{name!r} is neither a file nor a built-in scenario "
        f"(evaluation, corridor, solo, safety)"
    )


def _load_events(path: str) -> list[dict]:
    """Plain JSONL events, or a trace file whose applied events are replayed."""
    events: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "robots" in rec and "tick" in rec:
                for ev in rec.get("events", []):
                    if "rejected" in ev:
                        continue
                    ev = dict(ev)
                    ev.setdefault("at", rec["t"])
                    events.append(ev)
            else:
                events.append(rec)
    return events


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="roomsim",
        description="Deterministic furniture-swarm simulator and coordination server",
    )
    parser.add_argument("--scenario", default="evaluation",
                        help="scenario JSON path or built-in name (default: evaluation)")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for the built-in randomized scenario")
    parser.add_argument("--headless", action="store_true",
                        help="run without a server and exit")
    parser.add_argument("--duration", type=float, default=None,
                        help="sim seconds to run (headless default 60; server runs until killed)")
    parser.add_argument("--events", default=None,
                        help="JSONL event file or recorded trace to replay")
    parser.add_argument("--trace-out", default=None,
                        help="write the canonical trace here and print its digest")
    parser.add_argument("--host", default=os.environ.get("ROOMSIM_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("ROOMSIM_PORT", "8765")))
    parser.add_argument("--realtime-factor", type=float,
                        default=float(os.environ.get("ROOMSIM_REALTIME_FACTOR", "1.0")),
                        help="sim speed vs wall clock in server mode; 0 = unthrottled")
    args = parser.parse_args(argv)

    try:
        world, scripted = _resolve_scenario(args.scenario, args.seed)
    except (ScenarioError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    events = list(scripted)
    if args.events:
        try:
            events.extend(_load_events(args.events))
        except (OSError, json.JSONDecodeError) as e:
            print(f"error reading events: {e}", file=sys.stderr)
            return 2

    engine = Engine(world, events=events, trace_path=args.trace_out)

    if args.headless:
        duration = args.duration if args.duration is not None else 60.0
        t0 = time.monotonic()
        engine.run(duration)
        wall = time.monotonic() - t0
        if engine.writer is not None:
            engine.writer.close()
            print(f"trace digest: {engine.digest()}")
        rate = world.now / wall if wall > 0 else float("inf")
        print(
            f"ran {world.tick} ticks ({world.now:.1f} s sim) in {wall:.2f} s wall "
            f"({rate:.1f}x realtime, kernels: {_kernels.BACKEND})"
        )
        return 0

    from .server import SyncServer

    server = SyncServer(engine, args.host, args.port, args.realtime_factor)
    server.start()
    print(f"serving {args.scenario} on ws://{args.host}:{server.bound_port} "
          f"(x{args.realtime_factor} realtime, kernels: {_kernels.BACKEND})")
    try:
        server.run_sim(args.duration)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        if engine.writer is not None:
            engine.writer.close()
            print(f"trace digest: {engine.digest()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
