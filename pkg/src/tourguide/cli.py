"""Command-line entry points: serve, simulate, replay."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ServerConfig
from .runner import format_plan, replay, simulate


def _load_config(args: argparse.Namespace) -> ServerConfig:
    if args.config:
        return ServerConfig.from_file(args.config)
    return ServerConfig().with_env_overrides()


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import build_app

    config = _load_config(args)
    app = build_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    run = simulate(args.script, config=config)
    print(format_plan(run))
    return 0 if run.state.status.value in ("closed", "active") else 1


def cmd_replay(args: argparse.Namespace) -> int:
    config = _load_config(args)
    run = replay(args.transcript, config=config)
    print(format_plan(run))
    display = run.final_display
    print(f"display: mode={display.mode.value} slots={list(display.slot_names())} maps={display.show_maps}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tourguide",
        description="Phase-driven travel-planning dialogue orchestrator",
    )
    parser.add_argument("--config", help="JSON config file (see README)", default="")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the session server")
    p_serve.set_defaults(func=cmd_serve)

    p_sim = sub.add_parser("simulate", help="run a scripted dialogue headless and print the plan")
    p_sim.add_argument("script", help="dialogue script (C:/S: lines)")
    p_sim.set_defaults(func=cmd_simulate)

    p_replay = sub.add_parser("replay", help="re-execute a recorded transcript")
    p_replay.add_argument("transcript", help="line-delimited transcript file")
    p_replay.set_defaults(func=cmd_replay)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
