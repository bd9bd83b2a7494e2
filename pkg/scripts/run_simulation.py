#!/usr/bin/env python3
"""Run the bundled full-session dialogue script headless and print the plan.

Usage: python scripts/run_simulation.py [script_path]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tourguide.config import data_path  # noqa: E402
from tourguide.runner import format_plan, simulate  # noqa: E402


def main() -> int:
    script = sys.argv[1] if len(sys.argv) > 1 else data_path("scripts", "full_session.txt")
    run = simulate(script)
    print(format_plan(run))
    print()
    print("phase trace:", " -> ".join(str(p) for p in run.phase_trace()))
    print(f"speech segments emitted: {len(run.segments)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
