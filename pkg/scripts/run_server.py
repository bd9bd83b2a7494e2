#!/usr/bin/env python3
"""Start the session server with the bundled fixtures and scripted backend.

Usage: python scripts/run_server.py [config.json]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import uvicorn  # noqa: E402

from tourguide.config import ServerConfig, data_path  # noqa: E402
from tourguide.service import build_app  # noqa: E402


def main() -> int:
    if len(sys.argv) > 1:
        config = ServerConfig.from_file(sys.argv[1])
    else:
        config = ServerConfig(script_path=str(data_path("scripts", "demo_backend.txt")))
    app = build_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
