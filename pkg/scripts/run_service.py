#!/usr/bin/env python3
"""Run the HTTP service locally.

Configuration comes from the environment (see docs/http_api.md) or flags:

    python3 scripts/run_service.py --listen 127.0.0.1:8080 --data-dir ./data
    python3 scripts/run_service.py --stub dataset/stubs/e2e_session.stub
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from optexplain.cli import main  # noqa: E402

if __name__ == "__main__":
    raise SystemExit(main(["serve"] + sys.argv[1:]))
