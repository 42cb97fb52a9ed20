#!/usr/bin/env python3
"""Run the bars-and-stripes hidden-unit sweep with the checked-in config."""

import sys
from pathlib import Path

from sqrbm.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    argv = ["sweep", "--config", str(ROOT / "docs" / "bas_sweep.cfg")]
    raise SystemExit(main(argv + sys.argv[1:]))
