#!/usr/bin/env python3
"""Run the Gaussian sample-budget comparison with the checked-in config."""

import sys
from pathlib import Path

from sqrbm.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    argv = ["budget", "--config", str(ROOT / "docs" / "gaussian_budget.cfg")]
    raise SystemExit(main(argv + sys.argv[1:]))
