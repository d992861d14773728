#!/usr/bin/env python3
"""Full Monte Carlo verification of every closed-form moment and bound."""

import sys

from pinchfl.cli import main

if __name__ == "__main__":
    sys.exit(main([
        "verify", "--k", "40", "--m", "7", "--corridor", "10",
        "--trials", "1000000", "--seed", "1", "--out", "artifacts/verify",
    ]))
