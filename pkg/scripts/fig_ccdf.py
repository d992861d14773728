#!/usr/bin/env python3
"""Latency CCDFs for both architectures: synchronous round time (M = 7)
and asynchronous single-upload time, at the default operating point."""

import sys

from pinchfl.cli import main

if __name__ == "__main__":
    rc = main([
        "ccdf", "--mode", "sfl", "--m", "7", "--trials", "200000",
        "--seed", "11", "--out", "artifacts/ccdf_sfl",
    ])
    rc |= main([
        "ccdf", "--mode", "afl", "--trials", "200000",
        "--seed", "11", "--out", "artifacts/ccdf_afl",
    ])
    sys.exit(rc)
