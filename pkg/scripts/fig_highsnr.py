#!/usr/bin/env python3
"""High-SNR expansion constants, remainder envelope, and the asynchronous
latency-gap bracket across log-SNR values, at the default geometry."""

import sys

from pinchfl.cli import main

if __name__ == "__main__":
    sys.exit(main(["highsnr", "--out", "artifacts/highsnr"]))
