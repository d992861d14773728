#!/usr/bin/env python3
"""Paired synchronous and asynchronous training runs on the synthetic
quadratic objective: fixed radiator vs pinched radiator, same seed."""

import sys

from pinchfl.cli import main

COMMON = ["--k", "40", "--bits", "6", "--sigma-grad", "0.05",
          "--delta2", "0.05", "--eta", "0.1", "--seed", "21"]

if __name__ == "__main__":
    rc = main(["train", "--mode", "sfl", "--arch", "both", "--m", "7",
               "--rounds", "300", "--out", "artifacts/train_sfl", *COMMON])
    rc |= main(["train", "--mode", "afl", "--arch", "both",
                "--rounds", "300", "--out", "artifacts/train_afl", *COMMON])
    sys.exit(rc)
