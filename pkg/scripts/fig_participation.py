#!/usr/bin/env python3
"""Deadline sweep of expected participants: uniform corridor and a
two-cluster Gaussian mixture, analytic curves next to Monte Carlo counts."""

import sys

from pinchfl.cli import main

if __name__ == "__main__":
    rc = main([
        "participation", "--trials", "20000", "--seed", "5",
        "--out", "artifacts/participation_uniform",
    ])
    rc |= main([
        "participation", "--dist", "gaussian_mixture", "--mu", "3",
        "--sigma-x", "0.5", "--trials", "20000", "--seed", "5",
        "--out", "artifacts/participation_gm",
    ])
    sys.exit(rc)
