"""User-position sampling and the order-statistic geometry of straggler offsets.

Positions live on a 1-D corridor.  The fixed-antenna bottleneck for a round of
M scheduled users is the M-th smallest absolute offset; the movable-radiator
bottleneck is half the tightest window covering M consecutive sorted positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, UnsupportedDistributionError

UNIFORM = "uniform"
GAUSSIAN_MIXTURE = "gaussian_mixture"


@dataclass(frozen=True)
class DistributionSpec:
    """Spatial distribution of user x-coordinates.

    ``uniform``: i.i.d. on [-D/2, D/2].
    ``gaussian_mixture``: fair coin picks the +mu or -mu cluster, then a
    Gaussian(center, sigma^2) draw, unclipped.
    """

    kind: str
    D: float = 0.0
    mu: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in (UNIFORM, GAUSSIAN_MIXTURE):
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        if self.kind == UNIFORM and self.D <= 0:
            raise ParameterError("uniform corridor length D must be positive")
        if self.kind == GAUSSIAN_MIXTURE:
            if self.sigma <= 0:
                raise ParameterError("cluster sigma must be positive")
            if self.mu < 0:
                raise ParameterError("cluster offset mu must be nonnegative")


@dataclass(frozen=True)
class PositionSample:
    """K user x-coordinates plus the spec and seed that generated them."""

    xs: np.ndarray
    spec: DistributionSpec
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "xs", np.asarray(self.xs, dtype=float))
        if self.xs.ndim != 1 or self.xs.size < 1:
            raise ParameterError("xs must be a non-empty 1-D array")

    @property
    def K(self) -> int:
        return self.xs.size

    def sorted_xs(self) -> np.ndarray:
        return np.sort(self.xs, kind="stable")


@dataclass(frozen=True)
class StragglerOffsets:
    """Per-round bottleneck offsets for both architectures on one sample.

    ``pa_offset <= conv_offset`` holds deterministically; ``window`` is the
    (lo, hi) index pair of the tightest M-window in the sorted sample.
    """

    conv_offset: float
    pa_offset: float
    z_star: float
    window: tuple = field(default=(0, 0))


def sample_positions(spec: DistributionSpec, K: int, seed: int) -> PositionSample:
    """Draw K i.i.d. user positions from ``spec`` with a fixed seed."""
    if K < 1:
        raise ParameterError("K must be at least 1")
    rng = np.random.default_rng(seed)
    if spec.kind == UNIFORM:
        xs = rng.uniform(-spec.D / 2.0, spec.D / 2.0, size=K)
    else:
        centers = np.where(rng.random(K) < 0.5, -spec.mu, spec.mu)
        xs = centers + rng.normal(0.0, spec.sigma, size=K)
    return PositionSample(xs=xs, spec=spec, seed=seed)


def _check_M(K: int, M: int) -> None:
    if not 1 <= M <= K:
        raise ParameterError(f"M={M} out of range for K={K}")


def conv_bottleneck(sample: PositionSample, M: int) -> float:
    """M-th smallest absolute offset (fixed radiator at the origin)."""
    _check_M(sample.K, M)
    return float(np.partition(np.abs(sample.xs), M - 1)[M - 1])


def pa_bottleneck(sample: PositionSample, M: int) -> StragglerOffsets:
    """Tightest-window offset: half the shortest span of M sorted positions.

    Ties between windows are broken toward the lowest starting index.  For
    M=1 the window is degenerate and the radiator sits on the selected user.
    """
    _check_M(sample.K, M)
    xs = sample.sorted_xs()
    spans = xs[M - 1:] - xs[: sample.K - M + 1]
    i = int(np.argmin(spans))  # argmin takes the first minimizer
    z_star = 0.5 * (xs[i] + xs[i + M - 1])
    return StragglerOffsets(
        conv_offset=conv_bottleneck(sample, M),
        pa_offset=float(spans[i]) / 2.0,
        z_star=float(z_star),
        window=(i, i + M - 1),
    )


def m_spans(sample: PositionSample, m: int) -> np.ndarray:
    """All K-m spans X_(i+m) - X_(i) of the sorted sample."""
    if not 1 <= m <= sample.K - 1:
        raise ParameterError(f"m={m} out of range for K={sample.K}")
    xs = sample.sorted_xs()
    return xs[m:] - xs[: sample.K - m]


def min_simple_spacing(sample: PositionSample) -> float:
    """Minimum of the K+1 normalized spacings of a uniform-corridor sample.

    Positions are mapped to u = (x + D/2)/D; the spacings include the two
    boundary gaps, so the result lies in [0, 1/(K+1)].
    """
    if sample.spec.kind != UNIFORM:
        raise UnsupportedDistributionError(
            "normalized spacings are only defined for the uniform corridor"
        )
    u = np.sort((sample.xs + sample.spec.D / 2.0) / sample.spec.D)
    gaps = np.diff(u, prepend=0.0, append=1.0)
    return float(gaps.min())
