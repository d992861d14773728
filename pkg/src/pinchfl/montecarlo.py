"""Trial runners that confront the closed forms with empirical draws.

Every estimator is chunked and seeded per chunk, so results are reproducible
bit-for-bit for a given (seed, trials) and independent of how the work is
ordered.  Acceptance convention: two-sided checks pass within three standard
errors; one-sided bounds get one-sided slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import analytics
from .errors import ParameterError
from .participation import DETERMINISTIC, DeadlineModel, expected_participants
from .phy import PhyParams, spectral_efficiency
from .spatial import DistributionSpec, sample_positions

CHUNK = 100_000

SFL = "SFL"
AFL = "AFL"
CONV = "CONV"
PA = "PA"


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Independent substream for one chunk of trials."""
    return np.random.default_rng(np.random.SeedSequence([seed, chunk_index]))


def _chunks(trials: int):
    done = 0
    index = 0
    while done < trials:
        n = min(CHUNK, trials - done)
        yield index, n
        done += n
        index += 1


def _draw_positions(rng, spec: DistributionSpec, n: int, K: int) -> np.ndarray:
    if spec.kind == "uniform":
        return rng.uniform(-spec.D / 2.0, spec.D / 2.0, size=(n, K))
    centers = np.where(rng.random((n, K)) < 0.5, -spec.mu, spec.mu)
    return centers + rng.normal(0.0, spec.sigma, size=(n, K))


class _Moment:
    """Streaming mean and standard error of a scalar statistic."""

    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        self.n += values.size
        self.total += float(values.sum())
        self.total_sq += float(np.square(values).sum())

    @property
    def mean(self) -> float:
        return self.total / self.n

    @property
    def std_error(self) -> float:
        var = max(self.total_sq / self.n - self.mean**2, 0.0)
        return math.sqrt(var / self.n)


@dataclass(frozen=True)
class CcdfSeries:
    """Empirical exceedance probabilities on an ascending latency grid."""

    grid: np.ndarray
    ccdf: np.ndarray
    trials: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "ccdf", np.asarray(self.ccdf, dtype=float))


@dataclass(frozen=True)
class BoundVerdict:
    """Outcome of one analytic-vs-empirical confrontation."""

    name: str
    analytic: float
    empirical: float
    std_error: float
    passed: bool
    kind: str = "two_sided"


def sfl_round_latencies(rng, spec: DistributionSpec, K: int, M: int,
                        phy: PhyParams, arch: str, n: int) -> np.ndarray:
    """Per-trial synchronous round times (slowest of M scheduled uploads)."""
    xs = np.sort(_draw_positions(rng, spec, n, K), axis=1)
    if arch == CONV:
        bottleneck = np.partition(np.abs(xs), M - 1, axis=1)[:, M - 1]
    else:
        spans = xs[:, M - 1:] - xs[:, : K - M + 1]
        bottleneck = spans.min(axis=1) / 2.0
    c_eff = M * phy.B_t / phy.W
    R = np.log2(1.0 + phy.S / (bottleneck**2 + phy.d**2))
    return c_eff / R


def afl_upload_latencies(rng, spec: DistributionSpec, phy: PhyParams,
                        arch: str, n: int) -> np.ndarray:
    """Per-trial single-user upload times (radiator pinned under PA)."""
    c_eff = phy.B_t / phy.W
    if arch == PA:
        R = float(spectral_efficiency(0.0, 0.0, phy.S, phy.d))
        return np.full(n, c_eff / R)
    x = _draw_positions(rng, spec, n, 1)[:, 0]
    R = np.log2(1.0 + phy.S / (x**2 + phy.d**2))
    return c_eff / R


def estimate_ccdf(mode: str, arch: str, phy: PhyParams, spec: DistributionSpec,
                  K: int, M_or_model, trials: int, grid, seed: int) -> CcdfSeries:
    """Empirical CCDF of the per-round (SFL) or per-upload (AFL) latency."""
    grid = np.asarray(grid, dtype=float)
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    if grid.size and np.any(np.diff(grid) < 0):
        raise ParameterError("latency grid must be ascending")
    if mode not in (SFL, AFL):
        raise ParameterError(f"unknown mode {mode!r}")
    if arch not in (CONV, PA):
        raise ParameterError(f"unknown architecture {arch!r}")
    exceed = np.zeros(grid.size)
    for chunk, n in _chunks(trials):
        rng = _chunk_rng(seed, chunk)
        if mode == SFL:
            lat = sfl_round_latencies(rng, spec, K, int(M_or_model), phy, arch, n)
        else:
            lat = afl_upload_latencies(rng, spec, phy, arch, n)
        exceed += (lat[:, None] > grid[None, :]).sum(axis=0)
    return CcdfSeries(grid=grid, ccdf=exceed / trials, trials=trials, seed=seed)


def verify_bounds(K_grid, M_grid, D: float, trials: int, seed: int,
                  eps: float = 0.1) -> List[BoundVerdict]:
    """Confront the straggler moment formulas and bounds with uniform draws.

    For each (K, M): exact fixed-antenna second moment (two-sided), the
    pinched-antenna sandwich (one-sided each way), the span moments, the
    minimum-spacing second moment, the concentration tail, and the
    deterministic ordering (zero violations allowed).
    """
    verdicts: List[BoundVerdict] = []
    for K in K_grid:
        conv_m = {M: _Moment() for M in M_grid if M <= K}
        pa_m = {M: _Moment() for M in M_grid if M <= K}
        span_mean = {M: _Moment() for M in M_grid if 2 <= M <= K}
        tail_hits = {M: _Moment() for M in M_grid if M <= K}
        minspace = _Moment()
        violations = 0
        for chunk, n in _chunks(trials):
            rng = _chunk_rng(seed, chunk)
            u = rng.random((n, K))
            xs = np.sort(D * (u - 0.5), axis=1)
            abs_sorted = np.sort(np.abs(xs), axis=1)
            spacings = np.diff((xs + D / 2.0) / D, axis=1)
            edge_lo = (xs[:, 0] + D / 2.0) / D
            edge_hi = 1.0 - (xs[:, -1] + D / 2.0) / D
            all_sp = np.column_stack([edge_lo, spacings, edge_hi])
            minspace.add(all_sp.min(axis=1) ** 2)
            for M in conv_m:
                y = abs_sorted[:, M - 1]
                conv_m[M].add(y**2)
                spans = xs[:, M - 1:] - xs[:, : K - M + 1]
                half = spans.min(axis=1) / 2.0
                pa_m[M].add(half**2)
                violations += int(np.sum(half > y + 1e-12))
                tail_hits[M].add(
                    (np.abs(y / (D / 2.0) - M / (K + 1)) >= eps).astype(float)
                )
                if M >= 2:
                    span_mean[M].add(spans[:, 0] / D)
        verdicts.append(BoundVerdict(
            name=f"K={K} ordering pa<=conv", analytic=0.0,
            empirical=float(violations), std_error=0.0,
            passed=violations == 0, kind="exact",
        ))
        ms = analytics.min_spacing_second_moment(K)
        verdicts.append(BoundVerdict(
            name=f"K={K} min-spacing E[M*^2]", analytic=ms,
            empirical=minspace.mean, std_error=minspace.std_error,
            passed=abs(minspace.mean - ms) <= 3.0 * minspace.std_error,
        ))
        for M in conv_m:
            rep = analytics.straggler_moments(K, M, D)
            cm, pm = conv_m[M], pa_m[M]
            verdicts.append(BoundVerdict(
                name=f"K={K} M={M} conv E[Y^2]", analytic=rep.conv_E2,
                empirical=cm.mean, std_error=cm.std_error,
                passed=abs(cm.mean - rep.conv_E2) <= 3.0 * cm.std_error,
            ))
            verdicts.append(BoundVerdict(
                name=f"K={K} M={M} pa upper", analytic=rep.pa_ub,
                empirical=pm.mean, std_error=pm.std_error,
                passed=pm.mean <= rep.pa_ub + 3.0 * pm.std_error, kind="upper",
            ))
            verdicts.append(BoundVerdict(
                name=f"K={K} M={M} pa lower", analytic=rep.pa_lb,
                empirical=pm.mean, std_error=pm.std_error,
                passed=pm.mean >= rep.pa_lb - 3.0 * pm.std_error, kind="lower",
            ))
            p_dag = M / (K + 1)
            if 0 < eps < min(p_dag, 1.0 - p_dag):
                _, _, hoeffding = analytics.concentration_bounds(K, M, eps)
                th = tail_hits[M]
                verdicts.append(BoundVerdict(
                    name=f"K={K} M={M} hoeffding tail", analytic=hoeffding,
                    empirical=th.mean, std_error=th.std_error,
                    passed=th.mean <= hoeffding + 3.0 * th.std_error,
                    kind="upper",
                ))
            if M >= 2:
                m = M - 1
                mean_th = m / (K + 1)
                sm = span_mean[M]
                verdicts.append(BoundVerdict(
                    name=f"K={K} M={M} span mean", analytic=mean_th,
                    empirical=sm.mean, std_error=sm.std_error,
                    passed=abs(sm.mean - mean_th) <= 3.0 * sm.std_error,
                ))
    return verdicts


def participation_sweep(K: int, T_grid, model: DeadlineModel,
                        spec: DistributionSpec, phy: PhyParams, trials: int,
                        seed: int) -> List[dict]:
    """Analytic vs simulated participant counts over a deadline sweep."""
    rows = []
    tau_pa = phy.c / float(spectral_efficiency(0.0, 0.0, phy.S, phy.d))
    for j, T_d in enumerate(np.asarray(T_grid, dtype=float)):
        model_T = DeadlineModel(T_d=float(T_d), fc_kind=model.fc_kind,
                                t0=model.t0, rate=model.rate, p_s=model.p_s)
        report = expected_participants(K, float(T_d), model_T, spec, phy)
        conv_stat, pa_stat = _Moment(), _Moment()
        for chunk, n in _chunks(trials):
            rng = _chunk_rng(seed, (j << 20) + chunk)
            xs = _draw_positions(rng, spec, n, K)
            R = np.log2(1.0 + phy.S / (xs**2 + phy.d**2))
            tau_conv = phy.c / R
            if model.fc_kind == DETERMINISTIC:
                T_c = np.full((n, K), model.t0)
            else:
                T_c = model.t0 + rng.exponential(1.0 / model.rate, size=(n, K))
            conv_stat.add((T_c + tau_conv <= T_d).sum(axis=1))
            pa_stat.add((T_c + tau_pa <= T_d).sum(axis=1))
        rows.append({
            "T_d": float(T_d),
            "n_conv": report.n_conv,
            "n_pa": report.n_pa,
            "gap": report.gap,
            "n_conv_mc": conv_stat.mean,
            "n_pa_mc": pa_stat.mean,
            "conv_stderr": conv_stat.std_error,
            "pa_stderr": pa_stat.std_error,
        })
    return rows
