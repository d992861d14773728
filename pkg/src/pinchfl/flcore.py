"""FL training stack: sampling gates, quantizer with error feedback,
inverse-probability aggregation, convergence-constant calculators, and the
synchronous/asynchronous training loops on synthetic quadratic objectives.

Wall-clock accounting follows the link budget: a synchronous round costs the
slowest scheduled upload (bandwidth split 1/M), an asynchronous tick batches
the uploads that meet the deadline (full bandwidth per upload).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InfeasibleLinkError, ParameterError
from .participation import DeadlineModel
from .phy import PhyParams, spectral_efficiency
from .spatial import PositionSample, pa_bottleneck

CONV = "CONV"
PA = "PA"

_ALPHA_CAP = 1.0 - 1e-6


@dataclass(frozen=True)
class QuantizerSpec:
    """Per-coordinate bit budget and the high-rate fidelity model.

    ``c_q = 0`` selects the identity (lossless) mode used in tests.
    """

    b: int
    c_q: float = 1.0

    def __post_init__(self):
        if self.b < 1:
            raise ParameterError("bit budget b must be at least 1")
        if self.c_q < 0:
            raise ParameterError("high-rate constant c_q must be nonnegative")

    @property
    def alpha(self) -> float:
        """Fidelity 1 - min(c_q * 2^(-2b), cap); equals 1 in identity mode."""
        return 1.0 - min(self.c_q * 2.0 ** (-2 * self.b), _ALPHA_CAP)


@dataclass(frozen=True)
class GateDraw:
    """One user's two-stage gate: compute feasibility E, trigger Z, I = E*Z."""

    E: int
    Z: int
    I: int
    pi: float


def inclusion_probability(tau: float, model: DeadlineModel) -> float:
    """Unconditional inclusion probability p_s * F_c(T_d - tau)."""
    if tau < 0:
        raise ParameterError("upload time tau must be nonnegative")
    return model.p_s * model.F_c(model.T_d - tau)


def xi_safe(K: int, pi_min: float) -> float:
    """Sampling-noise amplification factor (K - 1 + 1/pi_min) / K."""
    if K < 1:
        raise ParameterError("K must be at least 1")
    if not 0 < pi_min <= 1:
        raise ParameterError("pi_min must lie in (0, 1]; zero is degenerate")
    return (K - 1 + 1.0 / pi_min) / K


def draw_gates(pis, p_s: float, seed: int) -> List[GateDraw]:
    """Independent gate draws for each inclusion probability in ``pis``.

    The compute-feasibility probability is recovered as pi / p_s.
    """
    if not 0 < p_s <= 1:
        raise ParameterError("p_s must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    out = []
    for pi in pis:
        if not 0 <= pi <= p_s + 1e-12:
            raise ParameterError(f"pi={pi} inconsistent with p_s={p_s}")
        p_c = min(pi / p_s, 1.0)
        E = int(rng.random() < p_c)
        Z = int(rng.random() < p_s)
        out.append(GateDraw(E=E, Z=Z, I=E * Z, pi=pi))
    return out


def quantize(v: np.ndarray, b: int) -> np.ndarray:
    """Symmetric uniform quantizer: 2^b levels evenly spaced on [-s, s]
    with per-vector scale s = max|v|, rounding half away from zero."""
    v = np.asarray(v, dtype=float)
    s = np.max(np.abs(v)) if v.size else 0.0
    if s == 0.0:
        return np.zeros_like(v)
    n = 2**b
    step = 2.0 * s / (n - 1)
    # quantize |v| on the symmetric grid, then restore signs; rounding up on
    # the magnitude axis is round-half-away-from-zero on the original axis
    j = np.floor((np.abs(v) + s) / step + 0.5)
    j = np.clip(j, 0, n - 1)
    return np.where(v < 0, -1.0, 1.0) * (-s + j * step)


def quantize_ef(g: np.ndarray, e: np.ndarray, spec: QuantizerSpec):
    """One error-feedback step: Y = Q(g + e), next residual is (g + e) - Y."""
    g = np.asarray(g, dtype=float)
    e = np.asarray(e, dtype=float)
    if g.shape != e.shape:
        raise ParameterError("gradient and residual must share a shape")
    v = g + e
    if spec.alpha >= 1.0:
        return v.copy(), np.zeros_like(v)
    Y = quantize(v, spec.b)
    return Y, v - Y


def ht_aggregate(entries, K: int) -> np.ndarray:
    """Inverse-probability aggregate (1/K) sum_i (I_i / pi_i) Y_i."""
    if K < 1:
        raise ParameterError("K must be at least 1")
    total = None
    for I, pi, Y in entries:
        if I:
            if pi <= 0:
                raise ParameterError("included entry with zero inclusion probability")
            term = (I / pi) * np.asarray(Y, dtype=float)
            total = term if total is None else total + term
    if total is None:
        return np.zeros(np.asarray(entries[0][2]).shape) if entries else np.zeros(0)
    return total / K


def ht_second_moment_exact(Ys, pis, K: int) -> float:
    """Exact conditional second moment of the aggregate for fixed updates."""
    Ys = [np.asarray(Y, dtype=float) for Y in Ys]
    pis = np.asarray(pis, dtype=float)
    if np.any(pis <= 0) or np.any(pis > 1):
        raise ParameterError("inclusion probabilities must lie in (0, 1]")
    total = np.sum(Ys, axis=0)
    norms = np.array([float(np.dot(Y, Y)) for Y in Ys])
    return float(np.dot(total, total) + np.sum((1.0 / pis - 1.0) * norms)) / K**2


@dataclass(frozen=True)
class ConvergenceReport:
    """Stepsize bounds, contraction constants, and error floors."""

    xi_safe: float
    eta_max: float
    rho_b: float
    A_plus: float
    lambda_min: float
    variance_floor: float
    variance_floor_avg: float
    ef_floor: float
    pl_rate: Optional[float] = None
    pl_lambda_min: Optional[float] = None
    eta_max_stale: Optional[float] = None


def convergence_constants(L: float, eta: float, xi: float, spec: QuantizerSpec,
                          sigma2: float = 0.0, delta2: float = 0.0,
                          G2: float = 0.0, mu: Optional[float] = None,
                          delta_max: Optional[float] = None,
                          c0: float = 0.25) -> ConvergenceReport:
    """All Lyapunov-descent constants for one operating point.

    ``sigma2``/``delta2``/``G2`` feed the variance and error-feedback floors;
    ``mu`` adds the gradient-dominated linear-rate constants and ``delta_max``
    the staleness-limited stepsize bound.
    """
    if L <= 0 or eta <= 0:
        raise ParameterError("L and eta must be positive")
    if xi < 1:
        raise ParameterError("amplification factor xi must be at least 1")
    alpha = spec.alpha
    if alpha <= 0:
        raise ParameterError("quantizer fidelity must be positive")
    rho_b = (1.0 - alpha) * (1.0 + alpha / 2.0)
    c1 = 1.0 + 2.0 / alpha
    eta_max = 1.0 / (L * (1.0 + 3.0 * xi))
    A_plus = 1.0 / L + 1.5 * L * eta**2 * xi
    lambda_min = A_plus * (1.0 + rho_b) / (1.0 - rho_b)
    variance_floor = 1.5 * L * eta**2 * xi * (sigma2 + delta2)
    variance_floor_avg = 3.0 * L * eta * xi * (sigma2 + delta2)
    ef_floor = (lambda_min + A_plus) * c1 * (1.0 - alpha) * (G2 + sigma2)
    pl_rate = pl_lambda_min = eta_max_stale = None
    if mu is not None:
        if mu <= 0:
            raise ParameterError("mu must be positive")
        if eta * mu >= 1.0 - rho_b:
            raise ParameterError(
                "eta * mu must stay below 1 - rho_b for the linear-rate regime"
            )
        pl_rate = 1.0 - eta * mu
        pl_lambda_min = A_plus * (1.0 + rho_b) / (1.0 - rho_b - eta * mu)
    if delta_max is not None:
        if delta_max < 0:
            raise ParameterError("delta_max must be nonnegative")
        if not 0 < c0 <= 1:
            raise ParameterError("c0 must lie in (0, 1]")
        eta_max_stale = c0 / (L * (1.0 + delta_max))
    return ConvergenceReport(
        xi_safe=xi, eta_max=eta_max, rho_b=rho_b, A_plus=A_plus,
        lambda_min=lambda_min, variance_floor=variance_floor,
        variance_floor_avg=variance_floor_avg, ef_floor=ef_floor,
        pl_rate=pl_rate, pl_lambda_min=pl_lambda_min,
        eta_max_stale=eta_max_stale,
    )


@dataclass(frozen=True)
class SyntheticProblem:
    """K local quadratics f_i(w) = ||w - c_i||^2 / 2 with Gaussian gradient noise.

    Smoothness and gradient-dominance constants are both exactly 1; the
    heterogeneity level (mean squared center spread) is known exactly.
    """

    centers: np.ndarray
    noise_sigma: float
    L: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))
        if self.centers.ndim != 2:
            raise ParameterError("centers must be a (K, d_w) array")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be nonnegative")

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    @property
    def d_w(self) -> int:
        return self.centers.shape[1]

    @property
    def w_star(self) -> np.ndarray:
        return self.centers.mean(axis=0)

    @property
    def delta2(self) -> float:
        diff = self.centers - self.w_star
        return float(np.mean(np.sum(diff**2, axis=1)))

    def loss_gap(self, w: np.ndarray) -> float:
        """F(w) - F*, which is half the squared distance to the center mean."""
        diff = np.asarray(w) - self.w_star
        return 0.5 * float(np.dot(diff, diff))

    def grad_norm2(self, w: np.ndarray) -> float:
        diff = np.asarray(w) - self.w_star
        return float(np.dot(diff, diff))

    def local_grad_mean2(self, w: np.ndarray) -> float:
        """Mean squared local-gradient norm (the G^2 proxy measured at w)."""
        diff = np.asarray(w)[None, :] - self.centers
        return float(np.mean(np.sum(diff**2, axis=1)))

    def stochastic_grads(self, ws: np.ndarray, rng) -> np.ndarray:
        """Per-user noisy gradients; ``ws`` is (K, d_w) or a single point."""
        ws = np.asarray(ws, dtype=float)
        if ws.ndim == 1:
            ws = np.broadcast_to(ws, self.centers.shape)
        noise = rng.normal(0.0, self.noise_sigma / math.sqrt(self.d_w),
                           size=self.centers.shape)
        return ws - self.centers + noise

    def initial_point(self, gap: float = 1.0) -> np.ndarray:
        """A start with F(w0) - F* equal to ``gap`` exactly."""
        return self.w_star + math.sqrt(2.0 * gap / self.d_w) * np.ones(self.d_w)


def make_synthetic_problem(K: int, d_w: int, delta2_target: float,
                           noise_sigma: float, seed: int) -> SyntheticProblem:
    """Random centers rescaled so the heterogeneity level is hit exactly."""
    if K < 1 or d_w < 1:
        raise ParameterError("K and d_w must be at least 1")
    if delta2_target < 0:
        raise ParameterError("delta2_target must be nonnegative")
    rng = np.random.default_rng(seed)
    if delta2_target == 0.0:
        centers = np.zeros((K, d_w))
    else:
        raw = rng.normal(size=(K, d_w))
        raw -= raw.mean(axis=0)
        current = np.mean(np.sum(raw**2, axis=1))
        centers = raw * math.sqrt(delta2_target / current)
    return SyntheticProblem(centers=centers, noise_sigma=noise_sigma)


def schedule_round(sample: PositionSample, M: int, arch: str):
    """Scheduled user indices and radiator position for one round.

    Fixed antenna: the M smallest absolute offsets, radiator at the origin.
    Pinched antenna: the tightest M-window, radiator at its midpoint.
    """
    if arch not in (CONV, PA):
        raise ParameterError(f"unknown architecture {arch!r}")
    if not 1 <= M <= sample.K:
        raise ParameterError(f"M={M} out of range for K={sample.K}")
    if arch == CONV:
        idx = np.argsort(np.abs(sample.xs), kind="stable")[:M]
        return np.sort(idx), 0.0
    off = pa_bottleneck(sample, M)
    order = np.argsort(sample.xs, kind="stable")
    lo, hi = off.window
    return np.sort(order[lo:hi + 1]), off.z_star


@dataclass
class TrainRecord:
    """One logged round (synchronous) or tick batch (asynchronous)."""

    time: float
    index: int
    arch: str
    scheduled: tuple
    z: float
    bottleneck: float
    latency: float
    participants: int
    staleness: int
    loss: float
    grad_norm2: float


@dataclass
class TrainLog:
    """Event records plus run metadata; times are strictly nondecreasing."""

    records: List[TrainRecord] = field(default_factory=list)
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def total_time(self) -> float:
        return self.records[-1].time if self.records else 0.0

    @property
    def max_staleness(self) -> int:
        return max((r.staleness for r in self.records), default=0)

    def time_to_loss(self, target: float) -> float:
        """Wall-clock time of the first event with loss at or below target."""
        for r in self.records:
            if r.loss <= target:
                return r.time
        return math.inf


def run_sfl(problem: SyntheticProblem, sample: PositionSample, phy: PhyParams,
            M: int, eta: float, spec: QuantizerSpec, rounds: int, arch: str,
            seed: int, w0: Optional[np.ndarray] = None) -> TrainLog:
    """Synchronous training: M scheduled users, bandwidth split 1/M.

    All users run the error-feedback recursion every round; only the scheduled
    set is aggregated, with uniform 1/M weights.  The round time is the
    slowest scheduled upload.
    """
    if problem.K != sample.K:
        raise ParameterError("problem and sample disagree on K")
    if rounds < 1 or eta <= 0:
        raise ParameterError("rounds must be >= 1 and eta positive")
    sched, z = schedule_round(sample, M, arch)
    c_eff = M * phy.B_t / phy.W  # delta = 1/M
    R = spectral_efficiency(sample.xs[sched], z, phy.S, phy.d)
    if np.any(R <= 0):
        raise InfeasibleLinkError("a scheduled link has zero rate")
    taus = c_eff / R
    round_time = float(np.max(taus))
    bottleneck = float(np.max(np.abs(sample.xs[sched] - z)))

    rng = np.random.default_rng(seed)
    w = problem.initial_point() if w0 is None else np.asarray(w0, dtype=float).copy()
    e = np.zeros_like(problem.centers)
    log = TrainLog(seed=seed, meta={
        "mode": "sfl", "arch": arch, "M": M, "eta": eta, "b": spec.b,
        "rounds": rounds,
    })
    t = 0.0
    for rnd in range(rounds):
        grad_norm2 = problem.grad_norm2(w)
        g = problem.stochastic_grads(w, rng)
        Ys = np.empty_like(g)
        for i in range(problem.K):
            Ys[i], e[i] = quantize_ef(g[i], e[i], spec)
        g_hat = Ys[sched].mean(axis=0)
        w = w - eta * g_hat
        t += round_time
        log.records.append(TrainRecord(
            time=t, index=rnd, arch=arch, scheduled=tuple(int(i) for i in sched),
            z=float(z), bottleneck=bottleneck, latency=round_time,
            participants=M, staleness=0, loss=problem.loss_gap(w),
            grad_norm2=grad_norm2,
        ))
    return log


def run_afl(problem: SyntheticProblem, sample: PositionSample, phy: PhyParams,
            model: DeadlineModel, eta: float, spec: QuantizerSpec,
            horizon_s: float, arch: str, seed: int, weighting: str = "HT",
            tick_period: Optional[float] = None,
            w0: Optional[np.ndarray] = None) -> TrainLog:
    """Asynchronous training driven by a periodic trigger.

    Each tick, idle users refresh their model cache, every user runs the
    error-feedback recursion on its cache, and idle users pass the two-stage
    gate (Bernoulli trigger, compute-plus-upload deadline).  Uploads that meet
    the deadline are batched into one inverse-probability (or uniform) update
    applied when the last of them arrives; users stay busy until their upload
    lands, so slow links carry stale caches.
    """
    if problem.K != sample.K:
        raise ParameterError("problem and sample disagree on K")
    if weighting not in ("HT", "uniform"):
        raise ParameterError(f"unknown weighting {weighting!r}")
    if horizon_s <= 0 or eta <= 0:
        raise ParameterError("horizon and eta must be positive")
    T_p = model.T_d if tick_period is None else tick_period
    if T_p <= 0:
        raise ParameterError("tick period must be positive")

    K = problem.K
    c_eff = phy.B_t / phy.W  # delta = 1
    if arch == CONV:
        R = spectral_efficiency(sample.xs, 0.0, phy.S, phy.d)
    elif arch == PA:
        # radiator pins to each uploader, so every link distance is d
        R = np.full(K, float(spectral_efficiency(0.0, 0.0, phy.S, phy.d)))
    else:
        raise ParameterError(f"unknown architecture {arch!r}")
    taus = c_eff / R
    pis = np.array([inclusion_probability(t, model) for t in taus])

    rng = np.random.default_rng(seed)
    w = problem.initial_point() if w0 is None else np.asarray(w0, dtype=float).copy()
    e = np.zeros_like(problem.centers)
    caches = np.tile(w, (K, 1))
    cache_ver = np.zeros(K, dtype=int)
    busy_until = np.zeros(K)
    version = 0
    pending: list = []  # (apply_time, batch latency, entries, fetch versions)
    log = TrainLog(seed=seed, meta={
        "mode": "afl", "arch": arch, "eta": eta, "b": spec.b,
        "weighting": weighting, "tick_period": T_p, "T_d": model.T_d,
    })

    def apply_batches(up_to: float):
        nonlocal w, version
        pending.sort(key=lambda item: item[0])
        while pending and pending[0][0] <= up_to:
            apply_time, lat, entries, fetch_vers = pending.pop(0)
            stalenesses = [version - v for v in fetch_vers]
            if weighting == "HT":
                update = sum((Y / pi) for Y, pi in entries) / K
            else:
                update = sum(Y for Y, _ in entries) / len(entries)
            w = w - eta * update
            version += 1
            log.records.append(TrainRecord(
                time=apply_time, index=version, arch=arch,
                scheduled=(), z=0.0 if arch == CONV else math.nan,
                bottleneck=math.nan, latency=lat,
                participants=len(entries), staleness=max(stalenesses),
                loss=problem.loss_gap(w), grad_norm2=problem.grad_norm2(w),
            ))

    n_ticks = int(math.ceil(horizon_s / T_p))
    for n in range(n_ticks):
        t_tick = n * T_p
        apply_batches(t_tick)
        idle = busy_until <= t_tick + 1e-12
        caches[idle] = w
        cache_ver[idle] = version
        g = problem.stochastic_grads(caches, rng)
        Ys = np.empty_like(g)
        for i in range(K):
            Ys[i], e[i] = quantize_ef(g[i], e[i], spec)
        entries = []
        fetch_vers = []
        arrivals = []
        for i in np.flatnonzero(idle):
            if rng.random() >= model.p_s:
                continue
            if model.fc_kind == "deterministic":
                T_c = model.t0
            else:
                T_c = model.t0 + rng.exponential(1.0 / model.rate)
            finish = T_c + taus[i]
            if finish <= model.T_d:
                if pis[i] <= 0:
                    raise ParameterError("upload from a zero-probability user")
                entries.append((Ys[i], pis[i]))
                fetch_vers.append(int(cache_ver[i]))
                arrivals.append(finish)
                busy_until[i] = t_tick + finish
            else:
                busy_until[i] = t_tick + T_c
        if entries:
            order = np.argsort(arrivals, kind="stable")
            entries = [entries[k] for k in order]
            fetch_vers = [fetch_vers[k] for k in order]
            pending.append((t_tick + max(arrivals), max(arrivals),
                            entries, fetch_vers))
    apply_batches(horizon_s)
    return log
