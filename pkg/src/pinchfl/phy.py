"""Line-of-sight channel, spectral efficiency, upload latency, high-SNR gap.

The channel gain at horizontal offset x from a radiator at z and height d is
eta_f / ((x-z)^2 + d^2); the phase factor cancels in the squared magnitude and
is not carried.  The high-SNR machinery expands 1/R in powers of 1/Lambda with
Lambda = log2(S) and an explicit remainder envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleLinkError, OutOfRegimeError, ParameterError

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact


def snr_scale(P: float, sigma_n2: float, f_c: float) -> float:
    """SNR scale S = P * eta_f / sigma_n^2 with eta_f = c0^2/(16 pi^2 f_c^2)."""
    if P <= 0 or sigma_n2 <= 0 or f_c <= 0:
        raise ParameterError("P, sigma_n2 and f_c must all be positive")
    eta_f = SPEED_OF_LIGHT**2 / (16.0 * math.pi**2 * f_c**2)
    return P * eta_f / sigma_n2


@dataclass(frozen=True)
class PhyParams:
    """Link-budget parameters: geometry, SNR scale, payload and bandwidth.

    ``delta`` is the bandwidth scaling: 1/M for a synchronous FDMA round of M
    users, 1 for single-user asynchronous uploads.
    """

    P: float
    sigma_n2: float
    f_c: float
    d: float
    D: float
    W: float
    B_t: float
    delta: float = 1.0

    def __post_init__(self):
        for name in ("P", "sigma_n2", "f_c", "d", "D", "W", "B_t"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if not 0 < self.delta <= 1:
            raise ParameterError("delta must lie in (0, 1]")

    @property
    def eta_f(self) -> float:
        return SPEED_OF_LIGHT**2 / (16.0 * math.pi**2 * self.f_c**2)

    @property
    def S(self) -> float:
        return self.P * self.eta_f / self.sigma_n2

    @property
    def c(self) -> float:
        """Link-budget constant B_t / (delta * W), in seconds per (bit/s/Hz)^-1."""
        return self.B_t / (self.delta * self.W)

    @staticmethod
    def from_snr_scale(S: float, d: float, D: float, W: float, B_t: float,
                       delta: float = 1.0, f_c: float = 28e9) -> "PhyParams":
        """Build params achieving a target SNR scale S with unit transmit power."""
        if S <= 0:
            raise ParameterError("S must be positive")
        eta_f = SPEED_OF_LIGHT**2 / (16.0 * math.pi**2 * f_c**2)
        return PhyParams(P=1.0, sigma_n2=eta_f / S, f_c=f_c,
                         d=d, D=D, W=W, B_t=B_t, delta=delta)


def spectral_efficiency(x: float, z: float, S: float, d: float):
    """Achievable rate R = log2(1 + S / ((x-z)^2 + d^2)) in bit/s/Hz.

    Accepts scalars or numpy arrays for x and z.
    """
    if S <= 0 or d <= 0:
        raise ParameterError("S and d must be positive")
    return np.log2(1.0 + S / ((np.asarray(x) - z) ** 2 + d**2))


def upload_latency(R: float, B_t: float, W: float, delta: float):
    """Upload time tau = B_t / (delta * W * R) seconds."""
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0):
        raise InfeasibleLinkError("spectral efficiency must be positive")
    out = B_t / (delta * W * R)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HighSnrConstants:
    """Envelope constants for the 1/Lambda expansion of 1/R on the corridor."""

    zeta: float
    C0: float
    C1: float
    Lambda0: float
    g_zeta: float
    ell_conv: float


def g_of_zeta(zeta: float) -> float:
    """g(zeta) = ln(1+zeta^2) - 2 + (2/zeta) arctan(zeta); positive for zeta > 0."""
    if zeta <= 0:
        raise ParameterError("zeta must be positive")
    return math.log(1.0 + zeta**2) - 2.0 + (2.0 / zeta) * math.atan(zeta)


def high_snr_constants(D: float, d: float) -> HighSnrConstants:
    """Envelope constants and the corridor-averaged log-distance term."""
    if D <= 0 or d <= 0:
        raise ParameterError("D and d must be positive")
    zeta = D / (2.0 * d)
    r2_max = d**2 + (D / 2.0) ** 2
    C0 = max(abs(math.log2(d**2)), abs(math.log2(r2_max)))
    C1 = r2_max / math.log(2.0)
    Lambda0 = max(4.0 * C0, math.log2(4.0 * C1), 1.0)
    g = g_of_zeta(zeta)
    ell_conv = math.log2(d**2) + g / math.log(2.0)
    return HighSnrConstants(zeta=zeta, C0=C0, C1=C1, Lambda0=Lambda0,
                            g_zeta=g, ell_conv=ell_conv)


def remainder_envelope(Lambda: float, consts: HighSnrConstants) -> float:
    """Uniform bound on the expansion remainder of 1/R at log-SNR Lambda."""
    if Lambda < consts.Lambda0:
        raise OutOfRegimeError(
            f"Lambda={Lambda} below expansion threshold {consts.Lambda0}"
        )
    damp = consts.C1 * 2.0 ** (-Lambda)
    return 2.0 * (consts.C0 + damp) ** 2 / Lambda**3 + damp / Lambda**2


def lambda_star(consts: HighSnrConstants) -> float:
    """Log-SNR threshold above which the latency-gap bracket stays positive."""
    if consts.g_zeta <= 0:
        raise ParameterError("g(zeta) must be positive")
    g = consts.g_zeta
    ln2 = math.log(2.0)
    return max(
        consts.Lambda0,
        16.0 * (consts.C0 + consts.C1) ** 2 * ln2 / g,
        math.log2(8.0 * consts.C1 * ln2 / g),
        1.0,
    )


def afl_gap_bracket(Lambda: float, consts: HighSnrConstants) -> float:
    """The per-upload 1/R gap bracket; may be negative below lambda_star."""
    if Lambda < consts.Lambda0:
        raise OutOfRegimeError(
            f"Lambda={Lambda} below expansion threshold {consts.Lambda0}"
        )
    ln2 = math.log(2.0)
    damp = consts.C1 * 2.0 ** (-Lambda)
    return (
        consts.g_zeta / (Lambda**2 * ln2)
        - 4.0 * (consts.C0 + damp) ** 2 / Lambda**3
        - 2.0 * damp / Lambda**2
    )


def afl_time_gain_lb(K: int, phy: PhyParams, Lambda: float) -> float:
    """Lower bound on the total time saved over K asynchronous uploads.

    Lambda is supplied directly (as log2 of the SNR scale) so the regime can
    be probed without astronomically large powers; the geometric constants
    come from the phy geometry.
    """
    if K < 1:
        raise ParameterError("K must be at least 1")
    consts = high_snr_constants(phy.D, phy.d)
    return K * phy.B_t / (phy.delta * phy.W) * afl_gap_bracket(Lambda, consts)
