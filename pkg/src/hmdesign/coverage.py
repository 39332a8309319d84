"""Path-loss plus log-normal shadowing coverage for users uniform on a disc."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import bisect
from scipy.special import ndtr

from .errors import NonPositiveDistance, NotBracketed

__all__ = ["CoverageParams", "pathloss_db", "snr_exceed_prob", "snr_at_coverage", "simulate_coverage"]

_SIMPSON_INTERVALS = 4000


@dataclass(frozen=True)
class CoverageParams:
    ps_dbm: float = 66.0
    pn_dbm: float = -95.0
    radius_km: float = 4.0
    shadow_sigma_db: float = 8.0
    pl_a: float = 130.19
    pl_b: float = 37.6

    def __post_init__(self):
        if not self.radius_km > 0:
            raise NonPositiveDistance(f"radius must be positive, got {self.radius_km}")
        if not self.shadow_sigma_db > 0:
            raise ValueError(f"shadowing sigma must be positive, got {self.shadow_sigma_db}")


def pathloss_db(r_km, params: CoverageParams | None = None):
    """Deterministic path loss ``pl_a + pl_b * log10(r)``; ``r`` in km."""
    params = params or CoverageParams()
    r = np.asarray(r_km, dtype=float)
    if np.any(r <= 0):
        raise NonPositiveDistance("distance must be positive")
    out = params.pl_a + params.pl_b * np.log10(r)
    return float(out) if out.ndim == 0 else out


def snr_exceed_prob(s_db: float, params: CoverageParams | None = None) -> float:
    """Fraction of users whose SNR is at least ``s_db``."""
    params = params or CoverageParams()
    big = params.radius_km
    r = np.linspace(0.0, big, _SIMPSON_INTERVALS + 1)
    # the density vanishes at r=0; start the path loss just off the origin
    loss = params.pl_a + params.pl_b * np.log10(np.maximum(r, 1e-300))
    margin = (params.ps_dbm - params.pn_dbm - loss - s_db) / params.shadow_sigma_db
    integrand = 2.0 * r / big ** 2 * ndtr(margin)
    return float(np.clip(simpson(integrand, x=r), 0.0, 1.0))


def snr_at_coverage(fraction: float, params: CoverageParams | None = None,
                    xtol: float = 1e-3) -> float:
    """Lowest SNR (dB) that ``fraction`` of users reach or exceed."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0,1)")
    params = params or CoverageParams()
    lo, hi = -200.0, 200.0
    g = lambda s: snr_exceed_prob(s, params) - fraction  # noqa: E731
    if not (g(lo) > 0 > g(hi)):
        raise NotBracketed(f"coverage {fraction} is not reachable in [{lo}, {hi}] dB")
    return float(bisect(g, lo, hi, xtol=xtol))


def simulate_coverage(s_db: float, params: CoverageParams | None = None,
                      users: int = 1_000_000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo coverage estimate and its binomial standard error."""
    params = params or CoverageParams()
    rng = np.random.default_rng(seed)
    r = params.radius_km * np.sqrt(rng.uniform(size=users))
    r = np.maximum(r, 1e-300)
    snr = (params.ps_dbm - params.pn_dbm - params.pl_a - params.pl_b * np.log10(r)
           - params.shadow_sigma_db * rng.standard_normal(users))
    p = float(np.mean(snr >= s_db))
    return p, math.sqrt(max(p * (1 - p), 1e-300) / users)
