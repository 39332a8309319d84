"""Achievable (r_H, r_L) frontiers: optimised HM, optimised H-QAM and TD baseline."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np

from .capacity import QuadratureSpec
from .errors import EmptyInput, HMDesignError
from .optimizer import ProblemSpec, SolverConfig, max_hp_rate, optimize_hqam, solve

__all__ = [
    "FrontierPoint",
    "RegionFrontier",
    "hm_frontier",
    "hqam_frontier",
    "td_frontier",
    "convex_hull",
    "dominates",
    "default_thresholds",
    "frontier_csv",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

Scheme = Literal["hm_optimized", "hqam_optimized", "td_gaussian", "hull"]
CSV_HEADER = ["scheme", "r_star", "r_h", "r_l", "power", "papr"]

# two frontier points closer than this in r_h are merged
_RH_TOL = 1e-12


@dataclass(frozen=True)
class FrontierPoint:
    r_h: float
    r_l: float
    r_star: float | None = None
    power: float | None = None
    papr: float | None = None


@dataclass
class RegionFrontier:
    scheme: Scheme
    points: list[FrontierPoint]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        rh = self.r_h
        if np.any(np.diff(rh) <= 0):
            raise ValueError("frontier r_h must be strictly increasing")
        if len(self.points) and min(rh.min(), self.r_l.min()) < 0:
            raise ValueError("frontier coordinates must be non-negative")

    @property
    def r_h(self) -> np.ndarray:
        return np.array([p.r_h for p in self.points], dtype=float)

    @property
    def r_l(self) -> np.ndarray:
        return np.array([p.r_l for p in self.points], dtype=float)

    @property
    def rates(self) -> np.ndarray:
        return np.column_stack([self.r_h, self.r_l]) if self.points else np.zeros((0, 2))

    def interp(self, r_h: float) -> float:
        """Piecewise-linear r_L at ``r_h``; flat to the left, zero beyond the right end."""
        rh, rl = self.r_h, self.r_l
        if r_h > rh[-1]:
            return 0.0
        return float(np.interp(r_h, rh, rl))


def _pareto(points: Iterable[FrontierPoint]) -> list[FrontierPoint]:
    """Sort by r_h and drop points weakly dominated by another point."""
    pts = sorted(points, key=lambda p: (p.r_h, -p.r_l))
    kept: list[FrontierPoint] = []
    best_l = -math.inf
    # scan from the right: a point survives only if it beats every r_l to its right
    for p in reversed(pts):
        if p.r_l > best_l:
            if kept and abs(kept[-1].r_h - p.r_h) <= _RH_TOL:
                continue
            kept.append(p)
            best_l = p.r_l
    return kept[::-1]


def default_thresholds(spec: ProblemSpec, n: int = 25, q: QuadratureSpec | None = None) -> np.ndarray:
    """``n`` evenly spaced thresholds over ``[0, 0.98 * r_H^max]``."""
    return np.linspace(0.0, 0.98 * max_hp_rate(spec, q), n)


def _solve_point(args):
    kind, spec, cfg, q = args
    try:
        if kind == "hm":
            res = solve(spec, cfg, q)
        else:
            _, res = optimize_hqam(spec, cfg, q)
    except (HMDesignError, ValueError, ArithmeticError) as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return FrontierPoint(res.r_h_achieved, res.r_l_achieved, spec.r_star, res.power_used, res.papr_used), ""


def _sweep(kind, scheme, base_spec, thresholds, cfg, q, workers):
    cfg = cfg or SolverConfig()
    q = q or QuadratureSpec()
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise EmptyInput("threshold grid is empty")
    for t in thresholds:
        if not 0 <= t < base_spec.m_h:
            raise ValueError(f"threshold {t} outside [0, {base_spec.m_h})")
    jobs = [(kind, replace(base_spec, r_star=t), cfg, q) for t in thresholds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_solve_point, jobs))
    else:
        outcomes = [_solve_point(j) for j in jobs]
    found, skipped = [], []
    for t, (pt, err) in zip(thresholds, outcomes):
        if pt is None:
            log.warning("%s sweep: r*=%.6g skipped (%s)", scheme, t, err)
            skipped.append({"r_star": t, "error": err})
        else:
            found.append(pt)
    kept = _pareto(found)
    meta = {
        "spec": asdict(base_spec),
        "thresholds": thresholds,
        "solved": len(found),
        "skipped": skipped,
        "dominated": len(found) - len(kept),
    }
    return RegionFrontier(scheme, kept, meta)


def hm_frontier(base_spec: ProblemSpec, thresholds: Sequence[float], cfg: SolverConfig | None = None,
                q: QuadratureSpec | None = None, workers: int = 1) -> RegionFrontier:
    """One free-HM design per threshold; failed thresholds are logged and skipped."""
    return _sweep("hm", "hm_optimized", base_spec, thresholds, cfg, q, workers)


def hqam_frontier(base_spec: ProblemSpec, thresholds: Sequence[float], cfg: SolverConfig | None = None,
                  q: QuadratureSpec | None = None, workers: int = 1) -> RegionFrontier:
    """As :func:`hm_frontier` with the H-QAM scale pair as the only freedom."""
    return _sweep("hqam", "hqam_optimized", base_spec, thresholds, cfg, q, workers)


def _upper_hull(xy: np.ndarray) -> np.ndarray:
    """Upper concave hull of points sorted by x (collinear points kept)."""
    hull: list[np.ndarray] = []
    for p in xy:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])
            if cross > 1e-12:
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def _hull_points(xy: np.ndarray) -> np.ndarray:
    xy = np.asarray(xy, dtype=float)
    top_l = float(xy[:, 1].max())
    right_h = float(xy[:, 0].max())
    xy = np.vstack([xy, [[0.0, top_l], [right_h, 0.0]]])
    # highest r_l first among equal r_h so the hull keeps the upper one
    order = np.lexsort((-xy[:, 1], xy[:, 0]))
    xy = xy[order]
    _, first = np.unique(xy[:, 0], return_index=True)
    return _upper_hull(xy[first])


def td_frontier(snr_h_db: float, snr_l_db: float, power: float = 1.0,
                grid_size: int = 201) -> RegionFrontier:
    """Time-division Gaussian frontier with per-slot power control.

    A share ``alpha`` of the time serves HP with power ``p1``, the rest serves
    LP with ``p2``, and ``alpha*p1 + (1-alpha)*p2 = power``.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    n_h = power / 10.0 ** (snr_h_db / 10.0)
    n_l = power / 10.0 ** (snr_l_db / 10.0)
    alpha = np.linspace(0.0, 1.0, grid_size)[:, None]
    share = np.linspace(0.0, 1.0, grid_size)[None, :]  # energy fraction spent on HP
    with np.errstate(divide="ignore", invalid="ignore"):
        r_h = np.where(alpha > 0, alpha * np.log2(1 + share * power / (np.where(alpha > 0, alpha, 1) * n_h)), 0.0)
        beta = 1 - alpha
        r_l = np.where(beta > 0, beta * np.log2(1 + (1 - share) * power / (np.where(beta > 0, beta, 1) * n_l)), 0.0)
    hull = _hull_points(np.column_stack([r_h.ravel(), r_l.ravel()]))
    pts = [FrontierPoint(float(a), float(b), power=power) for a, b in hull]
    meta = {"snr_h_db": snr_h_db, "snr_l_db": snr_l_db, "power": power, "grid_size": grid_size}
    return RegionFrontier("td_gaussian", pts, meta)


def convex_hull(frontiers: Sequence[RegionFrontier]) -> RegionFrontier:
    """Upper-left convex hull of all frontier points plus the axis endpoints."""
    rows = [f.rates for f in frontiers if len(f.points)]
    if not rows:
        raise EmptyInput("convex_hull needs at least one non-empty frontier")
    hull = _hull_points(np.vstack(rows))
    pts = [FrontierPoint(float(a), float(b)) for a, b in hull]
    return RegionFrontier("hull", pts, {"sources": [f.scheme for f in frontiers]})


def dominates(point: tuple[float, float], frontier: RegionFrontier, margin: float = 0.0) -> bool:
    """True when ``point`` lies above the frontier's interpolant by more than ``margin``."""
    if not frontier.points:
        return False
    r_h, r_l = float(point[0]), float(point[1])
    return r_l > frontier.interp(r_h) + margin


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.9g}"


def frontier_csv(frontier: RegionFrontier) -> str:
    """CSV text, one row per frontier point, 9 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in frontier.points:
        w.writerow([frontier.scheme, _fmt(p.r_star), _fmt(p.r_h), _fmt(p.r_l), _fmt(p.power), _fmt(p.papr)])
    return buf.getvalue()
