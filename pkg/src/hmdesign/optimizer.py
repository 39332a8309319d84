"""Constellation design: maximise the LP rate under HP-rate, power and PAPR limits.

The decision vector is real.  Every supported parameterisation (free points,
centrally symmetric cluster, H-QAM scale pair) is a real-linear map
``v -> z`` so power is a quadratic form in ``v`` and MI gradients pull back
through the same map.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Literal

import numpy as np

from . import capacity as cap
from .capacity import ChannelSpec, QuadratureSpec
from .constellation import (
    HQAM_BASES,
    Constellation,
    HqamParams,
    _QUADRANTS,
    average_power,
    expand_central_symmetric,
    hqam,
    papr,
)
from .errors import Infeasible, NoFeasibleStart, SizeMismatch
from .ip import Evaluation, IPOptions, interior_point, newton_step

log = logging.getLogger(__name__)

Symmetry = Literal["none", "central"]

# Starts must clear the HP-rate threshold by this much (less when r* sits
# closer than twice this to the HP ceiling).
_START_MARGIN = 1e-4


@dataclass(frozen=True)
class ProblemSpec:
    m_h: int
    m_l: int
    snr_h_db: float
    snr_l_db: float
    r_star: float
    power: float = 1.0
    papr_limit: float | None = None
    symmetry: Symmetry = "none"

    def __post_init__(self):
        if self.m_h < 1 or self.m_l < 1:
            raise ValueError("need m_h >= 1 and m_l >= 1")
        if self.snr_l_db < self.snr_h_db:
            raise ValueError("snr_l_db must be >= snr_h_db")
        if not 0.0 <= self.r_star:
            raise ValueError("r_star must be >= 0")
        if not self.power > 0:
            raise ValueError("power must be positive")
        if self.papr_limit is not None and self.papr_limit < 1.0:
            raise ValueError("papr_limit must be >= 1")
        if self.symmetry not in ("none", "central"):
            raise ValueError(f"unknown symmetry {self.symmetry!r}")
        if self.symmetry == "central" and self.m_h != 2:
            raise ValueError("central symmetry requires m_h == 2")

    @property
    def ch_h(self) -> ChannelSpec:
        return ChannelSpec(self.snr_h_db, self.power)

    @property
    def ch_l(self) -> ChannelSpec:
        return ChannelSpec(self.snr_l_db, self.power)

    @property
    def n_constraints(self) -> int:
        return 2 if self.papr_limit is None else 3


@dataclass(frozen=True)
class SolverConfig:
    starts: int = 20
    seed: int = 0
    mu_factor: float = 10.0
    kkt_tol: float = 1e-6
    max_outer: int = 50
    max_inner: int = 100
    fd_step: float = 1e-5
    pinv_threshold: float = 1e-10
    gradient: Literal["analytic", "fd"] = "analytic"
    mu0: float = 10.0
    papr_beta: float = 50.0
    hqam_warm_start: bool = True
    start_attempts: int = 20

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if not self.mu_factor > 1:
            raise ValueError("mu_factor must exceed 1")
        if not 0 < self.kkt_tol < 1:
            raise ValueError("kkt_tol must lie in (0, 1)")
        for name in ("max_outer", "max_inner", "fd_step", "pinv_threshold", "mu0", "papr_beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.gradient not in ("analytic", "fd"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")

    def ip_options(self, max_step: float | None = None) -> IPOptions:
        return IPOptions(
            mu0=self.mu0, mu_factor=self.mu_factor, kkt_tol=self.kkt_tol,
            max_outer=self.max_outer, max_inner=self.max_inner,
            pinv_threshold=self.pinv_threshold, max_step=max_step,
        )


@dataclass
class StartLog:
    index: int
    kind: str
    converged: bool
    r_h: float | None = None
    r_l: float | None = None
    iterations: int = 0
    kkt_residual: float | None = None
    message: str = ""


@dataclass
class SolveResult:
    constellation: Constellation
    r_h_achieved: float
    r_l_achieved: float
    power_used: float
    papr_used: float
    kkt_residual: float
    converged: bool
    start_logs: list[StartLog] = field(default_factory=list)
    best_start: int = 0

    def to_dict(self) -> dict:
        return {
            "r_h": self.r_h_achieved,
            "r_l": self.r_l_achieved,
            "power": self.power_used,
            "papr": self.papr_used,
            "kkt_residual": self.kkt_residual,
            "converged": self.converged,
            "best_start": self.best_start,
            "starts": [vars(s) for s in self.start_logs],
        }


# ---------------------------------------------------------------------------
# parameterisations


@dataclass(frozen=True)
class Layout:
    """Real-linear map ``z = T @ v`` from decision vector to points."""

    kind: str
    m_h: int
    m_l: int
    T: np.ndarray  # complex (M, n)

    @property
    def n(self) -> int:
        return self.T.shape[1]

    @property
    def gram(self) -> np.ndarray:
        """``Q`` with ``average_power = v @ Q @ v``."""
        return _gram(self)

    def points(self, v: np.ndarray) -> np.ndarray:
        return self.T @ np.asarray(v, dtype=float)

    def pullback(self, g: np.ndarray) -> np.ndarray:
        """Map a complex point gradient ``d/dre + 1j d/dim`` to ``d/dv``."""
        return (g.real @ self.T.real) + (g.imag @ self.T.imag)


def _gram(layout: Layout) -> np.ndarray:
    T = layout.T
    return (T.real.T @ T.real + T.imag.T @ T.imag) / T.shape[0]


@lru_cache(maxsize=32)
def layout_for(m_h: int, m_l: int, kind: str) -> Layout:
    M = 2 ** (m_h + m_l)
    if kind == "none":
        T = np.zeros((M, 2 * M), dtype=complex)
        T[np.arange(M), 2 * np.arange(M)] = 1.0
        T[np.arange(M), 2 * np.arange(M) + 1] = 1j
    elif kind == "central":
        if m_h != 2:
            raise ValueError("central symmetry requires m_h == 2")
        Mc = 2 ** m_l
        T = np.zeros((M, 2 * Mc), dtype=complex)
        c = np.arange(Mc)
        for g, (sr, si) in enumerate([(1, 1), (-1, 1), (1, -1), (-1, -1)]):
            T[g * Mc + c, 2 * c] = sr
            T[g * Mc + c, 2 * c + 1] = 1j * si
    elif kind == "hqam":
        if m_h != 2 or m_l not in HQAM_BASES:
            raise ValueError("H-QAM layout needs m_h == 2 and m_l in {2, 3}")
        b = HQAM_BASES[m_l]
        q = _QUADRANTS[:, None]
        offsets = (np.sign(q.real) * b.real + 1j * np.sign(q.imag) * b.imag).reshape(-1)
        T = np.column_stack([np.repeat(_QUADRANTS, b.size), offsets])
    else:
        raise ValueError(f"unknown layout {kind!r}")
    T.setflags(write=False)
    return Layout(kind, m_h, m_l, T)


def _layout(spec: ProblemSpec) -> Layout:
    return layout_for(spec.m_h, spec.m_l, spec.symmetry)


def realify(c: Constellation, symmetry: Symmetry = "none") -> np.ndarray:
    """Interleave ``(re z_1, im z_1, re z_2, ...)``; central mode keeps the first cluster."""
    if symmetry == "none":
        return np.column_stack([c.points.real, c.points.imag]).reshape(-1)
    if symmetry == "central":
        if c.m_h != 2:
            raise ValueError("central symmetry requires m_h == 2")
        zc = c.points[: 2 ** c.m_l]
        return np.column_stack([zc.real, zc.imag]).reshape(-1)
    raise ValueError(f"unknown symmetry {symmetry!r}")


def complexify(v, m_h: int, m_l: int, symmetry: Symmetry = "none") -> Constellation:
    """Inverse of :func:`realify`."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if symmetry == "none":
        if v.size != 2 ** (m_h + m_l + 1):
            raise SizeMismatch(f"expected {2 ** (m_h + m_l + 1)} reals, got {v.size}")
        return Constellation(m_h, m_l, v[0::2] + 1j * v[1::2])
    if symmetry == "central":
        if m_h != 2:
            raise ValueError("central symmetry requires m_h == 2")
        if v.size != 2 ** (m_l + 1):
            raise SizeMismatch(f"expected {2 ** (m_l + 1)} reals, got {v.size}")
        return expand_central_symmetric(v[0::2] + 1j * v[1::2], m_l)
    raise ValueError(f"unknown symmetry {symmetry!r}")


# ---------------------------------------------------------------------------
# problem functions


def _smooth_max(x: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Log-sum-exp upper bound on ``max(x)`` and its softmax weights."""
    top = float(np.max(x))
    e = np.exp(beta * (x - top))
    tot = float(e.sum())
    return top + math.log(tot) / beta, e / tot


class Problem:
    """Objective and constraints of one design instance over a layout."""

    def __init__(self, spec: ProblemSpec, q: QuadratureSpec, layout: Layout,
                 gradient: str = "analytic", fd_step: float = 1e-5, papr_beta: float = 50.0):
        self.spec = spec
        self.q = q
        self.layout = layout
        self.gradient = gradient
        self.fd_step = fd_step
        self.beta = papr_beta
        self.Q = layout.gram
        self.evaluations = 0

    @property
    def beta_eff(self) -> float:
        # sharpness is stated per unit of the power budget
        return self.beta / self.spec.power

    def anneal(self, _outer: int) -> None:
        self.beta *= 2.0

    def _papr_term(self, z, pw):
        mags = z.real ** 2 + z.imag ** 2
        sm, soft = _smooth_max(mags, self.beta_eff)
        return sm - self.spec.papr_limit * pw, soft

    def values(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        z = self.layout.points(v)
        r_h, r_l = cap.rates_batch(z, self.spec.m_h, self.spec.m_l,
                                   self.spec.ch_h, self.spec.ch_l, self.q)
        return self._assemble_values(v, z, float(r_h[0]), float(r_l[0]))

    def _assemble_values(self, v, z, r_h, r_l):
        pw = float(v @ self.Q @ v)
        f = [self.spec.r_star - r_h, pw - self.spec.power]
        if self.spec.papr_limit is not None:
            f.append(self._papr_term(z, pw)[0])
        return -r_l, np.array(f)

    def __call__(self, v: np.ndarray) -> Evaluation:
        self.evaluations += 1
        v = np.asarray(v, dtype=float)
        z = self.layout.points(v)
        spec = self.spec
        if self.gradient == "analytic":
            r_h, r_l, gz_h, gz_l = cap.rates_with_grad(z, spec.m_h, spec.m_l, spec.ch_h, spec.ch_l, self.q)
            g_rh = self.layout.pullback(gz_h)
            g_rl = self.layout.pullback(gz_l)
        else:
            r_h, r_l, g_rh, g_rl = self._fd_rates(v, z)
        pw = float(v @ self.Q @ v)
        g_pw = 2.0 * self.Q @ v
        f = [spec.r_star - r_h, pw - spec.power]
        jac = [-g_rh, g_pw]
        if spec.papr_limit is not None:
            f3, soft = self._papr_term(z, pw)
            g_mag = self.layout.pullback(2.0 * soft * z)
            f.append(f3)
            jac.append(g_mag - spec.papr_limit * g_pw)
        return Evaluation(f0=-r_l, f=np.array(f), g0=-g_rl, jac=np.array(jac))

    def _fd_rates(self, v, z):
        h = self.fd_step
        n = v.size
        vs = np.vstack([v, v + h * np.eye(n), v - h * np.eye(n)])
        zs = vs @ self.layout.T.T
        r_h, r_l = cap.rates_batch(zs, self.spec.m_h, self.spec.m_l,
                                   self.spec.ch_h, self.spec.ch_l, self.q)
        g_rh = (r_h[1:n + 1] - r_h[n + 1:]) / (2 * h)
        g_rl = (r_l[1:n + 1] - r_l[n + 1:]) / (2 * h)
        return float(r_h[0]), float(r_l[0]), g_rh, g_rl

    def fixed_hessian(self, lam: np.ndarray) -> np.ndarray:
        # exact Hessian of the power constraint
        return 2.0 * lam[1] * self.Q


def eval_problem(v, spec: ProblemSpec, q: QuadratureSpec | None = None) -> tuple[float, np.ndarray]:
    """``(f0, f)`` with ``f0 = -r_L`` and ``f = (r* - r_H, P - p[, max|z|^2 - xi P])``.

    The PAPR entry uses the exact maximum here; the solver works with a
    log-sum-exp relaxation that bounds it from above.
    """
    q = q or QuadratureSpec()
    layout = _layout(spec)
    v = np.asarray(v, dtype=float)
    if v.size != layout.n:
        raise SizeMismatch(f"expected {layout.n} reals for symmetry={spec.symmetry}, got {v.size}")
    z = layout.points(v)
    r_h, r_l = cap.rates_batch(z, spec.m_h, spec.m_l, spec.ch_h, spec.ch_l, q)
    pw = float(v @ layout.gram @ v)
    f = [spec.r_star - float(r_h[0]), pw - spec.power]
    if spec.papr_limit is not None:
        f.append(float(np.max(z.real ** 2 + z.imag ** 2)) - spec.papr_limit * pw)
    return -float(r_l[0]), np.array(f)


@dataclass
class Derivatives:
    grad_f0: np.ndarray
    grads_f: np.ndarray  # (k, n)
    hess_lagrangian: np.ndarray


def derivatives(v, spec: ProblemSpec, q: QuadratureSpec | None = None,
                cfg: SolverConfig | None = None, lam=None, qn_hessian=None) -> Derivatives:
    """Gradients of objective and constraints plus a Lagrangian Hessian estimate.

    ``qn_hessian`` is the quasi-Newton estimate for the MI and PAPR terms
    (identity when absent); the power term contributes its exact Hessian.
    """
    q = q or QuadratureSpec()
    cfg = cfg or SolverConfig()
    prob = Problem(spec, q, _layout(spec), cfg.gradient, cfg.fd_step, cfg.papr_beta)
    ev = prob(np.asarray(v, dtype=float))
    lam = np.ones(spec.n_constraints) if lam is None else np.asarray(lam, dtype=float)
    qn = np.eye(ev.g0.size) if qn_hessian is None else np.asarray(qn_hessian)
    return Derivatives(ev.g0, ev.jac, qn + prob.fixed_hessian(lam))


def ip_newton_step(v, lam, mu, derivs: Derivatives, f: np.ndarray,
                   pinv_threshold: float = 1e-10) -> tuple[np.ndarray, np.ndarray, bool]:
    """One primal-dual Newton step at barrier parameter ``mu``.

    Returns ``(dv, dlam, used_pinv)``.
    """
    ev = Evaluation(f0=0.0, f=np.asarray(f, dtype=float), g0=derivs.grad_f0, jac=derivs.grads_f)
    return newton_step(derivs.hess_lagrangian, ev, np.asarray(lam, dtype=float), mu, pinv_threshold)


# ---------------------------------------------------------------------------
# starting points


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def hierarchical_seed(m_h: int, m_l: int, ratio: float) -> np.ndarray:
    """Unit-scale hierarchical point set: HP centres plus ``ratio``-scaled LP offsets.

    Uses the H-QAM geometry when it exists, otherwise Gray-ordered PSK for
    both layers.
    """
    if m_h == 2 and m_l in HQAM_BASES:
        layout = layout_for(2, m_l, "hqam")
        return layout.points(np.array([1.0, ratio]))
    nh, nl = 2 ** m_h, 2 ** m_l
    pos_h = np.empty(nh, dtype=complex)
    for i in range(nh):
        pos_h[_gray(i)] = np.exp(1j * (2 * np.pi * i / nh + np.pi / nh))
    if m_h == 2:
        pos_h = _QUADRANTS / math.sqrt(2.0)
    pos_l = np.empty(nl, dtype=complex)
    for i in range(nl):
        pos_l[_gray(i)] = np.exp(1j * (2 * np.pi * i / nl + np.pi / 4))
    return (pos_h[:, None] + ratio * pos_l[None, :]).reshape(-1)


def max_hp_rate(spec: ProblemSpec, q: QuadratureSpec | None = None) -> float:
    """HP rate of the collapsed (d2 = 0) hierarchical seed at full power."""
    q = q or QuadratureSpec()
    z = hierarchical_seed(spec.m_h, spec.m_l, 0.0)
    z = z * math.sqrt(spec.power / float(np.mean(np.abs(z) ** 2)))
    r_h, _ = cap.rates_batch(z, spec.m_h, spec.m_l, spec.ch_h, spec.ch_l, q)
    return float(r_h[0])


def _fit_layout(z: np.ndarray, layout: Layout) -> np.ndarray:
    """Least-squares decision vector whose image best matches ``z``."""
    A = np.vstack([layout.T.real, layout.T.imag])
    b = np.concatenate([z.real, z.imag])
    return np.linalg.lstsq(A, b, rcond=None)[0]


def _start_margin(spec: ProblemSpec, r_h_max: float) -> float:
    return min(_START_MARGIN, 0.5 * (r_h_max - spec.r_star))


# power back-offs tried in turn; tiny ones matter only when r* hugs the HP ceiling
_BACKOFFS = (5e-3, 1e-4, 1e-6, 1e-9)


def _onto_interior(prob: Problem, v: np.ndarray, hp_margin: float) -> np.ndarray | None:
    """Rescale ``v`` just inside the power budget so that it is strictly feasible."""
    pw = float(v @ prob.Q @ v)
    if not pw > 0:
        return None
    for b in _BACKOFFS:
        u = v * math.sqrt((1.0 - b) * prob.spec.power / pw)
        if _strictly_feasible(prob, u, hp_margin):
            return u
    return None


def _strictly_feasible(prob: Problem, v: np.ndarray, hp_margin: float = _START_MARGIN) -> bool:
    f0, f = prob.values(v)
    if not np.isfinite(f0):
        return False
    margin = np.zeros_like(f)
    margin[0] = hp_margin
    return bool(np.all(f + margin < 0))


def feasible_start(spec: ProblemSpec, q: QuadratureSpec | None = None,
                   rng: np.random.Generator | None = None, kind: str = "hqam",
                   attempts: int = 20, papr_beta: float = 50.0) -> np.ndarray:
    """Random strictly feasible decision vector for ``spec``.

    ``kind`` is ``"hqam"`` (jittered hierarchical seed with random cluster
    ratio) or ``"cloud"`` (Gaussian cloud).  Each failed attempt moves the
    candidate toward a tighter hierarchical shape, which raises the HP rate
    and lowers the PAPR.  Power is set just below the budget.
    """
    q = q or QuadratureSpec()
    rng = rng if rng is not None else np.random.default_rng(0)
    if spec.r_star >= spec.m_h:
        raise NoFeasibleStart(f"r* = {spec.r_star} cannot be reached with {spec.m_h} HP bits")
    r_h_max = max_hp_rate(spec, q)
    if spec.r_star >= r_h_max:
        raise NoFeasibleStart(f"r* = {spec.r_star} is not below the HP ceiling {r_h_max:.6f}",
                              best_r_h=r_h_max)
    margin = _start_margin(spec, r_h_max)
    layout = _layout(spec)
    prob = Problem(spec, q, layout, papr_beta=papr_beta)
    M = 2 ** (spec.m_h + spec.m_l)

    ratio = float(rng.uniform(0.15, 0.7))
    jitter = 0.15
    cloud = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    tau = 0.0
    for _ in range(attempts):
        seed = hierarchical_seed(spec.m_h, spec.m_l, ratio)
        seed = seed / math.sqrt(float(np.mean(np.abs(seed) ** 2)))
        if kind == "cloud":
            c = cloud / math.sqrt(float(np.mean(np.abs(cloud) ** 2)))
            z = (1.0 - tau) * c + tau * seed
        else:
            noise = rng.standard_normal(M) + 1j * rng.standard_normal(M)
            z = seed + jitter * ratio * noise
        v = _onto_interior(prob, _fit_layout(z, layout), margin)
        if v is not None:
            return v
        ratio *= 0.7
        jitter *= 0.5
        tau = 1.0 - 0.6 * (1.0 - tau)
    raise NoFeasibleStart(
        f"no strictly feasible start after {attempts} attempts (r* = {spec.r_star} may be unreachable)",
        best_r_h=r_h_max,
    )


# ---------------------------------------------------------------------------
# solvers


def _finish(v, spec: ProblemSpec, layout: Layout, q: QuadratureSpec):
    """Rates at ``v`` after pushing it radially onto the power shell.

    Rates never drop under up-scaling and PAPR is scale free, so the
    barrier's last sliver of unused power is handed back.  The scaled point
    is kept only if neither rate decreased numerically.
    """
    def rates(x):
        z = layout.points(x)
        r_h, r_l = cap.rates_batch(z, spec.m_h, spec.m_l, spec.ch_h, spec.ch_l, q)
        return z, float(r_h[0]), float(r_l[0])

    z, r_h, r_l = rates(v)
    pw = float(v @ layout.gram @ v)
    if 0 < pw < spec.power:
        v2 = v * math.sqrt(spec.power / pw)
        z2, r_h2, r_l2 = rates(v2)
        if r_h2 >= r_h and r_l2 >= r_l:
            v, z, r_h, r_l = v2, z2, r_h2, r_l2
    return Constellation(spec.m_h, spec.m_l, z), r_h, r_l, v


def _run_local(spec, cfg, q, layout, v0, max_step):
    prob = Problem(spec, q, layout, cfg.gradient, cfg.fd_step, cfg.papr_beta)
    on_outer = prob.anneal if spec.papr_limit is not None else None
    return interior_point(prob, v0, prob.fixed_hessian, cfg.ip_options(max_step), on_outer)


def _pick_best(candidates):
    # greatest r_L, then smaller PAPR, then lower start index
    best = None
    for cand in candidates:
        if best is None:
            best = cand
            continue
        if cand["r_l"] > best["r_l"] + 1e-9:
            best = cand
        elif abs(cand["r_l"] - best["r_l"]) <= 1e-9 and cand["papr"] < best["papr"] - 1e-12:
            best = cand
    return best


def _check_result(res: SolveResult, spec: ProblemSpec, cfg: SolverConfig) -> None:
    if res.r_h_achieved < spec.r_star - 10 * cfg.kkt_tol:
        raise AssertionError("solver returned an HP rate below the threshold")
    if res.power_used > spec.power * (1 + 1e-8):
        raise AssertionError("solver returned a point above the power budget")
    if spec.papr_limit is not None and res.papr_used > spec.papr_limit * (1 + 1e-8):
        raise AssertionError("solver returned a point above the PAPR cap")


def _hqam_warm_start(spec, cfg, q, layout):
    """Decision vector near the optimised H-QAM point, backed off into the interior."""
    h_spec = replace(spec, symmetry="none")
    params, _ = optimize_hqam(h_spec, replace(cfg, starts=min(cfg.starts, 4)), q)
    prob = Problem(spec, q, layout, papr_beta=cfg.papr_beta)
    margin = _start_margin(spec, max_hp_rate(spec, q))
    d1, d2 = params.d1, params.d2
    for _ in range(60):
        z = layout_for(2, spec.m_l, "hqam").points(np.array([d1, d2]))
        v = _onto_interior(prob, _fit_layout(z, layout), margin)
        if v is not None:
            return v
        d2 *= 0.97
    raise NoFeasibleStart("could not back the H-QAM optimum into the interior")


def solve(spec: ProblemSpec, cfg: SolverConfig | None = None, q: QuadratureSpec | None = None) -> SolveResult:
    """Multi-start interior-point design of a free (or symmetric) HM constellation."""
    cfg = cfg or SolverConfig()
    q = q or QuadratureSpec()
    layout = _layout(spec)
    if spec.r_star >= spec.m_h:
        raise Infeasible(f"r* = {spec.r_star} >= m_h = {spec.m_h}", best_r_h=max_hp_rate(spec, q))
    r_h_max = max_hp_rate(spec, q)
    if spec.r_star >= r_h_max:
        raise Infeasible(
            f"r* = {spec.r_star} exceeds the best reachable HP rate {r_h_max:.6f}", best_r_h=r_h_max
        )

    max_step = 0.25 * math.sqrt(spec.power)
    logs: list[StartLog] = []
    candidates = []
    warm = cfg.hqam_warm_start and spec.m_h == 2 and spec.m_l in HQAM_BASES
    for idx in range(cfg.starts):
        rng = np.random.Generator(np.random.Philox(key=[cfg.seed, idx]))
        if warm and idx == 0:
            kind = "hqam-opt"
        else:
            kind = "hqam" if (idx - warm) % 2 == 0 else "cloud"
        try:
            if kind == "hqam-opt":
                v0 = _hqam_warm_start(spec, cfg, q, layout)
            else:
                v0 = feasible_start(spec, q, rng, kind, cfg.start_attempts, cfg.papr_beta)
            ip = _run_local(spec, cfg, q, layout, v0, max_step)
        except NoFeasibleStart as exc:
            logs.append(StartLog(idx, kind, False, message=f"no feasible start: {exc}"))
            continue
        except (ValueError, ArithmeticError) as exc:
            logs.append(StartLog(idx, kind, False, message=f"local solve failed: {exc}"))
            continue
        c, r_h, r_l, v_fin = _finish(ip.x, spec, layout, q)
        logs.append(StartLog(idx, kind, ip.converged, r_h, r_l, ip.iterations, ip.kkt_residual, ip.message))
        log.info("start %d (%s): r_h=%.6f r_l=%.6f %s", idx, kind, r_h, r_l, ip.message)
        if r_h < spec.r_star:
            continue
        candidates.append({"idx": idx, "r_l": r_l, "r_h": r_h, "papr": papr(c) if average_power(c) > 0 else math.inf,
                           "c": c, "ip": ip})
    if not candidates:
        raise Infeasible("no start produced a feasible design", best_r_h=r_h_max)
    best = _pick_best(candidates)
    c = best["c"]
    res = SolveResult(
        constellation=c,
        r_h_achieved=best["r_h"],
        r_l_achieved=best["r_l"],
        power_used=average_power(c),
        papr_used=papr(c),
        kkt_residual=best["ip"].kkt_residual,
        converged=best["ip"].converged,
        start_logs=logs,
        best_start=best["idx"],
    )
    _check_result(res, spec, cfg)
    return res


def optimize_hqam(spec: ProblemSpec, cfg: SolverConfig | None = None,
                  q: QuadratureSpec | None = None) -> tuple[HqamParams, SolveResult]:
    """Optimise the H-QAM scale pair ``(d1, d2)`` under the same constraints."""
    cfg = cfg or SolverConfig()
    q = q or QuadratureSpec()
    if spec.m_h != 2 or spec.m_l not in HQAM_BASES:
        raise ValueError("H-QAM needs m_h == 2 and m_l in {2, 3}")
    spec = replace(spec, symmetry="none")
    layout = layout_for(2, spec.m_l, "hqam")
    r_h_max = max_hp_rate(spec, q)
    if spec.r_star >= r_h_max:
        raise Infeasible(
            f"r* = {spec.r_star} exceeds the best reachable HP rate {r_h_max:.6f}", best_r_h=r_h_max
        )
    prob0 = Problem(spec, q, layout, papr_beta=cfg.papr_beta)
    margin = _start_margin(spec, r_h_max)
    n_starts = max(2, min(cfg.starts, 6))
    logs: list[StartLog] = []
    candidates = []
    for idx in range(n_starts):
        ratio = 0.05 + 0.9 * (idx + 0.5) / n_starts
        v0 = None
        for _ in range(80):
            v0 = _onto_interior(prob0, np.array([1.0, ratio]), margin)
            if v0 is not None:
                break
            ratio *= 0.85
        if v0 is None:
            logs.append(StartLog(idx, "hqam-grid", False, message="no feasible start"))
            continue
        try:
            ip = _run_local(spec, cfg, q, layout, v0, 0.25 * math.sqrt(spec.power))
        except (ValueError, ArithmeticError) as exc:
            logs.append(StartLog(idx, "hqam-grid", False, message=f"local solve failed: {exc}"))
            continue
        c, r_h, r_l, v_fin = _finish(ip.x, spec, layout, q)
        logs.append(StartLog(idx, "hqam-grid", ip.converged, r_h, r_l, ip.iterations, ip.kkt_residual, ip.message))
        if r_h < spec.r_star:
            continue
        candidates.append({"idx": idx, "r_l": r_l, "r_h": r_h, "papr": papr(c), "c": c, "ip": ip, "v": v_fin})
    if not candidates:
        raise Infeasible("no H-QAM start produced a feasible design", best_r_h=r_h_max)
    best = _pick_best(candidates)
    d1, d2 = (abs(float(x)) for x in best["v"])
    params = HqamParams(d1, d2, spec.m_l)
    # sign flips of (d1, d2) only permute labels bitwise, so rates are unchanged
    c = hqam(params)
    res = SolveResult(
        constellation=c,
        r_h_achieved=best["r_h"],
        r_l_achieved=best["r_l"],
        power_used=average_power(c),
        papr_used=papr(c),
        kkt_residual=best["ip"].kkt_residual,
        converged=best["ip"].converged,
        start_logs=logs,
        best_start=best["idx"],
    )
    _check_result(res, spec, cfg)
    return params, res
