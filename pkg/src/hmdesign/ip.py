"""Primal-dual interior-point iterations for smooth inequality-constrained problems.

Solves ``min f0(x)  s.t.  f_i(x) <= 0`` from a strictly feasible start.  For a
barrier parameter ``t`` each Newton step solves

    [ H              J^T     ] [dx  ]     [ g0 + J^T lam      ]
    [ -diag(lam) J   -diag(f)] [dlam] = - [ -lam * f - 1/t    ]

where ``H`` approximates the Hessian of the Lagrangian.  ``t`` grows
geometrically between outer iterations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import LinearSolveFailure

log = logging.getLogger(__name__)

# BFGS pairs implying curvature above this are treated as noise and skipped
_MAX_CURVATURE = 1e4


@dataclass
class Evaluation:
    """Objective, constraints and first derivatives at one point."""

    f0: float
    f: np.ndarray
    g0: np.ndarray
    jac: np.ndarray  # (k, n)

    @property
    def feasible(self) -> bool:
        return bool(np.all(np.isfinite(self.f)) and np.all(self.f < 0.0) and np.isfinite(self.f0))


@dataclass
class IPOptions:
    mu0: float = 10.0
    mu_factor: float = 10.0
    kkt_tol: float = 1e-6
    max_outer: int = 50
    max_inner: int = 100
    pinv_threshold: float = 1e-10
    alpha: float = 1e-4
    max_backtrack: int = 30
    tau_min: float = 0.01  # slacks -f_i may shrink by at most this factor per step
    max_step: float | None = None  # cap on the infinity norm of a primal step


@dataclass
class IPResult:
    x: np.ndarray
    lam: np.ndarray
    evaluation: Evaluation
    t: float
    converged: bool
    kkt_residual: float
    iterations: int
    pinv_steps: int = 0
    message: str = ""
    history: list = field(default_factory=list)


def residuals(ev: Evaluation, lam: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Dual residual ``g0 + J^T lam`` and centrality residual ``-lam*f - 1/t``."""
    r_dual = ev.g0 + ev.jac.T @ lam
    r_cent = -lam * ev.f - 1.0 / t
    return r_dual, r_cent


def barrier_merit(ev: Evaluation, t: float) -> float:
    """``f0 - (1/t) * sum(log(-f_i))``."""
    return float(ev.f0 - np.sum(np.log(-ev.f)) / t)


def kkt_residual(ev: Evaluation, lam: np.ndarray) -> float:
    """Unperturbed KKT residual: stationarity and complementary slackness."""
    r_dual = ev.g0 + ev.jac.T @ lam
    return float(max(np.max(np.abs(r_dual)), np.max(np.abs(lam * ev.f))))


def newton_step(hess: np.ndarray, ev: Evaluation, lam: np.ndarray, t: float,
                pinv_threshold: float = 1e-10) -> tuple[np.ndarray, np.ndarray, bool]:
    """Solve the primal-dual Newton system.

    Falls back to the pseudo-inverse when the smallest singular value drops
    below ``pinv_threshold`` times the largest.  Returns ``(dx, dlam, used_pinv)``.
    """
    n = hess.shape[0]
    k = lam.size
    jac = ev.jac.reshape(k, n)
    m = np.zeros((n + k, n + k))
    m[:n, :n] = hess
    m[:n, n:] = jac.T
    m[n:, :n] = -lam[:, None] * jac
    m[n:, n:] = -np.diag(ev.f)
    r_dual, r_cent = residuals(ev, lam, t)
    rhs = -np.concatenate([r_dual, r_cent])
    if not np.all(np.isfinite(m)) or not np.all(np.isfinite(rhs)):
        raise LinearSolveFailure("non-finite entries in the KKT system")

    u, s, vt = np.linalg.svd(m)
    used_pinv = bool(s[-1] < pinv_threshold * s[0])
    if used_pinv:
        cutoff = pinv_threshold * s[0]
        inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
        step = vt.T @ (inv_s * (u.T @ rhs))
    else:
        step = vt.T @ ((u.T @ rhs) / s)
    if not np.all(np.isfinite(step)):
        raise LinearSolveFailure("KKT solve produced a non-finite step")
    return step[:n], step[n:], used_pinv


def damped_bfgs_update(b: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Powell-damped BFGS update; keeps ``b`` symmetric positive definite.

    Pairs with non-positive curvature are skipped: damping them repeatedly
    along a negative-curvature direction drives ``s^T b s`` to zero and
    blows up the remaining spectrum.
    """
    bs = b @ s
    sbs = float(s @ bs)
    sy = float(s @ y)
    if sbs <= 1e-300 or sy <= 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
        return b
    if sy < 0.2 * sbs:
        theta = 0.8 * sbs / (sbs - sy)
        y = theta * y + (1.0 - theta) * bs
        sy = float(s @ y)
    b = b - np.outer(bs, bs) / sbs + np.outer(y, y) / sy
    return 0.5 * (b + b.T)


def interior_point(
    evaluate: Callable[[np.ndarray], Evaluation],
    x0: np.ndarray,
    fixed_hessian: Callable[[np.ndarray], np.ndarray],
    opts: IPOptions,
    on_outer: Callable[[int], None] | None = None,
) -> IPResult:
    """Run barrier continuation from the strictly feasible point ``x0``.

    ``fixed_hessian(lam)`` supplies the part of the Lagrangian Hessian known
    in closed form; the rest is estimated with damped BFGS.  ``on_outer`` is
    called before each outer iteration (after the first) and may change the
    problem smoothly; the current point is then re-evaluated.
    """
    x = np.array(x0, dtype=float)
    ev = evaluate(x)
    if not ev.feasible:
        raise ValueError("interior_point needs a strictly feasible start")
    n = x.size
    k = ev.f.size
    t = opts.mu0
    lam = 1.0 / (t * -ev.f)
    qn = np.eye(n)
    qn_scaled = False
    iterations = 0
    pinv_steps = 0
    converged = False
    message = "max_outer reached"
    history = []

    for outer in range(opts.max_outer):
        if outer > 0 and on_outer is not None:
            on_outer(outer)
            ev = evaluate(x)
            if not ev.feasible:
                message = "problem update left the feasible region"
                break
        stalls = 0
        for _ in range(opts.max_inner):
            r_dual, r_cent = residuals(ev, lam, t)
            tol_in = max(opts.kkt_tol, 1.0 / t)
            if np.max(np.abs(r_dual)) <= tol_in and np.max(np.abs(r_cent)) <= tol_in:
                break
            hess = qn + fixed_hessian(lam)
            dx, dlam, used = newton_step(hess, ev, lam, t, opts.pinv_threshold)
            pinv_steps += used
            iterations += 1

            s = 1.0
            neg = dlam < 0
            if np.any(neg):
                s = min(1.0, 0.99 * float(np.min(-lam[neg] / dlam[neg])))
            if opts.max_step is not None:
                big = float(np.max(np.abs(dx)))
                if big * s > opts.max_step:
                    s = opts.max_step / big
            # dx is a descent direction of the barrier merit whenever the
            # Hessian estimate is positive definite
            phi = barrier_merit(ev, t)
            slope = float((ev.g0 + ev.jac.T @ (1.0 / (t * -ev.f))) @ dx)
            accepted = None
            if slope < 0:
                for _ in range(opts.max_backtrack):
                    xn = x + s * dx
                    evn = evaluate(xn)
                    if (evn.feasible and np.all(evn.f <= opts.tau_min * ev.f)
                            and barrier_merit(evn, t) <= phi + opts.alpha * s * slope):
                        accepted = (xn, lam + s * dlam, evn)
                        break
                    s *= 0.5
            if accepted is None:
                stalls += 1
                qn = np.eye(n)
                qn_scaled = False
                if stalls >= 2:
                    break
                continue

            xn, lamn, evn = accepted
            stalls = 0
            step = xn - x
            # steps at rounding level cannot reduce the residuals further
            negligible = float(np.max(np.abs(step))) <= 1e-13 * (1.0 + float(np.max(np.abs(x))))
            gl_old = ev.g0 + ev.jac.T @ lamn
            gl_new = evn.g0 + evn.jac.T @ lamn
            y = gl_new - gl_old - fixed_hessian(lamn) @ step
            sy = float(step @ y)
            yy = float(y @ y)
            if not qn_scaled and sy > 0:
                # tiny positive curvature in nonconvex regions would give an
                # enormous initial scale, so clip it
                qn = np.eye(n) * float(np.clip(yy / sy, 1e-2, 1e2))
                qn_scaled = True
            if yy <= _MAX_CURVATURE * sy:
                qn = damped_bfgs_update(qn, step, y)
            x, lam, ev = xn, lamn, evn
            if negligible:
                break

        res = kkt_residual(ev, lam)
        history.append({"outer": outer, "t": t, "f0": ev.f0, "kkt": res, "it": iterations})
        log.debug("outer %d t=%.3g f0=%.9f kkt=%.3g", outer, t, ev.f0, res)
        gap = k / t
        if gap < opts.kkt_tol and res <= 10 * opts.kkt_tol:
            converged = True
            message = "converged"
            break
        if gap < opts.kkt_tol * 1e-3:
            message = "barrier exhausted before stationarity"
            break
        t *= opts.mu_factor

    return IPResult(
        x=x, lam=lam, evaluation=ev, t=t, converged=converged,
        kkt_residual=kkt_residual(ev, lam), iterations=iterations,
        pinv_steps=pinv_steps, message=message, history=history,
    )
