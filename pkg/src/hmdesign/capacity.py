"""BICM-SIC mutual information over the AWGN channel.

Every rate here is an expectation over a uniformly chosen transmitted symbol
``z_k`` and Gaussian noise ``n`` of a log-ratio of Gaussian mixtures.  After
the substitution ``y = z_k + n`` the noise integral is evaluated with a
Gauss-Hermite product rule, so the quadrature nodes travel with the symbols
and the rates are smooth functions of the point coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.special import roots_hermite

from .constellation import Constellation
from .errors import IndexOutOfRange, NoLpBits

LOG2E = 1.0 / math.log(2.0)
_TINY = 1e-300

__all__ = [
    "ChannelSpec",
    "QuadratureSpec",
    "transition_density",
    "gh_rule",
    "bit_mi_hp",
    "bit_mis_hp",
    "bit_mi_lp_cond",
    "bit_mis_lp_cond",
    "bit_mis_lp_uncond",
    "rate_hp",
    "rate_lp",
    "joint_mi",
    "mc_bit_mi",
    "rates_batch",
    "rates_with_grad",
    "hp_label_masks",
    "lp_label_masks",
]


@dataclass(frozen=True)
class ChannelSpec:
    """AWGN link; SNR is measured against ``power_ref``.

    The total complex noise power is ``power_ref / snr_linear``, split evenly
    over the two real dimensions.
    """

    snr_db: float
    power_ref: float = 1.0

    def __post_init__(self):
        if not self.power_ref > 0:
            raise ValueError("power_ref must be positive")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.power_ref / (2.0 * self.snr_linear))


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_dim: int = 48
    mc_samples: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.nodes_per_dim < 4:
            raise ValueError("nodes_per_dim must be >= 4")
        if self.mc_samples < 1000:
            raise ValueError("mc_samples must be >= 1000")


def transition_density(y: complex, z: complex, sigma: float) -> float:
    """Bivariate Gaussian density of ``y`` around ``z``, variance sigma^2 per axis."""
    d2 = (y.real - z.real) ** 2 + (y.imag - z.imag) ** 2
    return math.exp(-d2 / (2.0 * sigma ** 2)) / (2.0 * math.pi * sigma ** 2)


@lru_cache(maxsize=16)
def gh_rule(nodes_per_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Product Gauss-Hermite rule for ``E[g(u)]`` with ``u ~ N_c(0, 1)`` per axis variance 1/2.

    Returns complex nodes ``u`` and weights summing to one.  Product weights
    below 1e-18 are dropped; their total mass is far below double precision
    of any rate.
    """
    x, w = roots_hermite(nodes_per_dim)
    w = w / math.sqrt(math.pi)
    ww = np.outer(w, w).ravel()
    uu = (x[:, None] + 1j * x[None, :]).ravel()
    keep = ww >= 1e-18
    uu, ww = uu[keep], ww[keep]
    ww = ww / ww.sum()
    uu.setflags(write=False)
    ww.setflags(write=False)
    return uu, ww


@lru_cache(maxsize=64)
def hp_label_masks(m_h: int, m_l: int) -> np.ndarray:
    """``same[k, k', i]``: HP bit ``i`` of ``k`` equals that of ``k'``."""
    idx = np.arange(2 ** (m_h + m_l)) >> m_l
    bits = np.stack([(idx >> (m_h - 1 - i)) & 1 for i in range(m_h)], axis=-1)
    same = bits[:, None, :] == bits[None, :, :]
    same.setflags(write=False)
    return same


@lru_cache(maxsize=64)
def lp_label_masks(m_l: int) -> np.ndarray:
    """``same[k, k', j]`` within one group of ``2**m_l`` symbols."""
    idx = np.arange(2 ** m_l)
    bits = np.stack([(idx >> (m_l - 1 - j)) & 1 for j in range(m_l)], axis=-1)
    same = bits[:, None, :] == bits[None, :, :]
    same.setflags(write=False)
    return same


@njit(cache=True)
def _log_ratio_kernel(gr, gi, ur, ui, w, same, want_grad):
    # gr, gi: (B, G, S) scaled coordinates; same: (S, S, nb)
    B, G, S = gr.shape
    N = w.shape[0]
    nb = same.shape[2]
    vals = np.zeros((B, nb))
    grad_r = np.zeros((B, G, S))
    grad_i = np.zeros((B, G, S))
    xr = np.empty(S)
    xi = np.empty(S)
    e = np.empty(S)
    s_same = np.empty(nb)
    inv = np.empty(nb)
    for b in range(B):
        for g in range(G):
            for k in range(S):
                for n in range(N):
                    dmax = -1e300
                    for kp in range(S):
                        xr[kp] = gr[b, g, k] - gr[b, g, kp] + ur[n]
                        xi[kp] = gi[b, g, k] - gi[b, g, kp] + ui[n]
                        d = -(xr[kp] * xr[kp] + xi[kp] * xi[kp])
                        e[kp] = d
                        if d > dmax:
                            dmax = d
                    s_all = 0.0
                    for i in range(nb):
                        s_same[i] = 0.0
                    for kp in range(S):
                        v = math.exp(e[kp] - dmax)
                        e[kp] = v
                        s_all += v
                        for i in range(nb):
                            if same[k, kp, i]:
                                s_same[i] += v
                    log_all = math.log(s_all)
                    wn = w[n]
                    for i in range(nb):
                        ss = s_same[i] if s_same[i] > 1e-300 else 1e-300
                        vals[b, i] += wn * (log_all - math.log(ss))
                        inv[i] = 1.0 / ss
                    if want_grad:
                        for kp in range(S):
                            if kp == k:
                                continue
                            acc = 0.0
                            for i in range(nb):
                                if same[k, kp, i]:
                                    acc += inv[i]
                            c = e[kp] * (nb / s_all - acc) * wn
                            # d(-|x|^2)/dx = -2x; x moves with +g_k and -g_kp
                            grad_r[b, g, k] -= 2.0 * c * xr[kp]
                            grad_i[b, g, k] -= 2.0 * c * xi[kp]
                            grad_r[b, g, kp] += 2.0 * c * xr[kp]
                            grad_i[b, g, kp] += 2.0 * c * xi[kp]
    return vals, grad_r, grad_i


def _expected_log_ratio(groups, sigma, same, nodes, want_grad=False):
    """Average of ``E[log2(sum_all p(y|z') / sum_same p(y|z'))]``.

    ``groups`` has shape ``(B, G, S)``; the average runs over the ``G`` groups
    and the ``S`` transmitted symbols of each.  Returns ``(B, nbits)`` values
    and, with ``want_grad``, the gradient of their bit-sum with respect to the
    group coordinates as a complex ``(B, G, S)`` array (d/d re + 1j d/d im).
    """
    u, w = gh_rule(nodes)
    groups = np.asarray(groups, dtype=complex)
    G, S = groups.shape[1:]
    s = 1.0 / (math.sqrt(2.0) * sigma)
    g = groups * s
    vals, gr, gi = _log_ratio_kernel(
        np.ascontiguousarray(g.real), np.ascontiguousarray(g.imag),
        np.ascontiguousarray(u.real), np.ascontiguousarray(u.imag), w,
        np.ascontiguousarray(same), want_grad,
    )
    norm = LOG2E / (G * S)
    vals *= norm
    if not want_grad:
        return vals
    return vals, (gr + 1j * gi) * (norm * s)


def _as_batch(points) -> np.ndarray:
    arr = np.asarray(points, dtype=complex)
    return arr[None, :] if arr.ndim == 1 else arr


def hp_bits_batch(points, m_h: int, m_l: int, sigma: float, nodes: int) -> np.ndarray:
    """Per-bit HP mutual informations for a batch ``(B, 2**m)`` of point sets."""
    pts = _as_batch(points)
    same = hp_label_masks(m_h, m_l)
    return 1.0 - _expected_log_ratio(pts[:, None, :], sigma, same, nodes)


def lp_bits_batch(points, m_h: int, m_l: int, sigma: float, nodes: int) -> np.ndarray:
    """Per-bit conditional LP mutual informations for a batch of point sets."""
    pts = _as_batch(points)
    groups = pts.reshape(pts.shape[0], 2 ** m_h, 2 ** m_l)
    return 1.0 - _expected_log_ratio(groups, sigma, lp_label_masks(m_l), nodes)


def rates_batch(points, m_h: int, m_l: int, ch_h: ChannelSpec, ch_l: ChannelSpec,
                q: QuadratureSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(r_H, r_L)`` arrays for a batch of point sets; ``r_L`` is zero when ``m_l == 0``."""
    q = q or QuadratureSpec()
    pts = _as_batch(points)
    r_h = hp_bits_batch(pts, m_h, m_l, ch_h.sigma, q.nodes_per_dim).sum(axis=1)
    if m_l == 0:
        return r_h, np.zeros_like(r_h)
    r_l = lp_bits_batch(pts, m_h, m_l, ch_l.sigma, q.nodes_per_dim).sum(axis=1)
    return r_h, r_l


def bit_mis_hp(c: Constellation, ch: ChannelSpec, q: QuadratureSpec | None = None) -> np.ndarray:
    q = q or QuadratureSpec()
    return hp_bits_batch(c.points, c.m_h, c.m_l, ch.sigma, q.nodes_per_dim)[0]


def bit_mi_hp(c: Constellation, ch: ChannelSpec, i: int, q: QuadratureSpec | None = None) -> float:
    """``I(B_H^i; Y_H)`` in bits, ``i`` counted from 1."""
    if not 1 <= i <= c.m_h:
        raise IndexOutOfRange(f"HP bit index {i} outside 1..{c.m_h}")
    return float(bit_mis_hp(c, ch, q)[i - 1])


def bit_mis_lp_cond(c: Constellation, ch: ChannelSpec, q: QuadratureSpec | None = None) -> np.ndarray:
    if c.m_l == 0:
        raise NoLpBits("constellation carries no LP bits")
    q = q or QuadratureSpec()
    return lp_bits_batch(c.points, c.m_h, c.m_l, ch.sigma, q.nodes_per_dim)[0]


def bit_mi_lp_cond(c: Constellation, ch: ChannelSpec, j: int, q: QuadratureSpec | None = None) -> float:
    """``I(B_L^j; Y_L | B_H)``: group-averaged LP bit MI with HP bits known."""
    if not 1 <= j <= c.m_l:
        raise IndexOutOfRange(f"LP bit index {j} outside 1..{c.m_l}")
    return float(bit_mis_lp_cond(c, ch, q)[j - 1])


def bit_mis_lp_uncond(c: Constellation, ch: ChannelSpec, q: QuadratureSpec | None = None) -> np.ndarray:
    """LP bit MIs without SIC, i.e. over the full constellation."""
    if c.m_l == 0:
        raise NoLpBits("constellation carries no LP bits")
    q = q or QuadratureSpec()
    idx = np.arange(c.size) & ((1 << c.m_l) - 1)
    bits = np.stack([(idx >> (c.m_l - 1 - j)) & 1 for j in range(c.m_l)], axis=-1)
    same = bits[:, None, :] == bits[None, :, :]
    return 1.0 - _expected_log_ratio(c.points[None, None, :], ch.sigma, same, q.nodes_per_dim)[0]


def rate_hp(c: Constellation, ch: ChannelSpec, q: QuadratureSpec | None = None) -> float:
    return float(bit_mis_hp(c, ch, q).sum())


def rate_lp(c: Constellation, ch: ChannelSpec, q: QuadratureSpec | None = None) -> float:
    return float(bit_mis_lp_cond(c, ch, q).sum())


def joint_mi(c: Constellation, ch: ChannelSpec, q: QuadratureSpec | None = None) -> float:
    """Symbol-wise ``I(Z; Y)`` in bits for equiprobable symbols."""
    q = q or QuadratureSpec()
    same = np.eye(c.size, dtype=bool)[:, :, None]
    return float(c.m - _expected_log_ratio(c.points[None, None, :], ch.sigma, same, q.nodes_per_dim)[0, 0])


def mc_bit_mi(c: Constellation, ch: ChannelSpec, layer: str, bit: int,
              samples: int = 200_000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo estimate of one bit MI and its standard error.

    ``layer`` is ``"hp"`` or ``"lp"``; LP bits are conditioned on the HP
    group, as in SIC decoding.  Randomness comes from a Philox stream keyed by
    ``seed`` only.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    layer = layer.lower()
    if layer == "hp":
        if not 1 <= bit <= c.m_h:
            raise IndexOutOfRange(f"HP bit index {bit} outside 1..{c.m_h}")
        shift = c.m_l + c.m_h - bit
    elif layer == "lp":
        if c.m_l == 0:
            raise NoLpBits("constellation carries no LP bits")
        if not 1 <= bit <= c.m_l:
            raise IndexOutOfRange(f"LP bit index {bit} outside 1..{c.m_l}")
        shift = c.m_l - bit
    else:
        raise ValueError(f"layer must be 'hp' or 'lp', got {layer!r}")

    rng = np.random.Generator(np.random.Philox(seed))
    k = rng.integers(0, c.size, size=samples)
    noise = ch.sigma * (rng.standard_normal(samples) + 1j * rng.standard_normal(samples))
    y = c.points[k] + noise

    idx = np.arange(c.size)
    if layer == "hp":
        cand = np.broadcast_to(idx, (samples, c.size))
    else:
        width = 2 ** c.m_l
        cand = (k // width)[:, None] * width + np.arange(width)[None, :]
    same = ((cand >> shift) & 1) == ((k >> shift) & 1)[:, None]
    diff = y[:, None] - c.points[cand]
    d = -(diff.real ** 2 + diff.imag ** 2) / (2.0 * ch.sigma ** 2)
    d -= d.max(axis=1, keepdims=True)
    e = np.exp(d)
    lr = np.log(e.sum(axis=1)) - np.log(np.maximum(np.where(same, e, 0.0).sum(axis=1), _TINY))
    vals = 1.0 - lr * LOG2E
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def rates_with_grad(points, m_h: int, m_l: int, ch_h: ChannelSpec, ch_l: ChannelSpec,
                    q: QuadratureSpec | None = None):
    """``(r_H, r_L, dr_H, dr_L)`` for one point set.

    Gradients are exact derivatives of the quadrature sums, returned as complex
    arrays ``d/d re + 1j * d/d im`` per point.
    """
    q = q or QuadratureSpec()
    pts = np.asarray(points, dtype=complex).reshape(1, -1)
    v_h, g_h = _expected_log_ratio(pts[:, None, :], ch_h.sigma, hp_label_masks(m_h, m_l),
                                   q.nodes_per_dim, want_grad=True)
    r_h = float(m_h - v_h[0].sum())
    grad_h = -g_h[0, 0]
    if m_l == 0:
        return r_h, 0.0, grad_h, np.zeros_like(grad_h)
    groups = pts.reshape(1, 2 ** m_h, 2 ** m_l)
    v_l, g_l = _expected_log_ratio(groups, ch_l.sigma, lp_label_masks(m_l),
                                   q.nodes_per_dim, want_grad=True)
    r_l = float(m_l - v_l[0].sum())
    return r_h, r_l, grad_h, -g_l[0].reshape(-1)
