"""Labeled hierarchical constellations.

A constellation carries ``2**(m_h + m_l)`` complex points.  Labels are never
stored: the point at index ``l(b_H) * 2**m_l + l(b_L)`` carries the label
``(b_H, b_L)``, with bit vectors read most-significant bit first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    IndexOutOfRange,
    NonFinite,
    NonPositiveScale,
    SizeMismatch,
    UnsupportedOrder,
    ZeroPower,
)

__all__ = [
    "Constellation",
    "HqamParams",
    "new_natural",
    "average_power",
    "papr",
    "scale",
    "normalize_power",
    "expand_central_symmetric",
    "hqam",
    "hqam_power",
    "HQAM_BASES",
    "hp_bit_partition",
    "lp_bit_partition",
    "lp_sub_constellation",
    "label_of",
]


@dataclass(frozen=True)
class Constellation:
    m_h: int
    m_l: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.m_h < 1 or self.m_l < 0:
            raise SizeMismatch(f"invalid bit split m_h={self.m_h}, m_l={self.m_l}")
        pts = np.array(self.points, dtype=complex).reshape(-1)
        if pts.size != 2 ** (self.m_h + self.m_l):
            raise SizeMismatch(
                f"expected {2 ** (self.m_h + self.m_l)} points for "
                f"m_h={self.m_h}, m_l={self.m_l}, got {pts.size}"
            )
        if not np.all(np.isfinite(pts)):
            raise NonFinite("constellation coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.m_h + self.m_l

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def coords(self) -> np.ndarray:
        """Points as an ``(M, 2)`` array of (re, im) pairs."""
        return np.column_stack([self.points.real, self.points.imag])

    def to_dict(self) -> dict:
        return {
            "m_h": self.m_h,
            "m_l": self.m_l,
            "points": [[float(z.real), float(z.imag)] for z in self.points],
        }

    def to_json(self) -> str:
        # 17 significant digits round-trips every double exactly
        rows = ",\n    ".join(
            f"[{z.real:.16e}, {z.imag:.16e}]" for z in self.points
        )
        return (
            "{\n"
            f'  "m_h": {self.m_h},\n'
            f'  "m_l": {self.m_l},\n'
            f'  "points": [\n    {rows}\n  ]\n'
            "}\n"
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "Constellation":
        try:
            m_h = int(doc["m_h"])
            m_l = int(doc["m_l"])
            raw = doc["points"]
        except (KeyError, TypeError) as exc:
            raise SizeMismatch(f"malformed constellation document: {exc}") from exc
        pts = []
        for row in raw:
            if len(row) != 2:
                raise SizeMismatch("each point must be a [re, im] pair")
            pts.append(complex(float(row[0]), float(row[1])))
        return new_natural(m_h, m_l, pts)

    @classmethod
    def from_json(cls, text: str) -> "Constellation":
        return cls.from_dict(json.loads(text))

    def allclose(self, other: "Constellation", atol: float = 1e-9) -> bool:
        return (
            self.m_h == other.m_h
            and self.m_l == other.m_l
            and bool(np.all(np.abs(self.coords - other.coords) <= atol))
        )


def new_natural(m_h: int, m_l: int, points: Sequence[complex]) -> Constellation:
    """Build a constellation whose labels follow natural index order."""
    return Constellation(int(m_h), int(m_l), np.asarray(points, dtype=complex))


def label_of(c: Constellation, index: int) -> tuple[str, str]:
    """Return the (HP, LP) bit strings carried by ``index``."""
    if not 0 <= index < c.size:
        raise IndexOutOfRange(f"index {index} outside 0..{c.size - 1}")
    hp = format(index >> c.m_l, f"0{c.m_h}b")
    lp = format(index & ((1 << c.m_l) - 1), f"0{c.m_l}b") if c.m_l else ""
    return hp, lp


def average_power(c: Constellation) -> float:
    return float(np.mean(c.points.real ** 2 + c.points.imag ** 2))


def papr(c: Constellation) -> float:
    mags = c.points.real ** 2 + c.points.imag ** 2
    mean = float(np.mean(mags))
    if mean <= 0.0:
        raise ZeroPower("PAPR undefined for an all-zero constellation")
    return float(np.max(mags)) / mean


def scale(c: Constellation, rho: float) -> Constellation:
    if not rho > 0:
        raise NonPositiveScale(f"scale factor must be positive, got {rho}")
    return Constellation(c.m_h, c.m_l, c.points * rho)


def normalize_power(c: Constellation, p: float = 1.0) -> Constellation:
    """Rescale ``c`` so that its average power equals ``p``."""
    if not p > 0:
        raise NonPositiveScale(f"target power must be positive, got {p}")
    pw = average_power(c)
    if pw <= 0.0:
        raise ZeroPower("cannot normalize an all-zero constellation")
    return Constellation(c.m_h, c.m_l, c.points * math.sqrt(p / pw))


def expand_central_symmetric(cluster: Sequence[complex], m_l: int) -> Constellation:
    """Expand the ``b_H = 00`` cluster into a four-fold symmetric constellation.

    Group order is ``(z, -conj(z), conj(z), -z)`` so HP bit 1 flips the
    imaginary part and HP bit 2 flips the real part.
    """
    zc = np.asarray(cluster, dtype=complex).reshape(-1)
    if zc.size != 2 ** m_l:
        raise SizeMismatch(f"cluster must hold {2 ** m_l} points, got {zc.size}")
    if not np.all(np.isfinite(zc)):
        raise NonFinite("cluster coordinates must be finite")
    pts = np.concatenate([zc, -np.conj(zc), np.conj(zc), -zc])
    return Constellation(2, m_l, pts)


# Per-quadrant LP offsets for the (+,+) quadrant, in natural LP-label order.
# Other quadrants mirror these offsets, which keeps Gray adjacency across
# quadrant borders.  m_l=3 uses a 4x2 rectangle (quasi-Gray stand-in for the
# cross 32-QAM base).
HQAM_BASES: dict[int, np.ndarray] = {
    2: np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]),
    3: np.array(
        [
            3 + 1j, 3 - 1j,     # LP 000, 001
            1 + 1j, 1 - 1j,     # LP 010, 011
            -3 + 1j, -3 - 1j,   # LP 100, 101
            -1 + 1j, -1 - 1j,   # LP 110, 111
        ]
    ),
}

# HP quadrant centres; groups 00, 01, 10, 11 match expand_central_symmetric.
_QUADRANTS = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j])


@dataclass(frozen=True)
class HqamParams:
    d1: float
    d2: float
    m_l: int = 2

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 >= 0):
            raise ValueError(f"need d1 > 0 and d2 >= 0, got ({self.d1}, {self.d2})")
        if self.m_l not in HQAM_BASES:
            raise UnsupportedOrder(f"H-QAM supports m_l in {sorted(HQAM_BASES)}, got {self.m_l}")


def _hqam_points(d1, d2, m_l, base=None):
    b = HQAM_BASES[m_l] if base is None else np.asarray(base, dtype=complex)
    if b.size != 2 ** m_l:
        raise SizeMismatch(f"H-QAM base must hold {2 ** m_l} points")
    q = _QUADRANTS[:, None]
    offsets = np.sign(q.real) * b.real + 1j * np.sign(q.imag) * b.imag
    return (d1 * q + d2 * offsets).reshape(-1)


def hqam(params: HqamParams, base: Sequence[complex] | None = None) -> Constellation:
    """Hierarchical QAM ``z(b_H, b_L) = d1*q(b_H) + d2*s(b_L)``.

    ``base`` swaps in an alternative ``(+,+)``-quadrant LP layout.
    """
    if params.m_l not in HQAM_BASES and base is None:
        raise UnsupportedOrder(f"no H-QAM base for m_l={params.m_l}")
    return Constellation(2, params.m_l, _hqam_points(params.d1, params.d2, params.m_l, base))


def hqam_power(d1: float, d2: float, m_l: int) -> float:
    """Closed-form average power of :func:`hqam` (cross terms cancel)."""
    b = HQAM_BASES[m_l]
    return 2.0 * d1 ** 2 + float(np.mean(np.abs(b) ** 2)) * d2 ** 2


def hp_bit_partition(c: Constellation, i: int, b: int) -> np.ndarray:
    """Indices whose HP label bit ``i`` (1-based, MSB first) equals ``b``."""
    if not 1 <= i <= c.m_h:
        raise IndexOutOfRange(f"HP bit index {i} outside 1..{c.m_h}")
    idx = np.arange(c.size)
    bits = (idx >> (c.m_l + c.m_h - i)) & 1
    return idx[bits == int(b)]


def lp_bit_partition(c: Constellation, j: int, b: int) -> np.ndarray:
    """Indices whose LP label bit ``j`` (1-based, MSB first) equals ``b``."""
    if not 1 <= j <= c.m_l:
        raise IndexOutOfRange(f"LP bit index {j} outside 1..{c.m_l}")
    idx = np.arange(c.size)
    bits = (idx >> (c.m_l - j)) & 1
    return idx[bits == int(b)]


def lp_sub_constellation(c: Constellation, b_h: Sequence[int] | str) -> np.ndarray:
    """Contiguous indices of the group labelled by HP bits ``b_h``."""
    bits = [int(x) for x in b_h]
    if len(bits) != c.m_h or any(x not in (0, 1) for x in bits):
        raise SizeMismatch(f"b_H must be {c.m_h} bits, got {b_h!r}")
    group = int("".join(map(str, bits)), 2)
    width = 2 ** c.m_l
    return np.arange(group * width, (group + 1) * width)
