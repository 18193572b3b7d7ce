"""Quartet taxonomy, resonance enumeration and interference-term counting.

A quartet is an ordered tuple ``(l, m, n, k)`` of integer modes satisfying
frequency matching ``l + m = n + k``.  It is resonant under an integer
dispersion relation ``zeta`` when the phase also matches,
``zeta(l) + zeta(m) = zeta(n) + zeta(k)``.
"""

from __future__ import annotations

import csv
import enum
import re
from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np

__all__ = [
    "Quartet",
    "QuartetClass",
    "DispersionRelation",
    "classify",
    "is_trivial",
    "enumerate_resonant",
    "nr_set",
    "nr_count",
    "count_interference_terms",
    "write_quartets_csv",
]


class QuartetClass(enum.Enum):
    SPM = "SPM"
    XPM = "XPM"
    DEGENERATE_FWM_LM = "DEGENERATE_FWM_LM"
    DEGENERATE_FWM_NK = "DEGENERATE_FWM_NK"
    NON_DEGENERATE_FWM = "NON_DEGENERATE_FWM"


@dataclass(frozen=True, order=True)
class Quartet:
    """Frequency-matched mode tuple ``(l, m, n, k)``."""

    l: int
    m: int
    n: int
    k: int

    def __post_init__(self) -> None:
        for name in ("l", "m", "n", "k"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise TypeError(f"quartet index {name}={v!r} is not an integer")
            object.__setattr__(self, name, int(v))
        if self.l + self.m != self.n + self.k:
            raise ValueError(f"{self} violates l + m = n + k")

    def astuple(self) -> tuple[int, int, int, int]:
        return (self.l, self.m, self.n, self.k)

    @property
    def multiplicity(self) -> int:
        """Ordered ``(l, m)`` arrangements producing the same monomial."""
        return 1 if self.l == self.m else 2


def is_trivial(q: Quartet) -> bool:
    """``(l = n and m = k)`` or ``(l = k and m = n)``; resonant for every dispersion."""
    return (q.l == q.n and q.m == q.k) or (q.l == q.k and q.m == q.n)


def classify(q: Quartet) -> QuartetClass:
    """Interaction class of a quartet (symmetric under ``l <-> m`` and ``n <-> k``)."""
    if q.l == q.m == q.n == q.k:
        return QuartetClass.SPM
    if is_trivial(q):
        return QuartetClass.XPM
    if q.l == q.m:
        return QuartetClass.DEGENERATE_FWM_LM
    if q.n == q.k:
        return QuartetClass.DEGENERATE_FWM_NK
    return QuartetClass.NON_DEGENERATE_FWM


_TERM = re.compile(r"^([+-]?\d*)\*?(k(?:\^(\d+))?)?$")


@dataclass(frozen=True)
class DispersionRelation:
    """Integer polynomial ``zeta(k) = sum_i c_i k^i``.

    Examples
    --------
    >>> DispersionRelation.parse("k^3+3k^2").coeffs
    (0, 0, 3, 1)
    >>> DispersionRelation((0, 0, 1))(-3)
    9
    """

    coeffs: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(isinstance(v, bool) or int(v) != v for v in self.coeffs):
            raise TypeError("dispersion coefficients must be integers")
        c = tuple(int(v) for v in self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def parse(cls, text: str) -> "DispersionRelation":
        """Parse ``"k^3+3k^2"``-style polynomials with integer coefficients."""
        body = text.replace(" ", "")
        if not body:
            raise ValueError("empty dispersion relation")
        terms = re.findall(r"[+-]?[^+-]+", body)
        if "".join(terms) != body:
            raise ValueError(f"cannot parse dispersion relation {text!r}")
        coeffs: dict[int, int] = {}
        for term in terms:
            m = _TERM.match(term)
            if not m or (not m.group(2) and m.group(1) in ("", "+", "-")):
                raise ValueError(f"cannot parse term {term!r} in {text!r}")
            num, var, power = m.groups()
            c = int(num) if num not in ("", "+", "-") else (-1 if num == "-" else 1)
            p = 0 if var is None else (int(power) if power else 1)
            coeffs[p] = coeffs.get(p, 0) + c
        deg = max(coeffs)
        return cls(tuple(coeffs.get(i, 0) for i in range(deg + 1)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, k):
        out = 0
        for c in reversed(self.coeffs):
            out = out * k + c
        return out

    def bound(self, box: int) -> int:
        """Upper bound on ``|zeta(k)|`` for ``|k| <= box``."""
        return sum(abs(c) * box**i for i, c in enumerate(self.coeffs))


_INT64_SAFE = 2**62


def enumerate_resonant(zeta: DispersionRelation, box: int) -> list[Quartet]:
    """All resonant quartets with every index in ``[-box, box]``.

    The search is exhaustive over ``(l, m, n)`` with ``k = l + m - n`` and uses
    exact int64 arithmetic, with an overflow check done up front.

    Raises
    ------
    OverflowError
        If ``4 max|zeta|`` could exceed the int64 range.
    """
    if box < 0:
        raise ValueError("box must be non-negative")
    if 4 * zeta.bound(box) >= _INT64_SAFE:
        raise OverflowError(f"zeta values up to {zeta.bound(box)} overflow int64 sums")
    ks = np.arange(-box, box + 1, dtype=np.int64)
    zk = np.zeros_like(ks)
    for c in reversed(zeta.coeffs):
        zk = zk * ks + c
    found: list[Quartet] = []
    lm = zk[:, None] + zk[None, :]
    for i_n, n in enumerate(ks):
        k = ks[:, None] + ks[None, :] - n
        ok = (k >= -box) & (k <= box)
        kk = np.clip(k, -box, box) + box
        hit = ok & (lm == zk[i_n] + zk[kk])
        for il, im in zip(*np.nonzero(hit)):
            found.append(Quartet(int(ks[il]), int(ks[im]), int(n), int(k[il, im])))
    found.sort()
    return found


def nr_set(k: int, box: int) -> Iterator[tuple[int, int, int]]:
    """Non-trivial triples ``(l, m, n)`` with ``l + m = n + k``, ``l, m != k``, all in the box."""
    for l in range(-box, box + 1):
        if l == k:
            continue
        for m in range(-box, box + 1):
            n = l + m - k
            if m != k and -box <= n <= box:
                yield (l, m, n)


def nr_count(k: int, box: int) -> int:
    """``|nr_k|`` inside ``[-box, box]``, counted in O(box)."""
    total = 0
    for l in range(-box, box + 1):
        if l == k:
            continue
        lo = max(-box, k - l - box)
        hi = min(box, k - l + box)
        if hi >= lo:
            total += hi - lo + 1 - (1 if lo <= k <= hi else 0)
    return total


def count_interference_terms(n_band: int, k: int = 0) -> int:
    """Interference terms at mode ``k`` for a band ``[-N, N]``.

    The count is the ``2 (2N + 1)`` cross-phase terms plus ``|nr_k|``.  For
    ``k = 0`` this equals ``3 N^2 + 3 N + 2``.
    """
    if n_band < 0:
        raise ValueError("band half-width must be non-negative")
    if abs(k) > n_band:
        raise ValueError(f"mode {k} lies outside the band [-{n_band}, {n_band}]")
    return 2 * (2 * n_band + 1) + nr_count(k, n_band)


CSV_COLUMNS = ("l", "m", "n", "k", "class", "trivial", "resonant")


def write_quartets_csv(
    quartets: list[Quartet], zeta: DispersionRelation, stream: TextIO
) -> None:
    """Write quartets with class, triviality and resonance flags as CSV."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for q in quartets:
        resonant = zeta(q.l) + zeta(q.m) == zeta(q.n) + zeta(q.k)
        w.writerow([q.l, q.m, q.n, q.k, classify(q).value, int(is_trivial(q)), int(resonant)])
