"""Next-k-token distinguishers and the advantage functional.

A distinguisher is a binary predicate d(i, x) that may read the prefix
x_{:i} and the window x_{i:i+k} (clipped at the document end).  The
advantage measures, averaged over positions and true-data prefixes, how
differently the predicate behaves on q's window completions versus p's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .dist import (
    Document,
    TextDistribution,
    block_distribution_completed,
    kl,
)
from .errors import PreconditionError, SizingError, ValidationError

Predicate = Callable[[int, Document, Document], int]


@dataclass(frozen=True)
class Distinguisher:
    """Binary predicate d(i, prefix, window) with the window property.

    ``predicate`` receives the 1-based position i, the prefix x_{:i}
    (i-1 tokens) and the window x_{i:i+k} clipped at the document end.
    ``size_meta`` optionally declares size/hidden/time/bits for size
    accounting and reports.
    """

    k: int
    n: int
    predicate: Predicate
    size_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise PreconditionError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")

    def window(self, x: Document, i: int) -> Document:
        return tuple(x[i - 1 : min(i - 1 + self.k, self.n)])

    def value(self, i: int, prefix: Document, window: Document) -> int:
        out = self.predicate(i, tuple(prefix), tuple(window))
        if out not in (0, 1):
            raise ValidationError(f"distinguisher output {out!r} is not a bit")
        return out

    def value_on_document(self, i: int, x: Document) -> int:
        return self.value(i, tuple(x[: i - 1]), self.window(x, i))


def complement(d: Distinguisher) -> Distinguisher:
    pred = d.predicate
    return Distinguisher(
        d.k, d.n, lambda i, s, w: 1 - pred(i, s, w), dict(d.size_meta)
    )


def constant_distinguisher(k: int, n: int, bit: int = 0) -> Distinguisher:
    return Distinguisher(k, n, lambda i, s, w: bit, {"entries": 0})


def table_distinguisher(
    k: int,
    n: int,
    entries: dict,
    default: int = 0,
    keyed_on: str = "full",
) -> Distinguisher:
    """Distinguisher backed by an explicit table.

    keyed_on selects the lookup key: "full" uses (i, x_{:i+k}) exactly as
    in the file format; "window" uses (i, window); "prev_window" uses
    (i, last prefix token or 0, window).
    """
    table = {key: int(bit) for key, bit in entries.items()}
    if keyed_on == "full":
        def pred(i, s, w):
            return table.get((i, tuple(s) + tuple(w)), default)
    elif keyed_on == "window":
        def pred(i, s, w):
            return table.get((i, tuple(w)), default)
    elif keyed_on == "prev_window":
        def pred(i, s, w):
            prev = s[-1] if len(s) >= 1 else 0
            return table.get((i, prev, tuple(w)), default)
    else:
        raise ValidationError(f"unknown table keying {keyed_on!r}")
    return Distinguisher(
        k, n, pred, {"entries": len(table), "keyed_on": keyed_on}
    )


# ---------------------------------------------------------------------------
# advantage


def _position_terms(
    d: Distinguisher, p: TextDistribution, q: TextDistribution
) -> np.ndarray:
    """terms[i-1] = E_{y~p}[ E_{x~q}[d_i|x_{:i}=y_{:i}] - d_i(y) ].

    Conditional expectations under q use the uniform-completion
    convention at zero-marginal prefixes; they enter only where p gives
    the prefix positive mass.
    """
    n, k, size = p.n, d.k, p.alphabet.size
    terms = np.zeros(n)
    for i in range(1, n + 1):
        kc = min(k, n - i + 1)
        pmarg = p.prefix_marginals(i - 1)
        acc = 0.0
        for s_idx in np.nonzero(pmarg > 0)[0]:
            s = _prefix_of(int(s_idx), i - 1, size)
            dvals = np.array(
                [d.value(i, s, w) for w in product(range(size), repeat=kc)],
                dtype=np.float64,
            )
            qblock = block_distribution_completed(q, s, kc)
            pblock = block_distribution_completed(p, s, kc)
            acc += float(pmarg[s_idx]) * float(((qblock - pblock) * dvals).sum())
        terms[i - 1] = acc
    return terms


def _prefix_of(idx: int, length: int, size: int) -> Document:
    out = []
    for _ in range(length):
        out.append(idx % size)
        idx //= size
    return tuple(reversed(out))


def advantage(
    d: Distinguisher, p: TextDistribution, q: TextDistribution
) -> float:
    """Exact advantage a(d, p, q); signed (no WLOG complementing here)."""
    if p.alphabet.size != q.alphabet.size or p.n != q.n:
        raise ValidationError("p and q must share alphabet and n")
    if d.k > p.n:
        raise PreconditionError(f"window k={d.k} exceeds document length {p.n}")
    return float(_position_terms(d, p, q).sum()) / p.n


def block_weights(n: int, k: int) -> list[int]:
    """w_j = |R(j, n, k)| = 1 + floor((n-1-j)/k) for offsets j in [0, k)."""
    return [1 + (n - 1 - j) // k for j in range(k)]


def anchors(i0_star: int, n: int, k: int) -> list[int]:
    """Block start positions R(i0*, n, k) = {i0*, i0*+k, ...} in [0, n-1]."""
    return list(range(i0_star, n, k))


def anchor_of(i: int, i0_star: int, k: int) -> int:
    """Greatest block start strictly below position i (paper's i0(i))."""
    if i <= i0_star:
        raise PreconditionError(f"position {i} is inside the untouched prefix")
    return i0_star + ((i - 1 - i0_star) // k) * k


@dataclass(frozen=True)
class AdvantageReport:
    """Offset decomposition: advantage = sum_j (w_j/n) a_j."""

    advantage: float
    offsets: tuple[tuple[int, int, float], ...]  # (j, w_j, a_j)
    best_offset: int

    def __post_init__(self):
        n_total = sum(w for _, w, _ in self.offsets)
        recon = sum(w * a for _, w, a in self.offsets) / n_total
        if abs(recon - self.advantage) > 1e-10:
            raise ValidationError(
                f"offset reconstruction off by {recon - self.advantage:.3e}"
            )


def offset_decomposition(
    d: Distinguisher, p: TextDistribution, q: TextDistribution
) -> AdvantageReport:
    n, k = p.n, d.k
    terms = _position_terms(d, p, q)
    weights = block_weights(n, k)
    a = []
    for j in range(k):
        idx = [i for i in anchors(j, n, k)]
        a.append(sum(terms[i] for i in idx) / weights[j])
    best = max(range(k), key=lambda j: (a[j], -j))
    total = float(terms.sum()) / n
    return AdvantageReport(
        advantage=total,
        offsets=tuple((j, weights[j], a[j]) for j in range(k)),
        best_offset=best,
    )


def pinsker_bound(p: TextDistribution, q: TextDistribution, k: int) -> float:
    """sqrt(k/(2n) * KL(p||q)): no next-k-token distinguisher beats this."""
    return math.sqrt(k / (2.0 * p.n) * kl(p, q))


def max_advantage_oracle(
    p: TextDistribution,
    q: TextDistribution,
    k: int,
    family,
    cap: int = 1 << 20,
) -> tuple[Distinguisher, float]:
    """Brute-force member of ``family`` with the largest |advantage|.

    ``family`` is a finite iterable of distinguishers (ties break to the
    earliest member) or the string "all_window_predicates": the family
    of independent per-position window subsets, whose extreme member is
    assembled position by position from the aggregated p-weighted gaps.
    """
    if family == "all_window_predicates":
        if p.alphabet.size**k > 1 << 12:
            raise SizingError(
                f"window space |Sigma|^k = {p.alphabet.size ** k} too large "
                f"to enumerate per position"
            )
        best = _extreme_window_predicate(p, q, k)
        return best, abs(advantage(best, p, q))
    best_d, best_val = None, -1.0
    count = 0
    for d in family:
        count += 1
        if count > cap:
            raise SizingError(f"family enumeration exceeded cap {cap}")
        val = advantage(d, p, q)
        if abs(val) > best_val + 1e-18:
            best_d, best_val = d, abs(val)
    if best_d is None:
        raise PreconditionError("empty distinguisher family")
    return best_d, best_val


def _position_gaps(p, q, k, i):
    size = p.alphabet.size
    kc = min(k, p.n - i + 1)
    pmarg = p.prefix_marginals(i - 1)
    gaps = np.zeros(size**kc)
    for s_idx in np.nonzero(pmarg > 0)[0]:
        s = _prefix_of(int(s_idx), i - 1, size)
        qblock = block_distribution_completed(q, s, kc)
        pblock = block_distribution_completed(p, s, kc)
        gaps += float(pmarg[s_idx]) * (qblock - pblock)
    return gaps


def _extreme_window_predicate(
    p: TextDistribution, q: TextDistribution, k: int
) -> Distinguisher:
    """The per-position window predicate attaining the extreme |advantage|."""
    size, n = p.alphabet.size, p.n
    pos_gaps = {i: _position_gaps(p, q, k, i) for i in range(1, n + 1)}
    hi = sum(g[g > 0].sum() for g in pos_gaps.values())
    lo = sum(g[g < 0].sum() for g in pos_gaps.values())
    sign = 1.0 if hi >= -lo else -1.0
    tables = {}
    for i, gaps in pos_gaps.items():
        kc = min(k, n - i + 1)
        for w_idx, w in enumerate(product(range(size), repeat=kc)):
            if sign * gaps[w_idx] > 0:
                tables[(i, w)] = 1

    def pred(i, s, w, tables=tables):
        return tables.get((i, tuple(w)), 0)

    return Distinguisher(k, n, pred, {"entries": len(tables), "extreme": True})


def max_window_predicate_advantage(
    p: TextDistribution, q: TextDistribution, k: int
) -> float:
    """Largest |advantage| over all per-position window predicates.

    The family of d with d_i(x) = phi_i(window) factorizes over positions,
    so the extreme advantage is a sum of per-position extremes: for each
    position take the windows whose aggregated p-weighted gap is positive
    (for the max) or negative (for the min).
    """
    hi = 0.0
    lo = 0.0
    for i in range(1, p.n + 1):
        gaps = _position_gaps(p, q, k, i)
        hi += gaps[gaps > 0].sum()
        lo += gaps[gaps < 0].sum()
    return max(abs(hi), abs(lo)) / p.n
