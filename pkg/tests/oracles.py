"""Brute-force reference implementations used as independent oracles.

Everything here enumerates documents directly and stays deliberately
naive; nothing imports the production code paths it is used to check
(only the container types for convenience).
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np


def docs(size: int, n: int):
    return product(range(size), repeat=n)


def doc_index(doc, size: int) -> int:
    idx = 0
    for tok in doc:
        idx = idx * size + tok
    return idx


def product_table(levels, size: int, n: int) -> np.ndarray:
    """Per-document product of conditionals, one document at a time."""
    out = np.empty(size**n)
    for doc in docs(size, n):
        val = 1.0
        for i in range(n):
            prefix_idx = doc_index(doc[:i], size)
            val *= levels[i][prefix_idx][doc[i]]
        out[doc_index(doc, size)] = val
    return out


def marginal_by_suffix_enumeration(probs, size: int, n: int, s) -> float:
    total = 0.0
    for tail in product(range(size), repeat=n - len(s)):
        total += probs[doc_index(tuple(s) + tail, size)]
    return float(total)


def kl_direct(p, q, size: int, n: int) -> float:
    total = 0.0
    for doc in docs(size, n):
        pi = p[doc_index(doc, size)]
        if pi > 0:
            total += pi * math.log(pi / q[doc_index(doc, size)])
    return total


def entropy_direct(p, size: int, n: int) -> float:
    total = 0.0
    for doc in docs(size, n):
        pi = p[doc_index(doc, size)]
        if pi > 0:
            total -= pi * math.log(pi)
    return total


def loss_by_document_enumeration(p_probs, q_levels, size: int, n: int) -> float:
    """-(1/n) sum_x p(x) log qbar(x) with qbar the per-document product."""
    qbar = product_table(q_levels, size, n)
    total = 0.0
    for doc in docs(size, n):
        pi = p_probs[doc_index(doc, size)]
        if pi > 0:
            total -= pi * math.log(qbar[doc_index(doc, size)])
    return total / n


def conditional_by_sums(probs, size: int, n: int, s, y) -> float:
    num = marginal_by_suffix_enumeration(probs, size, n, tuple(s) + (y,))
    den = marginal_by_suffix_enumeration(probs, size, n, s)
    return num / den


def advantage_double_enumeration(d, p_probs, q_probs, size: int, n: int) -> float:
    """Advantage by enumerating (y, x) document pairs directly.

    Zero-probability prefixes under q use the uniform completion for the
    conditional expectation (they only matter where p gives them mass).
    """
    total = 0.0
    for y in docs(size, n):
        py = p_probs[doc_index(y, size)]
        if py == 0:
            continue
        inner = 0.0
        for i in range(1, n + 1):
            prefix = y[: i - 1]
            pref_mass = marginal_by_suffix_enumeration(q_probs, size, n, prefix)
            cond = 0.0
            if pref_mass > 0:
                for x in docs(size, n):
                    if x[: i - 1] != prefix:
                        continue
                    qx = q_probs[doc_index(x, size)]
                    if qx > 0:
                        cond += qx / pref_mass * d.value_on_document(i, x)
            else:
                tail = n - (i - 1)
                for z in product(range(size), repeat=tail):
                    x = prefix + z
                    cond += d.value_on_document(i, x) / size**tail
            inner += cond - d.value_on_document(i, y)
        total += py * inner / n
    return total


def boosted_table_blockwise(q_probs, d, alpha, i0_star, size: int, n: int, k: int):
    """Blockwise-reweighted table computed document by document.

    For each document, multiply q(x) by exp(-alpha d_{i+1}(x)) / Z(x_{:i+1})
    over block anchors i = i0*, i0*+k, ... < n, computing each Z by direct
    conditional enumeration under q.
    """
    out = np.zeros_like(np.asarray(q_probs, dtype=float))
    anchors = list(range(i0_star, n, k))
    for doc in docs(size, n):
        val = q_probs[doc_index(doc, size)]
        if val == 0:
            out[doc_index(doc, size)] = 0.0
            continue
        for anchor in anchors:
            prefix = doc[:anchor]
            kc = min(k, n - anchor)
            z = 0.0
            pref_mass = marginal_by_suffix_enumeration(q_probs, size, n, prefix)
            for w in product(range(size), repeat=kc):
                cond = (
                    marginal_by_suffix_enumeration(q_probs, size, n, prefix + w)
                    / pref_mass
                )
                z += cond * math.exp(-alpha * d.value(anchor + 1, prefix, w))
            num = math.exp(
                -alpha * d.value(anchor + 1, prefix, doc[anchor : anchor + kc])
            )
            val *= num / z
        out[doc_index(doc, size)] = val
    return out
