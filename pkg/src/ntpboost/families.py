"""Enumerable distinguisher families used by oracles and the self-boost loop."""

from __future__ import annotations

from itertools import product

from .dist import Alphabet
from .distinguishers import Distinguisher, constant_distinguisher
from .errors import SizingError

FAMILY_CAP = 1 << 17


def _check_family_size(count: int, cap: int = FAMILY_CAP) -> None:
    if count > cap:
        raise SizingError(f"family of {count} distinguishers exceeds cap {cap}")


def single_position_window_subsets(
    alphabet: Alphabet, n: int, k: int, position: int
) -> list[Distinguisher]:
    """All predicates active at one position: d_i = [window in A], i fixed.

    Enumerates every subset A of the clipped window space at ``position``;
    other positions output 0.
    """
    size = alphabet.size
    kc = min(k, n - position + 1)
    windows = list(product(range(size), repeat=kc))
    _check_family_size(2 ** len(windows))
    family = []
    for bits in range(2 ** len(windows)):
        chosen = frozenset(w for j, w in enumerate(windows) if bits >> j & 1)

        def pred(i, s, w, chosen=chosen, position=position):
            return 1 if i == position and tuple(w) in chosen else 0

        family.append(
            Distinguisher(k, n, pred, {"position": position, "subset_bits": bits})
        )
    return family


def product_window_family(alphabet: Alphabet, n: int, k: int) -> list[Distinguisher]:
    """All per-position window predicates: independent subset per position.

    Size is prod_i 2^(|Sigma|^kc(i)); only feasible for tiny instances.
    """
    size = alphabet.size
    per_pos = []
    count = 1
    for i in range(1, n + 1):
        kc = min(k, n - i + 1)
        windows = list(product(range(size), repeat=kc))
        count *= 2 ** len(windows)
        _check_family_size(count)
        per_pos.append((i, windows))
    family = []
    for combo in product(*[range(2 ** len(ws)) for _, ws in per_pos]):
        tables = {}
        for (i, windows), bits in zip(per_pos, combo):
            for j, w in enumerate(windows):
                if bits >> j & 1:
                    tables[(i, w)] = 1

        def pred(i, s, w, tables=tables):
            return tables.get((i, tuple(w)), 0)

        family.append(Distinguisher(k, n, pred, {"combo": combo}))
    return family


def one_prefix_table_family(
    alphabet: Alphabet, n: int, k: int
) -> list[Distinguisher]:
    """All tables over (previous prefix token, full k-window).

    The same table applies at every position; at i = 1 the missing
    previous token reads as 0, and clipped windows are zero-padded to
    length k, which preserves the window property.
    """
    size = alphabet.size
    keys = list(product(range(size), *[range(size)] * k))
    _check_family_size(2 ** len(keys))
    key_index = {key: j for j, key in enumerate(keys)}
    family = []
    for bits in range(2 ** len(keys)):

        def pred(i, s, w, bits=bits):
            prev = s[-1] if len(s) >= 1 else 0
            w = tuple(w) + (0,) * (k - len(w))
            return bits >> key_index[(prev,) + w] & 1

        family.append(
            Distinguisher(
                k,
                n,
                pred,
                {"table_bits": bits, "entries": len(keys), "keyed_on": "prev_window"},
            )
        )
    return family


def trivial_family(k: int, n: int) -> list[Distinguisher]:
    return [constant_distinguisher(k, n, 0)]
