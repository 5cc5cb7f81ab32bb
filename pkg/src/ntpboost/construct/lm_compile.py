"""Compile dense next-token tables and distinguisher tables into circuits.

The compiled model graph latches tokens into per-position hidden nodes,
tracks its position with a capped counter, and computes the output by an
indicator-product table lookup.  Positions past the table's end emit
the uniform conditional, which is exactly the uniform extension the
boosting formulas marginalize out; the enumerating constructions feed
these graphs short suffix strings past the document end, so the cap is
load-bearing, not cosmetic.

The compiled distinguisher graph evaluates its predicate on the trailing
k-token window of whatever it has consumed: after m >= k tokens the
output is d(m-k+1, x_{:m+1}) with the window clipped at the document
end.  That positional convention is what the synchronized enumerator
expects when it replays anchor prefixes extended with candidate windows.
"""

from __future__ import annotations

from itertools import product

from ..dist import Alphabet, LanguageModel
from ..distinguishers import Distinguisher
from ..errors import PreconditionError
from ..rnn.expr import (
    case_select,
    const,
    ind_eq,
    ind_ge,
    ind_le,
    node,
    prod,
    relu,
)
from ..rnn.graph import NodeSpec, RnnGraph

MIN_RNN_TIME = 2


def _step_counter(period: int):
    return case_select(
        [(ind_le("w", period - 1.0), relu(1.0, (1.0, "w")))], const(1.0)
    )


def _position_counter(period: int, cap: int):
    # increments at token boundaries, sticks at `cap`
    bump = prod(ind_eq("w", float(period)), ind_le("c", cap - 1.0))
    return case_select([(bump, relu(1.0, (1.0, "c")))], node("c"))


def _latch(i: int):
    # p_i stores token+1 while the position counter sits at i
    return case_select(
        [(ind_eq("c", float(i)), relu(1.0, (1.0, "in")))], node(f"p{i}")
    )


def _prefix_match(s) -> list:
    return [ind_eq(f"p{j + 1}", float(tok + 1)) for j, tok in enumerate(s)]


def lm_to_rnn(lm: LanguageModel, rnn_time: int = MIN_RNN_TIME) -> RnnGraph:
    """Token-per-T circuit whose output at time i*T is q(x_i | x_{:i}).

    Size n + 4 with hidden set {step counter, position counter, latches}.
    """
    if rnn_time < MIN_RNN_TIME:
        raise PreconditionError(f"model circuits need rnn_time >= {MIN_RNN_TIME}")
    n, size = lm.n, lm.alphabet.size
    nodes = [
        NodeSpec("in", 0.0, None),
        NodeSpec("w", 1.0, _step_counter(rnn_time)),
        NodeSpec("c", 1.0, _position_counter(rnn_time, n + 1)),
    ]
    for i in range(1, n + 1):
        nodes.append(NodeSpec(f"p{i}", 0.0, _latch(i)))

    terms = []
    for m in range(1, n + 1):
        gate_m = ind_eq("c", float(m))
        for s in product(range(size), repeat=m - 1):
            matches = _prefix_match(s)
            for a in range(size):
                qv = lm.prob(a, s)
                if qv == 0.0:
                    continue
                terms.append(
                    (1.0, prod(const(qv), gate_m, ind_eq("in", float(a)), *matches))
                )
    terms.append((1.0 / size, ind_ge("c", float(n + 1))))
    nodes.append(NodeSpec("out", 0.0, relu(0.0, *terms)))

    return RnnGraph(
        nodes=nodes,
        input_ids=("in",),
        output_id="out",
        hidden_ids=tuple(["w", "c"] + [f"p{i}" for i in range(1, n + 1)]),
        rnn_time=rnn_time,
        meta={
            "kind": "table_lm",
            "schedule": "multiples",
            "n": n,
            "alphabet_size": size,
            "depth_bound": 16,
        },
    )


def distinguisher_to_rnn(
    d: Distinguisher, alphabet: Alphabet, rnn_time: int = MIN_RNN_TIME
) -> RnnGraph:
    """Trailing-window circuit: after m >= k tokens, output d(m-k+1, .).

    The position counter runs to n + k so anchors stay resolvable while
    the enumerator feeds candidate windows past the document end; window
    tokens beyond position n are ignored (the clipping convention).
    """
    if rnn_time < MIN_RNN_TIME:
        raise PreconditionError(f"model circuits need rnn_time >= {MIN_RNN_TIME}")
    n, k, size = d.n, d.k, alphabet.size
    cap = n + k
    nodes = [
        NodeSpec("in", 0.0, None),
        NodeSpec("w", 1.0, _step_counter(rnn_time)),
        NodeSpec("c", 1.0, _position_counter(rnn_time, cap)),
    ]
    for i in range(1, n + 1):
        nodes.append(NodeSpec(f"p{i}", 0.0, _latch(i)))

    terms = []
    for m in range(k, n + k):
        anchor = m - k + 1  # d's position argument
        gate_m = ind_eq("c", float(m))
        if m <= n:
            for s in product(range(size), repeat=m - 1):
                matches = _prefix_match(s)
                for a in range(size):
                    full = s + (a,)
                    bit = d.value(anchor, full[: anchor - 1], full[anchor - 1 :])
                    if bit:
                        terms.append(
                            (1.0, prod(gate_m, ind_eq("in", float(a)), *matches))
                        )
        else:
            for s in product(range(size), repeat=n):
                bit = d.value(anchor, s[: anchor - 1], s[anchor - 1 :])
                if bit:
                    terms.append((1.0, prod(gate_m, *_prefix_match(s))))
    expr = relu(0.0, *terms) if terms else const(0.0)
    nodes.append(NodeSpec("out", 0.0, expr))

    return RnnGraph(
        nodes=nodes,
        input_ids=("in",),
        output_id="out",
        hidden_ids=tuple(["w", "c"] + [f"p{i}" for i in range(1, n + 1)]),
        rnn_time=rnn_time,
        meta={
            "kind": "table_distinguisher",
            "schedule": "window",
            "n": n,
            "k": k,
            "alphabet_size": size,
            "depth_bound": 16,
        },
    )
