"""Component circuits feeding the boosted ratio: f1, f2, g1/g2.

f1 wraps the synchronized enumerator around the model circuit and chains
a running product across the k digit outputs, yielding the candidate
window's conditional probability at the end of each string loop.  f2
does the same around the distinguisher circuit and exponentiates.  The
g module compares the enumerated window against the realized tokens
stored since the anchor, producing the two prefix-match indicators.
"""

from __future__ import annotations

from ..errors import PreconditionError, ValidationError
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
from ..rnn.transitions import exp_binary
from .enumerator import (
    EnumScaffold,
    build_scaffold,
    build_sync_enumerator,
    scaffold_hidden,
)


def _ind_eq_nodes(a: str, b: str):
    """1 if the integer-valued nodes a and b agree, else 0."""
    from ..rnn.expr import MACHINE_EPS

    inv = 1.0 / MACHINE_EPS
    above = relu(0.0, (1.0, a), (-1.0, b))
    below = relu(0.0, (1.0, b), (-1.0, a))
    return relu(1.0, (-inv, above), (-inv, below))


def build_f1(
    q_graph: RnnGraph,
    k: int,
    i0_star: int,
    tau: int,
    base: int,
    prefix: str = "f1.",
) -> tuple[RnnGraph, EnumScaffold]:
    """Window-probability circuit: q(z | anchor prefix) per string loop.

    Output instants: i*T_U - 1 holds q(x_i | x_{:i}) for i <= offset;
    (i-1)*T_U + j*k*tau - 1 holds q(z^(j) | anchor prefix) afterwards.
    Size |Q| + |H_Q| + 2k + 7; hidden unchanged from the enumerator.
    """
    if tau < q_graph.rnn_time + 4:
        raise PreconditionError(
            f"need tau >= T_Q + 4 = {q_graph.rnn_time + 4}, got {tau}"
        )
    inner, sc = build_sync_enumerator(q_graph, k, i0_star, tau, base, prefix)
    nm = sc.name
    vq = inner.output_id
    initial = sc.in_initial_phase()
    acc = nm("out")
    cases = [
        (prod(ind_eq(nm("w0"), float(sc.period - 2)), initial), node(vq)),
        (
            prod(sc.at_string_start_next(), ind_ge(nm("vc"), float(i0_star))),
            const(1.0),
        ),
        (
            prod(ind_eq(nm("w"), float(tau - 2)), ind_ge(nm("vc"), float(i0_star + 1))),
            prod(node(acc), node(vq)),
        ),
    ]
    nodes = list(inner.nodes)
    nodes.append(NodeSpec(acc, 1.0, case_select(cases, node(acc))))
    graph = RnnGraph(
        nodes=nodes,
        input_ids=inner.input_ids,
        output_id=acc,
        hidden_ids=inner.hidden_ids,
        rnn_time=inner.rnn_time,
        meta={**inner.meta, "kind": "f1_window_probability"},
    )
    expect = q_graph.size + q_graph.hidden_size + 2 * k + 7
    if graph.size != expect:
        raise ValidationError(f"f1 accounting broken: {graph.size} != {expect}")
    return graph, sc


def build_f2(
    d_graph: RnnGraph,
    k: int,
    i0_star: int,
    alpha: float,
    tau: int,
    base: int,
    prefix: str = "f2.",
) -> tuple[RnnGraph, EnumScaffold]:
    """Reweighting circuit: exp(-alpha * d(anchor+1, prefix . z)).

    Output instants: (i-1)*T_U + j*k*tau - 1.  Size |D| + |H_D| + 2k + 7.
    """
    if tau < d_graph.rnn_time + 2:
        raise PreconditionError(
            f"need tau >= T_D + 2 = {d_graph.rnn_time + 2}, got {tau}"
        )
    inner, sc = build_sync_enumerator(d_graph, k, i0_star, tau, base, prefix)
    nm = sc.name
    out = nm("out")
    nodes = list(inner.nodes)
    nodes.append(NodeSpec(out, 1.0, exp_binary(-alpha, inner.output_id)))
    graph = RnnGraph(
        nodes=nodes,
        input_ids=inner.input_ids,
        output_id=out,
        hidden_ids=inner.hidden_ids,
        rnn_time=inner.rnn_time,
        meta={**inner.meta, "kind": "f2_exp_distinguisher", "alpha": alpha},
    )
    expect = d_graph.size + d_graph.hidden_size + 2 * k + 7
    if graph.size != expect:
        raise ValidationError(f"f2 accounting broken: {graph.size} != {expect}")
    return graph, sc


def build_g(
    k: int,
    i0_star: int,
    tau: int,
    base: int,
    prefix: str = "g.",
) -> tuple[RnnGraph, EnumScaffold]:
    """Indicator circuit: window-vs-realized prefix matches g1 and g2.

    Nodes v1 and v2 hold, from the fourth step of each string loop,
    [z^(j)_{:r0+1} = x_{anchor+1:i+1}] and the same with r0 - 1.
    Size 3k + 8; hidden 2k + 5.
    """
    if tau < 4:
        raise PreconditionError(f"need tau >= 4, got {tau}")
    nm = lambda raw: prefix + raw
    in_name = nm("in")
    nodes, sc = build_scaffold(
        prefix, base, k, tau, i0_star, in_name, include_vc=False
    )
    nodes.insert(0, NodeSpec(in_name, 0.0, None))

    # per-slot agreement between stored tokens and the window counter;
    # string character l is counter digit k+1-l
    for l in range(1, k + 1):
        nodes.append(
            NodeSpec(
                nm(f"m{l}"),
                0.0,
                _ind_eq_nodes(nm(f"y{l}"), nm(f"e{k + 1 - l}")),
            )
        )

    def match_product(limit_minus: int):
        # prod_l [m_l if l <= u0 - limit_minus else 1]
        factors = []
        for l in range(1, k + 1):
            active = ind_ge(nm("u0"), float(l + limit_minus))
            factors.append(
                relu(
                    0.0,
                    (1.0, prod(node(nm(f"m{l}")), active)),
                    (1.0, ind_le(nm("u0"), float(l + limit_minus - 1))),
                )
            )
        return prod(*factors)

    update_gate = prod(
        ind_eq(nm("w"), 3.0),
        ind_eq(nm("u"), 1.0),
        sc.in_enum_phase(),
    )
    nodes.append(
        NodeSpec(
            nm("v1"),
            0.0,
            case_select([(update_gate, match_product(0))], node(nm("v1"))),
        )
    )
    nodes.append(
        NodeSpec(
            nm("v2"),
            0.0,
            case_select([(update_gate, match_product(1))], node(nm("v2"))),
        )
    )

    graph = RnnGraph(
        nodes=nodes,
        input_ids=(in_name,),
        output_id=nm("v1"),
        hidden_ids=tuple(scaffold_hidden(sc, include_vc=False)),
        rnn_time=sc.period,
        meta={
            "kind": "g_indicators",
            "schedule": "multiples",
            "k": k,
            "tau": tau,
            "base": base,
            "i0_star": i0_star,
            "pair": (nm("v1"), nm("v2")),
            "depth_bound": 20,
        },
    )
    if graph.size != 3 * k + 8:
        raise ValidationError(f"g accounting broken: {graph.size} != {3 * k + 8}")
    if graph.hidden_size != 2 * k + 5:
        raise ValidationError(
            f"g hidden accounting broken: {graph.hidden_size} != {2 * k + 5}"
        )
    return graph, sc
