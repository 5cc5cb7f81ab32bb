"""Assembly of the boosted circuit and the doubling cross-check oracle.

The efficient construction wires the f1, f2, and g components (each with
its own counters, all in lockstep) into two per-input-loop accumulators
w1 = sum f1*f2*g1 and w2 = sum f1*f2*g2 over candidate windows, and an
output node computing their ratio at the end of each input loop.  Node
counts match the closed-form accounting exactly.

The simple construction keeps two full copies of the model circuit (one
pinned to the anchor prefix, one scratch) and likewise for the
distinguisher, copying entire states instead of hidden sets.  It never
relies on hidden-set sufficiency, which is what makes it an independent
oracle for the efficient construction.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import PreconditionError, ValidationError
from ..rnn.expr import (
    case_select,
    const,
    ind_eq,
    ind_ge,
    ind_le,
    node,
    prod,
    recip,
    relu,
    substitute,
)
from ..rnn.graph import NodeSpec, RnnGraph
from ..rnn.transitions import exp_binary
from .components import build_f1, build_f2, build_g
from .enumerator import EnumScaffold, build_scaffold, scaffold_hidden


@dataclass(frozen=True)
class ConstructionReport:
    """Built node/hidden/time counts against the closed-form accounting."""

    built_size: int
    built_hidden: int
    built_time: int
    formula_size: int
    formula_hidden: int
    formula_time: int
    equivalence_checked: bool = False

    def __post_init__(self):
        if (
            self.built_size != self.formula_size
            or self.built_hidden != self.formula_hidden
            or self.built_time != self.formula_time
        ):
            raise ValidationError(
                f"construction accounting mismatch: built "
                f"({self.built_size}, {self.built_hidden}, {self.built_time}) "
                f"vs formula ({self.formula_size}, {self.formula_hidden}, "
                f"{self.formula_time})"
            )


def boosted_size_formula(q_size, q_hidden, d_size, d_hidden, k) -> int:
    return q_size + q_hidden + d_size + d_hidden + 7 * k + 25


def boosted_hidden_formula(q_hidden, d_hidden, k) -> int:
    return q_hidden + d_hidden + 6 * k + 17


def boosted_time_formula(base, k, t_q, t_d) -> int:
    return (base**k + 1) * k * (max(t_q, t_d) + 4)


def _combiner_nodes(
    sc: EnumScaffold,
    f1_out: str,
    f2_out: str,
    g_v1: str,
    g_v2: str,
    i0_star: int,
) -> list[NodeSpec]:
    """Accumulators and the ratio output, clocked off ``sc``'s counters."""
    nm = sc.name
    accumulate = prod(
        ind_eq(nm("w"), float(sc.tau - 1)),
        ind_eq(nm("u"), float(sc.k)),
        sc.in_enum_phase(),
    )
    at_loop_end = ind_eq(nm("w0"), float(sc.period))
    term1 = prod(node(f1_out), node(f2_out), node(g_v1))
    term2 = prod(node(f1_out), node(f2_out), node(g_v2))
    w1 = NodeSpec(
        "w1",
        0.0,
        case_select(
            [(at_loop_end, const(0.0)), (accumulate, relu(0.0, (1.0, "w1"), (1.0, term1)))],
            node("w1"),
        ),
    )
    w2 = NodeSpec(
        "w2",
        0.0,
        case_select(
            [(at_loop_end, const(0.0)), (accumulate, relu(0.0, (1.0, "w2"), (1.0, term2)))],
            node("w2"),
        ),
    )
    # the ratio is computed once per loop; off the consuming instant the
    # denominator gets +1 so the reciprocal can never hit zero while the
    # selector discards the branch
    consuming = prod(
        ind_eq(nm("w0"), float(sc.period - 1)),
        ind_ge(nm("vc"), float(i0_star + 1)),
    )
    guarded = recip(1.0, (1.0, node("w2")), (-1.0, consuming))
    out = NodeSpec(
        "out",
        0.0,
        case_select(
            [
                (sc.in_initial_phase(), node(f1_out)),
                (ind_eq(nm("w0"), float(sc.period - 1)), prod(node("w1"), guarded)),
            ],
            node("out"),
        ),
    )
    return [w1, w2, out]


def build_boosted_rnn(
    q_graph: RnnGraph,
    d_graph: RnnGraph,
    k: int,
    alpha: float,
    i0_star: int,
    base: int,
) -> tuple[RnnGraph, ConstructionReport]:
    """Efficient boosted circuit; output at i*T is the boosted conditional.

    tau is pinned at max(T_Q, T_D) + 4 so the accounting is exact.
    """
    if not 0 <= i0_star <= k - 1:
        raise PreconditionError(f"offset {i0_star} outside [0, {k - 1}]")
    tau = max(q_graph.rnn_time, d_graph.rnn_time) + 4
    f1, sc1 = build_f1(q_graph, k, i0_star, tau, base, prefix="f1.")
    f2, _ = build_f2(d_graph, k, i0_star, alpha, tau, base, prefix="f2.")
    g, _ = build_g(k, i0_star, tau, base, prefix="g.")
    v1, v2 = g.meta["pair"]

    nodes = list(f1.nodes) + list(f2.nodes) + list(g.nodes)
    nodes += _combiner_nodes(sc1, f1.output_id, f2.output_id, v1, v2, i0_star)
    graph = RnnGraph(
        nodes=nodes,
        input_ids=f1.input_ids + f2.input_ids + g.input_ids,
        output_id="out",
        hidden_ids=f1.hidden_ids + f2.hidden_ids + g.hidden_ids,
        rnn_time=sc1.period,
        meta={
            "kind": "boosted",
            "schedule": "multiples",
            "k": k,
            "tau": tau,
            "base": base,
            "i0_star": i0_star,
            "alpha": alpha,
            "depth_bound": 20,
        },
    )
    report = ConstructionReport(
        built_size=graph.size,
        built_hidden=graph.hidden_size,
        built_time=graph.rnn_time,
        formula_size=boosted_size_formula(
            q_graph.size, q_graph.hidden_size, d_graph.size, d_graph.hidden_size, k
        ),
        formula_hidden=boosted_hidden_formula(
            q_graph.hidden_size, d_graph.hidden_size, k
        ),
        formula_time=boosted_time_formula(
            base, k, q_graph.rnn_time, d_graph.rnn_time
        ),
    )
    return graph, report


# ---------------------------------------------------------------------------
# the doubling construction


def _full_copy_main(
    g_src: RnnGraph, sc: EnumScaffold, prefix: str, in_name: str
) -> list[NodeSpec]:
    """Anchor copy of an entire circuit: run in the initial phase and the
    anchor-advance replay, hold otherwise."""
    nm = sc.name
    t_inner = g_src.rnn_time
    src_in = g_src.input_ids[0]
    names = {n.name: prefix + n.name for n in g_src.nodes if n.name != src_in}
    initial = sc.in_initial_phase()
    final_phase = ind_ge(nm("w0"), float(sc.strings * sc.k * sc.tau))
    anchor_moves = ind_eq(nm("u0"), float(sc.k))
    nodes = []
    for spec in g_src.nodes:
        if spec.name == src_in:
            continue
        direct = substitute(spec.expr, {**names, src_in: in_name})
        cases = [
            (prod(ind_le(nm("w0"), float(t_inner)), initial), direct),
            (initial, node(names[spec.name])),
        ]
        for j in range(1, sc.k + 1):
            replay = substitute(spec.expr, {**names, src_in: nm(f"y{j}")})
            cases.append(
                (
                    prod(
                        final_phase,
                        anchor_moves,
                        ind_le(nm("w"), float(t_inner)),
                        ind_eq(nm("u"), float(j)),
                    ),
                    replay,
                )
            )
        nodes.append(
            NodeSpec(
                names[spec.name],
                spec.init,
                case_select(cases, node(names[spec.name])),
            )
        )
    return nodes


def _full_copy_scratch(
    g_src: RnnGraph, sc: EnumScaffold, prefix: str, main_prefix: str
) -> list[NodeSpec]:
    """Scratch copy: load the whole main state each string loop, then
    consume emitted digits on the per-digit schedule."""
    nm = sc.name
    t_inner = g_src.rnn_time
    src_in = g_src.input_ids[0]
    names = {n.name: prefix + n.name for n in g_src.nodes if n.name != src_in}
    main = {n.name: main_prefix + n.name for n in g_src.nodes if n.name != src_in}
    run_window = ind_le(nm("w"), float(t_inner - 1))
    at_w_tau = ind_eq(nm("w"), float(sc.tau))
    nodes = []
    for spec in g_src.nodes:
        if spec.name == src_in:
            continue
        mirror = substitute(spec.expr, {**names, src_in: nm("ve")})
        cases = [
            (sc.at_string_start_next(), node(main[spec.name])),
            (sc.in_initial_phase(), node(main[spec.name])),
            (prod(run_window, sc.in_enum_phase()), mirror),
            (prod(at_w_tau, sc.in_enum_phase()), mirror),
        ]
        nodes.append(
            NodeSpec(
                names[spec.name],
                spec.init,
                case_select(cases, node(names[spec.name])),
            )
        )
    return nodes


def build_boosted_rnn_simple(
    q_graph: RnnGraph,
    d_graph: RnnGraph,
    k: int,
    alpha: float,
    i0_star: int,
    base: int,
) -> RnnGraph:
    """Doubling construction: full state copies instead of hidden copies.

    Size 2|Q| + 2|D| + 5k + 16; outputs must match build_boosted_rnn at
    every scheduled instant.
    """
    if not 0 <= i0_star <= k - 1:
        raise PreconditionError(f"offset {i0_star} outside [0, {k - 1}]")
    for g_src, label in ((q_graph, "model"), (d_graph, "distinguisher")):
        if len(g_src.input_ids) != 1:
            raise PreconditionError(f"{label} circuit must have one input node")
    tau = max(q_graph.rnn_time, d_graph.rnn_time) + 4
    nodes, sc = build_scaffold("c.", base, k, tau, i0_star, "c.in")
    nodes.insert(0, NodeSpec("c.in", 0.0, None))
    nm = sc.name

    nodes += _full_copy_main(q_graph, sc, "qm.", "c.in")
    nodes += _full_copy_scratch(q_graph, sc, "qs.", "qm.")
    nodes += _full_copy_main(d_graph, sc, "dm.", "c.in")
    nodes += _full_copy_scratch(d_graph, sc, "ds.", "dm.")

    q_out_main = "qm." + q_graph.output_id
    q_out_scr = "qs." + q_graph.output_id
    d_out_scr = "ds." + d_graph.output_id

    # running product over digits, as in the f1 wrapper
    u1_cases = [
        (
            prod(ind_eq(nm("w0"), float(sc.period - 2)), sc.in_initial_phase()),
            node(q_out_main),
        ),
        (
            prod(sc.at_string_start_next(), ind_ge(nm("vc"), float(i0_star))),
            const(1.0),
        ),
        (
            prod(ind_eq(nm("w"), float(tau - 2)), ind_ge(nm("vc"), float(i0_star + 1))),
            prod(node("u1"), node(q_out_scr)),
        ),
    ]
    nodes.append(NodeSpec("u1", 1.0, case_select(u1_cases, node("u1"))))
    nodes.append(NodeSpec("u2", 1.0, exp_binary(-alpha, d_out_scr)))

    g, _ = build_g(k, i0_star, tau, base, prefix="g.")
    nodes += list(g.nodes)
    v1, v2 = g.meta["pair"]
    nodes += _combiner_nodes(sc, "u1", "u2", v1, v2, i0_star)

    hidden = (
        scaffold_hidden(sc)
        + ["qm." + n.name for n in q_graph.nodes if n.name != q_graph.input_ids[0]]
        + ["dm." + n.name for n in d_graph.nodes if n.name != d_graph.input_ids[0]]
        + list(g.hidden_ids)
    )
    graph = RnnGraph(
        nodes=nodes,
        input_ids=("c.in",) + g.input_ids,
        output_id="out",
        hidden_ids=tuple(hidden),
        rnn_time=sc.period,
        meta={
            "kind": "boosted_simple",
            "schedule": "multiples",
            "k": k,
            "tau": tau,
            "base": base,
            "i0_star": i0_star,
            "alpha": alpha,
            "depth_bound": 20,
        },
    )
    expect = 2 * q_graph.size + 2 * d_graph.size + 5 * k + 16
    if graph.size != expect:
        raise ValidationError(
            f"simple-construction accounting broken: {graph.size} != {expect}"
        )
    return graph
