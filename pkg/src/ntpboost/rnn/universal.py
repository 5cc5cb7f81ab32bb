"""Universal graph covering all circuits under size/hidden/time constraints.

One input node, a fully connected hidden block of H nodes (reading input
and each other, self-loops included), and a stateless block R whose nodes
read everything in H and R but are reset to zero whenever a new input
token arrives.  Any circuit respecting those wiring rules embeds by
zeroing out unused connections.
"""

from __future__ import annotations

from ..errors import PreconditionError, ValidationError
from .expr import relu, substitute
from .graph import NodeSpec, RnnGraph


def universal_edges(n_total: int, h_size: int) -> set[tuple[str, str]]:
    """Directed edges allowed by the four construction rules."""
    hidden = [f"h{j}" for j in range(1, h_size + 1)]
    stateless = [f"r{j}" for j in range(1, n_total - h_size)]
    edges = set()
    for a in hidden:
        for b in hidden:
            edges.add((a, b))  # pairs within H, self-loops included
    for b in hidden:
        edges.add(("in", b))
    for a in hidden + stateless:
        for b in stateless:
            edges.add((a, b))
    return edges


def universal_graph(n_total: int, h_size: int, rnn_time: int = 1) -> RnnGraph:
    """Blank universal graph of ``n_total`` nodes with ``h_size`` hidden.

    All transitions start as relu of the all-zero weighted sum over the
    allowed incoming edges; ``embed`` installs a concrete circuit.
    """
    if h_size < 1 or h_size >= n_total:
        raise PreconditionError(
            f"need 1 <= hidden < total, got hidden={h_size}, total={n_total}"
        )
    hidden = [f"h{j}" for j in range(1, h_size + 1)]
    stateless = [f"r{j}" for j in range(1, n_total - h_size)]
    nodes = [NodeSpec("in", 0.0, None)]
    h_sources = ["in"] + hidden
    for name in hidden:
        nodes.append(NodeSpec(name, 0.0, relu(0.0, *[(0.0, s) for s in h_sources])))
    r_sources = hidden + stateless
    for name in stateless:
        nodes.append(NodeSpec(name, 0.0, relu(0.0, *[(0.0, s) for s in r_sources])))
    output = stateless[-1] if stateless else hidden[-1]
    return RnnGraph(
        nodes=nodes,
        input_ids=("in",),
        output_id=output,
        hidden_ids=tuple(hidden),
        rnn_time=rnn_time,
        meta={
            "kind": "universal",
            "schedule": "multiples",
            "reset_on_advance": list(stateless),
        },
    )


def embed(universal: RnnGraph, small: RnnGraph, mapping: dict[str, str]) -> RnnGraph:
    """Install ``small`` into the universal graph via a node mapping.

    Every edge of the small graph must map into an allowed universal
    edge; unmapped universal nodes keep their zero-weight transitions.
    """
    if len(small.input_ids) != 1:
        raise ValidationError("embedding expects a single-input circuit")
    uni_names = {n.name for n in universal.nodes}
    if set(mapping.values()) - uni_names:
        raise ValidationError("mapping targets unknown universal nodes")
    if mapping[small.input_ids[0]] != "in":
        raise ValidationError("the small input node must map to 'in'")
    h_size = universal.hidden_size
    n_total = universal.size
    allowed = universal_edges(n_total, h_size)
    small_hidden = set(small.hidden_ids)
    for name in small_hidden:
        if not mapping[name].startswith("h"):
            raise ValidationError(f"hidden node {name!r} must map into the H block")
    for src, dst in small.edges():
        edge = (mapping[src], mapping[dst])
        if edge not in allowed:
            raise ValidationError(f"edge {src}->{dst} maps to illegal {edge}")

    by_name = {n.name: n for n in universal.nodes}
    inits = {n.name: n.init for n in universal.nodes}
    exprs = {}
    for spec in small.nodes:
        tgt = mapping[spec.name]
        inits[tgt] = spec.init
        if spec.expr is not None:
            exprs[tgt] = substitute(spec.expr, mapping)
    nodes = []
    for spec in universal.nodes:
        if spec.name in exprs:
            nodes.append(NodeSpec(spec.name, inits[spec.name], exprs[spec.name]))
        else:
            nodes.append(NodeSpec(spec.name, inits[spec.name], spec.expr))
    meta = dict(universal.meta)
    # embedded stateless nodes keep the reset rule only if the small
    # circuit recomputes them within each token window, which Def.-2
    # style readouts do; drop resets for mapped nodes that must persist.
    return RnnGraph(
        nodes=nodes,
        input_ids=universal.input_ids,
        output_id=mapping.get(small.output_id, universal.output_id),
        hidden_ids=universal.hidden_ids,
        rnn_time=small.rnn_time,
        meta=meta,
    )
