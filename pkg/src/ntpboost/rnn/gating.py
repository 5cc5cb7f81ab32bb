"""Gated state updates: LOAD / RUN / HOLD control of a node set.

Augments a graph with a controller whose output selects, per step, how
each targeted node updates: 0 copies from an external source, 1 runs the
node's original transition, 2 holds the previous value.  Targeted nodes
are rewritten in place, so the augmented computation size is |Q| + |C|;
stream-fed external sources become extra input nodes, counted apart.
"""

from __future__ import annotations

from ..errors import ValidationError
from .expr import case_select, ind_eq, node, substitute
from .graph import NodeSpec, RnnGraph

LOAD, RUN, HOLD = 0, 1, 2


def gated_augment(
    graph: RnnGraph,
    target_set: list[str],
    controller: RnnGraph,
    external_source: dict[str, str] | None = None,
    controller_prefix: str = "ctl.",
) -> RnnGraph:
    """Mirror ``target_set`` under the controller's LOAD/RUN/HOLD signal.

    ``external_source`` maps each target to the node supplying its LOAD
    value; unmapped targets read a fresh input node ``ext.<target>`` fed
    from the stream.  Controller nodes are namespaced under
    ``controller_prefix``; its input nodes join the input set directly
    and read the same stream as the original graph.
    """
    targets = list(target_set)
    known = {n.name for n in graph.nodes}
    missing = set(targets) - known
    if missing:
        raise ValidationError(f"unknown gated targets {sorted(missing)}")
    for t in targets:
        if t in graph.input_ids:
            raise ValidationError(f"cannot gate input node {t!r}")

    ctl_map = {
        n.name: (n.name if n.name in controller.input_ids else controller_prefix + n.name)
        for n in controller.nodes
    }
    # controller input nodes may coincide with the graph's (shared stream)
    collisions = {
        renamed
        for orig, renamed in ctl_map.items()
        if orig not in controller.input_ids
    } & known
    if collisions:
        raise ValidationError(f"controller names collide: {sorted(collisions)}")
    ctl_out = ctl_map[controller.output_id]

    external_source = dict(external_source or {})
    new_inputs = list(graph.input_ids)
    extra_inputs: list[NodeSpec] = []
    for t in targets:
        if t not in external_source:
            src = "ext." + t
            external_source[t] = src
            extra_inputs.append(NodeSpec(src, 0.0, None))
            new_inputs.append(src)

    nodes: list[NodeSpec] = []
    for spec in graph.nodes:
        if spec.name not in targets:
            nodes.append(spec)
            continue
        src = external_source[spec.name]
        nodes.append(
            NodeSpec(
                spec.name,
                spec.init,
                case_select(
                    [
                        (ind_eq(ctl_out, LOAD), node(src)),
                        (ind_eq(ctl_out, RUN), spec.expr),
                    ],
                    node(spec.name),
                ),
            )
        )
    nodes.extend(extra_inputs)
    for spec in controller.nodes:
        renamed = ctl_map[spec.name]
        if spec.name in controller.input_ids:
            if renamed not in {n.name for n in nodes}:
                nodes.append(NodeSpec(renamed, spec.init, None))
                new_inputs.append(renamed)
            continue
        nodes.append(NodeSpec(renamed, spec.init, substitute(spec.expr, ctl_map)))

    source_names = {n.name for n in nodes}
    for t, src in external_source.items():
        if src not in source_names:
            raise ValidationError(f"external source {src!r} for {t!r} is not a node")

    meta = dict(graph.meta)
    checks = list(meta.get("domain_checks", []))
    checks.append((ctl_out, (0.0, 1.0, 2.0)))
    meta["domain_checks"] = checks
    meta["gated_targets"] = targets
    return RnnGraph(
        nodes=nodes,
        input_ids=tuple(new_inputs),
        output_id=graph.output_id,
        hidden_ids=graph.hidden_ids,
        rnn_time=graph.rnn_time,
        meta=meta,
    )
