"""Recurrent circuit graphs: nodes, transition expressions, hidden sets.

A graph is a list of named nodes with initial values; non-input nodes
carry a transition expression over their incoming neighbors' previous
values.  Hidden nodes may read only input and hidden nodes, and the
declared output schedule travels with the graph in ``meta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ValidationError
from .expr import Expr, depth, free_nodes

DEFAULT_DEPTH_BOUND = 24


@dataclass(frozen=True)
class NodeSpec:
    name: str
    init: float
    expr: Expr | None  # None exactly for input nodes


@dataclass
class RnnGraph:
    """Tuple of Def.-2 data: graph, inputs, output, transitions, time, hidden.

    ``meta`` carries the output schedule and construction parameters;
    recognized keys include ``schedule`` ("multiples" means the output is
    read at integer multiples of ``rnn_time``), ``reset_on_advance``
    (node names zeroed whenever the input pointer advances), and
    ``domain_checks`` (runtime value-set assertions).
    """

    nodes: list[NodeSpec]
    input_ids: tuple[str, ...]
    output_id: str
    hidden_ids: tuple[str, ...]
    rnn_time: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.input_ids = tuple(self.input_ids)
        self.hidden_ids = tuple(self.hidden_ids)
        self.validate()

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def hidden_size(self) -> int:
        return len(self.hidden_ids)

    def node_map(self) -> dict[str, NodeSpec]:
        return {n.name: n for n in self.nodes}

    def validate(self) -> None:
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            dup = sorted({x for x in names if names.count(x) > 1})
            raise ValidationError(f"duplicate node names {dup}")
        name_set = set(names)
        inputs = set(self.input_ids)
        hidden = set(self.hidden_ids)
        if not inputs <= name_set:
            raise ValidationError(f"unknown input nodes {inputs - name_set}")
        if not hidden <= name_set:
            raise ValidationError(f"unknown hidden nodes {hidden - name_set}")
        if self.output_id not in name_set:
            raise ValidationError(f"unknown output node {self.output_id!r}")
        if inputs & hidden:
            raise ValidationError("input nodes cannot be hidden nodes")
        if self.rnn_time < 1:
            raise ValidationError(f"rnn_time must be >= 1, got {self.rnn_time}")
        bound = self.meta.get("depth_bound", DEFAULT_DEPTH_BOUND)
        for n in self.nodes:
            if n.name in inputs:
                if n.expr is not None:
                    raise ValidationError(f"input node {n.name!r} has an expression")
                continue
            if n.expr is None:
                raise ValidationError(f"non-input node {n.name!r} lacks an expression")
            refs = free_nodes(n.expr)
            missing = refs - name_set
            if missing:
                raise ValidationError(
                    f"node {n.name!r} reads unknown nodes {sorted(missing)}"
                )
            if depth(n.expr) > bound:
                raise ValidationError(
                    f"node {n.name!r} expression depth {depth(n.expr)} exceeds "
                    f"declared bound {bound}"
                )
            if n.name in hidden:
                illegal = refs - inputs - hidden
                if illegal:
                    raise ValidationError(
                        f"hidden node {n.name!r} reads non-hidden, non-input "
                        f"nodes {sorted(illegal)}"
                    )

    def with_meta(self, **extra) -> "RnnGraph":
        meta = dict(self.meta)
        meta.update(extra)
        return RnnGraph(
            nodes=list(self.nodes),
            input_ids=self.input_ids,
            output_id=self.output_id,
            hidden_ids=self.hidden_ids,
            rnn_time=self.rnn_time,
            meta=meta,
        )

    def edges(self) -> set[tuple[str, str]]:
        out = set()
        for n in self.nodes:
            if n.expr is None:
                continue
            for src in free_nodes(n.expr):
                out.add((src, n.name))
        return out
