"""Synchronous execution of circuit graphs.

All non-input nodes update simultaneously from the previous step's
values; input nodes are overwritten from the stream, whose pointer
advances every ``rnn_time`` steps.  Time is 1-based: the state at t = 1
is the initial values with the first token applied, matching the
counter conventions of the constructions.

Expressions are compiled once into a flat tape evaluated with numpy, so
a run can carry a whole batch of streams at once (used to sweep every
document of Sigma^n in one pass).  Optional fixed-point mode quantizes
every node value after every update and counts saturation events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ReciprocalZeroError, ValidationError
from .expr import Const, Node, Prod, Recip, Relu
from .graph import RnnGraph


@dataclass
class ExecutionTrace:
    """Per-step values of every node, plus the input pointer trajectory."""

    graph: RnnGraph
    values: np.ndarray  # shape (T, num_nodes, batch)
    input_index: np.ndarray  # shape (T,), 1-based token index per step
    node_index: dict[str, int]
    saturation_events: int = 0

    @property
    def total_steps(self) -> int:
        return self.values.shape[0]

    def value(self, name: str, t: int) -> np.ndarray:
        """Value(s) of a node at 1-based time t (batch vector)."""
        return self.values[t - 1, self.node_index[name]]

    def scalar(self, name: str, t: int) -> float:
        v = self.value(name, t)
        if v.size != 1:
            raise ValidationError("scalar() on a batched trace; use value()")
        return float(v[0])

    def output_at_multiples(self) -> dict[int, np.ndarray]:
        """Output node at times i * rnn_time, i = 1, 2, ..."""
        period = self.graph.rnn_time
        out = {}
        i = 1
        while i * period <= self.total_steps:
            out[i] = self.value(self.graph.output_id, i * period)
            i += 1
        return out


# -- tape compilation --------------------------------------------------------

_CONST, _NODE, _RELU, _RECIP, _PROD = range(5)


@dataclass
class Program:
    graph: RnnGraph
    tape: list
    num_slots: int
    node_index: dict[str, int]
    node_slot: dict[str, int]  # root slot of each non-input node
    input_cols: list[int]
    reset_cols: list[int]
    checks: list[tuple[int, str, frozenset]]

    def new_state(self, batch: int) -> np.ndarray:
        state = np.empty((len(self.graph.nodes), batch))
        for j, spec in enumerate(self.graph.nodes):
            state[j] = spec.init
        return state


def compile_graph(graph: RnnGraph) -> Program:
    node_index = {n.name: j for j, n in enumerate(graph.nodes)}
    tape: list = []
    num_slots = 0

    def emit(entry) -> int:
        nonlocal num_slots
        tape.append(entry)
        num_slots += 1
        return num_slots - 1

    cache: dict = {}

    def lower(expr) -> int:
        # structural key: identical subtrees (shared conditions, mirrored
        # lookups) collapse to one tape slot
        key = expr
        if key in cache:
            return cache[key]
        if isinstance(expr, Const):
            slot = emit((_CONST, expr.value))
        elif isinstance(expr, Node):
            slot = emit((_NODE, node_index[expr.name]))
        elif isinstance(expr, Relu):
            parts = tuple((c, lower(e)) for c, e in expr.terms)
            slot = emit((_RELU, expr.bias, parts))
        elif isinstance(expr, Recip):
            parts = tuple((c, lower(e)) for c, e in expr.terms)
            slot = emit((_RECIP, expr.bias, parts))
        elif isinstance(expr, Prod):
            parts = tuple(lower(f) for f in expr.factors)
            slot = emit((_PROD, parts))
        else:
            raise ValidationError(f"unknown expression {expr!r}")
        cache[key] = slot
        return slot

    node_slot = {}
    for spec in graph.nodes:
        if spec.expr is not None:
            node_slot[spec.name] = lower(spec.expr)

    checks = [
        (node_index[name], name, frozenset(values))
        for name, values in graph.meta.get("domain_checks", [])
    ]
    return Program(
        graph=graph,
        tape=tape,
        num_slots=num_slots,
        node_index=node_index,
        node_slot=node_slot,
        input_cols=[node_index[n] for n in graph.input_ids],
        reset_cols=[node_index[n] for n in graph.meta.get("reset_on_advance", [])],
        checks=checks,
    )


def _wsum(entry, slots, batch: int):
    bias, parts = entry[1], entry[2]
    if not parts:
        return np.full(batch, bias)
    coef, src = parts[0]
    acc = slots[src] * coef
    for coef, src in parts[1:]:
        if coef == 1.0:
            acc += slots[src]
        else:
            acc += coef * slots[src]
    if bias != 0.0:
        acc += bias
    return acc


def _exec_tape(prog: Program, old: np.ndarray, slots: list, t: int) -> None:
    batch = old.shape[1]
    for dst, entry in enumerate(prog.tape):
        op = entry[0]
        if op is _NODE:
            slots[dst] = old[entry[1]]
        elif op is _RELU:
            acc = _wsum(entry, slots, batch)
            np.maximum(acc, 0.0, out=acc)
            slots[dst] = acc
        elif op is _PROD:
            srcs = entry[1]
            acc = slots[srcs[0]] * slots[srcs[1]]
            for src in srcs[2:]:
                acc *= slots[src]
            slots[dst] = acc
        elif op is _RECIP:
            acc = _wsum(entry, slots, batch)
            if (acc == 0.0).any():
                raise ReciprocalZeroError(_slot_owner(prog, dst), t)
            slots[dst] = 1.0 / acc
        else:  # _CONST
            slots[dst] = np.full(batch, entry[1])


def _slot_owner(prog: Program, slot: int) -> str:
    for name, root in prog.node_slot.items():
        if root >= slot:
            return name
    return "?"


def quantize_array(
    x: np.ndarray, integer_bits: int, fraction_bits: int
) -> tuple[np.ndarray, int]:
    """Signed fixed-point snap: floor the fraction, saturate the integer.

    Magnitudes are quantized and the sign reapplied.  Returns the snapped
    array and the number of integer saturation events.
    """
    sign = np.sign(x)
    mag = np.abs(x)
    ipart = np.floor(mag)
    frac = mag - ipart
    cap = float(2**integer_bits)
    saturated = int((ipart > cap).sum())
    scale = float(2**fraction_bits)
    snapped = np.minimum(ipart, cap) + np.floor(frac * scale) / scale
    return sign * snapped, saturated


def run(
    graph: RnnGraph,
    stream,
    total_steps: int | None = None,
    fixed_point: tuple[int, int] | None = None,
    program: Program | None = None,
) -> ExecutionTrace:
    """Run the graph on a token stream (optionally a batch of streams).

    ``stream`` has shape (n_tokens,) or (n_tokens, batch); every input
    node receives the current token.  ``fixed_point`` = (integer_bits,
    fraction_bits) quantizes every node value after every update.
    """
    prog = program if program is not None else compile_graph(graph)
    arr = np.asarray(stream, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    n_tokens, batch = arr.shape
    if n_tokens < 1:
        raise ValidationError("empty input stream")
    period = graph.rnn_time
    T = total_steps if total_steps is not None else n_tokens * period
    if T > n_tokens * period:
        raise ValidationError(
            f"total_steps {T} exceeds stream capacity {n_tokens * period}"
        )

    values = np.empty((T, len(graph.nodes), batch))
    input_index = np.empty(T, dtype=np.int64)
    slots: list = [None] * prog.num_slots
    saturation = 0

    state = prog.new_state(batch)
    tok = arr[0]
    for col in prog.input_cols:
        state[col] = tok
    if fixed_point is not None:
        state, sat = quantize_array(state, *fixed_point)
        saturation += sat
    _run_checks(prog, state, 1)
    values[0] = state
    input_index[0] = 1

    for t in range(2, T + 1):
        idx = (t - 1) // period + 1  # 1-based token index at time t
        if idx > n_tokens:
            idx = n_tokens
        _exec_tape(prog, state, slots, t)
        new = state.copy()
        for name, root in prog.node_slot.items():
            new[prog.node_index[name]] = slots[root]
        if idx != input_index[t - 2] and prog.reset_cols:
            for col in prog.reset_cols:
                new[col] = 0.0
        tok = arr[idx - 1]
        for col in prog.input_cols:
            new[col] = tok
        if fixed_point is not None:
            new, sat = quantize_array(new, *fixed_point)
            saturation += sat
        _run_checks(prog, new, t)
        values[t - 1] = new
        input_index[t - 1] = idx
        state = new

    return ExecutionTrace(
        graph=graph,
        values=values,
        input_index=input_index,
        node_index=dict(prog.node_index),
        saturation_events=saturation,
    )


def _run_checks(prog: Program, state: np.ndarray, t: int) -> None:
    for col, name, allowed in prog.checks:
        vals = state[col]
        for v in np.unique(vals):
            if float(v) not in allowed:
                raise ValidationError(
                    f"node {name!r} emitted {float(v)} at t={t}, "
                    f"allowed values {sorted(allowed)}"
                )


def step(graph: RnnGraph, state: dict[str, float], current_input: float) -> dict:
    """One synchronous update from a named state (single-step primitive)."""
    prog = compile_graph(graph)
    old = np.array([[state[n.name]] for n in graph.nodes])
    slots: list = [None] * prog.num_slots
    _exec_tape(prog, old, slots, 0)
    new = {}
    for spec in graph.nodes:
        if spec.name in graph.input_ids:
            new[spec.name] = float(current_input)
        else:
            new[spec.name] = float(slots[prog.node_slot[spec.name]][0])
    return new
