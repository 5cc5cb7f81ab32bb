"""Scrubbing harness for the hidden-node-set sufficiency property.

Run a graph normally, stop at a scheduled output time, overwrite every
non-hidden non-input node with random garbage, resume with the same
remaining stream, and demand that all later scheduled outputs match the
undisturbed run.  If they do for many random streams and scrub points,
the declared hidden set really does carry all state the outputs need.

Trials are batched: one baseline run carries every trial stream, and
resumed runs are grouped by scrub time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Program, _exec_tape, compile_graph
from .graph import RnnGraph


@dataclass
class SufficiencyReport:
    ok: bool
    trials: int
    failures: list = field(default_factory=list)

    def first_failure(self):
        return self.failures[0] if self.failures else None


def _run_states(
    prog: Program, stream: np.ndarray, start_state: np.ndarray, t0: int, t1: int
) -> np.ndarray:
    """States at times t0..t1 given the state at t0; stream is (n, batch)."""
    graph = prog.graph
    period = graph.rnn_time
    n_tokens = stream.shape[0]
    out = np.empty((t1 - t0 + 1,) + start_state.shape)
    out[0] = start_state
    state = start_state
    slots: list = [None] * prog.num_slots
    prev_idx = min((t0 - 1) // period + 1, n_tokens)
    for t in range(t0 + 1, t1 + 1):
        idx = min((t - 1) // period + 1, n_tokens)
        _exec_tape(prog, state, slots, t)
        new = state.copy()
        for name, root in prog.node_slot.items():
            new[prog.node_index[name]] = slots[root]
        if idx != prev_idx and prog.reset_cols:
            for col in prog.reset_cols:
                new[col] = 0.0
        tok = stream[idx - 1]
        for col in prog.input_cols:
            new[col] = tok
        out[t - t0] = new
        state = new
        prev_idx = idx
    return out


def verify_hidden_sufficiency(
    graph: RnnGraph,
    trials: int,
    rng: np.random.Generator,
    n_tokens: int = 4,
    token_values: tuple[int, ...] = (0, 1),
    atol: float = 1e-12,
) -> SufficiencyReport:
    """Scrubbing check over random streams and scrub points."""
    prog = compile_graph(graph)
    period = graph.rnn_time
    keep = set(graph.hidden_ids) | set(graph.input_ids)
    scrub_rows = [j for j, n in enumerate(graph.nodes) if n.name not in keep]
    out_row = prog.node_index[graph.output_id]
    report = SufficiencyReport(ok=True, trials=trials)

    streams = rng.choice(token_values, size=(n_tokens, trials)).astype(float)
    scrub_at = rng.integers(1, n_tokens, size=trials)  # scrub at i * period
    garbage = rng.uniform(0.0, 3.0, size=(len(scrub_rows), trials))

    total = n_tokens * period
    init = prog.new_state(trials)
    for col in prog.input_cols:
        init[col] = streams[0]
    baseline = _run_states(prog, streams, init, 1, total)

    for i in sorted(set(int(v) for v in scrub_at)):
        cols = np.nonzero(scrub_at == i)[0]
        scrub_t = i * period
        scrubbed = baseline[scrub_t - 1][:, cols].copy()
        for row_pos, row in enumerate(scrub_rows):
            scrubbed[row] = garbage[row_pos, cols]
        resumed = _run_states(
            prog, streams[:, cols], scrubbed, scrub_t, total
        )
        for j in range(i + 1, n_tokens + 1):
            t = j * period
            want = baseline[t - 1][out_row, cols]
            got = resumed[t - scrub_t][out_row]
            bad = np.abs(want - got) > atol
            if bad.any():
                report.ok = False
                for c in cols[np.nonzero(bad)[0]]:
                    report.failures.append(
                        {"trial": int(c), "scrub_time": scrub_t, "diverged_at": t}
                    )
                break
    return report
