"""The brute-force oracle suite behind the `verify` subcommand.

Each check pits a production code path against an independent
computation (enumeration, cross-construction, closed form) on small
seeded instances and returns one pass/fail row.  The CLI collates the
rows into a matrix; tests reuse the same checks.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import product

import numpy as np

from .boosting import boost_text
from .construct import (
    build_boosted_rnn,
    build_boosted_rnn_simple,
    distinguisher_to_rnn,
    lm_to_rnn,
)
from .dist import (
    Alphabet,
    entropy,
    kl,
    lm_to_text,
    next_token_loss,
    text_to_lm,
)
from .distinguishers import (
    advantage,
    max_window_predicate_advantage,
    offset_decomposition,
    pinsker_bound,
)
from .families import one_prefix_table_family
from .fixedpoint import (
    FixedPointFormat,
    build_boosted_rnn_quantized,
    fraction_error_bound,
    minimal_fraction_bits,
    product_error_bound,
    quantized_run,
)
from .instances import (
    dyadic_lm,
    random_prefix_window_distinguisher,
    random_text,
    rng_for,
)
from .rnn.engine import run
from .rnn.expr import evaluate
from .rnn.sufficiency import verify_hidden_sufficiency
from .rnn.transitions import build_transition
from .selfboost import run_algorithm

B2 = Alphabet(2)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str

    def __post_init__(self):
        self.ok = bool(self.ok)


def _check(name):
    def wrap(fn):
        fn.check_name = name
        return fn

    return wrap


@_check("round-trip: text <-> next-token model")
def check_round_trip() -> CheckResult:
    rng = rng_for(1001)
    worst = 0.0
    for n in (2, 3, 4):
        t = random_text(B2, n, rng)
        back = lm_to_text(text_to_lm(t))
        worst = max(worst, float(np.max(np.abs(back.probs - t.probs))))
    return CheckResult("round_trip", worst < 1e-10, f"worst gap {worst:.2e}")


@_check("identity: n*loss - KL = entropy")
def check_loss_kl_identity() -> CheckResult:
    rng = rng_for(1009)
    worst = 0.0
    for n in (2, 3, 4, 5):
        p = random_text(B2, n, rng)
        q = text_to_lm(random_text(B2, n, rng))
        gap = abs(n * next_token_loss(p, q) - kl(p, lm_to_text(q)) - entropy(p))
        worst = max(worst, gap)
    return CheckResult("loss_kl_identity", worst < 1e-9, f"worst gap {worst:.2e}")


@_check("advantage bounded by sqrt(k/2n KL) over all window predicates")
def check_pinsker() -> CheckResult:
    rng = rng_for(1013)
    margin = float("inf")
    for k in (1, 2):
        for _ in range(5):
            p = random_text(B2, 4, rng)
            q = random_text(B2, 4, rng)
            bound = pinsker_bound(p, q, k)
            best = max_window_predicate_advantage(p, q, k)
            margin = min(margin, bound - best)
    return CheckResult("pinsker_bound", margin >= -1e-12, f"min margin {margin:.2e}")


@_check("boosting drops KL by alpha^2 n / 4k")
def check_boost_drop() -> CheckResult:
    rng = rng_for(1019)
    worst = float("inf")
    for n, k in [(3, 1), (4, 2), (5, 3), (6, 2)]:
        p = random_text(B2, n, rng)
        q = random_text(B2, n, rng)
        d = random_prefix_window_distinguisher(B2, n, k, rng)
        res = boost_text(p, q, d)
        slack = (res.kl_before - res.guaranteed_drop) - res.kl_after
        worst = min(worst, slack)
    return CheckResult("boost_drop", worst >= -1e-9, f"min slack {worst:.2e}")


@_check("next-token form reconstructs the boosted table")
def check_eq5_consistency() -> CheckResult:
    rng = rng_for(1021)
    worst = 0.0
    for n, k in [(4, 2), (5, 2), (4, 3)]:
        p = random_text(B2, n, rng)
        q = random_text(B2, n, rng)
        d = random_prefix_window_distinguisher(B2, n, k, rng)
        res = boost_text(p, q, d)
        rebuilt = lm_to_text(res.lm_boosted)
        worst = max(worst, float(np.max(np.abs(rebuilt.probs - res.q_boosted.probs))))
    return CheckResult("eq5_consistency", worst < 1e-9, f"worst gap {worst:.2e}")


@_check("offset decomposition reconstructs the advantage")
def check_offset_reconstruction() -> CheckResult:
    rng = rng_for(1031)
    worst = 0.0
    for _ in range(5):
        p = random_text(B2, 5, rng)
        q = random_text(B2, 5, rng)
        d = random_prefix_window_distinguisher(B2, 5, 2, rng)
        rep = offset_decomposition(d, p, q)
        recon = sum(w * a for _, w, a in rep.offsets) / 5
        worst = max(worst, abs(recon - advantage(d, p, q)))
    return CheckResult("offset_reconstruction", worst < 1e-10, f"worst {worst:.2e}")


def _compiled_instance(seed, n, k):
    rng = rng_for(seed)
    p = random_text(B2, n, rng)
    qt = random_text(B2, n, rng)
    d = random_prefix_window_distinguisher(B2, n, k, rng)
    res = boost_text(p, qt, d)
    q = lm_to_rnn(text_to_lm(qt), 2)
    D = distinguisher_to_rnn(res.applied, B2, 2)
    return p, qt, res, q, D


@_check("compiled boosted circuit matches the analytic conditionals")
def check_compiled_boost() -> CheckResult:
    p, qt, res, q, D = _compiled_instance(1033, 4, 2)
    Qp, report = build_boosted_rnn(q, D, 2, res.alpha, res.offset, 2)
    docs = np.array(list(product(range(2), repeat=4))).T
    outs = run(Qp, docs).output_at_multiples()
    worst = 0.0
    for col in range(docs.shape[1]):
        doc = tuple(int(x) for x in docs.T[col])
        for i in range(1, 5):
            want = res.lm_boosted.prob(doc[i - 1], doc[: i - 1])
            worst = max(worst, abs(float(outs[i][col]) - want))
    ok = worst < 1e-9 and report.built_size == report.formula_size
    return CheckResult("compiled_boost", ok, f"worst gap {worst:.2e}")


@_check("doubling construction is trace-equivalent to the efficient one")
def check_cross_construction() -> CheckResult:
    p, qt, res, q, D = _compiled_instance(1039, 4, 2)
    Qp, _ = build_boosted_rnn(q, D, 2, res.alpha, res.offset, 2)
    Qs = build_boosted_rnn_simple(q, D, 2, res.alpha, res.offset, 2)
    docs = np.array(list(product(range(2), repeat=4))).T
    a = run(Qp, docs).output_at_multiples()
    b = run(Qs, docs).output_at_multiples()
    worst = max(float(np.max(np.abs(a[i] - b[i]))) for i in range(1, 5))
    return CheckResult("cross_construction", worst < 1e-12, f"worst gap {worst:.2e}")


@_check("transition library matches the mathematical definitions")
def check_transition_library() -> CheckResult:
    bad = 0
    for c in range(-2, 8):
        eq = build_transition("indicator_eq", x="x", c=float(c))
        for x in range(-4, 12):
            bad += evaluate(eq, {"x": float(x)}) != float(x == c)
    exprs = build_transition("base_c_increment", c=3, k=3, digits=["a", "b", "c"])
    val = [0, 0, 0]
    for step in range(29):
        want = (step + 1) % 27
        val = [
            int(evaluate(e, {"a": val[0], "b": val[1], "c": val[2]})) for e in exprs
        ]
        bad += (val[0] + 3 * val[1] + 9 * val[2]) != want
    e = build_transition("exp_binary", alpha=0.4, x="x")
    bad += evaluate(e, {"x": 0.0}) != 1.0
    bad += evaluate(e, {"x": 1.0}) != math.exp(0.4)
    return CheckResult("transition_library", bad == 0, f"{bad} mismatches")


@_check("hidden sufficiency scrubbing on constructed circuits")
def check_hidden_sufficiency() -> CheckResult:
    p, qt, res, q, D = _compiled_instance(1049, 4, 2)
    Qp, _ = build_boosted_rnn(q, D, 2, res.alpha, res.offset, 2)
    rng = rng_for(1051)
    rep = verify_hidden_sufficiency(Qp, trials=5, rng=rng)
    detail = "ok" if rep.ok else str(rep.first_failure())
    return CheckResult("hidden_sufficiency", rep.ok, detail)


@_check("quantized boosted circuit stays within its error envelope")
def check_quantized_boost() -> CheckResult:
    rng = rng_for(1061)
    n, k, ell = 4, 1, 1 / 8
    p = random_text(B2, n, rng)
    lm = dyadic_lm(B2, n, rng, frac_bits=14, min_conditional=ell)
    qt = lm_to_text(lm)
    d = random_prefix_window_distinguisher(B2, n, k, rng)
    res = boost_text(p, qt, d)
    if res.alpha == 0:
        return CheckResult("quantized_boost", True, "degenerate draw, skipped")
    q = lm_to_rnn(lm, 2)
    D = distinguisher_to_rnn(res.applied, B2, 2)
    bf = max(minimal_fraction_bits(k, res.alpha, ell), 14)
    out = build_boosted_rnn_quantized(
        q, D, k, res.alpha, res.offset, 2,
        FixedPointFormat(20, bf), FixedPointFormat(2, 8), ell,
    )
    docs = np.array(list(product(range(2), repeat=n))).T
    tq = quantized_run(out.graph, out.format, docs)
    tx = run(out.graph, docs)
    worst = 0.0
    low = 1.0
    for i in range(1, n + 1):
        t = i * out.graph.rnn_time
        worst = max(worst, float(np.max(np.abs(tq.value("out", t) - tx.value("out", t)))))
        low = min(low, float(np.min(tq.value("out", t))))
    ok = (
        worst <= out.max_output_error
        and low >= out.prob_lower_bound
        and tq.saturation_events == 0
    )
    return CheckResult(
        "quantized_boost", ok, f"err {worst:.2e} <= {out.max_output_error:.2e}, "
        f"min cond {low:.4f}"
    )


@_check("error-propagation bounds survive fuzzing")
def check_error_bounds() -> CheckResult:
    rng = rng_for(1063)
    bad = 0
    for _ in range(2000):
        m = int(rng.integers(1, 8))
        delta = float(rng.uniform(1e-6, 0.999 / m))
        x = rng.uniform(0, 1, size=m)
        y = np.clip(x + rng.uniform(-delta, delta, size=m), 0, 1)
        bad += abs(np.prod(x) - np.prod(y)) > product_error_bound(m, delta) + 1e-15
    for _ in range(2000):
        y = float(rng.uniform(0.05, 1.0))
        x = float(rng.uniform(0.01, y))
        ell = float(rng.uniform(0.01, y))
        delta = float(rng.uniform(1e-6, ell * 0.999))
        bad += (x + delta) / (y - delta) > fraction_error_bound(x, y, delta, ell) + 1e-12
    return CheckResult("error_bounds", bad == 0, f"{bad} violations")


@_check("self-boosting loop certifies family indistinguishability")
def check_selfboost_loop() -> CheckResult:
    rng = rng_for(1069)
    p = random_text(B2, 4, rng)
    fam = one_prefix_table_family(B2, 4, 1)
    model, trace = run_algorithm(
        "plain", p, fam, 0.3, 1, 3, 7, random.Random(17)
    )
    ok = (
        trace.termination == "loss_plateau"
        and trace.final_advantage <= 0.3 + 1e-9
        and all(
            a.loss >= b.loss - 1e-12
            for a, b in zip(trace.rounds, trace.rounds[1:])
        )
    )
    return CheckResult(
        "selfboost_loop", ok,
        f"rounds {len(trace.rounds)}, final adv {trace.final_advantage:.3f}",
    )


ALL_CHECKS = [
    check_round_trip,
    check_loss_kl_identity,
    check_pinsker,
    check_boost_drop,
    check_eq5_consistency,
    check_offset_reconstruction,
    check_compiled_boost,
    check_cross_construction,
    check_transition_library,
    check_hidden_sufficiency,
    check_quantized_boost,
    check_error_bounds,
    check_selfboost_loop,
]


def run_all(checks=None) -> list[CheckResult]:
    out = []
    for fn in checks or ALL_CHECKS:
        try:
            out.append(fn())
        except Exception as e:  # a crashed oracle is a failed check
            out.append(CheckResult(fn.check_name, False, f"crashed: {e!r}"))
    return out
