"""Compiled circuits: table lookups, synchronized enumeration, boosting.

The heavy acceptance matrices live in test_acceptance; here each layer
is exercised on a few seeded instances with exact or 1e-9 tolerances.
"""

import math
from itertools import product

import numpy as np
import pytest

from ntpboost.boosting import boost_text
from ntpboost.construct import (
    boosted_hidden_formula,
    boosted_size_formula,
    boosted_time_formula,
    build_boosted_rnn,
    build_boosted_rnn_simple,
    build_f1,
    build_f2,
    build_g,
    build_sync_enumerator,
    case1_sample_time,
    distinguisher_to_rnn,
    lm_to_rnn,
    window_sample_time,
)
from ntpboost.dist import (
    Alphabet,
    extended_block_distribution,
    text_to_lm,
    uniform_lm,
)
from ntpboost.distinguishers import anchor_of, constant_distinguisher
from ntpboost.errors import PreconditionError
from ntpboost.instances import (
    random_prefix_window_distinguisher,
    random_text,
    rng_for,
)
from ntpboost.rnn.engine import run
from ntpboost.rnn.sufficiency import verify_hidden_sufficiency

B2 = Alphabet(2)


def all_docs(n, size=2):
    return np.array(list(product(range(size), repeat=n))).T


def doc_tuple(docs, col):
    return tuple(int(x) for x in docs.T[col])


class TestCompiledTables:
    def test_lm_circuit_matches_table_exactly(self):
        rng = rng_for(501)
        t = random_text(B2, 3, rng)
        lm = text_to_lm(t)
        g = lm_to_rnn(lm, rnn_time=2)
        assert g.size == 3 + 4 and g.hidden_size == 3 + 2
        docs = all_docs(3)
        outs = run(g, docs).output_at_multiples()
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for i in range(1, 4):
                assert outs[i][col] == lm.prob(doc[i - 1], doc[: i - 1])

    def test_lm_circuit_uniform_extension(self):
        # feeding more tokens than n yields the uniform conditional
        rng = rng_for(503)
        lm = text_to_lm(random_text(B2, 2, rng))
        g = lm_to_rnn(lm, rnn_time=2)
        stream = [0, 1, 1, 0]
        tr = run(g, np.array(stream))
        for i in (3, 4):
            assert tr.scalar("out", i * 2) == 0.5

    def test_distinguisher_circuit_trailing_window(self):
        rng = rng_for(509)
        n, k = 4, 2
        d = random_prefix_window_distinguisher(B2, n, k, rng)
        g = distinguisher_to_rnn(d, B2, rnn_time=2)
        assert g.size == n + 4
        docs = all_docs(n)
        tr = run(g, docs)
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for m in range(k, n + 1):
                anchor = m - k + 1
                want = float(d.value(anchor, doc[: anchor - 1], doc[anchor - 1 : m]))
                assert tr.value("out", m * 2)[col] == want

    def test_rnn_time_floor(self):
        lm = uniform_lm(B2, 2)
        with pytest.raises(PreconditionError):
            lm_to_rnn(lm, rnn_time=1)


def symbolic_loop_position(t, period, tau, k, B):
    """(i1, mu, j1, r1, s1) per the enumerator's timing decomposition."""
    i1 = -(-t // period)
    mu = (-(-t // tau) - 1) % (B * k + k) + 1
    j1 = -(-mu // k)
    r1 = (mu - 1) % k + 1
    s1 = (t - 1) % tau + 1
    return i1, mu, j1, r1, s1


class TestCounterTraces:
    @pytest.mark.parametrize("i0_star", [0, 1])
    def test_closed_forms(self, i0_star):
        rng = rng_for(521 + i0_star)
        n, k = 4, 2
        lm = text_to_lm(random_text(B2, n, rng))
        q = lm_to_rnn(lm, 2)
        tau = q.rnn_time + 4
        U, sc = build_sync_enumerator(q, k, i0_star, tau, base=2, prefix="u.")
        B = 2**k
        stream = np.array([1, 0, 1, 1])
        tr = run(U, stream)
        strings = [tuple(s) for s in product(range(2), repeat=k)]
        for t in range(1, 4 * sc.period + 1):
            i1, mu, j1, r1, s1 = symbolic_loop_position(t, sc.period, tau, k, B)
            assert tr.scalar("u.w0", t) == (t - 1) % sc.period + 1
            assert tr.scalar("u.w", t) == s1
            # u holds the digit index of the next step
            _, _, _, r1_next, _ = symbolic_loop_position(t + 1, sc.period, tau, k, B)
            assert tr.scalar("u.u", t) == r1_next
            assert tr.scalar("u.vc", t) == min(i1, i0_star + 1)
            if i1 > i0_star:
                anchor = anchor_of(i1, i0_star, k)
            else:
                anchor = i0_star - k
            assert tr.scalar("u.u0", t) == i1 - anchor
            # the emitted digit matches the symbolic schedule
            want_ve = 0.0 if j1 == B + 1 else float(strings[j1 - 1][r1 - 1])
            assert tr.scalar("u.ve", t) == want_ve


class TestSyncEnumerator:
    @pytest.mark.parametrize("n,k,i0_star", [(4, 2, 0), (4, 2, 1), (3, 1, 0), (4, 3, 2)])
    def test_outputs_match_direct_evaluation(self, n, k, i0_star):
        rng = rng_for(541 + n + k + i0_star)
        t = random_text(B2, n, rng)
        lm = text_to_lm(t)
        q = lm_to_rnn(lm, 2)
        tau = q.rnn_time + 4
        U, sc = build_sync_enumerator(q, k, i0_star, tau, base=2, prefix="u.")
        assert U.size == q.size + q.hidden_size + 2 * k + 6
        assert U.hidden_size == q.hidden_size + 2 * k + 6

        def g_q(prefix):
            m = len(prefix)
            if m > n:
                return 0.5
            return lm.prob(prefix[-1], tuple(prefix[: m - 1]))

        strings = [tuple(s) for s in product(range(2), repeat=k)]
        docs = all_docs(n)
        tr = run(U, docs)
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for i in range(1, i0_star + 1):
                got = tr.value(U.output_id, case1_sample_time(sc, i))[col]
                assert abs(got - g_q(doc[:i])) < 1e-15
            for i in range(i0_star + 1, n + 1):
                a = anchor_of(i, i0_star, k)
                for j, z in enumerate(strings, start=1):
                    for r in range(1, k + 1):
                        got = tr.value(U.output_id, window_sample_time(sc, i, j, r))[col]
                        assert abs(got - g_q(doc[:a] + z[:r])) < 1e-15

    def test_constant_model_constant_windows(self):
        # 1-token alphabet corner is out of scope; constant conditionals
        # over a binary alphabet: every window output is the same constant
        lm = uniform_lm(B2, 3)
        q = lm_to_rnn(lm, 2)
        U, sc = build_sync_enumerator(q, 1, 0, q.rnn_time + 4, base=2, prefix="u.")
        tr = run(U, np.array([0, 1, 0]))
        for i in range(1, 4):
            for j in (1, 2):
                got = tr.scalar(U.output_id, window_sample_time(sc, i, j, 1))
                assert got == 0.5

    def test_tau_precondition(self):
        q = lm_to_rnn(uniform_lm(B2, 2), 3)
        with pytest.raises(PreconditionError):
            build_sync_enumerator(q, 1, 0, tau=4, base=2)


class TestComponents:
    def setup_instance(self, seed, n=4, k=2, i0_star=1, alpha=0.35):
        rng = rng_for(seed)
        t = random_text(B2, n, rng)
        lm = text_to_lm(t)
        d = random_prefix_window_distinguisher(B2, n, k, rng)
        q = lm_to_rnn(lm, 2)
        D = distinguisher_to_rnn(d, B2, 2)
        tau = max(q.rnn_time, D.rnn_time) + 4
        return t, lm, d, q, D, tau

    def test_f1_window_probabilities(self):
        n, k, i0_star = 4, 2, 1
        t, lm, d, q, D, tau = self.setup_instance(547)
        f1, sc = build_f1(q, k, i0_star, tau, 2)
        assert f1.size == q.size + q.hidden_size + 2 * k + 7
        strings = [tuple(s) for s in product(range(2), repeat=k)]
        docs = all_docs(n)
        tr = run(f1, docs)
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for i in range(1, i0_star + 1):
                got = tr.value(f1.output_id, i * sc.period - 1)[col]
                assert abs(got - lm.prob(doc[i - 1], doc[: i - 1])) < 1e-15
            for i in range(i0_star + 1, n + 1):
                a = anchor_of(i, i0_star, k)
                blk = extended_block_distribution(t, doc[:a], k)
                for j, z in enumerate(strings, start=1):
                    tt = (i - 1) * sc.period + j * k * tau - 1
                    widx = int("".join(map(str, z)), 2)
                    assert abs(tr.value(f1.output_id, tt)[col] - blk[widx]) < 1e-12

    def test_f1_uniform_model_quarter(self):
        lm = uniform_lm(B2, 4)
        q = lm_to_rnn(lm, 2)
        f1, sc = build_f1(q, 2, 0, q.rnn_time + 4, 2)
        tr = run(f1, np.array([0, 1, 0, 1]))
        for i in (1, 2, 3):
            for j in (1, 2, 3, 4):
                tt = (i - 1) * sc.period + j * 2 * sc.tau - 1
                assert tr.scalar(f1.output_id, tt) == 0.25

    def test_f2_exponentials(self):
        n, k, i0_star, alpha = 4, 2, 1, 0.35
        t, lm, d, q, D, tau = self.setup_instance(557)
        f2, sc = build_f2(D, k, i0_star, alpha, tau, 2)
        assert f2.size == D.size + D.hidden_size + 2 * k + 7
        strings = [tuple(s) for s in product(range(2), repeat=k)]
        docs = all_docs(n)
        tr = run(f2, docs)
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for i in range(i0_star + 1, n + 1):
                a = anchor_of(i, i0_star, k)
                kc = min(k, n - a)
                for j, z in enumerate(strings, start=1):
                    tt = (i - 1) * sc.period + j * k * tau - 1
                    want = math.exp(-alpha * d.value(a + 1, doc[:a], z[:kc]))
                    assert tr.value(f2.output_id, tt)[col] == want

    def test_f2_constant_distinguishers(self):
        alpha = 0.6
        zero = distinguisher_to_rnn(constant_distinguisher(2, 4, 0), B2, 2)
        one = distinguisher_to_rnn(constant_distinguisher(2, 4, 1), B2, 2)
        for D, want in ((zero, 1.0), (one, math.exp(-alpha))):
            f2, sc = build_f2(D, 2, 0, alpha, D.rnn_time + 4, 2)
            tr = run(f2, np.array([0, 1, 0, 1]))
            for i in (1, 2, 3, 4):
                for j in (1, 2, 3, 4):
                    tt = (i - 1) * sc.period + j * 2 * sc.tau - 1
                    assert tr.scalar(f2.output_id, tt) == want

    def test_g_indicator_sweep(self):
        n, k, i0_star = 4, 2, 1
        g, sc = build_g(k, i0_star, 6, 2)
        v1n, v2n = g.meta["pair"]
        strings = [tuple(s) for s in product(range(2), repeat=k)]
        docs = all_docs(n)
        tr = run(g, docs)
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for i in range(i0_star + 1, n + 1):
                a = anchor_of(i, i0_star, k)
                r0 = i - a
                realized = doc[a:i]
                for j, z in enumerate(strings, start=1):
                    tt = (i - 1) * sc.period + j * k * sc.tau - 1
                    assert tr.value(v1n, tt)[col] == float(z[:r0] == realized)
                    assert tr.value(v2n, tt)[col] == float(
                        z[: r0 - 1] == realized[: r0 - 1]
                    )

    def test_g_first_digit_mismatch(self):
        # first enumerated string is all zeros; a document starting the
        # block with token 1 kills g1 at r0 = 1
        g, sc = build_g(2, 0, 6, 2)
        v1n, _ = g.meta["pair"]
        tr = run(g, np.array([1, 0, 1, 0]))
        tt = 2 * sc.tau - 1  # i=1, j=1 (z = 00), r0 = 1
        assert tr.scalar(v1n, tt) == 0.0

    def test_g_r0_one_gives_g2_one(self):
        g, sc = build_g(2, 0, 6, 2)
        _, v2n = g.meta["pair"]
        tr = run(g, np.array([1, 0, 1, 0]))
        for j in (1, 2, 3, 4):
            tt = j * 2 * sc.tau - 1  # i=1 has r0 = 1
            assert tr.scalar(v2n, tt) == 1.0


class TestSizeFormulas:
    def test_f1_size_arithmetic(self):
        assert 10 + 3 + 2 * 2 + 7 == 24

    def test_boosted_size_arithmetic(self):
        assert boosted_size_formula(10, 3, 5, 2, 2) == 59
        assert boosted_hidden_formula(3, 2, 2) == 34
        assert boosted_time_formula(2, 2, 3, 1) == 70

    def test_g_size(self):
        for k in (1, 2, 3):
            g, _ = build_g(k, 0, 6, 2)
            assert g.size == 3 * k + 8
            assert g.hidden_size == 2 * k + 5


def build_instance(seed, n, k):
    rng = rng_for(seed)
    p = random_text(B2, n, rng)
    qt = random_text(B2, n, rng)
    d = random_prefix_window_distinguisher(B2, n, k, rng)
    res = boost_text(p, qt, d)
    q = lm_to_rnn(text_to_lm(qt), 2)
    D = distinguisher_to_rnn(res.applied, B2, 2)
    return p, qt, res, q, D


class TestBoostedRnn:
    @pytest.mark.parametrize("seed,n,k", [(601, 4, 2), (602, 3, 1), (603, 4, 1)])
    def test_outputs_match_analytic(self, seed, n, k):
        p, qt, res, q, D = build_instance(seed, n, k)
        Qp, report = build_boosted_rnn(q, D, k, res.alpha, res.offset, 2)
        assert report.built_size == boosted_size_formula(
            q.size, q.hidden_size, D.size, D.hidden_size, k
        )
        docs = all_docs(n)
        outs = run(Qp, docs).output_at_multiples()
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for i in range(1, n + 1):
                want = res.lm_boosted.prob(doc[i - 1], doc[: i - 1])
                assert abs(outs[i][col] - want) < 1e-9

    def test_zero_distinguisher_keeps_conditionals(self):
        rng = rng_for(607)
        n, k = 4, 2
        qt = random_text(B2, n, rng)
        lm = text_to_lm(qt)
        q = lm_to_rnn(lm, 2)
        D = distinguisher_to_rnn(constant_distinguisher(k, n, 0), B2, 2)
        Qp, _ = build_boosted_rnn(q, D, k, 0.0, 0, 2)
        docs = all_docs(n)
        outs = run(Qp, docs).output_at_multiples()
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for i in range(1, n + 1):
                assert abs(outs[i][col] - lm.prob(doc[i - 1], doc[: i - 1])) < 1e-12

    def test_loss_certificate_through_rnn_outputs(self):
        # read the compiled conditionals back off the circuit and verify
        # the certified loss drop with exact-table arithmetic
        from ntpboost.dist import LanguageModel, next_token_loss

        p, qt, res, q, D = build_instance(611, 4, 2)
        if res.alpha == 0:
            pytest.skip("degenerate draw")
        Qp, _ = build_boosted_rnn(q, D, 2, res.alpha, res.offset, 2)
        docs = all_docs(4)
        outs = run(Qp, docs).output_at_multiples()
        levels = [np.zeros((2**m, 2)) for m in range(4)]
        for col in range(docs.shape[1]):
            doc = doc_tuple(docs, col)
            for i in range(1, 5):
                pref = int("".join(map(str, doc[: i - 1])), 2) if i > 1 else 0
                levels[i - 1][pref, doc[i - 1]] = outs[i][col]
        lm_rnn = LanguageModel(B2, 4, tuple(levels))
        before = next_token_loss(p, text_to_lm(qt))
        after = next_token_loss(p, lm_rnn)
        assert after - before <= -res.alpha**2 / (4 * 2) + 1e-9


class TestSimpleConstruction:
    @pytest.mark.parametrize("seed,n,k", [(617, 4, 2), (619, 3, 1)])
    def test_trace_equivalence_with_efficient(self, seed, n, k):
        p, qt, res, q, D = build_instance(seed, n, k)
        Qp, _ = build_boosted_rnn(q, D, k, res.alpha, res.offset, 2)
        Qs = build_boosted_rnn_simple(q, D, k, res.alpha, res.offset, 2)
        docs = all_docs(n)
        a = run(Qp, docs).output_at_multiples()
        b = run(Qs, docs).output_at_multiples()
        for i in range(1, n + 1):
            assert np.max(np.abs(a[i] - b[i])) < 1e-12

    def test_size_comparison(self):
        # doubling beats hidden-copying only when |Q| is small
        p, qt, res, q, D = build_instance(623, 4, 2)
        Qp, _ = build_boosted_rnn(q, D, 2, res.alpha, res.offset, 2)
        Qs = build_boosted_rnn_simple(q, D, 2, res.alpha, res.offset, 2)
        assert Qs.size == 2 * q.size + 2 * D.size + 5 * 2 + 16
        simple_minus_eff = Qs.size - Qp.size
        # with |Q| = |D| = n + 3 and hidden n + 2 the doubling construction
        # is smaller until q grows beyond its hidden set; record the margin
        assert simple_minus_eff == (q.size - q.hidden_size) + (
            D.size - D.hidden_size
        ) + (5 * 2 + 16) - (7 * 2 + 25)


class TestHiddenSufficiency:
    def test_all_constructed_graphs_pass_scrubbing(self):
        p, qt, res, q, D = build_instance(631, 4, 2)
        tau = max(q.rnn_time, D.rnn_time) + 4
        U, _ = build_sync_enumerator(q, 2, res.offset % 2, tau, 2, prefix="u.")
        f1, _ = build_f1(q, 2, 1, tau, 2)
        f2, _ = build_f2(D, 2, 1, res.alpha, tau, 2)
        g, _ = build_g(2, 1, tau, 2)
        Qp, _ = build_boosted_rnn(q, D, 2, res.alpha, res.offset, 2)
        Qs = build_boosted_rnn_simple(q, D, 2, res.alpha, res.offset, 2)
        rng = rng_for(677)
        for graph in (q, D, U, f1, f2, g, Qp, Qs):
            rep = verify_hidden_sufficiency(graph, trials=6, rng=rng)
            assert rep.ok, (graph.meta.get("kind"), rep.first_failure())

    def test_scrubbing_catches_broken_hidden_set(self):
        # deliberately demote a latch from the hidden set: outputs then
        # depend on a scrubbed node and the harness must notice
        rng = rng_for(641)
        lm = text_to_lm(random_text(B2, 3, rng))
        g = lm_to_rnn(lm, 2)
        broken = type(g)(
            nodes=list(g.nodes),
            input_ids=g.input_ids,
            output_id=g.output_id,
            hidden_ids=tuple(h for h in g.hidden_ids if h != "p1"),
            rnn_time=g.rnn_time,
            meta=dict(g.meta),
        )
        rep = verify_hidden_sufficiency(broken, trials=30, rng=rng)
        assert not rep.ok
