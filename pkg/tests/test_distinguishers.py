"""Distinguisher advantage, offset decomposition, Pinsker-type bound."""

import math

import pytest

from ntpboost.dist import Alphabet, point_mass_text
from ntpboost.distinguishers import (
    Distinguisher,
    advantage,
    anchor_of,
    anchors,
    block_weights,
    complement,
    constant_distinguisher,
    max_advantage_oracle,
    max_window_predicate_advantage,
    offset_decomposition,
    pinsker_bound,
    table_distinguisher,
)
from ntpboost.errors import PreconditionError, SizingError, ValidationError
from ntpboost.families import (
    one_prefix_table_family,
    product_window_family,
    single_position_window_subsets,
)
from ntpboost.instances import (
    random_prefix_window_distinguisher,
    random_text,
    random_window_table_distinguisher,
    rng_for,
)

from oracles import advantage_double_enumeration

B2 = Alphabet(2)


class TestDistinguisherBasics:
    def test_output_must_be_bit(self):
        d = Distinguisher(1, 3, lambda i, s, w: 2)
        with pytest.raises(ValidationError):
            d.value(1, (), (0,))

    def test_window_clipping(self):
        d = constant_distinguisher(3, 4)
        assert d.window((0, 1, 0, 1), 3) == (0, 1)
        assert d.window((0, 1, 0, 1), 4) == (1,)
        assert d.window((0, 1, 0, 1), 1) == (0, 1, 0)

    def test_window_property_fuzz(self):
        # outputs agree whenever documents agree on x_{:i+k}
        rng = rng_for(71)
        n, k = 5, 2
        d = random_prefix_window_distinguisher(B2, n, k, rng)
        for _ in range(1000):
            i = int(rng.integers(1, n + 1))
            shared = tuple(rng.integers(0, 2, size=min(i - 1 + k, n)))
            x = shared + tuple(rng.integers(0, 2, size=n - len(shared)))
            y = shared + tuple(rng.integers(0, 2, size=n - len(shared)))
            assert d.value_on_document(i, x) == d.value_on_document(i, y)

    def test_table_distinguisher_full_keys(self):
        d = table_distinguisher(1, 2, {(1, (0, 1)): 1}, keyed_on="full")
        # position 1: prefix empty, window (0,); full string x_{:1+1}=(0,?)
        assert d.value_on_document(1, (0, 1)) == 0  # key is x_{:i+k}=(0,)... no match
        d2 = table_distinguisher(1, 2, {(1, (0,)): 1}, keyed_on="full")
        assert d2.value_on_document(1, (0, 1)) == 1
        assert d2.value_on_document(1, (1, 1)) == 0


class TestAdvantage:
    def test_zero_distinguisher(self):
        rng = rng_for(73)
        p = random_text(B2, 4, rng)
        q = random_text(B2, 4, rng)
        assert advantage(constant_distinguisher(2, 4), p, q) == 0.0

    def test_equal_distributions(self):
        rng = rng_for(79)
        p = random_text(B2, 4, rng)
        d = random_window_table_distinguisher(B2, 4, 2, rng)
        assert abs(advantage(d, p, p)) < 1e-14

    def test_matches_double_enumeration_oracle(self):
        rng = rng_for(83)
        n, k = 4, 2
        p = random_text(B2, n, rng)
        q = random_text(B2, n, rng)
        d = random_prefix_window_distinguisher(B2, n, k, rng)
        expected = advantage_double_enumeration(d, p.probs, q.probs, 2, n)
        assert abs(advantage(d, p, q) - expected) < 1e-12

    def test_oracle_agreement_with_zero_mass_prefixes(self):
        rng = rng_for(89)
        n, k = 3, 1
        p = random_text(B2, n, rng)
        q = point_mass_text(B2, n, (0, 1, 0))  # many zero-marginal prefixes
        d = random_window_table_distinguisher(B2, n, k, rng)
        expected = advantage_double_enumeration(d, p.probs, q.probs, 2, n)
        assert abs(advantage(d, p, q) - expected) < 1e-12

    def test_complement_negates(self):
        rng = rng_for(97)
        p = random_text(B2, 4, rng)
        q = random_text(B2, 4, rng)
        d = random_window_table_distinguisher(B2, 4, 2, rng)
        assert advantage(d, p, q) == -advantage(complement(d), p, q)

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(PreconditionError):
            Distinguisher(5, 4, lambda i, s, w: 0)


class TestOffsetDecomposition:
    def test_k1_single_offset(self):
        rng = rng_for(101)
        p = random_text(B2, 4, rng)
        q = random_text(B2, 4, rng)
        d = random_window_table_distinguisher(B2, 4, 1, rng)
        rep = offset_decomposition(d, p, q)
        assert len(rep.offsets) == 1
        j, w, a = rep.offsets[0]
        assert (j, w) == (0, 4)
        assert abs(a - rep.advantage) < 1e-12

    def test_paper_weights_n5_k2(self):
        assert block_weights(5, 2) == [3, 2]

    def test_weights_sum_to_n(self):
        for n in range(1, 9):
            for k in range(1, n + 1):
                assert sum(block_weights(n, k)) == n

    def test_reconstruction_identity(self):
        rng = rng_for(103)
        for seed in range(5):
            p = random_text(B2, 5, rng)
            q = random_text(B2, 5, rng)
            d = random_window_table_distinguisher(B2, 5, 2, rng)
            rep = offset_decomposition(d, p, q)
            recon = sum(w * a for _, w, a in rep.offsets) / 5
            assert abs(recon - rep.advantage) < 1e-10
            assert abs(rep.advantage - advantage(d, p, q)) < 1e-12

    def test_best_offset_dominates_advantage(self):
        rng = rng_for(107)
        p = random_text(B2, 5, rng)
        q = random_text(B2, 5, rng)
        d = random_window_table_distinguisher(B2, 5, 2, rng)
        rep = offset_decomposition(d, p, q)
        if rep.advantage >= 0:
            best_a = dict((j, a) for j, _, a in rep.offsets)[rep.best_offset]
            assert best_a >= rep.advantage - 1e-12

    def test_anchor_helpers(self):
        assert anchors(1, 5, 2) == [1, 3]
        assert anchors(0, 4, 2) == [0, 2]
        assert anchor_of(1, 0, 2) == 0
        assert anchor_of(2, 0, 2) == 0
        assert anchor_of(3, 0, 2) == 2
        assert anchor_of(4, 1, 2) == 3  # position in I maps to the previous anchor? no: 4 > 3
        assert anchor_of(3, 1, 2) == 1
        with pytest.raises(PreconditionError):
            anchor_of(1, 1, 2)


class TestPinsker:
    def test_equal_distributions(self):
        rng = rng_for(109)
        p = random_text(B2, 4, rng)
        assert pinsker_bound(p, p, 2) == 0.0

    def test_exact_arithmetic_case(self):
        # if KL were exactly 2n/k the bound is 1
        assert abs(math.sqrt(2 / (2 * 4) * (2 * 4 / 2)) - 1.0) < 1e-15

    def test_every_distinguisher_bounded(self):
        rng = rng_for(113)
        n = 4
        for k in (1, 2):
            for _ in range(5):
                p = random_text(B2, n, rng)
                q = random_text(B2, n, rng)
                bound = pinsker_bound(p, q, k)
                d = random_prefix_window_distinguisher(B2, n, k, rng)
                assert abs(advantage(d, p, q)) <= bound + 1e-12
                assert max_window_predicate_advantage(p, q, k) <= bound + 1e-12


class TestMaxAdvantageOracle:
    def test_trivial_family(self):
        rng = rng_for(127)
        p = random_text(B2, 3, rng)
        q = random_text(B2, 3, rng)
        d, val = max_advantage_oracle(p, q, 1, [constant_distinguisher(1, 3)])
        assert val == 0.0

    def test_equal_distributions_zero(self):
        rng = rng_for(131)
        p = random_text(B2, 3, rng)
        fam = single_position_window_subsets(B2, 3, 1, position=2)
        _, val = max_advantage_oracle(p, p, 1, fam)
        assert val < 1e-14

    def test_decomposed_max_matches_product_family(self):
        # production decomposition vs exhaustive product-family enumeration
        rng = rng_for(137)
        n, k = 3, 1
        p = random_text(B2, n, rng)
        q = random_text(B2, n, rng)
        fam = product_window_family(B2, n, k)
        _, val = max_advantage_oracle(p, q, k, fam)
        assert abs(val - max_window_predicate_advantage(p, q, k)) < 1e-12

    def test_single_position_subset_enumeration_vs_tv_form(self):
        # best single-position subset advantage = TV-style positive part
        rng = rng_for(139)
        n, k = 4, 1
        p = random_text(B2, n, rng)
        q = random_text(B2, n, rng)
        # per-position advantages already carry the 1/n factor, so the
        # product-family extreme is the sum of per-position extremes
        best = sum(
            max(
                advantage(d, p, q)
                for d in single_position_window_subsets(B2, n, k, position=i)
            )
            for i in range(1, n + 1)
        )
        worst = sum(
            min(
                advantage(d, p, q)
                for d in single_position_window_subsets(B2, n, k, position=i)
            )
            for i in range(1, n + 1)
        )
        expected = max(best, -worst)
        assert abs(max_window_predicate_advantage(p, q, k) - expected) < 1e-12

    def test_family_cap(self):
        with pytest.raises(SizingError):
            single_position_window_subsets(Alphabet(2), 40, 5, position=1)


class TestOnePrefixFamily:
    def test_size(self):
        fam = one_prefix_table_family(B2, 3, 1)
        assert len(fam) == 2 ** (2 * 2)

    def test_members_satisfy_window_property(self):
        rng = rng_for(149)
        fam = one_prefix_table_family(B2, 4, 1)
        d = fam[rng.integers(0, len(fam))]
        for _ in range(200):
            i = int(rng.integers(1, 5))
            shared = tuple(rng.integers(0, 2, size=min(i, 4)))
            x = shared + tuple(rng.integers(0, 2, size=4 - len(shared)))
            y = shared + tuple(rng.integers(0, 2, size=4 - len(shared)))
            assert d.value_on_document(i, x) == d.value_on_document(i, y)


class TestAllWindowPredicatesString:
    def test_string_family_matches_decomposed_max(self):
        rng = rng_for(151)
        p = random_text(B2, 4, rng)
        q = random_text(B2, 4, rng)
        for k in (1, 2):
            d, val = max_advantage_oracle(p, q, k, "all_window_predicates")
            assert abs(val - max_window_predicate_advantage(p, q, k)) < 1e-12

    def test_string_family_sizing_guard(self):
        rng = rng_for(157)
        p = random_text(Alphabet(2), 4, rng)
        with pytest.raises(SizingError):
            max_advantage_oracle(p, p, 20, "all_window_predicates")
