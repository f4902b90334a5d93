"""Model-space enumeration, closure, complexity, and neighborhood tests."""

import itertools

import pytest

from discoverysim.errors import ConfigurationError
from discoverysim.modelspace import (
    Complexity,
    ModelSpec,
    bo_moves,
    compare_complexity,
    enumerate_models,
    format_model,
    hierarchical_closure,
    parse_model,
    term_factors,
    term_label,
    term_order,
    tess_neighbors,
)


def brute_force_models(k):
    """Independent oracle: filter all term subsets by the two invariants."""
    universe = list(range(1, 1 << k))
    valid = set()
    for r in range(1, len(universe) + 1):
        for combo in itertools.combinations(universe, r):
            terms = set(combo)
            if 1 not in terms:
                continue
            closed = all(
                all(sub in terms for sub in _proper_submasks(t)) for t in terms
            )
            if closed:
                valid.add(frozenset(terms))
    return valid


def _proper_submasks(mask):
    sub = (mask - 1) & mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


class TestEnumeration:
    @pytest.mark.parametrize("k,expected", [(1, 1), (2, 3), (3, 14)])
    def test_counts(self, k, expected):
        assert enumerate_models(k).L == expected

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_matches_brute_force(self, k):
        space = enumerate_models(k)
        assert {m.terms for m in space} == brute_force_models(k)

    def test_k1_is_just_x1(self):
        space = enumerate_models(1)
        assert str(space[0]) == "x1"

    def test_k2_contents(self):
        assert enumerate_models(2).labels() == ("x1", "x1 + x2", "x1 + x2 + x1x2")

    def test_canonical_order_simple_to_complex(self):
        space = enumerate_models(3)
        ps = [m.p for m in space]
        assert ps == sorted(ps)
        # ties in p break on interaction order: the all-mains model precedes
        # the equally sized models carrying an interaction
        assert space.labels()[3] == "x1 + x2 + x3"
        assert space.labels()[4] == "x1 + x2 + x1x2"

    def test_all_members_valid(self):
        for m in enumerate_models(3):
            assert 1 in m.terms
            assert m.p == len(m.terms)

    @pytest.mark.parametrize("bad", [0, 6, -1, 2.5])
    def test_k_out_of_range(self, bad):
        with pytest.raises(ConfigurationError):
            enumerate_models(bad)

    def test_runs_quickly_for_largest_k(self):
        import time

        t0 = time.perf_counter()
        space = enumerate_models(5)
        assert time.perf_counter() - t0 < 30.0
        assert space.L > 100
        for m in space:
            assert 1 in m.terms


class TestClosure:
    def test_three_way_term_pulls_in_everything(self):
        got = hierarchical_closure({0b111}, 3)
        assert got.terms == frozenset({1, 2, 4, 3, 5, 6, 7})

    def test_x1_always_included(self):
        assert hierarchical_closure({0b010}, 3).terms == frozenset({1, 2})

    def test_single_two_way(self):
        assert hierarchical_closure({0b101}, 3).terms == frozenset({1, 4, 5})

    def test_factor_beyond_k_rejected(self):
        with pytest.raises(ConfigurationError):
            hierarchical_closure({0b1000}, 3)

    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            hierarchical_closure(set(), 3)

    def test_modelspec_rejects_unclosed(self):
        with pytest.raises(ConfigurationError):
            ModelSpec(frozenset({1, 3}))  # x1x2 without x2

    def test_modelspec_rejects_missing_x1(self):
        with pytest.raises(ConfigurationError):
            ModelSpec(frozenset({2}))


class TestComplexity:
    def test_parameter_count_rule(self):
        space = enumerate_models(3)
        full = space[13]
        two = space.models[space.find("x1 + x2")]
        assert compare_complexity(full, two) is Complexity.MORE_COMPLEX
        assert compare_complexity(two, full) is Complexity.LESS_COMPLEX

    def test_interaction_order_rule(self):
        space = enumerate_models(3)
        inter = space[space.find("x1 + x2 + x1x2")]
        mains = space[space.find("x1 + x2 + x3")]
        assert compare_complexity(inter, mains) is Complexity.MORE_COMPLEX

    def test_reflexive_indistinguishable(self):
        m = enumerate_models(3)[5]
        assert compare_complexity(m, m) is Complexity.INDISTINGUISHABLE

    def test_antisymmetry_and_rule1_consistency_exhaustive(self):
        space = enumerate_models(3)
        for mi in space:
            for mj in space:
                a = compare_complexity(mi, mj)
                b = compare_complexity(mj, mi)
                if a is Complexity.MORE_COMPLEX:
                    assert b is Complexity.LESS_COMPLEX
                if a is Complexity.INDISTINGUISHABLE:
                    assert b is Complexity.INDISTINGUISHABLE
                if mi.p > mj.p:
                    assert a is Complexity.MORE_COMPLEX


def _tess_oracle(mg, space):
    """Pairwise predicate: M' differs by one main effect (with its cascade)."""
    out = set()
    for other in space:
        if other.terms == mg.terms:
            continue
        added = other.terms - mg.terms
        removed = mg.terms - other.terms
        if not removed and len(added) == 1 and term_order(next(iter(added))) == 1:
            out.add(other)
        if not added and removed:
            factors = set()
            for t in removed:
                factors.update(term_factors(t))
            for f in factors:
                fmask = 1 << (f - 1)
                if f != 1 and fmask in mg.terms and removed == {
                    t for t in mg.terms if t & fmask
                }:
                    out.add(other)
    return out


def _bo_oracle(mg, space):
    out = set()
    for w in range(1, 1 << space.k):
        if term_order(w) >= 2 and w not in mg.terms:
            terms = set(mg.terms) | {w}
            for t in list(terms):
                terms.update(_proper_submasks(t))
            candidate = frozenset(terms)
            if candidate != mg.terms:
                out.add(candidate)
    return {m for m in space if m.terms in out}


@pytest.fixture(scope="module")
def space():
    return enumerate_models(3)


class TestNeighborhoods:
    def test_tess_from_two_mains(self, space):
        mg = space[space.find("x1 + x2")]
        got = {str(m) for m in tess_neighbors(mg, space)}
        assert got == {"x1 + x2 + x3", "x1"}

    def test_tess_from_six_term_model(self, space):
        mg = space[space.find("x1 + x2 + x3 + x1x2 + x1x3 + x2x3 + x1x2x3")]
        got = {str(m) for m in tess_neighbors(mg, space)}
        assert got == {"x1 + x3 + x1x3", "x1 + x2 + x1x2"}

    def test_tess_from_minimal(self, space):
        mg = space[space.find("x1")]
        got = {str(m) for m in tess_neighbors(mg, space)}
        assert got == {"x1 + x2", "x1 + x3"}

    def test_tess_matches_oracle_everywhere(self, space):
        for mg in space:
            assert tess_neighbors(mg, space) == _tess_oracle(mg, space)

    def test_tess_add_drop_symmetry(self, space):
        # an "add main f" move from Mj to Mi is undone by the "drop f" move
        # (no interaction contains f in Mi, so the drop cascade is trivial)
        for mj in space:
            for mi in tess_neighbors(mj, space):
                if mi.terms > mj.terms:
                    assert mj in tess_neighbors(mi, space)

    def test_bo_from_two_mains(self, space):
        mg = space[space.find("x1 + x2")]
        assert len(bo_moves(mg, space)) == 4

    def test_bo_from_six_terms(self, space):
        mg = space[space.find("x1 + x2 + x3 + x1x2 + x1x3 + x2x3")]
        got = bo_moves(mg, space)
        assert {str(m) for m in got} == {"x1 + x2 + x3 + x1x2 + x1x3 + x2x3 + x1x2x3"}

    def test_bo_from_full_is_empty(self, space):
        assert bo_moves(space[13], space) == set()

    def test_bo_matches_oracle_everywhere(self, space):
        for mg in space:
            assert bo_moves(mg, space) == _bo_oracle(mg, space)

    def test_results_are_space_members(self, space):
        for mg in space:
            for m in tess_neighbors(mg, space) | bo_moves(mg, space):
                space.index_of(m)


class TestModelStrings:
    def test_round_trip_all_k3(self):
        space = enumerate_models(3)
        for m in space:
            assert parse_model(str(m), 3).terms == m.terms

    def test_whitespace_insensitive(self):
        a = parse_model("x1+x2+x1x2", 2)
        b = parse_model("  x1 +\tx2+ x1x2 ", 2)
        assert a.terms == b.terms

    def test_canonical_spacing(self):
        m = parse_model("x1x2+x1+x2", 2)
        assert format_model(m) == "x1 + x2 + x1x2"

    @pytest.mark.parametrize("bad", ["", "x9", "x1 + y2", "x1 + x1", "x1x1", "x2 + x3"])
    def test_rejects_malformed(self, bad):
        with pytest.raises(ConfigurationError):
            parse_model(bad, 3)

    def test_term_helpers(self):
        assert term_factors(0b101) == (1, 3)
        assert term_label(0b110) == "x2x3"
        assert term_order(0b111) == 3
