import itertools

import numpy as np
import pytest

from helpers import generated_system, random_system, subsets
from testwise_fci.exceptions import InvalidArgumentError
from testwise_fci.graph import ARROW, TAIL, MixedGraph, ancestors, d_separated, m_separated, simple_paths
from testwise_fci.system import (
    CausalSystem,
    Role,
    check_assumption1,
    check_assumption2,
    dag_to_mag,
    has_inducing_path,
    oracle_ci,
    system_from_text,
    system_to_text,
)

O, L, S, M = Role.OBSERVED, Role.LATENT, Role.SELECTION, Role.INDICATOR


def selected_system():
    """X1..X5 as 0..4; X2 is selection, X5 the indicator governing X3, X4 latent."""
    dag = MixedGraph.from_directed_edges(5, [(0, 1), (3, 4), (0, 4)])
    return CausalSystem(dag, (O, S, O, L, M), {2: frozenset({4})})


def literal_inducing_path(sys, oi, oj):
    sel = sys.selection
    obs = set(sys.observed)
    anc = ancestors(sys.dag, {oi, oj} | sel)
    g = sys.dag
    for path in simple_paths(g, oi, oj):
        ok = True
        for u, v, w in zip(path, path[1:], path[2:]):
            collider = g.mark(u, v) == ARROW and g.mark(w, v) == ARROW
            if collider and v not in anc:
                ok = False
            if not collider and (v in obs or v in sel):
                ok = False
        if ok:
            return True
    return False


class TestCausalSystem:
    def test_derived_sets(self):
        sys = selected_system()
        assert sys.observed == [0, 2]
        assert sys.selection == {1}
        assert sys.indicator_map[0] == {1}
        assert sys.indicator_map[2] == {1, 4}
        assert sys.listwise_selection == {1, 4}
        assert sys.selection_for([0]) == {1}
        assert sys.selection_for([0, 2]) == {1, 4}
        assert sys.mechanisms() == [frozenset({4})]

    def test_unused_indicator_rejected(self):
        dag = MixedGraph(3, kind="dag")
        with pytest.raises(InvalidArgumentError):
            CausalSystem(dag, (O, O, M), {})

    def test_map_key_must_be_observed(self):
        dag = MixedGraph(3, kind="dag")
        with pytest.raises(InvalidArgumentError):
            CausalSystem(dag, (O, L, M), {1: frozenset({2})})

    def test_dag_is_immutable(self):
        sys = selected_system()
        with pytest.raises(ValueError):
            sys.dag.set_edge(0, 2, TAIL, ARROW)

    def test_text_round_trip(self):
        sys = generated_system(4, 10)
        text = system_to_text(sys)
        back = system_from_text(text)
        assert back == sys
        assert system_to_text(back) == text


class TestInducingPaths:
    def test_direct_edge(self):
        dag = MixedGraph.from_directed_edges(2, [(0, 1)])
        assert has_inducing_path(CausalSystem(dag, (O, O)), 0, 1)

    def test_through_latent(self):
        dag = MixedGraph.from_directed_edges(3, [(0, 1), (1, 2)])
        assert has_inducing_path(CausalSystem(dag, (O, L, O)), 0, 2)
        assert not has_inducing_path(CausalSystem(dag, (O, O, O)), 0, 2)

    def test_collider_ancestor_of_selection(self):
        # 0 -> 1 <- 2, 1 -> 3 with 3 selected: the collider is an ancestor of S
        dag = MixedGraph.from_directed_edges(4, [(0, 1), (2, 1), (1, 3)])
        assert has_inducing_path(CausalSystem(dag, (O, L, O, S)), 0, 2)
        assert not has_inducing_path(CausalSystem(dag, (O, L, O, L)), 0, 2)

    def test_latent_endpoint_rejected(self):
        dag = MixedGraph.from_directed_edges(2, [(0, 1)])
        with pytest.raises(InvalidArgumentError):
            has_inducing_path(CausalSystem(dag, (O, L)), 0, 1)

    def test_matches_all_subsets_and_literal_definition(self):
        rng = np.random.default_rng(11)
        for _ in range(120):
            p = int(rng.integers(4, 8))
            sys = random_system(rng, p, n_latent=int(rng.integers(0, 3)), n_selection=int(rng.integers(0, 2)))
            obs = sys.observed
            for a, b in itertools.combinations(obs, 2):
                rest = [v for v in obs if v not in (a, b)]
                always = all(not d_separated(sys.dag, {a}, {b}, set(W) | sys.selection) for W in subsets(rest))
                got = has_inducing_path(sys, a, b)
                assert got == always
                assert got == literal_inducing_path(sys, a, b)


class TestDagToMag:
    def test_fully_observed(self):
        dag = MixedGraph.from_directed_edges(4, [(0, 1), (1, 2), (3, 2)])
        mag = dag_to_mag(CausalSystem(dag, (O,) * 4))
        assert mag.kind == "mag"
        assert mag.mark_matrix().tolist() == dag.mark_matrix().tolist()

    def test_confounder_gives_bidirected(self):
        dag = MixedGraph.from_directed_edges(3, [(1, 0), (1, 2)])
        mag = dag_to_mag(CausalSystem(dag, (O, L, O)))
        assert mag.edge(0, 1) == (ARROW, ARROW)

    def test_selection_gives_undirected(self):
        dag = MixedGraph.from_directed_edges(3, [(0, 2), (1, 2)])
        mag = dag_to_mag(CausalSystem(dag, (O, O, S)))
        assert mag.edge(0, 1) == (TAIL, TAIL)

    def test_random_systems_ancestral_and_markov(self):
        rng = np.random.default_rng(12)
        for _ in range(80):
            p = int(rng.integers(4, 8))
            sys = random_system(rng, p, n_latent=int(rng.integers(0, 3)), n_selection=int(rng.integers(0, 2)))
            mag = dag_to_mag(sys)
            mag.validate()
            obs = sys.observed
            idx = {v: k for k, v in enumerate(obs)}
            for a, b in itertools.combinations(obs, 2):
                rest = [v for v in obs if v not in (a, b)]
                for W in subsets(rest):
                    dsep = d_separated(sys.dag, {a}, {b}, set(W) | sys.selection)
                    msep = m_separated(mag, {idx[a]}, {idx[b]}, {idx[w] for w in W})
                    assert dsep == msep


class TestOracle:
    def test_empty_selection_is_plain_d_separation(self):
        dag = MixedGraph.from_directed_edges(3, [(0, 1), (2, 1)])
        sys = CausalSystem(dag, (O, O, O))
        assert oracle_ci(sys, 0, 2, [], [])
        assert not oracle_ci(sys, 0, 2, [1], [])

    def test_selected_system(self):
        sys = selected_system()
        # X3 has no edges, so the pair stays separated under either selection
        assert oracle_ci(sys, 0, 2, [], {1})
        assert oracle_ci(sys, 0, 2, [], {1, 4})
        # conditioning on the indicator X5 opens the collider X1 -> X5 <- X4
        assert d_separated(sys.dag, {0}, {3}, {1})
        assert not d_separated(sys.dag, {0}, {3}, {1, 4})

    def test_validation(self):
        sys = selected_system()
        with pytest.raises(InvalidArgumentError):
            oracle_ci(sys, 0, 2, [3], [])
        with pytest.raises(InvalidArgumentError):
            oracle_ci(sys, 0, 2, [], [3])


class TestAssumptions:
    def test_sink_indicators_pass(self):
        assert check_assumption1(selected_system())

    def test_indicator_with_observed_child_fails(self):
        dag = MixedGraph.from_directed_edges(3, [(2, 0)])
        sys = CausalSystem(dag, (O, O, M), {1: frozenset({2})})
        assert not check_assumption1(sys)

    def test_indicator_causing_other_mechanism_fails(self):
        dag = MixedGraph.from_directed_edges(4, [(2, 3)])
        sys = CausalSystem(dag, (O, O, M, M), {0: frozenset({2}), 1: frozenset({3})})
        assert not check_assumption1(sys)

    def test_generated_systems_pass(self):
        for seed in range(1000):
            kind = ("MNAR", "MAR")[seed % 2]
            assert check_assumption1(generated_system(seed, int(6 + seed % 5), kind))

    def test_mcar_assumption(self):
        for seed in range(50):
            assert check_assumption2(generated_system(seed, 8, "MCAR"))
        assert not check_assumption2(selected_system())


def _lemma_systems(count, p_max=8):
    for seed in range(count):
        p = 6 + seed % (p_max - 5)
        yield generated_system(1000 + seed, p, ("MNAR", "MAR")[seed % 2])


def test_dependence_transfers_from_testwise_to_listwise():
    for sys in _lemma_systems(60):
        assert check_assumption1(sys)
        obs = sys.observed
        for a, b in itertools.combinations(obs, 2):
            rest = [v for v in obs if v not in (a, b)]
            for W in subsets(rest, 2):
                if not oracle_ci(sys, a, b, W, sys.selection_for([a, b, *W])):
                    assert not oracle_ci(sys, a, b, W, sys.listwise_selection)


def test_minimal_separators_stay_minimal():
    for sys in _lemma_systems(60):
        obs = sys.observed
        for a, b in itertools.combinations(obs, 2):
            rest = [v for v in obs if v not in (a, b)]
            for W in subsets(rest, 2):
                sel_w = sys.selection_for([a, b, *W])
                if not oracle_ci(sys, a, b, W, sel_w):
                    continue
                strict = [A for A in subsets(W) if len(A) < len(W)]
                if any(oracle_ci(sys, a, b, A, sel_w) for A in strict):
                    continue
                if oracle_ci(sys, a, b, W, sys.listwise_selection):
                    assert not any(oracle_ci(sys, a, b, A, sys.listwise_selection) for A in strict)
