import itertools

import numpy as np
import pytest
from scipy.stats import norm

from helpers import generated_system, subsets
from testwise_fci.citest import (
    CIDecision,
    DataCITester,
    OracleCITester,
    Strategy,
    ci_heuristic,
    ci_listwise,
    ci_testwise,
    ci_wrapper,
    fisher_z,
    make_tester,
    partial_correlation,
    read_log,
    testwise_rows as complete_rows,
    write_log,
)
from testwise_fci.exceptions import InvalidArgumentError
from testwise_fci.metrics import mean_effective_n
from testwise_fci.synth import Dataset, GenConfig, SemModel, generate, generate_dag, sample_sem
from testwise_fci.system import CausalSystem, Role, oracle_ci


def income_table():
    """The blue (selected) rows of the income/blood-pressure table; X3 missing where X5 = 0."""
    x1 = [48.0, 35.0, 17.0, 42.0]
    x3 = [np.nan, 141.0, 125.0, np.nan]
    values = np.column_stack([x1, x3])
    return Dataset(values, ~np.isnan(values), ["X1", "X3"])


def residual_corr(X, i, j, W):
    Z = np.column_stack([np.ones(len(X)), X[:, list(W)]])
    ri = X[:, i] - Z @ np.linalg.lstsq(Z, X[:, i], rcond=None)[0]
    rj = X[:, j] - Z @ np.linalg.lstsq(Z, X[:, j], rcond=None)[0]
    return float(np.corrcoef(ri, rj)[0, 1])


def data_from(columns, mask=None):
    values = np.column_stack(columns)
    return Dataset(values, np.ones_like(values, bool) if mask is None else mask, [f"c{k}" for k in range(values.shape[1])])


class TestRows:
    def test_fully_observed(self):
        d = data_from([np.arange(5.0), np.arange(5.0)])
        assert complete_rows(d, [0]).tolist() == [0, 1, 2, 3, 4]

    def test_income_table(self):
        d = income_table()
        assert complete_rows(d, [0]).tolist() == [0, 1, 2, 3]
        assert complete_rows(d, [0, 1]).tolist() == [1, 2]

    def test_all_columns_is_listwise(self):
        _, d, _ = generate(GenConfig(p=10), 200, "MNAR", np.random.default_rng(0))
        assert np.array_equal(complete_rows(d, range(d.p)), np.flatnonzero(d.mask.all(axis=1)))

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            complete_rows(income_table(), [])


class TestFisherZ:
    def test_matches_regression_residuals(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            p = int(rng.integers(3, 8))
            B = rng.normal(size=(p, p))
            X = rng.normal(size=(60, p)) @ B
            i, j = rng.choice(p, 2, replace=False)
            rest = [v for v in range(p) if v not in (i, j)]
            W = list(rng.choice(rest, size=int(rng.integers(0, len(rest) + 1)), replace=False))
            cov = np.cov(X, rowvar=False)
            assert abs(partial_correlation(cov, i, j, W) - residual_corr(X, i, j, W)) < 1e-8

    def test_identical_columns_dependent(self):
        x = np.random.default_rng(1).normal(size=100)
        cov = np.cov(np.column_stack([x, x]), rowvar=False)
        assert partial_correlation(cov, 0, 1, []) == pytest.approx(1.0)
        p, indep = fisher_z(cov, 100, 0, 1, [], 0.01)
        assert p < 1e-10 and not indep

    def test_singular_conditioning_set(self):
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=(2, 200))
        cov = np.cov(np.column_stack([x, y, x + y, x + y]), rowvar=False)
        r = partial_correlation(cov, 0, 1, [2, 3])
        assert -1 <= r <= 1

    def test_chain(self):
        A = np.array([[0, 0, 0], [0.8, 0, 0], [0, 0.8, 0]])
        d = sample_sem(SemModel(A, np.zeros(3)), 5000, np.random.default_rng(3))
        assert ci_testwise(d, 0, 2, [1], 0.01).independent
        assert not ci_testwise(d, 0, 2, [], 0.01).independent

    def test_known_p_value(self):
        cov = np.array([[1.0, 0.1], [0.1, 1.0]])
        p, _ = fisher_z(cov, 103, 0, 1, [], 0.05)
        z = np.arctanh(0.1) * 10
        assert p == pytest.approx(2 * norm.sf(z), rel=1e-12)

    def test_insufficient_dof(self):
        with pytest.raises(InvalidArgumentError):
            fisher_z(np.eye(3), 4, 0, 1, [2], 0.01)


class TestStrategies:
    def test_income_table_listwise_n(self):
        d = income_table()
        assert ci_listwise(d, 0, 1, [], 0.01).effective_n == 2
        assert ci_testwise(d, 0, 1, [], 0.01).effective_n == 2

    def test_insufficient_rows_degenerate(self):
        dec = ci_testwise(income_table(), 0, 1, [], 0.01)
        assert dec.independent and dec.p_value == 1.0 and dec.degenerate

    def test_complete_data_testwise_equals_listwise(self):
        _, d, _ = generate(GenConfig(p=8), 300, "none", np.random.default_rng(4))
        for i, j in itertools.combinations(range(d.p), 2):
            a, b = ci_testwise(d, i, j, [], 0.01), ci_listwise(d, i, j, [], 0.01)
            assert (a.independent, a.p_value, a.effective_n) == (b.independent, b.p_value, b.effective_n)

    def test_heuristic_matches_testwise(self):
        _, d, _ = generate(GenConfig(p=10), 300, "MNAR", np.random.default_rng(5))
        for i, j in itertools.combinations(range(d.p), 2):
            for W in subsets([v for v in range(d.p) if v not in (i, j)], 1):
                a, b = ci_testwise(d, i, j, W, 0.01), ci_heuristic(d, i, j, W, 0.01)
                assert (a.independent, a.p_value) == (b.independent, b.p_value)

    def test_testwise_n_at_least_listwise(self):
        _, d, _ = generate(GenConfig(p=10), 300, "MNAR", np.random.default_rng(6))
        n_list = ci_listwise(d, 0, 1, [], 0.01).effective_n
        for i, j in itertools.combinations(range(d.p), 2):
            assert ci_testwise(d, i, j, [], 0.01).effective_n >= n_list
            assert ci_listwise(d, i, j, [], 0.01).effective_n == n_list


class TestWrapper:
    def test_dependent_runs_one_test(self):
        x = np.random.default_rng(7).normal(size=300)
        d = data_from([x, x + 0.1 * np.random.default_rng(8).normal(size=300)])
        log = []
        dec = ci_wrapper(d, 0, 1, [], 0.01, log_list=log)
        assert not dec.independent
        assert len(log) == 1 and log[0].strategy is Strategy.WRAPPER

    def test_both_independent(self):
        rng = np.random.default_rng(9)
        d = data_from(list(rng.normal(size=(3, 400))))
        log = []
        dec = ci_wrapper(d, 0, 1, [], 0.01, log_list=log)
        assert dec.independent
        assert [e.strategy for e in log] == [Strategy.WRAPPER, Strategy.LISTWISE]
        assert dec.p_value == min(e.p_value for e in log)

    def test_listwise_overrides(self):
        # x, y correlated where z is recorded and anti-correlated elsewhere
        rng = np.random.default_rng(10)
        x = rng.normal(size=400)
        sign = np.r_[np.ones(200), -np.ones(200)]
        y = sign * x + 0.1 * rng.normal(size=400)
        z = rng.normal(size=400)
        mask = np.ones((400, 3), bool)
        mask[200:, 2] = False
        d = data_from([x, y, z], mask)
        log = []
        first = ci_testwise(d, 0, 1, [], 0.01)
        assert first.independent
        dec = ci_wrapper(d, 0, 1, [], 0.01, log_list=log)
        assert not dec.independent
        assert dec.effective_n == 400
        assert log[1].strategy is Strategy.LISTWISE and log[1].effective_n == 200

    def test_independence_implies_both(self):
        _, d, _ = generate(GenConfig(p=10), 200, "MNAR", np.random.default_rng(11))
        for i, j in itertools.combinations(range(d.p), 2):
            for W in subsets([v for v in range(d.p) if v not in (i, j)], 1):
                if ci_wrapper(d, i, j, W, 0.01).independent:
                    assert ci_testwise(d, i, j, W, 0.01).independent
                    assert ci_listwise(d, i, j, W, 0.01).independent


class TestTester:
    def test_memoised_and_symmetric(self):
        _, d, _ = generate(GenConfig(p=12, n_latent_confounders=(0, 1)), 200, "MNAR", np.random.default_rng(12))
        t = DataCITester(d, "Wrapper")
        a = t.decide(3, 1, [5, 2])
        n_logged = len(t.log)
        b = t.decide(1, 3, [2, 5])
        assert a is b
        assert len(t.log) == n_logged
        assert (a.i, a.j, a.W) == (1, 3, (2, 5))

    def test_overlap_rejected(self):
        _, d, _ = generate(GenConfig(p=8), 50, "none", np.random.default_rng(13))
        with pytest.raises(InvalidArgumentError):
            DataCITester(d, "TestWise").decide(0, 1, [1])

    def test_bad_arguments(self):
        _, d, _ = generate(GenConfig(p=8), 50, "none", np.random.default_rng(13))
        with pytest.raises(InvalidArgumentError):
            DataCITester(d, "Oracle")
        with pytest.raises(InvalidArgumentError):
            DataCITester(d, "TestWise", alpha=1.5)

    def test_heuristic_uses_more_rows_than_wrapper(self):
        _, d, _ = generate(GenConfig(p=10), 300, "MNAR", np.random.default_rng(14))
        h, w = DataCITester(d, "Heuristic"), DataCITester(d, "Wrapper")
        for i, j in itertools.combinations(range(d.p), 2):
            for W in subsets([v for v in range(d.p) if v not in (i, j)], 1):
                h.decide(i, j, W)
                w.decide(i, j, W)
        assert mean_effective_n(h.log) >= mean_effective_n(w.log)

    def test_log_round_trip(self, tmp_path):
        _, d, _ = generate(GenConfig(p=12, n_latent_confounders=(0, 1)), 200, "MNAR", np.random.default_rng(15))
        t = make_tester(d, "Wrapper")
        for i, j in itertools.combinations(range(4), 2):
            t.decide(i, j, [k for k in range(4, 6)])
        write_log(t.log, tmp_path / "log.csv")
        assert read_log(tmp_path / "log.csv") == t.log


class TestOracleTester:
    def test_selection_per_strategy(self):
        sys = generated_system(3, 10)
        obs = sys.observed
        lw = OracleCITester(sys, "ListWise")
        tw = OracleCITester(sys, "TestWise")
        for i, j in itertools.combinations(range(len(obs)), 2):
            oi, oj = obs[i], obs[j]
            assert lw.independent(i, j) == oracle_ci(sys, oi, oj, [], sys.listwise_selection)
            assert tw.independent(i, j) == oracle_ci(sys, oi, oj, [], sys.selection_for([oi, oj]))

    def test_wrapper_logs_confirmation(self):
        sys = generated_system(4, 10)
        t = OracleCITester(sys, "Wrapper")
        for i, j in itertools.combinations(range(t.p), 2):
            d = t.decide(i, j)
            assert d.effective_n is None and d.p_value is None
        n_indep_first = sum(e.strategy is Strategy.LISTWISE for e in t.log)
        assert len(t.log) == len(t.primary_log()) + n_indep_first

    def test_mcar_heuristic_equals_selection_oracle(self):
        for seed in range(40):
            sys = generated_system(seed, 9, "MCAR")
            h = OracleCITester(sys, "Heuristic")
            s = OracleCITester(sys, "Oracle")
            for i, j in itertools.combinations(range(h.p), 2):
                for W in subsets([v for v in range(h.p) if v not in (i, j)], 2):
                    assert h.independent(i, j, W) == s.independent(i, j, W)


def test_large_sample_agrees_with_oracle():
    agree = total = 0
    for seed in range(3):
        rng = np.random.default_rng(100 + seed)
        cfg = GenConfig(p=7, expected_neighbors=2.0)
        model = generate_dag(cfg, rng)
        d = sample_sem(model, 50_000, rng)
        sys = CausalSystem(model.dag(), (Role.OBSERVED,) * cfg.p)
        data_t = DataCITester(d, "TestWise")
        oracle = OracleCITester(sys, "Oracle")
        for i, j in itertools.combinations(range(cfg.p), 2):
            for W in subsets([v for v in range(cfg.p) if v not in (i, j)], 2):
                total += 1
                agree += data_t.independent(i, j, W) == oracle.independent(i, j, W)
    assert agree / total >= 0.95


def test_decision_is_frozen():
    d = CIDecision(0, 1, (), Strategy.TESTWISE, 10, 0.5, True)
    with pytest.raises(AttributeError):
        d.independent = False
