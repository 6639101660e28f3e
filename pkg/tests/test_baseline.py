
import numpy as np
import pytest

from bayal.baseline import AdslConfig, adsl_candidates, adsl_select, run_adsl
from bayal.data import SyntheticSpec, elicit_priors, generate_synthetic
from bayal.design import EngineConfig
from bayal.model import BetaVector, augment, boundary_distance, predict_prob_beta
from bayal.pool import Pool


def det_info(beta, X):
    F = predict_prob_beta(beta, X)
    Xt = augment(X)
    return np.linalg.det((Xt * (F * (1 - F))[:, None]).T @ Xt)


def test_config_validation():
    with pytest.raises(ValueError):
        AdslConfig(k0=0)
    with pytest.raises(ValueError):
        AdslConfig(estimator="ols")
    c = AdslConfig.coupled(0.8)
    assert c.omega == c.gamma == 0.8


class TestCandidates:
    def test_k0_exceeds_pool(self):
        pool = Pool(np.random.default_rng(0).normal(size=(5, 2)), np.zeros(5), labeled_idx=[1])
        assert sorted(adsl_candidates(BetaVector(0, [1, 1]), pool, 0.5, 20).tolist()) == [0, 2, 3, 4]

    def test_equidistant_ties_by_index(self):
        X = np.column_stack([np.ones(6), np.arange(6.0)])
        pool = Pool(X, np.zeros(6))
        np.testing.assert_array_equal(adsl_candidates(BetaVector(0, [1, 0]), pool, 0.5, 3), [0, 1, 2])

    def test_axis_aligned_orders_by_abs_x1(self):
        X = np.array([[2.5, 0.0], [-0.5, 3.0], [1.0, -1.0], [-3.0, 0.5], [0.1, 9.0], [-1.5, 0.0]])
        pool = Pool(X, np.zeros(6))
        np.testing.assert_array_equal(adsl_candidates(BetaVector(0, [1, 0]), pool, 0.5, 6), np.argsort(np.abs(X[:, 0])))

    def test_prefix_of_sorted_list(self):
        rng = np.random.default_rng(4)
        pool = Pool(rng.normal(size=(30, 2)), np.zeros(30), labeled_idx=[2, 7])
        beta = BetaVector(0.3, [0.4, 1.2])
        full = adsl_candidates(beta, pool, 0.6, 28)
        for k in (1, 5, 20):
            np.testing.assert_array_equal(adsl_candidates(beta, pool, 0.6, k), full[:k])
        d = boundary_distance(beta, 0.6, pool.features[full])
        assert np.all(np.diff(d) >= 0)


class TestSelect:
    def test_single_candidate(self):
        pool = Pool(np.random.default_rng(0).normal(size=(5, 2)), np.zeros(5), labeled_idx=[0, 1, 2])
        assert adsl_select(BetaVector(0, [1, 1]), pool, [4])[0] == 4

    def test_singular_falls_back_to_nearest(self):
        pool = Pool(np.random.default_rng(0).normal(size=(5, 2)), np.zeros(5))
        idx, crit = adsl_select(BetaVector(0, [1, 1]), pool, [3, 1, 2])
        assert idx == 3 and crit == -np.inf

    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            X = rng.normal(size=(8, 2))
            labeled = rng.choice(8, 3, replace=False).tolist()
            pool = Pool(X, np.zeros(8), labeled_idx=labeled)
            beta = BetaVector(rng.normal(), rng.uniform(0.2, 2, 2))
            cands = adsl_candidates(beta, pool, 0.5, 5)
            idx, _ = adsl_select(beta, pool, cands)
            dets = [det_info(beta, X[labeled + [c]]) for c in cands]
            assert idx == cands[int(np.argmax(dets))]


class TestRun:
    def setup_method(self):
        self.pool = generate_synthetic(SyntheticSpec(seed=2))
        self.prior = elicit_priors(self.pool)

    def test_budget_zero(self):
        assert run_adsl(self.pool, AdslConfig(), 0, seed=0, prior=self.prior).records == []

    def test_completes_and_is_deterministic(self):
        eng = EngineConfig(M_prior=100)
        a = run_adsl(self.pool, AdslConfig(), 30, seed=1, prior=self.prior, engine=eng)
        b = run_adsl(self.pool, AdslConfig(), 30, seed=1, prior=self.prior, engine=eng)
        assert len(a.records) == 30
        assert [r.chosen_idx for r in a.records] == [r.chosen_idx for r in b.records]
        assert all(r.k_n == 20 for r in a.records)
        assert len(set(r.chosen_idx for r in a.records)) == 30

    def test_map_estimator_switch(self):
        a = run_adsl(self.pool, AdslConfig(estimator="map"), 5, seed=1, prior=self.prior)
        assert len(a.records) == 5

    def test_requires_prior(self):
        with pytest.raises(ValueError):
            run_adsl(self.pool, AdslConfig(), 3, seed=0)
