import warnings

import numpy as np
import pytest
from scipy.special import expit

from bayal.data import (
    PAPER_THETA,
    UNEVEN_COUNTS,
    DatasetParseError,
    DegenerateDataError,
    SyntheticSpec,
    elicit_priors,
    export_pool_csv,
    generate_synthetic,
    load_dataset,
    uneven_spec,
)
from bayal.model import predict_prob
from bayal.pool import Pool

from conftest import write_wdbc_file


class TestSynthetic:
    def test_level_ten_example(self):
        # alpha_10 = 0.5 so x2 = (mu - w1 x1) / w2; x1 = 0.5 gives x2 = 0.5
        theta = PAPER_THETA
        x2 = (theta.mu - theta.weights[0] * 0.5) / theta.weights[1]
        assert x2 == pytest.approx(0.5)
        assert predict_prob(theta, np.array([[0.5, 0.5]]))[0] == pytest.approx(0.5)

    @pytest.mark.parametrize("ppl,N", [(5, 95), (10, 190)])
    def test_rows_lie_on_their_levels(self, ppl, N):
        spec = SyntheticSpec(points_per_level=ppl, seed=7)
        pool = generate_synthetic(spec)
        assert pool.N == N == spec.N
        level_probs = np.repeat(np.arange(1, 20) / 20, ppl)
        np.testing.assert_allclose(predict_prob(PAPER_THETA, pool.features), level_probs, atol=1e-12)
        lo = np.repeat(-3.0 + 0.15 * np.arange(19), ppl)
        assert np.all(pool.features[:, 0] >= lo) and np.all(pool.features[:, 0] <= lo + 3.0)
        assert set(np.unique(pool.true_labels)) <= {0, 1}

    def test_deterministic_under_seed(self):
        a = generate_synthetic(SyntheticSpec(seed=11))
        b = generate_synthetic(SyntheticSpec(seed=11))
        c = generate_synthetic(SyntheticSpec(seed=12))
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.true_labels, b.true_labels)
        assert not np.array_equal(a.features, c.features)

    def test_label_frequencies_track_levels(self):
        pool = generate_synthetic(SyntheticSpec(points_per_level=2000, seed=0))
        freq = pool.true_labels.reshape(19, 2000).mean(axis=1)
        np.testing.assert_allclose(freq, np.arange(1, 20) / 20, atol=4 * np.sqrt(0.25 / 2000))

    def test_uneven_fraction_is_one_fifth(self):
        spec = uneven_spec(seed=0)
        probs = spec.probs()
        assert spec.N == 238
        assert float(np.sum(spec.counts() * probs) / spec.N) == pytest.approx(0.2, abs=1e-15)
        assert np.sum(UNEVEN_COUNTS * np.arange(1, 20)) * 5 == UNEVEN_COUNTS.sum() * 20

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            SyntheticSpec(step=0.0)
        with pytest.raises(ValueError):
            SyntheticSpec(level_probs=[0.5])


class TestElicitation:
    def test_examples(self):
        # z = mean of the two features spans [-2, 2]
        X = np.array([[-2.0, -2.0], [0.0, 1.0], [2.0, 2.0]])
        prior = elicit_priors(Pool(X, np.zeros(3)))
        assert prior.mu0 == pytest.approx(0.0)
        assert prior.sigma0 == pytest.approx(4.0 / (2 * np.log(19.0)))
        assert prior.sigma0 == pytest.approx(0.6792, abs=5e-5)
        assert prior.alpha == (1.5, 1.5)
        assert prior.sigma_mu2 == pytest.approx(np.var([-2.0, 0.5, 2.0], ddof=1))

    def test_quantile_identity(self):
        # the elicited prior median puts the pool's extremes at the chosen quantiles
        X = np.random.default_rng(0).normal(size=(40, 3))
        prior = elicit_priors(X)
        z = X.mean(axis=1)
        np.testing.assert_allclose(expit((np.array([z.min(), z.max()]) - prior.mu0) / prior.sigma0), [0.05, 0.95])

    def test_degenerate(self):
        with pytest.raises(DegenerateDataError):
            elicit_priors(np.ones((4, 2)))
        with pytest.raises(ValueError):
            elicit_priors(np.zeros((0, 2)))


class TestLoaders:
    def test_wdbc(self, tmp_path):
        path = write_wdbc_file(tmp_path / "wdbc.data")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pool, meta = load_dataset(path, "wdbc")
        assert (meta.N, meta.p, meta.n_positive) == (569, 30, 212)
        assert not any("expected" in w for w in meta.warnings)
        np.testing.assert_allclose(pool.features.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(pool.features.std(axis=0, ddof=1), 1, atol=1e-12)

    def test_bupa_mapping_and_warnings(self, tmp_path):
        rows = [
            "85,92,45,27,31,0.0,1",
            "85,64,59,32,23,1.0,2",
            "86,54,33,16,54,3.0,2",
            "91,78,34,24,36,0.5,2",
            "87,70,12,28,10,2.0,2",
            "98,55,13,17,17,0.0,1",
        ]
        path = tmp_path / "bupa.data"
        path.write_text("\n".join(rows) + "\n")
        with pytest.warns(UserWarning, match="expected N=345"):
            pool, meta = load_dataset(path, "bupa")
        np.testing.assert_array_equal(pool.true_labels, [0, 1, 1, 1, 1, 0])

    def test_parse_errors_name_the_line(self, tmp_path):
        path = tmp_path / "bad.data"
        path.write_text("85,92,45,27,31,0.0,1\n85,92,45,27,x,0.0,1\n")
        with pytest.raises(DatasetParseError, match="line 2"):
            load_dataset(path, "bupa")
        path.write_text("85,92,45,27,31,0.0,1\n85,92,45\n")
        with pytest.raises(DatasetParseError, match="line 2"):
            load_dataset(path, "bupa")
        path.write_text("85,92,45,27,31,0.0,3\n")
        with pytest.raises(DatasetParseError, match="line 1"):
            load_dataset(path, "bupa")
        with pytest.raises(ValueError):
            load_dataset(path, "iris")

    def test_export_round_trip(self, tmp_path):
        pool = generate_synthetic(SyntheticSpec(seed=1))
        export_pool_csv(pool, tmp_path / "pool.csv")
        data = np.loadtxt(tmp_path / "pool.csv", delimiter=",", skiprows=1)
        np.testing.assert_allclose(data[:, :2], pool.features, rtol=1e-11)
        np.testing.assert_array_equal(data[:, 2], pool.true_labels)
