import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contract_bo.core import ConfigurationError, DesignPoint, encode
from contract_bo.surrogates import (
    Dataset,
    FittedGP,
    GPPosterior,
    KernelSpec,
    NumericalError,
    _cholesky_with_jitter,
    _kernel_and_grads,
    fit,
    kernel_eval,
    kernel_matrix,
    probability_of_feasibility,
    probability_of_feasibility_post,
)
from oracles import gp_direct, matern52_product, se_product

designs = st.builds(DesignPoint, st.floats(0.0, 1.0), st.integers(0, 3))


def random_dataset(rng, n, noise=0.0, max_added=3):
    pts = set()
    while len(pts) < n:
        pts.add(DesignPoint(round(float(rng.uniform()), 3), int(rng.integers(0, max_added + 1))))
    pts = sorted(pts)
    return Dataset(tuple(pts), tuple(rng.normal(size=n)), noise)


class TestKernels:
    def test_se_self_covariance(self):
        assert kernel_eval(KernelSpec(), DesignPoint(0.3, 1), DesignPoint(0.3, 1), 3) == 1.0

    def test_se_unit_offset(self):
        v = kernel_eval(KernelSpec(), DesignPoint(0.0, 0), DesignPoint(1.0, 0))
        assert v == pytest.approx(math.exp(-0.5), abs=1e-15)

    def test_matern_constant(self):
        spec = KernelSpec("matern_product_const", constant_value=2.0)
        assert kernel_eval(spec, DesignPoint(0.4, 2), DesignPoint(0.4, 2), 3) == 2.0

    def test_bad_lengthscale(self):
        with pytest.raises(ConfigurationError):
            KernelSpec(lengthscales=(0.0, 1.0))
        with pytest.raises(ConfigurationError):
            KernelSpec(lengthscales=(-1.0, 1.0))

    @given(designs, designs, st.sampled_from(["se_product", "matern_product_const"]))
    def test_symmetric_exactly(self, x, y, kind):
        spec = KernelSpec(kind, (0.3, 0.7), 1.3, 0.8)
        assert kernel_eval(spec, x, y, 3) == kernel_eval(spec, y, x, 3)

    @given(designs, designs)
    def test_matches_scalar_oracle(self, x, y):
        ls = (0.4, 1.7)
        a, b = encode([x, y], 3)
        se = KernelSpec("se_product", ls, 1.5)
        assert kernel_eval(se, x, y, 3) == pytest.approx(se_product(a, b, ls, 1.5), rel=1e-12)
        m = KernelSpec("matern_product_const", ls, 1.5, 0.6)
        assert kernel_eval(m, x, y, 3) == pytest.approx(matern52_product(a, b, ls, 1.5, 0.6), rel=1e-12)

    @pytest.mark.parametrize("kind", ["se_product", "matern_product_const"])
    def test_gram_psd(self, kind, rng):
        for _ in range(20):
            X = rng.uniform(size=(20, 2))
            ls = tuple(np.exp(rng.uniform(np.log(0.05), np.log(5), 2)))
            K = kernel_matrix(KernelSpec(kind, ls), X, X)
            assert np.linalg.eigvalsh(K).min() >= -1e-8

    @pytest.mark.parametrize("kind", ["se_product", "matern_product_const"])
    def test_lengthscale_gradients(self, kind, rng):
        X = rng.uniform(size=(6, 2))
        spec = KernelSpec(kind, (0.3, 0.9), 1.2, 1.4)
        _, grads = _kernel_and_grads(spec, X)
        h = 1e-6
        for d in range(2):
            ls_p = list(spec.lengthscales)
            ls_m = list(spec.lengthscales)
            ls_p[d] *= math.exp(h)
            ls_m[d] *= math.exp(-h)
            fd = (kernel_matrix(KernelSpec(kind, tuple(ls_p), 1.2, 1.4), X, X)
                  - kernel_matrix(KernelSpec(kind, tuple(ls_m), 1.2, 1.4), X, X)) / (2 * h)
            np.testing.assert_allclose(grads[d], fd, atol=1e-6)


class TestDataset:
    def test_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            Dataset((DesignPoint(0.1, 0),), (1.0, 2.0))

    def test_duplicates_need_noise(self):
        p = DesignPoint(0.1, 0)
        with pytest.raises(ConfigurationError):
            Dataset((p, p), (1.0, 2.0), 0.0)
        Dataset((p, p), (1.0, 2.0), 0.1)


class TestFit:
    def test_empty_is_prior(self):
        spec = KernelSpec("matern_product_const", constant_value=2.0)
        gp = fit(Dataset(), spec)
        post = gp.predict(DesignPoint(0.5, 1))
        assert post.mean == 0.0 and post.variance == 2.0

    def test_noiseless_interpolation(self):
        x0 = DesignPoint(0.2, 1)
        gp = fit(Dataset((x0,), (3.5,)), KernelSpec(), max_added=3)
        post = gp.predict(x0)
        assert post.mean == pytest.approx(3.5, abs=1e-8)
        assert post.variance == pytest.approx(0.0, abs=1e-8)

    def test_two_points_hand_oracle(self):
        a, b, q = DesignPoint(0.1, 0), DesignPoint(0.6, 1), DesignPoint(0.3, 1)
        spec = KernelSpec(lengthscales=(0.5, 0.8))
        gp = fit(Dataset((a, b), (1.0, -2.0), 0.1), spec)
        k = lambda x, y: kernel_eval(spec, x, y)
        K = np.array([[k(a, a) + 0.1, k(a, b)], [k(b, a), k(b, b) + 0.1]])
        det = K[0, 0] * K[1, 1] - K[0, 1] * K[1, 0]
        Kinv = np.array([[K[1, 1], -K[0, 1]], [-K[1, 0], K[0, 0]]]) / det
        ks = np.array([k(a, q), k(b, q)])
        post = gp.predict(q)
        assert post.mean == pytest.approx(ks @ Kinv @ np.array([1.0, -2.0]), abs=1e-8)
        assert post.variance == pytest.approx(k(q, q) - ks @ Kinv @ ks, abs=1e-8)

    def test_five_points_twenty_queries(self, rng):
        spec = KernelSpec(lengthscales=(0.3, 0.6), signal_variance=1.7)
        data = random_dataset(rng, 5, noise=1e-3)
        gp = fit(data, spec, max_added=3)
        queries = [DesignPoint(float(a), int(n)) for a, n in zip(rng.uniform(size=20), rng.integers(0, 4, 20))]
        X = encode(data.points, 3)
        Xq = encode(queries, 3)
        mean, var = gp_direct(lambda u, v: se_product(u, v, spec.lengthscales, 1.7), X, np.array(data.targets), Xq, 1e-3)
        post = gp.predict_many(queries)
        np.testing.assert_allclose(post.mean, mean, atol=1e-8)
        np.testing.assert_allclose(post.variance, var, atol=1e-8)

    def test_variance_below_prior(self, rng):
        for _ in range(20):
            data = random_dataset(rng, int(rng.integers(1, 9)), noise=1e-4)
            gp = fit(data, KernelSpec(lengthscales=(0.2, 0.5)), max_added=3)
            grid = [DesignPoint(a, n) for a in np.linspace(0, 1, 11) for n in range(4)]
            assert np.all(gp.predict_many(grid).variance <= 1.0 + 1e-10)

    def test_observation_shrinks_variance(self, rng):
        data = random_dataset(rng, 4, noise=0.01)
        spec = KernelSpec(lengthscales=(0.3, 0.5))
        x_new = DesignPoint(0.777, 2)
        before = fit(data, spec, max_added=3).predict(x_new).variance
        grown = Dataset(data.points + (x_new,), data.targets + (0.5,), 0.01)
        after = fit(grown, spec, max_added=3).predict(x_new).variance
        assert after <= before

    def test_standardized_prediction_units(self, rng):
        data = random_dataset(rng, 6, noise=1e-6)
        shifted = Dataset(data.points, tuple(1000 + 50 * t for t in data.targets), 1e-6)
        gp = fit(shifted, KernelSpec(lengthscales=(0.3, 0.5)), max_added=3, standardize=True)
        post = gp.predict_many(list(data.points))
        np.testing.assert_allclose(post.mean, shifted.targets, rtol=1e-5)

    def test_hyperparameter_search_improves_lml(self, rng):
        data = random_dataset(rng, 8, noise=1e-4)
        base = fit(data, KernelSpec(), max_added=3)
        tuned = fit(data, KernelSpec(), max_added=3, optimize_hyperparameters=True)
        assert tuned.log_marginal_likelihood() >= base.log_marginal_likelihood() - 1e-9
        assert all(0.05 - 1e-12 <= v <= 5.0 + 1e-12 for v in tuned.spec.lengthscales)

    def test_json_round_trip(self, rng):
        data = random_dataset(rng, 5, noise=1e-3)
        gp = fit(data, KernelSpec("matern_product_const", (0.4, 0.7), 1.1, 0.9), max_added=3, standardize=True)
        again = FittedGP.from_json(gp.to_json())
        q = [DesignPoint(0.25, 1), DesignPoint(0.9, 3)]
        np.testing.assert_array_equal(again.predict_many(q).mean, gp.predict_many(q).mean)
        assert again.to_dict() == gp.to_dict()

    def test_jitter_exhaustion_raises(self):
        with pytest.raises(NumericalError):
            _cholesky_with_jitter(-np.eye(3))

    def test_jitter_rescues_semidefinite(self):
        L = _cholesky_with_jitter(np.ones((3, 3)))
        assert np.all(np.isfinite(L))


class TestProbabilityOfFeasibility:
    def test_at_threshold(self):
        assert probability_of_feasibility_post(GPPosterior(1.5, 1.0), 1.5) == 0.5

    def test_two_sigma(self):
        assert probability_of_feasibility_post(GPPosterior(2.0, 1.0), 0.0) == pytest.approx(0.97725, abs=1e-5)

    def test_degenerate(self):
        assert probability_of_feasibility_post(GPPosterior(-0.1, 0.0), 0.0) == 0.0
        assert probability_of_feasibility_post(GPPosterior(0.0, 0.0), 0.0) == 1.0

    def test_from_fitted_model(self):
        x0 = DesignPoint(0.5, 0)
        gp = fit(Dataset((x0,), (2.0,)), KernelSpec())
        assert probability_of_feasibility(gp, x0, 0.0) == pytest.approx(1.0)
