import itertools
import math

import numpy as np
import pytest
from scipy import integrate, stats

from qaclust.energy import MoGNIWModel, NIWPrior, SquaredLossModel, check_dataset, niw_log_marginal
from qaclust.sampler import gibbs_probabilities


def _quadrature_log_marginal(x, mu0, kappa0, nu0, lam0):
    """log p(x) for 1-D points, integrating the mean and variance numerically."""
    x = np.asarray(x, dtype=np.float64)
    a, b = nu0 / 2, lam0 / 2

    def integrand(mu, log_var):
        var = math.exp(log_var)
        sd = math.sqrt(var)
        like = np.prod(stats.norm.pdf(x, mu, sd))
        prior_mu = stats.norm.pdf(mu, mu0, math.sqrt(var / kappa0))
        prior_var = stats.invgamma.pdf(var, a, scale=b)
        return like * prior_mu * prior_var * var  # Jacobian of var = exp(log_var)

    val, _ = integrate.dblquad(integrand, -12, 20, -200, 200, epsabs=0, epsrel=1e-9)
    return math.log(val)


def test_loss_examples():
    X = np.array([0.0, 1.0, 10.0])
    assert SquaredLossModel(X, 2).energy_full([0, 0, 1]) == pytest.approx(0.5, abs=1e-15)
    assert SquaredLossModel(X, 3).energy_full([2, 0, 1]) == 0.0


@pytest.mark.parametrize("x", [[0.3, 1.4], [-2.0, 5.0], [0.0, 0.0]])
def test_niw_marginal_matches_quadrature(x):
    prior = NIWPrior(mu0=[0.5], kappa0=0.7, nu0=3.0, lambda0=[[1.3]])
    closed = niw_log_marginal(np.array(x)[:, None], prior)
    quad = _quadrature_log_marginal(x, 0.5, 0.7, 3.0, 1.3)
    assert closed == pytest.approx(quad, abs=1e-4)
    model = MoGNIWModel(np.array(x)[:, None], 1, prior)
    # one cluster: the Dirichlet-multinomial factor is 1
    assert model.energy_full([0, 0]) == pytest.approx(-quad, abs=1e-4)


def test_dirichlet_multinomial_factor():
    prior = NIWPrior(mu0=[0.0], kappa0=1.0, nu0=2.5, lambda0=[[1.0]], alpha=1.0)
    X = np.array([[0.2], [1.7]])
    model = MoGNIWModel(X, 2, prior)
    single = [niw_log_marginal(X[i : i + 1], prior) for i in range(2)]
    pair = niw_log_marginal(X, prior)
    # sizes (1, 1) have prior mass 1/6 and sizes (2, 0) mass 1/3 per labelling
    assert model.energy_full([0, 1]) == pytest.approx(-(sum(single) + math.log(1 / 6)), abs=1e-12)
    assert model.energy_full([1, 1]) == pytest.approx(-(pair + math.log(1 / 3)), abs=1e-12)


def test_niw_marginal_empty_and_multivariate_consistency(rng):
    prior = NIWPrior.default(rng.normal(size=(10, 3)))
    assert niw_log_marginal(np.empty((0, 3)), prior) == 0.0
    # chain rule: p(x1, x2) = p(x1) p(x2 | x1) must not depend on the order
    pts = rng.normal(size=(4, 3))
    assert niw_log_marginal(pts, prior) == pytest.approx(niw_log_marginal(pts[::-1], prior), rel=1e-12)


def _models(X, k):
    return [SquaredLossModel(X, k), MoGNIWModel(X, k)]


def test_candidate_energies_match_full(rng):
    for d in [1, 2, 3]:
        X = rng.normal(size=(12, d)) * 2
        k = 3
        for model in _models(X, k):
            labels = rng.integers(k, size=12)
            model.reset(labels)
            assert model.energy() == pytest.approx(model.energy_full(labels), abs=1e-9)
            for i in range(12):
                cand = model.candidate_energies(i)
                assert cand[labels[i]] == pytest.approx(model.energy_full(labels), abs=1e-9)
                for c in range(k):
                    lab = labels.copy()
                    lab[i] = c
                    assert cand[c] == pytest.approx(model.energy_full(lab), abs=1e-9)


def test_relabel_round_trip_and_conservation(rng):
    X = rng.normal(size=(15, 2))
    for model in _models(X, 4):
        labels = rng.integers(4, size=15)
        model.reset(labels)
        total_sum = model._sums.sum(axis=0).copy()
        for _ in range(200):
            i, c = int(rng.integers(15)), int(rng.integers(4))
            before = model.labels.copy()
            old = model.labels[i]
            model.relabel_point(i, c)
            model.relabel_point(i, old)
            assert np.array_equal(model.labels, before)
            model.relabel_point(i, c)
            model.check_consistency(atol=1e-12)
            assert model.energy() == pytest.approx(model.energy_full(model.labels), abs=1e-9)
            assert model._counts.sum() == 15
            assert np.allclose(model._sums.sum(axis=0), total_sum, atol=1e-12)
        fresh = type(model)(X, 4).reset(model.labels)
        assert np.allclose(model._sums, fresh._sums, atol=1e-12)


def test_relabel_to_current_label_is_noop(rng):
    X = rng.normal(size=(6, 2))
    for model in _models(X, 2):
        model.reset([0, 1, 0, 1, 1, 0])
        e = model.energy()
        model.relabel_point(2, 0)
        assert model.energy() == e


def test_mog_label_permutation_invariance_is_exact(rng):
    # ties between relabelled partitions must compare equal
    X = rng.normal(size=(9, 2))
    model = MoGNIWModel(X, 3)
    labels = rng.integers(3, size=9)
    e = model.energy_full(labels)
    for perm in itertools.permutations(range(3)):
        assert model.energy_full(np.array(perm)[labels]) == e


def test_loss_label_permutation_invariance_is_exact(rng):
    X = rng.normal(size=(9, 2))
    model = SquaredLossModel(X, 3)
    labels = rng.integers(3, size=9)
    assert model.energy_full(np.array([2, 0, 1])[labels]) == model.energy_full(labels)


def test_loss_nearest_mean_move_descends(rng):
    for _ in range(100):
        X = rng.normal(size=(20, 2))
        model = SquaredLossModel(X, 3)
        labels = rng.integers(3, size=20)
        model.reset(labels)
        i = int(rng.integers(20))
        means = [X[model.labels == c].mean(axis=0) if np.any(model.labels == c) else None for c in range(3)]
        dist = [np.inf if mu is None else np.sum((X[i] - mu) ** 2) for mu in means]
        e = model.energy()
        model.relabel_point(i, int(np.argmin(dist)))
        assert model.energy() <= e + 1e-12


def test_loss_equidistant_point_between_identical_clusters():
    # clusters 0 and 1 hold the same points, so they share a mean
    X = np.array([[-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [0.0, 3.0]])
    model = SquaredLossModel(X, 3).reset([0, 0, 1, 1, 2])
    cand = model.candidate_energies(4)
    assert cand[0] == pytest.approx(cand[1], abs=1e-12)


def test_gibbs_probabilities_proper(rng):
    X = rng.normal(size=(10, 2))
    for model in _models(X, 4):
        model.reset(rng.integers(4, size=10))
        for beta in [0.0, 0.3, 1.0, 50.0, 1e6]:
            p = gibbs_probabilities(-beta * model.candidate_energies(3))
            assert p.min() >= 0 and p.sum() == pytest.approx(1, abs=1e-12)


def test_empty_clusters_are_legal(rng):
    X = rng.normal(size=(5, 2))
    for model in _models(X, 4):
        model.reset([0, 0, 0, 0, 0])
        cand = model.candidate_energies(2)
        assert np.all(np.isfinite(cand))
        model.relabel_point(2, 3)
        model.check_consistency()


def test_prior_validation_and_defaults(rng):
    X = rng.normal(size=(30, 2)) * [1.0, 3.0] + [5.0, -1.0]
    prior = NIWPrior.default(X)
    assert np.allclose(prior.mu0, X.mean(axis=0))
    assert np.allclose(np.diag(prior.lambda0), X.var(axis=0, ddof=1))
    assert prior.nu0 == 4.0 and prior.kappa0 == 0.1 and prior.alpha == 1.0
    bad = [
        dict(mu0=[0, 0], kappa0=1, nu0=3, lambda0=np.eye(3)),
        dict(mu0=[0], kappa0=0, nu0=3, lambda0=[[1]]),
        dict(mu0=[0], kappa0=1, nu0=-0.5, lambda0=[[1]]),
        dict(mu0=[0, 0], kappa0=1, nu0=3, lambda0=[[1, 2], [2, 1]]),
        dict(mu0=[0], kappa0=1, nu0=3, lambda0=[[1]], alpha=0),
    ]
    for kw in bad:
        with pytest.raises(ValueError):
            NIWPrior(**kw)
    with pytest.raises(ValueError):
        MoGNIWModel(X, 2, NIWPrior(mu0=[0], kappa0=1, nu0=3, lambda0=[[1]]))


def test_check_dataset():
    assert check_dataset([1.0, 2.0]).shape == (2, 1)
    for bad in [[[np.nan, 1.0]], [[np.inf]], np.empty((0, 2))]:
        with pytest.raises(ValueError):
            check_dataset(bad)
    with pytest.raises(ValueError):
        SquaredLossModel([[0.0], [1.0]], 2).reset([0, 1, 1])


def test_far_from_origin_data_is_well_conditioned(rng):
    X = rng.normal(size=(20, 2)) + 1e6
    for model in _models(X, 3):
        labels = rng.integers(3, size=20)
        model.reset(labels)
        assert model.energy() == pytest.approx(model.energy_full(labels), abs=1e-6)
