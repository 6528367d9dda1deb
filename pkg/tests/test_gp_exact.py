import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from loggpctl import gp_exact
from loggpctl.gp_exact import Hyperparameters
from loggpctl.validation import NumericError


def dense_kernel(A, B, hp):
    # independent oracle: explicit double loop over the SE formula
    K = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            K[i, j] = hp.sigma_f**2 * math.exp(-0.5 * np.sum(((a - b) / hp.lengthscales) ** 2))
    return K


def dense_posterior(X, y, hp, x):
    # the model folds a diagonal jitter of 1e-8 sigma_f^2 into its factor
    Kn = dense_kernel(X, X, hp) + (hp.sigma_on**2 + 1e-8 * hp.sigma_f**2) * np.eye(len(X))
    k = dense_kernel(X, x[None], hp)[:, 0]
    mean = k @ np.linalg.solve(Kn, y)
    var = hp.sigma_f**2 - k @ np.linalg.solve(Kn, k)
    return mean, var


def random_problem(rng, n, rho):
    X = rng.normal(size=(n, rho))
    y = np.sin(X.sum(axis=1)) + 0.1 * rng.normal(size=n)
    hp = Hyperparameters(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0, rho), rng.uniform(0.05, 0.5))
    return X, y, hp


# -- kernel ------------------------------------------------------------------

def test_kernel_same_point_gives_signal_variance():
    hp = Hyperparameters(2.0, np.ones(3), 0.1)
    a = np.array([0.3, -1.0, 4.0])
    assert gp_exact.kernel_eval(a, a, hp) == pytest.approx(4.0)


def test_kernel_hand_values():
    assert gp_exact.kernel_eval([0.0], [math.sqrt(2)], Hyperparameters(1.0, [1.0], 0.1)) \
        == pytest.approx(math.exp(-1), rel=1e-12)
    hp = Hyperparameters(1.0, [1.0, 2.0], 0.1)
    assert gp_exact.kernel_eval([0.0, 0.0], [1.0, 2.0], hp) == pytest.approx(math.exp(-1), rel=1e-12)


def test_kernel_dimension_mismatch():
    with pytest.raises(ValueError):
        gp_exact.kernel_eval([0.0, 1.0], [0.0], Hyperparameters(1.0, [1.0, 1.0], 0.1))


@given(arrays(float, 3, elements=st.floats(-50, 50)), arrays(float, 3, elements=st.floats(-50, 50)))
def test_kernel_symmetric_and_bounded(a, b):
    hp = Hyperparameters(1.5, [0.7, 2.0, 1.0], 0.1)
    kab, kba = gp_exact.kernel_eval(a, b, hp), gp_exact.kernel_eval(b, a, hp)
    assert kab == kba
    assert 0.0 <= kab <= 1.5**2


def test_kernel_matrix_small_cases(rng):
    hp = Hyperparameters(1.3, np.ones(2), 0.1)
    assert gp_exact.kernel_matrix(np.zeros((0, 2)), hp).shape == (0, 0)
    assert gp_exact.kernel_matrix(np.zeros((1, 2)), hp) == pytest.approx(np.array([[1.69]]))
    X = rng.normal(size=(2, 2))
    K = gp_exact.kernel_matrix(X, hp)
    assert K[0, 1] == pytest.approx(gp_exact.kernel_eval(X[0], X[1], hp), rel=1e-12)


def test_kernel_matrix_matches_dense_oracle(rng):
    X, _, hp = random_problem(rng, 15, 4)
    np.testing.assert_allclose(gp_exact.kernel_matrix(X, hp), dense_kernel(X, X, hp), rtol=1e-12, atol=1e-14)


# -- likelihood ----------------------------------------------------------------

def test_likelihood_scalar_closed_forms():
    hp = Hyperparameters(1.2, [1.0], 0.3)
    got = gp_exact.log_marginal_likelihood([[0.0]], [0.0], hp)
    var = 1.2**2 + 0.3**2 + 1e-8 * 1.2**2
    assert got == pytest.approx(-0.5 * math.log(var) - 0.5 * math.log(2 * math.pi), rel=1e-12)
    # sigma_on -> 0 leaves only the jitter
    hp0 = Hyperparameters(1.0, [1.0], 1e-12)
    got = gp_exact.log_marginal_likelihood([[0.0]], [1.0], hp0)
    assert got == pytest.approx(-0.5 - 0.5 * math.log(2 * math.pi), abs=1e-6)


def test_likelihood_matches_dense_oracle(rng):
    X, y, hp = random_problem(rng, 20, 3)
    Kn = dense_kernel(X, X, hp) + (hp.sigma_on**2 + 1e-8 * hp.sigma_f**2) * np.eye(20)
    sign, logdet = np.linalg.slogdet(Kn)
    want = -0.5 * y @ np.linalg.solve(Kn, y) - 0.5 * logdet - 10 * math.log(2 * math.pi)
    assert gp_exact.log_marginal_likelihood(X, y, hp) == pytest.approx(want, rel=1e-10)


@given(st.floats(1.01, 10.0))
def test_likelihood_decreases_with_target_scale(scale):
    rng = np.random.default_rng(3)
    X, y, hp = random_problem(rng, 8, 2)
    assert gp_exact.log_marginal_likelihood(X, scale * y, hp) < gp_exact.log_marginal_likelihood(X, y, hp)


def test_likelihood_empty_model_rejected():
    with pytest.raises(ValueError):
        gp_exact.model_log_likelihood(gp_exact.factorize(np.zeros((0, 1)), [], Hyperparameters(1.0, [1.0], 0.1)))


# -- gradient ------------------------------------------------------------------

def fd_gradient(X, y, hp, h=1e-5):
    theta = hp.to_vector()
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h * theta[i]
        up = gp_exact.log_marginal_likelihood(X, y, Hyperparameters.from_vector(theta + e))
        dn = gp_exact.log_marginal_likelihood(X, y, Hyperparameters.from_vector(theta - e))
        out[i] = (up - dn) / (2 * e[i])
    return out


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X, y, hp = random_problem(rng, 20, 3)
    g = gp_exact.log_likelihood_gradient(X, y, hp)
    fd = fd_gradient(X, y, hp)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8)


def test_gradient_scalar_sigma_f_component():
    # N=1, y=0: d/dsigma_f = -0.5 * tr(Kinv dK) = -sigma_f (1 + 1e-8) / (sigma_f^2 (1 + 1e-8) + sigma_on^2)
    sf, sn = 1.3, 0.4
    g = gp_exact.log_likelihood_gradient([[0.0]], [0.0], Hyperparameters(sf, [1.0], sn))
    want = -sf * (1 + 1e-8) / (sf**2 * (1 + 1e-8) + sn**2)
    assert g[0] == pytest.approx(want, rel=1e-10)
    assert g[0] < 0


def test_gradient_permutation_invariant(rng):
    X = np.array([[-1.0, 0.3], [1.0, 0.3], [-2.0, -0.5], [2.0, -0.5]])
    y = np.array([0.5, 0.5, -1.0, -1.0])
    hp = Hyperparameters(1.0, [0.8, 1.2], 0.2)
    perm = rng.permutation(4)
    g1 = gp_exact.log_likelihood_gradient(X, y, hp)
    g2 = gp_exact.log_likelihood_gradient(X[perm], y[perm], hp)
    np.testing.assert_allclose(g1, g2, rtol=1e-10)


# -- posterior ---------------------------------------------------------------

def test_posterior_interpolates_single_point():
    hp = Hyperparameters(1.0, [1.0, 1.0], 1e-9)
    m = gp_exact.factorize([[0.2, 0.4]], [1.7], hp)
    mean, var = gp_exact.posterior(m, [0.2, 0.4])
    assert mean == pytest.approx(1.7, abs=1e-6)
    assert var == pytest.approx(0.0, abs=1e-6)


def test_posterior_reverts_to_prior_far_away(rng):
    X, y, hp = random_problem(rng, 10, 2)
    m = gp_exact.factorize(X, y, hp)
    far = X.max(axis=0) + 10 * hp.lengthscales.max() + 10
    mean, var = gp_exact.posterior(m, far)
    assert abs(mean) < 1e-6
    assert var == pytest.approx(hp.sigma_f**2, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_posterior_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    X, y, hp = random_problem(rng, 10, 3)
    m = gp_exact.factorize(X, y, hp)
    for x in rng.normal(size=(20, 3)):
        mean, var = gp_exact.posterior(m, x)
        want_mean, want_var = dense_posterior(X, y, hp, x)
        assert mean == pytest.approx(want_mean, abs=1e-8)
        assert var == pytest.approx(max(want_var, 0.0), abs=1e-8)
        assert gp_exact.posterior_mean(m, x) == pytest.approx(mean, abs=1e-14)


@given(st.integers(1, 25), st.integers(0, 10_000))
def test_posterior_variance_bounds(n, seed):
    rng = np.random.default_rng(seed)
    X, y, hp = random_problem(rng, n, 2)
    m = gp_exact.factorize(X, y, hp)
    for x in np.vstack([X[:3], rng.normal(size=(3, 2))]):
        _, var = gp_exact.posterior(m, x)
        assert 0.0 <= var <= hp.sigma_f**2
    for x in X:
        assert gp_exact.posterior(m, x)[1] <= hp.sigma_on**2 + 1e-8


# -- factorization -------------------------------------------------------------

@given(st.integers(1, 60), st.integers(0, 10_000))
def test_factor_reconstructs_noisy_kernel(n, seed):
    rng = np.random.default_rng(seed)
    X, y, hp = random_problem(rng, n, 3)
    m = gp_exact.factorize(X, y, hp)
    A = dense_kernel(X, X, hp) + (hp.sigma_on**2 + m.jitter) * np.eye(n)
    assert np.max(np.abs(m.factor @ m.factor.T - A)) < 1e-8 * n


def test_factorize_length_mismatch():
    with pytest.raises(ValueError):
        gp_exact.factorize(np.zeros((3, 1)), np.zeros(2), Hyperparameters(1.0, [1.0], 0.1))


def test_jitter_retry_and_failure():
    # duplicated inputs with no noise: the first jitter level may fail, the retry must not
    hp = Hyperparameters(1.0, [1.0], 1e-12)
    X = np.zeros((30, 1))
    m = gp_exact.factorize(X, np.ones(30), hp)
    assert m.jitter in (1e-8, 1e-6)
    # a kernel that is not PSD at all cannot be rescued
    with pytest.raises(NumericError) as info:
        gp_exact._noisy_factor(-np.eye(3), hp)
    assert info.value.minor == 1


def test_insert_into_empty_model():
    hp = Hyperparameters(1.5, [1.0], 0.2)
    m = gp_exact.insert_point(gp_exact.factorize(np.zeros((0, 1)), [], hp), [0.0], 2.0)
    assert m.factor.shape == (1, 1)
    assert m.factor[0, 0] == pytest.approx(math.sqrt(1.5**2 + 0.2**2), rel=1e-7)


def test_sequential_inserts_match_batch(rng):
    X, y, hp = random_problem(rng, 50, 4)
    m = gp_exact.factorize(np.zeros((0, 4)), [], hp)
    for xi, yi in zip(X, y):
        m = gp_exact.insert_point(m, xi, yi)
    batch = gp_exact.factorize(X, y, hp)
    np.testing.assert_allclose(m.factor, batch.factor, atol=1e-8, rtol=0)
    np.testing.assert_allclose(m.alpha, batch.alpha, atol=1e-8, rtol=0)


def test_insert_reduces_variance(rng):
    X, y, hp = random_problem(rng, 10, 2)
    m = gp_exact.factorize(X, y, hp)
    x = np.array([3.0, -3.0])
    before = gp_exact.posterior(m, x)[1]
    after = gp_exact.posterior(gp_exact.insert_point(m, x, 0.0), x)[1]
    assert after < before


def test_insertion_order_invariance(rng):
    X, y, hp = random_problem(rng, 25, 3)
    perm = rng.permutation(25)
    a = gp_exact.factorize(np.zeros((0, 3)), [], hp)
    b = gp_exact.factorize(np.zeros((0, 3)), [], hp)
    for i in range(25):
        a = gp_exact.insert_point(a, X[i], y[i])
        b = gp_exact.insert_point(b, X[perm[i]], y[perm[i]])
    for x in rng.normal(size=(10, 3)):
        assert gp_exact.posterior(a, x)[0] == pytest.approx(gp_exact.posterior(b, x)[0], abs=1e-6)


def test_refresh_same_hyper_is_noop(rng):
    X, y, hp = random_problem(rng, 20, 2)
    m = gp_exact.factorize(X, y, hp)
    r = gp_exact.refresh_factorization(m, hp)
    np.testing.assert_allclose(r.factor, m.factor, atol=1e-12)
    np.testing.assert_allclose(r.alpha, m.alpha, atol=1e-12)


def test_refresh_new_hyper_matches_dense_oracle(rng):
    X, y, hp = random_problem(rng, 12, 2)
    new = Hyperparameters(0.8, [0.4, 1.7], 0.3)
    m = gp_exact.refresh_factorization(gp_exact.factorize(X, y, hp), new)
    for x in rng.normal(size=(5, 2)):
        assert gp_exact.posterior(m, x)[0] == pytest.approx(dense_posterior(X, y, new, x)[0], abs=1e-8)


def test_refresh_empty_model():
    hp = Hyperparameters(1.0, [1.0], 0.1)
    m = gp_exact.refresh_factorization(gp_exact.factorize(np.zeros((0, 1)), [], hp), hp)
    assert m.n_points == 0
    assert gp_exact.posterior_mean(m, [0.0]) == 0.0


def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        Hyperparameters(-1.0, [1.0], 0.1)
    with pytest.raises(ValueError):
        Hyperparameters(1.0, [0.0], 0.1)
    hp = Hyperparameters(1.0, [2.0, 3.0], 0.5)
    assert Hyperparameters.from_vector(hp.to_vector()) == hp
