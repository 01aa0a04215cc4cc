import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from rcdlmc.potentials import (
    GlmDataset,
    NoClosedForm,
    Potential,
    _cosine_noise,
    analytic_moment,
    make_double_gaussian,
    make_glm_posterior,
    make_isotropic_gaussian,
    synth_glm_data,
)

from .conftest import all_targets


def central_difference(p, x, i, eta=1e-5):
    e = np.zeros_like(x)
    e[i] = eta
    return (p.value(x + e) - p.value(x - e)) / (2 * eta)


# -- isotropic Gaussian ----------------------------------------------------------


def test_gaussian_examples():
    p = make_isotropic_gaussian(2)
    x = np.array([3.0, 4.0])
    assert p.value(x) == 12.5
    np.testing.assert_array_equal(p.grad(x), [3.0, 4.0])
    assert (p.mu, p.lip_grad, p.lip_hess) == (1.0, 1.0, 0.0)
    c = np.array([0.5, -1.0, 2.0])
    q = make_isotropic_gaussian(3, c)
    assert q.value(c) == 0.0
    np.testing.assert_array_equal(q.grad(c), 0.0)


def test_example1_target():
    p = make_isotropic_gaussian(1000)
    assert p.d == 1000 and p.kappa == 1.0


def test_zero_dimension_rejected():
    with pytest.raises(ValueError):
        make_isotropic_gaussian(0)


def test_lipschitz_below_mu_rejected():
    with pytest.raises(ValueError):
        Potential(3, mu=2.0, lip_grad=1.0)


# -- mixture -----------------------------------------------------------------


def test_mixture_symmetry_point():
    p = make_double_gaussian(5, 2.0)
    np.testing.assert_array_equal(p.grad(np.zeros(5)), 0.0)
    assert p.mu is None and p.lip_grad is None


def test_mixture_tanh_limit():
    p = make_double_gaussian(4, 2.0)
    x = np.full(4, 5.0)  # sum 20
    g = p.grad(x)
    np.testing.assert_allclose(g, x - 2.0, atol=1e-12)
    for i in range(4):
        assert abs(central_difference(p, x, i) - (x[i] - 2.0)) < 1e-6


def test_mixture_partial_example():
    p = make_double_gaussian(3, 2.0)
    x = np.array([0.1, 0.1, 0.1])
    want = 0.1 - 2.0 * math.tanh(0.6)
    assert p.partial(x, 0) == pytest.approx(want, abs=1e-15)
    assert abs(central_difference(p, x, 0) - want) < 1e-8


def test_mixture_value_is_the_log_of_the_two_gaussians():
    p = make_double_gaussian(3, 1.5)
    x = np.array([0.3, -0.2, 0.9])
    a = 1.5
    dens = math.exp(-np.sum((x - a) ** 2) / 2) + math.exp(-np.sum((x + a) ** 2) / 2)
    # constant d a^2 / 2 is dropped
    assert p.value(x) == pytest.approx(-math.log(dens) - 3 * a * a / 2, rel=1e-12)


# -- GLM -------------------------------------------------------------------


def test_glm_prior_only_limit():
    data = GlmDataset(np.zeros((1, 4)), np.zeros(1))
    p = make_glm_posterior(data)
    x = np.array([1.0, -2.0, 0.5, 3.0])
    np.testing.assert_array_equal(p.grad(x), x)


def test_glm_single_datum_at_origin():
    data = GlmDataset(np.array([[1.0, 0.0, 0.0]]), np.array([0.0]))
    p = make_glm_posterior(data)
    np.testing.assert_array_equal(p.grad(np.zeros(3)), 0.0)


def test_glm_empty_rejected():
    with pytest.raises(ValueError):
        make_glm_posterior(GlmDataset(np.zeros((0, 3)), np.zeros(0)))


def test_glm_dimension_mismatch(glm10):
    with pytest.raises(ValueError):
        glm10.grad(np.zeros(9))


def test_cosine_link_derivatives():
    # g(η) = (η² + cos η)/2, g'(η) = (2η − sin η)/2, g'' = (2 − cos η)/2
    data = GlmDataset(np.array([[1.0]]), np.array([0.0]), "cosine_perturbed")
    p = make_glm_posterior(data)
    for b in np.linspace(-3, 3, 13):
        # f(x) = x²/2 + g(b − x); ∂f = x − g'(b − x)
        x = np.array([0.4])
        eta = b - 0.4
        p.data.responses[0] = b
        p._b = p.data.responses
        assert p.partial(x, 0) == pytest.approx(0.4 - (2 * eta - math.sin(eta)) / 2, abs=1e-14)
        assert abs(central_difference(p, x, 0) - p.partial(x, 0)) < 1e-8
        second = (2 - math.cos(eta)) / 2
        assert 0.5 <= second <= 1.5


def test_glm_lipschitz_from_power_iteration(glm10):
    A = glm10.data.features
    lam = np.linalg.eigvalsh(A.T @ A).max()
    assert glm10.lip_grad == pytest.approx(1 + lam, rel=1e-7)
    assert glm10.mu == 1.0


def test_glm_gaussian_hessian_bounded_below(glm10, rng):
    # Hessian is I + AᵀA; probe with finite differences of the gradient
    for _ in range(5):
        x = rng.standard_normal(10)
        H = np.empty((10, 10))
        for j in range(10):
            e = np.zeros(10)
            e[j] = 1e-5
            H[:, j] = (glm10.grad(x + e) - glm10.grad(x - e)) / 2e-5
        assert np.linalg.eigvalsh((H + H.T) / 2).min() >= 1 - 1e-6


def test_glm_posterior_gaussian_matches_normal_equations(glm10):
    mean, cov = glm10.posterior_gaussian()
    # the mean is the minimiser of f
    np.testing.assert_allclose(glm10.grad(mean), 0.0, atol=1e-10)
    A = glm10.data.features
    np.testing.assert_allclose(np.linalg.inv(cov), np.eye(10) + A.T @ A, rtol=1e-10, atol=1e-10)


def test_synth_data_paper_sizes():
    data = synth_glm_data(100, 100, x_true=1.0, seed=0)
    assert data.features.shape == (100, 100) and data.responses.shape == (100,)
    again = synth_glm_data(100, 100, x_true=1.0, seed=0)
    np.testing.assert_array_equal(data.features, again.features)
    np.testing.assert_array_equal(data.responses, again.responses)


def test_synth_data_noise_off_hook():
    data = synth_glm_data(5, 30, x_true=np.arange(5.0), seed=3, noise_scale=0.0)
    np.testing.assert_array_equal(data.responses, data.features @ np.arange(5.0))


def test_synth_data_count_checked():
    with pytest.raises(ValueError):
        synth_glm_data(3, 0)


def test_cosine_rejection_sampler_matches_quadrature():
    dens = lambda t: math.exp(-(t * t + math.cos(t)) / 2)
    Z = integrate.quad(dens, -np.inf, np.inf)[0]
    want = integrate.quad(lambda t: math.cos(t) * dens(t), -np.inf, np.inf)[0] / Z
    eta = _cosine_noise(np.random.default_rng(7), 1_000_000)
    c = np.cos(eta)
    se = c.std() / math.sqrt(c.size)
    assert abs(c.mean() - want) < 4 * se


# -- moments ---------------------------------------------------------------


def test_analytic_moments():
    assert analytic_moment("gaussian", "x1_squared") == 1.0
    assert analytic_moment("gaussian", "first10_squared") == 10.0
    assert analytic_moment("mixture", "x1_squared", offset=2.0) == 5.0
    assert analytic_moment("gaussian", "mean_square", center=0.125, d=4) == pytest.approx(1 + 1 / 64)


def test_mixture_moment_by_quadrature():
    # the x_1 marginal is the equal mixture of N(±2, 1)
    phi = lambda t: 0.5 * (math.exp(-((t - 2) ** 2) / 2) + math.exp(-((t + 2) ** 2) / 2)) / math.sqrt(2 * math.pi)
    val = integrate.quad(lambda t: t * t * phi(t), -np.inf, np.inf)[0]
    assert analytic_moment("mixture", "x1_squared", offset=2.0) == pytest.approx(val, rel=1e-10)


def test_unsupported_moment(glm_cos10):
    with pytest.raises(NoClosedForm):
        analytic_moment("glm", "x1_squared", potential=glm_cos10)
    with pytest.raises(NoClosedForm):
        analytic_moment("banana", "x1_squared")


# -- properties --------------------------------------------------------------

TARGETS = all_targets()


@settings(max_examples=100, deadline=None)
@given(
    k=st.integers(0, len(TARGETS) - 1),
    i=st.integers(0, 5),
    x=st.lists(st.floats(-3, 3), min_size=6, max_size=6),
)
def test_partial_matches_finite_difference(k, i, x):
    p = TARGETS[k]
    x = np.array(x)
    g = p.partial(x, i)
    assert abs(g - central_difference(p, x, i)) <= 1e-6 * (1 + abs(g))


@settings(max_examples=50, deadline=None)
@given(k=st.integers(0, len(TARGETS) - 1), seed=st.integers(0, 2**32 - 1))
def test_gradient_equals_stacked_partials_bitwise(k, seed):
    p = TARGETS[k]
    X = np.random.default_rng(seed).standard_normal((3, 6))
    G = p.grad(X)
    for j in range(6):
        np.testing.assert_array_equal(G[:, j], p.partial(X, np.full(3, j)))
    np.testing.assert_array_equal(G, Potential._grad(p, X))


def test_counter_exactness(glm10):
    x = np.ones(10)
    before = glm10.evals.value
    for j in range(10):
        glm10.partial(x, j)
    assert glm10.evals.value - before == 10
    glm10.grad(x)
    assert glm10.evals.value - before == 20
    glm10.partial(np.ones((7, 10)), np.arange(7))
    assert glm10.evals.value - before == 27
    glm10.value(x)
    assert glm10.evals.value - before == 27


def test_counter_is_monotone_and_thread_safe():
    from concurrent.futures import ThreadPoolExecutor

    p = make_isotropic_gaussian(3)
    with ThreadPoolExecutor(4) as pool:
        list(pool.map(lambda _: [p.partial(np.zeros(3), 1) for _ in range(500)], range(8)))
    assert p.evals.value == 4000
    with pytest.raises(ValueError):
        p.evals.add(-1)


def test_partial_index_range():
    p = make_isotropic_gaussian(3)
    with pytest.raises(IndexError):
        p.partial(np.zeros(3), 3)
