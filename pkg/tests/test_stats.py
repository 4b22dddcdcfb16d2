"""Distribution fits, densities, and spatial interpolation against oracles."""

import math

import numpy as np
import pytest
import scipy.integrate
from scipy.special import i0e

from fingerloc.errors import NumericError
from fingerloc.geometry import Position, build_uniform_grid
from fingerloc.stats import (
    DEFAULT_LOADING_EPS,
    KAPPA_MAX,
    GammaParams,
    GaussianStats,
    KrigingKernel,
    VonMisesParams,
    fit_gamma,
    fit_gaussian,
    fit_loglinear,
    fit_vonmises,
    gamma_logpdf,
    gaussian_loglik,
    kriging_fit,
    kriging_predict,
    learn_detection_map,
    vonmises_logpdf,
)
from fingerloc.stats import _log_i0  # noqa: F401  (log-Bessel oracle check)


# ---------------------------------------------------------------------------
# complex Gaussian
# ---------------------------------------------------------------------------

def test_fit_gaussian_two_point_hand_case():
    stats = fit_gaussian([[1.0 + 0j], [-1.0 + 0j]])
    assert stats.mean[0] == 0.0
    # biased scatter of {1, -1} about 0 is 1; loading adds eps * trace / dim
    assert stats.cov[0, 0] == pytest.approx(1.0 + DEFAULT_LOADING_EPS, rel=1e-12)
    assert stats.loading == pytest.approx(DEFAULT_LOADING_EPS, rel=1e-12)


def test_fit_gaussian_zero_scatter_still_loads():
    stats = fit_gaussian([[2.0 + 1j], [2.0 + 1j]])
    assert stats.loading == DEFAULT_LOADING_EPS
    assert stats.cov[0, 0] == pytest.approx(DEFAULT_LOADING_EPS)


def test_fit_gaussian_matches_direct_formula():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n, d = int(rng.integers(2, 12)), int(rng.integers(1, 5))
        samples = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
        stats = fit_gaussian(samples, loading_eps=1e-4)
        mean = samples.mean(axis=0)
        centered = samples - mean
        scatter = centered.T @ centered.conj() / n
        scatter = (scatter + scatter.conj().T) / 2
        loading = 1e-4 * float(np.trace(scatter).real) / d
        assert np.allclose(stats.mean, mean, atol=1e-15)
        assert np.allclose(stats.cov, scatter + loading * np.eye(d), atol=1e-15)


def test_gaussian_loglik_scalar_hand_case():
    # d = 1, R = 2, |f - m|^2 = 1: -ln(pi) - ln(2) - 1/2
    stats = GaussianStats(mean=np.array([0.0 + 0j]), cov=np.array([[2.0 + 0j]]),
                          loading=0.0)
    got = gaussian_loglik(np.array([1.0 + 0j]), stats)
    assert got == pytest.approx(-math.log(math.pi) - math.log(2.0) - 0.5, abs=1e-12)


def test_gaussian_loglik_matches_dense_solve_oracle():
    rng = np.random.default_rng(19)
    for _ in range(25):
        d = int(rng.integers(1, 6))
        samples = rng.standard_normal((d + 3, d)) + 1j * rng.standard_normal((d + 3, d))
        stats = fit_gaussian(samples)
        f = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        sign, logdet = np.linalg.slogdet(stats.cov)
        delta = f - stats.mean
        quad = float(np.real(delta.conj() @ np.linalg.solve(stats.cov, delta)))
        want = -d * math.log(math.pi) - float(logdet) - quad
        assert sign == pytest.approx(1.0)
        assert gaussian_loglik(f, stats) == pytest.approx(want, abs=1e-9)


def test_gaussian_loglik_peaks_at_mean():
    rng = np.random.default_rng(29)
    samples = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
    stats = fit_gaussian(samples)
    at_mean = gaussian_loglik(stats.mean, stats)
    for _ in range(50):
        off = stats.mean + 1e-3 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        assert gaussian_loglik(off, stats) <= at_mean


def test_gaussian_loglik_batch_equals_loop():
    rng = np.random.default_rng(37)
    samples = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    stats = fit_gaussian(samples)
    batch = rng.standard_normal((10, 4)) + 1j * rng.standard_normal((10, 4))
    got = gaussian_loglik(batch, stats)
    assert got.shape == (10,)
    for i in range(10):
        assert got[i] == pytest.approx(gaussian_loglik(batch[i], stats), abs=1e-12)


def test_gaussian_loglik_rejects_indefinite_covariance():
    stats = GaussianStats(mean=np.zeros(2, dtype=complex),
                          cov=np.zeros((2, 2), dtype=complex), loading=0.0)
    with pytest.raises(NumericError):
        gaussian_loglik(np.zeros(2, dtype=complex), stats)
    with pytest.raises(ValueError):
        gaussian_loglik(np.zeros(3, dtype=complex),
                        fit_gaussian(np.ones((2, 2), dtype=complex)))


def test_gaussian_stats_validation():
    with pytest.raises(ValueError):
        GaussianStats(mean=np.array([0j]), cov=np.array([[1j]]), loading=0.0)
    with pytest.raises(ValueError):
        GaussianStats(mean=np.array([0j, 0j]), cov=np.eye(1, dtype=complex), loading=0.0)
    with pytest.raises(ValueError):
        GaussianStats(mean=np.array([0j]), cov=np.array([[-1.0 + 0j]]), loading=0.0)


# ---------------------------------------------------------------------------
# Gamma
# ---------------------------------------------------------------------------

def test_fit_gamma_hand_case():
    p = fit_gamma([1.0, 2.0, 3.0, 4.0])
    # mean 2.5, unbiased variance 5/3: scale 2/3, shape 3.75
    assert p.scale == pytest.approx(2.0 / 3.0, rel=1e-12)
    assert p.shape == pytest.approx(3.75, rel=1e-12)


def test_fit_gamma_validation():
    with pytest.raises(ValueError):
        fit_gamma([1.0])
    with pytest.raises(ValueError):
        fit_gamma([1.0, -1.0])
    with pytest.raises(ValueError):
        fit_gamma([2.0, 2.0, 2.0])


def test_gamma_logpdf_known_values():
    assert gamma_logpdf(1.0, GammaParams(shape=1.0, scale=1.0)) == pytest.approx(-1.0, abs=1e-12)
    assert gamma_logpdf(2.0, GammaParams(shape=2.0, scale=1.0)) == pytest.approx(
        math.log(2.0) - 2.0, abs=1e-12)
    with pytest.raises(ValueError):
        gamma_logpdf(0.0, GammaParams(shape=1.0, scale=1.0))


@pytest.mark.parametrize("shape,scale", [(0.5, 1.0), (2.0, 0.3), (9.0, 2.0)])
def test_gamma_density_integrates_to_one(shape, scale):
    p = GammaParams(shape=shape, scale=scale)
    total, err = scipy.integrate.quad(lambda x: math.exp(gamma_logpdf(x, p)),
                                      1e-12, 50.0 * scale * max(shape, 1.0), limit=200)
    assert total == pytest.approx(1.0, abs=1e-5)


def test_fit_gamma_recovers_parameters_at_scale():
    rng = np.random.default_rng(41)
    draws = rng.gamma(shape=3.0, scale=1.5, size=200_000)
    p = fit_gamma(draws)
    assert p.shape == pytest.approx(3.0, rel=0.05)
    assert p.scale == pytest.approx(1.5, rel=0.05)


# ---------------------------------------------------------------------------
# von Mises
# ---------------------------------------------------------------------------

def test_log_i0_matches_scaled_bessel():
    for kappa in (0.0, 0.1, 1.0, 5.0, 14.9, 15.1, 50.0, 500.0, 1000.0):
        want = math.log(float(i0e(kappa))) + kappa
        assert _log_i0(kappa) == pytest.approx(want, rel=1e-10)
    with pytest.raises(ValueError):
        _log_i0(-1.0)


def test_vonmises_logpdf_uniform_at_zero_kappa():
    p = VonMisesParams(mu=0.0, kappa=0.0)
    for x in (-3.0, 0.0, 1.5, math.pi):
        assert vonmises_logpdf(x, p) == pytest.approx(-math.log(2 * math.pi), abs=1e-12)


@pytest.mark.parametrize("kappa", [0.5, 5.0, 50.0])
def test_vonmises_density_integrates_to_one(kappa):
    p = VonMisesParams(mu=0.7, kappa=kappa)
    total, err = scipy.integrate.quad(lambda x: math.exp(vonmises_logpdf(x, p)),
                                      -math.pi, math.pi, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_fit_vonmises_recovers_concentration():
    rng = np.random.default_rng(47)
    for kappa in (0.5, 2.0, 4.0, 20.0):
        draws = rng.vonmises(mu=1.0, kappa=kappa, size=100_000)
        p = fit_vonmises(draws)
        assert p.mu == pytest.approx(1.0, abs=0.05)
        tol = 0.05 if kappa == 4.0 else 0.10
        assert p.kappa == pytest.approx(kappa, rel=tol)


def test_fit_vonmises_degenerate_inputs():
    aligned = fit_vonmises(np.full(50, 0.3))
    assert aligned.kappa == KAPPA_MAX
    assert aligned.mu == pytest.approx(0.3, abs=1e-12)
    # balanced phasors cancel to float noise: kappa collapses with them
    balanced = fit_vonmises(np.array([0.0, math.pi]))
    assert balanced.kappa == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_vonmises(np.array([]))


def test_vonmises_params_validation():
    with pytest.raises(ValueError):
        VonMisesParams(mu=4.0, kappa=1.0)
    with pytest.raises(ValueError):
        VonMisesParams(mu=0.0, kappa=-1.0)
    with pytest.raises(ValueError):
        VonMisesParams(mu=0.0, kappa=KAPPA_MAX + 1)


# ---------------------------------------------------------------------------
# detection maps
# ---------------------------------------------------------------------------

def test_learn_detection_map_laplace_rule():
    grid = build_uniform_grid(Position(0, 0), nx=2, ny=2, spacing=1.0)
    obs = [(0, True, 1)] * 10 + [(1, True, 1), (1, False, 0)]
    dmap = learn_detection_map(obs, grid)
    assert dmap.probs[0] == pytest.approx(11.0 / 12.0, rel=1e-12)
    assert dmap.probs[1] == pytest.approx(2.0 / 4.0, rel=1e-12)
    assert dmap.probs[2] == 0.5 and dmap.probs[3] == 0.5  # unvisited


def test_learn_detection_map_ignores_moving_flag():
    grid = build_uniform_grid(Position(0, 0), nx=2, ny=1, spacing=1.0)
    a = learn_detection_map([(0, True, 1), (0, True, 0)], grid)
    b = learn_detection_map([(0, False, 1), (0, True, 0)], grid)
    assert np.array_equal(a.probs, b.probs)


def test_learn_detection_map_validation():
    grid = build_uniform_grid(Position(0, 0), nx=2, ny=1, spacing=1.0)
    with pytest.raises(ValueError):
        learn_detection_map([(5, True, 1)], grid)
    with pytest.raises(ValueError):
        learn_detection_map([(0, True, 2)], grid)


# ---------------------------------------------------------------------------
# log-linear trend
# ---------------------------------------------------------------------------

def test_fit_loglinear_two_point_hand_case():
    model = fit_loglinear([1e9, 1e10], [-60.0, -80.0])
    assert model.slope_db_per_decade == pytest.approx(-20.0, abs=1e-9)
    assert model.intercept_db == pytest.approx(120.0, abs=1e-9)
    assert model.predict_db(1e9) == pytest.approx(-60.0, abs=1e-9)


def test_fit_loglinear_recovers_model_data_exactly():
    rng = np.random.default_rng(53)
    for _ in range(20):
        slope = float(rng.uniform(-40, 10))
        intercept = float(rng.uniform(-50, 150))
        freqs = rng.uniform(1e8, 1e10, size=6)
        vals = slope * np.log10(freqs) + intercept
        model = fit_loglinear(freqs, vals)
        assert model.slope_db_per_decade == pytest.approx(slope, abs=1e-9)
        assert model.intercept_db == pytest.approx(intercept, abs=1e-9)


def test_fit_loglinear_residuals_orthogonal_to_regressor():
    rng = np.random.default_rng(59)
    freqs = rng.uniform(1e8, 1e10, size=40)
    vals = -25.0 * np.log10(freqs) + 80.0 + rng.normal(0, 3.0, size=40)
    model = fit_loglinear(freqs, vals)
    resid = vals - model.predict_db(freqs)
    assert abs(float(resid @ np.log10(freqs))) < 1e-9 * len(freqs) * float(np.std(vals) + 1)
    assert abs(float(resid.sum())) < 1e-9 * len(freqs)


def test_fit_loglinear_validation():
    with pytest.raises(ValueError):
        fit_loglinear([1e9], [-60.0])
    with pytest.raises(ValueError):
        fit_loglinear([1e9, 1e9], [-60.0, -61.0])
    with pytest.raises(ValueError):
        fit_loglinear([1e9, -1e9], [-60.0, -61.0])


# ---------------------------------------------------------------------------
# kriging
# ---------------------------------------------------------------------------

def test_kriging_reproduces_training_values():
    # with a vanishing nugget the posterior mean interpolates the data
    rng = np.random.default_rng(61)
    grid = build_uniform_grid(Position(0, 0), nx=4, ny=4, spacing=1.0)
    locs = grid.as_array()
    vals = rng.standard_normal(16) * 5.0
    kernel = KrigingKernel(length_scale=0.5, signal_var=25.0, noise_var=1e-10)
    model = kriging_fit(locs, vals, kernel=kernel)
    mean, var = kriging_predict(model, locs)
    scale = float(np.max(np.abs(vals)))
    assert np.allclose(mean, vals, atol=1e-6 * scale)
    assert np.all(var >= 0.0)


def test_kriging_default_kernel_smooths_rather_than_interpolates():
    # the default long length scale regularizes rough data instead of
    # chasing it exactly; predictions stay within the data range
    rng = np.random.default_rng(61)
    grid = build_uniform_grid(Position(0, 0), nx=4, ny=4, spacing=1.0)
    vals = rng.standard_normal(16) * 5.0
    model = kriging_fit(grid.as_array(), vals)
    mean, _ = kriging_predict(model, grid.as_array())
    assert np.allclose(mean, vals, atol=0.05 * float(np.ptp(vals)))


def test_kriging_reverts_to_prior_far_away():
    grid = build_uniform_grid(Position(0, 0), nx=3, ny=3, spacing=1.0)
    vals = np.linspace(-2.0, 2.0, 9)
    model = kriging_fit(grid.as_array(), vals)
    mean, var = kriging_predict(model, np.array([1e4, 1e4]))
    assert mean == pytest.approx(0.0, abs=1e-12)  # zero prior mean
    assert var == pytest.approx(model.kernel.signal_var, rel=1e-9)


def test_kriging_default_length_scale_is_twice_spacing():
    grid = build_uniform_grid(Position(0, 0), nx=3, ny=3, spacing=0.7)
    model = kriging_fit(grid.as_array(), np.arange(9.0))
    assert model.kernel.length_scale == pytest.approx(1.4, rel=1e-12)
    assert model.kernel.signal_var == pytest.approx(float(np.var(np.arange(9.0), ddof=1)),
                                                    rel=1e-12)
    assert model.kernel.noise_var == pytest.approx(1e-6 * model.kernel.signal_var,
                                                   rel=1e-12)


def test_kriging_predict_matches_dense_solve_oracle():
    rng = np.random.default_rng(71)
    locs = rng.uniform(0, 5, size=(12, 2))
    vals = rng.standard_normal(12) * 3.0
    kernel = KrigingKernel(length_scale=1.3, signal_var=4.0, noise_var=1e-4)
    model = kriging_fit(locs, vals, kernel=kernel)
    queries = rng.uniform(0, 5, size=(7, 2))

    def k_of(a, b):
        d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
        return kernel.signal_var * np.exp(-d2 / (2 * kernel.length_scale ** 2))

    gram = k_of(locs, locs) + kernel.noise_var * np.eye(12)
    kstar = k_of(queries, locs)
    want_mean = kstar @ np.linalg.solve(gram, vals)
    want_var = kernel.signal_var - np.sum(kstar * np.linalg.solve(gram, kstar.T).T, axis=1)
    mean, var = kriging_predict(model, queries)
    assert np.allclose(mean, want_mean, atol=1e-9)
    assert np.allclose(var, np.maximum(want_var, 0.0), atol=1e-9)


def test_kriging_optimize_picks_from_candidate_grid():
    rng = np.random.default_rng(67)
    grid = build_uniform_grid(Position(0, 0), nx=4, ny=4, spacing=1.0)
    vals = np.sin(grid.as_array()[:, 0]) + rng.normal(0, 0.05, 16)
    base = kriging_fit(grid.as_array(), vals)
    tuned = kriging_fit(grid.as_array(), vals, optimize_length_scale=True)
    candidates = np.geomspace(base.kernel.length_scale / 3.0,
                              base.kernel.length_scale * 3.0, 7)
    assert any(tuned.kernel.length_scale == pytest.approx(c, rel=1e-12)
               for c in candidates)


def test_kriging_singular_matrix_raises():
    locs = np.array([[0.0, 0.0], [0.0, 0.0]])  # duplicated point, no nugget
    with pytest.raises(NumericError):
        kriging_fit(locs, np.array([0.0, 1.0]),
                    kernel=KrigingKernel(length_scale=1.0, signal_var=1.0,
                                         noise_var=0.0))


def test_kriging_validation():
    with pytest.raises(ValueError):
        kriging_fit(np.zeros((0, 2)), np.array([]))
    with pytest.raises(ValueError):
        kriging_fit(np.array([[0.0, 0.0]]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        kriging_fit(np.array([[0.0, 0.0]]), np.array([1.0]))  # defaults need >= 2
    model = kriging_fit(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        kriging_predict(model, np.zeros((2, 3)))
