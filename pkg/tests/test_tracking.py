"""Grid Bayes filtering and particle filtering against hand-built oracles."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fingerloc.errors import DegenerateUpdateError, NumericError
from fingerloc.geometry import Position, build_uniform_grid
from fingerloc.matching import MODE_SQUARED_ERROR, LikelihoodMap
from fingerloc.tracking import (
    MobilityModel,
    ParticleSet,
    grid_bayes_step,
    particle_predict,
    particle_update,
    resample_systematic,
    track_estimate,
    transition_matrix,
)


def _grid(n, spacing=1.0):
    return build_uniform_grid(Position(0.0, 0.0), nx=n, ny=n, spacing=spacing)


def _logmap(grid, values):
    return LikelihoodMap(grid=grid, values=values)


# ---------------------------------------------------------------------------
# mobility model
# ---------------------------------------------------------------------------

def test_mobility_model_derived_quantities():
    m = MobilityModel(p_static=0.2, accel_sigma=0.5, dt=2.0)
    assert m.step_sigma == pytest.approx(0.5 * 4.0)
    assert m.step_limit == pytest.approx(4.0 * 2.0)
    capped = MobilityModel(accel_sigma=0.5, dt=1.0, max_step=0.7)
    assert capped.step_limit == 0.7


@pytest.mark.parametrize("kwargs", [
    {"p_static": -0.1},
    {"p_static": 1.5},
    {"accel_sigma": -1.0},
    {"dt": 0.0},
    {"max_step": -0.5},
])
def test_mobility_model_validation(kwargs):
    with pytest.raises(ValueError):
        MobilityModel(**kwargs)


# ---------------------------------------------------------------------------
# transition matrix
# ---------------------------------------------------------------------------

def test_transition_matrix_static_user_is_identity():
    grid = _grid(3)
    trans = transition_matrix(grid, MobilityModel(p_static=1.0, accel_sigma=0.9))
    assert np.allclose(trans, np.eye(9), atol=1e-15)


def test_transition_matrix_zero_step_sigma_is_identity():
    grid = _grid(3)
    trans = transition_matrix(grid, MobilityModel(p_static=0.4, accel_sigma=0.0))
    assert np.array_equal(trans, np.eye(9))


def test_transition_matrix_rows_are_distributions():
    grid = _grid(4, spacing=0.78)
    trans = transition_matrix(grid, MobilityModel(p_static=0.3, accel_sigma=0.5))
    assert trans.shape == (16, 16)
    assert np.all(trans >= 0)
    assert np.allclose(trans.sum(axis=1), 1.0, atol=1e-12)


def test_transition_matrix_matches_quadrature_oracle():
    # rebuild the kernel from first principles: the Gaussian step lands in a
    # destination cell with probability = product of 1-D interval masses,
    # evaluated here by direct quadrature of the normal density
    grid = _grid(3)
    model = MobilityModel(p_static=0.3, accel_sigma=0.8, dt=1.0)
    sigma = model.step_sigma
    h = grid.spacing

    def interval_mass(d):
        pdf = lambda t: math.exp(-t * t / (2 * sigma * sigma)) / (sigma * math.sqrt(2 * math.pi))
        val, _ = quad(pdf, d - h / 2, d + h / 2)
        return val

    xy = grid.as_array()
    n = len(grid)
    kernel = np.zeros((n, n))
    for r in range(n):
        for c in range(n):
            dx = xy[c, 0] - xy[r, 0]
            dy = xy[c, 1] - xy[r, 1]
            if math.hypot(dx, dy) > model.step_limit:
                continue
            kernel[r, c] = interval_mass(dx) * interval_mass(dy)
    kernel /= kernel.sum(axis=1, keepdims=True)
    want = model.p_static * np.eye(n) + (1 - model.p_static) * kernel
    want /= want.sum(axis=1, keepdims=True)

    got = transition_matrix(grid, model)
    assert np.allclose(got, want, atol=1e-9)


def test_transition_matrix_tight_truncation_collapses_to_identity():
    # a step limit below the lattice spacing leaves only the source cell
    grid = _grid(3)
    model = MobilityModel(p_static=0.2, accel_sigma=0.5, max_step=0.4)
    trans = transition_matrix(grid, model)
    assert np.allclose(trans, np.eye(9), atol=1e-15)


def test_transition_matrix_starved_kernel_raises():
    # an absurdly wide step distribution spreads so thin that every interval
    # mass underflows to zero, starving each row
    grid = _grid(2)
    with pytest.raises(NumericError):
        transition_matrix(grid, MobilityModel(p_static=0.0, accel_sigma=1e300))


def test_transition_matrix_rejects_irregular_grid():
    from fingerloc.geometry import Grid
    skew = Grid(points=(Position(0, 0), Position(1, 0.2), Position(2, 0)), spacing=1.0)
    with pytest.raises(ValueError):
        transition_matrix(skew, MobilityModel())


# ---------------------------------------------------------------------------
# grid Bayes recursion
# ---------------------------------------------------------------------------

def test_grid_bayes_step_uniform_prior_identity_transition():
    # no motion and a flat prior: the posterior is just the renormalized observation
    grid = _grid(2)
    prev = _logmap(grid, np.zeros(4))
    obs = _logmap(grid, [-3.0, -1.0, -7.0, -2.0])
    out = grid_bayes_step(prev, np.eye(4), obs)
    assert np.allclose(out.values, np.array(obs.values) - (-1.0), atol=1e-12)
    assert np.max(out.values) == pytest.approx(0.0, abs=1e-12)


def test_grid_bayes_step_matches_linear_domain_brute_force():
    rng = np.random.default_rng(59)
    grid = _grid(2)
    for _ in range(25):
        prev_vals = rng.uniform(-8, 0, size=4)
        obs_vals = rng.uniform(-8, 0, size=4)
        trans = rng.uniform(0.05, 1.0, size=(4, 4))
        trans /= trans.sum(axis=1, keepdims=True)
        out = grid_bayes_step(_logmap(grid, prev_vals), trans, _logmap(grid, obs_vals))
        want = obs_vals + np.log(trans.T @ np.exp(prev_vals))
        want -= want.max()
        assert np.allclose(out.values, want, atol=1e-9)


def test_grid_bayes_step_starved_cell_raises():
    grid = build_uniform_grid(Position(0, 0), nx=2, ny=1, spacing=1.0)
    prev = _logmap(grid, [0.0, -1.0])
    obs = _logmap(grid, [0.0, 0.0])
    trans = np.array([[1.0, 0.0], [1.0, 0.0]])  # nothing ever reaches cell 1
    with pytest.raises(NumericError):
        grid_bayes_step(prev, trans, obs)


def test_grid_bayes_step_validation():
    grid = _grid(2)
    prev = _logmap(grid, np.zeros(4))
    obs_other = _logmap(_grid(3), np.zeros(9))
    with pytest.raises(ValueError):
        grid_bayes_step(prev, np.eye(4), obs_other)
    sqerr = LikelihoodMap(grid=grid, values=np.ones(4), mode=MODE_SQUARED_ERROR)
    with pytest.raises(ValueError):
        grid_bayes_step(prev, np.eye(4), sqerr)
    with pytest.raises(ValueError):
        grid_bayes_step(prev, np.eye(3), _logmap(grid, np.zeros(4)))


def test_track_estimate_returns_argmax_and_candidates():
    grid = build_uniform_grid(Position(0, 0), nx=3, ny=1, spacing=1.0)
    lmap = _logmap(grid, [-3.0, -1.0, -2.0])
    idx, cands = track_estimate(lmap, -1.5)
    assert idx == 1
    assert np.array_equal(cands, [1])
    _, wide = track_estimate(lmap, -2.5)
    assert np.array_equal(wide, [1, 2])


# ---------------------------------------------------------------------------
# particle filter
# ---------------------------------------------------------------------------

def test_particle_set_validation():
    good = ParticleSet(positions=[[0.0, 0.0], [1.0, 1.0]], weights=[0.5, 0.5])
    assert len(good) == 2
    assert good.effective_sample_size() == pytest.approx(2.0)
    one_hot = ParticleSet(positions=[[0.0, 0.0], [1.0, 1.0]], weights=[1.0, 0.0])
    assert one_hot.effective_sample_size() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ParticleSet(positions=[[0.0, 0.0]], weights=[0.9])  # does not sum to 1
    with pytest.raises(ValueError):
        ParticleSet(positions=[[0.0, 0.0], [1.0, 1.0]], weights=[1.5, -0.5])
    with pytest.raises(ValueError):
        ParticleSet(positions=np.zeros((0, 2)), weights=np.zeros(0))
    with pytest.raises(ValueError):
        ParticleSet(positions=[[0.0, 0.0, 0.0]], weights=[1.0])
    with pytest.raises(ValueError):
        good.positions[0, 0] = 5.0  # frozen arrays


def test_particle_predict_shifts_without_reweighting():
    ps = ParticleSet(positions=[[0.0, 0.0], [2.0, 1.0]], weights=[0.25, 0.75])
    moved = particle_predict(ps, (0.5, -0.5), pdr_sigma=0.0, seed=1)
    assert np.array_equal(moved.positions, [[0.5, -0.5], [2.5, 0.5]])
    assert np.array_equal(moved.weights, ps.weights)
    jittered = particle_predict(ps, (0.0, 0.0), pdr_sigma=0.2, seed=1)
    assert not np.array_equal(jittered.positions, ps.positions)
    with pytest.raises(ValueError):
        particle_predict(ps, (1.0, 2.0, 3.0), pdr_sigma=0.1, seed=0)
    with pytest.raises(ValueError):
        particle_predict(ps, (1.0, 2.0), pdr_sigma=-0.1, seed=0)


def test_particle_update_on_grid_points_reads_map_directly():
    grid = _grid(2)
    lmap = _logmap(grid, np.log([1.0, 2.0, 3.0, 4.0]))
    # particles sit exactly on grid points 0 and 3
    ps = ParticleSet(positions=[[0.0, 0.0], [1.0, 1.0]], weights=[0.5, 0.5])
    updated, est = particle_update(ps, lmap, db=None, seed=0)
    # posterior weights proportional to 0.5*1 and 0.5*4
    assert np.allclose(updated.weights, [0.2, 0.8], atol=1e-12)
    want = 0.2 * np.array([0.0, 0.0]) + 0.8 * np.array([1.0, 1.0])
    assert est.x == pytest.approx(want[0]) and est.y == pytest.approx(want[1])


def test_particle_update_uniform_map_keeps_weights():
    grid = _grid(3)
    lmap = _logmap(grid, np.full(9, -2.5))
    rng = np.random.default_rng(61)
    pos = rng.uniform(0, 2, size=(6, 2))
    w = rng.uniform(0.5, 1.5, size=6)
    w /= w.sum()
    ps = ParticleSet(positions=pos, weights=w)
    updated, _ = particle_update(ps, lmap, db=None, seed=0)
    assert np.allclose(updated.weights, w, atol=1e-12)


def test_particle_update_interpolates_by_inverse_distance():
    grid = _grid(2)
    dens = np.array([1.0, 2.0, 3.0, 4.0])
    lmap = _logmap(grid, np.log(dens))
    p = np.array([0.25, 0.25])
    corners = np.array([0, 1, 2, 3])
    d = np.hypot(grid.as_array()[corners, 0] - p[0], grid.as_array()[corners, 1] - p[1])
    iw = 1.0 / d
    lik_p = float(iw @ dens[corners] / iw.sum())
    # pair the off-grid particle with one pinned at a grid point of density 1
    ps = ParticleSet(positions=[p, [0.0, 0.0]], weights=[0.5, 0.5])
    updated, _ = particle_update(ps, lmap, db=None, seed=0)
    want = np.array([lik_p, 1.0])
    want /= want.sum()
    assert np.allclose(updated.weights, want, atol=1e-12)


def test_particle_update_mode_estimator():
    grid = _grid(2)
    lmap = _logmap(grid, np.log([1.0, 1.0, 1.0, 9.0]))
    ps = ParticleSet(positions=[[0.0, 0.0], [1.0, 1.0], [0.3, 0.4]],
                     weights=[1 / 3] * 3)
    _, est = particle_update(ps, lmap, db=None, seed=0, estimator="mode")
    assert (est.x, est.y) == (1.0, 1.0)
    with pytest.raises(ValueError):
        particle_update(ps, lmap, db=None, estimator="median")


def test_particle_update_degenerate_likelihood_raises():
    grid = _grid(2)
    # the only particle sits on a cell whose density underflows to exactly zero
    lmap = _logmap(grid, [0.0, -9000.0, -9000.0, -9000.0])
    ps = ParticleSet(positions=[[1.0, 0.0]], weights=[1.0])
    with pytest.raises(DegenerateUpdateError):
        particle_update(ps, lmap, db=None, seed=0)


def test_particle_update_resamples_when_ess_collapses():
    grid = _grid(2)
    lmap = _logmap(grid, [0.0, -9000.0, -9000.0, -9000.0])
    # three particles on dead cells, one on the live cell: ESS drops to 1 < 4/2
    ps = ParticleSet(positions=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 0.0]],
                     weights=[0.25] * 4)
    updated, est = particle_update(ps, lmap, db=None, seed=3)
    assert np.allclose(updated.weights, 0.25)
    assert np.array_equal(updated.positions, np.tile([0.0, 0.0], (4, 1)))
    assert (est.x, est.y) == (0.0, 0.0)


def test_particle_update_grid_mismatch_raises():
    lmap = _logmap(_grid(2), np.zeros(4))
    ps = ParticleSet(positions=[[0.0, 0.0]], weights=[1.0])
    with pytest.raises(ValueError):
        particle_update(ps, lmap, db=None, grid=_grid(3))


# ---------------------------------------------------------------------------
# systematic resampling
# ---------------------------------------------------------------------------

def test_resample_systematic_even_split_is_exact():
    ps = ParticleSet(positions=[[0.0, 0.0], [1.0, 0.0]], weights=[0.5, 0.5])
    out = resample_systematic(ps, seed=7, size=10_000)
    counts = np.bincount((out.positions[:, 0] > 0.5).astype(int), minlength=2)
    assert counts[0] == 5000 and counts[1] == 5000
    assert np.allclose(out.weights, 1e-4)


def test_resample_systematic_equal_weights_reproduce_input():
    rng = np.random.default_rng(67)
    pos = rng.uniform(0, 5, size=(37, 2))
    ps = ParticleSet(positions=pos, weights=np.full(37, 1 / 37))
    out = resample_systematic(ps, seed=11)
    assert np.array_equal(out.positions, pos)


def test_resample_systematic_counts_track_weights_within_one():
    rng = np.random.default_rng(71)
    for trial in range(20):
        n = int(rng.integers(3, 40))
        w = rng.uniform(0.01, 1.0, size=n)
        w /= w.sum()
        pos = np.column_stack([np.arange(n, dtype=float), np.zeros(n)])
        ps = ParticleSet(positions=pos, weights=w)
        size = int(rng.integers(50, 400))
        out = resample_systematic(ps, seed=trial, size=size)
        counts = np.bincount(out.positions[:, 0].astype(int), minlength=n)
        assert np.all(np.abs(counts - size * w) <= 1.0 + 1e-9)
    with pytest.raises(ValueError):
        resample_systematic(ps, seed=0, size=0)
