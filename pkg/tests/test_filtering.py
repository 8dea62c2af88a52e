"""Observation model, resampling, and the two particle filters."""

import numpy as np
import pytest

from lfms import (
    BackwardWindow,
    ConfigurationError,
    DegeneracyWarning,
    GaussianPrior,
    ObservationPath,
    ParameterError,
    Sensor,
    SlowFastModel,
    TestFunctional,
    TrajectoryPair,
    brownian_triplet,
    compare_filters,
    filter_replica,
    generate_observation,
    run_filter_full,
    run_filter_reduced,
    shape_term,
    systematic_resample,
)
from conftest import make_ts1

TANH = TestFunctional(lambda x, y: np.tanh(x).sum(axis=0)
                      + np.tanh(y).sum(axis=0))
ONE = TestFunctional(lambda x, y: np.ones(np.broadcast_shapes(
    x.shape, y.shape)[1:]))
SENSOR = Sensor(lambda x, y: np.tanh(x).sum(axis=0) + np.tanh(y).sum(axis=0),
                bound_MH=2.0, lip_H=1.0)


def _truth(model, T, dt, seed):
    rng = np.random.default_rng(seed)
    n = round(T / dt)
    times = dt * np.arange(n + 1)
    u = 0.3 * np.cos(times)[:, None] * np.ones((1, model.n))
    v = 0.2 * np.sin(times)[:, None] * np.ones((1, model.m))
    return TrajectoryPair(times=times, u_path=u, v_path=v)


def test_observation_integrates_sensor_drift(ts1):
    truth = _truth(ts1, 1.0, 0.01, 0)
    rng = np.random.default_rng(1)
    obs = generate_observation(truth, SENSOR, rng)
    assert obs.w.shape == (101, 1)
    assert np.allclose(obs.w[0], 0.0)
    h = SENSOR(truth.u_path[:-1].T, truth.v_path[:-1].T)
    drift = np.cumsum(h) * 0.01
    # subtracting the Brownian part recovers the integrated drift exactly
    resid = obs.w[1:, 0] - np.cumsum(obs.dW[:, 0])
    assert np.allclose(resid, drift, atol=1e-12)


def test_systematic_resample_tracks_weights():
    rng = np.random.default_rng(2)
    w = np.array([0.5, 0.25, 0.125, 0.125])
    counts = np.zeros(4)
    for _ in range(400):
        idx = systematic_resample(w, rng)
        counts += np.bincount(idx, minlength=4)
    freq = counts / counts.sum()
    assert np.allclose(freq, w, atol=0.02)
    # systematic: per-draw multiplicities are floor/ceil of N w_i
    idx = systematic_resample(w, rng)
    mult = np.bincount(idx, minlength=4)
    assert np.all(np.abs(mult - 4 * w) < 1.0 + 1e-12)


def test_filter_preserves_total_mass(ts1):
    truth = _truth(ts1, 0.2, 0.002, 3)
    rng = np.random.default_rng(4)
    obs = generate_observation(truth, SENSOR, rng)
    run = run_filter_full(
        ts1, SENSOR, obs, 150, rng, GaussianPrior(), [ONE, TANH],
        brownian_triplet(1),
    )
    assert np.allclose(run.estimates[:, 0], 1.0, atol=1e-12)
    assert run.advanced_dimension == ts1.n + ts1.m


def test_filter_rejects_small_ensembles(ts1):
    truth = _truth(ts1, 0.1, 0.002, 5)
    rng = np.random.default_rng(5)
    obs = generate_observation(truth, SENSOR, rng)
    with pytest.raises(ParameterError):
        run_filter_full(ts1, SENSOR, obs, 50, rng, GaussianPrior(), [TANH],
                        brownian_triplet(1))


def test_degeneracy_warning_on_ess_collapse(ts1):
    # a huge observation drift concentrates all weight on one particle
    loud = Sensor(lambda x, y: 40.0 * x.sum(axis=0), bound_MH=1e3,
                  lip_H=40.0)
    truth = _truth(ts1, 0.1, 0.002, 6)
    rng = np.random.default_rng(6)
    obs = generate_observation(truth, loud, rng)
    with pytest.warns(DegeneracyWarning):
        run_filter_full(ts1, loud, obs, 120, rng, GaussianPrior(u_scale=3.0),
                        [TANH], brownian_triplet(1), resample_frac=0.0)


def test_full_filter_matches_kalman_oracle():
    # linear dynamics, Gaussian noise (alpha = 2), linear sensor: the
    # discrete Kalman filter on the same Euler recursion is exact
    model = SlowFastModel(
        A=-2.0, B=-1.0, U=lambda x, y: 0 * x, V=lambda x, y: 0 * y,
        sigma1=0.5, sigma2=0.5, epsilon=0.2, alpha=2.0,
        declared_L=0.0, declared_MU=0.0, declared_MV=0.0,
    )
    dt, T = 0.004, 0.6
    sensor = Sensor(lambda x, y: x.sum(axis=0) + y.sum(axis=0),
                    bound_MH=10.0, lip_H=1.0)
    phi_u = TestFunctional(lambda x, y: x[0])
    phi_v = TestFunctional(lambda x, y: y[0])
    prior = GaussianPrior(u_scale=0.4, v_scale=0.4)

    rng = np.random.default_rng(7)
    n_steps = round(T / dt)
    times = dt * np.arange(n_steps + 1)
    u = np.zeros(n_steps + 1)
    v = np.zeros(n_steps + 1)
    u[0], v[0] = 0.4 * rng.standard_normal(2)
    # alpha = 2 stable has cf e^{-u^2}: variance 2 per unit of its clock
    q_u = (model.sigma1 / model.epsilon ** 0.5) ** 2 * 2.0 * dt
    q_v = model.sigma2**2 * dt
    for k in range(n_steps):
        u[k + 1] = u[k] * (1 - 2 * dt / model.epsilon) \
            + np.sqrt(q_u) * rng.standard_normal()
        v[k + 1] = v[k] * (1 - dt) + np.sqrt(q_v) * rng.standard_normal()
    truth = TrajectoryPair(times=times, u_path=u[:, None], v_path=v[:, None])
    obs = generate_observation(truth, sensor, rng)

    # discrete Kalman recursion on z = (u, v)
    F = np.diag([1 - 2 * dt / model.epsilon, 1 - dt])
    Q = np.diag([q_u, q_v])
    H = np.array([[1.0, 1.0]])
    mean = np.zeros(2)
    cov = np.diag([0.16, 0.16])
    for k in range(n_steps):
        innov = obs.w[k + 1] - obs.w[k] - H @ mean * dt
        s = H @ cov @ H.T * dt + 1.0
        gain = cov @ H.T / s
        mean = mean + (gain * innov).ravel()
        cov = cov - gain @ H @ cov * dt
        mean = F @ mean
        cov = F @ cov @ F.T + Q
    kalman_u, kalman_v = mean

    pf_rng = np.random.default_rng(8)
    run = run_filter_full(model, sensor, obs, 4000, pf_rng, prior,
                          [phi_u, phi_v], brownian_triplet(1))
    spread = np.sqrt(cov.diagonal())
    assert abs(run.estimates[-1, 0] - kalman_u) < 3.0 * spread[0]
    assert abs(run.estimates[-1, 1] - kalman_v) < 3.0 * spread[1]


def test_reduced_filter_advances_slow_dimension_only(ts1):
    truth = _truth(ts1, 0.2, 0.002, 9)
    rng = np.random.default_rng(9)
    obs = generate_observation(truth, SENSOR, rng)
    window = BackwardWindow(t_back=1.4, dt=0.01, mu=1.0, picard_tol=1e-6,
                            truncation_tol=1e-6)
    run = run_filter_reduced(
        ts1, SENSOR, obs, 120, window, rng, GaussianPrior(), [ONE, TANH],
        brownian_triplet(1),
    )
    assert run.advanced_dimension == ts1.m
    assert np.allclose(run.estimates[:, 0], 1.0, atol=1e-12)
    assert np.isfinite(run.estimates).all()


def test_replica_deterministic_by_seed_key(ts1, window):
    win = BackwardWindow(t_back=1.4, dt=0.01, mu=1.0, picard_tol=1e-6,
                         truncation_tol=1e-6)
    args = (ts1, SENSOR, TANH, 2.0, 120, 0.3, 0.002, win, GaussianPrior(),
            brownian_triplet(1), (0.3,))
    a = filter_replica(*args, seed_key=(11, 4))
    b = filter_replica(*args, seed_key=(11, 4))
    c = filter_replica(*args, seed_key=(11, 5))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_shape_term_formula():
    assert shape_term(0.1, 0.0, 1.0, 2.0) == pytest.approx(
        (1.0 + 0.1 / 8.0) ** 0.25
    )
    # large t leaves only the persistent eps/(4 mu p) floor
    assert shape_term(0.1, 50.0, 1.0, 2.0) == pytest.approx(
        (0.1 / 8.0) ** 0.25, rel=1e-6
    )
    grid = [0.4, 0.2, 0.1]
    vals = [shape_term(e, 1.0, 1.0, 2.0) for e in grid]
    assert vals[0] > vals[1] > vals[2]


def test_compare_filters_rows_and_common_random_numbers(ts1):
    rows = compare_filters(
        ts1, SENSOR, TANH, [0.2, 0.1], 2.0, 3, 120, 0.3, 1.0,
        GaussianPrior(), brownian_triplet(1), t_checkpoints=(0.3,),
        master_seed=17,
    )
    assert len(rows) == 2
    for row in rows:
        assert row["mean_gap_p"] >= 0.0
        assert row["mc_stderr"] >= 0.0
        assert 0.0 < row["shape_term"] < 2.0
    with pytest.raises(ConfigurationError):
        compare_filters(ts1, SENSOR, TANH, [], 2.0, 2, 120, 0.3, 1.0,
                        GaussianPrior(), brownian_triplet(1))


def test_observation_path_dt_property():
    times = 0.01 * np.arange(11)
    obs = ObservationPath(times=times, w=np.zeros((11, 1)),
                          dW=np.zeros((10, 1)))
    assert obs.dt == pytest.approx(0.01)
