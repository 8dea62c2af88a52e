"""Time-rescaled variant: mode-gap modulus, zero-limit map, gap bound."""

import numpy as np
import pytest

from lfms import (
    ParameterError,
    ScaledModel,
    StableParams,
    StiffnessError,
    beta_of_epsilon,
    fit_beta_constant,
    gap_experiment,
    generate_two_sided_stable,
    scaled_stationary,
    simulate_scaled,
    solve_F_scaled,
    theorem_bound,
)
from lfms.manifold import BackwardWindow
from conftest import make_ts1

MU_S = 0.5  # weight rate for the unit-separation rescaled solves


@pytest.fixture(scope="module")
def scaled_setup():
    model = make_ts1()
    window = BackwardWindow(t_back=14.0, dt=0.02, mu=MU_S, picard_tol=1e-8,
                            truncation_tol=1e-6)
    rng = np.random.default_rng(71)
    path = generate_two_sided_stable(
        StableParams(alpha=model.alpha, dim=model.n), (40.0, 10.0, 0.02), rng
    )
    zeta = scaled_stationary(ScaledModel(model), path)
    return model, window, path, zeta


def test_beta_against_numeric_maximization():
    g1, g2, mu, eps = 2.0, 1.0, 1.0, 0.1
    rep = beta_of_epsilon(g1, g2, mu, eps)
    ts = np.linspace(-5.0, 0.0, 400001)
    eg = eps * g2
    g = np.exp(mu * ts) * (np.exp(-eg * ts) / (g1 - eg) - 1 / g1) \
        + (1 / (g1 - eg) - 1 / g1)
    k = g.argmax()
    assert rep.t0 == pytest.approx(ts[k], abs=1e-4)
    assert rep.beta == pytest.approx(g[k], abs=1e-9)


def test_beta_reference_values():
    # targets recomputed at 40-digit precision from the closed forms
    rep = beta_of_epsilon(2.0, 1.0, 1.0, 0.1)
    assert rep.t0 == pytest.approx(-0.5406722127027577, abs=1e-12)
    assert rep.beta == pytest.approx(0.0586689368753475, abs=1e-12)
    assert round(rep.beta, 5) == 0.05867
    assert beta_of_epsilon(2.0, 1.0, 1.0, 0.01).beta == pytest.approx(
        0.0055643, abs=1e-6
    )


def test_beta_strictly_decreasing_in_epsilon():
    vals = [beta_of_epsilon(2.0, 1.0, 1.0, 10.0**-k).beta for k in range(1, 6)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))


def test_beta_domain_errors():
    with pytest.raises(ParameterError):
        beta_of_epsilon(2.0, 1.0, 0.5, 0.6)  # mu - eps g2 <= 0
    with pytest.raises(ParameterError):
        beta_of_epsilon(0.4, 1.0, 1.0, 0.5)  # g1 - eps g2 <= 0


def test_simulate_scaled_guard_and_shapes(scaled_setup):
    model, _, path, _ = scaled_setup
    scaled = ScaledModel(model)
    with pytest.raises(StiffnessError):
        simulate_scaled(scaled, path, (np.zeros(1), np.zeros(1)), 1.0, 0.1)
    traj = simulate_scaled(scaled, path, (np.zeros(1), np.zeros(1)), 2.0,
                           0.02)
    assert traj.u_path.shape == (101, 1)
    # slow drift is O(eps): the slow coordinate barely moves
    assert np.max(np.abs(traj.v_path)) < 0.5


def test_zero_mode_lipschitz_bound(scaled_setup):
    model, window, _, zeta = scaled_setup
    scaled = ScaledModel(model)
    lip = model.declared_L / (model.gamma1() - MU_S - model.declared_L)
    ys = np.linspace(-1.0, 1.0, 9)
    vals = [
        solve_F_scaled(scaled, zeta, np.full(1, y), window, "zero")
        for y in ys
    ]
    for i in range(len(ys) - 1):
        num = np.linalg.norm(vals[i + 1] - vals[i])
        assert num <= lip * (ys[i + 1] - ys[i]) + 1e-9


def test_mode_gap_scales_like_beta(scaled_setup):
    model, window, _, zeta = scaled_setup
    c_fit, rows = fit_beta_constant(
        model, zeta, np.full(1, 0.3), [0.2, 0.1, 0.05], window, mu=MU_S
    )
    assert c_fit > 0
    ratios = [r["ratio"] for r in rows]
    assert max(ratios) <= 1.2 * min(ratios)
    gaps = [r["gap"] for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]


def test_invalid_mode_rejected(scaled_setup):
    model, window, _, zeta = scaled_setup
    with pytest.raises(ParameterError):
        solve_F_scaled(ScaledModel(model), zeta, np.zeros(1), window,
                       eps_mode="half")


def test_theorem_bound_structure(scaled_setup):
    model, window, _, zeta = scaled_setup
    t_grid = np.linspace(0.0, 20.0, 81)
    bound = theorem_bound(model, MU_S, 0.1, np.full(1, 0.3), np.full(1, 0.2),
                          zeta.value_at(0.0), 1.0, t_grid)
    # first term decays at exactly rate mu, second saturates at the
    # persistent level, third is constant in t
    assert bound.term1[-1] == pytest.approx(
        bound.term1[0] * np.exp(-MU_S * 20.0)
    )
    gamma3 = 1.0
    target = bound.persistent_level * (1 - np.exp(-0.1 * gamma3 * 10.0))
    k10 = np.argmin(np.abs(t_grid - 10.0))
    assert bound.term2[k10] == pytest.approx(target, rel=1e-9)
    assert bound.term3 == pytest.approx(bound.beta, rel=1e-12)
    assert 0.0 < bound.term2[-1] <= bound.persistent_level


def test_persistent_level_does_not_vanish_with_epsilon(scaled_setup):
    model, _, _, zeta = scaled_setup
    levels = []
    for eps in (0.2, 0.1, 0.05, 0.01):
        b = theorem_bound(model, MU_S, eps, np.full(1, 0.3), np.full(1, 0.2),
                          zeta.value_at(0.0), 1.0, np.array([1.0 / eps]))
        # middle term at t = 1/eps keeps at least a (1 - e^{-1}) fraction
        assert b.term2[0] >= (1 - np.exp(-1.0)) * b.persistent_level \
            * (1.0 - 1e-9)
        levels.append(b.persistent_level)
    assert min(levels) > 0.3


def test_gap_experiment_bound_dominates(scaled_setup):
    model, window, path, zeta = scaled_setup
    c_fit, _ = fit_beta_constant(
        model, zeta, np.full(1, 0.3), [0.2, 0.1], window, mu=MU_S
    )
    rows = gap_experiment(
        model, path, zeta, (np.full(1, 0.2), np.full(1, 0.3)), [0.2, 0.1],
        8.0, 0.02, window, c_fit, report_stride=25,
    )
    assert rows
    for r in rows:
        total = r["bound_term1"] + r["bound_term2"] + r["bound_term3"]
        assert r["measured_gap"] <= total
