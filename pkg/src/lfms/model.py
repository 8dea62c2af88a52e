"""Slow-fast model definition, hypothesis checks, and integrators.

The model couples a fast block du = (A u + U(u, v)) dt/eps + noise with a
slow block dv = (B v + V(u, v)) dt + noise.  Interaction functions U, V must
be vectorized: they receive arrays whose leading axis indexes components
(shape (n, ...) and (m, ...)) and return an array shaped like their first
argument block.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .errors import (
    AlignmentError,
    DivergenceError,
    ParameterError,
    StiffnessError,
)
from .noise import StationaryPath

Interaction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SlowFastModel:
    """Coefficient bundle of the two-time-scale system."""

    A: np.ndarray
    B: np.ndarray
    U: Interaction
    V: Interaction
    sigma1: float
    sigma2: float
    epsilon: float
    alpha: float
    declared_L: float
    declared_MU: float
    declared_MV: float

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, float)))
        object.__setattr__(self, "B", np.atleast_2d(np.asarray(self.B, float)))
        if self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if not 1.0 < self.alpha <= 2.0:
            raise ParameterError("alpha must lie in (1, 2]")
        if self.sigma1 == 0.0:
            raise ParameterError("sigma1 must be nonzero")
        for name in ("declared_L", "declared_MU", "declared_MV"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[0]

    def with_epsilon(self, epsilon: float) -> "SlowFastModel":
        return replace(self, epsilon=epsilon)

    def gamma1(self) -> float:
        """Decay rate of the fast linear part: -lambda_max((A + A^T)/2)."""
        return float(-np.linalg.eigvalsh((self.A + self.A.T) / 2.0).max())


@dataclass(frozen=True)
class HypothesisReport:
    gamma1: float
    gamma2: float
    gamma3: float
    L: float
    M_U: float
    M_V: float
    mu: float
    epsilon0: float | None
    passed: dict

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


@dataclass(frozen=True)
class TrajectoryPair:
    times: np.ndarray
    u_path: np.ndarray
    v_path: np.ndarray
    representation: str = "original"


def _operator_norm(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat, 2))


def fitted_decay_rates(b_mat: np.ndarray, n_grid: int = 40):
    """Fit gamma2 (backward growth) and gamma3 (forward decay) of exp(Bt).

    gamma2 is the smallest rate with ||exp(Bt)|| <= exp(-gamma2 t) for t <= 0,
    gamma3 the largest rate with ||exp(Bt)|| <= exp(-gamma3 t) for t > 0,
    both estimated on a log-spaced grid.
    """
    ts = np.logspace(-3, 2, n_grid)
    g2 = 0.0
    g3 = np.inf
    for t in ts:
        fwd = _operator_norm(expm(b_mat * t))
        bwd = _operator_norm(expm(-b_mat * t))
        g2 = max(g2, np.log(bwd) / t)
        g3 = min(g3, -np.log(fwd) / t)
    return float(g2), float(g3)


def epsilon0_closed_form(gamma1, gamma2, L, mu):
    """Positive root of L/(gamma1 - mu) + eps L/(mu - eps gamma2) = 1."""
    head = gamma1 - mu - L
    if head <= 0 or L == 0.0:
        return None if head <= 0 else np.inf
    denom = head * gamma2 + L * (gamma1 - mu)
    return float(mu * head / denom)


def contraction_rate(gamma1, gamma2, L, mu, epsilon) -> float:
    """Fixed-point contraction factor q = L/(g1 - mu) + eps L/(mu - eps g2)."""
    if mu - epsilon * gamma2 <= 0:
        return np.inf
    return L / (gamma1 - mu) + epsilon * L / (mu - epsilon * gamma2)


def _probe_points(n, m, count, rng):
    x = 3.0 * rng.standard_normal((n, count))
    y = 3.0 * rng.standard_normal((m, count))
    return x, y


def validate_hypotheses(
    model: SlowFastModel,
    mu: float | None = None,
    probe_count: int = 2000,
    rng: np.random.Generator | None = None,
) -> HypothesisReport:
    """Check (coercive A, contractive exp(Bt), Lipschitz/bounded U and V,
    spectral-gap inequality) and derive the admissible epsilon threshold.

    Declared Lipschitz and bound constants are spot-checked on random probe
    pairs; a violation beyond 1e-9 fails the corresponding hypothesis flag.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    gamma1 = model.gamma1()
    gamma2, gamma3 = fitted_decay_rates(model.B)
    L, m_u, m_v = model.declared_L, model.declared_MU, model.declared_MV
    if mu is None:
        mu = (gamma1 - L) / 2.0 if gamma1 > L else gamma1 / 2.0

    passed = {"H1": gamma1 > 0, "H2": gamma2 > 0 and gamma3 > 0, "H4": gamma1 > L}

    x1, y1 = _probe_points(model.n, model.m, probe_count, rng)
    x2, y2 = _probe_points(model.n, model.m, probe_count, rng)
    du = np.linalg.norm(model.U(x1, y1) - model.U(x2, y2), axis=0)
    dv = np.linalg.norm(model.V(x1, y1) - model.V(x2, y2), axis=0)
    dist = np.linalg.norm(x1 - x2, axis=0) + np.linalg.norm(y1 - y2, axis=0)
    passed["H3"] = bool(
        np.all(du <= L * dist + 1e-9) and np.all(dv <= L * dist + 1e-9)
    )
    passed["H5"] = bool(
        np.all(np.linalg.norm(model.U(x1, y1), axis=0) <= m_u + 1e-9)
        and np.all(np.linalg.norm(model.V(x1, y1), axis=0) <= m_v + 1e-9)
    )

    eps0 = None
    if passed["H1"] and passed["H4"] and 0 < mu < gamma1:
        eps0 = epsilon0_closed_form(gamma1, gamma2, L, mu)
    return HypothesisReport(
        gamma1=gamma1, gamma2=gamma2, gamma3=gamma3,
        L=L, M_U=m_u, M_V=m_v, mu=float(mu), epsilon0=eps0, passed=passed,
    )


def _check_state(u, v, k):
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise DivergenceError(k)


def simulate_full(
    model: SlowFastModel,
    fast_noise,
    slow_noise,
    z0,
    T: float,
    dt: float,
) -> TrajectoryPair:
    """Euler-Maruyama integration of the original slow-fast system.

    Jump increments are read off the supplied noise paths, so two runs at
    different resolutions see the same realized jumps.
    """
    if dt > model.epsilon / 50.0 * (1 + 1e-9):
        raise StiffnessError(
            f"dt={dt} too large for epsilon={model.epsilon}; need dt <= eps/50"
        )
    n_steps = round(T / dt)
    times = dt * np.arange(n_steps + 1)
    d_fast = fast_noise.increments(times)
    d_slow = slow_noise.increments(times)
    eps, alpha = model.epsilon, model.alpha
    u = np.zeros((n_steps + 1, model.n))
    v = np.zeros((n_steps + 1, model.m))
    u[0], v[0] = np.asarray(z0[0], float).ravel(), np.asarray(z0[1], float).ravel()
    amp1 = model.sigma1 / eps ** (1.0 / alpha)
    for k in range(n_steps):
        uk, vk = u[k], v[k]
        u[k + 1] = uk + (model.A @ uk + model.U(uk, vk)) * (dt / eps) + amp1 * d_fast[k]
        v[k + 1] = vk + (model.B @ vk + model.V(uk, vk)) * dt + model.sigma2 * d_slow[k]
        _check_state(u[k + 1], v[k + 1], k + 1)
    return TrajectoryPair(times=times, u_path=u, v_path=v, representation="original")


def _aligned_values(stat: StationaryPath, times: np.ndarray) -> np.ndarray:
    try:
        return stat.values_at(times)
    except Exception as exc:  # grid mismatch surfaces as alignment error
        raise AlignmentError(str(exc)) from exc


def to_transformed(
    traj: TrajectoryPair, zeta: StationaryPath, varsigma: StationaryPath
) -> TrajectoryPair:
    """Subtract the stationary solutions pointwise: (u, v) -> (u - zeta, v - vs)."""
    if traj.representation != "original":
        raise AlignmentError("trajectory is already in transformed coordinates")
    return TrajectoryPair(
        times=traj.times,
        u_path=traj.u_path - _aligned_values(zeta, traj.times),
        v_path=traj.v_path - _aligned_values(varsigma, traj.times),
        representation="transformed",
    )


def from_transformed(
    traj: TrajectoryPair, zeta: StationaryPath, varsigma: StationaryPath
) -> TrajectoryPair:
    if traj.representation != "transformed":
        raise AlignmentError("trajectory is not in transformed coordinates")
    return TrajectoryPair(
        times=traj.times,
        u_path=traj.u_path + _aligned_values(zeta, traj.times),
        v_path=traj.v_path + _aligned_values(varsigma, traj.times),
        representation="original",
    )


def simulate_transformed(
    model: SlowFastModel,
    zeta: StationaryPath,
    varsigma: StationaryPath,
    zbar0,
    T: float,
    dt: float,
) -> TrajectoryPair:
    """Drift-only integration of the noise-transformed system.

    The stationary paths enter the interaction arguments, the noise itself
    has been absorbed into them.
    """
    if dt > model.epsilon / 50.0 * (1 + 1e-9):
        raise StiffnessError(
            f"dt={dt} too large for epsilon={model.epsilon}; need dt <= eps/50"
        )
    n_steps = round(T / dt)
    times = dt * np.arange(n_steps + 1)
    zt = _aligned_values(zeta, times)
    st = _aligned_values(varsigma, times)
    eps = model.epsilon
    u = np.zeros((n_steps + 1, model.n))
    v = np.zeros((n_steps + 1, model.m))
    u[0] = np.asarray(zbar0[0], float).ravel()
    v[0] = np.asarray(zbar0[1], float).ravel()
    for k in range(n_steps):
        uk, vk = u[k], v[k]
        u[k + 1] = uk + (model.A @ uk + model.U(uk + zt[k], vk + st[k])) * (dt / eps)
        v[k + 1] = vk + (model.B @ vk + model.V(uk + zt[k], vk + st[k])) * dt
        _check_state(u[k + 1], v[k + 1], k + 1)
    return TrajectoryPair(times=times, u_path=u, v_path=v, representation="transformed")
