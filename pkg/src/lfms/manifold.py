"""Random invariant manifold via weighted fixed-point iteration.

The manifold is the graph of a map F taking a slow coordinate to the fast
coordinate.  F is obtained by solving an integral equation on a backward
time window with exponentially weighted sup-norm; the integral operator is
a contraction when the time-scale separation is strong enough.

Internally trajectories are stored component-major with shape
(components, time, batch) so that the interaction functions, which expect
the component axis first, apply directly and the exponential-kernel
recurrences run as scipy.signal.lfilter calls along the time axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.signal import lfilter

from .errors import (
    ContractionError,
    NonConvergenceError,
    ParameterError,
    WindowError,
)
from .model import SlowFastModel, fitted_decay_rates, simulate_transformed

_RATE_CACHE: dict = {}


def slow_rates(b_mat: np.ndarray):
    """Cached (gamma2, gamma3) for a slow matrix."""
    key = (b_mat.shape, b_mat.tobytes())
    if key not in _RATE_CACHE:
        _RATE_CACHE[key] = fitted_decay_rates(b_mat)
    return _RATE_CACHE[key]


@dataclass(frozen=True)
class BackwardWindow:
    """Truncated backward window and solver tolerances.

    The window must be long enough that the discarded tail of the fast
    convolution integral is below `truncation_tol`:
    exp(-(gamma1 - mu) * t_back / eps) <= truncation_tol.
    """

    t_back: float
    dt: float
    mu: float
    picard_tol: float = 1e-8
    truncation_tol: float = 1e-8
    max_iter: int = 200

    def __post_init__(self):
        if self.t_back <= 0 or self.dt <= 0:
            raise ParameterError("t_back and dt must be positive")
        if self.mu <= 0:
            raise ParameterError("mu must be positive")
        if round(self.t_back / self.dt) < 2:
            raise ParameterError("window must contain at least two steps")

    def validate(self, model: SlowFastModel, gamma1: float):
        if gamma1 - self.mu <= model.declared_L:
            raise ParameterError(
                "mu must satisfy gamma1 - mu > L for the weighted norm"
            )
        tail = math.exp(-(gamma1 - self.mu) * self.t_back / model.epsilon)
        if tail > self.truncation_tol:
            need = (
                model.epsilon
                * math.log(1.0 / self.truncation_tol)
                / (gamma1 - self.mu)
            )
            raise WindowError(
                f"t_back={self.t_back} leaves truncation tail {tail:.2e}; "
                f"need t_back >= {need:.4g}"
            )


def suggest_t_back(model: SlowFastModel, mu: float, dt: float,
                   truncation_tol: float = 1e-8) -> float:
    """Shortest window (a multiple of dt) meeting the truncation invariant."""
    gamma1 = model.gamma1()
    if gamma1 - mu <= 0:
        raise ParameterError("mu must be below gamma1")
    raw = model.epsilon * math.log(1.0 / truncation_tol) / (gamma1 - mu)
    return math.ceil(raw / dt) * dt


@dataclass(frozen=True)
class ManifoldSolution:
    """Fixed-point trajectory on [-t_back, 0] and the map value at 0."""

    times: np.ndarray
    u_hat: np.ndarray
    v_hat: np.ndarray
    F_value: np.ndarray
    iterations: int
    final_residual: float
    contraction_factor: float
    q_bound: float


@dataclass(frozen=True)
class ShadowPoint:
    """On-manifold initial point tracking a given off-manifold trajectory."""

    z_bar_bar_0: tuple
    times: np.ndarray
    X_path: np.ndarray
    Y_path: np.ndarray
    decay_cert: float
    sup_weighted: float
    bound_sup: float
    iterations: int
    final_residual: float


def _is_diag(mat):
    return np.count_nonzero(mat - np.diag(np.diagonal(mat))) == 0


def _filter_time(decay, x):
    """y[:, k] = decay_i y[:, k-1] + x[:, k] along axis 1, per component i."""
    out = np.empty_like(x)
    for i, d in enumerate(decay):
        out[i] = lfilter([1.0], [1.0, -d], x[i], axis=0)
    return out


def _tdot(mat, arr):
    return np.tensordot(mat, arr, axes=(1, 0))


def _forward_conv(a_mat, rate_eps, dt, g):
    """Trapezoid of (1/eps) int e^{A (t-r)/eps} g(r) dr from the grid start.

    g has shape (n, T, ...); the kernel is applied exactly per step so the
    stiff exponential is never Euler-discretized.
    """
    half = dt / (2.0 * rate_eps)
    if _is_diag(a_mat):
        d = np.exp(np.diagonal(a_mat) * dt / rate_eps)
        shp = (slice(None),) + (None,) * (g.ndim - 2)
        x = np.zeros_like(g)
        x[:, 1:] = half * (d[shp] * g[:, :-1] + g[:, 1:])
        return _filter_time(d, x)
    ker = expm(a_mat * dt / rate_eps)
    out = np.zeros_like(g)
    for j in range(1, g.shape[1]):
        out[:, j] = _tdot(ker, out[:, j - 1]) + half * (
            _tdot(ker, g[:, j - 1]) + g[:, j]
        )
    return out


def _backward_conv(b_mat, dt, h):
    """Trapezoid of int_t^{T_end} e^{B (t-r)} h(r) dr, zero at the grid end."""
    hr = h[:, ::-1]
    half = dt / 2.0
    if _is_diag(b_mat):
        d = np.exp(-np.diagonal(b_mat) * dt)
        shp = (slice(None),) + (None,) * (h.ndim - 2)
        x = np.zeros_like(hr)
        x[:, 1:] = half * (d[shp] * hr[:, :-1] + hr[:, 1:])
        return _filter_time(d, x)[:, ::-1]
    ker = expm(-b_mat * dt)
    out = np.zeros_like(hr)
    for j in range(1, hr.shape[1]):
        out[:, j] = _tdot(ker, out[:, j - 1]) + half * (
            _tdot(ker, hr[:, j - 1]) + hr[:, j]
        )
    return out[:, ::-1]


def _homogeneous_slow(b_mat, taus, v0):
    """e^{B tau} v0 on a grid ending at tau = 0; v0 shape (m, B)."""
    if _is_diag(b_mat):
        b = np.diagonal(b_mat)
        return np.exp(b[:, None] * taus[None, :])[:, :, None] * v0[:, None, :]
    out = np.empty((b_mat.shape[0], len(taus), v0.shape[1]))
    out[:, -1] = v0
    ker = expm(-b_mat * (taus[1] - taus[0]))
    for j in range(len(taus) - 2, -1, -1):
        out[:, j] = _tdot(ker, out[:, j + 1])
    return out


def _vec_norm(arr):
    """Euclidean norm over the component axis: (n, T, B) -> (T, B)."""
    return np.sqrt(np.sum(arr * arr, axis=0))


def _stationary_block(obj, taus, t_shift):
    """Stationary forcing as (components, time, batch).

    Accepts either a StationaryPath (shared noise across the batch) or a
    raw ndarray of per-batch values shaped (components, time) or
    (components, time, batch), as produced by ensemble generators.
    """
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return obj[:, :, None]
        return obj
    return np.moveaxis(obj.values_at(taus + t_shift), 0, 1)[:, :, None]


def contraction_bound(model, mu, L_slow=None):
    """q = L/(gamma1 - mu) + eps L_slow/(mu - eps gamma2); inf if inadmissible."""
    gamma1 = model.gamma1()
    gamma2, _ = slow_rates(model.B)
    L = model.declared_L
    ls = L if L_slow is None else L_slow
    head = L / (gamma1 - mu) if gamma1 > mu else np.inf
    if ls == 0.0:
        return head
    if mu - model.epsilon * gamma2 <= 0:
        return np.inf
    return head + model.epsilon * ls / (mu - model.epsilon * gamma2)


def solve_lyapunov_perron(
    model: SlowFastModel,
    zeta,
    varsigma,
    v_bar0,
    window: BackwardWindow,
    t_shift: float = 0.0,
    init=None,
    L_slow: float | None = None,
) -> ManifoldSolution:
    """Solve the backward integral equation and return the graph map value.

    Parameters
    ----------
    v_bar0 : array, shape (m,) or (m, batch)
        Anchor value(s) of the slow coordinate at time 0.  A trailing batch
        axis solves many anchors against the same noise in one pass.
    t_shift : float
        Evaluate on the noise shifted by this time: stationary paths are
        sampled at tau + t_shift, which realizes the map along a trajectory.
    init : optional (u_init, v_init), time-major
        Warm start for the iteration (for example the previous step's
        solution shifted by one grid index).
    L_slow : optional float
        Lipschitz constant of the slow interaction when it differs from the
        declared one (the time-rescaled variant passes eps * L or 0 here).

    Notes
    -----
    Both integrals use trapezoidal quadrature with the exact one-step
    exponential kernel, so stiffness of the fast block does not degrade
    the quadrature.  The iteration stops when the weighted sup-norm of the
    update falls below picard_tol.
    """
    eps = model.epsilon
    gamma1 = model.gamma1()
    window.validate(model, gamma1)
    q = contraction_bound(model, window.mu, L_slow)
    if q >= 1.0:
        raise ContractionError(
            f"contraction factor bound {q:.4f} >= 1; epsilon too large "
            "for this spectral gap"
        )
    dt = window.dt
    n_w = round(window.t_back / dt)
    taus = dt * np.arange(-n_w, 1)

    v_bar0 = np.asarray(v_bar0, float)
    squeeze = v_bar0.ndim == 1
    v0 = v_bar0[:, None] if squeeze else v_bar0
    if v0.shape[0] != model.m:
        raise ParameterError("v_bar0 has wrong slow dimension")

    zt = _stationary_block(zeta, taus, t_shift)
    st = _stationary_block(varsigma, taus, t_shift)

    v_homog = _homogeneous_slow(model.B, taus, v0)
    if init is None:
        u_hat = np.zeros((model.n, len(taus), v0.shape[1]))
        v_hat = v_homog.copy()
    else:
        u_hat = np.ascontiguousarray(np.moveaxis(np.atleast_3d(init[0]), 0, 1))
        v_hat = np.ascontiguousarray(np.moveaxis(np.atleast_3d(init[1]), 0, 1))

    weight = np.exp(window.mu * taus / eps)[:, None]
    prev_res = None
    worst_ratio = 0.0
    res = np.inf
    for it in range(1, window.max_iter + 1):
        g = model.U(u_hat + zt, v_hat + st)
        h = model.V(u_hat + zt, v_hat + st)
        u_new = _forward_conv(model.A, eps, dt, g)
        v_new = v_homog - _backward_conv(model.B, dt, h)
        res = float(
            np.max(weight * (_vec_norm(u_new - u_hat) + _vec_norm(v_new - v_hat)))
        )
        u_hat, v_hat = u_new, v_new
        if prev_res is not None and prev_res > 10.0 * window.picard_tol:
            worst_ratio = max(worst_ratio, res / prev_res)
        if res < window.picard_tol:
            break
        prev_res = res
    else:
        raise NonConvergenceError(res, window.max_iter)

    f_val = u_hat[:, -1]
    u_out = np.moveaxis(u_hat, 0, 1)
    v_out = np.moveaxis(v_hat, 0, 1)
    if squeeze:
        f_val, u_out, v_out = f_val[:, 0], u_out[..., 0], v_out[..., 0]
    return ManifoldSolution(
        times=taus,
        u_hat=u_out,
        v_hat=v_out,
        F_value=f_val,
        iterations=it,
        final_residual=res,
        contraction_factor=worst_ratio,
        q_bound=q,
    )


def eval_F(model, zeta, varsigma, v_bar, window, t_shift: float = 0.0,
           init=None, L_slow=None):
    """Graph-map value F at the (possibly shifted) noise; see the solver."""
    sol = solve_lyapunov_perron(
        model, zeta, varsigma, v_bar, window,
        t_shift=t_shift, init=init, L_slow=L_slow,
    )
    return sol.F_value


class FTrajectoryEvaluator:
    """Evaluate the graph map along a trajectory with warm starts.

    Successive calls at increasing grid times reuse the previous solution
    (shifted by the elapsed number of grid steps) as the initial iterate,
    which typically cuts the iteration count to a handful.  Results are
    memoized by (grid index, anchor bytes).
    """

    def __init__(self, model, zeta, varsigma, window, L_slow=None):
        self.model = model
        self.zeta = zeta
        self.varsigma = varsigma
        self.window = window
        self.L_slow = L_slow
        self._memo: dict = {}
        self._last = None  # (grid index, u_hat, v_hat) time-major

    def value(self, t: float, v_bar) -> np.ndarray:
        dt = self.window.dt
        k = round(t / dt)
        if abs(k * dt - t) > 1e-9 * max(dt, 1.0):
            raise WindowError("evaluation time must lie on the window grid")
        v_bar = np.asarray(v_bar, float)
        key = (k, v_bar.tobytes())
        if key in self._memo:
            return self._memo[key]
        init = None
        if self._last is not None:
            k_prev, u_prev, v_prev = self._last
            shift = k - k_prev
            if 0 <= shift < u_prev.shape[0]:
                u0 = np.concatenate(
                    [u_prev[shift:], np.repeat(u_prev[-1:], shift, axis=0)]
                )
                v0 = np.concatenate(
                    [v_prev[shift:], np.repeat(v_prev[-1:], shift, axis=0)]
                )
                init = (u0, v0)
        sol = solve_lyapunov_perron(
            self.model, self.zeta, self.varsigma, v_bar, self.window,
            t_shift=k * dt, init=init, L_slow=self.L_slow,
        )
        self._last = (k, np.atleast_3d(sol.u_hat), np.atleast_3d(sol.v_hat))
        self._memo[key] = sol.F_value
        return sol.F_value

    def clear(self):
        self._memo.clear()
        self._last = None


def manifold_point(model, zeta, varsigma, y, window):
    """Lift a slow coordinate y to the manifold in original coordinates."""
    f_val = eval_F(model, zeta, varsigma, np.asarray(y, float), window)
    return f_val + zeta.value_at(0.0), np.asarray(y, float) + varsigma.value_at(0.0)


def _backward_extension(a_mat, taus_neg, u0):
    """(I - |t| A)^{-1} u0 on the nonpositive part of the grid."""
    eye = np.eye(a_mat.shape[0])
    out = np.empty((a_mat.shape[0], len(taus_neg)))
    for j, t in enumerate(taus_neg):
        out[:, j] = np.linalg.solve(eye + t * a_mat, u0)  # t <= 0 so |t| = -t
    return out


def shadow_point(
    model: SlowFastModel,
    zeta,
    varsigma,
    z_bar0,
    T_win: float,
    window: BackwardWindow,
) -> ShadowPoint:
    """Find the on-manifold point whose orbit tracks the orbit of z_bar0.

    The correction (X, Y) solves a two-sided integral equation: the fast
    component integrates forward from -infinity, the slow component
    backward from +infinity (truncated at T_win, with the analytic tail
    bound folded into the reported residual).  The base trajectory is the
    actual forward orbit for t > 0 and a resolvent extension for t <= 0.
    """
    eps = model.epsilon
    dt = window.dt
    gamma1 = model.gamma1()
    gamma2, _ = slow_rates(model.B)
    window.validate(model, gamma1)
    mu = window.mu
    q = contraction_bound(model, mu)
    if q >= 1.0:
        raise ContractionError(f"contraction factor bound {q:.4f} >= 1")

    u0 = np.asarray(z_bar0[0], float).ravel()
    v0 = np.asarray(z_bar0[1], float).ravel()
    n_neg = round(max(T_win, window.t_back) / dt)
    n_pos = round(T_win / dt)
    taus = dt * np.arange(-n_neg, n_pos + 1)
    j0 = n_neg  # index of tau = 0

    # base trajectory: resolvent extension backward, true orbit forward
    zb_u = np.empty((model.n, len(taus)))
    zb_v = np.empty((model.m, len(taus)))
    zb_u[:, : j0 + 1] = _backward_extension(model.A, taus[: j0 + 1], u0)
    zb_v[:, : j0 + 1] = v0[:, None]
    sub = max(1, math.ceil(dt / (eps / 50.0)))
    fwd = simulate_transformed(
        model, zeta, varsigma, (u0, v0), n_pos * dt, dt / sub
    )
    zb_u[:, j0:] = fwd.u_path[::sub].T
    zb_v[:, j0:] = fwd.v_path[::sub].T

    zt = np.moveaxis(zeta.values_at(taus), 0, 1)
    st = np.moveaxis(varsigma.values_at(taus), 0, 1)
    g_base = model.U(zb_u + zt, zb_v + st)
    h_base = model.V(zb_u + zt, zb_v + st)

    # inhomogeneous term of the correction equation
    i1 = _forward_conv(model.A, eps, dt, g_base)
    s_neg = _backward_conv(model.B, dt, h_base[:, : j0 + 1])
    v_hom = _homogeneous_slow(model.B, taus[: j0 + 1], v0[:, None])[:, :, 0]
    z0_u = np.empty_like(zb_u)
    z0_v = np.zeros_like(zb_v)
    z0_u[:, : j0 + 1] = -zb_u[:, : j0 + 1] + i1[:, : j0 + 1]
    z0_v[:, : j0 + 1] = -zb_v[:, : j0 + 1] + v_hom - s_neg
    kick = i1[:, j0] - u0
    if _is_diag(model.A):
        a = np.diagonal(model.A)
        z0_u[:, j0:] = np.exp(a[:, None] * taus[None, j0:] / eps) * kick[:, None]
    else:
        ker = expm(model.A * dt / eps)
        z0_u[:, j0] = kick
        for j in range(j0 + 1, len(taus)):
            z0_u[:, j] = _tdot(ker, z0_u[:, j - 1])

    weight = np.exp(mu * taus / eps)
    tail_coef = (
        eps * model.declared_L * math.exp(-mu * T_win / eps)
        / (mu - eps * gamma2)
    )
    x_cur = np.zeros_like(zb_u)
    y_cur = np.zeros_like(zb_v)
    res = np.inf
    for it in range(1, window.max_iter + 1):
        du = model.U(zb_u + x_cur + zt, zb_v + y_cur + st) - g_base
        dv = model.V(zb_u + x_cur + zt, zb_v + y_cur + st) - h_base
        x_new = z0_u + _forward_conv(model.A, eps, dt, du)
        y_new = z0_v - _backward_conv(model.B, dt, dv)
        sup_z = float(np.max(weight * (np.linalg.norm(x_new, axis=0)
                                       + np.linalg.norm(y_new, axis=0))))
        update = float(
            np.max(weight * (np.linalg.norm(x_new - x_cur, axis=0)
                             + np.linalg.norm(y_new - y_cur, axis=0)))
        )
        # the truncation tail is a fixed floor, reported but not iterated on
        res = update + tail_coef * sup_z
        x_cur, y_cur = x_new, y_new
        if update < window.picard_tol:
            break
    else:
        raise NonConvergenceError(res, window.max_iter)

    sup_weighted = float(
        np.max(weight * (np.linalg.norm(x_cur, axis=0)
                         + np.linalg.norm(y_cur, axis=0)))
    )
    bound_sup = (
        2.0 * (np.linalg.norm(u0) + np.linalg.norm(v0))
        + 2.0 * model.declared_MU / gamma1
        + model.declared_MV / gamma2
    ) / (1.0 - q)

    # decay certificate: log-linear fit of |Z| on (0, 5 eps]
    mask = (taus > 0) & (taus <= 5.0 * eps)
    mag = np.linalg.norm(x_cur, axis=0) + np.linalg.norm(y_cur, axis=0)
    fit_mask = mask & (mag > 1e-14)
    if fit_mask.sum() >= 2:
        slope = np.polyfit(taus[fit_mask], np.log(mag[fit_mask]), 1)[0]
        decay_cert = float(-slope)
    else:
        decay_cert = math.nan

    return ShadowPoint(
        z_bar_bar_0=(u0 + x_cur[:, j0], v0 + y_cur[:, j0]),
        times=taus,
        X_path=x_cur.T,
        Y_path=y_cur.T,
        decay_cert=decay_cert,
        sup_weighted=sup_weighted,
        bound_sup=float(bound_sup),
        iterations=it,
        final_residual=res,
    )
