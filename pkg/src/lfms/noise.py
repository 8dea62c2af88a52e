"""Two-sided alpha-stable and Levy sample paths, shifts, stationary solutions.

Paths live on uniform grids and are anchored so that the value at t = 0 is
exactly zero.  Negative time is filled by the mirror construction
L(t) = -L'((-t)-) with an independent copy L', which reproduces the law of a
two-sided process with independent stationary increments.

Conventions
-----------
* The "unit" symmetric alpha-stable law in dimension n has characteristic
  function exp(-c1(n, alpha) |u|^alpha); for n = 1 this is exp(-|u|^alpha).
  At alpha = 2 it degenerates to a centered Gaussian with covariance
  2 c1(n, 2) I.
* A path increment over a window of length h is distributed as
  h^(1/alpha) times the unit law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigurationError, ParameterError, WindowError

_GRID_TOL = 1e-9


def c1(n: int, alpha: float) -> float:
    """Scale constant of the isotropic stable characteristic exponent."""
    g = math.gamma
    return g((1 + alpha) / 2) * g(n / 2) / (math.sqrt(math.pi) * g((n + alpha) / 2))


def c2(n: int, alpha: float) -> float:
    """Density constant of the isotropic stable Levy measure."""
    g = math.gamma
    return alpha * g((n + alpha) / 2) / (
        2 ** (1 - alpha) * math.pi ** (n / 2) * g(1 - alpha / 2)
    )


@dataclass(frozen=True)
class StableParams:
    """Parameters of a symmetric alpha-stable driver.

    alpha = 2 is accepted so the sampler can be checked against the Gaussian
    limit; model-level code restricts to alpha < 2.
    """

    alpha: float
    scale: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not 1.0 < self.alpha <= 2.0:
            raise ParameterError(f"alpha must lie in (1, 2], got {self.alpha}")
        if self.scale < 0:
            raise ParameterError("scale must be nonnegative")
        if self.dim < 1:
            raise ParameterError("dim must be a positive integer")


def _cms_unit(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Chambers-Mallows-Stuck sample of the 1-d law with cf exp(-|u|^alpha)."""
    if alpha == 2.0:
        return math.sqrt(2.0) * rng.standard_normal(size)
    theta = rng.uniform(-math.pi / 2, math.pi / 2, size)
    expo = rng.standard_exponential(size)
    return (
        np.sin(alpha * theta)
        / np.cos(theta) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * theta) / expo) ** ((1.0 - alpha) / alpha)
    )


def _kanter_positive(a: float, size, rng: np.random.Generator) -> np.ndarray:
    """Positive a-stable variates with Laplace transform exp(-s^a), 0 < a < 1."""
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    ratio = np.sin((1.0 - a) * u) / e
    return np.sin(a * u) / np.sin(u) ** (1.0 / a) * ratio ** ((1.0 - a) / a)


def sample_alpha_stable(
    params: StableParams, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw i.i.d. unit-time samples of the symmetric stable law.

    Returns an array of shape (count, dim).  The law of a row is
    scale * X where X has characteristic function exp(-c1(dim, alpha)|u|^alpha);
    for dim = 1 and scale = 1 that is exp(-|u|^alpha).
    """
    if count < 1:
        raise ParameterError("count must be >= 1")
    n, alpha = params.dim, params.alpha
    if n == 1:
        out = _cms_unit(alpha, (count, 1), rng)
    elif alpha == 2.0:
        out = math.sqrt(2.0 * c1(n, 2.0)) * rng.standard_normal((count, n))
    else:
        # sub-Gaussian representation: sqrt(A) * N(0, c^2 I) is isotropic
        # stable with exponent (c^2/2)^(alpha/2) |u|^alpha
        c = math.sqrt(2.0) * c1(n, alpha) ** (1.0 / alpha)
        a_mix = _kanter_positive(alpha / 2.0, (count, 1), rng)
        out = c * np.sqrt(a_mix) * rng.standard_normal((count, n))
    return params.scale * out


@dataclass(frozen=True)
class CompoundPoissonJumps:
    """Small-jump family: Poisson arrivals, sizes uniform in the delta-ball."""

    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ParameterError("rate must be nonnegative")

    def intensity(self, delta: float) -> float:
        return self.rate

    def sample_sizes(self, count: int, dim: int, delta: float, rng) -> np.ndarray:
        if dim == 1:
            return rng.uniform(-delta, delta, (count, 1))
        direction = rng.standard_normal((count, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = delta * rng.uniform(0.0, 1.0, (count, 1)) ** (1.0 / dim)
        return direction * radius


@dataclass(frozen=True)
class TruncatedStableJumps:
    """Small-jump family: stable-type jumps on inner_cut*delta <= |u| <= delta.

    The symmetric stable Levy density c2(dim, alpha)/|u|^(dim+alpha) is
    truncated below at a small inner cutoff and simulated as compound
    Poisson; symmetry makes the compensated part a martingale with zero
    compensator drift.
    """

    alpha: float
    inner_cut: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ParameterError("jump-measure alpha must lie in (0, 2)")
        if not 0.0 < self.inner_cut < 1.0:
            raise ParameterError("inner_cut must lie in (0, 1)")

    def intensity(self, delta: float, dim: int = 1) -> float:
        r0 = self.inner_cut * delta
        surf = 2.0 if dim == 1 else 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)
        return (
            c2(dim, self.alpha)
            * surf
            * (r0 ** -self.alpha - delta ** -self.alpha)
            / self.alpha
        )

    def sample_sizes(self, count: int, dim: int, delta: float, rng) -> np.ndarray:
        r0 = self.inner_cut * delta
        # inverse CDF of the truncated power-law radial density r^(-1-alpha)
        u = rng.uniform(0.0, 1.0, (count, 1))
        radius = (
            r0 ** -self.alpha - u * (r0 ** -self.alpha - delta ** -self.alpha)
        ) ** (-1.0 / self.alpha)
        if dim == 1:
            sign = rng.choice([-1.0, 1.0], size=(count, 1))
            return sign * radius
        direction = rng.standard_normal((count, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return direction * radius


@dataclass(frozen=True)
class LevyTriplet:
    """Generating triplet of the slow Levy driver L = M R_t + small jumps."""

    diffusion_M: np.ndarray
    jump_spec: CompoundPoissonJumps | TruncatedStableJumps | None = None
    drift_b: np.ndarray | None = None
    cutoff_delta: float = 0.5

    def __post_init__(self):
        object.__setattr__(
            self, "diffusion_M", np.atleast_2d(np.asarray(self.diffusion_M, float))
        )
        if not 0.0 < self.cutoff_delta < 1.0:
            raise ParameterError("cutoff_delta must lie in (0, 1)")
        if self.drift_b is None:
            object.__setattr__(
                self, "drift_b", np.zeros(self.diffusion_M.shape[0])
            )
        else:
            object.__setattr__(
                self, "drift_b", np.asarray(self.drift_b, float).ravel()
            )

    @property
    def dim(self) -> int:
        return self.diffusion_M.shape[0]


def brownian_triplet(dim: int = 1, diffusion: float = 1.0) -> LevyTriplet:
    """Convenience: pure Brownian slow driver."""
    return LevyTriplet(diffusion_M=diffusion * np.eye(dim))


@dataclass(frozen=True)
class NoisePath:
    """A two-sided cadlag sample path on a uniform grid.

    `values[k]` is the path value at `t0 + k*dt` (right limit).  `jumps`
    registers discrete jump events (time, size); each jump is already folded
    into `values` at the first grid point >= its time.
    """

    t0: float
    dt: float
    values: np.ndarray
    jumps: tuple = ()

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t_end(self) -> float:
        return self.t0 + (len(self.values) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    def _indices(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        idx = np.rint((t - self.t0) / self.dt).astype(int)
        if np.any(np.abs(self.t0 + idx * self.dt - t) > 1e-6 * self.dt):
            raise WindowError("requested time does not lie on the path grid")
        if np.any(idx < 0) or np.any(idx >= len(self.values)):
            raise WindowError("requested time outside the path window")
        return idx

    def value_at(self, t) -> np.ndarray:
        return self.values[self._indices(t)]

    def increments(self, times: np.ndarray) -> np.ndarray:
        """Increments of the path over consecutive entries of `times`."""
        vals = self.value_at(times)
        return np.diff(vals, axis=0)


@dataclass(frozen=True)
class ShiftedView:
    """Lazy view of theta_s omega: view(t) = base(t + s) - base(s)."""

    base: NoisePath
    shift_t: float

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def dt(self) -> float:
        return self.base.dt

    @property
    def t0(self) -> float:
        return self.base.t0 - self.shift_t

    @property
    def t_end(self) -> float:
        return self.base.t_end - self.shift_t

    @property
    def times(self) -> np.ndarray:
        return self.base.times - self.shift_t

    @property
    def jumps(self) -> tuple:
        return tuple((t - self.shift_t, u) for t, u in self.base.jumps)

    def value_at(self, t) -> np.ndarray:
        anchor = self.base.value_at(self.shift_t)
        return self.base.value_at(np.asarray(t, float) + self.shift_t) - anchor

    def increments(self, times: np.ndarray) -> np.ndarray:
        return self.base.increments(np.asarray(times, float) + self.shift_t)


def shift_path(path, t: float):
    """Metric-dynamical shift; composing shifts adds the offsets exactly."""
    if isinstance(path, ShiftedView):
        return shift_path(path.base, path.shift_t + t)
    k = round(t / path.dt)
    if abs(k * path.dt - t) > _GRID_TOL:
        raise WindowError("shift must be a multiple of the grid step")
    view = ShiftedView(path, k * path.dt)
    if view.t0 > 0.0 or view.t_end < 0.0:
        raise WindowError("shifted window does not contain time 0")
    return view


def _window_sizes(window):
    t_back, t_fwd, dt = window
    if t_back < 0 or t_fwd < 0 or dt <= 0:
        raise ConfigurationError("window must satisfy T_back, T_fwd >= 0, dt > 0")
    nb, nf = round(t_back / dt), round(t_fwd / dt)
    if abs(nb * dt - t_back) > _GRID_TOL or abs(nf * dt - t_fwd) > _GRID_TOL:
        raise ConfigurationError("window lengths must be multiples of dt")
    return nb, nf


def generate_two_sided_stable(
    params: StableParams, window, rng: np.random.Generator
) -> NoisePath:
    """Two-sided symmetric alpha-stable path on [-T_back, T_fwd]."""
    nb, nf = _window_sizes(window)
    dt = window[2]
    step_scale = dt ** (1.0 / params.alpha)

    def forward(n):
        if n == 0:
            return np.zeros((0, params.dim))
        inc = step_scale * sample_alpha_stable(params, n, rng)
        return np.cumsum(inc, axis=0)

    fwd = forward(nf)
    mirror = forward(nb)  # independent copy, negated and reversed
    values = np.concatenate(
        [-mirror[::-1], np.zeros((1, params.dim)), fwd], axis=0
    )
    return NoisePath(t0=-nb * dt, dt=dt, values=values)


def _jump_events(spec, dim, delta, t_lo, t_hi, rng):
    lam = spec.intensity(delta) if isinstance(spec, CompoundPoissonJumps) else spec.intensity(delta, dim)
    count = rng.poisson(lam * (t_hi - t_lo))
    if count == 0:
        return []
    times = np.sort(rng.uniform(t_lo, t_hi, count))
    sizes = spec.sample_sizes(count, dim, delta, rng)
    return list(zip(times.tolist(), sizes))


def generate_two_sided_levy(
    triplet: LevyTriplet, window, rng: np.random.Generator
) -> NoisePath:
    """Two-sided Levy path: Brownian part M R_t plus compensated small jumps."""
    nb, nf = _window_sizes(window)
    dt = window[2]
    dim = triplet.dim
    m_mat = triplet.diffusion_M

    def one_side(n, t_hi):
        vals = np.zeros((n + 1, dim))
        if n == 0:
            return vals, []
        dr = math.sqrt(dt) * rng.standard_normal((n, m_mat.shape[1]))
        inc = dr @ m_mat.T + triplet.drift_b * dt
        events = []
        if triplet.jump_spec is not None:
            events = _jump_events(
                triplet.jump_spec, dim, triplet.cutoff_delta, 0.0, t_hi, rng
            )
            for t_j, u_j in events:
                k = min(int(math.ceil(t_j / dt - _GRID_TOL)), n)
                inc[max(k - 1, 0)] += u_j
        vals[1:] = np.cumsum(inc, axis=0)
        return vals, events

    fwd, fwd_events = one_side(nf, nf * dt)
    mirror, mirror_events = one_side(nb, nb * dt)
    values = np.concatenate([-mirror[:0:-1], fwd], axis=0)
    jumps = tuple(
        [(-t, -u) for t, u in mirror_events] + [(t, u) for t, u in fwd_events]
    )
    return NoisePath(t0=-nb * dt, dt=dt, values=values, jumps=jumps)


@dataclass(frozen=True)
class StationaryPath:
    """Grid samples of a stationary solution t -> zeta(theta_t omega).

    Values before `valid_from` still carry the burn-in transient of the
    truncated stochastic convolution and should not be consumed.
    """

    t0: float
    dt: float
    values: np.ndarray
    kind: str
    valid_from: float

    @property
    def t_end(self) -> float:
        return self.t0 + (len(self.values) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    def values_at(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        idx = np.rint((t - self.t0) / self.dt).astype(int)
        if np.any(np.abs(self.t0 + idx * self.dt - t) > 1e-6 * self.dt):
            raise WindowError("requested time does not lie on the stationary grid")
        if np.any(idx < 0) or np.any(idx >= len(self.values)):
            raise WindowError("requested time outside the stationary window")
        return self.values[idx]

    def value_at(self, t) -> np.ndarray:
        return self.values_at(float(t))


def zero_stationary(t0: float, dt: float, n_points: int, dim: int) -> StationaryPath:
    """Identically zero stationary path (used when a noise intensity is 0)."""
    return StationaryPath(
        t0=t0, dt=dt, values=np.zeros((n_points, dim)), kind="zero", valid_from=t0
    )


def _is_diagonal(mat: np.ndarray) -> bool:
    return np.count_nonzero(mat - np.diag(np.diagonal(mat))) == 0


def _kernel_filter(decay: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y_k = decay_i * y_{k-1} + x_k, componentwise over the last axis."""
    out = np.empty_like(x)
    for i, d in enumerate(decay):
        out[:, i] = lfilter([1.0], [1.0, -d], x[:, i])
    return out


def stationary_fast(
    model, stable_path, tol: float = 1e-9, scheme: str = "exact"
) -> StationaryPath:
    """Stationary solution of d zeta = (A/eps) zeta dt + (sigma1/eps^(1/alpha)) dL.

    Driven pathwise by the increments of `stable_path`.  For diagonal A each
    component uses the exact exponential kernel with an increment rescaling
    that makes the stationary marginal scale exact:
    (sigma1^alpha / (alpha |a|))^(1/alpha), independent of eps.

    scheme = "euler" instead replicates the explicit Euler update of the
    full integrator step for step, so that subtracting the path from an
    Euler trajectory driven by the same noise cancels the increments
    exactly.  Use it for pathwise-coupled comparisons; the marginal then
    carries an O(dt/eps) bias.
    """
    a_mat = model.A
    eps, alpha, sigma1 = model.epsilon, model.alpha, model.sigma1
    dt = stable_path.dt
    times = stable_path.times
    gamma1 = -np.linalg.eigvalsh((a_mat + a_mat.T) / 2).max()
    if gamma1 <= 0:
        raise ParameterError("A must be Hurwitz for a stationary fast solution")
    burn = math.log(1.0 / tol) * eps / gamma1
    if times[-1] - times[0] < burn:
        raise WindowError(
            f"path window too short for burn-in ({burn:.3g} time units needed)"
        )
    inc = np.diff(stable_path.values, axis=0)
    if sigma1 == 0.0:
        return zero_stationary(times[0], dt, len(times), a_mat.shape[0])
    if scheme not in ("exact", "euler"):
        raise ConfigurationError(f"unknown stationary scheme {scheme!r}")
    amp = sigma1 / eps ** (1.0 / alpha)
    if _is_diagonal(a_mat):
        a = np.diagonal(a_mat)
        if scheme == "euler":
            decay = 1.0 + a * dt / eps
            if np.any(np.abs(decay) >= 1.0):
                raise ParameterError("euler scheme unstable: need dt < eps/|a|")
            phi = np.ones_like(a)
        else:
            decay = np.exp(a * dt / eps)
            # rescale so the convolution increment has the exact stable scale
            phi = ((1.0 - decay ** alpha) / (alpha * (-a) * dt / eps)) ** (1.0 / alpha)
        x = np.zeros_like(stable_path.values)
        x[1:] = amp * phi * inc
        vals = _kernel_filter(decay, x)
    else:
        from scipy.linalg import expm

        if scheme == "euler":
            ker = np.eye(a_mat.shape[0]) + a_mat * dt / eps
        else:
            ker = expm(a_mat * dt / eps)
        vals = np.zeros_like(stable_path.values)
        for k in range(1, len(times)):
            vals[k] = ker @ vals[k - 1] + amp * inc[k - 1]
    return StationaryPath(
        t0=times[0], dt=dt, values=vals, kind="fast-stable",
        valid_from=times[0] + burn,
    )


def stationary_slow(
    model, levy_path, tol: float = 1e-9, scheme: str = "exact"
) -> StationaryPath:
    """Stationary solution of d varsigma = B varsigma dt + sigma2 dL.

    See stationary_fast for the meaning of scheme = "euler".
    """
    b_mat = model.B
    sigma2 = model.sigma2
    dt = levy_path.dt
    times = levy_path.times
    from scipy.linalg import expm

    gamma3 = -max(np.real(np.linalg.eigvals(b_mat)))
    if gamma3 <= 0:
        raise ParameterError("B must be Hurwitz for a stationary slow solution")
    burn = math.log(1.0 / tol) / gamma3
    if times[-1] - times[0] < burn:
        raise WindowError(
            f"path window too short for burn-in ({burn:.3g} time units needed)"
        )
    if sigma2 == 0.0:
        return zero_stationary(times[0], dt, len(times), b_mat.shape[0])
    if scheme not in ("exact", "euler"):
        raise ConfigurationError(f"unknown stationary scheme {scheme!r}")
    inc = np.diff(levy_path.values, axis=0)
    if _is_diagonal(b_mat):
        b = np.diagonal(b_mat)
        if scheme == "euler":
            decay = 1.0 + b * dt
            if np.any(np.abs(decay) >= 1.0):
                raise ParameterError("euler scheme unstable: need dt < 1/|b|")
            phi = np.ones_like(b)
        else:
            decay = np.exp(b * dt)
            # Gaussian-exact variance correction for the Brownian part
            phi = np.sqrt((1.0 - decay ** 2) / (2.0 * (-b) * dt))
        x = np.zeros_like(levy_path.values)
        x[1:] = sigma2 * phi * inc
        vals = _kernel_filter(decay, x)
    else:
        if scheme == "euler":
            ker = np.eye(b_mat.shape[0]) + b_mat * dt
        else:
            ker = expm(b_mat * dt)
        vals = np.zeros_like(levy_path.values)
        for k in range(1, len(times)):
            vals[k] = ker @ vals[k - 1] + sigma2 * inc[k - 1]
    return StationaryPath(
        t0=times[0], dt=dt, values=vals, kind="slow-levy",
        valid_from=times[0] + burn,
    )


def stable_increments(
    alpha: float, dt: float, size, rng: np.random.Generator
) -> np.ndarray:
    """Per-step unit-intensity stable increments for on-the-fly propagation."""
    return dt ** (1.0 / alpha) * _cms_unit(alpha, size, rng)


def stable_increment_block(
    params: StableParams, dt: float, steps: int, count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """(steps, count, dim) i.i.d. stable increments for an ensemble run."""
    out = sample_alpha_stable(params, steps * count, rng)
    return dt ** (1.0 / params.alpha) * out.reshape(steps, count, params.dim)


def levy_increment_block(
    triplet: LevyTriplet, dt: float, steps: int, count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """(steps, count, dim) one-step slow-driver increments for an ensemble."""
    m_mat = triplet.diffusion_M
    dr = math.sqrt(dt) * rng.standard_normal((steps, count, m_mat.shape[1]))
    inc = dr @ m_mat.T + triplet.drift_b * dt
    if triplet.jump_spec is not None:
        spec, delta, dim = triplet.jump_spec, triplet.cutoff_delta, triplet.dim
        lam = (
            spec.intensity(delta)
            if isinstance(spec, CompoundPoissonJumps)
            else spec.intensity(delta, dim)
        )
        counts = rng.poisson(lam * dt, steps * count)
        total = int(counts.sum())
        if total:
            sizes = spec.sample_sizes(total, dim, delta, rng)
            owner = np.repeat(np.arange(steps * count), counts)
            flat = inc.reshape(steps * count, dim)
            np.add.at(flat, owner, sizes)
            inc = flat.reshape(steps, count, dim)
    return inc


def levy_increments(
    triplet: LevyTriplet, dt: float, count: int, rng: np.random.Generator
) -> np.ndarray:
    """One time step of the slow Levy driver for `count` independent copies."""
    m_mat = triplet.diffusion_M
    dr = math.sqrt(dt) * rng.standard_normal((count, m_mat.shape[1]))
    inc = dr @ m_mat.T + triplet.drift_b * dt
    if triplet.jump_spec is not None:
        spec, delta, dim = triplet.jump_spec, triplet.cutoff_delta, triplet.dim
        lam = (
            spec.intensity(delta)
            if isinstance(spec, CompoundPoissonJumps)
            else spec.intensity(delta, dim)
        )
        counts = rng.poisson(lam * dt, count)
        total = int(counts.sum())
        if total:
            sizes = spec.sample_sizes(total, dim, delta, rng)
            owner = np.repeat(np.arange(count), counts)
            np.add.at(inc, owner, sizes)
    return inc
