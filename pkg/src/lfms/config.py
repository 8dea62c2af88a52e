"""Structured text configuration: parsing, validation, function catalog.

Config files are line-oriented INI sections with key = value pairs.
Interaction terms, sensors, and test functionals are selected by catalog
name so that configured objects stay picklable for process pools.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .filtering import GaussianPrior, Sensor, TestFunctional
from .manifold import BackwardWindow
from .model import SlowFastModel, epsilon0_closed_form
from .noise import brownian_triplet


# ---------------------------------------------------------------------------
# picklable function catalog


@dataclass(frozen=True)
class ZeroFn:
    """Identically zero interaction."""

    def __call__(self, x, y):
        return np.zeros_like(x)


@dataclass(frozen=True)
class ScaledSin:
    """c * sin(x + y), elementwise after summing blocks."""

    c: float = 0.5

    def __call__(self, x, y):
        return self.c * np.sin(x + y)


@dataclass(frozen=True)
class ScaledCos:
    """c * cos(x - y), elementwise after differencing blocks."""

    c: float = 0.5

    def __call__(self, x, y):
        return self.c * np.cos(x - y)


@dataclass(frozen=True)
class TanhSumFn:
    """tanh(x) + tanh(y), summed over components per block."""

    def __call__(self, x, y):
        return np.tanh(x).sum(axis=0) + np.tanh(y).sum(axis=0)


@dataclass(frozen=True)
class ConstantFn:
    c: float = 1.0

    def __call__(self, x, y):
        shape = np.broadcast_shapes(x.shape, y.shape)[1:]
        return np.full(shape, self.c)


@dataclass(frozen=True)
class LinearSumFn:
    """c * (sum of all components), clipped to stay bounded."""

    c: float = 1.0
    clip: float = 5.0

    def __call__(self, x, y):
        s = self.c * (x.sum(axis=0) + y.sum(axis=0))
        return np.clip(s, -self.clip, self.clip)


INTERACTIONS = {"zero": ZeroFn, "scaled_sin": ScaledSin, "scaled_cos": ScaledCos}

# sensor catalog: name -> (callable class, MH bound fn, Lipschitz fn)
_SENSORS = {
    "tanh_sum": lambda n, m, params: Sensor(
        TanhSumFn(), bound_MH=float(n + m), lip_H=1.0, dim=1
    ),
    "constant": lambda n, m, params: Sensor(
        ConstantFn(**params), bound_MH=abs(params.get("c", 1.0)), lip_H=0.0, dim=1
    ),
    "linear": lambda n, m, params: Sensor(
        LinearSumFn(**params),
        bound_MH=params.get("clip", 5.0),
        lip_H=abs(params.get("c", 1.0)),
        dim=1,
    ),
}

_FUNCTIONALS = {
    "tanh_sum": lambda params: TestFunctional(TanhSumFn(), c1_norm=1.0),
    "constant": lambda params: TestFunctional(
        ConstantFn(**params), c1_norm=abs(params.get("c", 1.0))
    ),
    "linear": lambda params: TestFunctional(
        LinearSumFn(**params), c1_norm=abs(params.get("c", 1.0))
    ),
}


def _parse_catalog_value(raw: str):
    """Parse `name` or `"name", key = val, ...` into (name, params)."""
    parts = [p.strip() for p in raw.split(",")]
    name = parts[0].strip().strip("\"'")
    params = {}
    for part in parts[1:]:
        if "=" not in part:
            raise ConfigurationError(f"malformed catalog parameter {part!r}")
        key, val = (s.strip() for s in part.split("=", 1))
        params[key] = float(val)
    return name, params


def make_interaction(raw: str):
    name, params = _parse_catalog_value(raw)
    if name not in INTERACTIONS:
        raise ConfigurationError(
            f"unknown interaction {name!r}; choices: {sorted(INTERACTIONS)}"
        )
    return INTERACTIONS[name](**params)


def make_sensor(raw: str, n: int, m: int) -> Sensor:
    name, params = _parse_catalog_value(raw)
    if name not in _SENSORS:
        raise ConfigurationError(
            f"unknown sensor {name!r}; choices: {sorted(_SENSORS)}"
        )
    return _SENSORS[name](n, m, params)


def make_functional(raw: str) -> TestFunctional:
    name, params = _parse_catalog_value(raw)
    if name not in _FUNCTIONALS:
        raise ConfigurationError(
            f"unknown functional {name!r}; choices: {sorted(_FUNCTIONALS)}"
        )
    return _FUNCTIONALS[name](params)


# ---------------------------------------------------------------------------
# parsing helpers


def _parse_matrix(raw: str) -> np.ndarray:
    rows = [r for r in raw.split(";") if r.strip()]
    mat = np.array([[float(x) for x in r.split()] for r in rows])
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigurationError(f"matrix must be square, got shape {mat.shape}")
    return mat


def _parse_floats(raw: str) -> tuple:
    return tuple(float(x) for x in raw.replace(",", " ").split())


_ALLOWED_KEYS = {
    "model": {
        "a", "b", "u", "v", "sigma1", "sigma2", "epsilon", "eps_grid",
        "alpha", "l", "m_u", "m_v",
    },
    "noise": {"t_back", "t_fwd", "dt", "delta", "family"},
    "manifold": {"mu", "t_back", "dt", "picard_tol", "truncation_tol", "max_iter"},
    "filter": {
        "particles", "replicas", "p", "sensor", "phi", "t_checkpoints", "t",
        "prior_u_scale", "prior_v_scale", "resample_frac",
    },
    "run": {"seed", "workers", "outdir"},
}

_REQUIRED = {
    "model": {"a", "b", "u", "v", "sigma1", "sigma2", "epsilon", "alpha",
              "l", "m_u", "m_v"},
    "noise": {"t_back", "t_fwd", "dt"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description plus a raw echo for the manifest."""

    model: SlowFastModel
    eps_grid: tuple
    noise_window: tuple            # (t_back, t_fwd, dt) for path generation
    jump_delta: float
    noise_family: str
    window: BackwardWindow
    mu: float
    mu_defaulted: bool
    particles: int
    replicas: int
    p: float
    sensor_name: str
    phi_name: str
    t_checkpoints: tuple
    filter_T: float
    prior: GaussianPrior
    resample_frac: float
    seed: int
    workers: int
    outdir: str
    echo: dict = field(repr=False, default_factory=dict)

    def sensor(self) -> Sensor:
        return make_sensor(self.sensor_name, self.model.n, self.model.m)

    def functional(self) -> TestFunctional:
        return make_functional(self.phi_name)

    def slow_triplet(self):
        return brownian_triplet(self.model.m)

    def epsilon0(self):
        from .manifold import slow_rates
        gamma2, _ = slow_rates(self.model.B)
        return epsilon0_closed_form(
            self.model.gamma1(), gamma2, self.model.declared_L, self.mu
        )


def load_config(path: str, require_manifold: bool = False) -> ExperimentConfig:
    """Parse and validate a config file; raise with all errors collected.

    When `require_manifold` is set, the contraction gate eps < eps0 is
    enforced for every epsilon on the grid.
    """
    parser = configparser.ConfigParser(strict=True, interpolation=None)
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")

    errors = []
    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            errors.append((section, "unknown section"))
            continue
        for key in parser[section]:
            if key not in _ALLOWED_KEYS[section]:
                errors.append((f"{section}.{key}", "unknown key"))
    for section, required in _REQUIRED.items():
        if section not in parser:
            errors.append((section, "missing section"))
            continue
        for key in required - set(parser[section]):
            errors.append((f"{section}.{key}", "missing key"))
    if errors:
        raise ConfigurationError(
            "; ".join(f"{k}: {reason}" for k, reason in errors)
        )

    def get(section, key, default=None, cast=float):
        if key in parser[section]:
            return cast(parser[section][key])
        return default

    mdl = parser["model"]
    try:
        model = SlowFastModel(
            A=_parse_matrix(mdl["a"]),
            B=_parse_matrix(mdl["b"]),
            U=make_interaction(mdl["u"]),
            V=make_interaction(mdl["v"]),
            sigma1=float(mdl["sigma1"]),
            sigma2=float(mdl["sigma2"]),
            epsilon=float(mdl["epsilon"]),
            alpha=float(mdl["alpha"]),
            declared_L=float(mdl["l"]),
            declared_MU=float(mdl["m_u"]),
            declared_MV=float(mdl["m_v"]),
        )
    except (ValueError, ConfigurationError) as exc:
        raise ConfigurationError(f"model section: {exc}") from exc
    eps_grid = (
        _parse_floats(mdl["eps_grid"]) if "eps_grid" in mdl
        else (model.epsilon,)
    )

    gamma1 = model.gamma1()
    mu_raw = get("manifold", "mu") if "manifold" in parser else None
    mu_defaulted = mu_raw is None
    mu = (gamma1 - model.declared_L) / 2.0 if mu_defaulted else mu_raw
    man = parser["manifold"] if "manifold" in parser else {}
    window = BackwardWindow(
        t_back=float(man.get("t_back", 2.0)),
        dt=float(man.get("dt", model.epsilon / 10.0)),
        mu=mu,
        picard_tol=float(man.get("picard_tol", 1e-8)),
        truncation_tol=float(man.get("truncation_tol", 1e-8)),
        max_iter=int(man.get("max_iter", 200)),
    )

    post_errors = []
    if require_manifold:
        from .manifold import slow_rates
        gamma2, _ = slow_rates(model.B)
        eps0 = epsilon0_closed_form(gamma1, gamma2, model.declared_L, mu)
        if eps0 is None:
            post_errors.append(
                ("manifold.mu", "contraction impossible: gamma1 - mu <= L")
            )
        else:
            for eps in eps_grid:
                if eps >= eps0:
                    post_errors.append((
                        "model.eps_grid",
                        f"eps={eps} violates the contraction gate eps < "
                        f"eps0={eps0:.6g}",
                    ))
    if not math.isfinite(mu) or mu <= 0:
        post_errors.append(("manifold.mu", "mu must be positive"))
    if post_errors:
        raise ConfigurationError(
            "; ".join(f"{k}: {reason}" for k, reason in post_errors)
        )

    noi = parser["noise"]
    flt = parser["filter"] if "filter" in parser else {}
    run = parser["run"] if "run" in parser else {}

    echo = {s: dict(parser[s]) for s in parser.sections()}
    echo.setdefault("manifold", {})["mu"] = repr(mu)
    echo["manifold"]["mu_defaulted"] = repr(mu_defaulted)

    return ExperimentConfig(
        model=model,
        eps_grid=eps_grid,
        noise_window=(
            float(noi["t_back"]), float(noi["t_fwd"]), float(noi["dt"])
        ),
        jump_delta=float(noi.get("delta", 0.5)),
        noise_family=noi.get("family", "stable"),
        window=window,
        mu=mu,
        mu_defaulted=mu_defaulted,
        particles=int(flt.get("particles", 200)),
        replicas=int(flt.get("replicas", 8)),
        p=float(flt.get("p", 2.0)),
        sensor_name=flt.get("sensor", "tanh_sum"),
        phi_name=flt.get("phi", "tanh_sum"),
        t_checkpoints=_parse_floats(flt.get("t_checkpoints", "1.0")),
        filter_T=float(flt.get("t", 1.0)),
        prior=GaussianPrior(
            u_scale=float(flt.get("prior_u_scale", 0.5)),
            v_scale=float(flt.get("prior_v_scale", 0.5)),
        ),
        resample_frac=float(flt.get("resample_frac", 0.5)),
        seed=int(run.get("seed", 0)),
        workers=int(run.get("workers", 1)),
        outdir=run.get("outdir", "."),
        echo=echo,
    )
