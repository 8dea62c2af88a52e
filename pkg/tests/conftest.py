"""Shared fixtures: the scalar two-block benchmark system and its noise."""

import numpy as np
import pytest

from lfms import (
    BackwardWindow,
    SlowFastModel,
    StableParams,
    brownian_triplet,
    generate_two_sided_levy,
    generate_two_sided_stable,
    stationary_fast,
    stationary_slow,
)


def make_ts1(epsilon=0.1):
    return SlowFastModel(
        A=-2.0,
        B=-1.0,
        U=lambda x, y: 0.5 * np.sin(x + y),
        V=lambda x, y: 0.5 * np.cos(x - y),
        sigma1=1.0,
        sigma2=1.0,
        epsilon=epsilon,
        alpha=1.5,
        declared_L=0.5,
        declared_MU=0.5,
        declared_MV=0.5,
    )


@pytest.fixture(scope="session")
def ts1():
    return make_ts1()


@pytest.fixture(scope="session")
def window():
    # gamma1 - mu = 1 and eps = 0.1: exp(-1.4/0.1) ~ 8e-7 meets the tail tol
    return BackwardWindow(
        t_back=1.4, dt=0.002, mu=1.0, picard_tol=1e-9, truncation_tol=1e-6
    )


def make_noise(model, seed, t_back=24.0, t_fwd=2.0, dt=0.002, scheme="exact",
               stationary=True):
    """Two-sided driving paths plus their stationary responses."""
    rng = np.random.default_rng(seed)
    win = (t_back, t_fwd, dt)
    fast = generate_two_sided_stable(
        StableParams(alpha=model.alpha, dim=model.n), win, rng
    )
    slow = generate_two_sided_levy(brownian_triplet(model.m), win, rng)
    if not stationary:
        return fast, slow, None, None
    zeta = stationary_fast(model, fast, tol=1e-6, scheme=scheme)
    varsigma = stationary_slow(model, slow, tol=1e-6, scheme=scheme)
    return fast, slow, zeta, varsigma


@pytest.fixture(scope="session")
def ts1_noise(ts1):
    return make_noise(ts1, seed=42)
