"""Shared fixtures: default configuration and the two expensive runs
(the 50-plant reference simulation and the full-size surrogate training)
are built once per session and reused by unit and acceptance tests."""

import time
from dataclasses import replace

import numpy as np
import pytest

import plantfield as pf
from plantfield.config import build_experiment_config, resolve_config


@pytest.fixture(scope="session")
def exp_config():
    """The fully resolved default experiment configuration."""
    return build_experiment_config(resolve_config({}))


@pytest.fixture(scope="session")
def params(exp_config):
    return exp_config.params


@pytest.fixture(scope="session")
def mu0_point(exp_config):
    return exp_config.mu0


@pytest.fixture(scope="session")
def mu0_uniform(exp_config):
    """The initial law used for training: uniform initial sizes."""
    return replace(exp_config.mu0, s0_law="uniform", s0_min=0.1, s0_max=0.3)


@pytest.fixture(scope="session")
def default_run(exp_config):
    """Default 50-plant run over [0, 10]; returns (state0, trajectory, seconds)."""
    samples = pf.sample_mu0(exp_config.mu0, exp_config.n)
    state0 = pf.samples_to_state(samples)
    tic = time.perf_counter()
    traj = pf.integrate(exp_config.params, state0, exp_config.solver)
    elapsed = time.perf_counter() - tic
    return state0, traj, elapsed


@pytest.fixture(scope="session")
def trained_model(exp_config, mu0_uniform):
    """Full-size surrogate training run; returns (model, seconds)."""
    tic = time.perf_counter()
    model = pf.train(
        mu0_uniform,
        exp_config.params,
        dt=1.0,
        T=10.0,
        N=1000,
        K=1000,
        d3=5,
        d5=3,
        seed=0,
    )
    elapsed = time.perf_counter() - tic
    return model, elapsed


@pytest.fixture(scope="session")
def tiny_model(params, mu0_uniform):
    """A cheap 3-stage model for structural tests."""
    return pf.train(
        mu0_uniform, params, dt=1.0, T=3.0, N=200, K=200, d3=3, d5=2, seed=7
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
