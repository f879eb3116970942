"""The oracles must be trustworthy themselves: refining a grid or tolerance
never worsens the objective they return."""

import math

import numpy as np
import pytest

from ehnetctl.controller import compute_weights, schedule
from ehnetctl.model import NetworkSpec
from ehnetctl.ratepower import RatePowerModel

from oracles import (exhaustive_schedule_oracle, golden_section_oracle,
                     grid_power_oracle_prices)

INTERF = RatePowerModel(kind="interference-log", channel_states=(0.5, 2.0))
LINEAR = RatePowerModel(kind="linear-gain", channel_states=(1.0, 2.0))


def test_golden_known_optima():
    assert golden_section_oracle(lambda x: -(x - 1.0) ** 2, 0.0, 3.0) == pytest.approx(1.0, abs=1e-7)
    got = golden_section_oracle(lambda r: 30 * math.log1p(r) - 10 * r, 0.0, 3.0)
    assert got == pytest.approx(2.0, abs=1e-6)
    assert golden_section_oracle(lambda x: 2 * x, 0.0, 3.0) == pytest.approx(3.0, abs=1e-7)


def test_golden_rejects_multimodal():
    with pytest.raises(ValueError, match="unimodal"):
        golden_section_oracle(lambda x: math.sin(7 * x), 0.0, 3.0)


def test_golden_refinement_never_worse():
    f = lambda r: 12 * math.log1p(2 * r) - 4 * r
    coarse = golden_section_oracle(f, 0.0, 3.0, tol=1e-3)
    fine = golden_section_oracle(f, 0.0, 3.0, tol=1e-10)
    assert f(fine) >= f(coarse) - 1e-12


def test_grid_refinement_never_worse(rng):
    net = NetworkSpec(nodes=(1, 2, 3), links=((1, 3), (2, 3), (1, 2)), flows=(3,))
    for model in (LINEAR, INTERF):
        for _ in range(5):
            W = rng.random(net.n_links) * 10
            beta = rng.normal(0, 3, net.n_nodes)
            S = np.array([model.channel_states[i] for i in rng.integers(0, 2, net.n_links)])
            _, coarse = grid_power_oracle_prices(W, beta, model, net, S, 2.0, grid_steps=50)
            _, fine = grid_power_oracle_prices(W, beta, model, net, S, 2.0, grid_steps=100)
            assert fine >= coarse - 1e-12


def test_grid_oracle_size_guards():
    big = NetworkSpec(nodes=(1, 2, 3, 4, 5),
                      links=((1, 5), (2, 5), (3, 5), (4, 5)), flows=(5,))
    with pytest.raises(ValueError, match="too large"):
        grid_power_oracle_prices(np.ones(4), np.zeros(5), LINEAR, big, np.ones(4), 2.0)
    net = NetworkSpec(nodes=(1, 2), links=((1, 2),), flows=(2,))
    with pytest.raises(ValueError, match="grid_steps"):
        grid_power_oracle_prices(np.ones(1), np.zeros(2), LINEAR, net, np.ones(1), 2.0,
                                 grid_steps=10)


def test_schedule_matches_exhaustive_oracle(rng):
    net = NetworkSpec(nodes=(1, 2, 3), links=((1, 2), (1, 3), (2, 3)), flows=(2, 3))
    for _ in range(50):
        Q = rng.random((3, 2)) * 20
        for c_id, k in net.flow_index.items():
            Q[net.node_index[c_id], k] = 0.0
        w = compute_weights(Q, net, theta=4.0)
        mu_link = rng.random(net.n_links) * 3
        mu_c = schedule(w, mu_link, net)
        got = float(np.sum(w.W_c * mu_c))
        assert got == pytest.approx(exhaustive_schedule_oracle(w.W_c, mu_link), abs=1e-12)
