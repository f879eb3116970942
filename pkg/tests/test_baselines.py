import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehnetctl.baselines import (EsaController, EsaParams, GreedyController,
                                esa_params, esa_step, greedy_step)
from ehnetctl.controller import step
from ehnetctl.model import (EnvSample, Log1pUtility, NetState, NetworkSpec,
                            SystemParams, UtilitySpec, algorithm_params)
from ehnetctl.ratepower import RatePowerModel
from ehnetctl.simulator import run


def fig1_net():
    return NetworkSpec(nodes=(1, 2, 3, 4, 5, 6, 7),
                       links=((1, 5), (2, 5), (3, 6), (4, 6), (5, 7), (6, 7)),
                       flows=(7,))


def sysparams(**kw):
    base = dict(R_max=3.0, P_max=2.0, mu_max=2.0, E_max=160.0, xi=1.0, eta=0.98,
                e_max=5.0, g_max=1.0, delta1=2.0, delta2=0.0)
    base.update(kw)
    return SystemParams(**base)


LINEAR = RatePowerModel(kind="linear-gain", channel_states=(1.0, 2.0))


def util_fig1():
    return UtilitySpec(entries={(n, 7): Log1pUtility() for n in (1, 2, 3, 4)})


def env_of(net, e=0.0, s=2.0):
    return EnvSample(e=np.full(net.n_nodes, float(e)), S=np.full(net.n_links, float(s)))


# --------------------------------------------------------------------------- #
# ESA
# --------------------------------------------------------------------------- #

def test_esa_cutoff_value():
    ep = esa_params(sysparams(), V=30.0)
    assert ep.harvest_cutoff == 62.0
    with pytest.raises(ValueError, match="harvest_cutoff"):
        EsaParams(V=30.0, harvest_cutoff=0.0)


def test_esa_refuses_harvest_at_cutoff():
    net, sys_, util = fig1_net(), sysparams(), util_fig1()
    ep = esa_params(sys_, 30.0)
    state = NetState.zeros(net)
    state.E[:] = ep.harvest_cutoff
    dec = esa_step(state, env_of(net, e=5.0), net, sys_, LINEAR, util, ep)
    assert np.all(dec.harvest == 0.0)
    # just below the cutoff: admits only the gap
    state.E[:] = ep.harvest_cutoff - 1.0
    dec = esa_step(state, env_of(net, e=5.0), net, sys_, LINEAR, util, ep)
    assert np.allclose(dec.harvest, 1.0)


def test_esa_matches_proposed_under_perfect_battery():
    # with xi = eta = 1 and gamma = cutoff, the decision rules coincide
    net, util = fig1_net(), util_fig1()
    sys_ = sysparams(xi=1.0, eta=1.0, e_max=2.0)
    ep = esa_params(sys_, 30.0)
    params = algorithm_params(sys_, net, 30.0, gamma=ep.harvest_cutoff)
    rng = np.random.default_rng(3)
    state = NetState.zeros(net)
    state.Q[:, 0] = rng.random(net.n_nodes) * 25
    state.Q[net.node_index[7], 0] = 0.0
    state.E[:] = rng.random(net.n_nodes) * 100
    env = EnvSample(e=rng.random(net.n_nodes) * 2, S=np.full(net.n_links, 2.0))
    d_esa = esa_step(state, env, net, sys_, LINEAR, util, ep)
    d_prop = step(state, env, net, sys_, LINEAR, util, params)
    assert np.allclose(d_esa.P, d_prop.P)
    assert np.allclose(d_esa.R, d_prop.R)
    assert np.allclose(d_esa.mu_c, d_prop.mu_c)


def test_esa_clips_to_true_availability():
    # a low cutoff makes the perfect-battery rule fire at E = 2 (weight
    # 23*2 + (2 - 10) > 0), but the lossy battery only affords xi*eta*E < P_max
    net, sys_, util = fig1_net(), sysparams(xi=0.95), util_fig1()
    ep = EsaParams(V=30.0, harvest_cutoff=10.0)
    state = NetState.zeros(net)
    n1 = net.node_index[1]
    state.Q[n1, 0] = 30.0
    state.E[n1] = 2.0
    dec = esa_step(state, env_of(net, s=2.0), net, sys_, LINEAR, util, ep)
    avail = sys_.xi * sys_.eta * 2.0
    assert avail < sys_.P_max
    assert dec.P[net.out_links[n1][0]] == pytest.approx(avail)
    # rates recomputed from the clipped power
    assert dec.mu_link[net.out_links[n1][0]] == pytest.approx(2.0 * avail)


def test_esa_empty_battery_no_transmission():
    net, sys_, util = fig1_net(), sysparams(), util_fig1()
    ep = esa_params(sys_, 30.0)
    state = NetState.zeros(net)
    state.Q[:, 0] = 25.0
    state.Q[net.node_index[7], 0] = 0.0
    dec = esa_step(state, env_of(net, s=2.0), net, sys_, LINEAR, util, ep)
    assert np.all(dec.P == 0.0)


# --------------------------------------------------------------------------- #
# greedy
# --------------------------------------------------------------------------- #

def test_greedy_conflict_resolution_prefers_larger_backlog():
    net, sys_, util = fig1_net(), sysparams(), util_fig1()
    state = NetState.zeros(net)
    n1, n2 = net.node_index[1], net.node_index[2]
    state.Q[n1, 0] = 5.0
    state.Q[n2, 0] = 9.0   # larger backlog; both target relay 5
    state.E[:] = 50.0
    dec = greedy_step(state, env_of(net, s=2.0), net, sys_, LINEAR, util)
    l1 = net.out_links[n1][0]
    l2 = net.out_links[n2][0]
    assert dec.P[l2] == 2.0 and dec.P[l1] == 0.0


def test_greedy_tie_breaks_smallest_node_id():
    net, sys_, util = fig1_net(), sysparams(), util_fig1()
    state = NetState.zeros(net)
    state.Q[net.node_index[1], 0] = 5.0
    state.Q[net.node_index[2], 0] = 5.0
    state.E[:] = 50.0
    dec = greedy_step(state, env_of(net, s=2.0), net, sys_, LINEAR, util)
    assert dec.P[net.out_links[net.node_index[1]][0]] == 2.0
    assert dec.P[net.out_links[net.node_index[2]][0]] == 0.0


def test_greedy_all_empty_admits_max_everywhere():
    net, sys_, util = fig1_net(), sysparams(), util_fig1()
    state = NetState.zeros(net)
    state.E[:] = 50.0
    dec = greedy_step(state, env_of(net, s=2.0), net, sys_, LINEAR, util)
    assert np.all(dec.P == 0.0)
    for n in (1, 2, 3, 4):
        assert dec.R[net.node_index[n], 0] == sys_.R_max


def test_greedy_power_limited_by_battery():
    net, util = fig1_net(), util_fig1()
    sys_ = sysparams(xi=1.0, eta=1.0, e_max=2.0)
    state = NetState.zeros(net)
    n1 = net.node_index[1]
    state.Q[n1, 0] = 4.0
    state.E[n1] = 0.5
    dec = greedy_step(state, env_of(net, s=2.0), net, sys_, LINEAR, util)
    assert dec.P[net.out_links[n1][0]] == pytest.approx(0.5)


def test_greedy_admission_mirrors_rate_clamped():
    net, sys_, util = fig1_net(), sysparams(), util_fig1()
    state = NetState.zeros(net)
    n1 = net.node_index[1]
    state.Q[n1, 0] = 4.0
    state.E[n1] = 50.0
    dec = greedy_step(state, env_of(net, s=2.0), net, sys_, LINEAR, util)
    # mu = 2*2 = 4 exceeds R_max = 3: admission is clamped to the hard bound
    assert dec.mu_link[net.out_links[n1][0]] == 4.0
    assert dec.R[n1, 0] == 3.0


@given(seed=st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_greedy_selection_is_conflict_free(seed):
    net, sys_, util = fig1_net(), sysparams(), util_fig1()
    rng = np.random.Generator(np.random.Philox(key=seed))
    state = NetState.zeros(net)
    state.Q[:, 0] = rng.random(net.n_nodes) * 30
    state.Q[net.node_index[7], 0] = 0.0
    state.E[:] = rng.random(net.n_nodes) * 160
    S = np.where(rng.random(net.n_links) < 0.5, 1.0, 2.0)
    dec = greedy_step(state, EnvSample(e=np.zeros(net.n_nodes), S=S),
                      net, sys_, LINEAR, util)
    ends = [net.links[l] for l in range(net.n_links) if dec.P[l] > 0]
    flat = [x for ab in ends for x in ab]
    assert len(set(flat)) == 2 * len(ends)
    # at most one link per transmitter, full availability respected
    node_p = dec.node_power(net)
    assert np.all(node_p <= np.minimum(sys_.P_max, sys_.xi * sys_.eta * state.E) + 1e-9)


# --------------------------------------------------------------------------- #
# closed-loop feasibility of both baselines
# --------------------------------------------------------------------------- #

@pytest.mark.parametrize("alg", ["esa", "greedy"])
def test_baselines_stay_feasible_over_runs(alg):
    net, util = fig1_net(), util_fig1()
    sys_ = sysparams(xi=0.95)
    if alg == "esa":
        ctrl = EsaController(net, sys_, LINEAR, util, esa_params(sys_, 30.0))
    else:
        ctrl = GreedyController(net, sys_, LINEAR, util)
    tr = run(ctrl, 400, seed=11)
    assert np.all(tr.E >= -1e-9) and np.all(tr.E <= sys_.E_max + 1e-9)
    for t in range(tr.horizon):
        node_p = np.zeros(net.n_nodes)
        np.add.at(node_p, net.link_src, tr.P[t])
        assert np.all(node_p <= sys_.xi * sys_.eta * tr.E[t] + 1e-9)
