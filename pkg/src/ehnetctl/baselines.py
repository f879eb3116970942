"""The two comparison schemes: ESA and a greedy TDMA-style heuristic.

ESA is reconstructed as the proposed scheme's decision rules under
perfect-battery assumptions (unit efficiencies, battery price ``E - cutoff``)
plus an energy-harvest admission that refuses inflow above a cutoff level.
Its decisions can overdraw the real, lossy battery, so power is clipped to the
true availability after the fact.  The greedy scheme serves nodes in order of
total backlog on conflict-free links at the maximum feasible power.

Both schemes satisfy the energy-availability constraint by explicit clipping
and run the battery with physical overflow (inflow beyond capacity spills).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import admit_data, allocate_with_prices, compute_weights, schedule
from .model import (EnvSample, InvariantViolation, NetState, NetworkSpec,
                    SlotDecision, SystemParams, UtilitySpec, check_decision, theta_for)
from .ratepower import RatePowerModel, rate


@dataclass(frozen=True)
class EsaParams:
    """ESA knobs: utility weight V and the harvest-admission cutoff."""

    V: float
    harvest_cutoff: float

    def __post_init__(self):
        if self.harvest_cutoff <= 0:
            raise ValueError(f"harvest_cutoff must be > 0, got {self.harvest_cutoff!r}")


def esa_params(sys: SystemParams, V: float) -> EsaParams:
    """Cutoff at delta1*g_max*V + P_max: the level above which ESA stops harvesting."""
    return EsaParams(V=V, harvest_cutoff=sys.delta1 * sys.g_max * V + sys.P_max)


def _clip_to_availability(P: np.ndarray, E: np.ndarray, sys: SystemParams,
                          net: NetworkSpec) -> tuple[np.ndarray, bool]:
    """Scale each node's powers down so total spend <= xi*eta*E."""
    P = P.copy()
    clipped = False
    avail = sys.xi * sys.eta * E
    for n in range(net.n_nodes):
        links = list(net.out_links[n])
        if not links:
            continue
        tot = float(P[links].sum())
        if tot > avail[n]:
            scale = 0.0 if tot <= 0 else max(avail[n], 0.0) / tot
            P[links] *= scale
            clipped = True
    return P, clipped


def esa_step(state: NetState, env: EnvSample, net: NetworkSpec, sys: SystemParams,
             model: RatePowerModel, util: UtilitySpec, ep: EsaParams) -> SlotDecision:
    """One ESA slot: perfect-battery decision rules, real-battery feasibility clip,
    and harvest admission at the cutoff."""
    theta = theta_for(sys, net)
    R = admit_data(state.Q, util, ep.V, sys.R_max, net)
    w = compute_weights(state.Q, net, theta)
    # decision rule believes xi = eta = 1: energy price is just E - cutoff
    beta = state.E - ep.harvest_cutoff
    P, mu_link = allocate_with_prices(w.W, beta, model, net, env.S, sys.P_max)
    P, clipped = _clip_to_availability(P, state.E, sys, net)
    if clipped:
        mu_link = rate(model, net, env.S, P)
    mu_c = schedule(w, mu_link, net)
    harvest = np.minimum(sys.xi * env.e, np.maximum(ep.harvest_cutoff - state.E, 0.0))
    dec = SlotDecision(R=R, P=P, mu_c=mu_c, mu_link=mu_link, harvest=harvest)
    check_decision(dec, state, sys, net)
    return dec


def greedy_step(state: NetState, env: EnvSample, net: NetworkSpec, sys: SystemParams,
                model: RatePowerModel, util: UtilitySpec) -> SlotDecision:
    """One greedy slot.

    Nodes take turns by descending total backlog (ties: smaller id).  Each
    picks its best-quality out-link that shares no endpoint with links already
    picked this slot, at the largest power allowed by both the peak-power cap
    and the true energy availability.  Admission refills empty queues at
    R_max and otherwise tracks the node's scheduled rate.
    """
    totals = state.Q.sum(axis=1)
    order = sorted(range(net.n_nodes), key=lambda n: (-totals[n], n))
    used_nodes: set[int] = set()
    chosen: list[tuple[int, int]] = []  # (link index, flow index)
    P = np.zeros(net.n_links)
    for n in order:
        if totals[n] <= 0.0 or n in used_nodes:
            continue
        candidates = [l for l in net.out_links[n]
                      if int(net.link_dst[l]) not in used_nodes]
        if not candidates:
            continue
        best = max(candidates, key=lambda l: (env.S[l], -net.links[l][1]))
        P[best] = min(sys.P_max, sys.xi * sys.eta * state.E[n])
        flow = int(np.argmax(state.Q[n]))  # first max == smallest flow id
        chosen.append((best, flow))
        used_nodes.add(n)
        used_nodes.add(int(net.link_dst[best]))

    ends = [net.links[l] for l, _ in chosen]
    if len({x for ab in ends for x in ab}) != 2 * len(ends):
        raise InvariantViolation("greedy selected conflicting links", slot=state.t)

    mu_link = rate(model, net, env.S, P)
    mu_c = np.zeros((net.n_links, net.n_flows))
    node_rate = np.zeros(net.n_nodes)
    for l, c in chosen:
        mu_c[l, c] = mu_link[l]
        node_rate[net.link_src[l]] = mu_link[l]

    R = np.zeros_like(state.Q)
    for (node, flow), _u in util.entries.items():
        n, c = net.node_index[node], net.flow_index[flow]
        if totals[n] <= 0.0:
            R[n, c] = sys.R_max
        else:
            R[n, c] = min(node_rate[n], sys.R_max)
    dec = SlotDecision(R=R, P=P, mu_c=mu_c, mu_link=mu_link)
    check_decision(dec, state, sys, net)
    return dec


@dataclass(frozen=True, eq=False)
class EsaController:
    net: NetworkSpec
    sys: SystemParams
    model: RatePowerModel
    util: UtilitySpec
    params: EsaParams

    name = "esa"
    spill = True

    def step(self, state: NetState, env: EnvSample) -> SlotDecision:
        return esa_step(state, env, self.net, self.sys, self.model, self.util, self.params)


@dataclass(frozen=True, eq=False)
class GreedyController:
    net: NetworkSpec
    sys: SystemParams
    model: RatePowerModel
    util: UtilitySpec

    name = "greedy"
    spill = True

    def step(self, state: NetState, env: EnvSample) -> SlotDecision:
        return greedy_step(state, env, self.net, self.sys, self.model, self.util)
