"""Pluggable rate-power functions and their sensitivity constants.

Three model kinds are shipped:

- ``linear-gain``: rate = S * P per link, with S the link's channel slope
  (packets per power unit).  Links do not interact.
- ``orthogonal-log``: rate = ln(1 + g * P / sigma^2), with g the link's channel
  gain.  Links do not interact.
- ``interference-log``: rate = ln(1 + g * P / (I + sigma^2)) where I sums, over
  every other link, its power weighted by the gain of the channel from that
  link's transmitter to this link's receiver.  A cross channel exists only
  where the topology declares a link for that (transmitter, receiver) pair.

``delta1`` bounds how much a link's own rate can grow per unit of own power;
``delta2`` bounds the aggregate rate loss inflicted on other nodes per unit of
power a node adds (zero for the non-interacting kinds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .model import NetworkSpec

KINDS = ("linear-gain", "orthogonal-log", "interference-log")


@dataclass(frozen=True)
class RatePowerModel:
    """A rate-power function family plus its finite per-link channel domain.

    ``channel_states`` enumerates the values a single link's channel
    coefficient can take (slope for linear-gain, gain |h|^2 for the log
    kinds), ordered worst to best.
    """

    kind: str
    channel_states: tuple[float, ...]
    noise_variance: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown rate model kind {self.kind!r}; expected one of {KINDS}")
        if not self.channel_states:
            raise ValueError("channel_states must be a non-empty finite set")
        for s in self.channel_states:
            if not (math.isfinite(s) and s >= 0):
                raise ValueError(f"channel state {s!r} must be finite and nonnegative")
        if self.kind != "linear-gain" and self.noise_variance <= 0:
            raise ValueError(f"noise_variance must be > 0, got {self.noise_variance!r}")
        object.__setattr__(self, "channel_states",
                           tuple(sorted(float(s) for s in self.channel_states)))

    @property
    def separable(self) -> bool:
        """True when a link's rate depends only on its own power."""
        return self.kind in ("linear-gain", "orthogonal-log")

    def max_link_rate(self, P_max: float) -> float:
        """Largest achievable single-link rate under the per-node power cap."""
        top = max(self.channel_states)
        if self.kind == "linear-gain":
            return top * P_max
        return math.log1p(top * P_max / self.noise_variance)


@lru_cache(maxsize=None)
def _cross_index(net: NetworkSpec) -> np.ndarray:
    """cross[l, l'] = index of link (src(l'), dst(l)), or -1 when absent or l == l'."""
    L = net.n_links
    by_pair = {pair: i for i, pair in enumerate(net.links)}
    cross = -np.ones((L, L), dtype=int)
    for l in range(L):
        dst = net.links[l][1]
        for lp in range(L):
            if lp == l:
                continue
            src = net.links[lp][0]
            cross[l, lp] = by_pair.get((src, dst), -1)
    return cross


def interference_matrix(net: NetworkSpec, S: np.ndarray) -> np.ndarray:
    """G[l, l'] = gain from link l' transmitter into link l receiver (0 if no channel)."""
    cross = _cross_index(net)
    G = np.where(cross >= 0, np.asarray(S)[np.clip(cross, 0, None)], 0.0)
    return G


def rate(model: RatePowerModel, net: NetworkSpec, S: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Per-link rates for channel state S (L,) and power allocation P (..., L).

    Broadcasts over leading axes of P, so a batch of candidate allocations can
    be evaluated in one call.
    """
    S = np.asarray(S, dtype=float)
    P = np.asarray(P, dtype=float)
    if np.any(P < -1e-12):
        raise ValueError("negative power")
    if model.kind == "linear-gain":
        return S * P
    if model.kind == "orthogonal-log":
        return np.log1p(S * P / model.noise_variance)
    G = interference_matrix(net, S)
    interf = P @ G.T
    return np.log1p(S * P / (interf + model.noise_variance))


def sensitivity_constants(model: RatePowerModel, net: NetworkSpec) -> tuple[float, float]:
    """Worst-case (delta1, delta2) over the declared channel domain.

    delta1 is the largest initial slope of any link's rate in its own power.
    delta2 is zero for non-interacting kinds; for the interference kind it is
    the largest, over perturbed nodes n, total cross-gain from n into the
    receivers of all other nodes' links, divided by the noise power.
    """
    top = max(model.channel_states)
    if model.kind == "linear-gain":
        return top, 0.0
    delta1 = top / model.noise_variance
    if model.kind == "orthogonal-log":
        return delta1, 0.0
    links_set = set(net.links)
    worst = 0
    for n in net.nodes:
        # other nodes' links whose receiver hears node n
        count = sum(1 for (a, b) in net.links if a != n and (n, b) in links_set)
        worst = max(worst, count)
    return delta1, worst * top / model.noise_variance


@dataclass
class PropertyReport:
    trials: int
    counterexamples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def __str__(self) -> str:
        if self.passed:
            return f"all {self.trials} randomized trials passed"
        head = self.counterexamples[:3]
        return f"{len(self.counterexamples)} counterexample(s) in {self.trials} trials; first: {head}"


def _sample_power(rng, net: NetworkSpec, P_max: float) -> np.ndarray:
    P = np.zeros(net.n_links)
    for n in range(net.n_nodes):
        links = net.out_links[n]
        if not links:
            continue
        raw = rng.random(len(links))
        total = rng.random() * P_max
        P[list(links)] = total * raw / max(raw.sum(), 1e-12)
    return P


def check_properties(model: RatePowerModel, net: NetworkSpec, P_max: float,
                     trials: int = 1000, seed: int = 0,
                     delta1: float | None = None, delta2: float | None = None,
                     tol: float = 1e-9) -> PropertyReport:
    """Randomized verification of the two structural rate-power properties.

    Property 1 (zero one link's power): other links never lose rate, and the
    zeroed link's rate drop lies in [0, delta1 * P].  Property 2 (spread extra
    power dP across one node's out-links): that node's rates never drop, and
    other nodes lose at most delta2 * dP of aggregate rate.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d1, d2 = sensitivity_constants(model, net)
    if delta1 is not None:
        d1 = delta1
    if delta2 is not None:
        d2 = delta2
    rng = np.random.Generator(np.random.Philox(key=seed))
    states = np.array(model.channel_states)
    rep = PropertyReport(trials=trials)
    senders = [n for n in range(net.n_nodes) if net.out_links[n]]
    if not senders:
        return rep
    for k in range(trials):
        S = states[rng.integers(0, len(states), net.n_links)]
        P = _sample_power(rng, net, P_max)
        mu = rate(model, net, S, P)

        # Property 1: zero a single random link
        l = int(rng.integers(0, net.n_links))
        Pz = P.copy()
        Pz[l] = 0.0
        muz = rate(model, net, S, Pz)
        others = np.arange(net.n_links) != l
        if np.any(mu[others] > muz[others] + tol):
            rep.counterexamples.append(("P1-i", k, l, S.tolist(), P.tolist()))
        drop = mu[l] - muz[l]
        if not (-tol <= drop <= d1 * P[l] + tol):
            rep.counterexamples.append(("P1-ii", k, l, float(drop), float(d1 * P[l])))

        # Property 2: spread dP over one node's out-links
        n = senders[int(rng.integers(0, len(senders)))]
        links = list(net.out_links[n])
        dP = float(rng.random() * P_max + 1e-6)
        Pu = P.copy()
        Pu[links] += dP / len(links)
        muu = rate(model, net, S, Pu)
        own = np.zeros(net.n_links, dtype=bool)
        own[links] = True
        if np.any(mu[own] > muu[own] + tol):
            rep.counterexamples.append(("P2-i", k, n, S.tolist(), P.tolist()))
        loss = float(np.sum(mu[~own] - muu[~own]))
        if not (-tol <= loss <= d2 * dP + tol):
            rep.counterexamples.append(("P2-ii", k, n, loss, d2 * dP))
    return rep
