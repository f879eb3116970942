"""Slotted Monte-Carlo engine: seeded environment, slot loop, invariant checks.

Randomness uses numpy's counter-based Philox generator, keyed per run and per
stream (harvesting vs. channel), so runs are reproducible across platforms and
independent runs can execute in parallel without shared RNG state.  The
generator name and numpy version are pinned in every trace's metadata.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (EPS, EnvSample, InvariantViolation, NetState, NetworkSpec,
                    SystemParams, UtilitySpec, update_queues)

RNG_ALGORITHM = "numpy.random.Philox(4x64) counter-based"
_STREAM_EH = 0x65680001   # harvesting stream tag
_STREAM_CH = 0x63680002   # channel stream tag
_MASK64 = (1 << 64) - 1


@dataclass(eq=False)
class EnvProcess:
    """i.i.d. environment: per-node two-point harvesting {0, e_max} with equal
    probability, per-link channel state uniform over the model's finite domain."""

    net: NetworkSpec
    e_max: float
    channel_states: tuple[float, ...]
    seed: int

    def __post_init__(self):
        key = self.seed & _MASK64
        self._eh = np.random.Generator(np.random.Philox(key=[key, _STREAM_EH]))
        self._ch = np.random.Generator(np.random.Philox(key=[key, _STREAM_CH]))
        self._states = np.array(self.channel_states, dtype=float)
        self._next = 0

    def sample(self, t: int, state: NetState) -> EnvSample:
        if t != self._next:
            raise ValueError(f"environment must be sampled sequentially (expected slot "
                             f"{self._next}, got {t})")
        self._next += 1
        e = np.where(self._eh.random(self.net.n_nodes) < 0.5, self.e_max, 0.0)
        S = self._states[self._ch.integers(0, self._states.size, self.net.n_links)]
        return EnvSample(e=e, S=S)


@dataclass
class RunTrace:
    """Per-slot records of one run plus derived metrics.

    All state arrays hold the start-of-slot value; ``final`` is the state
    after the last slot.  ``harvest`` is the battery inflow actually realized
    (after any harvest admission and capacity spill), in battery units.
    """

    algorithm: str
    seed: int
    horizon: int
    Q: np.ndarray         # (T, N, C)
    E: np.ndarray         # (T, N)
    R: np.ndarray         # (T, N, C)
    P: np.ndarray         # (T, L)
    mu_link: np.ndarray   # (T, L)
    mu_c: np.ndarray      # (T, L, C)
    e: np.ndarray         # (T, N)
    S: np.ndarray         # (T, L)
    harvest: np.ndarray   # (T, N)
    delivered: np.ndarray  # (T, C)
    inst_utility: np.ndarray  # (T,)
    final: NetState
    meta: dict = field(default_factory=dict)

    def metrics(self, util: UtilitySpec, net: NetworkSpec) -> dict:
        """Scalar end-of-run metrics keyed by name (all plain floats)."""
        T = max(self.horizon, 1)
        out: dict[str, float] = {}
        rates = {}
        for (node, flow) in util.pairs():
            n, c = net.node_index[node], net.flow_index[flow]
            r_bar = float(self.R[:, n, c].sum() / T)
            rates[(node, flow)] = r_bar
            out[f"r_bar:{node}->{flow}"] = r_bar
        out["utility"] = util.total(rates)
        # goodput variant: discount each source's admitted rate by its flow's
        # end-to-end delivery ratio, so data parked in queues at the horizon
        # does not count as served
        ratio = {}
        for c_id, k in net.flow_index.items():
            admitted = float(self.R[:, :, k].sum())
            delivered = float(self.delivered[:, k].sum())
            ratio[c_id] = 1.0 if admitted <= 0 else min(delivered / admitted, 1.0)
        out["goodput_utility"] = util.total(
            {(n, c): r * ratio[c] for (n, c), r in rates.items()})
        out["mean_inst_utility"] = float(self.inst_utility.mean()) if self.horizon else 0.0
        # ratio of raw energy actually banked (inflow/xi) to raw energy available
        available = float(self.e.sum())
        xi = self.meta.get("xi", 1.0)
        banked_raw = float(self.harvest.sum()) / xi
        out["energy_utilization"] = 1.0 if available <= 0 else banked_raw / available
        out["max_Q"] = float(self.Q.max(initial=0.0))
        out["max_E"] = float(self.E.max(initial=0.0))
        for c_id, k in net.flow_index.items():
            out[f"admitted:{c_id}"] = float(self.R[:, :, k].sum())
            out[f"delivered:{c_id}"] = float(self.delivered[:, k].sum())
        return out


def run(controller, horizon: int, seed: int, env=None) -> RunTrace:
    """Execute the slot loop: sample -> decide -> update -> assert -> record.

    Deterministic for a given (controller config, horizon, seed).  Invariant
    failures raise InvariantViolation carrying the offending slot's state dump.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    net: NetworkSpec = controller.net
    sys: SystemParams = controller.sys
    util: UtilitySpec = controller.util
    if env is None:
        env = EnvProcess(net, sys.e_max, controller.model.channel_states, seed)
    q_bound = None
    if controller.name == "proposed":
        q_bound = sys.g_max * controller.params.V + sys.R_max

    T, N, L, C = horizon, net.n_nodes, net.n_links, net.n_flows
    tr = RunTrace(
        algorithm=controller.name, seed=seed, horizon=horizon,
        Q=np.zeros((T, N, C)), E=np.zeros((T, N)), R=np.zeros((T, N, C)),
        P=np.zeros((T, L)), mu_link=np.zeros((T, L)), mu_c=np.zeros((T, L, C)),
        e=np.zeros((T, N)), S=np.zeros((T, L)), harvest=np.zeros((T, N)),
        delivered=np.zeros((T, C)), inst_utility=np.zeros(T),
        final=NetState.zeros(net),
        meta={"rng": RNG_ALGORITHM, "numpy": np.__version__, "seed": int(seed),
              "algorithm": controller.name, "xi": sys.xi},
    )

    state = NetState.zeros(net)
    for t in range(horizon):
        env_s = env.sample(t, state)
        if np.any(env_s.e < -EPS) or np.any(env_s.e > sys.e_max + EPS):
            raise ValueError(f"environment harvest outside [0, e_max] at slot {t}")
        try:
            dec = controller.step(state, env_s)
            q_mass_before = state.Q.sum(axis=0)
            new_state = update_queues(state, dec, env_s, sys, net, spill=controller.spill)
            if q_bound is not None and np.any(new_state.Q > q_bound + EPS):
                n, c = np.unravel_index(int(np.argmax(new_state.Q)), new_state.Q.shape)
                raise InvariantViolation(
                    f"data queue bound exceeded at node {net.nodes[n]}: "
                    f"{new_state.Q[n, c]:.12g} > g_max*V + R_max = {q_bound:.12g}",
                    slot=t)
        except InvariantViolation as exc:
            exc.slot = t if exc.slot is None else exc.slot
            exc.dump.setdefault("Q", state.Q.tolist())
            exc.dump.setdefault("E", state.E.tolist())
            exc.dump.setdefault("e", env_s.e.tolist())
            exc.dump.setdefault("S", env_s.S.tolist())
            raise

        tr.Q[t], tr.E[t] = state.Q, state.E
        tr.R[t], tr.P[t] = dec.R, dec.P
        tr.mu_link[t], tr.mu_c[t] = dec.mu_link, dec.mu_c
        tr.e[t], tr.S[t] = env_s.e, env_s.S
        # realized battery inflow, from the exact recursion (includes spill)
        tr.harvest[t] = new_state.E - sys.eta * state.E + dec.node_power(net) / sys.xi
        # conservation: delivered = previous total + admitted - new total, per flow
        tr.delivered[t] = q_mass_before + dec.R.sum(axis=0) - new_state.Q.sum(axis=0)
        tr.inst_utility[t] = sum(
            u.value(float(dec.R[net.node_index[n], net.flow_index[c]]))
            for (n, c), u in util.entries.items())
        state = new_state

    tr.final = state
    return tr


@dataclass
class EnsembleSummary:
    """Mean/std/per-run values of every run metric over an ensemble."""

    algorithm: str
    horizon: int
    runs: int
    base_seed: int
    metrics: dict               # name -> {"mean": float, "std": float, "per_run": [...]}
    meta: dict = field(default_factory=dict)

    def mean(self, key: str) -> float:
        return self.metrics[key]["mean"]

    def std(self, key: str) -> float:
        return self.metrics[key]["std"]

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "horizon": self.horizon, "runs": self.runs,
                "base_seed": self.base_seed, "metrics": self.metrics, "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSummary":
        return cls(algorithm=d["algorithm"], horizon=d["horizon"], runs=d["runs"],
                   base_seed=d["base_seed"], metrics=d["metrics"], meta=d["meta"])


def ensemble_threads() -> int:
    try:
        return max(1, int(os.environ.get("EHNETCTL_THREADS", "1")))
    except ValueError:
        return 1


def run_ensemble(controller, horizon: int, runs: int, base_seed: int,
                 keep_traces: bool = False):
    """Independent runs with derived seeds base_seed + i; merged by run index.

    Returns EnsembleSummary, or (EnsembleSummary, [RunTrace]) with
    ``keep_traces``.  Ensemble parallelism is capped by EHNETCTL_THREADS.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    net, util = controller.net, controller.util

    def one(i: int) -> RunTrace:
        try:
            return run(controller, horizon, base_seed + i)
        except InvariantViolation as exc:
            exc.dump["run_index"] = i
            raise

    workers = min(ensemble_threads(), runs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, range(runs)))
    else:
        traces = [one(i) for i in range(runs)]

    per_run = [t.metrics(util, net) for t in traces]
    keys = sorted(per_run[0])
    metrics = {}
    for k in keys:
        vals = np.array([m[k] for m in per_run], dtype=float)
        std = float(vals.std(ddof=1)) if runs > 1 else 0.0
        metrics[k] = {"mean": float(vals.mean()), "std": std,
                      "per_run": [float(v) for v in vals]}
    summary = EnsembleSummary(
        algorithm=controller.name, horizon=horizon, runs=runs, base_seed=base_seed,
        metrics=metrics,
        meta={"rng": RNG_ALGORITHM, "numpy": np.__version__})
    if keep_traces:
        return summary, traces
    return summary
