"""Core domain types: network topology, system constants, queues and slot dynamics.

Conventions used throughout the package:

- Node and flow identifiers are arbitrary integers (flows are named by their
  destination node).  Internally everything is indexed by position: nodes
  ``0..N-1``, links ``0..L-1``, flows ``0..C-1``.
- Data queues ``Q`` are an ``(N, C)`` float array, battery levels ``E`` an
  ``(N,)`` float array.  Queues are real-valued; rates and admissions are
  continuous quantities, not integer packets.
- A slot is the atomic time unit.  All control decisions for slot ``t`` are
  functions of the start-of-slot state; queue and battery updates produce the
  state at ``t + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

#: Tolerance separating floating-point noise from genuine invariant violations.
EPS = 1e-9


class InvariantViolation(Exception):
    """A runtime guarantee of the control scheme was broken (controller bug)."""

    def __init__(self, message: str, slot: int | None = None, dump: dict | None = None):
        super().__init__(message)
        self.slot = slot
        self.dump = dump or {}


# --------------------------------------------------------------------------- #
# Topology
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Directed network topology with commodity flows named by destination.

    ``out_links[n]`` lists link indices leaving node index ``n`` in ascending
    receiver-id order; that order is also the serving order of the transfer
    discipline in :func:`compute_transfers`.
    """

    nodes: tuple[int, ...]
    links: tuple[tuple[int, int], ...]
    flows: tuple[int, ...]

    def __post_init__(self):
        # normalize to ascending id order so "smallest index" == "smallest id"
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes)))
        object.__setattr__(self, "flows", tuple(sorted(self.flows)))
        object.__setattr__(self, "links", tuple((int(a), int(b)) for a, b in self.links))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node ids")
        if len(set(self.links)) != len(self.links):
            raise ValueError("duplicate links")
        node_set = set(self.nodes)
        for (a, b) in self.links:
            if a == b:
                raise ValueError(f"self-link [{a},{b}] not allowed")
            if a not in node_set or b not in node_set:
                raise ValueError(f"link [{a},{b}] references unknown node")
        for c in self.flows:
            if c not in node_set:
                raise ValueError(f"flow destination {c} is not a node")
        if len(set(self.flows)) != len(self.flows):
            raise ValueError("duplicate flow destinations")

        idx = {n: i for i, n in enumerate(self.nodes)}
        fidx = {c: k for k, c in enumerate(self.flows)}
        out: list[list[int]] = [[] for _ in self.nodes]
        inn: list[list[int]] = [[] for _ in self.nodes]
        for l, (a, b) in enumerate(self.links):
            out[idx[a]].append(l)
            inn[idx[b]].append(l)
        # serving order: ascending receiver id within each sender
        for n in range(len(self.nodes)):
            out[n].sort(key=lambda l: self.links[l][1])
            inn[n].sort(key=lambda l: self.links[l][0])
        object.__setattr__(self, "node_index", idx)
        object.__setattr__(self, "flow_index", fidx)
        object.__setattr__(self, "out_links", tuple(tuple(v) for v in out))
        object.__setattr__(self, "in_links", tuple(tuple(v) for v in inn))
        object.__setattr__(self, "link_src", np.array([idx[a] for a, _ in self.links], dtype=int))
        object.__setattr__(self, "link_dst", np.array([idx[b] for _, b in self.links], dtype=int))
        deg = max((max(len(o), len(i)) for o, i in zip(out, inn)), default=0)
        object.__setattr__(self, "d_max", deg)
        object.__setattr__(self, "can_transmit", np.array([len(o) > 0 for o in out]))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_flows(self) -> int:
        return len(self.flows)

    def out_neighbors(self, node: int) -> set[int]:
        n = self.node_index[node]
        return {self.links[l][1] for l in self.out_links[n]}

    def in_neighbors(self, node: int) -> set[int]:
        n = self.node_index[node]
        return {self.links[l][0] for l in self.in_links[n]}

    def reaches(self, src: int, dst: int) -> bool:
        """True if a directed path src -> dst exists."""
        if src == dst:
            return True
        seen = {src}
        stack = [src]
        while stack:
            u = stack.pop()
            for v in self.out_neighbors(u):
                if v == dst:
                    return True
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False


# --------------------------------------------------------------------------- #
# Physical and bound constants
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class SystemParams:
    """Physical constants and bounds of the network/battery model.

    ``xi`` is the (dis-)charging efficiency, ``eta`` the per-slot storage
    efficiency (fraction of stored energy retained).  ``delta1``/``delta2``
    are the rate-power sensitivity constants of the configured rate model and
    ``g_max`` the largest utility derivative.  Construction only rejects
    non-finite values; range and stability conditions are checked by
    :func:`validate_system` (report style).
    """

    R_max: float
    P_max: float
    mu_max: float
    E_max: float
    xi: float
    eta: float
    e_max: float
    g_max: float
    delta1: float
    delta2: float

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"SystemParams.{name} must be finite, got {v!r}")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def __str__(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def __str__(self) -> str:
        lines = [str(c) for c in self.checks]
        lines += [f"WARN {w}" for w in self.warnings]
        return "\n".join(lines)


def validate_system(sys: SystemParams) -> ValidationReport:
    """Check positivity, efficiency ranges and the two battery stability conditions.

    The first condition caps the largest possible battery inflow by the largest
    possible outflow (leak plus peak discharge); the second requires the
    capacity to cover one full charge/discharge swing.
    """
    rep = ValidationReport()
    for name in ("R_max", "P_max", "mu_max", "E_max", "e_max", "g_max"):
        v = getattr(sys, name)
        rep.add(f"positive:{name}", v > 0, f"{name} = {v:g} > 0")
    for name in ("delta1", "delta2"):
        v = getattr(sys, name)
        rep.add(f"nonnegative:{name}", v >= 0, f"{name} = {v:g} >= 0")
    for name in ("xi", "eta"):
        v = getattr(sys, name)
        rep.add(f"range:{name}", 0 < v <= 1, f"{name} = {v:g} in (0, 1]")

    lhs = sys.xi * sys.e_max
    rhs = (1 - sys.eta) * sys.E_max + sys.P_max / sys.xi if sys.xi > 0 else math.inf
    rep.add("A1:max-inflow<=max-outflow", lhs <= rhs + EPS,
            f"xi*e_max = {lhs:g} <= (1-eta)*E_max + P_max/xi = {rhs:g}")

    lhs2 = sys.E_max
    rhs2 = sys.P_max / sys.xi + sys.xi * sys.e_max if sys.xi > 0 else math.inf
    rep.add("A2:capacity>=swing", lhs2 >= rhs2 - EPS,
            f"E_max = {lhs2:g} >= P_max/xi + xi*e_max = {rhs2:g}")
    return rep


# --------------------------------------------------------------------------- #
# Control parameters and their admissible window
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class AlgorithmParams:
    """Knobs of the online controller.

    ``V`` trades utility against queue size, ``gamma`` offsets the battery
    level so that ``E - gamma`` acts as a signed price on spending power, and
    ``theta`` shifts the backpressure so data queues stay bounded.  ``theta``
    must equal ``R_max + d_max * mu_max`` exactly.
    """

    V: float
    gamma: float
    theta: float


@dataclass(frozen=True)
class ParamWindow:
    """Admissible (V, gamma) region derived from the feasibility analysis."""

    V_max: float
    xi: float
    eta: float
    P_max: float
    E_max: float
    e_max: float
    delta1: float
    delta2: float
    g_max: float

    def gamma_min(self, V: float) -> float:
        return self.P_max / (self.xi * self.eta) + (self.xi / self.eta) * self.delta1 * self.g_max * V

    def gamma_max(self, V: float) -> float:
        return (self.E_max - self.xi * self.e_max) / self.eta - (self.xi / self.eta) * self.delta2 * self.g_max * V

    def contains(self, V: float, gamma: float, tol: float = EPS) -> bool:
        if not (0 < V <= self.V_max + tol):
            return False
        return self.gamma_min(V) - tol <= gamma <= self.gamma_max(V) + tol


def param_window(sys: SystemParams) -> ParamWindow:
    """Compute the validity window for (V, gamma).

    ``V_max`` is where the gamma window closes (gamma_min == gamma_max).  A
    rate model that is insensitive to power (delta1 + delta2 == 0) or a flat
    utility gives an unbounded window; both zero at once is degenerate and
    rejected.
    """
    denom = sys.xi * (sys.delta1 + sys.delta2) * sys.g_max
    if sys.delta1 + sys.delta2 == 0 and sys.g_max == 0:
        raise ValueError("degenerate window: delta1 + delta2 == 0 and g_max == 0")
    num = sys.E_max - sys.xi * sys.e_max - sys.P_max / sys.xi
    v_max = math.inf if denom == 0 else num / denom
    return ParamWindow(V_max=v_max, xi=sys.xi, eta=sys.eta, P_max=sys.P_max,
                       E_max=sys.E_max, e_max=sys.e_max, delta1=sys.delta1,
                       delta2=sys.delta2, g_max=sys.g_max)


def theta_for(sys: SystemParams, net: NetworkSpec) -> float:
    return sys.R_max + net.d_max * sys.mu_max


def algorithm_params(sys: SystemParams, net: NetworkSpec, V: float,
                     gamma: float | None = None) -> AlgorithmParams:
    """Build validated controller parameters; ``gamma=None`` picks gamma_min(V).

    Raises ValueError when (V, gamma) falls outside the admissible window,
    with the window bounds in the message.
    """
    win = param_window(sys)
    if not (0 < V <= win.V_max + EPS):
        raise ValueError(f"V = {V:g} outside (0, {win.V_max:g}]")
    g_lo, g_hi = win.gamma_min(V), win.gamma_max(V)
    if gamma is None:
        gamma = g_lo
    if not (g_lo - EPS <= gamma <= g_hi + EPS):
        raise ValueError(f"gamma = {gamma:g} outside [{g_lo:g}, {g_hi:g}] for V = {V:g}")
    return AlgorithmParams(V=float(V), gamma=float(gamma), theta=theta_for(sys, net))


# --------------------------------------------------------------------------- #
# Utilities
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Log1pUtility:
    """U(r) = weight * ln(1 + r): increasing, strictly concave, U'(0) = weight."""

    weight: float = 1.0

    def value(self, r: float) -> float:
        return self.weight * math.log1p(r)

    def derivative(self, r: float) -> float:
        return self.weight / (1.0 + r)

    @property
    def g_max(self) -> float:
        return self.weight

    def admission(self, V: float, Q: float, R_max: float) -> float:
        """Closed-form maximizer of V*U(R) - Q*R over [0, R_max]."""
        if Q <= 0.0:
            return R_max
        return min(max(V * self.weight / Q - 1.0, 0.0), R_max)


@dataclass(frozen=True)
class GenericUtility:
    """Arbitrary concave increasing utility given as a callable (used in tests)."""

    fn: Callable[[float], float]
    g_max: float

    def value(self, r: float) -> float:
        return self.fn(r)


def spot_check_concave(util, lo: float, hi: float, grid: int = 33, tol: float = 1e-9) -> bool:
    """Midpoint concavity test of util.value on a grid over [lo, hi]."""
    xs = np.linspace(lo, hi, grid)
    for i in range(grid):
        for j in range(i + 1, grid):
            a, b = xs[i], xs[j]
            mid = util.value(0.5 * (a + b))
            if mid < 0.5 * (util.value(a) + util.value(b)) - tol:
                return False
    return True


@dataclass(frozen=True, eq=False)
class UtilitySpec:
    """Per (node, flow) utility functions of admitted data rates.

    Pairs absent from ``entries`` admit nothing.  ``g_max`` is the largest
    first derivative across all supplied functions (the maximum of a concave
    increasing function's derivative sits at r = 0).
    """

    entries: dict  # (node_id, flow_id) -> utility object

    def __post_init__(self):
        for (n, c) in self.entries:
            if n == c:
                raise ValueError(f"utility at ({n},{c}): a destination cannot admit its own flow")

    @property
    def g_max(self) -> float:
        return max((u.g_max for u in self.entries.values()), default=0.0)

    def pairs(self):
        return sorted(self.entries.keys())

    def total(self, rates: dict) -> float:
        """Sum of utilities evaluated at per-pair rates {(node, flow): r}."""
        return sum(u.value(rates.get(k, 0.0)) for k, u in self.entries.items())

    def validate(self, net: NetworkSpec, R_max: float) -> ValidationReport:
        rep = ValidationReport()
        for (n, c), u in sorted(self.entries.items()):
            rep.add(f"utility-node:{n},{c}", n in net.node_index and c in net.flow_index,
                    f"pair ({n},{c}) uses declared node and flow")
            if n in net.node_index and c in net.flow_index:
                rep.add(f"utility-route:{n}->{c}", net.reaches(n, c),
                        f"directed path {n} -> {c} exists")
                rep.add(f"utility-concave:{n},{c}", spot_check_concave(u, 0.0, R_max),
                        f"midpoint concavity on [0, {R_max:g}]")
        return rep


# --------------------------------------------------------------------------- #
# Per-slot state, environment sample and control decision
# --------------------------------------------------------------------------- #

@dataclass
class NetState:
    """Full per-slot state: data backlogs Q (N, C), battery levels E (N,)."""

    Q: np.ndarray
    E: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, net: NetworkSpec) -> "NetState":
        return cls(Q=np.zeros((net.n_nodes, net.n_flows)), E=np.zeros(net.n_nodes), t=0)

    def q(self, net: NetworkSpec, node: int, flow: int) -> float:
        return float(self.Q[net.node_index[node], net.flow_index[flow]])

    def energy(self, net: NetworkSpec, node: int) -> float:
        return float(self.E[net.node_index[node]])

    def copy(self) -> "NetState":
        return NetState(Q=self.Q.copy(), E=self.E.copy(), t=self.t)


@dataclass
class EnvSample:
    """One slot's exogenous randomness: harvested energy e (N,), channel S (L,)."""

    e: np.ndarray
    S: np.ndarray


@dataclass
class SlotDecision:
    """One slot's control output.

    ``R`` admitted data (N, C); ``P`` link powers (L,); ``mu_c`` per-flow
    allocated rates (L, C); ``mu_link`` total link rates (L,).  ``harvest`` is
    the battery inflow per node; ``None`` means the full conversion of the
    slot's harvested energy (no harvest admission).
    """

    R: np.ndarray
    P: np.ndarray
    mu_c: np.ndarray
    mu_link: np.ndarray
    harvest: np.ndarray | None = None

    def node_power(self, net: NetworkSpec) -> np.ndarray:
        tot = np.zeros(net.n_nodes)
        np.add.at(tot, net.link_src, self.P)
        return tot


def check_decision(dec: SlotDecision, state: NetState, sys: SystemParams,
                   net: NetworkSpec, tol: float = EPS) -> None:
    """Raise InvariantViolation if a decision breaks a hard per-slot constraint."""
    if np.any(dec.R < -tol) or np.any(dec.R > sys.R_max + tol):
        raise InvariantViolation("admission outside [0, R_max]", slot=state.t)
    node_p = dec.node_power(net)
    if np.any(dec.P < -tol) or np.any(node_p > sys.P_max + tol):
        raise InvariantViolation("power outside per-node peak constraint", slot=state.t)
    if np.any(dec.mu_c.sum(axis=1) > dec.mu_link + tol):
        raise InvariantViolation("flow rates exceed link rate", slot=state.t)
    avail = sys.xi * sys.eta * state.E
    bad = node_p > avail + tol
    if np.any(bad):
        n = int(np.argmax(bad))
        raise InvariantViolation(
            f"energy availability violated at node {net.nodes[n]}: "
            f"power {node_p[n]:.12g} > xi*eta*E = {avail[n]:.12g}",
            slot=state.t,
            dump={"node": net.nodes[n], "P": node_p[n], "E": float(state.E[n])})


# --------------------------------------------------------------------------- #
# Slot dynamics
# --------------------------------------------------------------------------- #

def compute_transfers(state: NetState, dec: SlotDecision, net: NetworkSpec) -> np.ndarray:
    """Actual per-(link, flow) data moved this slot, (L, C).

    Senders cannot ship more than their start-of-slot backlog: per sender and
    flow, links are served in ascending receiver-id order and each takes
    ``min(remaining backlog, allocated rate)``.  Any shortfall is idle-fill:
    the rate (and the energy behind it) is spent but no data moves.
    """
    tau = np.zeros_like(dec.mu_c)
    for n in range(net.n_nodes):
        links = net.out_links[n]
        if not links:
            continue
        remaining = state.Q[n].copy()
        for l in links:
            for c in np.nonzero(dec.mu_c[l] > 0)[0]:
                moved = min(remaining[c], dec.mu_c[l, c])
                tau[l, c] = moved
                remaining[c] -= moved
    return tau


def update_queues(state: NetState, dec: SlotDecision, env: EnvSample,
                  sys: SystemParams, net: NetworkSpec, *, spill: bool = False) -> NetState:
    """Advance data and energy queues by one slot.

    Data queues follow the realized transfers (exact accounting, no data
    created); arrivals at a flow's own destination are absorbed (delivered)
    and never enqueued.  The battery recursion is an exact equality: the full
    allocated power is drawn even when idle-fill wasted part of the rate.

    ``spill=True`` caps the battery at E_max by discarding excess inflow
    (physical overflow; used by the baseline schemes).  Without it, leaving
    [0, E_max] by more than float noise raises InvariantViolation, since the
    proposed controller provably never does -- for nodes that can transmit.
    A node with no out-links can never spend, so its battery saturates
    physically at capacity regardless of the controller (the bounded-battery
    guarantee needs the option of discharging at peak power).
    """
    tau = compute_transfers(state, dec, net)
    Q = state.Q.copy()
    out_by_node = np.zeros_like(Q)
    in_by_node = np.zeros_like(Q)
    for l in range(net.n_links):
        out_by_node[net.link_src[l]] += tau[l]
        in_by_node[net.link_dst[l]] += tau[l]
    Q += dec.R - out_by_node + in_by_node
    # destinations absorb their own commodity
    for c_id, k in net.flow_index.items():
        Q[net.node_index[c_id], k] = 0.0

    if np.any(Q < -EPS):
        n, c = np.unravel_index(int(np.argmin(Q)), Q.shape)
        raise InvariantViolation(
            f"negative data queue at node {net.nodes[n]}, flow {net.flows[c]}: {Q[n, c]:.12g}",
            slot=state.t)
    np.clip(Q, 0.0, None, out=Q)

    inflow = sys.xi * env.e if dec.harvest is None else np.asarray(dec.harvest, dtype=float)
    E = sys.eta * state.E - dec.node_power(net) / sys.xi + inflow
    if np.any(E < -EPS):
        n = int(np.argmin(E))
        raise InvariantViolation(
            f"battery below zero at node {net.nodes[n]}: {E[n]:.12g}", slot=state.t,
            dump={"E_prev": float(state.E[n]), "P": float(dec.node_power(net)[n])})
    if spill:
        np.clip(E, 0.0, sys.E_max, out=E)
    else:
        over = (E > sys.E_max + EPS) & net.can_transmit
        if np.any(over):
            n = int(np.argmax(np.where(over, E, -np.inf)))
            raise InvariantViolation(
                f"battery above capacity at node {net.nodes[n]}: {E[n]:.12g} > {sys.E_max:g}",
                slot=state.t,
                dump={"E_prev": float(state.E[n]), "e": float(env.e[n])})
        np.clip(E, 0.0, sys.E_max, out=E)

    return NetState(Q=Q, E=E, t=state.t + 1)


def delivered_per_flow(state: NetState, dec: SlotDecision, net: NetworkSpec) -> np.ndarray:
    """Data arriving at each flow's destination this slot, (C,)."""
    tau = compute_transfers(state, dec, net)
    out = np.zeros(net.n_flows)
    for c_id, k in net.flow_index.items():
        dest = net.node_index[c_id]
        for l in net.in_links[dest]:
            out[k] += tau[l, k]
    return out
