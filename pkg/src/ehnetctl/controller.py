"""The proposed per-slot online control.

Four stages, each a pure function of the observed state:

1. data admission: per source/flow, maximize ``V*U(R) - Q*R`` over
   ``[0, R_max]`` (closed form for log utilities, golden section otherwise);
2. link weights: perturbed backpressure ``[Q_src - Q_dst - theta]^+``
   maximized over flows;
3. power allocation: maximize the sum of weighted link rates plus a signed
   energy price ``(eta/xi)*(E - gamma)`` on each node's total power, subject
   only to the per-node peak power cap.  The energy-availability constraint is
   deliberately *not* part of the feasible set: with (V, gamma) inside the
   admissible window it can never bind, which is asserted after the fact;
4. routing/scheduling: each link's full rate goes to a flow of maximum
   positive weight (smallest flow id on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (EPS, AlgorithmParams, EnvSample, InvariantViolation, NetState,
                    NetworkSpec, SlotDecision, SystemParams, UtilitySpec, check_decision)
from .ratepower import RatePowerModel, rate


class SolverError(Exception):
    """A numerical subproblem failed to converge within its iteration cap."""


@dataclass
class LinkWeights:
    """Perturbed backpressure per (link, flow), its per-link max and argmax flow."""

    W_c: np.ndarray      # (L, C)
    W: np.ndarray        # (L,)
    argmax_flow: np.ndarray  # (L,) flow index attaining W (smallest on ties)


def golden_max(f, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Argmax of a unimodal f on [lo, hi] by golden-section search.

    A coarse concavity screen runs first; a clear midpoint-concavity failure
    raises ValueError rather than silently returning a wrong bracket.
    """
    xs = np.linspace(lo, hi, 9)
    vals = [f(x) for x in xs]
    for i in range(1, 8):
        if vals[i] < min(vals[i - 1], vals[i + 1]) - 1e-9 * max(1.0, abs(vals[i])):
            raise ValueError("objective is not unimodal on the bracket")
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def admit_data(Q: np.ndarray, util: UtilitySpec, V: float, R_max: float,
               net: NetworkSpec) -> np.ndarray:
    """Admitted data per (node, flow), (N, C); pairs without a utility admit 0."""
    if V <= 0:
        raise ValueError("V must be positive")
    R = np.zeros_like(Q)
    for (node, flow), u in util.entries.items():
        n, c = net.node_index[node], net.flow_index[flow]
        q = float(Q[n, c])
        if hasattr(u, "admission"):
            R[n, c] = u.admission(V, q, R_max)
        elif q <= 0.0:
            R[n, c] = R_max
        else:
            R[n, c] = golden_max(lambda r: V * u.value(r) - q * r, 0.0, R_max)
    return R


def compute_weights(Q: np.ndarray, net: NetworkSpec, theta: float) -> LinkWeights:
    W_c = np.maximum(Q[net.link_src, :] - Q[net.link_dst, :] - theta, 0.0)
    W = W_c.max(axis=1)
    argmax = W_c.argmax(axis=1)  # first occurrence == smallest flow id
    return LinkWeights(W_c=W_c, W=W, argmax_flow=argmax)


# --------------------------------------------------------------------------- #
# Power allocation
# --------------------------------------------------------------------------- #

def project_capped_simplex(y: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= cap}."""
    x = np.maximum(y, 0.0)
    if x.sum() <= cap:
        return x
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, y.size + 1)
    feasible = u - (css - cap) / ks > 0
    k = int(ks[feasible][-1])
    lam = (css[k - 1] - cap) / k
    return np.maximum(y - lam, 0.0)


def _node_linear(W: np.ndarray, S: np.ndarray, beta_n: float, links: tuple, P_max: float,
                 P: np.ndarray) -> None:
    """Exact allocation for per-link-linear rates: all power to the best
    positive coefficient, nothing otherwise."""
    kappa = W[list(links)] * S[list(links)] + beta_n
    best = int(np.argmax(kappa))  # first max == smallest receiver id
    if kappa[best] > 0.0:
        P[links[best]] = P_max


def _node_log_pgd(W: np.ndarray, g: np.ndarray, sigma2: float, beta_n: float,
                  P_max: float, tol: float = 1e-8, max_iter: int = 2000) -> np.ndarray:
    """Concave per-node water-filling-style maximization by projected gradient.

    Objective: sum_m W_m*ln(1 + g_m*P_m/sigma2) + beta_n*sum_m P_m on the
    capped simplex.  Two exact KKT shortcuts keep threshold behavior sharp:
    a nonpositive gradient at zero means zero is optimal, and a positive
    energy price means the peak-power face is optimal (the solution is scaled
    onto it).
    """
    m = g.size
    grad0 = W * g / sigma2 + beta_n
    if np.all(grad0 <= 0.0):
        return np.zeros(m)

    def f(P):
        return float(np.sum(W * np.log1p(g * P / sigma2)) + beta_n * P.sum())

    def grad(P):
        return W * g / (sigma2 + g * P) + beta_n

    P = np.full(m, P_max / (2 * m))
    fP = f(P)
    step0 = P_max / max(np.max(np.abs(grad0)), 1e-12)
    for it in range(max_iter):
        gr = grad(P)
        alpha = step0
        for _ in range(60):
            Pn = project_capped_simplex(P + alpha * gr, P_max)
            fn = f(Pn)
            if fn >= fP + 1e-4 * float(gr @ (Pn - P)) or np.allclose(Pn, P):
                break
            alpha *= 0.5
        moved = float(np.max(np.abs(Pn - P)))
        gain = fn - fP
        P, fP = Pn, fn
        if moved <= 1e-12 or (0 <= gain <= tol * max(1.0, abs(fP)) and it > 2):
            break
    else:
        raise SolverError(f"projected gradient did not converge in {max_iter} iterations "
                          f"(last gain {gain:.3e})")
    if beta_n > 0.0 and P.sum() < P_max:
        # objective is nondecreasing along the ray through P; finish on the face
        P = P * (P_max / P.sum()) if P.sum() > 0 else np.full(m, 0.0)
        if P.sum() == 0.0:
            # all weights zero but positive price: any face point works; put it
            # on the first (smallest receiver id) link
            P = np.zeros(m)
            P[0] = P_max
    P[P < 1e-12] = 0.0
    return P


def _interference_objective(W: np.ndarray, beta_link: np.ndarray, model: RatePowerModel,
                            net: NetworkSpec, S: np.ndarray, P: np.ndarray) -> np.ndarray:
    mu = rate(model, net, S, P)
    return mu @ W + P @ beta_link


def _simplex_candidates(m: int, cap: float, ticks: int) -> np.ndarray:
    """Grid over {x >= 0, sum(x) <= cap} with the given ticks per axis, (K, m)."""
    axis = np.linspace(0.0, cap, ticks)
    if m == 1:
        return axis[:, None]
    grids = np.meshgrid(*([axis] * m), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return pts[pts.sum(axis=1) <= cap + 1e-12]


def _box_candidates(center: np.ndarray, radius: float, cap: float, ticks: int) -> np.ndarray:
    """Grid on the box center +- radius intersected with the capped simplex."""
    axes = [np.linspace(max(c - radius, 0.0), min(c + radius, cap), ticks)
            for c in center]
    if len(axes) == 1:
        pts = axes[0][:, None]
    else:
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
    return pts[pts.sum(axis=1) <= cap + 1e-12]


def _interference_ascent(W: np.ndarray, beta: np.ndarray, model: RatePowerModel,
                         net: NetworkSpec, S: np.ndarray, P_max: float,
                         restarts: int = 8, max_sweeps: int = 500,
                         tol: float = 1e-8, ticks: int = 33, seed: int = 0) -> np.ndarray:
    """Multi-start block-coordinate ascent over per-node power simplexes.

    The coupled objective is non-concave, so each node's block is maximized by
    a dense simplex grid plus two zoom refinements (per-link line search would
    strand power at the wrong vertex: the node budget pins the other link).
    The best of several starts wins.
    """
    L = net.n_links
    beta_link = beta[net.link_src]
    rng = np.random.Generator(np.random.Philox(key=seed))
    senders = [n for n in range(net.n_nodes) if net.out_links[n]]
    node_links = {n: list(net.out_links[n]) for n in senders}

    def batch_obj(P_batch):
        return _interference_objective(W, beta_link, model, net, S, P_batch)

    starts = [np.zeros(L)]
    spread = np.zeros(L)
    for n in senders:
        spread[node_links[n]] = P_max / len(node_links[n])
    starts.append(spread)
    from .ratepower import _sample_power
    for _ in range(max(0, restarts - len(starts))):
        starts.append(_sample_power(rng, net, P_max))

    best_P, best_obj = None, -math.inf
    for P0 in starts:
        P = P0.copy()
        obj = float(batch_obj(P[None, :])[0])
        converged = False
        for _ in range(max_sweeps):
            prev = obj
            for n in senders:
                links = node_links[n]
                cand = _simplex_candidates(len(links), P_max, ticks)
                step_size = P_max / (ticks - 1)
                for zoom in range(3):
                    batch = np.repeat(P[None, :], cand.shape[0], axis=0)
                    batch[:, links] = cand
                    vals = batch_obj(batch)
                    k = int(np.argmax(vals))
                    if vals[k] > obj:
                        obj = float(vals[k])
                        P = batch[k].copy()
                    cand = _box_candidates(P[links], step_size, P_max, ticks)
                    step_size = 2.0 * step_size / (ticks - 1)
            if obj - prev <= tol * max(1.0, abs(obj)):
                converged = True
                break
        if not converged:
            raise SolverError(f"coordinate ascent did not converge within {max_sweeps} sweeps "
                              f"(objective {obj:.6g})")
        if obj > best_obj:
            best_obj, best_P = obj, P.copy()
    return best_P


def allocate_with_prices(W: np.ndarray, beta: np.ndarray, model: RatePowerModel,
                         net: NetworkSpec, S: np.ndarray, P_max: float
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Maximize sum_l W_l*mu_l(S, P) + sum_n beta_n * (node n's total power)
    subject to the per-node peak power cap only.

    ``beta`` is the per-node signed price on spending power.  Returns the
    power vector and the realized link rates.
    """
    P = np.zeros(net.n_links)
    if model.kind == "linear-gain":
        for n in range(net.n_nodes):
            links = net.out_links[n]
            if links:
                _node_linear(W, S, float(beta[n]), links, P_max, P)
    elif model.kind == "orthogonal-log":
        for n in range(net.n_nodes):
            links = net.out_links[n]
            if not links:
                continue
            idx = list(links)
            P[idx] = _node_log_pgd(W[idx], S[idx], model.noise_variance,
                                   float(beta[n]), P_max)
    else:
        P = _interference_ascent(W, beta, model, net, S, P_max)
    return P, rate(model, net, S, P)


def allocate_power(weights: LinkWeights, E: np.ndarray, model: RatePowerModel,
                   net: NetworkSpec, S: np.ndarray, params: AlgorithmParams,
                   sys: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Perturbed power allocation: energy price beta_n = (eta/xi)*(E_n - gamma)."""
    beta = (sys.eta / sys.xi) * (E - params.gamma)
    return allocate_with_prices(weights.W, beta, model, net, S, sys.P_max)


def schedule(weights: LinkWeights, mu_link: np.ndarray, net: NetworkSpec) -> np.ndarray:
    """MaxWeight routing: a link's full rate goes to its max-positive-weight flow."""
    mu_c = np.zeros((net.n_links, net.n_flows))
    for l in range(net.n_links):
        if weights.W[l] > 0.0:
            mu_c[l, weights.argmax_flow[l]] = mu_link[l]
    return mu_c


def step(state: NetState, env: EnvSample, net: NetworkSpec, sys: SystemParams,
         model: RatePowerModel, util: UtilitySpec, params: AlgorithmParams) -> SlotDecision:
    """One slot of the proposed scheme; asserts the no-overdraw guarantee."""
    R = admit_data(state.Q, util, params.V, sys.R_max, net)
    w = compute_weights(state.Q, net, params.theta)
    P, mu_link = allocate_power(w, state.E, model, net, S=env.S, params=params, sys=sys)
    mu_c = schedule(w, mu_link, net)
    dec = SlotDecision(R=R, P=P, mu_c=mu_c, mu_link=mu_link)

    node_p = dec.node_power(net)
    starved = sys.xi * sys.eta * state.E < sys.P_max
    if np.any(node_p[starved] > EPS):
        n = int(np.argmax(node_p * starved))
        raise InvariantViolation(
            f"node {net.nodes[n]} spends {node_p[n]:.12g} with xi*eta*E = "
            f"{sys.xi * sys.eta * state.E[n]:.12g} < P_max (threshold guarantee broken)",
            slot=state.t)
    check_decision(dec, state, sys, net)
    return dec


@dataclass(frozen=True, eq=False)
class ProposedController:
    """Bundles the configuration the per-slot ops need; pure and reusable."""

    net: NetworkSpec
    sys: SystemParams
    model: RatePowerModel
    util: UtilitySpec
    params: AlgorithmParams

    name = "proposed"
    spill = False  # the scheme provably never overflows the battery

    def step(self, state: NetState, env: EnvSample) -> SlotDecision:
        return step(state, env, self.net, self.sys, self.model, self.util, self.params)
