"""Simulation config files: TOML with network, system, rate-model and utility tables.

``delta1``, ``delta2`` and ``g_max`` are not config keys: they are derived
from the declared rate model (worst-case over its channel domain) and from
the utility functions, so the file cannot contradict the objects it builds.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .model import (Log1pUtility, NetworkSpec, SystemParams, UtilitySpec,
                    ValidationReport, param_window, validate_system)
from .ratepower import RatePowerModel, sensitivity_constants

UTILITY_FORMS = ("log1p",)


class ConfigError(Exception):
    """Malformed or inconsistent configuration file."""


def _req(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigError(f"missing field '{path}.{key}'")
    return table[key]


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything a simulation needs, plus file-supplied defaults."""

    net: NetworkSpec
    sys: SystemParams
    model: RatePowerModel
    util: UtilitySpec
    defaults: dict

    def with_system(self, **replacements) -> "SimConfig":
        """New config with some system constants replaced (e.g. eta, xi, e_max)."""
        return SimConfig(net=self.net, sys=replace(self.sys, **replacements),
                         model=self.model, util=self.util, defaults=dict(self.defaults))

    def validate(self) -> ValidationReport:
        rep = validate_system(self.sys)
        urep = self.util.validate(self.net, self.sys.R_max)
        rep.checks.extend(urep.checks)
        top = self.model.max_link_rate(self.sys.P_max)
        if top > self.sys.mu_max + 1e-12:
            rep.warnings.append(
                f"configured mu_max = {self.sys.mu_max:g} is below the rate model's "
                f"achievable single-link maximum {top:g}; mu_max is used as-is in the "
                f"backpressure offset and rates are not clipped")
        return rep


def _build_utilities(tables, net: NetworkSpec) -> UtilitySpec:
    entries = {}
    for i, tbl in enumerate(tables):
        path = f"utilities[{i}]"
        form = _req(tbl, "form", path)
        if form not in UTILITY_FORMS:
            raise ConfigError(f"{path}.form: unknown form {form!r}; expected one of {UTILITY_FORMS}")
        weight = float(tbl.get("weight", 1.0))
        if weight <= 0:
            raise ConfigError(f"{path}.weight must be > 0")
        flow = int(_req(tbl, "flow", path))
        nodes = tbl.get("nodes")
        if nodes is None:
            nodes = [_req(tbl, "node", path)]
        for node in nodes:
            key = (int(node), flow)
            if key in entries:
                raise ConfigError(f"{path}: duplicate utility for pair {key}")
            entries[key] = Log1pUtility(weight=weight)
    if not entries:
        raise ConfigError("no [[utilities]] entries: nothing would ever be admitted")
    for (node, flow) in entries:
        if node not in net.node_index:
            raise ConfigError(f"utilities: node {node} not in network")
        if flow not in net.flow_index:
            raise ConfigError(f"utilities: flow {flow} not declared in network.flows")
        if not net.reaches(node, flow):
            raise ConfigError(f"utilities: no directed path from source {node} to flow "
                              f"destination {flow}")
    return UtilitySpec(entries=entries)


def load_config(path: str | Path) -> SimConfig:
    """Parse and cross-validate a simulation config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}")

    net_tbl = _req(raw, "network", str(path))
    try:
        net = NetworkSpec(
            nodes=tuple(int(n) for n in _req(net_tbl, "nodes", "network")),
            links=tuple((int(a), int(b)) for a, b in _req(net_tbl, "links", "network")),
            flows=tuple(int(c) for c in _req(net_tbl, "flows", "network")),
        )
    except ValueError as exc:
        raise ConfigError(f"network: {exc}")

    mdl_tbl = _req(raw, "rate_model", str(path))
    try:
        model = RatePowerModel(
            kind=_req(mdl_tbl, "kind", "rate_model"),
            channel_states=tuple(float(s) for s in _req(mdl_tbl, "channel_states", "rate_model")),
            noise_variance=float(mdl_tbl.get("noise_variance", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"rate_model: {exc}")

    util = _build_utilities(raw.get("utilities", []), net)
    delta1, delta2 = sensitivity_constants(model, net)

    sys_tbl = _req(raw, "system", str(path))
    try:
        sysp = SystemParams(
            R_max=float(_req(sys_tbl, "R_max", "system")),
            P_max=float(_req(sys_tbl, "P_max", "system")),
            mu_max=float(_req(sys_tbl, "mu_max", "system")),
            E_max=float(_req(sys_tbl, "E_max", "system")),
            xi=float(_req(sys_tbl, "xi", "system")),
            eta=float(_req(sys_tbl, "eta", "system")),
            e_max=float(_req(sys_tbl, "e_max", "system")),
            g_max=util.g_max,
            delta1=delta1,
            delta2=delta2,
        )
    except ValueError as exc:
        raise ConfigError(f"system: {exc}")

    defaults = dict(raw.get("defaults", {}))
    defaults.setdefault("V", 30.0)
    defaults.setdefault("horizon", 1200)
    defaults.setdefault("runs", 10)
    defaults.setdefault("seed", 1)
    return SimConfig(net=net, sys=sysp, model=model, util=util, defaults=defaults)


def paper_config_path() -> Path:
    """Path of the shipped seven-node data-collection network config."""
    return Path(importlib.resources.files("ehnetctl") / "configs" / "paper_fig1.cfg")


def describe_window(cfg: SimConfig, V: float | None = None) -> str:
    """Human-readable admissible window, optionally evaluated at a given V."""
    win = param_window(cfg.sys)
    lines = [f"V_max = {win.V_max:g}"]
    if V is not None:
        lines.append(f"gamma window at V = {V:g}: "
                     f"[{win.gamma_min(V):g}, {win.gamma_max(V):g}]")
    else:
        lines.append(f"gamma window at V -> 0: [{win.gamma_min(0):g}, {win.gamma_max(0):g}]")
    return "\n".join(lines)
