"""Scenario configuration: one JSON document per sweep."""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..energy import MinimizeConfig
from ..geometry.families import FAMILIES
from ..nonlinearity import BistableNonlinearity, NonlinearityError
from ..solver import SolverConfig

KINDS = ("steady", "invasion", "energy_min", "geometry_metrics", "profiles")
PROBES = ("auto", "cavity", "shadow", "all")
INITS = ("auto", "radial", "v0", "one")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Point:
    """One parameter point of a sweep."""

    eps: float
    eta: float | None
    h: float

    @property
    def label(self) -> str:
        parts = [f"eps{self.eps:g}"]
        if self.eta is not None:
            parts.append(f"eta{self.eta:g}")
        parts.append(f"h{self.h:g}")
        return "_".join(parts)

    def sort_key(self):
        return (self.eps, -1.0 if self.eta is None else self.eta, self.h)


@dataclass
class Scenario:
    name: str
    kind: str
    nonlinearity: BistableNonlinearity
    family: str = "disk"
    params: dict = field(default_factory=dict)
    eps: tuple = (0.0,)
    eta: tuple | None = None
    h: tuple = (0.05,)
    R_outer: float = 8.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    minimize: MinimizeConfig = field(default_factory=MinimizeConfig)
    invasion: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)
    steady: dict = field(default_factory=dict)
    output: str = "runs"
    seed: int = 0
    workers: int = 1
    snapshots: bool = True
    raw: dict = field(default_factory=dict, repr=False)

    def points(self) -> list[Point]:
        etas = self.eta if self.eta is not None else (None,)
        pts = [Point(float(e), None if t is None else float(t), float(h))
               for e, t, h in itertools.product(self.eps, etas, self.h)]
        return sorted(pts, key=Point.sort_key)

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _num_list(block: dict, key: str, path: str, default, positive=False, allow_zero=True):
    val = block.get(key, default)
    if val is None:
        return None
    if isinstance(val, (int, float)):
        val = [val]
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{path}.{key}", "must be a nonempty number or list of numbers")
    out = []
    for i, x in enumerate(val):
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise ConfigError(f"{path}.{key}[{i}]", f"expected a number, got {x!r}")
        if positive and (x < 0 or (x == 0 and not allow_zero)):
            raise ConfigError(f"{path}.{key}[{i}]", f"must be {'non-negative' if allow_zero else 'positive'}")
        out.append(float(x))
    return tuple(out)


def _sub(cls, block, path):
    try:
        return cls.from_config(block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("scenario", "config must be a JSON object")
    p = "scenario"
    known = {"name", "kind", "nonlinearity", "obstacle", "grid", "solver", "minimize", "invasion",
             "energy", "steady", "output", "seed", "workers", "snapshots"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(p, f"unknown keys {sorted(extra)}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"{p}.kind", f"must be one of {KINDS}, got {kind!r}")
    name = doc.get("name", kind)
    if not isinstance(name, str) or not name or "/" in name:
        raise ConfigError(f"{p}.name", "must be a nonempty string without '/'")

    block = doc.get("nonlinearity")
    if not isinstance(block, dict):
        raise ConfigError(f"{p}.nonlinearity", "required object with kind, theta, amplitude")
    if "theta" not in block:
        raise ConfigError(f"{p}.nonlinearity.theta", "missing")
    try:
        nl = BistableNonlinearity.from_config(block)
    except (NonlinearityError, TypeError, ValueError) as exc:
        raise ConfigError(f"{p}.nonlinearity", str(exc)) from exc

    ob = doc.get("obstacle", {"family": "disk"})
    if not isinstance(ob, dict):
        raise ConfigError(f"{p}.obstacle", "must be an object")
    family = ob.get("family", "disk")
    if family not in FAMILIES:
        raise ConfigError(f"{p}.obstacle.family", f"unknown family {family!r}; choose from {FAMILIES}")
    params = ob.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{p}.obstacle.params", "must be an object")
    eps_default = 1.0 if family == "counterexample" else 0.0
    eps = _num_list(ob, "eps", f"{p}.obstacle", eps_default, positive=True)
    eta = _num_list(ob, "eta", f"{p}.obstacle", None, positive=True, allow_zero=False)
    if eta is not None and family != "counterexample":
        raise ConfigError(f"{p}.obstacle.eta", "only the counterexample family takes an eta list")
    if family == "counterexample":
        if "eta" in params:
            raise ConfigError(f"{p}.obstacle.params.eta", "give eta as the sweep list obstacle.eta")
        if eta is None:
            eta = (0.1,)
        if any(e == 0 for e in eps):
            raise ConfigError(f"{p}.obstacle.eps", "counterexample eps must lie in (0, 1]")

    grid = doc.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError(f"{p}.grid", "must be an object")
    h = _num_list(grid, "h", f"{p}.grid", 0.05, positive=True, allow_zero=False)
    R_outer = grid.get("R_outer", 8.0)
    if not isinstance(R_outer, (int, float)) or R_outer <= 0:
        raise ConfigError(f"{p}.grid.R_outer", "must be a positive number")
    extra = set(grid) - {"h", "R_outer"}
    if extra:
        raise ConfigError(f"{p}.grid", f"unknown keys {sorted(extra)}")

    solver = _sub(SolverConfig, doc.get("solver"), f"{p}.solver")
    minimize = _sub(MinimizeConfig, doc.get("minimize"), f"{p}.minimize")

    inv = dict(doc.get("invasion", {}))
    for key in set(inv) - {"t_end", "dt", "probe", "record_every", "tol_liouville"}:
        raise ConfigError(f"{p}.invasion.{key}", "unknown key")
    if inv.get("probe", "auto") not in PROBES:
        raise ConfigError(f"{p}.invasion.probe", f"must be one of {PROBES}")
    for key in ("t_end", "dt"):
        if key in inv and not (isinstance(inv[key], (int, float)) and inv[key] > 0):
            raise ConfigError(f"{p}.invasion.{key}", "must be positive")

    en = dict(doc.get("energy", {}))
    for key in set(en) - {"delta_ball", "n_probes", "probe_magnitude", "cross_check"}:
        raise ConfigError(f"{p}.energy.{key}", "unknown key")

    st = dict(doc.get("steady", {}))
    for key in set(st) - {"init", "delta", "tol_liouville"}:
        raise ConfigError(f"{p}.steady.{key}", "unknown key")
    if st.get("init", "auto") not in INITS:
        raise ConfigError(f"{p}.steady.init", f"must be one of {INITS}")

    seed = doc.get("seed", 0)
    workers = doc.get("workers", 1)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"{p}.seed", "must be an integer")
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"{p}.workers", "must be a positive integer")

    return Scenario(
        name=name, kind=kind, nonlinearity=nl, family=family, params=dict(params), eps=eps, eta=eta,
        h=h, R_outer=float(R_outer), solver=solver, minimize=minimize, invasion=inv, energy=en, steady=st,
        output=str(doc.get("output", "runs")), seed=seed, workers=workers,
        snapshots=bool(doc.get("snapshots", True)), raw=doc,
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return parse_scenario(doc)
