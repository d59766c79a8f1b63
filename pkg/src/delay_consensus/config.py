"""JSON run configuration: schema validation collecting every error with its field path."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, List, Optional, Tuple

import numpy as np

from .errors import SchemaError
from .graph import DelayGraph, Edge, index_delays
from .model import AgentSystem
from .simulate import DelayProfile, HistorySpec, constant_profile, make_sinusoidal_profile

Matrix = Tuple[Tuple[float, ...], ...]


@dataclass(frozen=True)
class SystemConfig:
    A: Matrix
    B: Matrix
    K: Matrix
    sigma: int = -1


@dataclass(frozen=True)
class EdgeConfig:
    source: int
    target: int
    weight: float = 1.0


@dataclass(frozen=True)
class GraphConfig:
    N: int
    edges: Tuple[EdgeConfig, ...]


@dataclass(frozen=True)
class ProfileConfig:
    kind: str = "constant"
    value: Optional[float] = None  # constant delay; defaults to tau_bar
    phase: float = 0.0


@dataclass(frozen=True)
class DelayConfig:
    tau_bar: Tuple[float, ...]  # indexed by delay index k = 1..r
    mu: Tuple[float, ...]
    profiles: Optional[Tuple[ProfileConfig, ...]] = None


@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-3
    T: float = 30.0
    x0: Optional[Tuple[float, ...]] = None
    history: str = "constant-at-initial"


@dataclass(frozen=True)
class SolverConfig:
    epsilon: Optional[float] = None
    max_iter: int = 500
    tol: float = 1e-9


@dataclass(frozen=True)
class MarginConfig:
    mode: str = "scale-direction"
    direction: Optional[Tuple[float, ...]] = None
    bracket: Tuple[float, float] = (0.01, 2.0)
    tolerance: float = 1e-3
    base: Optional[Tuple[float, ...]] = None
    order: Optional[Tuple[int, ...]] = None


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    graph: GraphConfig
    delays: DelayConfig
    sim: SimConfig = field(default_factory=SimConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    margin: MarginConfig = field(default_factory=MarginConfig)

    def agent_system(self) -> AgentSystem:
        s = self.system
        return AgentSystem(A=np.array(s.A), B=np.array(s.B), K=np.array(s.K), sigma=s.sigma)

    def delay_graph(self) -> DelayGraph:
        g = DelayGraph(self.graph.N, tuple(Edge(e.source, e.target, e.weight) for e in self.graph.edges))
        return index_delays(g).with_bounds(self.delays.tau_bar, self.delays.mu)

    def profiles(self) -> List[DelayProfile]:
        d = self.delays
        specs = d.profiles or tuple(ProfileConfig() for _ in d.tau_bar)
        out = []
        for p, tb, mu in zip(specs, d.tau_bar, d.mu):
            if p.kind == "constant":
                out.append(constant_profile(tb if p.value is None else p.value))
            else:
                out.append(make_sinusoidal_profile(tb, mu, p.phase))
        return out

    def history(self) -> HistorySpec:
        return HistorySpec(self.sim.history)


class _Collector:
    def __init__(self):
        self.errors: List[Tuple[str, str]] = []

    def add(self, path: str, msg: str):
        self.errors.append((path, msg))

    def section(self, d: dict, key: str, required: bool = True) -> dict:
        if key not in d:
            if required:
                self.add(key, "missing section")
            return {}
        if not isinstance(d[key], dict):
            self.add(key, "must be an object")
            return {}
        return d[key]

    def number(self, v, path, *, positive=False, nonneg=False, integer=False, below=None):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            self.add(path, "must be a finite number")
            return None
        if integer and int(v) != v:
            self.add(path, "must be an integer")
            return None
        if positive and not v > 0:
            self.add(path, "must be positive")
        if nonneg and v < 0:
            self.add(path, "must be nonnegative")
        if below is not None and not v < below:
            self.add(path, f"must be below {below}")
        return int(v) if integer else float(v)

    def vector(self, v, path, length=None, **kw):
        if not isinstance(v, list):
            self.add(path, "must be an array")
            return None
        if length is not None and len(v) != length:
            self.add(path, f"must have {length} entries, got {len(v)}")
        out = [self.number(x, f"{path}[{i}]", **kw) for i, x in enumerate(v)]
        return None if any(x is None for x in out) else tuple(out)

    def matrix(self, v, path):
        if isinstance(v, list) and v and all(isinstance(x, (int, float)) for x in v):
            v = [v]  # a flat list is one row
        if not isinstance(v, list) or not v or not all(isinstance(row, list) for row in v):
            self.add(path, "must be a nonempty array of rows")
            return None
        rows = [self.vector(row, f"{path}[{i}]") for i, row in enumerate(v)]
        if any(r is None for r in rows):
            return None
        if len({len(r) for r in rows}) != 1 or not rows[0]:
            self.add(path, "rows must have equal nonzero length")
            return None
        return tuple(rows)


def _parse_system(c: _Collector, d: dict) -> Optional[SystemConfig]:
    A, B, K = (c.matrix(d.get(k), f"system.{k}") for k in "ABK")
    sigma = d.get("sigma", -1)
    if sigma not in (-1, 1) or isinstance(sigma, bool):
        c.add("system.sigma", "must be -1 or 1")
    if A is None or B is None or K is None:
        return None
    n = len(A)
    if len(A[0]) != n:
        c.add("system.A", "must be square")
    if len(B) != n:
        if len(B) == 1 and len(B[0]) == n:
            B = tuple((x,) for x in B[0])  # flat list read as a column
        else:
            c.add("system.B", f"must have {n} rows")
    m = len(B[0])
    if len(K) != m or len(K[0]) != n:
        c.add("system.K", f"must be {m}x{n}")
    return SystemConfig(A, B, K, int(sigma))


def _parse_graph(c: _Collector, d: dict) -> Optional[GraphConfig]:
    N = c.number(d.get("N"), "graph.N", integer=True)
    if N is not None and N < 2:
        c.add("graph.N", "must be at least 2")
    edges = d.get("edges")
    if not isinstance(edges, list) or not edges:
        c.add("graph.edges", "must be a nonempty array")
        return None
    out, seen = [], set()
    for i, e in enumerate(edges):
        p = f"graph.edges[{i}]"
        if not isinstance(e, dict):
            c.add(p, "must be an object with from, to, weight")
            continue
        s = c.number(e.get("from"), f"{p}.from", integer=True)
        t = c.number(e.get("to"), f"{p}.to", integer=True)
        w = c.number(e.get("weight", 1.0), f"{p}.weight", positive=True)
        if s is None or t is None or w is None:
            continue
        if N is not None and not (1 <= s <= N and 1 <= t <= N):
            c.add(p, "references an agent outside 1..N")
        if s == t:
            c.add(p, "self-loop")
        if (s, t) in seen:
            c.add(p, "duplicate edge")
        seen.add((s, t))
        out.append(EdgeConfig(s, t, w))
    return GraphConfig(N, tuple(out)) if N is not None else None


def _parse_delays(c: _Collector, d: dict, r: Optional[int]) -> Optional[DelayConfig]:
    tb = c.vector(d.get("tau_bar"), "delays.tau_bar", r, positive=True)
    mu = c.vector(d.get("mu"), "delays.mu", r, nonneg=True, below=1.0)
    profiles = None
    if d.get("profiles") is not None:
        raw = d["profiles"]
        if not isinstance(raw, list):
            c.add("delays.profiles", "must be an array")
        else:
            if r is not None and len(raw) != r:
                c.add("delays.profiles", f"must have {r} entries, got {len(raw)}")
            prof = []
            for i, p in enumerate(raw):
                path = f"delays.profiles[{i}]"
                if not isinstance(p, dict) or p.get("kind") not in ("constant", "sinusoidal"):
                    c.add(f"{path}.kind", "must be 'constant' or 'sinusoidal'")
                    continue
                val = p.get("value")
                if val is not None:
                    val = c.number(val, f"{path}.value", nonneg=True)
                    if val is not None and tb is not None and i < len(tb) and val > tb[i]:
                        c.add(f"{path}.value", "exceeds tau_bar")
                phase = c.number(p.get("phase", 0.0), f"{path}.phase")
                prof.append(ProfileConfig(p["kind"], val, phase if phase is not None else 0.0))
            profiles = tuple(prof)
    if tb is None or mu is None:
        return None
    return DelayConfig(tb, mu, profiles)


def _parse_sim(c: _Collector, d: dict, dim: Optional[int]) -> SimConfig:
    h = c.number(d.get("h", 1e-3), "sim.h", positive=True)
    T = c.number(d.get("T", 30.0), "sim.T", positive=True)
    x0 = d.get("x0")
    if x0 is not None:
        x0 = c.vector(x0, "sim.x0", dim)
    hist = d.get("history", "constant-at-initial")
    if hist != "constant-at-initial":
        c.add("sim.history", "only 'constant-at-initial' is supported in config files")
    return SimConfig(h or 1e-3, T or 30.0, x0, hist)


def _parse_solver(c: _Collector, d: dict) -> SolverConfig:
    eps = d.get("epsilon")
    if eps is not None:
        eps = c.number(eps, "solver.epsilon", positive=True)
    mi = c.number(d.get("max_iter", 500), "solver.max_iter", positive=True, integer=True)
    tol = c.number(d.get("tol", 1e-9), "solver.tol", positive=True)
    return SolverConfig(eps, mi or 500, tol or 1e-9)


def _parse_margin(c: _Collector, d: dict, r: Optional[int]) -> MarginConfig:
    mode = d.get("mode", "scale-direction")
    if mode not in ("scale-direction", "coordinate-ascent"):
        c.add("margin.mode", "must be 'scale-direction' or 'coordinate-ascent'")
    direction = d.get("direction")
    if direction is not None:
        direction = c.vector(direction, "margin.direction", r, positive=True)
    br = c.vector(d.get("bracket", [0.01, 2.0]), "margin.bracket", 2, positive=True)
    if br is not None and not br[0] < br[1]:
        c.add("margin.bracket", "must satisfy lo < hi")
    tol = c.number(d.get("tolerance", 1e-3), "margin.tolerance", positive=True)
    base = d.get("base")
    if base is not None:
        base = c.vector(base, "margin.base", r, positive=True)
    order = d.get("order")
    if order is not None:
        order = c.vector(order, "margin.order", integer=True)
        if order is not None and r is not None and sorted(order) != list(range(1, r + 1)):
            c.add("margin.order", f"must be a permutation of 1..{r}")
    return MarginConfig(mode, direction, br or (0.01, 2.0), tol or 1e-3, base, order)


def parse_dict(data: Any) -> RunConfig:
    c = _Collector()
    if not isinstance(data, dict):
        raise SchemaError([("", "top level must be an object")])
    for key in data:
        if key not in ("system", "graph", "delays", "sim", "solver", "margin"):
            c.add(key, "unknown section")
    system = _parse_system(c, c.section(data, "system"))
    graph = _parse_graph(c, c.section(data, "graph"))
    r = len(graph.edges) if graph else None
    delays = _parse_delays(c, c.section(data, "delays"), r)
    dim = graph.N * len(system.A) if graph and system else None
    sim = _parse_sim(c, c.section(data, "sim", False), dim)
    solver = _parse_solver(c, c.section(data, "solver", False))
    margin = _parse_margin(c, c.section(data, "margin", False), r)
    if c.errors:
        raise SchemaError(c.errors)
    return RunConfig(system, graph, delays, sim, solver, margin)


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError([("", f"invalid JSON: {exc}")]) from None
    return parse_dict(data)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["graph"]["edges"] = [{"from": e.source, "to": e.target, "weight": e.weight} for e in cfg.graph.edges]
    if cfg.delays.profiles is None:
        d["delays"].pop("profiles")
    else:
        d["delays"]["profiles"] = [{k: v for k, v in asdict(p).items() if v is not None}
                                   for p in cfg.delays.profiles]
    for sec in ("sim", "solver", "margin"):
        d[sec] = {k: v for k, v in d[sec].items() if v is not None}
    # tuples become lists so the result feeds straight back into parse_dict
    return json.loads(json.dumps(d))


def serialize(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2)
