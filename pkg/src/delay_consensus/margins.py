"""Delay-margin search by repeated LMI feasibility probes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import BaseInfeasible, BracketInvalid
from .lmi import assemble_full_lmi, layout_for
from .model import ErrorSystem
from .sdp import (Certificate, FeasibilityProblem, FeasibilityResult, SolverOptions, Status,
                  solve_feasibility, verify_certificate)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarginQuery:
    direction: Sequence[float]
    mu: Sequence[float]
    bracket: Tuple[float, float] = (0.01, 2.0)
    tolerance: float = 1e-3
    mode: str = "scale-direction"

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.ndim != 1 or np.any(d <= 0):
            raise ValueError("direction must be a vector of positive entries")
        lo, hi = self.bracket
        if not (0 < lo < hi):
            raise ValueError("bracket must satisfy 0 < s_lo < s_hi")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.mode not in ("scale-direction", "coordinate-ascent"):
            raise ValueError(f"unknown margin mode {self.mode!r}")


@dataclass
class MarginResult:
    tau_bar: np.ndarray
    probes: List[Tuple[tuple, Status]] = field(default_factory=list)
    monotonicity_violations: int = 0
    certificate: Optional[Certificate] = None
    scale: Optional[float] = None
    bisection_probes: int = 0
    notes: List[str] = field(default_factory=list)


class Prober:
    """Assemble and solve the LMI at a given bound vector, logging every call."""

    def __init__(self, es: ErrorSystem, mu, options: Optional[SolverOptions] = None,
                 epsilon: Optional[float] = None):
        self.es = es
        self.mu = np.asarray(mu, dtype=float)
        self.options = options or SolverOptions()
        self.epsilon = epsilon
        self.log: List[Tuple[tuple, Status]] = []

    def __call__(self, tau_bar) -> FeasibilityResult:
        res = probe(self.es, tau_bar, self.mu, self.options, self.epsilon)
        self.log.append((tuple(float(t) for t in tau_bar), res.status))
        log.info("probe %s -> %s", np.round(tau_bar, 6), res.status.value)
        return res


def probe(es: ErrorSystem, tau_bar, mu, options: Optional[SolverOptions] = None,
          epsilon: Optional[float] = None) -> FeasibilityResult:
    tau_bar = np.asarray(tau_bar, dtype=float)
    if np.any(tau_bar <= 0):
        raise ValueError("delay bounds must be strictly positive")
    lmi = assemble_full_lmi(es, layout_for(es), tau_bar, mu)
    problem = FeasibilityProblem(lmi, epsilon)
    res = solve_feasibility(problem, options)
    if res.feasible:
        # contract: a feasible claim always carries a verified certificate
        assert verify_certificate(res.certificate, problem).passed
    return res


def bisection_count(lo: float, hi: float, tol: float) -> int:
    return max(0, math.ceil(math.log2((hi - lo) / tol)))


def _grid_scan(prober: Prober, d: np.ndarray, lo: float, hi: float, tol: float):
    """Largest grid scale s = lo + i*tol such that every grid point up to s probes feasible."""
    best_s, best_cert = None, None
    steps = int(math.floor((hi - lo) / tol + 1e-9))
    for i in range(steps + 1):
        s = lo + i * tol
        res = prober(s * d)
        if not res.feasible:
            break
        best_s, best_cert = s, res.certificate
    return best_s, best_cert


def bisect_scale(es: ErrorSystem, q: MarginQuery, options: Optional[SolverOptions] = None,
                 epsilon: Optional[float] = None) -> MarginResult:
    """Largest s with s*d feasible, by bisection on [s_lo, s_hi]; UNKNOWN counts as not feasible."""
    d = np.asarray(q.direction, dtype=float)
    prober = Prober(es, q.mu, options, epsilon)
    lo, hi = map(float, q.bracket)
    res_lo = prober(lo * d)
    if not res_lo.feasible:
        raise BracketInvalid(f"lower bracket s={lo} is not feasible ({res_lo.status.value})")
    res_hi = prober(hi * d)
    if res_hi.feasible:
        raise BracketInvalid(f"upper bracket s={hi} is feasible")
    cert = res_lo.certificate
    n_bis = 0
    while hi - lo > q.tolerance:
        mid = 0.5 * (lo + hi)
        res = prober(mid * d)
        n_bis += 1
        if res.feasible:
            lo, cert = mid, res.certificate
        else:
            hi = mid
    result = MarginResult(tau_bar=lo * d, bisection_probes=n_bis)
    # confirm one relative tolerance step above the answer
    violations = 0
    while True:
        s_c = lo * (1 + q.tolerance)
        res = prober(s_c * d)
        if not res.feasible:
            break
        if s_c >= hi:
            violations += 1
            break
        lo, cert = s_c, res.certificate
    if violations:
        result.notes.append("feasible probe above a non-feasible one; recomputed by grid scan")
        s, c = _grid_scan(prober, d, q.bracket[0], q.bracket[1], q.tolerance)
        lo, cert = s, c
    result.tau_bar = lo * d
    result.scale = lo
    result.certificate = cert
    result.probes = prober.log
    result.monotonicity_violations = violations
    return result


def coordinate_margins(es: ErrorSystem, base_tau_bar, mu, tolerance: float = 1e-3,
                       order: Optional[Sequence[int]] = None, max_doublings: int = 12,
                       options: Optional[SolverOptions] = None,
                       epsilon: Optional[float] = None) -> MarginResult:
    """Raise each bound in turn (1-based ``order``) while holding the others fixed."""
    prober = Prober(es, mu, options, epsilon)
    cur = np.asarray(base_tau_bar, dtype=float).copy()
    res = prober(cur)
    if not res.feasible:
        raise BaseInfeasible(f"base bounds {cur} are not feasible ({res.status.value})")
    cert = res.certificate
    order = list(order) if order is not None else list(range(1, es.r + 1))
    notes = []
    n_bis = 0
    for k in order:
        idx = k - 1
        lo = cur[idx]
        hi = None
        trial = cur.copy()
        for _ in range(max_doublings):
            trial[idx] = 2 * (hi if hi is not None else lo)
            r_ = prober(trial)
            if r_.feasible:
                hi = None
                lo, cert = trial[idx], r_.certificate
                cur[idx] = lo
            else:
                hi = trial[idx]
                break
        if hi is None:
            notes.append(f"edge {k}: still feasible after {max_doublings} doublings")
            continue
        while hi - lo > tolerance:
            mid = 0.5 * (lo + hi)
            trial = cur.copy()
            trial[idx] = mid
            r_ = prober(trial)
            n_bis += 1
            if r_.feasible:
                lo, cert = mid, r_.certificate
            else:
                hi = mid
        cur[idx] = lo
    return MarginResult(tau_bar=cur, probes=prober.log, certificate=cert,
                        bisection_probes=n_bis, notes=notes)
