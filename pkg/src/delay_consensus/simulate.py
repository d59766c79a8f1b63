"""Fixed-step RK4 integration of the delayed consensus and error dynamics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, StepTooLarge
from .graph import DelayGraph
from .model import AgentSystem, ErrorSystem, build_U_W, global_matrices


@dataclass(frozen=True)
class DelayProfile:
    """tau(t) = value (constant) or (tau_bar/2)(1 + sin(omega t + phase))."""

    kind: str = "constant"
    value: float = 0.0
    tau_bar: float = 0.0
    omega: float = 0.0
    phase: float = 0.0
    mu: Optional[float] = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.value < 0:
                raise ValueError("constant delay must be nonnegative")
        elif self.kind == "sinusoidal":
            if self.tau_bar <= 0 or self.omega < 0:
                raise ValueError("sinusoidal profile needs tau_bar > 0 and omega >= 0")
            if self.mu is not None and self.rate_bound > self.mu + 1e-12:
                raise ValueError(f"max delay rate {self.rate_bound:.6g} exceeds mu={self.mu}")
        else:
            raise ValueError(f"unknown delay profile kind {self.kind!r}")

    @property
    def upper(self) -> float:
        return self.value if self.kind == "constant" else self.tau_bar

    @property
    def rate_bound(self) -> float:
        return 0.0 if self.kind == "constant" else 0.5 * self.tau_bar * self.omega

    def __call__(self, t):
        if self.kind == "constant":
            return np.full_like(np.asarray(t, dtype=float), self.value)
        return 0.5 * self.tau_bar * (1.0 + np.sin(self.omega * np.asarray(t, dtype=float) + self.phase))

    def rate(self, t):
        if self.kind == "constant":
            return np.zeros_like(np.asarray(t, dtype=float))
        return 0.5 * self.tau_bar * self.omega * np.cos(self.omega * np.asarray(t, dtype=float) + self.phase)

    def is_zero(self) -> bool:
        return self.kind == "constant" and self.value == 0.0

    def step_scale(self) -> float:
        """Delay length the integration step must resolve; inf for a zero delay.

        A sinusoid touches zero, so its peak tau_bar is used; lookups closer
        than one step are served by extrapolation of the last cell.
        """
        if self.kind == "constant":
            return self.value if self.value > 0 else math.inf
        return self.tau_bar

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "sinusoidal", "tau_bar": self.tau_bar, "omega": self.omega, "phase": self.phase}


def constant_profile(value: float) -> DelayProfile:
    return DelayProfile("constant", value=float(value))


def make_sinusoidal_profile(tau_bar: float, mu: float, phase: float = 0.0) -> DelayProfile:
    """Fastest sinusoid in [0, tau_bar] whose rate stays within mu."""
    if tau_bar <= 0 or not (0 <= mu < 1):
        raise ValueError("need tau_bar > 0 and 0 <= mu < 1")
    return DelayProfile("sinusoidal", tau_bar=float(tau_bar), omega=2.0 * mu / tau_bar,
                        phase=float(phase), mu=float(mu))


@dataclass(frozen=True)
class HistorySpec:
    """Initial function on [-max tau, 0]: constant at the initial state or sampled values."""

    kind: str = "constant-at-initial"
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "explicit-function-samples":
            if self.times is None or self.values is None:
                raise ValueError("sampled history needs times and values")
            t = np.asarray(self.times, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if v.ndim == 1:
                v = v[:, None]
            if t.ndim != 1 or len(t) != len(v) or len(t) < 2 or np.any(np.diff(t) <= 0):
                raise ValueError("history times must be increasing and match values")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)
        elif self.kind != "constant-at-initial":
            raise ValueError(f"unknown history kind {self.kind!r}")

    @classmethod
    def from_function(cls, f: Callable[[float], np.ndarray], span: float, h: float):
        m = max(2, int(math.ceil(span / h)) + 1)
        t = np.linspace(-(m - 1) * h, 0.0, m)
        return cls("explicit-function-samples", t, np.array([np.atleast_1d(f(s)) for s in t]))

    def mapped(self, M: np.ndarray) -> "HistorySpec":
        """History of M x for a linear change of coordinates."""
        if self.kind == "constant-at-initial":
            return self
        return HistorySpec(self.kind, self.times, self.values @ M.T)

    def _derivs(self) -> np.ndarray:
        return np.gradient(self.values, self.times, axis=0)

    def covers(self, span: float) -> bool:
        return self.kind == "constant-at-initial" or self.times[0] <= -span + 1e-12

    def evaluate(self, s: float, y0: np.ndarray):
        """(value, derivative) of the history at s <= 0."""
        if self.kind == "constant-at-initial":
            return y0, np.zeros_like(y0)
        t, v = self.times, self.values
        if s <= t[0]:
            return v[0], np.zeros(v.shape[1])
        i = min(int(np.searchsorted(t, s)) - 1, len(t) - 2)
        i = max(i, 0)
        d = self._derivs()
        return _hermite(s, t[i], t[i + 1] - t[i], v[i], d[i], v[i + 1], d[i + 1])


def _hermite(s, t0, h, y0, f0, y1, f1):
    th = (s - t0) / h
    th2, th3 = th * th, th * th * th
    val = ((2 * th3 - 3 * th2 + 1) * y0 + (th3 - 2 * th2 + th) * h * f0
           + (-2 * th3 + 3 * th2) * y1 + (th3 - th2) * h * f1)
    der = ((6 * th2 - 6 * th) * y0 / h + (3 * th2 - 4 * th + 1) * f0
           + (-6 * th2 + 6 * th) * y1 / h + (3 * th2 - 2 * th) * f1)
    return val, der


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    disagreement: np.ndarray
    n: int
    N: int
    kind: str = "x"
    diverged: bool = False
    metadata: dict = field(default_factory=dict)

    def agent(self, i: int) -> np.ndarray:
        """States of agent i (1-based) for an x trajectory."""
        return self.states[:, (i - 1) * self.n:i * self.n]

    def header(self) -> List[str]:
        blocks = self.N if self.kind == "x" else self.N - 1
        cols = [f"{self.kind}_{i}_{j}" for i in range(1, blocks + 1) for j in range(1, self.n + 1)]
        return ["t"] + cols + ["disagreement"]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for k in range(len(self.t)):
            row = [self.t[k], *self.states[k], self.disagreement[k]]
            w.writerow([f"{v:.12g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _check_step(profiles: Sequence[DelayProfile], h: float, T: float):
    if h <= 0 or T <= 0:
        raise ValueError("h and T must be positive")
    m = min((p.step_scale() for p in profiles), default=math.inf)
    if math.isfinite(m) and h > m / 4:
        raise StepTooLarge(f"step {h} exceeds a quarter of the smallest delay scale {m:.6g}")


def integrate_dde(A0: np.ndarray, C: Sequence[np.ndarray], profiles: Sequence[DelayProfile],
                  y0, history: Optional[HistorySpec], h: float, T: float,
                  blowup: float = 1e100):
    """RK4 for y' = A0 y + sum_k C_k y(t - tau_k(t)).

    Delayed values inside the integrated range come from cubic Hermite
    interpolation of stored grid states and derivatives.  A lookup that lands
    past the last stored point (delay shorter than the stage offset) is
    extrapolated from the last cell, or linearly on the first step.
    Returns (t, Y, F, diverged).
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    dim = len(y0)
    if A0.shape != (dim, dim) or any(Ck.shape != (dim, dim) for Ck in C):
        raise DimensionMismatch("state and system dimensions disagree")
    if len(C) != len(profiles):
        raise DimensionMismatch(f"{len(C)} coupling terms but {len(profiles)} delay profiles")
    history = history or HistorySpec()
    span = max((p.upper for p in profiles), default=0.0)
    if not history.covers(span):
        raise ValueError("history does not cover the largest delay")
    _check_step(profiles, h, T)

    steps = int(round(T / h))
    t = h * np.arange(steps + 1)
    Y = np.empty((steps + 1, dim))
    F = np.empty((steps + 1, dim))
    Y[0] = y0
    delayed = [(Ck, p) for Ck, p in zip(C, profiles) if not p.is_zero()]
    A_inst = A0 + sum((Ck for Ck, p in zip(C, profiles) if p.is_zero()), np.zeros_like(A0))

    def lookup(s: float, n: int) -> np.ndarray:
        # Y and F are complete up to index n
        if s <= 0.0:
            return history.evaluate(s, y0)[0]
        i = int(s // h)
        if i < n:
            return _hermite(s, t[i], h, Y[i], F[i], Y[i + 1], F[i + 1])[0]
        if n == 0:
            return Y[0] + (s - t[0]) * F[0]
        return _hermite(s, t[n - 1], h, Y[n - 1], F[n - 1], Y[n], F[n])[0]

    def rhs(tt: float, y: np.ndarray, n: int) -> np.ndarray:
        out = A_inst @ y
        for Ck, p in delayed:
            out += Ck @ lookup(tt - float(p(tt)), n)
        return out

    diverged = False
    last = steps
    for n in range(steps):
        tn, yn = t[n], Y[n]
        k1 = rhs(tn, yn, n) if n == 0 else F[n]
        if n == 0:
            F[0] = k1
        k2 = rhs(tn + h / 2, yn + h / 2 * k1, n)
        k3 = rhs(tn + h / 2, yn + h / 2 * k2, n)
        k4 = rhs(tn + h, yn + h * k3, n)
        y_new = yn + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y_new)) or np.max(np.abs(y_new)) > blowup:
            diverged, last = True, n
            break
        Y[n + 1] = y_new
        # F[n + 1] is not known yet, so lookups past t_n extrapolate from the last full cell
        F[n + 1] = rhs(t[n + 1], y_new, n)
    return t[:last + 1], Y[:last + 1], F[:last + 1], diverged


def _metadata(profiles, history, h, T):
    return {"h": h, "T": T, "history": history.kind if history else "constant-at-initial",
            "profiles": [p.to_dict() for p in profiles]}


def simulate_x(sys: AgentSystem, g: DelayGraph, profiles: Sequence[DelayProfile], x0,
               history: Optional[HistorySpec] = None, h: float = 1e-3, T: float = 10.0) -> Trajectory:
    A0, Ls = global_matrices(sys, g)
    C = [sys.sigma * M for M in Ls]
    x0 = np.asarray(x0, dtype=float).ravel()
    if len(x0) != g.N * sys.n:
        raise DimensionMismatch(f"x0 has {len(x0)} entries, expected {g.N * sys.n}")
    t, Y, F, div = integrate_dde(A0, C, profiles, x0, history, h, T)
    U, _ = build_U_W(g.N)
    Z = Y @ np.kron(U, np.eye(sys.n)).T
    dis = np.max(np.abs(Z), axis=1)
    return Trajectory(t, Y, F, dis, sys.n, g.N, "x", div, _metadata(profiles, history, h, T))


def simulate_z(es: ErrorSystem, profiles: Sequence[DelayProfile], z0,
               history: Optional[HistorySpec] = None, h: float = 1e-3, T: float = 10.0) -> Trajectory:
    C = [es.sigma * M for M in es.coupling]
    z0 = np.asarray(z0, dtype=float).ravel()
    if len(z0) != es.dim:
        raise DimensionMismatch(f"z0 has {len(z0)} entries, expected {es.dim}")
    t, Y, F, div = integrate_dde(es.Abar, C, profiles, z0, history, h, T)
    dis = np.max(np.abs(Y), axis=1) if Y.shape[1] else np.zeros(len(t))
    return Trajectory(t, Y, F, dis, es.n, es.N, "z", div, _metadata(profiles, history, h, T))


def to_error_coordinates(traj: Trajectory) -> np.ndarray:
    U, _ = build_U_W(traj.N)
    return traj.states @ np.kron(U, np.eye(traj.n)).T
