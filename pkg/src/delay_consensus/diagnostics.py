"""Numerical checks of the integral inequalities and the Lyapunov-Krasovskii functional."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientTrace
from .lmi import VariableValues
from .linalg import is_symmetric, min_eig_sym
from .simulate import DelayProfile, HistorySpec, Trajectory


@dataclass(frozen=True)
class QuadratureTrace:
    """Values and derivatives of a vector function on the grid t0 + i*h."""

    t0: float
    h: float
    values: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        d = np.asarray(self.derivs, dtype=float)
        if v.ndim == 1:
            v, d = v[:, None], d[:, None]
        if v.shape != d.shape or len(v) < 2 or self.h <= 0:
            raise ValueError("values and derivatives must share a grid of at least two points")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "derivs", d)

    @classmethod
    def from_function(cls, f, df, t0: float, t1: float, h: float) -> "QuadratureTrace":
        m = int(round((t1 - t0) / h))
        s = t0 + h * np.arange(m + 1)
        return cls(t0, h, np.array([np.atleast_1d(f(x)) for x in s]),
                   np.array([np.atleast_1d(df(x)) for x in s]))

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "QuadratureTrace":
        return cls(float(traj.t[0]), float(traj.t[1] - traj.t[0]), traj.states, traj.derivatives)

    @property
    def t_end(self) -> float:
        return self.t0 + self.h * (len(self.values) - 1)

    def _require(self, a: float, b: float):
        eps = 1e-9 * self.h
        if a < self.t0 - eps or b > self.t_end + eps:
            raise InsufficientTrace(f"trace covers [{self.t0}, {self.t_end}], need [{a}, {b}]")

    def _cell(self, s: float):
        u = (s - self.t0) / self.h
        i = min(max(int(math.floor(u)), 0), len(self.values) - 2)
        return i, u - i

    def value_at(self, s: float) -> np.ndarray:
        """Cubic Hermite value at s."""
        self._require(s, s)
        i, th = self._cell(s)
        y0, y1 = self.values[i], self.values[i + 1]
        f0, f1 = self.derivs[i] * self.h, self.derivs[i + 1] * self.h
        th2, th3 = th * th, th ** 3
        return ((2 * th3 - 3 * th2 + 1) * y0 + (th3 - 2 * th2 + th) * f0
                + (-2 * th3 + 3 * th2) * y1 + (th3 - th2) * f1)

    def quad_form_integral(self, X: np.ndarray, a: float, b: float) -> float:
        """Composite trapezoid of z'(s)^T X z'(s) over [a, b]."""
        self._require(a, b)
        if b <= a:
            return 0.0
        g = np.einsum("mi,ij,mj->m", self.derivs, X, self.derivs)
        C = np.concatenate([[0.0], np.cumsum(0.5 * self.h * (g[1:] + g[:-1]))])
        return _cum_at(C, g, self.t0, self.h, b) - _cum_at(C, g, self.t0, self.h, a)


def _cum_at(C: np.ndarray, g: np.ndarray, t0: float, h: float, s):
    """Running trapezoid integral C evaluated at s, with g linear inside a cell."""
    u = (np.asarray(s, dtype=float) - t0) / h
    i = np.clip(np.floor(u).astype(int), 0, len(g) - 2)
    th = u - i
    gs = g[i] + th * (g[i + 1] - g[i])
    return C[i] + th * h * 0.5 * (g[i] + gs)


def _check_pd(X: np.ndarray, name: str):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not is_symmetric(X) or min_eig_sym(X) <= 0:
        raise ValueError(f"{name} must be symmetric positive definite")
    return X


def check_lemma1(trace: QuadratureTrace, X, gamma: float, t: Optional[float] = None) -> float:
    """RHS - LHS of -g int_{t-g}^t z'^T X z' <= -(z(t) - z(t-g))^T X (z(t) - z(t-g))."""
    X = _check_pd(X, "X")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    t = trace.t_end if t is None else t
    trace._require(t - gamma, t)
    lhs = -gamma * trace.quad_form_integral(X, t - gamma, t)
    e = trace.value_at(t) - trace.value_at(t - gamma)
    return float(-e @ X @ e - lhs)


def check_lemma2(trace: QuadratureTrace, Y, h1: float, h2: float, tau: float,
                 t: Optional[float] = None) -> float:
    """RHS - LHS of the three-point bound on the window [t-h2, t-h1], (3,3) entry -Y."""
    Y = _check_pd(Y, "Y")
    if not (0 <= h1 <= tau <= h2):
        raise ValueError("need 0 <= h1 <= tau <= h2")
    t = trace.t_end if t is None else t
    trace._require(t - h2, t - h1)
    lhs = -(h2 - h1) * trace.quad_form_integral(Y, t - h2, t - h1)
    a, b, c = (trace.value_at(t - s) for s in (h1, tau, h2))
    rhs = -(a - b) @ Y @ (a - b) - (b - c) @ Y @ (b - c)
    return float(rhs - lhs)


@dataclass
class LyapunovSeries:
    t: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    V3: np.ndarray
    V4: np.ndarray

    @property
    def V(self) -> np.ndarray:
        return self.V1 + self.V2 + self.V3 + self.V4

    def max_relative_increase(self, floor: float = 1e-10) -> float:
        """Largest (V[i+1] - V[i]) / V[i] over steps where V[i] exceeds floor * V[0]."""
        V = self.V
        mask = V[:-1] > floor * max(V[0], np.finfo(float).tiny)
        if not np.any(mask):
            return 0.0
        rel = (V[1:] - V[:-1])[mask] / V[:-1][mask]
        return float(max(rel.max(), 0.0))

    def is_nonincreasing(self, rel_tol: float = 1e-3, floor: float = 1e-10) -> bool:
        return self.max_relative_increase(floor) <= rel_tol

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "V1", "V2", "V3", "V4", "V"])
        for row in zip(self.t, self.V1, self.V2, self.V3, self.V4, self.V):
            w.writerow([f"{v:.12g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _quad(Z: np.ndarray, X: np.ndarray, n: int) -> np.ndarray:
    """z^T (I (x) X) z for each row of Z."""
    Zb = Z.reshape(len(Z), -1, n)
    return np.einsum("mbi,ij,mbj->m", Zb, X, Zb)


def lyapunov_series(traj: Trajectory, values: VariableValues, profiles: Sequence[DelayProfile],
                    tau_bar, history: Optional[HistorySpec] = None) -> LyapunovSeries:
    """V1..V4 along a z trajectory; the initial function is prepended from ``history``."""
    if traj.kind != "z":
        raise ValueError("lyapunov_series needs an error-coordinate trajectory")
    tau_bar = np.asarray(tau_bar, dtype=float)
    r, n = len(tau_bar), traj.n
    if len(profiles) != r or len(values.Q) != r:
        raise ValueError("profiles, bounds and certificate disagree on the number of delays")
    if any(p.upper > tb + 1e-12 for p, tb in zip(profiles, tau_bar)):
        raise ValueError("a delay profile exceeds its bound")
    h = float(traj.t[1] - traj.t[0])
    history = history or HistorySpec()
    m = int(math.ceil(tau_bar.max() / h)) + 1
    z0 = traj.states[0]
    pre = [history.evaluate(-(m - i) * h, z0) for i in range(m)]
    Z = np.vstack([np.array([p[0] for p in pre]).reshape(m, -1), traj.states])
    D = np.vstack([np.array([p[1] for p in pre]).reshape(m, -1), traj.derivatives])
    t0 = -m * h
    t = traj.t
    V1 = _quad(traj.states, values.P, n)

    def cum(g):
        return np.concatenate([[0.0], np.cumsum(0.5 * h * (g[1:] + g[:-1]))])

    V2 = np.zeros(len(t))
    for k in range(r):
        g = _quad(Z, values.Q[k], n)
        C = cum(g)
        V2 += _cum_at(C, g, t0, h, t) - _cum_at(C, g, t0, h, t - profiles[k](t))

    def double(X, a, b):
        # int_{-a}^{-b} int_{t+th}^{t} z'^T X z' ds dth = (a - b) Dz(t) - int_{t-a}^{t-b} Dz
        g = _quad(D, X, n)
        Dz = cum(g)
        DD = cum(Dz)
        return (a - b) * Dz[m:] - (_cum_at(DD, Dz, t0, h, t - b) - _cum_at(DD, Dz, t0, h, t - a))

    V3 = np.zeros(len(t))
    for k in range(r):
        V3 += tau_bar[k] * double(values.R[k], tau_bar[k], 0.0)
    V4 = np.zeros(len(t))
    for (k, j), S in values.S.items():
        a, b = tau_bar[k - 1], tau_bar[j - 1]
        if a != b:
            V4 += (a - b) * double(S, a, b)
    return LyapunovSeries(t=t.copy(), V1=V1, V2=V2, V3=V3, V4=V4)
