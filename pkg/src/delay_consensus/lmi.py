"""Block LMI for delay-dependent stability of the consensus error system.

Decision variables are symmetric n x n matrices P, Q_k, R_k (k = 1..r) and
S_kj (1 <= k < j <= r).  The augmented state used to build the blocks is

    (z(t), z(t - tau_1(t)), z(t - taubar_1), ..., z(t - tau_r(t)), z(t - taubar_r))

so block 0 is the current state, block 2k-1 the k-th delayed state and
block 2k the state at the k-th delay bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import DimensionMismatch
from .linalg import symmetrize
from .model import ErrorSystem


@dataclass(frozen=True)
class VariableLayout:
    n: int
    r: int
    N: int = 2

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        return [(k, j) for k in range(1, self.r + 1) for j in range(k + 1, self.r + 1)]

    @property
    def names(self) -> List[str]:
        return (["P"] + [f"Q{k}" for k in range(1, self.r + 1)]
                + [f"R{k}" for k in range(1, self.r + 1)]
                + [f"S{k}_{j}" for k, j in self.pairs])

    @property
    def basis(self) -> List[Tuple[int, int]]:
        return [(a, b) for a in range(self.n) for b in range(a, self.n)]

    @property
    def per_matrix(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def n_matrices(self) -> int:
        return 1 + 2 * self.r + self.r * (self.r - 1) // 2

    @property
    def size(self) -> int:
        return self.n_matrices * self.per_matrix

    @property
    def block_dim(self) -> int:
        return (2 * self.r + 2) * (self.N - 1) * self.n

    def slice_of(self, name: str) -> slice:
        i = self.names.index(name)
        return slice(i * self.per_matrix, (i + 1) * self.per_matrix)

    def unpack(self, vec: np.ndarray) -> List[np.ndarray]:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.size,):
            raise DimensionMismatch(f"expected {self.size} scalars, got {vec.shape}")
        mats = []
        rows, cols = np.triu_indices(self.n)
        for i in range(self.n_matrices):
            m = np.zeros((self.n, self.n))
            m[rows, cols] = vec[i * self.per_matrix:(i + 1) * self.per_matrix]
            m[cols, rows] = m[rows, cols]
            mats.append(m)
        return mats

    def pack(self, mats) -> np.ndarray:
        rows, cols = np.triu_indices(self.n)
        return np.concatenate([np.asarray(m, dtype=float)[rows, cols] for m in mats])

    def trace_vector(self) -> np.ndarray:
        """Linear functional v -> trace(P)."""
        a = np.zeros(self.size)
        for idx, (p, q) in enumerate(self.basis):
            if p == q:
                a[idx] = 1.0
        return a


@dataclass
class VariableValues:
    P: np.ndarray
    Q: List[np.ndarray]
    R: List[np.ndarray]
    S: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_vector(cls, layout: VariableLayout, vec) -> "VariableValues":
        mats = layout.unpack(vec)
        r = layout.r
        return cls(P=mats[0], Q=mats[1:1 + r], R=mats[1 + r:1 + 2 * r],
                   S=dict(zip(layout.pairs, mats[1 + 2 * r:])))

    @classmethod
    def identity(cls, layout: VariableLayout, scale: float = 1.0) -> "VariableValues":
        I = scale * np.eye(layout.n)
        return cls(P=I.copy(), Q=[I.copy() for _ in range(layout.r)],
                   R=[I.copy() for _ in range(layout.r)],
                   S={p: I.copy() for p in layout.pairs})

    def matrices(self, layout: VariableLayout) -> List[np.ndarray]:
        return [self.P, *self.Q, *self.R, *(self.S[p] for p in layout.pairs)]

    def to_vector(self, layout: VariableLayout) -> np.ndarray:
        self.check(layout)
        return layout.pack(self.matrices(layout))

    def named(self, layout: VariableLayout) -> Dict[str, np.ndarray]:
        return dict(zip(layout.names, self.matrices(layout)))

    def scaled(self, c: float) -> "VariableValues":
        return VariableValues(P=c * self.P, Q=[c * q for q in self.Q], R=[c * x for x in self.R],
                              S={p: c * s for p, s in self.S.items()})

    def check(self, layout: VariableLayout) -> None:
        if len(self.Q) != layout.r or len(self.R) != layout.r or set(self.S) != set(layout.pairs):
            raise DimensionMismatch("variable values do not match the layout")
        for name, m in zip(layout.names, self.matrices(layout)):
            m = np.asarray(m)
            if m.shape != (layout.n, layout.n):
                raise DimensionMismatch(f"{name} must be {layout.n}x{layout.n}, got {m.shape}")


def layout_for(es: ErrorSystem) -> VariableLayout:
    return VariableLayout(n=es.n, r=es.r, N=es.N)


def _check_bounds(es: ErrorSystem, tau_bar, mu=None):
    tau_bar = np.asarray(tau_bar, dtype=float).reshape(-1)
    if tau_bar.shape != (es.r,):
        raise DimensionMismatch(f"need {es.r} delay bounds, got {tau_bar.shape}")
    if mu is None:
        return tau_bar, None
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape != (es.r,):
        raise DimensionMismatch(f"need {es.r} rate bounds, got {mu.shape}")
    if np.any(mu >= 1):
        raise ValueError("delay-rate bounds must be < 1")
    return tau_bar, mu


def gamma_core(layout: VariableLayout, tau_bar, values: VariableValues) -> np.ndarray:
    """sum_k taubar_k^2 R_k + sum_{k<j} (taubar_k - taubar_j)^2 S_kj (n x n)."""
    out = np.zeros((layout.n, layout.n))
    for k in range(layout.r):
        out += tau_bar[k] ** 2 * values.R[k]
    for (k, j) in layout.pairs:
        out += (tau_bar[k - 1] - tau_bar[j - 1]) ** 2 * values.S[(k, j)]
    return out


def build_gamma(layout: VariableLayout, tau_bar, values: VariableValues) -> np.ndarray:
    values.check(layout)
    tau_bar = np.asarray(tau_bar, dtype=float).reshape(-1)
    if tau_bar.shape != (layout.r,):
        raise DimensionMismatch(f"need {layout.r} delay bounds, got {tau_bar.shape}")
    return np.kron(np.eye(layout.N - 1), gamma_core(layout, tau_bar, values))


def build_xi(es: ErrorSystem) -> np.ndarray:
    m = es.dim
    xi = np.zeros((m, (2 * es.r + 1) * m))
    xi[:, :m] = es.Abar
    for k, C in enumerate(es.coupling, start=1):
        xi[:, (2 * k - 1) * m:2 * k * m] = es.sigma * C
    return xi


def build_pi(es: ErrorSystem, layout: VariableLayout, tau_bar, mu, values: VariableValues) -> np.ndarray:
    values.check(layout)
    tau_bar, mu = _check_bounds(es, tau_bar, mu)
    m, r = es.dim, es.r
    I = np.eye(es.N - 1)
    P, Q, R, S = values.P, values.Q, values.R, values.S
    Pi = np.zeros(((2 * r + 1) * m, (2 * r + 1) * m))

    def put(bi, bj, block):
        Pi[bi * m:(bi + 1) * m, bj * m:(bj + 1) * m] = block
        if bi != bj:
            Pi[bj * m:(bj + 1) * m, bi * m:(bi + 1) * m] = block.T

    put(0, 0, np.kron(I, es.A.T @ P + P @ es.A + sum(Q[k] - R[k] for k in range(r))))
    PBK = P @ es.BK
    for k in range(1, r + 1):
        d, b = 2 * k - 1, 2 * k
        put(0, d, np.kron(I, R[k - 1]) + es.sigma * np.kron(es.Lbar[k - 1], PBK))
        diag = -(1 - mu[k - 1]) * Q[k - 1] - 2 * R[k - 1]
        for j in range(1, r + 1):
            if j < k:
                diag = diag - S[(j, k)]
            elif j > k:
                diag = diag - S[(k, j)]
                put(d, 2 * j - 1, np.kron(I, S[(k, j)]))
        put(d, d, np.kron(I, diag))
        put(d, b, np.kron(I, R[k - 1]))
        put(b, b, -np.kron(I, R[k - 1]))
    return Pi


def full_lmi(es: ErrorSystem, layout: VariableLayout, tau_bar, mu, values: VariableValues) -> np.ndarray:
    """[[Pi, xi^T Gamma], [Gamma xi, -Gamma]]; required negative definite."""
    Pi = build_pi(es, layout, tau_bar, mu, values)
    G = build_gamma(layout, tau_bar, values)
    xi = build_xi(es)
    XG = xi.T @ G
    return symmetrize(np.block([[Pi, XG], [XG.T, -G]]))


def schur_reduced(es: ErrorSystem, layout: VariableLayout, tau_bar, mu, values: VariableValues) -> np.ndarray:
    Pi = build_pi(es, layout, tau_bar, mu, values)
    G = build_gamma(layout, tau_bar, values)
    xi = build_xi(es)
    return symmetrize(Pi + xi.T @ G @ xi)


@dataclass(frozen=True)
class LmiAffineMap:
    """M(v) = M0 + sum_i v_i M_i over the scalar symmetric-basis coordinates of the layout."""

    layout: VariableLayout
    M0: np.ndarray
    coeffs: np.ndarray  # shape (layout.size, d, d)
    tau_bar: tuple = ()
    mu: tuple = ()

    @property
    def d(self) -> int:
        return self.M0.shape[0]

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.layout.size,):
            raise DimensionMismatch(f"expected {self.layout.size} scalars, got {v.shape}")
        return self.M0 + np.tensordot(v, self.coeffs, axes=1)

    def at(self, values: VariableValues) -> np.ndarray:
        return self(values.to_vector(self.layout))


def assemble_full_lmi(es: ErrorSystem, layout: VariableLayout, tau_bar, mu) -> LmiAffineMap:
    tau_bar, mu = _check_bounds(es, tau_bar, mu)
    if layout.n != es.n or layout.r != es.r or layout.N != es.N:
        raise DimensionMismatch("layout does not match the error system")
    zero = np.zeros(layout.size)
    M0 = full_lmi(es, layout, tau_bar, mu, VariableValues.from_vector(layout, zero))
    coeffs = np.empty((layout.size, M0.shape[0], M0.shape[0]))
    for i in range(layout.size):
        e = zero.copy()
        e[i] = 1.0
        coeffs[i] = full_lmi(es, layout, tau_bar, mu, VariableValues.from_vector(layout, e)) - M0
    return LmiAffineMap(layout=layout, M0=M0, coeffs=coeffs,
                        tau_bar=tuple(tau_bar), mu=tuple(mu))
