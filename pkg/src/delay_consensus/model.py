"""Agent dynamics, the delayed relative-state protocol and its error system."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoSpanningTree
from .graph import DelayGraph, check_topology, index_delays, laplacian, split_laplacians
from .linalg import as_matrix, eigvals, rank, spectral_abscissa


@dataclass(frozen=True)
class AgentSystem:
    """Identical agents x' = A x + B u with u = K * (sum of delayed relative states).

    ``sigma`` is the sign multiplying the coupling sum in the closed loop,
    x' = (I (x) A) x + sigma * sum_k (L_k (x) BK) x(t - tau_k).
    """

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    sigma: int = -1

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if B.shape[0] != A.shape[0] and B.shape[0] == 1 and B.shape[1] == A.shape[0]:
            B = B.T  # a flat list is read as a column
        K = as_matrix(self.K, "K")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "K", K)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, A has {n}")
        if K.shape != (B.shape[1], n):
            raise DimensionMismatch(f"K must be {B.shape[1]}x{n}, got {K.shape}")
        if self.sigma not in (1, -1):
            raise ValueError("sigma must be +1 or -1")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def BK(self) -> np.ndarray:
        return self.B @ self.K


def is_stabilizable(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> bool:
    """PBH test: rank [A - lam I, B] = n at every eigenvalue with Re(lam) >= 0."""
    A, B = as_matrix(A, "A"), as_matrix(B, "B")
    n = A.shape[0]
    for lam in eigvals(A):
        if lam.real >= -tol:
            M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
            if rank(M, tol) < n:
                return False
    return True


@dataclass(frozen=True)
class ErrorSystem:
    """Reduced dynamics z' = Abar z + sigma * sum_k C_k z(t - tau_k(t))."""

    n: int
    N: int
    r: int
    A: np.ndarray
    BK: np.ndarray
    Lbar: tuple  # reduced single-edge Laplacians U L_k W
    sigma: int = -1

    @property
    def Abar(self) -> np.ndarray:
        return np.kron(np.eye(self.N - 1), self.A)

    @property
    def coupling(self) -> list:
        return [np.kron(Lb, self.BK) for Lb in self.Lbar]

    @property
    def dim(self) -> int:
        return (self.N - 1) * self.n


def build_U_W(N: int):
    if N < 2:
        raise ValueError("need N >= 2")
    U = np.hstack([np.ones((N - 1, 1)), -np.eye(N - 1)])
    W = np.vstack([np.zeros((1, N - 1)), -np.eye(N - 1)])
    return U, W


def reduce_laplacian(Lk, U, W) -> np.ndarray:
    Lk, U, W = (np.asarray(m, dtype=float) for m in (Lk, U, W))
    if U.shape[1] != Lk.shape[0] or Lk.shape[1] != W.shape[0]:
        raise DimensionMismatch(f"cannot form U L W with {U.shape}, {Lk.shape}, {W.shape}")
    return U @ Lk @ W


def _prepare(sys: AgentSystem, g: DelayGraph) -> DelayGraph:
    if not g.indexed:
        g = index_delays(g)
    if not check_topology(g, warn=False).has_spanning_tree:
        raise NoSpanningTree("graph has no directed spanning tree")
    return g


def assemble_error_system(sys: AgentSystem, g: DelayGraph) -> ErrorSystem:
    g = _prepare(sys, g)
    U, W = build_U_W(g.N)
    Lbar = tuple(reduce_laplacian(Lk, U, W) for Lk in split_laplacians(g))
    return ErrorSystem(n=sys.n, N=g.N, r=g.r, A=sys.A, BK=sys.BK, Lbar=Lbar, sigma=sys.sigma)


@dataclass(frozen=True)
class ModeReport:
    eigenvalue: complex
    abscissa: float
    unstable: bool


def modal_zero_delay_check(sys: AgentSystem, g: DelayGraph) -> list:
    """Abscissa of A + sigma*lam*BK for each eigenvalue lam of U L W (delays set to zero)."""
    g = _prepare(sys, g)
    U, W = build_U_W(g.N)
    out = []
    for lam in np.sort_complex(eigvals(U @ laplacian(g) @ W)):
        M = sys.A.astype(complex) + sys.sigma * lam * sys.BK
        a = float(np.max(np.linalg.eigvals(M).real))
        out.append(ModeReport(eigenvalue=complex(lam), abscissa=a, unstable=a >= 0.0))
    return out


def feedback_is_hurwitz(sys: AgentSystem) -> bool:
    """The local gain premise: A - BK Hurwitz."""
    return spectral_abscissa(sys.A - sys.BK) < 0.0


def global_matrices(sys: AgentSystem, g: DelayGraph):
    """(I_N (x) A, [L_k (x) BK]) for the undelayed-index global closed loop."""
    if not g.indexed:
        g = index_delays(g)
    return np.kron(np.eye(g.N), sys.A), [np.kron(Lk, sys.BK) for Lk in split_laplacians(g)]
