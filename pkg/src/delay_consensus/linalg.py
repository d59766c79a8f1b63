"""Dense real matrix helpers.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Eigenvalue
work is delegated to LAPACK through numpy: ``eigh`` (tridiagonal QR/QL) for
symmetric input and ``eigvals`` (Hessenberg + shifted QR) otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotSymmetric

SYM_TOL = 1e-10


@dataclass(frozen=True)
class SymEigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a finite 2-D float array."""
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def inf_norm(m: np.ndarray) -> float:
    """Induced infinity norm (max absolute row sum)."""
    m = np.atleast_2d(m)
    return float(np.max(np.sum(np.abs(m), axis=1))) if m.size else 0.0


def is_symmetric(m: np.ndarray, tol: float = SYM_TOL) -> bool:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return inf_norm(m - m.T) <= tol * max(1.0, inf_norm(m))


def eig_sym(m, tol: float = SYM_TOL) -> SymEigResult:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"eig_sym needs a square matrix, got {a.shape}")
    if not is_symmetric(a, tol):
        raise NotSymmetric(f"asymmetry {inf_norm(a - a.T):.3e} exceeds tolerance")
    try:
        w, v = np.linalg.eigh(symmetrize(a))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergence(str(exc)) from exc
    return SymEigResult(eigenvalues=w, eigenvectors=v)


def min_eig_sym(m, tol: float = SYM_TOL) -> float:
    return float(eig_sym(m, tol).eigenvalues[0])


def max_eig_sym(m, tol: float = SYM_TOL) -> float:
    return float(eig_sym(m, tol).eigenvalues[-1])


def eigvals(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"eigenvalues need a square matrix, got {a.shape}")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc


def spectral_abscissa(m) -> float:
    """Largest real part over the eigenvalues of a general square matrix."""
    return float(np.max(eigvals(m).real))


def is_hurwitz(m) -> bool:
    return spectral_abscissa(m) < 0.0


def rank(m, tol: float = 1e-9) -> int:
    """Numerical rank: singular values above ``tol * max(1, sigma_max)``."""
    m = np.atleast_2d(np.asarray(m))
    if not np.iscomplexobj(m):
        m = m.astype(float)
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))
