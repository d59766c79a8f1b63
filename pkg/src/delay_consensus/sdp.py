"""Strict feasibility of the homogeneous LMI system via a log-barrier method.

We solve the max-margin problem

    maximize t  s.t.  X - t I >= 0 for every decision matrix X,
                      -M(v) - t I >= 0,
                      trace(P) = n,
                      cap I - X >= 0 for every decision matrix X

and declare the LMI feasible when the achieved margin reaches ``epsilon``.
The caps only keep the barrier bounded when the feasible cone contains
recession directions (equal delay bounds leave S_kj free, for instance).

Only two outcomes are ever claimed: ``FEASIBLE`` with a certificate that
passes :func:`verify_certificate`, and ``INFEASIBLE`` with a Farkas-type
alternative (block PSD Z, nonzero, whose adjoint image vanishes).
Everything else is ``UNKNOWN``.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg as sla

from .lmi import LmiAffineMap, VariableLayout, VariableValues
from .linalg import eig_sym, symmetrize

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 500
    tol: float = 1e-9
    cap: float = 1e6
    growth: float = 8.0
    farkas_tol: float = 1e-9
    # stop as soon as a verified certificate with margin >= epsilon exists
    early_stop: bool = False


@dataclass(frozen=True)
class FeasibilityProblem:
    map: LmiAffineMap
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 1e-6 * self.map.d)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def layout(self) -> VariableLayout:
        return self.map.layout

    @property
    def normalization(self) -> float:
        return float(self.layout.n)


@dataclass
class Certificate:
    values: VariableValues
    margins: Dict[str, float]
    epsilon: float

    def scaled(self, c: float) -> "Certificate":
        return Certificate(values=self.values.scaled(c),
                           margins={k: c * m for k, m in self.margins.items()},
                           epsilon=c * self.epsilon)


@dataclass
class FarkasCertificate:
    """Block PSD multipliers, one per constraint block, normalised to unit total trace."""

    blocks: Dict[str, np.ndarray]
    residual: float


@dataclass
class FeasibilityResult:
    status: Status
    certificate: Optional[Certificate] = None
    iterations: int = 0
    objective: float = float("nan")
    upper_bound: float = float("inf")
    farkas: Optional[FarkasCertificate] = None
    diagnostics: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


@dataclass
class VerificationReport:
    passed: bool
    margins: Dict[str, float]
    failures: List[str] = field(default_factory=list)
    detail: Dict[str, float] = field(default_factory=dict)


def certificate_margins(values: VariableValues, layout: VariableLayout, lmi_value: np.ndarray):
    """(group margins, per-matrix minimum eigenvalues); "M" is -lambda_max of the LMI value."""
    detail = {name: float(eig_sym(m).eigenvalues[0]) for name, m in values.named(layout).items()}
    groups = {"P": [detail["P"]],
              "Q": [detail[f"Q{k}"] for k in range(1, layout.r + 1)],
              "R": [detail[f"R{k}"] for k in range(1, layout.r + 1)],
              "S": [detail[f"S{k}_{j}"] for k, j in layout.pairs]}
    margins = {g: (min(v) if v else float("inf")) for g, v in groups.items()}
    margins["M"] = -float(eig_sym(lmi_value).eigenvalues[-1])
    return margins, detail


def verify_certificate(c: Certificate, p: FeasibilityProblem) -> VerificationReport:
    """Recompute every definiteness margin from the raw matrices."""
    layout = p.layout
    c.values.check(layout)
    M = p.map.at(c.values)
    margins, detail = certificate_margins(c.values, layout, M)
    detail["M"] = margins["M"]
    threshold = p.epsilon * (1 - 1e-6)
    failures = [name for name, m in detail.items() if m < threshold]
    return VerificationReport(passed=not failures, margins=margins, failures=failures, detail=detail)


class _Block:
    """Affine matrix block F(x) = F0 + sum_l x[idx[l]] C[l]."""

    __slots__ = ("name", "idx", "C", "F0", "margin")

    def __init__(self, name, idx, C, F0, margin):
        self.name, self.idx, self.C, self.F0, self.margin = name, idx, C, F0, margin

    def value(self, x):
        return self.F0 + np.tensordot(x[self.idx], self.C, axes=1)


class _Barrier:
    """Barrier for the max-margin problem in reduced coordinates x = (w, t).

    P, its cap and M are general affine blocks; the remaining decision
    matrices (Q, R, S) share one symmetric basis and are handled as a batch.
    """

    def __init__(self, p: FeasibilityProblem, opts: SolverOptions):
        layout = p.layout
        self.layout, self.opts, self.problem = layout, opts, p
        size, n, per = layout.size, layout.n, layout.per_matrix
        a = layout.trace_vector()
        # eliminate the first diagonal entry of P through trace(P) = n; v = v0 + Z w
        self.pivot = 0
        free = np.arange(1, size)
        Z = np.zeros((size, size - 1))
        Z[free, np.arange(size - 1)] = 1.0
        Z[self.pivot] = -a[free]
        v0 = np.zeros(size)
        v0[self.pivot] = p.normalization
        self.Z, self.v0, self.a = Z, v0, a
        self.nx = size
        it = size - 1
        rows, cols = np.triu_indices(n)
        basis = np.zeros((per, n, n))
        basis[np.arange(per), rows, cols] = 1.0
        basis[np.arange(per), cols, rows] = 1.0
        self.basis = basis
        I_n = np.eye(n)
        CP = np.tensordot(Z[:per, :per - 1].T, basis, axes=1)
        F0P = np.tensordot(v0[:per], basis, axes=1)
        idxP = np.arange(per - 1)
        d = p.map.d
        self.blocks = [
            _Block("P", np.append(idxP, it), np.concatenate([CP, -I_n[None]]), F0P, True),
            _Block("cap:P", idxP, -CP, opts.cap * I_n - F0P, False),
            _Block("M", np.arange(self.nx),
                   np.concatenate([-np.tensordot(Z.T, p.map.coeffs, axes=1), -np.eye(d)[None]]),
                   -(p.map.M0 + np.tensordot(v0, p.map.coeffs, axes=1)), True),
        ]
        self.nbatch = layout.n_matrices - 1
        # reduced index of each batched coordinate, shape (nbatch, per)
        self.bidx = (np.arange(per, size) - 1).reshape(self.nbatch, per)
        self.names = layout.names[1:]
        self.degree = sum(b.F0.shape[0] for b in self.blocks) + 2 * self.nbatch * n

    def v_of(self, x):
        return self.v0 + self.Z @ x[:-1]

    def _batch(self, x):
        X = np.einsum("vl,lij->vij", x[self.bidx], self.basis)
        I_n = np.eye(self.layout.n)
        return X - x[-1] * I_n, self.opts.cap * I_n - X

    def chol_all(self, x):
        try:
            out = [np.linalg.cholesky(symmetrize(b.value(x))) for b in self.blocks]
            if self.nbatch:
                G, H = self._batch(x)
                out.append(np.linalg.cholesky(G))
                out.append(np.linalg.cholesky(H))
            return out
        except np.linalg.LinAlgError:
            return None

    def phi(self, x, s, chols=None):
        chols = self.chol_all(x) if chols is None else chols
        if chols is None:
            return np.inf
        logdet = sum(np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1))) for L in chols)
        return -s * x[-1] - 2.0 * logdet

    def derivatives(self, x, s, chols):
        g = np.zeros(self.nx)
        H = np.zeros((self.nx, self.nx))
        g[-1] = -s
        for b, L in zip(self.blocks, chols):
            if len(b.idx) == 0:
                continue
            Winv = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True)
            T = np.einsum("ij,ljk,mk->lim", Winv, b.C, Winv, optimize=True)
            Tf = T.reshape(T.shape[0], -1)
            g[b.idx] -= np.trace(T, axis1=1, axis2=2)
            H[np.ix_(b.idx, b.idx)] += Tf @ Tf.T
        if self.nbatch:
            n, per = self.layout.n, self.layout.per_matrix
            LG, LH = chols[-2], chols[-1]
            WG = np.linalg.inv(LG)
            WH = np.linalg.inv(LH)
            TG = np.einsum("vij,ljk,vmk->vlim", WG, self.basis, WG).reshape(self.nbatch, per, -1)
            Tt = -np.einsum("vij,vkj->vik", WG, WG).reshape(self.nbatch, -1)
            TH = np.einsum("vij,ljk,vmk->vlim", WH, self.basis, WH).reshape(self.nbatch, per, -1)
            eye = np.eye(n).reshape(-1)
            gG = TG @ eye
            gH = -(TH @ eye)
            Hxx = np.einsum("vlk,vmk->vlm", TG, TG) + np.einsum("vlk,vmk->vlm", TH, TH)
            Hxt = np.einsum("vlk,vk->vl", TG, Tt)
            g[-1] -= float(np.sum(Tt @ eye))
            H[-1, -1] += float(np.sum(Tt * Tt))
            for v in range(self.nbatch):
                ix = self.bidx[v]
                g[ix] -= gG[v] + gH[v]
                H[np.ix_(ix, ix)] += Hxx[v]
                H[ix, -1] += Hxt[v]
                H[-1, ix] += Hxt[v]
        return g, H

    def dual(self, x, s, chols):
        """Central-path multipliers Z_b = G_b^{-1} / s for the margin blocks, plus adjoint and trace multiplier."""
        layout = self.layout
        n = layout.n
        blocks = {}
        for b, L in zip(self.blocks, chols):
            if b.margin:
                blocks[b.name] = symmetrize(sla.cho_solve((L, True), np.eye(L.shape[0])) / s)
        if self.nbatch:
            WG = np.linalg.inv(chols[-2])
            Ginv = np.einsum("vki,vkj->vij", WG, WG) / s
            for name, Zb in zip(self.names, Ginv):
                blocks[name] = symmetrize(Zb)
        adj = _adjoint(blocks, layout, self.problem.map.coeffs)
        y = float(adj @ self.a / (self.a @ self.a))
        return blocks, adj, y


def _adjoint(blocks, layout: VariableLayout, coeffs) -> np.ndarray:
    """F*(Z)_i = sum_b tr(Z_b F_bi) in the original scalar coordinates."""
    rows, cols = np.triu_indices(layout.n)
    adj = np.zeros(layout.size)
    for mi, name in enumerate(layout.names):
        Zb = blocks[name]
        adj[mi * layout.per_matrix:(mi + 1) * layout.per_matrix] = np.where(
            rows == cols, Zb[rows, cols], 2.0 * Zb[rows, cols])
    return adj - np.einsum("ij,kij->k", blocks["M"], coeffs)


def _initial_point(bar: _Barrier) -> np.ndarray:
    layout = bar.layout
    tb = bar.problem.map.tau_bar
    mats = [np.eye(layout.n) for _ in range(layout.n_matrices)]
    if len(tb) == layout.r:
        # keep the Gamma terms of order one at the start
        for k in range(layout.r):
            mats[1 + layout.r + k] = np.eye(layout.n) / max(1.0, tb[k] ** 2)
        for pi, (k, j) in enumerate(layout.pairs):
            mats[1 + 2 * layout.r + pi] = np.eye(layout.n) / max(1.0, (tb[k - 1] - tb[j - 1]) ** 2)
    v = layout.pack(mats)
    x = np.zeros(bar.nx)
    x[:-1] = np.delete(v, bar.pivot)
    x[-1] = 0.0
    vals = [np.linalg.eigvalsh(symmetrize(b.value(x)))[0] for b in bar.blocks if b.margin]
    x[-1] = min(vals + [1.0]) - 1.0
    return x


def _psd_sqrt(Z: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(Z)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def _farkas(bar: _Barrier, x, s, chols, opts) -> Optional[FarkasCertificate]:
    """Round the central-path dual onto the exact alternative system and test it.

    The barrier multipliers satisfy the adjoint equations only up to the
    centering error.  The correction is sought in the form Z^1/2 D Z^1/2 with
    D of minimal Frobenius norm, so the corrected blocks stay PSD whenever
    I + D does; the result is accepted only if every shifted block is PSD.
    """
    layout = bar.layout
    n, per = layout.n, layout.per_matrix
    coeffs = bar.problem.map.coeffs
    blocks, adj, y = bar.dual(x, s, chols)
    names = layout.names + ["M"]
    roots = {k: _psd_sqrt(blocks[k]) for k in names}
    rows, cols = np.triu_indices(n)
    cols_ = []
    for mi, name in enumerate(layout.names):
        Rt = roots[name]
        block = np.zeros((layout.size, n * n))
        for bi, (a, b) in enumerate(zip(rows, cols)):
            E = np.zeros((n, n))
            E[a, b] = E[b, a] = 1.0
            block[mi * per + bi] = (Rt @ E @ Rt).ravel()
        cols_.append(block)
    RM = roots["M"]
    cols_.append(-np.einsum("ij,kjl,lm->kim", RM, coeffs, RM).reshape(layout.size, -1))
    A = np.hstack(cols_ + [-bar.a[:, None]])
    resid = adj - y * bar.a
    corr = np.linalg.lstsq(A, -resid, rcond=None)[0]
    y = y + corr[-1]
    out = {}
    pos = 0
    for name in names:
        db = blocks[name].shape[0]
        D = symmetrize(corr[pos:pos + db * db].reshape(db, db))
        pos += db * db
        out[name] = symmetrize(roots[name] @ (np.eye(db) + D) @ roots[name])
    log.debug("farkas: y=%.3g |D|=%.3g", y, float(np.max(np.abs(corr[:-1]))))
    # the shift absorbs the trace-normalisation multiplier; the PSD test below
    # decides whether the shifted block is still a valid multiplier
    out["P"] = out["P"] - y * np.eye(n)
    total = sum(float(np.trace(Zb)) for Zb in out.values())
    if total <= 0:
        return None
    out = {k: v / total for k, v in out.items()}
    if any(np.linalg.eigvalsh(Zb)[0] < 0 for Zb in out.values()):
        return None
    residual = float(np.max(np.abs(_adjoint(out, layout, coeffs))))
    if residual > opts.farkas_tol:
        return None
    return FarkasCertificate(blocks=out, residual=residual)


def verify_farkas(f: FarkasCertificate, p: FeasibilityProblem, tol: float = 1e-8) -> bool:
    """Check Z >= 0, trace(Z) = 1 and that the adjoint of the constraint map vanishes at Z."""
    if any(eig_sym(Zb).eigenvalues[0] < -tol for Zb in f.blocks.values()):
        return False
    if abs(sum(np.trace(Zb) for Zb in f.blocks.values()) - 1.0) > 1e-6:
        return False
    adj = _adjoint(f.blocks, p.layout, p.map.coeffs)
    return float(np.max(np.abs(adj))) <= tol


def _newton_step(H, g):
    # symmetric diagonal scaling keeps late barrier Hessians solvable
    dscale = 1.0 / np.sqrt(np.maximum(np.diag(H), 1e-300))
    Hs = H * dscale[:, None] * dscale[None, :]
    gs = g * dscale
    try:
        c = sla.cho_factor(Hs)
        return -dscale * sla.cho_solve(c, gs)
    except (sla.LinAlgError, ValueError):
        return -dscale * np.linalg.lstsq(Hs, gs, rcond=None)[0]


def solve_feasibility(p: FeasibilityProblem, options: Optional[SolverOptions] = None) -> FeasibilityResult:
    opts = options or SolverOptions()
    bar = _Barrier(p, opts)
    x = _initial_point(bar)
    s = float(bar.degree) / max(1.0, abs(float(x[-1])))
    iters = 0
    notes = []
    chols = bar.chol_all(x)
    best = None

    def certify(xc):
        v = bar.v_of(xc)
        vals = VariableValues.from_vector(p.layout, v)
        M = p.map(v)
        margins, _ = certificate_margins(vals, p.layout, M)
        return Certificate(values=vals, margins=margins, epsilon=p.epsilon)

    upper = np.inf
    farkas = None
    converged = False
    stalls = 0
    while iters < opts.max_iter:
        # centering by damped Newton
        while iters < opts.max_iter:
            g, H = bar.derivatives(x, s, chols)
            dx = _newton_step(H, g)
            iters += 1
            dec = float(-g @ dx)
            if not np.isfinite(dec) or dec < 0:
                notes.append(f"bad Newton direction at s={s:.3g}")
                break
            if dec <= 1e-6:
                break
            f0 = bar.phi(x, s, chols)
            alpha = 1.0 / (1.0 + np.sqrt(dec)) if dec > 0.25 else 1.0
            accepted = False
            min_alpha = 1e-12 if dec > 1e-3 else 1e-6
            while alpha >= min_alpha:
                xn = x + alpha * dx
                cn = bar.chol_all(xn)
                if cn is not None and bar.phi(xn, s, cn) <= f0 - 0.25 * alpha * dec:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                # below this decrement the barrier value is at roundoff level
                if dec > 1e-3:
                    stalls += 1
                    notes.append(f"line search stalled at s={s:.3g}")
                break
            x, chols = xn, cn
        t = float(x[-1])
        gap = bar.degree / s
        upper = t + gap
        log.debug("s=%.3g iters=%d t=%.6g gap=%.3g dec=%.3g", s, iters, t, gap, dec)
        if t >= p.epsilon:
            cert = certify(x)
            if verify_certificate(cert, p).passed:
                best = cert
                if opts.early_stop:
                    converged = True
                    break
        if upper < p.epsilon or gap <= opts.tol * max(1.0, abs(t)):
            farkas = _farkas(bar, x, s, chols, opts)
            if farkas is not None and verify_farkas(farkas, p, tol=10 * opts.farkas_tol):
                break
            farkas = None
        if gap <= opts.tol * max(1.0, abs(t)):
            converged = True
            break
        if stalls >= 2 or (notes and notes[-1].startswith(("line search", "bad Newton"))):
            notes.append(f"stopped at numerical precision, gap {gap:.2e}")
            break
        s *= opts.growth

    t = float(x[-1])
    diag = "; ".join(notes)
    if best is not None:
        return FeasibilityResult(Status.FEASIBLE, certificate=best, iterations=iters,
                                 objective=t, upper_bound=upper, diagnostics=diag)
    if farkas is not None:
        return FeasibilityResult(Status.INFEASIBLE, iterations=iters, objective=t, upper_bound=upper,
                                 farkas=farkas, diagnostics=diag or "Farkas alternative verified")
    if not converged and iters >= opts.max_iter:
        notes.append("iteration limit reached")
    return FeasibilityResult(Status.UNKNOWN, iterations=iters, objective=t, upper_bound=upper,
                             diagnostics="; ".join(notes) or "margin below epsilon without a separating certificate")
