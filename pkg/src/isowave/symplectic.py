"""Hamilton maps of complex quadratic forms and their phase-space flows.

A quadratic form a(X) = <X, QX> on R^{2n} (coordinates x_1..x_n, xi_1..xi_n)
with complex symmetric Q and Re Q >= 0 defines the Hamilton map F = JQ, the
singular space S, and the one-parameter flows exp(-2itF) and exp(2t Im F)
used by the propagation predictor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import DEFAULT_RANK_TOL, canonical_basis, intersect_many, nullspace

PSD_TOL = 1e-10
FLOW_RESIDUAL_TOL = 1e-10
EIG_COND_LIMIT = 1e8


def standard_symplectic_matrix(n: int) -> np.ndarray:
    """J = [[0, I], [-I, 0]]; sigma(X, Y) = <JX, Y>."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


class SymbolInvariantError(ValueError):
    """A quadratic symbol violated one of its construction invariants."""


@dataclass(frozen=True)
class QuadraticSymbol:
    """Complex quadratic form a(X) = <X, QX> with Re Q positive semidefinite.

    Q is symmetrized on construction; the PSD invariant tolerates a relative
    defect of ``PSD_TOL`` in the smallest eigenvalue of Re Q.
    """

    n: int
    Q: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise SymbolInvariantError("space dimension must be a positive integer")
        Q = np.asarray(self.Q, dtype=complex)
        if Q.shape != (2 * self.n, 2 * self.n):
            raise SymbolInvariantError(
                f"Q must be {2 * self.n}x{2 * self.n}, got {Q.shape}")
        asym = np.abs(Q - Q.T).max()
        scale = max(np.abs(Q).max(), 1.0)
        if asym > 1e-8 * scale:
            raise SymbolInvariantError(
                f"symmetry violated: max |Q - Q^T| = {asym:.3e}")
        Q = 0.5 * (Q + Q.T)
        reQ = Q.real
        if np.any(reQ):
            w = np.linalg.eigvalsh(0.5 * (reQ + reQ.T))
            norm = np.linalg.norm(reQ, 2)
            if w.min() < -PSD_TOL * max(norm, 1.0):
                raise SymbolInvariantError(
                    f"positivity violated: min eig(Re Q) = {w.min():.3e}")
        object.__setattr__(self, "Q", Q)

    def __call__(self, X: np.ndarray) -> complex:
        X = np.asarray(X, dtype=complex)
        return complex(X @ self.Q @ X)


@dataclass
class FlowLogEntry:
    kind: str
    t: float
    method: str
    residual: float


@dataclass
class HamiltonMap:
    """F = JQ with cached real/imaginary parts and a flow computation log."""

    n: int
    F: np.ndarray
    reF: np.ndarray = field(init=False)
    imF: np.ndarray = field(init=False)
    J: np.ndarray = field(init=False)
    flow_log: list[FlowLogEntry] = field(default_factory=list, init=False)

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=complex)
        self.reF = self.F.real.copy()
        self.imF = self.F.imag.copy()
        self.J = standard_symplectic_matrix(self.n)


def hamilton_map(sym: QuadraticSymbol) -> HamiltonMap:
    """Hamilton map F = JQ of an admissible quadratic symbol.

    Satisfies sigma(X, FX) = a(X); equivalently J^T F = Q, which holds
    exactly by construction and is re-verified on the standard basis.
    """
    J = standard_symplectic_matrix(sym.n)
    F = J @ sym.Q
    defect = np.abs(J.T @ F - sym.Q).max()
    if defect > 1e-12 * max(np.abs(sym.Q).max(), 1.0):
        raise SymbolInvariantError(f"sigma(X, FX) != a(X): defect {defect:.3e}")
    return HamiltonMap(sym.n, F)


def singular_space(F: HamiltonMap, tol_rank: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of S = intersection of Ker(Re F (Im F)^j), j < 2n.

    The 2n real matrices are stacked and the combined numerical null space
    is taken, so a single rank threshold governs the whole intersection.
    Returns a (2n, 0) array when S = {0}.
    """
    if not (0.0 < tol_rank <= 1e-4):
        raise ValueError("tol_rank must lie in (0, 1e-4]")
    dim = 2 * F.n
    blocks = []
    P = np.eye(dim)
    for _ in range(dim):
        blocks.append(F.reF @ P)
        P = F.imF @ P
    return nullspace(np.vstack(blocks), tol_rank)


def _expm_logged(F: HamiltonMap, A: np.ndarray, t: float, kind: str) -> np.ndarray:
    """exp(A) via eigendecomposition when well conditioned, else Pade.

    The ODE residual of the eigendecomposition route is the reconstruction
    defect |V L V^-1 - A|/|A|; the Pade route is checked with the group law
    exp(A) = exp(A/2)^2.  Falls back silently (but logged) when the
    eigenvector matrix is ill conditioned.
    """
    scale = max(np.linalg.norm(A, 2), 1e-300)
    method = "eig"
    M = None
    residual = np.inf
    try:
        lam, V = np.linalg.eig(A)
        cond = np.linalg.cond(V)
        if np.isfinite(cond) and cond < EIG_COND_LIMIT:
            Vinv = np.linalg.inv(V)
            recon = (V * lam) @ Vinv
            residual = float(np.abs(recon - A).max() / scale)
            if residual <= FLOW_RESIDUAL_TOL:
                M = (V * np.exp(lam)) @ Vinv
    except np.linalg.LinAlgError:
        pass
    if M is None:
        method = "pade"
        M = scipy.linalg.expm(A)
        half = scipy.linalg.expm(A / 2.0)
        residual = float(
            np.abs(half @ half - M).max() / max(np.abs(M).max(), 1e-300))
        if residual > FLOW_RESIDUAL_TOL:
            raise ArithmeticError(
                f"matrix exponential residual {residual:.3e} exceeds "
                f"{FLOW_RESIDUAL_TOL:.1e}")
    F.flow_log.append(FlowLogEntry(kind=kind, t=t, method=method, residual=residual))
    return M


def flow_exp(F: HamiltonMap, t: float, kind: str = "full") -> np.ndarray:
    """Flow matrix of the Hamilton map.

    kind="full" gives exp(-2itF) (complex); kind="imaginary-part" gives the
    real flow exp(2t Im F) generated by the imaginary part of the symbol.
    """
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    if kind == "full":
        return _expm_logged(F, -2j * t * F.F, t, kind)
    if kind == "imaginary-part":
        return _expm_logged(F, 2.0 * t * F.imF, t, kind).real
    raise ValueError(f"unknown flow kind {kind!r}")


def ker_im_flow(F: HamiltonMap, t: float,
                tol_rank: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the real null space of Im exp(-2itF)."""
    if not (0.0 < tol_rank <= 1e-4):
        raise ValueError("tol_rank must lie in (0, 1e-4]")
    M = flow_exp(F, t, kind="full")
    return nullspace(M.imag, tol_rank)


def sampled_flow_kernel_intersection(F: HamiltonMap, t: float, samples: int = 50,
                                     tol_rank: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Intersection of Ker(Im exp(-2it'F)) over sampled t' in (0, t].

    Desk-scale realization of the characterization of S as the common
    kernel of the imaginary parts of the flow over a time interval.
    """
    ts = np.linspace(t / samples, t, samples)
    bases = [ker_im_flow(F, float(tp), tol_rank) for tp in ts]
    return canonical_basis(intersect_many(bases, tol_rank))
