"""Numerical subspace utilities: null spaces, intersections, principal angles.

All subspaces are represented by matrices whose columns form an orthonormal
basis; the empty subspace is a ``(dim, 0)`` array.  Rank decisions use a
relative singular-value threshold, and returned bases are canonicalized (QR
with positive diagonal) so equal subspaces yield identical matrices.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

DEFAULT_RANK_TOL = 1e-10


def canonical_basis(B: np.ndarray) -> np.ndarray:
    """Orthonormal basis depending only on the span of the columns of ``B``.

    Pivoted QR of the orthogonal projector (positive leading entry per
    column), so two bases of the same subspace canonicalize to the same
    matrix and reports are deterministic.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    dim = B.shape[0]
    if B.shape[1] == 0:
        return B.reshape(dim, 0)
    # orthonormalize first so the projector is well scaled
    q0, s, _ = np.linalg.svd(B, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * max(s[0], 1.0))) if s.size else 0
    if rank == 0:
        return np.zeros((dim, 0))
    P = q0[:, :rank] @ q0[:, :rank].T
    q, r, _ = scipy.linalg.qr(P, mode="economic", pivoting=True)
    q = q[:, :rank]
    # make the leading entry (largest magnitude, first occurrence) positive
    lead = np.argmax(np.abs(q) > np.abs(q).max(axis=0) * (1 - 1e-9), axis=0)
    signs = np.sign(q[lead, np.arange(rank)])
    signs[signs == 0] = 1.0
    return q * signs


def nullspace(A: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the (real) null space of ``A``.

    Singular values below ``rank_tol`` times the largest singular value
    count as zero.  For an exactly zero matrix the full space is returned.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if m == 0 or not np.any(A):
        return canonical_basis(np.eye(n))
    _, s, vh = np.linalg.svd(A)
    cutoff = rank_tol * s[0]
    rank = int(np.sum(s > cutoff))
    return canonical_basis(vh[rank:].T)


def intersect_subspaces(B1: np.ndarray, B2: np.ndarray,
                        rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the intersection of two subspaces.

    Computed as the null space of the stacked orthogonal-complement
    projectors, which is robust for near-degenerate intersections.
    """
    B1 = np.atleast_2d(np.asarray(B1, dtype=float))
    B2 = np.atleast_2d(np.asarray(B2, dtype=float))
    dim = B1.shape[0]
    if B1.shape[1] == 0 or B2.shape[1] == 0:
        return np.zeros((dim, 0))
    P1 = np.eye(dim) - B1 @ B1.T
    P2 = np.eye(dim) - B2 @ B2.T
    return nullspace(np.vstack([P1, P2]), rank_tol)


def intersect_many(bases: list[np.ndarray],
                   rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Intersection of a list of subspaces (full space for an empty list)."""
    if not bases:
        raise ValueError("need at least one subspace")
    out = bases[0]
    for B in bases[1:]:
        out = intersect_subspaces(out, B, rank_tol)
        if out.shape[1] == 0:
            break
    return out


def principal_angles(B1: np.ndarray, B2: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between two subspaces.

    Defined for min(dim1, dim2) pairs; two equal subspaces give all zeros.
    Raises if either subspace is trivial.
    """
    B1 = canonical_basis(B1)
    B2 = canonical_basis(B2)
    if B1.shape[1] == 0 or B2.shape[1] == 0:
        raise ValueError("principal angles need nontrivial subspaces")
    s = np.linalg.svd(B1.T @ B2, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))[::-1][: min(B1.shape[1], B2.shape[1])][::-1]


def subspaces_equal(B1: np.ndarray, B2: np.ndarray, ang_tol: float = 1e-8) -> bool:
    """True when the two subspaces coincide within ``ang_tol`` radians."""
    B1 = canonical_basis(np.atleast_2d(B1))
    B2 = canonical_basis(np.atleast_2d(B2))
    if B1.shape[1] != B2.shape[1]:
        return False
    if B1.shape[1] == 0:
        return True
    return float(principal_angles(B1, B2).max()) <= ang_tol


def angle_to_subspace(v: np.ndarray, B: np.ndarray) -> float:
    """Angle in radians from a nonzero vector to a subspace (pi/2 if trivial)."""
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ValueError("zero vector has no direction")
    if B.shape[1] == 0:
        return np.pi / 2
    c = np.linalg.norm(B.T @ (v / nv))
    return float(np.arccos(np.clip(c, 0.0, 1.0)))


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in radians between two nonzero vectors (not identified under sign)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("zero vector has no direction")
    return float(np.arccos(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)))


def image_basis(M: np.ndarray, B: np.ndarray,
                rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of M(V) for the subspace with basis ``B``."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[1] == 0:
        return np.zeros((M.shape[0], 0))
    MB = np.asarray(M, dtype=float) @ B
    _, s, vh = np.linalg.svd(MB, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[0], 0))
    rank = int(np.sum(s > rank_tol * s[0]))
    u, _, _ = np.linalg.svd(MB, full_matrices=False)
    return canonical_basis(u[:, :rank])
