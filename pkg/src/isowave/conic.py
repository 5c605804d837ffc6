"""Conic subsets of phase space and the exact wave-front set algebra.

A conic set is a finite union of atoms: linear subspaces (exact algebra)
and direction fans with an angular radius (detector output, tolerance
bearing).  Operations implement the tensor / pullback / integration /
kernel-composition rules and the propagation predictor, with the
derivative-loss bookkeeping carried in attached order ledgers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import (angle_between, angle_to_subspace, canonical_basis,
                     image_basis, intersect_subspaces, nullspace)
from .spheres import quarter_arc, subspace_sphere_samples
from .symplectic import HamiltonMap, flow_exp, ker_im_flow

ANG_TOL = 1e-6
MAX_FAN_RADIUS = np.pi / 4
ARC_SAMPLES = 65


class ConicSetError(ValueError):
    """Raised when an operation's geometric precondition fails."""


@dataclass(frozen=True)
class ConicAtom:
    """One conic atom: a linear subspace or a fan of directions.

    Subspace atoms carry an orthonormal basis (dim x k); fan atoms a
    (m x dim) array of unit directions plus an angular radius in
    [0, pi/4].  Rays of a fan are directed; subspaces contain both signs.
    """

    kind: str
    basis: np.ndarray | None = None
    dirs: np.ndarray | None = None
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "subspace":
            B = np.atleast_2d(np.asarray(self.basis, dtype=float))
            if B.shape[1] == 0:
                raise ConicSetError("subspace atom must be nontrivial")
            G = B.T @ B
            if np.abs(G - np.eye(B.shape[1])).max() > 1e-12:
                B = canonical_basis(B)
            object.__setattr__(self, "basis", B)
        elif self.kind == "fan":
            D = np.atleast_2d(np.asarray(self.dirs, dtype=float))
            norms = np.linalg.norm(D, axis=1)
            if D.shape[0] == 0:
                raise ConicSetError("fan atom needs at least one direction")
            if np.abs(norms - 1.0).max() > 1e-12:
                D = D / norms[:, None]
            object.__setattr__(self, "dirs", D)
            if not (0.0 <= self.radius <= MAX_FAN_RADIUS + 1e-15):
                raise ConicSetError(
                    f"fan radius {self.radius} outside [0, pi/4]")
        else:
            raise ConicSetError(f"unknown atom kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.basis.shape[0] if self.kind == "subspace" else self.dirs.shape[1]

    def angle_to(self, X: np.ndarray) -> float:
        """Angular distance from direction X/|X| to the atom's core set."""
        if self.kind == "subspace":
            return angle_to_subspace(X, self.basis)
        v = np.asarray(X, dtype=float)
        v = v / np.linalg.norm(v)
        c = np.clip(self.dirs @ v, -1.0, 1.0)
        return float(np.arccos(c.max()))

    def slack(self, X: np.ndarray) -> float:
        """angle_to(X) minus the atom radius (<= 0 means inside)."""
        r = self.radius if self.kind == "fan" else 0.0
        return self.angle_to(X) - r


@dataclass(frozen=True)
class OrderLedger:
    """Bookkeeping for one rule application's derivative loss.

    ``mu`` must strictly exceed ``threshold`` (None for loss-free rules).
    """

    rule: str
    orders: dict
    mu: float | None = None
    threshold: float | None = None
    output_order: float | None = None

    def __post_init__(self):
        if self.mu is not None and self.threshold is not None:
            if not self.mu > self.threshold:
                raise ConicSetError(
                    f"{self.rule}: loss mu={self.mu} must exceed threshold "
                    f"{self.threshold}")


@dataclass(frozen=True)
class ConicSet:
    """Finite union of conic atoms in R^dim with an optional Sobolev order."""

    dim: int
    atoms: tuple[ConicAtom, ...] = ()
    order: float | None = None
    ledger: OrderLedger | None = None
    notes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        atoms = tuple(self.atoms)
        for a in atoms:
            if a.dim != self.dim:
                raise ConicSetError("atom dimension mismatch")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def empty(cls, dim: int, order: float | None = None) -> "ConicSet":
        return cls(dim, (), order)

    @classmethod
    def from_subspace(cls, basis: np.ndarray, order: float | None = None) -> "ConicSet":
        B = np.atleast_2d(np.asarray(basis, dtype=float))
        if B.shape[1] == 0:
            return cls.empty(B.shape[0], order)
        return cls(B.shape[0], (ConicAtom("subspace", basis=B),), order)

    @classmethod
    def from_rays(cls, dirs: np.ndarray, radius: float = 0.0,
                  order: float | None = None) -> "ConicSet":
        D = np.atleast_2d(np.asarray(dirs, dtype=float))
        if D.shape[0] == 0:
            return cls.empty(D.shape[1], order)
        return cls(D.shape[1], (ConicAtom("fan", dirs=D, radius=radius),), order)

    def is_empty(self) -> bool:
        return len(self.atoms) == 0

    def with_order(self, order: float | None) -> "ConicSet":
        return replace(self, order=order)


def member(conic: ConicSet, X: np.ndarray, ang_tol: float = ANG_TOL) -> bool:
    """True if the direction of nonzero X lies in the set within ang_tol."""
    X = np.asarray(X, dtype=float)
    if np.linalg.norm(X) == 0.0:
        raise ConicSetError("the zero vector has no direction")
    return any(a.slack(X) <= ang_tol for a in conic.atoms)


def _clamped_radius(r: float) -> float:
    return float(min(r, MAX_FAN_RADIUS))


def linear_image(conic: ConicSet, M: np.ndarray) -> ConicSet:
    """Image of a conic set under an invertible linear map.

    Subspace atoms map exactly; fan radii are inflated by the distortion
    bound cond(M) * radius.  The order is unchanged (the invertible
    changes of variables are order preserving).
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (conic.dim, conic.dim):
        raise ConicSetError("matrix shape mismatch")
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 1e-14 * s[0]:
        raise ConicSetError("singular matrix has no conic image")
    cond = float(s[0] / s[-1])
    atoms = []
    for a in conic.atoms:
        if a.kind == "subspace":
            atoms.append(ConicAtom("subspace", basis=canonical_basis(M @ a.basis)))
        else:
            mapped = a.dirs @ M.T
            atoms.append(ConicAtom("fan", dirs=mapped,
                                   radius=_clamped_radius(a.radius * cond)))
    notes = conic.notes + (("linear_image_cond", f"{cond:.6e}"),)
    return ConicSet(conic.dim, tuple(atoms), conic.order, conic.ledger, notes)


# ---------------------------------------------------------------------------
# tensor products


def _embed_matrix(n_amb: int, rows: list[int]) -> np.ndarray:
    E = np.zeros((n_amb, len(rows)))
    for j, r in enumerate(rows):
        E[r, j] = 1.0
    return E


def _tensor_embeddings(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Embeddings of R^{2n} and R^{2m} into R^{2(n+m)} (coords x,y,xi,eta)."""
    N = n + m
    EU = _embed_matrix(2 * N, list(range(n)) + list(range(N, N + n)))
    EV = _embed_matrix(2 * N, list(range(n, N)) + list(range(N + n, 2 * N)))
    return EU, EV


def _embed_atom(a: ConicAtom, E: np.ndarray) -> ConicAtom:
    if a.kind == "subspace":
        return ConicAtom("subspace", basis=canonical_basis(E @ a.basis))
    return ConicAtom("fan", dirs=a.dirs @ E.T, radius=a.radius)


def _slab_fan(sphere: np.ndarray, pad: float, tips: np.ndarray,
              base_radius: float) -> ConicAtom:
    """Fan covering {cos t * u + sin t * w : u in sampled sphere, w in tips}.

    The radius absorbs the sphere covering pad, the arc sampling half-gap
    and the input fan radius.
    """
    arcs = []
    half_gap = (np.pi / 2) / (ARC_SAMPLES - 1) / 2
    for w in np.atleast_2d(tips):
        for u in np.atleast_2d(sphere):
            arcs.append(quarter_arc(u, w, ARC_SAMPLES))
    dirs = np.vstack(arcs)
    return ConicAtom("fan", dirs=dirs,
                     radius=_clamped_radius(base_radius + pad + half_gap))


def _product_atoms(a: ConicAtom, b: ConicAtom, EU: np.ndarray,
                   EV: np.ndarray) -> list[ConicAtom]:
    """Atoms of the conic product (cone(a) u {0}) x (cone(b) u {0}) \\ {0}."""
    ea, eb = _embed_atom(a, EU), _embed_atom(b, EV)
    if a.kind == "subspace" and b.kind == "subspace":
        basis = np.hstack([ea.basis, eb.basis])
        return [ConicAtom("subspace", basis=canonical_basis(basis))]
    if a.kind == "subspace":  # subspace x fan
        sphere, pad = subspace_sphere_samples(ea.basis)
        return [_slab_fan(sphere, pad, eb.dirs, b.radius)]
    if b.kind == "subspace":  # fan x subspace
        sphere, pad = subspace_sphere_samples(eb.basis)
        return [_slab_fan(sphere, pad, ea.dirs, a.radius)]
    half_gap = (np.pi / 2) / (ARC_SAMPLES - 1) / 2
    arcs = [quarter_arc(u, w, ARC_SAMPLES) for u in ea.dirs for w in eb.dirs]
    return [ConicAtom("fan", dirs=np.vstack(arcs),
                      radius=_clamped_radius(a.radius + b.radius + half_gap))]


def tensor(setU: ConicSet, setV: ConicSet, r1: float, r2: float) -> ConicSet:
    """Superset predictor for the singular set of a tensor product.

    Coordinates interleave as (x, y, xi, eta); the output order is
    s* = min(s1 - r2, s2 - r1), rejected unless s* <= s1 + s2.
    """
    if setU.order is None or setV.order is None:
        raise ConicSetError("tensor requires both input orders")
    n, m = setU.dim // 2, setV.dim // 2
    s1, s2 = setU.order, setV.order
    s_star = min(s1 - r2, s2 - r1)
    if s_star > s1 + s2:
        raise ConicSetError(
            f"tensor order s*={s_star} exceeds s1+s2={s1 + s2}; no predictor")
    EU, EV = _tensor_embeddings(n, m)
    atoms: list[ConicAtom] = []
    for a in setU.atoms:
        atoms.append(_embed_atom(a, EU))
    for b in setV.atoms:
        atoms.append(_embed_atom(b, EV))
    for a in setU.atoms:
        for b in setV.atoms:
            atoms.extend(_product_atoms(a, b, EU, EV))
    ledger = OrderLedger(rule="tensor",
                         orders={"s1": s1, "s2": s2, "r1": r1, "r2": r2},
                         output_order=s_star)
    return ConicSet(2 * (n + m), tuple(atoms), s_star, ledger)


# ---------------------------------------------------------------------------
# pullback / integration


def _meets_subspace(conic: ConicSet, W: np.ndarray, ang_tol: float) -> bool:
    """Does the conic set meet the nonzero part of the subspace W?"""
    if W.shape[1] == 0:
        return False
    for a in conic.atoms:
        if a.kind == "subspace":
            if intersect_subspaces(a.basis, W).shape[1] > 0:
                return True
        else:
            for d in a.dirs:
                if angle_to_subspace(d, W) <= a.radius + ang_tol:
                    return True
    return False


def _phase_lift(n: int, x_map: np.ndarray, xi_map: np.ndarray) -> np.ndarray:
    """Block map (x, xi) -> (x_map x, xi_map xi) between phase spaces."""
    mx, nx = x_map.shape
    mxi, nxi = xi_map.shape
    out = np.zeros((mx + mxi, nx + nxi))
    out[:mx, :nx] = x_map
    out[mx:, nx:] = xi_map
    return out


def _map_fan_dir(d: np.ndarray, radius: float, domain: np.ndarray,
                 T: np.ndarray, ang_tol: float,
                 flags: list[str]) -> tuple[np.ndarray, float] | None:
    """Project a fan direction onto a domain subspace and push through T.

    Returns (unit image, inflated radius) or None when the direction misses
    the domain or maps to a numerically zero image (flagged).
    """
    gap = angle_to_subspace(d, domain) if domain.shape[1] else 0.0
    if gap > radius + ang_tol:
        return None
    p = domain @ (domain.T @ d) if domain.shape[1] else d
    np_ = np.linalg.norm(p)
    if np_ < 1e-12:
        flags.append("fan direction projected to zero")
        return None
    p = p / np_
    y = T @ p
    ny = np.linalg.norm(y)
    Tnorm = np.linalg.norm(T, 2)
    if ny <= 1e-9 * Tnorm:
        flags.append("fan direction with near-zero image dropped")
        return None
    kappa = Tnorm / ny
    return y / ny, _clamped_radius((radius + gap) * kappa)


def pullback(conic: ConicSet, L: np.ndarray, mu: float,
             ang_tol: float = ANG_TOL) -> ConicSet:
    """Singularity predictor for composition with an injective linear map.

    L is n x m (m <= n), x = L x'.  Requires mu > (n - m)/2 and the set to
    avoid {(0, xi): L^T xi = 0}; the image is
    {(x', L^T xi): (L x', xi) in set} computed atom-wise.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    n2 = conic.dim
    n = n2 // 2
    m = L.shape[1]
    if L.shape[0] != n or m > n:
        raise ConicSetError(f"L must be {n} x m with m <= {n}")
    if np.linalg.matrix_rank(L) < m:
        raise ConicSetError("L must be injective")
    threshold = (n - m) / 2
    if conic.order is None:
        raise ConicSetError("pullback requires the input order")
    kerLT = nullspace(L.T)
    W = np.vstack([np.zeros((n, kerLT.shape[1])), kerLT]) if kerLT.shape[1] else \
        np.zeros((2 * n, 0))
    if _meets_subspace(conic, W, ang_tol):
        raise ConicSetError(
            "pullback blocked: set meets {(0, xi): L^T xi = 0}")
    rangeL = canonical_basis(L)
    domain = np.vstack([
        np.hstack([rangeL, np.zeros((n, n))]),
        np.hstack([np.zeros((n, rangeL.shape[1])), np.eye(n)]),
    ])
    Lplus = np.linalg.pinv(L)
    T = _phase_lift(n, Lplus, L.T)
    flags: list[str] = []
    atoms: list[ConicAtom] = []
    for a in conic.atoms:
        if a.kind == "subspace":
            inter = intersect_subspaces(a.basis, domain)
            img = image_basis(T, inter)
            if img.shape[1]:
                atoms.append(ConicAtom("subspace", basis=img))
        else:
            dirs, radii = [], []
            for d in a.dirs:
                res = _map_fan_dir(d, a.radius, domain, T, ang_tol, flags)
                if res is not None:
                    dirs.append(res[0])
                    radii.append(res[1])
            if dirs:
                atoms.append(ConicAtom("fan", dirs=np.asarray(dirs),
                                       radius=max(radii)))
    ledger = OrderLedger(rule="pullback", orders={"s": conic.order},
                         mu=mu, threshold=threshold,
                         output_order=conic.order - mu)
    notes = tuple(("flag", f) for f in flags)
    return ConicSet(2 * m, tuple(atoms), conic.order - mu, ledger, notes)


def pullback_surjective(conic: ConicSet, L: np.ndarray, mu: float,
                        ang_tol: float = ANG_TOL) -> ConicSet:
    """Predictor for composition with a surjective map L: R^N -> R^n.

    Image {(x, L^T xi'): (L x, xi') in set} augmented with Ker L x {0}
    (the vertical contribution of constant directions).  mu > (N - n)/2.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    n = conic.dim // 2
    N = L.shape[1]
    if L.shape[0] != n or N < n or np.linalg.matrix_rank(L) < n:
        raise ConicSetError(f"L must be a surjective {n} x N map, N >= {n}")
    if conic.order is None:
        raise ConicSetError("pullback requires the input order")
    threshold = (N - n) / 2
    # Phi: (x, xi') in R^N x R^n -> (L x, xi'); preimage of each atom, then
    # push through G: (x, xi') -> (x, L^T xi').
    Phi = _phase_lift(0, L, np.eye(n))
    G = _phase_lift(0, np.eye(N), L.T)
    kerL = nullspace(L)
    flags: list[str] = []
    atoms: list[ConicAtom] = []
    if kerL.shape[1]:
        vert = np.vstack([kerL, np.zeros((N, kerL.shape[1]))])
        atoms.append(ConicAtom("subspace", basis=canonical_basis(vert)))
    for a in conic.atoms:
        if a.kind == "subspace":
            P = np.eye(2 * n) - a.basis @ a.basis.T
            pre = nullspace(P @ Phi)
            img = image_basis(G, pre)
            if img.shape[1]:
                atoms.append(ConicAtom("subspace", basis=img))
        else:
            for d in a.dirs:
                x_d, xi_d = d[:n], d[n:]
                sol, res, *_ = np.linalg.lstsq(L, x_d, rcond=None)
                if np.linalg.norm(L @ sol - x_d) > 1e-10:
                    continue
                tip = np.concatenate([sol, L.T @ xi_d])
                ntip = np.linalg.norm(tip)
                if ntip < 1e-12:
                    flags.append("fan direction with zero lift dropped")
                    continue
                if kerL.shape[1]:
                    vert = np.vstack([kerL, np.zeros((N, kerL.shape[1]))])
                    sphere, pad = subspace_sphere_samples(canonical_basis(vert))
                    atoms.append(_slab_fan(sphere, pad, tip / ntip, a.radius))
                else:
                    atoms.append(ConicAtom("fan", dirs=(tip / ntip)[None, :],
                                           radius=a.radius))
    ledger = OrderLedger(rule="pullback-surjective", orders={"s": conic.order},
                         mu=mu, threshold=threshold,
                         output_order=conic.order - mu)
    return ConicSet(2 * N, tuple(atoms), conic.order - mu, ledger,
                    tuple(("flag", f) for f in flags))


def integrate_out(conic: ConicSet, m: int, mu: float,
                  ang_tol: float = ANG_TOL) -> ConicSet:
    """Predictor for integrating out the trailing n - m space variables.

    Coordinates (x', x'', xi', xi''); requires the set to avoid
    {(0, x'', 0, 0)} and mu > (n - m)/2; returns
    {(x', xi'): (x', x'', xi', 0) in set for some x''}.
    """
    n = conic.dim // 2
    if not (1 <= m <= n):
        raise ConicSetError("need 1 <= m <= n")
    if conic.order is None:
        raise ConicSetError("integrate_out requires the input order")
    threshold = (n - m) / 2
    W = _embed_matrix(2 * n, list(range(m, n)))  # {(0, x'', 0, 0)}
    if _meets_subspace(conic, W, ang_tol):
        raise ConicSetError(
            "integration blocked: set meets {(0, x'', 0, 0)}")
    # domain {xi'' = 0}, projection (x', x'', xi', 0) -> (x', xi')
    dom_rows = list(range(n + m)) + []
    domain = _embed_matrix(2 * n, dom_rows)
    proj = np.zeros((2 * m, 2 * n))
    proj[:m, :m] = np.eye(m)
    proj[m:, n:n + m] = np.eye(m)
    flags: list[str] = []
    atoms: list[ConicAtom] = []
    for a in conic.atoms:
        if a.kind == "subspace":
            inter = intersect_subspaces(a.basis, domain)
            img = image_basis(proj, inter)
            if img.shape[1]:
                atoms.append(ConicAtom("subspace", basis=img))
        else:
            dirs, radii = [], []
            for d in a.dirs:
                res = _map_fan_dir(d, a.radius, domain, proj, ang_tol, flags)
                if res is not None:
                    dirs.append(res[0])
                    radii.append(res[1])
            if dirs:
                atoms.append(ConicAtom("fan", dirs=np.asarray(dirs),
                                       radius=max(radii)))
    ledger = OrderLedger(rule="integrate", orders={"s": conic.order},
                         mu=mu, threshold=threshold,
                         output_order=conic.order - mu)
    return ConicSet(2 * m, tuple(atoms), conic.order - mu, ledger,
                    tuple(("flag", f) for f in flags))


# ---------------------------------------------------------------------------
# kernel composition


def _kernel_blocks(dim_k: int, m: int, n: int):
    """Index helpers for kernel coordinates (x, y, xi, eta)."""
    assert dim_k == 2 * (m + n)
    x = list(range(m))
    y = list(range(m, m + n))
    xi = list(range(m + n, 2 * m + n))
    eta = list(range(2 * m + n, 2 * m + 2 * n))
    return x, y, xi, eta


def kernel_slice_x(setK: ConicSet, m: int, n: int) -> ConicSet:
    """{(x, xi): (x, 0, xi, 0) in setK} (exact on subspaces)."""
    xI, yI, xiI, etaI = _kernel_blocks(setK.dim, m, n)
    dom = _embed_matrix(setK.dim, xI + xiI)
    proj = dom.T
    atoms: list[ConicAtom] = []
    flags: list[str] = []
    for a in setK.atoms:
        if a.kind == "subspace":
            inter = intersect_subspaces(a.basis, dom)
            img = image_basis(proj, inter)
            if img.shape[1]:
                atoms.append(ConicAtom("subspace", basis=img))
        else:
            dirs, radii = [], []
            for d in a.dirs:
                res = _map_fan_dir(d, a.radius, dom, proj, ANG_TOL, flags)
                if res is not None:
                    dirs.append(res[0])
                    radii.append(res[1])
            if dirs:
                atoms.append(ConicAtom("fan", dirs=np.asarray(dirs),
                                       radius=max(radii)))
    return ConicSet(2 * m, tuple(atoms), setK.order)


def kernel_slice_y(setK: ConicSet, m: int, n: int) -> ConicSet:
    """{(y, eta): (0, y, 0, -eta) in setK} (note the eta sign flip)."""
    xI, yI, xiI, etaI = _kernel_blocks(setK.dim, m, n)
    dom = _embed_matrix(setK.dim, yI + etaI)
    proj = dom.T.copy()
    proj[n:, :] *= -1.0  # map eta-part of the kernel atom to -eta
    atoms: list[ConicAtom] = []
    flags: list[str] = []
    for a in setK.atoms:
        if a.kind == "subspace":
            inter = intersect_subspaces(a.basis, dom)
            img = image_basis(proj, inter)
            if img.shape[1]:
                atoms.append(ConicAtom("subspace", basis=img))
        else:
            dirs, radii = [], []
            for d in a.dirs:
                res = _map_fan_dir(d, a.radius, dom, proj, ANG_TOL, flags)
                if res is not None:
                    dirs.append(res[0])
                    radii.append(res[1])
            if dirs:
                atoms.append(ConicAtom("fan", dirs=np.asarray(dirs),
                                       radius=max(radii)))
    return ConicSet(2 * n, tuple(atoms), setK.order)


def _sets_meet(A: ConicSet, B: ConicSet, ang_tol: float) -> bool:
    """Do two conic sets in the same ambient space intersect?"""
    for a in A.atoms:
        for b in B.atoms:
            if a.kind == "subspace" and b.kind == "subspace":
                if intersect_subspaces(a.basis, b.basis).shape[1] > 0:
                    return True
            elif a.kind == "fan" and b.kind == "fan":
                for d in a.dirs:
                    if b.slack(d) <= a.radius + ang_tol:
                        return True
            else:
                fan, sub = (a, b) if a.kind == "fan" else (b, a)
                for d in fan.dirs:
                    if angle_to_subspace(d, sub.basis) <= fan.radius + ang_tol:
                        return True
    return False


def kernel_compose(setK: ConicSet, setU: ConicSet, r1: float, r2: float,
                   mu: float, m: int | None = None,
                   ang_tol: float = ANG_TOL) -> ConicSet:
    """Output-singularity predictor for applying a kernel to a distribution.

    setK lives in R^{2(m+n)} (coordinates x, y, xi, eta), setU in R^{2n}.
    Requires mu > n and setU disjoint from the Y-slice of setK; returns the
    X-slice union the twisted composition, with order
    min(s1 - r2, s2 - r1) - mu.  The Y-slice and the transpose flip both
    negate the eta block (the twisted pairing convention).
    """
    n = setU.dim // 2
    if m is None:
        m = setK.dim // 2 - n
    if setK.dim != 2 * (m + n) or m < 1:
        raise ConicSetError("kernel/argument dimensions incompatible")
    if setK.order is None or setU.order is None:
        raise ConicSetError("kernel_compose requires both orders")
    s1, s2 = setK.order, setU.order
    threshold = float(n)
    wfy = kernel_slice_y(setK, m, n)
    if _sets_meet(setU, wfy, ang_tol):
        raise ConicSetError(
            "composition blocked: argument singularities meet the kernel's "
            "Y-slice")
    out_atoms: list[ConicAtom] = list(kernel_slice_x(setK, m, n).atoms)
    flags: list[str] = []

    # twisted kernel set: flip the sign of the eta block
    flip = np.ones(setK.dim)
    flip[2 * m + n:] = -1.0
    Dflip = np.diag(flip)
    proj_X = np.zeros((2 * m, setK.dim))
    proj_X[:m, :m] = np.eye(m)
    proj_X[m:, m + n:2 * m + n] = np.eye(m)
    proj_Y = np.zeros((2 * n, setK.dim))
    proj_Y[:n, m:m + n] = np.eye(n)
    proj_Y[n:, 2 * m + n:] = np.eye(n)

    for ak in setK.atoms:
        akf = (ConicAtom("subspace", basis=canonical_basis(Dflip @ ak.basis))
               if ak.kind == "subspace" else
               ConicAtom("fan", dirs=ak.dirs @ Dflip, radius=ak.radius))
        for au in setU.atoms:
            out_atoms.extend(
                _compose_pair(akf, au, proj_X, proj_Y, ang_tol, flags))

    s_star = min(s1 - r2, s2 - r1)
    ledger = OrderLedger(rule="kernel-compose",
                         orders={"s1": s1, "s2": s2, "r1": r1, "r2": r2},
                         mu=mu, threshold=threshold,
                         output_order=s_star - mu)
    return ConicSet(2 * m, tuple(out_atoms), s_star - mu, ledger,
                    tuple(("flag", f) for f in flags))


def _compose_pair(ak: ConicAtom, au: ConicAtom, proj_X: np.ndarray,
                  proj_Y: np.ndarray, ang_tol: float,
                  flags: list[str]) -> list[ConicAtom]:
    """Atoms of { X : exists Y in cone(au) with (X, Y) in cone(ak) }."""
    if ak.kind == "subspace" and au.kind == "subspace":
        # witnesses live in ak ^ {Y-part in au}
        SW = nullspace((np.eye(proj_Y.shape[0]) - au.basis @ au.basis.T) @ proj_Y)
        inter = intersect_subspaces(ak.basis, SW)
        img = image_basis(proj_X, inter)
        return [ConicAtom("subspace", basis=img)] if img.shape[1] else []
    if ak.kind == "fan":
        dirs, radii = [], []
        for d in ak.dirs:
            q = proj_Y @ d
            nq = np.linalg.norm(q)
            if nq < 1e-12:
                continue  # pure X-direction, absorbed by the X-slice term
            if au.slack(q) > ak.radius + ang_tol:
                continue
            xpart = proj_X @ d
            nx = np.linalg.norm(xpart)
            if nx <= 1e-9:
                flags.append("composition direction with zero X-part dropped")
                continue
            kappa = 1.0 / nx  # |d| = 1, distortion of the X-projection
            r_extra = au.radius if au.kind == "fan" else 0.0
            dirs.append(xpart / nx)
            radii.append(_clamped_radius((ak.radius + r_extra + ang_tol) * kappa))
        return [ConicAtom("fan", dirs=np.asarray(dirs), radius=max(radii))] \
            if dirs else []
    # subspace kernel atom x fan argument atom
    out: list[ConicAtom] = []
    B = ak.basis
    ker_y = intersect_subspaces(B, nullspace(proj_Y))
    p0 = image_basis(proj_X, ker_y)  # absorbed by the X-slice, kept for the slab
    for u in au.dirs:
        sol, *_ = np.linalg.lstsq(proj_Y @ B, u, rcond=None)
        if np.linalg.norm(proj_Y @ B @ sol - u) > 1e-9:
            continue
        tip = proj_X @ (B @ sol)
        ntip = np.linalg.norm(tip)
        if ntip <= 1e-9 * np.linalg.norm(B @ sol):
            flags.append("composition direction with zero X-part dropped")
            continue
        tip = tip / ntip
        if p0.shape[1]:
            sphere, pad = subspace_sphere_samples(p0)
            out.append(_slab_fan(sphere, pad, tip, au.radius))
        else:
            out.append(ConicAtom("fan", dirs=tip[None, :],
                                 radius=_clamped_radius(au.radius + ang_tol)))
    return out


# ---------------------------------------------------------------------------
# propagation predictor


def intersect_with_subspace(conic: ConicSet, basis: np.ndarray,
                            ang_tol: float = ANG_TOL) -> ConicSet:
    """Conic intersection with a linear subspace (atom-wise)."""
    B = np.atleast_2d(np.asarray(basis, dtype=float))
    atoms: list[ConicAtom] = []
    for a in conic.atoms:
        if B.shape[1] == 0:
            continue
        if a.kind == "subspace":
            inter = intersect_subspaces(a.basis, B)
            if inter.shape[1]:
                atoms.append(ConicAtom("subspace", basis=inter))
        else:
            dirs = []
            for d in a.dirs:
                if angle_to_subspace(d, B) <= a.radius + ang_tol:
                    p = B @ (B.T @ d)
                    if np.linalg.norm(p) > 1e-12:
                        dirs.append(p / np.linalg.norm(p))
            if dirs:
                atoms.append(ConicAtom("fan", dirs=np.asarray(dirs),
                                       radius=_clamped_radius(a.radius + ang_tol)))
    return ConicSet(conic.dim, tuple(atoms), conic.order, conic.ledger,
                    conic.notes)


def _map_atoms(conic: ConicSet, M: np.ndarray) -> ConicSet:
    """Image under a (possibly non-invertible) linear map, atom-wise."""
    atoms: list[ConicAtom] = []
    for a in conic.atoms:
        if a.kind == "subspace":
            img = image_basis(M, a.basis)
            if img.shape[1]:
                atoms.append(ConicAtom("subspace", basis=img))
        else:
            dirs, radii = [], []
            Tnorm = np.linalg.norm(M, 2)
            for d in a.dirs:
                y = M @ d
                ny = np.linalg.norm(y)
                if ny <= 1e-12 * max(Tnorm, 1.0):
                    continue
                dirs.append(y / ny)
                radii.append(_clamped_radius(a.radius * Tnorm / ny))
            if dirs:
                atoms.append(ConicAtom("fan", dirs=np.asarray(dirs),
                                       radius=max(radii)))
    return ConicSet(conic.dim, tuple(atoms), conic.order, conic.ledger,
                    conic.notes)


def predict_propagation(F: HamiltonMap, S_basis: np.ndarray, setU0: ConicSet,
                        t: float, r0: float, eps: float = 0.1,
                        ang_tol: float = ANG_TOL) -> ConicSet:
    """Propagated singularity predictor (exp(2t Im F)(set ^ S)) ^ S.

    The loss ledger records mu = 2(n + r0) + eps against its threshold
    2(n + r0).  With t = 0 the flow is the identity and the prediction
    reduces to the plain intersection with S.
    """
    if t < 0:
        raise ConicSetError("t must be nonnegative")
    n = F.n
    if setU0.dim != 2 * n:
        raise ConicSetError("set dimension does not match the Hamilton map")
    inter = intersect_with_subspace(setU0, S_basis, ang_tol)
    M = flow_exp(F, t, kind="imaginary-part")
    moved = _map_atoms(inter, M)
    out = intersect_with_subspace(moved, S_basis, ang_tol)
    mu = 2.0 * (n + r0) + eps
    s0 = setU0.order
    ledger = OrderLedger(rule="propagation", orders={"s": s0, "r0": r0},
                         mu=mu, threshold=2.0 * (n + r0),
                         output_order=None if s0 is None else s0 - mu)
    return ConicSet(2 * n, out.atoms,
                    None if s0 is None else s0 - mu, ledger, out.notes)


def predict_propagation_coarse(F: HamiltonMap, setU0: ConicSet, t: float,
                               r0: float, eps: float = 0.1,
                               ang_tol: float = ANG_TOL) -> ConicSet:
    """Coarser predictor exp(-2itF)(set ^ Ker_R(Im exp(-2itF))).

    On the real kernel the full flow acts by its real part, so the image
    stays real.  Loss ledger mu = n + r0 + eps against threshold n + r0.
    """
    if t < 0:
        raise ConicSetError("t must be nonnegative")
    n = F.n
    K = ker_im_flow(F, t)
    inter = intersect_with_subspace(setU0, K, ang_tol)
    M = flow_exp(F, t, kind="full").real
    out = _map_atoms(inter, M)
    mu = n + r0 + eps
    s0 = setU0.order
    ledger = OrderLedger(rule="propagation-coarse", orders={"s": s0, "r0": r0},
                         mu=mu, threshold=float(n + r0),
                         output_order=None if s0 is None else s0 - mu)
    return ConicSet(2 * n, out.atoms,
                    None if s0 is None else s0 - mu, ledger, out.notes)
