"""Hermite-basis realizations: Weyl operator matrices, smoothing, norms.

The orthonormal Hermite functions diagonalize the harmonic oscillator
(eigenvalue 2|k| + n), so degree <= 2 symbols quantize exactly through
tridiagonal position/derivative ladder matrices.  The same basis yields the
spectral realization of the weighted phase-space norms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import product as iter_product

import numpy as np
import scipy.signal

from .grids import SampledDistribution, UniformGrid
from .polysymbol import PolySymbol2

GRAM_TOL = 1e-8
TAIL_FRACTION = 0.01


def hermite_table(K: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions h_0..h_K sampled at x, shape (K+1, len(x)).

    Three-term recurrence with per-step normalized coefficients; stable far
    past the k ~ 85 factorial overflow of the naive formula.
    """
    x = np.asarray(x, dtype=float)
    H = np.zeros((K + 1, x.size))
    H[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if K >= 1:
        H[1] = np.sqrt(2.0) * x * H[0]
    for k in range(1, K):
        H[k + 1] = np.sqrt(2.0 / (k + 1)) * x * H[k] \
            - np.sqrt(k / (k + 1.0)) * H[k - 1]
    return H


def multi_indices(n: int, K: int) -> list[tuple[int, ...]]:
    """All multi-indices with |k| <= K, sorted by (degree, lexicographic)."""
    out = [k for k in iter_product(range(K + 1), repeat=n) if sum(k) <= K]
    out.sort(key=lambda k: (sum(k), k))
    return out


def _ladders_1d(K: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact position and derivative matrices X, D on h_0..h_K."""
    X = np.zeros((K + 1, K + 1), dtype=complex)
    D = np.zeros((K + 1, K + 1), dtype=complex)
    for k in range(K + 1):
        if k >= 1:
            X[k - 1, k] = np.sqrt(k / 2.0)
            D[k - 1, k] = -1j * np.sqrt(k / 2.0)
        if k + 1 <= K:
            X[k + 1, k] = np.sqrt((k + 1) / 2.0)
            D[k + 1, k] = 1j * np.sqrt((k + 1) / 2.0)
    return X, D


@dataclass
class HermiteBasis:
    """Truncated Hermite basis: multi-indices |k| <= K on a sample grid."""

    n: int
    K: int
    grid: UniformGrid | None = None
    indices: list[tuple[int, ...]] = field(init=False)
    table: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.grid is None:
            extent = max(40.0, 4.0 * np.sqrt(2.0 * self.K + 1.0))
            self.grid = UniformGrid(self.n, extent, 1024 if self.n == 1 else 256)
        if self.grid.n != self.n:
            raise ValueError("grid dimension mismatch")
        self.indices = multi_indices(self.n, self.K)
        self.table = hermite_table(self.K, self.grid.axis())
        gram = self.table @ self.table.T * self.grid.spacing
        defect = np.abs(gram - np.eye(self.K + 1)).max()
        if defect > GRAM_TOL:
            warnings.warn(
                f"Hermite Gram defect {defect:.2e} exceeds {GRAM_TOL:.0e}; "
                "grid under-resolves the basis", stacklevel=2)

    @property
    def size(self) -> int:
        return len(self.indices)

    def degrees(self) -> np.ndarray:
        return np.array([sum(k) for k in self.indices])

    def project(self, u: SampledDistribution) -> np.ndarray:
        """Quadrature coefficients <h_k, u> over the truncated index set."""
        if u.grid.n != self.n:
            raise ValueError("dimension mismatch")
        tab = self.table if u.grid == self.grid \
            else hermite_table(self.K, u.grid.axis())
        vals = u.values
        # contract one axis at a time: result[k_1..k_n]
        out = vals
        for ax in range(self.n):
            out = np.tensordot(tab.conj(), out, axes=([1], [self.n - 1]))
            # tensordot moves the contracted axis to the front; after n steps
            # the order is (k_n, .., k_1) reversed
        out = np.transpose(out, axes=tuple(range(self.n))[::-1])
        out = out * u.grid.cell_volume
        return np.array([out[k] for k in self.indices])

    def synthesize(self, coeffs: np.ndarray,
                   grid: UniformGrid | None = None) -> SampledDistribution:
        """Sampled sum of basis functions with the given coefficients."""
        grid = grid or self.grid
        tab = self.table if grid == self.grid \
            else hermite_table(self.K, grid.axis())
        vals = np.zeros(grid.shape, dtype=complex)
        for c, k in zip(coeffs, self.indices):
            if c == 0:
                continue
            term = tab[k[0]]
            for a in range(1, self.n):
                term = np.multiply.outer(term, tab[k[a]])
            vals = vals + c * term
        return SampledDistribution(grid, vals)

    def tail_fraction(self, coeffs: np.ndarray) -> float:
        """Squared-mass fraction carried by the top degree shell."""
        deg = self.degrees()
        total = float(np.sum(np.abs(coeffs) ** 2))
        if total == 0.0:
            return 0.0
        return float(np.sum(np.abs(coeffs[deg == self.K]) ** 2) / total)


@dataclass
class OperatorMatrix:
    """Matrix of a Weyl operator on a truncated Hermite basis.

    Entries are exact (assembled in an enlarged basis, then cropped), but
    applying the matrix is only faithful on the interior block: degree <= 2
    symbols couple adjacent shells, so the top two shells are flagged.
    """

    basis: HermiteBasis
    matrix: np.ndarray
    symbol: PolySymbol2

    def interior_mask(self, drop_shells: int = 2) -> np.ndarray:
        return self.basis.degrees() <= self.basis.K - drop_shells

    def interior_block(self, drop_shells: int = 2) -> np.ndarray:
        m = self.interior_mask(drop_shells)
        return self.matrix[np.ix_(m, m)]


def opw_quadratic(sym: PolySymbol2, basis: HermiteBasis) -> OperatorMatrix:
    """Weyl quantization of a degree <= 2 symbol on the truncated basis.

    Monomials map to symmetrized products of the exact ladder matrices:
    x_j x_k, xi_j xi_k -> Z_j Z_k (commuting), x_j xi_k -> (X_j D_k + D_k X_j)/2.
    Assembled at truncation K + 2 and cropped so every retained entry is the
    exact infinite-basis matrix element.
    """
    if sym.as_poly().degree() > 2:
        raise ValueError("opw_quadratic handles total degree <= 2 only")
    if sym.n != basis.n:
        raise ValueError("dimension mismatch")
    n, K = basis.n, basis.K
    big = multi_indices(n, K + 2)
    pos = {k: i for i, k in enumerate(big)}
    M = len(big)
    X1, D1 = _ladders_1d(K + 2)

    def axis_op(mat1d: np.ndarray, axis: int) -> np.ndarray:
        out = np.zeros((M, M), dtype=complex)
        for k, i in pos.items():
            for delta in (-1, 1):
                kk = list(k)
                kk[axis] += delta
                if 0 <= kk[axis] and sum(kk) <= K + 2:
                    j = pos[tuple(kk)]
                    out[j, i] = mat1d[kk[axis], k[axis]]
        return out

    Z = [axis_op(X1, a) for a in range(n)] + [axis_op(D1, a) for a in range(n)]
    op = sym.const * np.eye(M, dtype=complex)
    for j in range(2 * n):
        if sym.lin[j] != 0:
            op = op + sym.lin[j] * Z[j]
        for k in range(2 * n):
            if sym.quad[j, k] != 0:
                op = op + 0.5 * sym.quad[j, k] * (Z[j] @ Z[k] + Z[k] @ Z[j])

    keep = np.array([pos[k] for k in basis.indices])
    mat = op[np.ix_(keep, keep)]
    if sym.is_zero_imag():
        defect = np.abs(mat - mat.conj().T).max()
        if defect > 1e-12 * max(1.0, np.abs(mat).max()):
            raise AssertionError(f"real symbol gave non-Hermitian matrix "
                                 f"(defect {defect:.2e})")
    return OperatorMatrix(basis, mat, sym)


def anti_wick_smooth(a_grid: SampledDistribution) -> SampledDistribution:
    """Gaussian phase-space smoothing pi^{-d/2} e^{-|Y|^2} * a (d = 2n).

    The grid must resolve the unit Gaussian (>= 6 points per unit length,
    warned otherwise); the kernel has unit mass, so integrable symbols keep
    their total mass away from the boundary.
    """
    d = a_grid.grid.n
    if d % 2:
        raise ValueError("phase-space grid dimension must be even")
    h = a_grid.grid.spacing
    if h > 1.0 / 6.0:
        warnings.warn(
            f"grid spacing {h:.3f} under-resolves the unit smoothing kernel",
            stacklevel=2)
    half = int(np.ceil(7.0 / h))
    off = np.arange(-half, half + 1) * h
    ker1 = np.exp(-off ** 2)
    kernel = ker1
    for _ in range(d - 1):
        kernel = np.multiply.outer(kernel, ker1)
    kernel = kernel * np.pi ** (-d / 2.0) * a_grid.grid.cell_volume
    sm = scipy.signal.fftconvolve(a_grid.values, kernel, mode="same")
    return SampledDistribution(a_grid.grid, sm, "unnormalized")


def shubin_norm(u, s: float, method: str = "hermite",
                basis: HermiteBasis | None = None,
                window_width: float = 1.0) -> float:
    """Weighted phase-space Sobolev norm of order s.

    method="hermite": (sum_k (2|k| + n)^s |c_k|^2)^{1/2} over Hermite
    coefficients (computed from samples when ``u`` is a
    SampledDistribution; pass coefficients directly with ``basis``).
    method="stft": (2 pi)^{-n/2} || <.>^s V_psi u ||_{L^2} with the unit
    Gaussian window.  The two realizations agree up to an equivalence
    constant per s; see shubin_equivalence_report.
    """
    if method == "hermite":
        if isinstance(u, SampledDistribution):
            basis = basis or HermiteBasis(u.grid.n, 64 if u.grid.n == 1 else 24,
                                          grid=u.grid)
            coeffs = basis.project(u)
        else:
            if basis is None:
                raise ValueError("coefficient input needs an explicit basis")
            coeffs = np.asarray(u, dtype=complex)
        tail = basis.tail_fraction(coeffs)
        if tail > TAIL_FRACTION:
            warnings.warn(
                f"top-degree shell carries {tail:.1%} of the mass; "
                "the truncated norm is unreliable", stacklevel=2)
        weights = (2.0 * basis.degrees() + basis.n) ** s
        return float(np.sqrt(np.sum(weights * np.abs(coeffs) ** 2)))
    if method == "stft":
        from .stft import stft  # local import: stft does not depend on us
        if not isinstance(u, SampledDistribution):
            raise ValueError("stft method needs sampled data")
        n = u.grid.n
        f = stft(u, window_width=window_width)
        return float((2.0 * np.pi) ** (-n / 2.0) * f.weighted_l2(s))
    raise ValueError(f"unknown method {method!r}")


def shubin_equivalence_report(grid: UniformGrid, s: float,
                              ks: tuple[int, ...] = tuple(range(0, 33, 4)),
                              K: int = 64) -> dict:
    """Measured hermite/stft norm ratios on a Hermite calibration corpus."""
    basis = HermiteBasis(grid.n, K, grid=grid)
    ratios = {}
    for k in ks:
        coeffs = np.zeros(basis.size, dtype=complex)
        coeffs[basis.indices.index((k,) * grid.n if grid.n == 1 else
                                   tuple([k] + [0] * (grid.n - 1)))] = 1.0
        u = basis.synthesize(coeffs)
        nh = shubin_norm(coeffs, s, "hermite", basis=basis)
        ns = shubin_norm(u, s, "stft")
        ratios[k] = ns / nh
    vals = np.array(list(ratios.values()))
    return {"s": s, "ratios": ratios,
            "band": (float(vals.min()), float(vals.max()))}
