"""Closed-form Gaussian propagators and spectral evolution.

Registered closed-form families (all with separable per-axis factors):
convolution kernels for symbols c xi^2 (heat, free quantum evolution and
complex mixtures), multiplication for potentials <x, M x>, and the
hyperbolic/oscillatory oscillator kernels

    exp(-((x^2+y^2) cosh 2t - 2xy) / (2 sinh 2t)) / sqrt(2 pi sinh 2t)
    exp(i((x^2+y^2) cos 2t - 2xy) / (2 sin 2t)) / sqrt(2 pi i sin 2t)

with the principal branch of the oscillatory root.  General admissible
symbols evolve spectrally through the Hermite realization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .grids import SampledDistribution, UniformGrid, centered_fft, centered_ifft
from .hermite import HermiteBasis, opw_quadratic
from .polysymbol import PolySymbol2
from .symplectic import QuadraticSymbol

OSC_SPLIT_LIMIT = 0.9 * np.pi / 2  # per-step oscillator phase bound


class MethodError(ValueError):
    """The requested evolution method does not apply to this symbol."""


class ResolutionError(ValueError):
    """The grid cannot resolve the kernel's oscillation."""


@dataclass(frozen=True)
class Gaussian1DFactor:
    """One-axis kernel factor amp * exp((x, y) m (x, y)^T), m complex symmetric."""

    kind: str  # heat-like | harmonic-real | harmonic-imag | identity
    m: np.ndarray
    amp: complex

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        m = self.m
        return self.amp * np.exp(m[0, 0] * x ** 2 + 2.0 * m[0, 1] * x * y
                                 + m[1, 1] * y ** 2)

    def oscillation_rate(self) -> float:
        """max |d phase / dy| per unit coordinate (times |x| or |y|)."""
        return 2.0 * (abs(self.m.imag[0, 1]) + abs(self.m.imag[1, 1]))


@dataclass(frozen=True)
class GaussianKernel:
    """Separable Gaussian kernel K(x, y) = prod_j factor_j(x_j, y_j).

    The real part of the combined quadratic form is negative semidefinite
    (contraction compatible), checked at construction.
    """

    n: int
    factors: tuple[Gaussian1DFactor, ...]

    def __post_init__(self):
        if len(self.factors) != self.n:
            raise ValueError("one factor per axis required")
        w = np.linalg.eigvalsh(self.quad().real)
        if w.max() > 1e-10 * max(1.0, abs(w).max()):
            raise ValueError("kernel real part must be <= 0 as a quadratic form")

    @property
    def amp(self) -> complex:
        out = 1.0 + 0.0j
        for f in self.factors:
            out *= f.amp
        return complex(out)

    def quad(self) -> np.ndarray:
        """Combined 2n x 2n quadratic form over (x_1..x_n, y_1..y_n)."""
        M = np.zeros((2 * self.n, 2 * self.n), dtype=complex)
        for j, f in enumerate(self.factors):
            M[j, j] = f.m[0, 0]
            M[j, self.n + j] = f.m[0, 1]
            M[self.n + j, j] = f.m[1, 0]
            M[self.n + j, self.n + j] = f.m[1, 1]
        return M

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.ones(x.shape[0], dtype=complex)
        for j, f in enumerate(self.factors):
            out = out * f.evaluate(x[:, j], y[:, j])
        return out

    def symmetric_in_xy(self) -> bool:
        return all(abs(f.m[0, 0] - f.m[1, 1]) < 1e-14 for f in self.factors)


def _principal_sqrt(z: complex) -> complex:
    return complex(np.sqrt(complex(z)))


def heat_like_factor(c: complex, t: float) -> Gaussian1DFactor:
    """Convolution factor of exp(-t c xi^2): (4 pi t c)^{-1/2} e^{-(x-y)^2/(4tc)}."""
    if t <= 0:
        raise ValueError("t must be positive")
    ctc = 4.0 * t * c
    m = (-1.0 / ctc) * np.array([[1.0, -1.0], [-1.0, 1.0]], dtype=complex)
    return Gaussian1DFactor("heat-like", m, 1.0 / _principal_sqrt(np.pi * ctc))


def harmonic_real_factor(t: float) -> Gaussian1DFactor:
    """Hyperbolic oscillator factor at time t (any t > 0)."""
    sh, ch = np.sinh(2.0 * t), np.cosh(2.0 * t)
    m = (-1.0 / (2.0 * sh)) * np.array([[ch, -1.0], [-1.0, ch]], dtype=complex)
    return Gaussian1DFactor("harmonic-real", m,
                            1.0 / _principal_sqrt(2.0 * np.pi * sh))


def harmonic_imag_factor(t: float) -> Gaussian1DFactor:
    """Oscillatory oscillator factor, valid for 0 < t < pi/2.

    Amplitude (2 pi i sin 2t)^{-1/2}, principal branch.
    """
    if not (0.0 < t < np.pi / 2):
        raise ValueError("oscillatory factor needs 0 < t < pi/2")
    sn, cs = np.sin(2.0 * t), np.cos(2.0 * t)
    m = (0.5j / sn) * np.array([[cs, -1.0], [-1.0, cs]], dtype=complex)
    return Gaussian1DFactor("harmonic-imag", m,
                            1.0 / _principal_sqrt(2.0j * np.pi * sn))


def mehler_kernel(n1: int, n2: int, t: float) -> GaussianKernel:
    """Mixed-oscillator kernel: n1 hyperbolic axes, then n2 oscillatory axes."""
    if not (0.0 < t < np.pi / 2):
        raise ValueError("direct kernel needs 0 < t < pi/2; evolve() splits "
                         "longer times")
    factors = [harmonic_real_factor(t) for _ in range(n1)] \
        + [harmonic_imag_factor(t) for _ in range(n2)]
    return GaussianKernel(n1 + n2, tuple(factors))


def heat_kernel(n: int, t: float) -> GaussianKernel:
    return GaussianKernel(n, tuple(heat_like_factor(1.0, t) for _ in range(n)))


def free_schrodinger_kernel(n: int, t: float) -> GaussianKernel:
    return GaussianKernel(n, tuple(heat_like_factor(1.0j, t) for _ in range(n)))


# ---------------------------------------------------------------------------
# symbol families


def classify_family(sym: QuadraticSymbol):
    """Match the symbol to a registered closed-form family, or None.

    Families: ("multiplier", C) for a = <xi, C xi>; ("potential", M) for
    a = <x, M x>; ("oscillator", rates) for a = sum_j d_j (x_j^2 + xi_j^2)
    with each d_j positive real or positive imaginary.
    """
    n = sym.n
    Q = sym.Q
    tol = 1e-12 * max(1.0, np.abs(Q).max())
    xx, xxi, xix, xixi = Q[:n, :n], Q[:n, n:], Q[n:, :n], Q[n:, n:]
    if np.abs(xx).max(initial=0) <= tol and np.abs(xxi).max(initial=0) <= tol \
            and np.abs(xix).max(initial=0) <= tol:
        return ("multiplier", xixi)
    if np.abs(xixi).max(initial=0) <= tol and np.abs(xxi).max(initial=0) <= tol \
            and np.abs(xix).max(initial=0) <= tol \
            and np.abs(xx.imag).max(initial=0) <= tol:
        return ("potential", xx.real)
    if np.abs(xxi).max(initial=0) <= tol and np.abs(xix).max(initial=0) <= tol \
            and np.abs(xx - np.diag(np.diag(xx))).max(initial=0) <= tol \
            and np.abs(xixi - np.diag(np.diag(xixi))).max(initial=0) <= tol \
            and np.abs(np.diag(xx) - np.diag(xixi)).max(initial=0) <= tol:
        rates = np.diag(xx)
        ok = all((abs(d.imag) <= tol and d.real > tol)
                 or (abs(d.real) <= tol and d.imag > tol) for d in rates)
        if ok:
            return ("oscillator", rates)
    return None


def mixed_oscillator_symbol(n1: int, n2: int) -> QuadraticSymbol:
    """|X'|^2 + i |X''|^2 on R^{n1 + n2}: heat-type in the first group,
    quantum in the second."""
    d = np.concatenate([np.ones(n1), 1j * np.ones(n2)])
    return QuadraticSymbol(n1 + n2, np.diag(np.concatenate([d, d])))


@dataclass
class PropagatorSpec:
    """Evolution request: symbol, time, method and method parameters."""

    sym: QuadraticSymbol
    t: float
    method: str = "closed-form"  # | hermite-spectral | fourier-multiplier
    K: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        if self.method == "closed-form":
            if classify_family(self.sym) is None:
                raise MethodError("closed-form evolution needs a registered "
                                  "symbol family")
        elif self.method == "fourier-multiplier":
            fam = classify_family(self.sym)
            if fam is None or fam[0] != "multiplier":
                raise MethodError("fourier-multiplier needs a = a(xi)")
        elif self.method != "hermite-spectral":
            raise MethodError(f"unknown method {self.method!r}")


def _axis_factors(sym: QuadraticSymbol, t: float) -> list[list[Gaussian1DFactor]]:
    """Per-axis factor chains for the closed-form families (time split)."""
    fam = classify_family(sym)
    kind = fam[0]
    n = sym.n
    if kind == "multiplier":
        C = fam[1]
        if np.abs(C - np.diag(np.diag(C))).max(initial=0) > 1e-12:
            raise MethodError("closed-form multiplier kernels need diagonal "
                              "frequency symbols; use fourier-multiplier")
        out = []
        for c in np.diag(C):
            out.append([heat_like_factor(complex(c), t)] if abs(c) > 0
                       else [Gaussian1DFactor(
                           "identity", np.zeros((2, 2), dtype=complex), 1.0)])
        return out
    if kind == "oscillator":
        out = []
        for d in fam[1]:
            if abs(d.imag) <= 1e-12:
                out.append([harmonic_real_factor(float(d.real) * t)])
            else:
                tt = float(d.imag) * t
                steps = int(np.ceil(tt / OSC_SPLIT_LIMIT))
                out.append([harmonic_imag_factor(tt / steps)] * steps)
        return out
    raise MethodError(f"family {kind!r} has no convolution kernel")


def _support_half_width(vals: np.ndarray, axis: int, x: np.ndarray) -> float:
    mag = np.abs(vals)
    other = tuple(a for a in range(vals.ndim) if a != axis)
    prof = mag.max(axis=other) if other else mag
    alive = prof > 1e-13 * max(prof.max(), 1e-300)
    return float(np.abs(x[alive]).max()) if alive.any() else 0.0


def _check_resolution(f: Gaussian1DFactor, grid: UniformGrid,
                      y_support: float) -> None:
    """Quadrature precondition: the y-integrand's phase advances < pi/2/cell.

    d(phase)/dy = 2 Im(m_xy) x + 2 Im(m_yy) y with x anywhere on the output
    grid and y restricted to the data support (the kernel modulus is not
    small there, so unresolved oscillation cannot be truncated away).
    """
    half = grid.extent / 2.0
    rate = 2.0 * (abs(f.m.imag[0, 1]) * half + abs(f.m.imag[1, 1]) * y_support)
    if grid.spacing * rate >= np.pi / 2:
        raise ResolutionError(
            f"cell size x max|grad phase| = {grid.spacing * rate:.2f} >= pi/2; "
            "refine the grid or shorten the step")


def _apply_axis_matrix(vals: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(mat, vals, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def evolve(u0: SampledDistribution, spec: PropagatorSpec) -> SampledDistribution:
    """Evolved field at time spec.t by the requested method.

    closed-form: per-axis quadrature of the registered Gaussian kernels
    (oscillation-resolution precondition enforced, oscillatory times split
    below pi/2); fourier-multiplier: exact spectral factor
    exp(-t a(xi)); hermite-spectral: coefficient flow exp(-t M) with
    M the Weyl matrix of the symbol (exponential cached per spec).
    """
    if spec.sym.n != u0.grid.n:
        raise MethodError("dimension mismatch")
    if spec.t == 0.0:
        return u0.copy_with(u0.values.copy())
    g = u0.grid
    if spec.method == "fourier-multiplier":
        C = classify_family(spec.sym)[1]
        xi = g.dual_axis()
        mesh = np.meshgrid(*([xi] * g.n), indexing="ij")
        a_xi = np.zeros(g.shape, dtype=complex)
        for j in range(g.n):
            for k in range(g.n):
                if C[j, k] != 0:
                    a_xi = a_xi + C[j, k] * mesh[j] * mesh[k]
        F = centered_fft(u0.values, g.spacing)
        vals = centered_ifft(np.exp(-spec.t * a_xi) * F, g.spacing)
        return u0.copy_with(vals)
    if spec.method == "closed-form":
        fam = classify_family(spec.sym)
        if fam[0] == "potential":
            mesh = g.mesh()
            quad = np.zeros(g.shape)
            for j in range(g.n):
                for k in range(g.n):
                    if fam[1][j, k] != 0:
                        quad = quad + fam[1][j, k] * mesh[j] * mesh[k]
            return u0.copy_with(u0.values * np.exp(-spec.t * quad))
        vals = u0.values.astype(complex)
        x = g.axis()
        for axis, chain in enumerate(_axis_factors(spec.sym, spec.t)):
            for f in chain:
                if f.kind == "identity":
                    continue
                _check_resolution(f, g, _support_half_width(vals, axis, x))
                mat = f.evaluate(x[:, None], x[None, :]) * g.spacing
                vals = _apply_axis_matrix(vals, mat, axis)
        return u0.copy_with(vals)
    if spec.method == "hermite-spectral":
        K = spec.K or (64 if g.n == 1 else 24)
        key = ("basis", K)
        if key not in spec._cache:
            spec._cache[key] = HermiteBasis(g.n, K, grid=g)
        basis = spec._cache[key]
        ekey = ("exp", K, spec.t)
        if ekey not in spec._cache:
            M = opw_quadratic(PolySymbol2.quadratic(g.n, spec.sym.Q), basis)
            spec._cache[ekey] = scipy.linalg.expm(-spec.t * M.matrix)
        coeffs = basis.project(u0)
        tail = basis.tail_fraction(coeffs)
        if tail > 0.01:
            raise ResolutionError(
                f"top-degree shell carries {tail:.1%} of the data; increase K")
        out = spec._cache[ekey] @ coeffs
        return basis.synthesize(out, grid=g)
    raise MethodError(f"unknown method {spec.method!r}")


def check_semigroup(spec: PropagatorSpec, t1: float, t2: float,
                    corpus: list[SampledDistribution]) -> dict:
    """Max relative L2 residual of one-step vs two-step evolution."""
    worst = 0.0
    for u0 in corpus:
        one = evolve(u0, PropagatorSpec(spec.sym, t1 + t2, spec.method, spec.K))
        mid = evolve(u0, PropagatorSpec(spec.sym, t2, spec.method, spec.K))
        two = evolve(mid, PropagatorSpec(spec.sym, t1, spec.method, spec.K))
        denom = max(one.norm(), 1e-300)
        worst = max(worst, float(
            np.sqrt(np.sum(np.abs(one.values - two.values) ** 2)
                    * u0.grid.cell_volume) / denom))
    return {"t1": t1, "t2": t2, "method": spec.method,
            "max_relative_residual": worst}


# ---------------------------------------------------------------------------
# weighted-norm probe for kernels


def _rotated_1d_parts(f: Gaussian1DFactor) -> tuple[complex, complex]:
    """Coefficients (lu, lv) with factor = amp e^{lu u^2 + lv v^2} in rotated
    coordinates u = (x - y)/sqrt 2, v = (x + y)/sqrt 2 (swap-symmetric m)."""
    a, b = f.m[0, 0], f.m[0, 1]
    return a - b, a + b


def _radial_profile(lam: complex, half_width: float,
                    nbins: int, rho_max: float) -> np.ndarray:
    """Radial |STFT|^2 profile of e^{lam v^2} 1_{|v| <= H} (unit window).

    Streaming over x-slices: O(N) memory.  Bin b collects the squared mass
    with |(x, xi)| in [b, b+1) * rho_max / nbins.
    """
    margin = 10.0
    osc = 2.0 * abs(lam.imag) * (half_width + margin)
    h = min(1.0 / 6.0, np.pi / (2.0 * osc) if osc > 0 else np.inf)
    N = int(2 ** np.ceil(np.log2(2.0 * (half_width + margin) / h)))
    N = max(N, 256)
    grid = UniformGrid(1, 2.0 * (half_width + margin), N)
    y = grid.axis()
    vals = np.exp(lam * y ** 2) * (np.abs(y) <= half_width)
    xi = grid.dual_axis()
    cell = grid.spacing * (2.0 * np.pi / grid.extent)
    prof = np.zeros(nbins)
    norm = np.pi ** -0.25
    for i, xc in enumerate(y):
        w = norm * np.exp(-(y - xc) ** 2 / 2.0)
        row = centered_fft(vals * w, grid.spacing)
        rho = np.sqrt(xc ** 2 + xi ** 2)
        b = np.minimum((rho / rho_max * nbins).astype(int), nbins - 1)
        np.add.at(prof, b, np.abs(row) ** 2 * cell)
    return prof


def kernel_sobolev_probe(kernel: GaussianKernel, eps: float,
                         boxes: tuple[float, ...] = (4.0, 8.0, 16.0, 32.0),
                         order: float | None = None,
                         nbins: int = 160) -> dict:
    """Growing-box estimate of the kernel's weighted phase-space norm.

    Reports the <.>^s-weighted STFT norm of K restricted to boxes of
    increasing half-width at s = order (default -(n + eps)); a plateau
    (successive ratios -> 1) indicates membership at that order, unbounded
    growth indicates the order is too high.  Requires swap-symmetric
    factors: the rotation (x-y, x+y)/sqrt 2 splits the kernel into 1-D
    factors and preserves the norm exactly (radial window).
    """
    if not kernel.symmetric_in_xy():
        raise ValueError("probe needs swap-symmetric kernel factors")
    n = kernel.n
    s = order if order is not None else -(n + eps)
    lams = []
    for f in kernel.factors:
        lu, lv = _rotated_1d_parts(f)
        lams.extend([lu, lv])
    norms = []
    for H in boxes:
        rho_max = np.sqrt(2.0) * (H + 10.0) + 40.0
        profs = [_radial_profile(lam, H, nbins, rho_max) for lam in lams]
        centers = (np.arange(nbins) + 0.5) * rho_max / nbins
        total = profs[0]
        csum = centers ** 2
        if len(profs) == 2:
            W = (1.0 + csum[:, None] + csum[None, :]) ** s
            total = float(np.einsum("i,j,ij->", profs[0], profs[1], W))
        elif len(profs) == 1:
            total = float(np.sum(profs[0] * (1.0 + csum) ** s))
        else:
            # nested accumulation for more factors (coarse bins advised)
            acc = np.zeros(nbins)
            grids = np.meshgrid(*([csum] * len(profs)), indexing="ij")
            W = (1.0 + sum(grids)) ** s
            P = profs[0]
            for p in profs[1:]:
                P = np.multiply.outer(P, p)
            total = float(np.sum(P * W))
        norms.append(abs(kernel.amp) * (2.0 * np.pi) ** (-n / 2.0)
                     * np.sqrt(total))
    ratios = [norms[i + 1] / norms[i] for i in range(len(norms) - 1)]
    return {"order": s, "boxes": list(boxes), "norms": norms,
            "ratios": ratios,
            "plateau": bool(abs(ratios[-1] - 1.0) <= 0.05)}
