"""Exact polynomial symbols on phase space and their Weyl/Poisson algebra.

Polynomials are stored sparsely (monomial exponent tuple -> complex
coefficient) and manipulated by exact differentiation rules; coefficients
stay exact for the small-integer data the closed-form examples use.
Variables are ordered (x_1..x_n, xi_1..xi_n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PhasePoly:
    """Sparse complex polynomial in ``nvars`` commuting variables."""

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars: int, coeffs: dict[tuple[int, ...], complex] | None = None):
        self.nvars = nvars
        self.coeffs: dict[tuple[int, ...], complex] = {}
        if coeffs:
            for mono, c in coeffs.items():
                if c != 0:
                    self.coeffs[tuple(mono)] = complex(c)

    @classmethod
    def constant(cls, nvars: int, value: complex) -> "PhasePoly":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "PhasePoly":
        mono = [0] * nvars
        mono[index] = 1
        return cls(nvars, {tuple(mono): 1.0})

    def copy(self) -> "PhasePoly":
        return PhasePoly(self.nvars, dict(self.coeffs))

    def __add__(self, other: "PhasePoly") -> "PhasePoly":
        out = dict(self.coeffs)
        for mono, c in other.coeffs.items():
            v = out.get(mono, 0.0) + c
            if v == 0:
                out.pop(mono, None)
            else:
                out[mono] = v
        return PhasePoly(self.nvars, out)

    def __sub__(self, other: "PhasePoly") -> "PhasePoly":
        return self + other * (-1.0)

    def __mul__(self, other):
        if isinstance(other, PhasePoly):
            out: dict[tuple[int, ...], complex] = {}
            for m1, c1 in self.coeffs.items():
                for m2, c2 in other.coeffs.items():
                    mono = tuple(a + b for a, b in zip(m1, m2))
                    v = out.get(mono, 0.0) + c1 * c2
                    if v == 0:
                        out.pop(mono, None)
                    else:
                        out[mono] = v
            return PhasePoly(self.nvars, out)
        return PhasePoly(self.nvars,
                         {m: c * other for m, c in self.coeffs.items()})

    __rmul__ = __mul__

    def diff(self, index: int) -> "PhasePoly":
        out: dict[tuple[int, ...], complex] = {}
        for mono, c in self.coeffs.items():
            k = mono[index]
            if k == 0:
                continue
            m = list(mono)
            m[index] = k - 1
            key = tuple(m)
            out[key] = out.get(key, 0.0) + c * k
        return PhasePoly(self.nvars, out)

    def degree(self) -> int:
        return max((sum(m) for m in self.coeffs), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.coeffs.values())

    def __call__(self, X) -> complex:
        X = np.asarray(X, dtype=complex)
        total = 0.0 + 0.0j
        for mono, c in self.coeffs.items():
            term = c
            for i, k in enumerate(mono):
                if k:
                    term = term * X[i] ** k
            total += term
        return complex(total)

    def __eq__(self, other) -> bool:
        return isinstance(other, PhasePoly) and self.nvars == other.nvars \
            and (self - other).is_zero()

    def __repr__(self) -> str:
        return f"PhasePoly({self.nvars}, {self.coeffs!r})"


@dataclass(frozen=True)
class PolySymbol2:
    """Polynomial symbol of total degree <= 2 on R^{2n}.

    Fields: the (symmetrized) quadratic coefficient matrix, the linear
    coefficient vector and the constant term, all complex.
    """

    n: int
    quad: np.ndarray
    lin: np.ndarray
    const: complex = 0.0

    def __post_init__(self):
        d = 2 * self.n
        quad = np.asarray(self.quad, dtype=complex).reshape(d, d)
        quad = 0.5 * (quad + quad.T)
        lin = np.asarray(self.lin, dtype=complex).reshape(d)
        object.__setattr__(self, "quad", quad)
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "const", complex(self.const))

    @classmethod
    def zero(cls, n: int) -> "PolySymbol2":
        d = 2 * n
        return cls(n, np.zeros((d, d)), np.zeros(d), 0.0)

    @classmethod
    def quadratic(cls, n: int, quad: np.ndarray) -> "PolySymbol2":
        return cls(n, quad, np.zeros(2 * n), 0.0)

    @classmethod
    def from_poly(cls, poly: PhasePoly) -> "PolySymbol2":
        if poly.nvars % 2:
            raise ValueError("phase-space polynomial needs an even variable count")
        if poly.degree() > 2:
            raise ValueError(f"degree {poly.degree()} > 2")
        d = poly.nvars
        quad = np.zeros((d, d), dtype=complex)
        lin = np.zeros(d, dtype=complex)
        const = 0.0 + 0.0j
        for mono, c in poly.coeffs.items():
            idx = [i for i, k in enumerate(mono) for _ in range(k)]
            if len(idx) == 0:
                const += c
            elif len(idx) == 1:
                lin[idx[0]] += c
            else:
                i, j = idx
                quad[i, j] += 0.5 * c
                quad[j, i] += 0.5 * c
        return cls(d // 2, quad, lin, const)

    def as_poly(self) -> PhasePoly:
        d = 2 * self.n
        coeffs: dict[tuple[int, ...], complex] = {}
        if self.const != 0:
            coeffs[(0,) * d] = self.const
        for i in range(d):
            if self.lin[i] != 0:
                mono = [0] * d
                mono[i] = 1
                coeffs[tuple(mono)] = coeffs.get(tuple(mono), 0.0) + self.lin[i]
        for i in range(d):
            for j in range(i, d):
                c = self.quad[i, j] if i == j else self.quad[i, j] + self.quad[j, i]
                if c != 0:
                    mono = [0] * d
                    mono[i] += 1
                    mono[j] += 1
                    key = tuple(mono)
                    coeffs[key] = coeffs.get(key, 0.0) + c
        return PhasePoly(d, coeffs)

    def conj(self) -> "PolySymbol2":
        return PolySymbol2(self.n, self.quad.conj(), self.lin.conj(),
                           np.conj(self.const))

    def __call__(self, X) -> complex:
        X = np.asarray(X, dtype=complex)
        return complex(X @ self.quad @ X + self.lin @ X + self.const)

    def is_zero(self, tol: float = 0.0) -> bool:
        return (np.abs(self.quad).max(initial=0.0) <= tol
                and np.abs(self.lin).max(initial=0.0) <= tol
                and abs(self.const) <= tol)

    def is_zero_imag(self, tol: float = 0.0) -> bool:
        return (np.abs(self.quad.imag).max(initial=0.0) <= tol
                and np.abs(self.lin.imag).max(initial=0.0) <= tol
                and abs(self.const.imag) <= tol)


def poisson_bracket(a: PolySymbol2, b: PolySymbol2) -> PolySymbol2:
    """Exact Poisson bracket {a, b} = <grad_xi a, grad_x b> - <grad_x a, grad_xi b>."""
    if a.n != b.n:
        raise ValueError("dimension mismatch")
    n = a.n
    pa, pb = a.as_poly(), b.as_poly()
    out = PhasePoly(2 * n)
    for j in range(n):
        out = out + pa.diff(n + j) * pb.diff(j) - pa.diff(j) * pb.diff(n + j)
    return PolySymbol2.from_poly(out)


def _sigma_dd_apply(c: PhasePoly, n: int) -> PhasePoly:
    """One application of sigma(D_X; D_Y) to a polynomial in (X, Y).

    Variable layout: X = vars[0:2n] = (x, xi), Y = vars[2n:4n] = (y, eta).
    sigma(D_X; D_Y) = <D_xi, D_y> - <D_x, D_eta> with D = -i d, i.e.
    -(d_xi d_y - d_x d_eta).
    """
    out = PhasePoly(4 * n)
    for j in range(n):
        out = out + c.diff(j).diff(3 * n + j) - c.diff(n + j).diff(2 * n + j)
    return out


def _restrict_diagonal(c: PhasePoly, n: int) -> PhasePoly:
    """Set Y = X in a polynomial on R^{4n}, returning a polynomial on R^{2n}."""
    out: dict[tuple[int, ...], complex] = {}
    for mono, v in c.coeffs.items():
        key = tuple(mono[i] + mono[2 * n + i] for i in range(2 * n))
        w = out.get(key, 0.0) + v
        if w == 0:
            out.pop(key, None)
        else:
            out[key] = w
    return PhasePoly(2 * n, out)


def weyl_product2(a, b) -> PhasePoly:
    """Exact Weyl product of polynomial symbols (terminating Moyal series).

    a # b = sum_j (i/2)^j / j! sigma(D_X; D_Y)^j a(X) b(Y) |_{Y=X}; for
    polynomial inputs the series terminates once the mixed derivatives
    exhaust a factor.  Accepts PolySymbol2 or PhasePoly and returns a
    PhasePoly (degree up to deg a + deg b, e.g. 4 for two quadratics).
    """
    pa = a.as_poly() if isinstance(a, PolySymbol2) else a
    pb = b.as_poly() if isinstance(b, PolySymbol2) else b
    if pa.nvars != pb.nvars:
        raise ValueError("dimension mismatch")
    n = pa.nvars // 2
    # tensor a(X) b(Y) on R^{4n}
    prod: dict[tuple[int, ...], complex] = {}
    for m1, c1 in pa.coeffs.items():
        for m2, c2 in pb.coeffs.items():
            prod[m1 + m2] = prod.get(m1 + m2, 0.0) + c1 * c2
    c = PhasePoly(4 * n, prod)
    result = PhasePoly(2 * n)
    factor = 1.0 + 0.0j
    j = 0
    while not c.is_zero():
        result = result + factor * _restrict_diagonal(c, n)
        j += 1
        factor *= (0.5j) / j
        c = _sigma_dd_apply(c, n)
    return result


def weyl_commutator(a: PolySymbol2, b: PolySymbol2) -> PhasePoly:
    """a # b - b # a; equals -i {a, b} exactly for degree <= 2 symbols."""
    return weyl_product2(a, b) - weyl_product2(b, a)
