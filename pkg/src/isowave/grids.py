"""Uniform origin-centered grids and sampled distributions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class UniformGrid:
    """Origin-centered uniform grid on R^n: points (j - N/2) * (L / N)."""

    n: int
    extent: float
    npoints: int

    def __post_init__(self):
        if self.npoints % 2:
            raise ValueError("npoints must be even")
        if self.extent <= 0:
            raise ValueError("extent must be positive")

    @property
    def spacing(self) -> float:
        return self.extent / self.npoints

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.n

    def axis(self) -> np.ndarray:
        return (np.arange(self.npoints) - self.npoints // 2) * self.spacing

    def dual_axis(self) -> np.ndarray:
        """FFT-dual frequencies 2 pi (k - N/2) / L."""
        return (np.arange(self.npoints) - self.npoints // 2) \
            * (2.0 * np.pi / self.extent)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.axis()] * self.n), indexing="ij")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.npoints,) * self.n

    def dual(self) -> "UniformGrid":
        return UniformGrid(self.n, 2.0 * np.pi / self.spacing, self.npoints)


@dataclass
class SampledDistribution:
    """Complex samples of a distribution on a uniform grid.

    Schwartz-class test data should be negligible at the boundary; a
    warning is emitted otherwise (checked at construction).
    """

    grid: UniformGrid
    values: np.ndarray
    declared_class: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid {self.grid.shape}")
        self.values = v
        peak = np.abs(v).max()
        if peak > 0:
            edge = self._boundary_magnitude()
            if edge > 1e-8 * peak and self.declared_class not in (
                    "indicator", "unnormalized"):
                warnings.warn(
                    f"boundary magnitude {edge:.2e} exceeds 1e-8 of peak "
                    f"{peak:.2e}; grid extent may be too small",
                    stacklevel=2)

    def _boundary_magnitude(self) -> float:
        v = np.abs(self.values)
        m = 0.0
        for ax in range(self.grid.n):
            m = max(m, v.take(0, axis=ax).max(), v.take(-1, axis=ax).max())
        return m

    def norm(self) -> float:
        """L^2 norm by the Riemann sum."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)
                             * self.grid.cell_volume))

    def copy_with(self, values: np.ndarray) -> "SampledDistribution":
        return SampledDistribution(self.grid, values, self.declared_class)


# ---------------------------------------------------------------------------
# centered FFT helpers: F(xi_k) = h^n sum_j f(y_j) exp(-i y_j xi_k)


def _alt_signs(N: int, ndim: int, axis: int) -> np.ndarray:
    s = np.where(np.arange(N) % 2 == 0, 1.0, -1.0)
    shape = [1] * ndim
    shape[axis] = N
    return s.reshape(shape)


def centered_fft(values: np.ndarray, spacing: float,
                 axes: tuple[int, ...] | None = None) -> np.ndarray:
    """Continuous Fourier transform approximation on a centered grid.

    Input samples live at y_j = (j - N/2) h, output at
    xi_k = 2 pi (k - N/2) / (N h):
    F_k = h (-1)^{N/2} (-1)^k FFT[f_j (-1)^j]_k per transformed axis.
    """
    out = np.asarray(values, dtype=complex)
    n = out.ndim
    axes = tuple(range(n)) if axes is None else axes
    for ax in axes:
        N = out.shape[ax]
        sgn = _alt_signs(N, n, ax)
        parity = 1.0 if (N // 2) % 2 == 0 else -1.0
        out = parity * sgn * np.fft.fft(out * sgn, axis=ax)
    return out * spacing ** len(axes)


def centered_ifft(values: np.ndarray, spacing: float,
                  axes: tuple[int, ...] | None = None) -> np.ndarray:
    """Inverse of centered_fft: f_j = (2 pi)^{-n} sum_k F_k e^{i y_j xi_k} h_xi^n."""
    out = np.asarray(values, dtype=complex)
    n = out.ndim
    axes = tuple(range(n)) if axes is None else axes
    for ax in axes:
        N = out.shape[ax]
        sgn = _alt_signs(N, n, ax)
        parity = 1.0 if (N // 2) % 2 == 0 else -1.0
        out = parity * sgn * np.fft.ifft(out * sgn, axis=ax)
    return out / spacing ** len(axes)


def resample(u: SampledDistribution, new_npoints: int,
             tail_tol: float = 1e-8) -> SampledDistribution:
    """Band-limited decimation onto a coarser grid with the same extent.

    Exact when the spectrum fits the new Nyquist box; raises when more than
    ``tail_tol`` of the spectral mass would be cut.
    """
    g = u.grid
    if new_npoints >= g.npoints:
        return u
    F = centered_fft(u.values, g.spacing)
    lo = (g.npoints - new_npoints) // 2
    hi = lo + new_npoints
    sl = tuple(slice(lo, hi) for _ in range(g.n))
    total = float(np.sum(np.abs(F) ** 2))
    inner = float(np.sum(np.abs(F[sl]) ** 2))
    if total > 0 and (total - inner) > tail_tol * total:
        raise ValueError(
            f"decimation would cut {(total - inner) / total:.2e} of the "
            "spectral mass")
    new_grid = UniformGrid(g.n, g.extent, new_npoints)
    vals = centered_ifft(F[sl], new_grid.spacing)
    return SampledDistribution(new_grid, vals, u.declared_class)
