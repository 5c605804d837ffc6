"""Short-time Fourier analysis and conic singularity detection.

V_psi u(x, xi) = integral of u(y) psi(y - x) exp(-i y xi) dy with a unit
Gaussian window.  Directions of slow decay of |V| along phase-space rays
are classified by least-squares decay fits over dyadic radii; the detected
set is reported as direction fans with fitted orders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import SampledDistribution, UniformGrid, centered_fft, centered_ifft
from .spheres import sphere_directions

ALIAS_FRACTION = 1e-6
FIT_FLOOR = 1e-14
DEFAULT_N_REG = 4.0
DEFAULT_SHELLS = 5


class AliasingError(ValueError):
    """Spectral mass at the Nyquist edge exceeds the safe fraction."""


class WindowMismatchError(ValueError):
    """Inverse transform called with a different window than the forward."""


@dataclass(frozen=True)
class GaussianWindow:
    """Unit-L2 Gaussian window (pi w^2)^{-n/4} exp(-|y|^2 / (2 w^2))."""

    n: int
    width: float = 1.0

    def sample(self, y: np.ndarray) -> np.ndarray:
        w = self.width
        r2 = y ** 2 if y.ndim == 1 else np.sum(y ** 2, axis=-1)
        return (np.pi * w * w) ** (-self.n / 4.0) * np.exp(-r2 / (2 * w * w))


def _check_aliasing(values: np.ndarray, spacing: float) -> None:
    spec = np.abs(centered_fft(values, spacing)) ** 2
    total = spec.sum()
    if total == 0.0:
        return
    edge = 0.0
    for ax in range(spec.ndim):
        edge += spec.take([0, 1, 2], axis=ax).sum()
        edge += spec.take([-1, -2, -3], axis=ax).sum()
    if edge > ALIAS_FRACTION * total:
        raise AliasingError(
            f"spectral mass fraction {edge / total:.2e} within 3 bins of the "
            "Nyquist edge")


@dataclass
class STFTField:
    """Windowed transform of a sampled distribution.

    For n = 1 the dense (x_i, xi_k) table is stored; point values anywhere
    in phase space are available through :meth:`evaluate`, which integrates
    the stored samples directly (no interpolation).  The Parseval residual
    against the conformal-isometry identity is recorded on construction.
    """

    source: SampledDistribution
    window: GaussianWindow
    values: np.ndarray | None
    isometry_residual: float
    x_stride: int = 1

    @property
    def n(self) -> int:
        return self.source.grid.n

    @property
    def grid(self) -> UniformGrid:
        return self.source.grid

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """V at arbitrary phase-space points (P, 2n) by direct quadrature.

        The Gaussian-times-phase kernel separates per axis:
        exp(-|y - x|^2/(2w^2) - i y xi) =
        e^{-|x|^2/w2} e^{-|y|^2/w2} prod_ax e^{(2 x/w2 - i xi) y}, so the
        sum over the tensor grid is a chain of small matrix products
        instead of a P x G exponential.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.n
        g = self.grid
        y = g.axis()
        w2 = 2.0 * self.window.width ** 2
        norm = (np.pi * self.window.width ** 2) ** (-n / 4.0)
        # overflow guard for the separated exponentials
        max_expo = (np.abs(pts[:, :n]).max(initial=0.0) * np.abs(y).max()
                    * 2.0 / w2)
        if max_expo > 300.0:
            return self._evaluate_direct(pts)
        uw = self.source.values * np.exp(
            -sum(m ** 2 for m in g.mesh()) / w2 if n > 1 else -y ** 2 / w2)
        out = np.empty(len(pts), dtype=complex)
        chunk = max(1, (1 << 21) // max(g.npoints, 1))
        for i in range(0, len(pts), chunk):
            x = pts[i:i + chunk, :n]
            xi = pts[i:i + chunk, n:]
            amp = norm * np.exp(-np.sum(x ** 2, axis=1) / w2)
            E = [np.exp(np.outer(2.0 * x[:, ax] / w2 - 1j * xi[:, ax], y))
                 for ax in range(n)]
            if n == 1:
                acc = E[0] @ uw
            else:
                acc = np.einsum("pb,ab->pa", E[1], uw)
                acc = np.einsum("pa,pa->p", E[0], acc)
            out[i:i + chunk] = amp * acc * g.cell_volume
        return out

    def _evaluate_direct(self, pts: np.ndarray) -> np.ndarray:
        n = self.n
        g = self.grid
        Y = np.stack([a.ravel() for a in g.mesh()], axis=1)
        u = self.source.values.ravel()
        norm = (np.pi * self.window.width ** 2) ** (-n / 4.0)
        w2 = 2.0 * self.window.width ** 2
        Y2 = np.sum(Y ** 2, axis=1)
        out = np.empty(len(pts), dtype=complex)
        chunk = max(1, (1 << 22) // max(len(Y), 1))
        for i in range(0, len(pts), chunk):
            x = pts[i:i + chunk, :n]
            xi = pts[i:i + chunk, n:]
            d2 = Y2[None, :] - 2.0 * x @ Y.T + np.sum(x ** 2, axis=1)[:, None]
            ker = norm * np.exp(-d2 / w2 - 1j * (xi @ Y.T))
            out[i:i + chunk] = ker @ u * g.cell_volume
        return out

    def weighted_l2(self, s: float) -> float:
        """|| <(x, xi)>^s V ||_{L^2} on the dense grid (n = 1 or 2)."""
        if self.values is None:
            raise ValueError("dense field not stored for this dimension")
        g = self.grid
        x = g.axis()
        xi = g.dual_axis()
        if self.n == 1:
            W = 1.0 + x[:, None] ** 2 + xi[None, :] ** 2
            cell = g.spacing * (2.0 * np.pi / g.extent)
        else:
            xs = x[::self.x_stride]
            X1, X2, K1, K2 = np.meshgrid(xs, xs, xi, xi, indexing="ij")
            W = 1.0 + X1 ** 2 + X2 ** 2 + K1 ** 2 + K2 ** 2
            cell = (g.spacing * self.x_stride) ** 2 * (2 * np.pi / g.extent) ** 2
        return float(np.sqrt(np.sum(W ** s * np.abs(self.values) ** 2) * cell))


def stft(u: SampledDistribution, window_width: float = 1.0,
         check_aliasing: bool = True) -> STFTField:
    """Windowed transform on the phase-space grid (x on u's grid, xi dual).

    Computed by per-slice FFTs; the isometry residual
    | ||V|| - (2 pi)^{n/2} ||u|| | / ||u|| is stored.  Raises AliasingError
    when the data's spectrum presses against the Nyquist edge.
    """
    g = u.grid
    win = GaussianWindow(g.n, window_width)
    if check_aliasing:
        _check_aliasing(u.values, g.spacing)
    y = g.axis()
    norm_u = u.norm()
    if g.n == 1:
        # V[i, k] = fft_y( u(y) psi(y - x_i) )[k], all slices at once
        shift = y[None, :] - y[:, None]
        wmat = (np.pi * window_width ** 2) ** (-0.25) \
            * np.exp(-shift ** 2 / (2 * window_width ** 2))
        V = centered_fft(u.values[None, :] * wmat, g.spacing, axes=(1,))
        cell = g.spacing * (2.0 * np.pi / g.extent)
        norm_v = np.sqrt(np.sum(np.abs(V) ** 2) * cell)
        residual = abs(norm_v - (2 * np.pi) ** 0.5 * norm_u) / max(norm_u, 1e-300)
        return STFTField(u, win, V, float(residual))
    if g.n == 2:
        # Parseval residual from a strided x-slice sweep; the dense field is
        # not stored (point values come from evaluate())
        stride = max(1, g.npoints // 32)
        xs = y[::stride]
        sq = 0.0
        mesh = g.mesh()
        for a in xs:
            for b in xs:
                wmat = win.sample(np.stack(
                    [m - c for m, c in zip(mesh, (a, b))], axis=-1))
                sq += float(np.sum(np.abs(
                    centered_fft(u.values * wmat, g.spacing)) ** 2))
        cell = (g.spacing * stride) ** 2 * (2 * np.pi / g.extent) ** 2
        norm_v = np.sqrt(sq * cell)
        residual = abs(norm_v - (2 * np.pi) * norm_u) / max(norm_u, 1e-300)
        return STFTField(u, win, None, float(residual), x_stride=stride)
    raise NotImplementedError("stft fields support n <= 2")


def istft(f: STFTField, window_width: float | None = None) -> SampledDistribution:
    """Adjoint inversion (2 pi)^{-n} V* applied by grid quadrature (n = 1)."""
    if window_width is not None and window_width != f.window.width:
        raise WindowMismatchError(
            f"forward window width {f.window.width}, inverse {window_width}")
    if f.n != 1 or f.values is None:
        raise NotImplementedError("istft implemented for dense 1-d fields")
    g = f.grid
    y = g.axis()
    # inner(x_i, y_j) = (2 pi)^{-1} int V(x_i, xi) e^{i y_j xi} d xi
    inner = centered_ifft(f.values, g.spacing, axes=(1,))
    shift = y[None, :] - y[:, None]  # y_j - x_i
    wmat = (np.pi * f.window.width ** 2) ** (-0.25) \
        * np.exp(-shift ** 2 / (2 * f.window.width ** 2))
    vals = np.sum(inner * wmat, axis=0) * g.spacing
    return SampledDistribution(g, vals, f.source.declared_class)


# ---------------------------------------------------------------------------
# metaplectic transforms


def metaplectic(u: SampledDistribution, kind: str, c: float | None = None,
                kappa: np.ndarray | None = None) -> SampledDistribution:
    """Unitary phase-space symmetries: fourier, chirp(c), linear(kappa).

    fourier: (2 pi)^{-n/2} u-hat on the dual grid; chirp: multiplication by
    exp(i c |x|^2); linear: u(kappa x) |det kappa|^{1/2} by band-limited
    resampling (exact spectrum evaluation, interpolation limited).
    """
    g = u.grid
    if kind == "fourier":
        vals = (2 * np.pi) ** (-g.n / 2.0) * centered_fft(u.values, g.spacing)
        return SampledDistribution(g.dual(), vals, u.declared_class)
    if kind == "chirp":
        if c is None:
            raise ValueError("chirp needs the rate c")
        r2 = sum(m ** 2 for m in g.mesh()) if g.n > 1 else g.axis() ** 2
        return SampledDistribution(g, u.values * np.exp(1j * c * r2),
                                   u.declared_class)
    if kind == "linear":
        if kappa is None:
            raise ValueError("linear needs the matrix kappa")
        kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
        if abs(np.linalg.det(kappa)) < 1e-14:
            raise ValueError("kappa must be invertible")
        F = centered_fft(u.values, g.spacing)
        xi = g.dual_axis()
        scale = abs(np.linalg.det(kappa)) ** 0.5
        hxi = 2 * np.pi / g.extent
        if g.n == 1:
            z = kappa[0, 0] * g.axis()
            vals = (np.exp(1j * np.outer(z, xi)) @ F) * hxi / (2 * np.pi)
            return SampledDistribution(g, scale * vals, u.declared_class)
        if np.allclose(kappa, np.diag(np.diag(kappa))):
            vals = F
            for ax, d in enumerate(np.diag(kappa)):
                z = d * g.axis()
                E = np.exp(1j * np.outer(z, xi)) * hxi / (2 * np.pi)
                vals = np.moveaxis(np.tensordot(E, vals, axes=([1], [ax])), 0, ax)
            return SampledDistribution(g, scale * vals, u.declared_class)
        pts = np.stack([m.ravel() for m in g.mesh()], axis=1) @ kappa.T
        mesh_xi = np.meshgrid(*([xi] * g.n), indexing="ij")
        Xi = np.stack([m.ravel() for m in mesh_xi], axis=1)
        vals = (np.exp(1j * pts @ Xi.T) @ F.ravel()) * (hxi / (2 * np.pi)) ** g.n
        return SampledDistribution(g, scale * vals.reshape(g.shape),
                                   u.declared_class)
    raise ValueError(f"unknown metaplectic kind {kind!r}")


def metaplectic_phase_map(n: int, kind: str, c: float | None = None,
                          kappa: np.ndarray | None = None) -> np.ndarray:
    """The linear phase-space map chi with singularities(U u) = chi(singularities(u))."""
    eye = np.eye(n)
    if kind == "fourier":
        return np.block([[0 * eye, eye], [-eye, 0 * eye]])
    if kind == "chirp":
        return np.block([[eye, 0 * eye], [2.0 * c * eye, eye]])
    if kind == "linear":
        kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
        return np.block([[np.linalg.inv(kappa), 0 * eye], [0 * eye, kappa.T]])
    raise ValueError(f"unknown metaplectic kind {kind!r}")


# ---------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class DetectedFan:
    direction: np.ndarray
    radius: float
    n_hat: float
    s_hat: float
    confidence: float
    members: int = 1


@dataclass
class WFReport:
    """Detected singular fans with fitted decay orders and run parameters."""

    dim: int
    fans: list[DetectedFan]
    params: dict
    isometry_residual: float
    flags: list[str] = field(default_factory=list)

    def is_empty(self) -> bool:
        return len(self.fans) == 0

    def directions(self) -> np.ndarray:
        if not self.fans:
            return np.zeros((0, self.dim))
        return np.vstack([f.direction for f in self.fans])


def default_radii(field: STFTField, shells: int = DEFAULT_SHELLS) -> np.ndarray:
    g = field.grid
    half_x = g.extent / 2.0
    half_xi = np.pi / g.spacing
    r_max = 0.4 * 2.0 * min(half_x, half_xi) / 2.0
    return r_max / 2.0 ** np.arange(shells - 1, -1, -1)


def detect_wf(field: STFTField, s: float | None = None,
              radii: np.ndarray | None = None, ang_grid: int = 256,
              n_reg: float = DEFAULT_N_REG) -> WFReport:
    """Classify phase-space directions by decay of |V| along dyadic shells.

    For every direction on a quasi-uniform grid of the unit sphere the
    values max|V| over a cone of half-angle 3 pi / ang_grid are fitted by
    least squares in log |V| vs log r.  A direction is singular when the
    fitted decay order N_hat falls below ``n_reg`` (rapid-decay mode) or,
    when an order ``s`` is given, when the <r>^{2s}-weighted shell mass is
    still growing at the outer shells.  The per-direction borderline order
    s_hat = N_hat - n maps fitted finite-range decay to a Sobolev order
    (heuristic: the grid truncates the asymptotics).
    """
    n = field.n
    dim = 2 * n
    if radii is None:
        radii = default_radii(field)
    radii = np.asarray(radii, dtype=float)
    g = field.grid
    if radii.max() > 2.0 * min(g.extent / 2.0, np.pi / g.spacing):
        raise ValueError("radii exceed the phase-space extent")
    if n == 1 and ang_grid < 64:
        raise ValueError("ang_grid >= 64 required")
    dirs, res = sphere_directions(dim, ang_grid)
    M = len(dirs)
    delta_cone = 3.0 * np.pi / ang_grid if n == 1 else 1.5 * res
    pts = (radii[None, :, None] * dirs[:, None, :]).reshape(-1, dim)
    vals = np.abs(field.evaluate(pts)).reshape(M, len(radii))

    # cone aggregation: neighbor max within delta_cone
    cos_thresh = np.cos(delta_cone)
    cone = np.empty_like(vals)
    chunk = max(1, (1 << 22) // M)
    for i in range(0, M, chunk):
        dots = dirs[i:i + chunk] @ dirs.T
        nb = dots >= cos_thresh - 1e-12
        for r, row in enumerate(nb):
            cone[i + r] = vals[row].max(axis=0)

    flags: list[str] = []
    logr = np.log(radii)
    n_hat = np.full(M, np.inf)
    conf = np.zeros(M)
    few_radii = 0
    for m in range(M):
        usable = cone[m] > FIT_FLOOR
        if usable.sum() < 4:
            few_radii += 1
        if usable.sum() < 2 or cone[m, -1] <= FIT_FLOOR:
            continue  # below the dynamic-range floor at the outer shell:
            # decay is certainly rapid, and a fit on the surviving inner
            # shells would understate it
        x = logr[usable]
        yv = np.log(cone[m][usable])
        slope, b = np.polyfit(x, yv, 1)
        n_hat[m] = -slope
        fit = slope * x + b
        ss_res = np.sum((yv - fit) ** 2)
        ss_tot = np.sum((yv - yv.mean()) ** 2)
        conf[m] = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if few_radii:
        flags.append(f"{few_radii} directions with fewer than 4 usable radii")

    if s is None:
        singular = n_hat < n_reg
    else:
        w = (1.0 + radii ** 2) ** s * radii ** (2 * n)
        mass = w[None, :] * cone ** 2
        tail = mass[:, -3:] if mass.shape[1] >= 3 else mass
        singular = np.all(np.diff(tail, axis=1) >= -1e-12 * tail[:, :-1], axis=1)
        singular &= cone[:, -1] > FIT_FLOOR

    fans = _group_fans(dirs, singular, n_hat, conf, res, n)
    params = {"radii": radii.tolist(), "ang_grid": ang_grid,
              "delta_cone": delta_cone, "n_reg": n_reg, "s": s,
              "window_width": field.window.width, "resolution": res}
    return WFReport(dim, fans, params, field.isometry_residual, flags)


def _group_fans(dirs: np.ndarray, singular: np.ndarray, n_hat: np.ndarray,
                conf: np.ndarray, res: float, n: int) -> list[DetectedFan]:
    """Merge adjacent singular directions into fans (connected components)."""
    idx = np.flatnonzero(singular)
    if idx.size == 0:
        return []
    sub = dirs[idx]
    cos_adj = np.cos(2.2 * res)
    parent = list(range(len(idx)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    adj = sub @ sub.T >= cos_adj
    for i in range(len(idx)):
        for j in np.flatnonzero(adj[i, i + 1:]) + i + 1:
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for i in range(len(idx)):
        groups.setdefault(find(i), []).append(i)

    fans = []
    for members in groups.values():
        mem_dirs = sub[members]
        mean = mem_dirs.sum(axis=0)
        norm = np.linalg.norm(mean)
        if norm < 1e-12:
            mean, norm = mem_dirs[0], 1.0
        mean = mean / max(norm, 1e-300)
        spread = np.arccos(np.clip(mem_dirs @ mean, -1.0, 1.0)).max()
        gi = idx[members]
        fans.append(DetectedFan(
            direction=mean,
            radius=float(min(spread + res / 2.0, np.pi / 4)),
            n_hat=float(np.min(n_hat[gi])),
            s_hat=float(np.min(n_hat[gi]) - n),
            confidence=float(np.mean(conf[gi])),
            members=len(members)))
    fans.sort(key=lambda f: tuple(np.round(f.direction, 9)))
    return fans
