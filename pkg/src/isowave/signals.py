"""Initial-datum families for experiments and their declared singular sets."""

from __future__ import annotations

import numpy as np

from .conic import ConicSet
from .grids import SampledDistribution, UniformGrid
from .hermite import hermite_table

DELTA_CELLS = 2.5  # delta approximants: Gaussian of width 2.5 grid cells


def _axis_values(grid: UniformGrid, family: str, params: dict) -> np.ndarray:
    y = grid.axis()
    if family == "gaussian-bump":
        w = params.get("width", 1.0)
        x0 = params.get("center", 0.0)
        xi0 = params.get("carrier", 0.0)
        return np.exp(-(y - x0) ** 2 / (2 * w * w)) * np.exp(1j * xi0 * y)
    if family == "modulated-bump":
        return _axis_values(grid, "gaussian-bump",
                            {**params, "carrier": params.get("carrier", 4.0)})
    if family == "chirp":
        c = params.get("rate", 1.0)
        w = params.get("width", 3.0)
        x0 = params.get("center", 0.0)
        return np.exp(-(y - x0) ** 2 / (2 * w * w)) * np.exp(1j * c * y ** 2)
    if family == "hermite":
        k = int(params.get("k", 0))
        return hermite_table(k, y)[k].astype(complex)
    if family == "delta-approx":
        w = DELTA_CELLS * grid.spacing
        return np.exp(-y ** 2 / (2 * w * w)) / np.sqrt(w * np.sqrt(np.pi))
    raise ValueError(f"unknown datum family {family!r}")


def _axis_wf_dirs(family: str, params: dict) -> np.ndarray:
    """Declared conic singular directions of a 1-d family (may be empty)."""
    if family == "delta-approx":
        return np.array([[0.0, 1.0], [0.0, -1.0]])
    if family == "chirp":
        c = params.get("rate", 1.0)
        d = np.array([1.0, 2.0 * c])
        d = d / np.linalg.norm(d)
        return np.vstack([d, -d])
    return np.zeros((0, 2))


def make_datum(grid: UniformGrid, family: str,
               params: dict | None = None) -> tuple[SampledDistribution, ConicSet]:
    """Sampled datum plus its declared singular set (order 0 by convention).

    Product data combine per-axis families; the declared set embeds each
    singular axis's directions with zeros elsewhere (the regular factors
    are Schwartz-class).
    """
    params = params or {}
    if family == "product":
        axes = params["axes"]
        if len(axes) != grid.n:
            raise ValueError("one axis spec per dimension required")
        g1 = UniformGrid(1, grid.extent, grid.npoints)
        vals = None
        dirs = []
        for ax, spec in enumerate(axes):
            v = _axis_values(g1, spec["family"], spec.get("params", {}))
            vals = v if vals is None else np.multiply.outer(vals, v)
            for d in _axis_wf_dirs(spec["family"], spec.get("params", {})):
                full = np.zeros(2 * grid.n)
                full[ax] = d[0]
                full[grid.n + ax] = d[1]
                dirs.append(full)
        wf = ConicSet.from_rays(np.array(dirs), order=0.0) if dirs \
            else ConicSet.empty(2 * grid.n, order=0.0)
        return SampledDistribution(grid, vals, "product"), wf
    if grid.n != 1:
        raise ValueError("non-product data are one-dimensional")
    vals = _axis_values(grid, family, params)
    dirs = _axis_wf_dirs(family, params)
    wf = ConicSet.from_rays(dirs, order=0.0) if len(dirs) \
        else ConicSet.empty(2, order=0.0)
    return SampledDistribution(grid, vals, family), wf
