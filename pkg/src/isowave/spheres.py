"""Deterministic direction grids and samplers on unit spheres."""

from __future__ import annotations

import numpy as np


def circle_directions(count: int) -> np.ndarray:
    """Equi-angular directions on the unit circle, shape (count, 2)."""
    th = 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(th), np.sin(th)])


def sphere3_directions(count: int) -> np.ndarray:
    """Quasi-uniform angle-product grid on S^3 with ~count points.

    Hyperspherical angles (a, b, g) with per-level counts scaled by the
    sin-measure, so the covering radius is about 0.9x the base angle step.
    """
    # solve K from count ~= K^3 / (2 pi^2) * (pi^2/2 * 2) ... empirically
    K = max(6, int(round((count * 2.0 * np.pi ** 2 / 2.0) ** (1.0 / 3.0))))
    dirs = []
    for i in range(K):
        a = (i + 0.5) * np.pi / K
        Kb = max(1, int(round(K * np.sin(a))))
        for j in range(Kb):
            b = (j + 0.5) * np.pi / Kb
            Kg = max(1, int(round(2 * K * np.sin(a) * np.sin(b))))
            for k in range(Kg):
                g = 2.0 * np.pi * (k + 0.5) / Kg
                dirs.append((np.cos(a),
                             np.sin(a) * np.cos(b),
                             np.sin(a) * np.sin(b) * np.cos(g),
                             np.sin(a) * np.sin(b) * np.sin(g)))
    return np.asarray(dirs)


def sphere_directions(dim: int, count: int) -> tuple[np.ndarray, float]:
    """Direction grid on S^{dim-1} plus its angular resolution estimate.

    dim=2 is the exact equi-angular circle; dim=4 the angle-product grid;
    other dimensions fall back to a seeded uniform sample (resolution from
    the covering-law estimate).
    """
    if dim == 2:
        return circle_directions(count), 2.0 * np.pi / count
    if dim == 4:
        dirs = sphere3_directions(count)
        K = max(6, int(round((count * 2.0 * np.pi ** 2 / 2.0) ** (1.0 / 3.0))))
        return dirs, 0.9 * np.pi / K
    rng = np.random.default_rng(12345)
    v = rng.normal(size=(count, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    res = (np.log(count) / count) ** (1.0 / (dim - 1)) * 2.0
    return v, float(res)


def subspace_sphere_samples(basis: np.ndarray) -> tuple[np.ndarray, float]:
    """Sample the unit sphere of a subspace; returns (samples, covering pad).

    k=1 gives the two signed basis vectors exactly (pad 0); k=2 a 128-point
    ring; higher dimensions a seeded uniform sample with a conservative pad.
    """
    k = basis.shape[1]
    if k == 0:
        return np.zeros((0, basis.shape[0])), 0.0
    if k == 1:
        v = basis[:, 0]
        return np.vstack([v, -v]), 0.0
    if k == 2:
        ring = circle_directions(128)
        return ring @ basis.T, np.pi / 128
    count = 512 if k == 3 else 2048
    local, res = sphere_directions(k, count)
    return local @ basis.T, res


def quarter_arc(u: np.ndarray, v: np.ndarray, samples: int = 65) -> np.ndarray:
    """Unit vectors cos(t) u + sin(t) v for t in [0, pi/2] (u, v orthonormal)."""
    t = np.linspace(0.0, np.pi / 2, samples)
    return np.outer(np.cos(t), u) + np.outer(np.sin(t), v)
