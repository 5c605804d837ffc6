"""Scenario orchestration: predict, evolve, detect, compare, persist.

A scenario bundles a symbol, an initial datum, evolution times and detector
settings.  Running it computes the propagation prediction, evolves the
datum, detects the singular fans of the evolved field and checks their
containment in the prediction within an angular tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conic import ConicSet, member, predict_propagation
from .grids import SampledDistribution, UniformGrid, resample
from .propagator import PropagatorSpec, evolve
from .serialize import (SCHEMA_VERSION, conic_set_from_json, conic_set_to_json,
                        dump_json, load_json, matrix_to_csv, symbol_from_json)
from .signals import make_datum
from .stft import detect_wf, stft
from .symplectic import hamilton_map, singular_space
from .grids import centered_fft  # noqa: F401  (re-export convenience)

DEFAULT_CONTAIN_DEG = 5.0


@dataclass
class Scenario:
    """One experiment: symbol + datum + times + detector parameters."""

    id: str
    symbol: dict
    datum: dict
    times: list[float]
    grid: dict
    method: str = "closed-form"
    detector: dict = field(default_factory=dict)
    detect_npoints: int | None = None
    initial_wf: dict | None = None
    expected: dict | None = None
    r0: float = 0.0
    contain_tol_deg: float = DEFAULT_CONTAIN_DEG
    seed: int = 0

    @classmethod
    def from_json(cls, doc: dict) -> "Scenario":
        fields = {k: doc[k] for k in
                  ("id", "symbol", "datum", "times", "grid") if k in doc}
        for opt in ("method", "detector", "detect_npoints", "initial_wf",
                    "expected", "r0", "contain_tol_deg", "seed"):
            if opt in doc:
                fields[opt] = doc[opt]
        return cls(**fields)


def _containment(report, predicted: ConicSet, tol_rad: float):
    """Verdict on detected fans vs the predicted set.

    pass: every fan within tolerance (vacuous for empty detection when the
    prediction is empty too); fail: some fan outside, or fans detected for
    an empty prediction; indeterminate: prediction nonempty, nothing
    detected (nothing to contradict).
    """
    if report.is_empty():
        if predicted.is_empty():
            return "pass", "prediction empty and no fans detected"
        return "indeterminate", "prediction nonempty but no fans detected"
    if predicted.is_empty():
        return "fail", f"{len(report.fans)} fans detected, prediction empty"
    bad = [f for f in report.fans
           if not member(predicted, f.direction, ang_tol=tol_rad)]
    if bad:
        return "fail", f"{len(bad)} of {len(report.fans)} fans outside the " \
            f"prediction (tolerance {np.degrees(tol_rad):.2f} deg)"
    return "pass", f"all {len(report.fans)} fans inside the prediction"


def run_scenario(sc: Scenario, out_dir: str | Path | None = None,
                 canonical: bool = False) -> dict:
    """Full pipeline for one scenario; returns the report document.

    Artifacts (evolved fields, transform magnitudes) are written as CSV
    sidecars referenced by relative path when ``out_dir`` is given.
    """
    t_start = time.perf_counter()
    sym = symbol_from_json(sc.symbol)
    F = hamilton_map(sym)
    S = singular_space(F)
    grid = UniformGrid(sym.n, float(sc.grid["extent"]), int(sc.grid["npoints"]))
    u0, wf0_derived = make_datum(grid, sc.datum["family"],
                                 sc.datum.get("params", {}))
    wf0 = conic_set_from_json(sc.initial_wf) if sc.initial_wf \
        else wf0_derived
    tol_rad = np.radians(sc.contain_tol_deg)
    det = dict(sc.detector)
    ang_grid = int(det.get("ang_grid", 256 if sym.n == 1 else 20000))
    n_reg = float(det.get("n_reg", 4.0))

    results = []
    spec = PropagatorSpec(sym, max(sc.times) if sc.times else 0.0, sc.method)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    for t in sc.times:
        t0 = time.perf_counter()
        predicted = predict_propagation(F, S, wf0, t, sc.r0)
        ut = evolve(u0, PropagatorSpec(sym, t, sc.method))
        contraction = ut.norm() / max(u0.norm(), 1e-300)
        u_det = resample(ut, sc.detect_npoints) if sc.detect_npoints else ut
        fld = stft(u_det, det.get("window_width", 1.0), check_aliasing=False)
        report = detect_wf(fld, s=det.get("s"), ang_grid=ang_grid, n_reg=n_reg)
        verdict, reason = _containment(report, predicted, tol_rad)
        entry = {
            "t": t,
            "verdict": verdict,
            "reason": reason,
            "predicted": conic_set_to_json(predicted),
            "fans": [{"dir": f.direction.tolist(), "N_hat": f.n_hat,
                      "s_hat": f.s_hat, "radius": f.radius,
                      "confidence": f.confidence} for f in report.fans],
            "residuals": {"isometry": report.isometry_residual,
                          "contraction": contraction},
            "detector_flags": report.flags,
        }
        if not canonical:
            entry["timing_s"] = time.perf_counter() - t0
        if out_dir is not None:
            tag = f"{sc.id}_t{t:g}".replace(".", "p")
            matrix_to_csv(np.atleast_2d(ut.values), out_dir / f"{tag}_field.csv")
            entry["field_csv"] = f"{tag}_field.csv"
            if fld.values is not None and sym.n == 1:
                matrix_to_csv(np.abs(fld.values).astype(complex),
                              out_dir / f"{tag}_stft_mag.csv")
                entry["stft_csv"] = f"{tag}_stft_mag.csv"
        results.append(entry)

    ledger = results[0]["predicted"].get("ledger") if results else None
    doc = {
        "schema": SCHEMA_VERSION,
        "id": sc.id,
        "contain_tol_deg": sc.contain_tol_deg,
        "ledger": ledger,
        "results": results,
        "pass": all(r["verdict"] == "pass" for r in results),
    }
    if not canonical:
        doc["total_timing_s"] = time.perf_counter() - t_start
    if out_dir is not None:
        dump_json(doc, out_dir / f"{sc.id}_report.json")
    return doc


def bundled_scenario_paths() -> list[Path]:
    here = Path(__file__).parent / "data" / "scenarios"
    return sorted(here.glob("*.json"))


def run_suite(config: str | Path | None = None, id_filter: str = "",
              out_dir: str | Path | None = None,
              canonical: bool = False) -> tuple[dict, int]:
    """Run all scenarios from a file/directory (default: bundled set).

    Returns (aggregate report, exit code); the exit code is nonzero when
    any selected scenario fails.
    """
    if config is None:
        paths = bundled_scenario_paths()
    else:
        p = Path(config)
        paths = sorted(p.glob("*.json")) if p.is_dir() else [p]
    reports = []
    for path in paths:
        doc = load_json(path)
        scenarios = doc if isinstance(doc, list) else [doc]
        for sdoc in scenarios:
            sc = Scenario.from_json(sdoc)
            if id_filter and not sc.id.startswith(id_filter):
                continue
            reports.append(run_scenario(sc, out_dir, canonical))
    agg = {"schema": SCHEMA_VERSION,
           "count": len(reports),
           "pass": all(r["pass"] for r in reports),
           "results": reports}
    if out_dir is not None:
        dump_json(agg, Path(out_dir) / "suite_report.json")
    return agg, 0 if agg["pass"] else 1
