"""Versioned JSON/CSV interchange for symbols, matrices and conic sets.

Complex matrices travel as nested [re, im] pairs in JSON and as "re+imj"
text in CSV (row-major).  Every JSON document carries "schema": 1.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .conic import ConicAtom, ConicSet
from .symplectic import QuadraticSymbol

SCHEMA_VERSION = 1


def complex_matrix_to_json(M: np.ndarray) -> list:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def complex_matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def symbol_to_json(sym: QuadraticSymbol) -> dict:
    return {"schema": SCHEMA_VERSION, "n": sym.n,
            "Q": complex_matrix_to_json(sym.Q)}


def symbol_from_json(data: dict) -> QuadraticSymbol:
    return QuadraticSymbol(int(data["n"]), complex_matrix_from_json(data["Q"]))


def matrix_to_csv(M: np.ndarray, path: str | Path) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    lines = [",".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row)
             for row in M]
    Path(path).write_text("\n".join(lines) + "\n")


def matrix_from_csv(path: str | Path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().strip().splitlines():
        rows.append([complex(tok) for tok in line.split(",")])
    return np.array(rows)


def conic_set_to_json(conic: ConicSet) -> dict:
    atoms = []
    for a in conic.atoms:
        if a.kind == "subspace":
            atoms.append({"kind": "subspace",
                          "basis": [list(map(float, col)) for col in a.basis.T]})
        else:
            atoms.append({"kind": "fan",
                          "dirs": [list(map(float, d)) for d in a.dirs],
                          "radius": float(a.radius)})
    doc = {"schema": SCHEMA_VERSION, "dim": conic.dim,
           "order": conic.order, "atoms": atoms}
    if conic.ledger is not None:
        led = conic.ledger
        doc["ledger"] = {"rule": led.rule, "orders": led.orders, "mu": led.mu,
                         "threshold": led.threshold,
                         "output_order": led.output_order}
    return doc


def conic_set_from_json(data: dict) -> ConicSet:
    atoms = []
    for a in data.get("atoms", []):
        if a["kind"] == "subspace":
            atoms.append(ConicAtom("subspace",
                                   basis=np.array(a["basis"], dtype=float).T))
        elif a["kind"] == "fan":
            atoms.append(ConicAtom("fan", dirs=np.array(a["dirs"], dtype=float),
                                   radius=float(a.get("radius", 0.0))))
        else:
            raise ValueError(f"unknown atom kind {a['kind']!r}")
    return ConicSet(int(data["dim"]), tuple(atoms), data.get("order"))


def dump_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
