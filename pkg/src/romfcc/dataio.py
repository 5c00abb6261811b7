"""Discrete curve containers and file formats.

The exchange format for curve data is a long CSV with header
``case_id,component,t,value`` (UTF-8, '.' decimal separator); components
are numbered from 1 in files and 0-based in memory.  Every case must carry
every component on the same grid.  Fitted monitoring schemes are stored as
JSON with explicit field names; floats use Python's shortest round-trip
representation, which preserves IEEE-754 doubles exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ShapeError, ValidationError


@dataclass(eq=False)
class CurveSet:
    """n cases x p components observed on a common grid.

    values has shape (n, p, m); NaN cells mark missing observations.
    """

    grid: np.ndarray
    values: np.ndarray
    case_ids: np.ndarray = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3:
            raise ShapeError("CurveSet values must have shape (n, p, m)")
        if self.grid.ndim != 1 or self.grid.size != self.values.shape[2]:
            raise ShapeError("grid length must match the last axis of values")
        if self.case_ids is None:
            self.case_ids = np.arange(self.values.shape[0])
        self.case_ids = np.asarray(self.case_ids)
        if self.case_ids.shape != (self.values.shape[0],):
            raise ShapeError("case_ids must have one entry per case")

    @property
    def n_cases(self) -> int:
        return self.values.shape[0]

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())


def write_curves(curves: CurveSet, path) -> None:
    """Write a curve set in long format (one row per observed value)."""
    n, p, m = curves.values.shape
    frame = pd.DataFrame(
        {
            "case_id": np.repeat(curves.case_ids, p * m),
            "component": np.tile(np.repeat(np.arange(1, p + 1), m), n),
            "t": np.tile(curves.grid, n * p),
            "value": curves.values.ravel(),
        }
    )
    # 17 significant digits: IEEE-754 doubles survive the round trip
    frame.to_csv(path, index=False, float_format="%.17g")


def read_curves(path) -> CurveSet:
    """Read a long-format curve CSV back into a CurveSet.

    Cases keep their order of first appearance; every (case, component)
    must be observed on the same grid.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    required = ["case_id", "component", "t", "value"]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ValidationError(f"curve CSV is missing columns: {missing}")
    case_ids, case_pos = np.unique(frame["case_id"].to_numpy(), return_index=True)
    case_ids = case_ids[np.argsort(case_pos, kind="stable")]
    comp = frame["component"].to_numpy()
    components = np.unique(comp)
    if components.min() < 1:
        raise ValidationError("component indices must start at 1")
    p = int(components.max())
    if set(components.tolist()) != set(range(1, p + 1)):
        raise ValidationError("component indices must cover 1..p")
    grid = np.unique(frame["t"].to_numpy())
    n, m = case_ids.size, grid.size
    if len(frame) != n * p * m:
        raise ValidationError(
            "curve CSV is not a complete case x component x grid layout"
        )
    case_index = pd.Categorical(frame["case_id"], categories=case_ids).codes
    t_index = np.searchsorted(grid, frame["t"].to_numpy())
    values = np.full((n, p, m), np.nan)
    values[case_index, comp - 1, t_index] = frame["value"].to_numpy()
    if np.isnan(values).any():
        raise ValidationError("curve CSV has duplicate or missing cells")
    return CurveSet(grid=grid, values=values, case_ids=case_ids)


def write_labels(case_ids, expulsion, phase_shift, path) -> None:
    """Per-cell ground-truth contamination indicators, long format."""
    expulsion = np.asarray(expulsion, dtype=bool)
    phase_shift = np.asarray(phase_shift, dtype=bool)
    n, p = expulsion.shape
    frame = pd.DataFrame(
        {
            "case_id": np.repeat(np.asarray(case_ids), p),
            "component": np.tile(np.arange(1, p + 1), n),
            "contam_e": expulsion.ravel().astype(int),
            "contam_p": phase_shift.ravel().astype(int),
        }
    )
    frame.to_csv(path, index=False)


def save_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
