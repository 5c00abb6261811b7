"""Monte Carlo study runner: generate, fit, monitor, score FAR/TDR.

One run draws a Phase I sample (training plus tuning) per contamination
preset, fits every requested method on the same data, then scores shared
Phase II batches across out-of-control types and severity levels.  Random
streams are derived so that all methods within a run see identical data,
Phase I samples are coupled draw-for-draw across contamination levels, and
Phase II batches are coupled across severities; rate differences are
therefore attributable to methods and severities, not sampling noise.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from . import mfpca as _mfpca
from . import monitor as _monitor
from . import simulate as _simulate
from ._utils import derive_seed
from .errors import ValidationError

#: methods the harness knows how to fit: name -> model flavor
METHOD_FLAVORS = {"RoMFCC": "robust", "MFCC": "classical"}

#: desk-scale defaults; --paper-scale restores the full-size study
PAPER_SCALE = {"runs": 50, "n_train": 1000, "n_tune": 3000, "n_phase2": 4000}


@dataclass(frozen=True)
class StudyConfig:
    runs: int = 10
    n_train: int = 500
    n_tune: int = 1000
    n_phase2: int = 1000
    p_tilde: float = 0.05
    methods: tuple = ("RoMFCC", "MFCC")
    presets: tuple = ("S0",)
    oc_types: tuple = ("OCE", "OCP")
    severities: tuple = (0, 1, 2, 3, 4)
    alpha: float = 0.05
    base_seed: int = 0
    m_imputations: int = 5
    delta_fil: float = 0.999
    delta_imp: float = 0.999
    delta_mon: float = 0.7
    limits: str = "parametric"
    n_basis: int = 10
    order: int = 4
    filter_alpha: float = 0.95

    def __post_init__(self):
        if self.runs < 1:
            raise ValidationError("runs must be >= 1")
        for name in ("n_train", "n_tune", "n_phase2"):
            if getattr(self, name) < 10:
                raise ValidationError(f"{name} must be >= 10")
        unknown = [m for m in self.methods if m not in METHOD_FLAVORS]
        if unknown:
            raise ValidationError(
                f"unknown methods {unknown}; available: {sorted(METHOD_FLAVORS)}"
            )
        for preset in self.presets:
            _simulate.scenario_preset(preset, self.p_tilde, n=10)
        for oc in self.oc_types:
            if oc not in ("OCE", "OCP"):
                raise ValidationError(f"unknown OC type {oc!r}")
        for sl in self.severities:
            if sl not in (0, 1, 2, 3, 4):
                raise ValidationError(f"severity must be in 0..4, got {sl}")

    @classmethod
    def from_dict(cls, doc: dict) -> "StudyConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown study config keys: {sorted(unknown)}")
        doc = dict(doc)
        for key in ("methods", "presets", "oc_types", "severities"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def phase1_config(self, method: str, seed: int) -> _monitor.PhaseIConfig:
        return _monitor.PhaseIConfig(
            delta_fil=self.delta_fil,
            delta_imp=self.delta_imp,
            delta_mon=self.delta_mon,
            alpha=self.alpha,
            m_imputations=self.m_imputations,
            seed=seed,
            flavor=METHOD_FLAVORS[method],
            limits=self.limits,
            n_basis=self.n_basis,
            order=self.order,
            filter_alpha=self.filter_alpha,
        )


@dataclass(eq=False)
class StudyResult:
    """Per-(method, preset, OC, severity, run) alarm rates."""

    config: StudyConfig
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame.from_records(
            self.records,
            columns=["method", "preset", "oc", "sl", "run", "kind", "rate"],
        )

    def aggregate(self) -> pd.DataFrame:
        """Mean and standard error of the rate over runs."""
        frame = self.to_frame()
        grouped = frame.groupby(["method", "preset", "oc", "sl"], sort=True)["rate"]
        out = grouped.agg(["mean", "sem", "count"]).reset_index()
        out = out.rename(columns={"mean": "mean_rate", "sem": "stderr", "count": "runs"})
        out["stderr"] = out["stderr"].fillna(0.0)
        return out

    def rate(self, method: str, preset: str, oc: str, sl: int) -> float:
        frame = self.to_frame()
        sel = frame[
            (frame.method == method)
            & (frame.preset == preset)
            & (frame.oc == oc)
            & (frame.sl == sl)
        ]
        return float(sel.rate.mean())


def far_tdr(alarms, is_oc: bool) -> float:
    """Alarm fraction: FAR on in-control batches, TDR on out-of-control ones."""
    alarms = np.asarray(alarms, dtype=bool)
    if alarms.size == 0:
        raise ValidationError("cannot score an empty alarm vector")
    return float(alarms.mean())


def run_study(config: StudyConfig, progress=None) -> StudyResult:
    """Execute the full study grid.

    Per-run fit failures are recorded in `result.errors` and skipped;
    they do not abort the study.
    """
    result = StudyResult(config=config)
    bs = None
    for run in range(config.runs):
        # Phase II batches are shared by every preset and method in this run
        batches = {}
        for oc in config.oc_types:
            seed_p2 = derive_seed(config.base_seed, "phase2", oc, run)
            for sl in config.severities:
                scenario = _simulate.scenario_preset(
                    f"PhaseII-{oc}-SL{sl}", n=config.n_phase2, seed=seed_p2
                )
                curves, _ = _simulate.generate(scenario)
                if bs is None:
                    from . import basis as _basis

                    bs = _basis.build_basis(config.order, config.n_basis)
                batches[(oc, sl)] = _mfpca.smooth_sample(curves, bs)
        for preset in config.presets:
            train_scn = _simulate.scenario_preset(
                preset,
                config.p_tilde,
                n=config.n_train,
                seed=derive_seed(config.base_seed, "train", run),
            )
            tune_scn = replace(
                train_scn, n=config.n_tune, seed=derive_seed(config.base_seed, "tune", run)
            )
            train, _ = _simulate.generate(train_scn)
            tune, _ = _simulate.generate(tune_scn)
            for method in config.methods:
                cfg = config.phase1_config(
                    method, seed=derive_seed(config.base_seed, "fit", method, run)
                )
                try:
                    scheme = _monitor.fit_phase1(train, tune, cfg)
                except Exception as exc:  # recorded, not fatal to the study
                    result.errors.append(
                        {"method": method, "preset": preset, "run": run, "error": str(exc)}
                    )
                    continue
                for (oc, sl), batch in batches.items():
                    res = _monitor.monitor_sample(scheme, batch)
                    rate = far_tdr(res.alarm, is_oc=sl != 0)
                    result.records.append(
                        {
                            "method": method,
                            "preset": preset,
                            "oc": oc,
                            "sl": sl,
                            "run": run,
                            "kind": "FAR" if sl == 0 else "TDR",
                            "rate": rate,
                        }
                    )
                if progress is not None:
                    progress(f"run {run} preset {preset} method {method} done")
    return result


def _git_describe() -> str | None:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.TimeoutExpired):
        return None
    return out.stdout.strip() or None


def emit_plot_data(result: StudyResult, outdir) -> list[str]:
    """One CSV per (preset, OC type) plus a study manifest.

    Each CSV has columns method, SL, mean_rate, stderr with one row per
    method and severity; re-emission of the same result is byte-identical.
    """
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    agg = result.aggregate()
    written = []
    for preset in result.config.presets:
        for oc in result.config.oc_types:
            sel = agg[(agg.preset == preset) & (agg.oc == oc)]
            rows = sel.sort_values(["method", "sl"])[
                ["method", "sl", "mean_rate", "stderr"]
            ].rename(columns={"sl": "SL"})
            path = outdir / f"{preset}_{oc}.csv"
            rows.to_csv(path, index=False)
            written.append(str(path))
    manifest = {
        "config": asdict(result.config),
        "git_describe": _git_describe(),
        "seed_derivation": {
            "train": "seed(base_seed, 'train', run)",
            "tune": "seed(base_seed, 'tune', run)",
            "phase2": "seed(base_seed, 'phase2', oc, run)",
            "fit": "seed(base_seed, 'fit', method, run)",
        },
        "n_records": len(result.records),
        "errors": result.errors,
    }
    path = outdir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    written.append(str(path))
    return written
