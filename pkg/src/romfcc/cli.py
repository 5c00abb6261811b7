"""Command-line front end.

Subcommands: ``simulate`` (draw a synthetic sample), ``filter-report``
(cellwise screening of a curve file), ``fit-phase1`` (design a monitoring
scheme), ``monitor`` (Phase II scoring), ``mc-study`` (the Monte Carlo
study).  Exit codes: 0 success, 1 validation error (bad flags, files, or
configuration), 2 runtime or numeric error.  All randomness flows from
explicit ``--seed`` flags; nothing reads the clock.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from . import basis as _basis
from . import cellfilter as _cellfilter
from . import dataio as _dataio
from . import mfpca as _mfpca
from . import monitor as _monitor
from . import simulate as _simulate
from . import study as _study
from .errors import NumericError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as validation errors (exit 1)."""

    def error(self, message):
        raise _CliError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="romfcc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"romfcc {__version__}")
    parser.add_argument("--verbose", action="store_true", help="progress on stdout")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        metavar="N",
        help="cap BLAS threads (results do not depend on N)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw a synthetic sample")
    sim.add_argument("--preset", required=True, help="scenario name, e.g. S1-OutE-C3")
    sim.add_argument("--p-tilde", type=float, default=0.05)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True, help="curve CSV to write")
    sim.add_argument("--labels", default=None, help="per-cell ground-truth CSV")
    sim.add_argument("--warp", choices=["corrected", "verbatim"], default="corrected")

    fil = sub.add_parser("filter-report", help="cellwise screening of a curve file")
    fil.add_argument("--in", dest="infile", required=True)
    fil.add_argument("--out", required=True, help="per-cell distance/flag CSV")
    fil.add_argument("--summary", default=None, help="JSON with per-component d_n")
    fil.add_argument("--delta-fil", type=float, default=0.999)
    fil.add_argument("--alpha", type=float, default=0.95)
    fil.add_argument("--seed", type=int, default=0)
    fil.add_argument("--n-basis", type=int, default=10)
    fil.add_argument("--order", type=int, default=4)

    fit = sub.add_parser("fit-phase1", help="design a monitoring scheme")
    fit.add_argument("--train", required=True)
    fit.add_argument("--tune", required=True)
    fit.add_argument("--config", required=True, help="phase I config JSON")
    fit.add_argument("--out", required=True, help="model JSON to write")

    mon = sub.add_parser("monitor", help="phase II scoring against a fitted scheme")
    mon.add_argument("--model", required=True)
    mon.add_argument("--in", dest="infile", required=True)
    mon.add_argument("--out", required=True, help="per-case t2/spe/alarm CSV")

    mc = sub.add_parser("mc-study", help="Monte Carlo FAR/TDR study")
    mc.add_argument("--config", required=True, help="study config JSON")
    mc.add_argument("--out", required=True, help="output directory")
    mc.add_argument(
        "--paper-scale",
        action="store_true",
        help="full-size study (50 runs, 1000/3000/4000 observations)",
    )
    return parser


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {path}")
    return p


def _cmd_simulate(args, say) -> int:
    scenario = _simulate.scenario_preset(
        args.preset, p_tilde=args.p_tilde, n=args.n, seed=args.seed
    )
    if args.warp != "corrected":
        from dataclasses import replace

        scenario = replace(scenario, warp=args.warp)
    say(f"generating {args.n} cases from preset {args.preset}")
    curves, labels = _simulate.generate(scenario)
    _dataio.write_curves(curves, args.out)
    if args.labels:
        _dataio.write_labels(curves.case_ids, labels.expulsion, labels.phase_shift, args.labels)
    say(f"wrote {args.out}")
    return EXIT_OK


def _cmd_filter_report(args, say) -> int:
    curves = _dataio.read_curves(_require_file(args.infile))
    if curves.has_missing:
        raise ValidationError("filter input must be complete (no missing cells)")
    bs = _basis.build_basis(args.order, args.n_basis)
    sample = _mfpca.smooth_sample(curves, bs)
    say(f"screening {sample.n_cases} cases x {sample.n_components} components")
    _, report = _cellfilter.apply_filter(
        sample, variance_target=args.delta_fil, alpha=args.alpha, seed=args.seed
    )
    n, p = report.distances.shape
    frame = pd.DataFrame(
        {
            "case_id": np.repeat(curves.case_ids, p),
            "component": np.tile(np.arange(1, p + 1), n),
            "distance": report.distances.ravel(),
            "flagged": report.flagged.ravel().astype(int),
        }
    )
    frame.to_csv(args.out, index=False)
    if args.summary:
        _dataio.save_json(
            {
                "alpha": report.alpha,
                "d_n": {str(j + 1): float(report.d_n[j]) for j in range(p)},
                "n_components": {str(j + 1): int(report.n_components[j]) for j in range(p)},
                "removed_case_ids": [str(c) for c in report.removed_case_ids],
            },
            args.summary,
        )
    say(f"wrote {args.out}")
    return EXIT_OK


def _cmd_fit_phase1(args, say) -> int:
    config = _monitor.PhaseIConfig.from_dict(_dataio.load_json(_require_file(args.config)))
    train = _dataio.read_curves(_require_file(args.train))
    tune = _dataio.read_curves(_require_file(args.tune))
    say(
        f"fitting phase I ({config.flavor}) on {train.n_cases} training / "
        f"{tune.n_cases} tuning cases"
    )
    scheme = _monitor.fit_phase1(train, tune, config)
    _dataio.save_json(_monitor.scheme_to_dict(scheme), args.out)
    say(f"wrote {args.out}")
    return EXIT_OK


def _cmd_monitor(args, say) -> int:
    scheme = _monitor.scheme_from_dict(_dataio.load_json(_require_file(args.model)))
    batch = _dataio.read_curves(_require_file(args.infile))
    if batch.n_components != scheme.model.p:
        raise NumericError(
            f"model/batch mismatch: model has {scheme.model.p} components, "
            f"batch has {batch.n_components}"
        )
    say(f"monitoring {batch.n_cases} cases")
    res = _monitor.monitor_batch(scheme, batch)
    pd.DataFrame(
        {
            "case_id": res.case_ids,
            "t2": res.t2,
            "spe": res.spe,
            "alarm": res.alarm.astype(int),
        }
    ).to_csv(args.out, index=False, float_format="%.17g")
    say(f"wrote {args.out}")
    return EXIT_OK


def _cmd_mc_study(args, say) -> int:
    doc = _dataio.load_json(_require_file(args.config))
    if args.paper_scale:
        doc = {**doc, **_study.PAPER_SCALE}
    config = _study.StudyConfig.from_dict(doc)
    say(f"running study: {config.runs} runs, presets {list(config.presets)}")
    result = _study.run_study(config, progress=say)
    written = _study.emit_plot_data(result, args.out)
    for path in written:
        say(f"wrote {path}")
    if result.errors:
        print(f"{len(result.errors)} run(s) failed; see manifest.json", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    def say(msg):
        if args.verbose:
            print(msg)

    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_VALIDATION
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(args.threads)
        except ImportError:
            pass

    handlers = {
        "simulate": _cmd_simulate,
        "filter-report": _cmd_filter_report,
        "fit-phase1": _cmd_fit_phase1,
        "monitor": _cmd_monitor,
        "mc-study": _cmd_mc_study,
    }
    try:
        return handlers[args.command](args, say)
    except (ValidationError, _CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # unexpected: runtime class
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
