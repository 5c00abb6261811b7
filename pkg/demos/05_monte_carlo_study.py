"""A small FAR/TDR study comparing the robust chart with its classical twin.

Runs the study harness at a deliberately tiny scale (3 runs) so it
finishes in a few minutes; the full desk-scale and paper-scale studies are
one config change away (see README).  Emits the per-panel CSVs and the
manifest into demos/output/.

Run:  python demos/05_monte_carlo_study.py
"""

from pathlib import Path

from romfcc import study as ST

config = ST.StudyConfig(
    runs=3,
    n_train=300,
    n_tune=600,
    n_phase2=500,
    p_tilde=0.05,
    methods=("RoMFCC", "MFCC"),
    presets=("S0", "S1-OutE-C3"),
    oc_types=("OCE",),
    severities=(0, 1, 2, 3, 4),
    base_seed=99,
)

result = ST.run_study(config, progress=print)
table = result.aggregate()
print("\nmean FAR (SL=0) / TDR (SL>0):")
print(table.pivot_table(index=["preset", "sl"], columns="method", values="mean_rate").round(3))

outdir = Path(__file__).parent / "output"
written = ST.emit_plot_data(result, outdir)
print("\nwrote:")
for path in written:
    print(" ", path)
