"""Designing the control charts and monitoring new observations.

Fits the full Phase I pipeline (screen, impute, robust functional PCA,
tuning-set calibration, Sidak-corrected limits) on a contaminated
historical sample, then scores clean and shifted Phase II batches.  The
false alarm rate sits near the design level and shifted batches alarm.

Run:  python demos/04_phase1_phase2_monitoring.py   (about a minute)
"""

import numpy as np

from romfcc import monitor as MO
from romfcc import simulate as S

# Contaminated Phase I data: 5% of cells carry expulsion-shaped outliers.
train, _ = S.generate(S.scenario_preset("S1-OutE-C3", p_tilde=0.05, n=500, seed=7))
tune, _ = S.generate(S.scenario_preset("S1-OutE-C3", p_tilde=0.05, n=1000, seed=8))

config = MO.PhaseIConfig(alpha=0.05, m_imputations=5, seed=9, flavor="robust")
scheme = MO.fit_phase1(train, tune, config)
print(f"retained components: {scheme.n_retained}")
print(f"T2 limit: {scheme.t2_limit:.3f}   SPE limit: {scheme.spe_limit:.4f}")
print(f"per-chart level (Sidak): {scheme.alpha_star:.5f}")

removed = scheme.filter_report.removed_case_ids
print(f"filter masked {scheme.filter_report.flagged.mean():.1%} of training "
      f"cells, removed {len(removed)} cases entirely")

# Phase II: in-control data should alarm at about the design level ...
ic, _ = S.generate(S.scenario_preset("PhaseII-OCE-SL0", n=2000, seed=10))
res = MO.monitor_batch(scheme, ic)
print(f"\nfalse alarm rate on in-control data: {res.alarm.mean():.3f} "
      f"(design level 0.05)")

# ... while expulsion shifts of growing severity alarm more and more.
for sl in (1, 2, 3, 4):
    batch, _ = S.generate(S.scenario_preset(f"PhaseII-OCE-SL{sl}", n=1000, seed=11))
    res = MO.monitor_batch(scheme, batch)
    print(f"severity {sl}: detection rate {res.alarm.mean():.3f} "
          f"(mean T2 {res.t2.mean():7.1f}, mean SPE {res.spe.mean():8.4f})")
