"""What the synthetic profiles look like and how contamination acts.

Prints summary numbers for the generator: the correlation operator's
spectrum, the resistance-curve-shaped mean, and the two contamination
shapes (an expulsion drop after the midpoint and a phase shift of the
peak).  Pipe the printed columns into any plotting tool to look at them.

Run:  python demos/06_simulated_profiles.py
"""

import numpy as np

from romfcc import simulate as S

scenario = S.scenario_preset("S0", n=200, seed=5)
structure = S.build_eigenstructure(scenario)
print("top eigenvalues of the correlation operator:")
print(" ", np.round(structure.eigenvalues, 4))

grid = np.linspace(0, 1, 100)
m = S.mean_m(grid)
print(f"\nmean profile: starts at {m[0]:.4f}, peaks at {m.max():.4f} "
      f"(t = {grid[np.argmax(m)]:.2f}), ends at {m[-1]:.4f}")

for m_e in (0.02, 0.04, 0.08):
    ce = S.contam_e(grid, m_e)
    print(f"expulsion size {m_e}: drop reaches {ce.min():+.4f} at t = 1")

for m_p in (0.2, 0.4):
    cp = S.contam_p(grid, m_p)
    where = grid[np.argmax(np.abs(cp))]
    print(f"phase-shift size {m_p}: sup |C_P| = {np.abs(cp).max():.4f} "
          f"(largest at t = {where:.2f})")

curves, labels = S.generate(S.scenario_preset("S1-OutE-C3", p_tilde=0.1, n=200, seed=5))
print(f"\nsample of {curves.n_cases} cases x {curves.n_components} components "
      f"on {curves.grid.size} points")
print(f"contaminated cells: {labels.expulsion.mean():.1%}")

# a contaminated cell vs its clean counterpart (paired by construction)
clean, _ = S.generate(S.scenario_preset("S0", n=200, seed=5))
i, j = np.argwhere(labels.expulsion)[0]
delta = curves.values[i, j] - clean.values[i, j]
print(f"cell ({i}, {j}): contamination is zero before t=0.5 "
      f"({np.abs(delta[grid <= 0.5]).max():.1e}) and reaches "
      f"{delta.min():+.4f} at t=1")
