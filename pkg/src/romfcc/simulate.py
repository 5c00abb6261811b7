"""Synthetic multivariate profile generator for the Monte Carlo study.

Ten correlated functional components on [0, 1] observed at 100 equally
spaced points: within-component correlation follows a Bessel kernel of the
first kind, cross-component blocks reuse the kernel eigenpairs damped by
1/(1 + |l - j|), and sample paths combine a resistance-curve-shaped mean,
a Karhunen-Loeve expansion truncated at ten terms, white observation
noise, and two optional contamination shapes: an expulsion drop after the
domain midpoint and a phase shift built from a piecewise-linear time warp.
Case- and component-level Bernoulli switches decide which cells are
contaminated; per-cell ground truth labels are recorded.

The published piecewise warp has jump discontinuities at its breakpoints
(+-0.1); the corrected form used by default keeps the same slopes and
endpoints but restores continuity.  The verbatim form stays available via
``warp="verbatim"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from ._utils import seed_sequence
from .dataio import CurveSet
from .errors import (
    ConstructionError,
    InvalidConfigurationError,
    InvalidSeverityError,
    ValidationError,
)

#: observation grid: 100 equally spaced points on [0, 1]
OBS_GRID_SIZE = 100

#: dense grid used to discretize the correlation operator
DENSE_GRID_SIZE = 200

#: series truncation for the Bessel kernel evaluation
_BESSEL_MAX_TERMS = 60
_BESSEL_TOL = 1e-14


@dataclass(frozen=True)
class SimScenario:
    """Full parameterization of one generating condition."""

    n: int
    seed: int = 0
    p: int = 10
    n_terms: int = 10          # Karhunen-Loeve truncation
    rho: float = 0.125         # Bessel correlation length
    nu: float = 0.0            # Bessel order
    sigma: float = 0.01        # process scale
    sigma_e: float = 0.0025    # observation noise sd
    p_ca_e: float = 0.0        # case-level expulsion probability
    p_ca_p: float = 0.0        # case-level phase-shift probability
    p_ce_e: float = 0.0        # component-level expulsion probability
    p_ce_p: float = 0.0        # component-level phase-shift probability
    m_e: float = 0.0           # expulsion size
    m_p: float = 0.0           # phase-shift size
    warp: str = "corrected"
    name: str = ""

    def __post_init__(self):
        for attr in ("p_ca_e", "p_ca_p", "p_ce_e", "p_ce_p"):
            v = getattr(self, attr)
            if not (0.0 <= v <= 1.0):
                raise InvalidConfigurationError(f"{attr} must lie in [0, 1], got {v}")
        if self.m_e < 0 or self.m_p < 0:
            raise InvalidConfigurationError("contamination sizes must be >= 0")
        if self.m_p >= 0.55:
            raise InvalidSeverityError("phase-shift size must be < 0.55")
        if self.warp not in ("corrected", "verbatim"):
            raise InvalidConfigurationError("warp must be 'corrected' or 'verbatim'")
        if self.n < 1:
            raise InvalidConfigurationError("n must be >= 1")


@dataclass(frozen=True, eq=False)
class EigenStructure:
    """Eigenpairs of the assembled correlation operator on the dense grid."""

    grid: np.ndarray          # (m,)
    eigenvalues: np.ndarray   # (n_terms,)
    eigenfunctions: np.ndarray  # (n_terms, p, m)
    eta: np.ndarray           # within-block eigenvalues
    theta: np.ndarray         # within-block eigenfunctions, (n_k, m)


def bessel_corr(z, rho: float = 0.125, nu: float = 0.0):
    """Bessel correlation of the first kind.

    (|z|/(2 rho))^nu * sum_j (-(|z|/rho)^2 / 4)^j / (j! Gamma(nu+j+1)),
    evaluated as a series to absolute tolerance 1e-14.
    """
    z = np.asarray(z, dtype=float)
    x = np.abs(z) / rho
    prefactor = (x / 2.0) ** nu if nu != 0.0 else np.ones_like(x)
    q = -(x**2) / 4.0
    term = np.ones_like(x) / math.gamma(nu + 1.0)
    total = term.copy()
    for j in range(1, _BESSEL_MAX_TERMS + 1):
        term = term * q / (j * (nu + j))
        total += term
        if np.all(np.abs(term) < _BESSEL_TOL):
            break
    out = prefactor * total
    return float(out) if np.isscalar(z) or out.ndim == 0 else out


@lru_cache(maxsize=8)
def _cached_eigenstructure(p, n_terms, rho, nu, m_dense) -> EigenStructure:
    grid = np.linspace(0.0, 1.0, m_dense)
    w = np.full(m_dense, grid[1] - grid[0])
    w[0] /= 2.0
    w[-1] /= 2.0
    sqrt_w = np.sqrt(w)

    kernel = bessel_corr(grid[:, None] - grid[None, :], rho, nu)
    a0 = sqrt_w[:, None] * kernel * sqrt_w[None, :]
    eta, u = np.linalg.eigh((a0 + a0.T) / 2.0)
    eta, u = eta[::-1], u[:, ::-1]
    theta = (u / sqrt_w[:, None]).T  # rows integrate to unit square norm

    # cross blocks reuse the kernel eigenpairs damped by 1 / (1 + |l - j|)
    eta_pos = np.maximum(eta, 0.0)
    recon = (theta.T * eta_pos) @ theta
    big = np.empty((p * m_dense, p * m_dense))
    for l in range(p):
        for j in range(p):
            block = kernel if l == j else recon / (1.0 + abs(l - j))
            big[l * m_dense : (l + 1) * m_dense, j * m_dense : (j + 1) * m_dense] = block

    sw = np.tile(sqrt_w, p)
    a = sw[:, None] * big * sw[None, :]
    lam, vec = np.linalg.eigh((a + a.T) / 2.0)
    lam, vec = lam[::-1], vec[:, ::-1]
    if lam[-1] < -1e-8 * max(lam[0], 1.0):
        raise ConstructionError(
            f"assembled correlation operator has eigenvalue {lam[-1]:.3e}"
        )
    lam = np.maximum(lam[:n_terms], 0.0)
    psi = (vec[:, :n_terms] / sw[:, None]).T.reshape(n_terms, p, m_dense)
    return EigenStructure(
        grid=grid, eigenvalues=lam, eigenfunctions=psi, eta=eta, theta=theta
    )


def build_eigenstructure(scenario: SimScenario) -> EigenStructure:
    """Eigenpairs of the scenario's correlation operator (cached per geometry)."""
    return _cached_eigenstructure(
        scenario.p, scenario.n_terms, scenario.rho, scenario.nu, DENSE_GRID_SIZE
    )


def tabulate_eigenfunctions(structure: EigenStructure, grid) -> np.ndarray:
    """Eigenfunctions interpolated from the dense grid onto `grid`."""
    grid = np.asarray(grid, dtype=float)
    n_terms, p, _ = structure.eigenfunctions.shape
    out = np.empty((n_terms, p, grid.size))
    for i in range(n_terms):
        for j in range(p):
            out[i, j] = CubicSpline(structure.grid, structure.eigenfunctions[i, j])(grid)
    return out


def mean_m(t):
    """Smooth resistance-curve-shaped mean function."""
    t = np.asarray(t, dtype=float)
    out = (
        0.2074
        + 0.3117 * np.exp(-371.4 * t)
        + 0.5284 * (1.0 - np.exp(0.8217 * t))
        - 423.3 * (1.0 + np.tanh(-26.15 * (t + 0.1715)))
    )
    return float(out) if out.ndim == 0 else out


def contam_e(t, m_e: float):
    """Expulsion shape: zero before the midpoint, linear drop after."""
    if m_e < 0:
        raise InvalidConfigurationError("expulsion size must be >= 0")
    t = np.asarray(t, dtype=float)
    out = np.minimum(0.0, -2.0 * m_e * (t - 0.5))
    return float(out) if out.ndim == 0 else out


def warp_h(t, m_p: float, mode: str = "corrected"):
    """Piecewise-linear time warp driving the phase-shift contamination.

    Identity up to 0.05, compressed slope (0.55 - m_p)/0.55 up to 0.6,
    then slope (0.4 + m_p)/0.4 reaching h(1) = 1.  The corrected middle
    branch 0.05 + (t - 0.05)(0.55 - m_p)/0.55 makes the warp continuous;
    the verbatim branch keeps the published intercept, which jumps by
    -0.1 at t = 0.05 and +0.1 at t = 0.6.
    """
    if not (0.0 <= m_p < 0.55):
        raise InvalidSeverityError(f"phase-shift size must lie in [0, 0.55), got {m_p}")
    if mode not in ("corrected", "verbatim"):
        raise InvalidConfigurationError("mode must be 'corrected' or 'verbatim'")
    t = np.asarray(t, dtype=float)
    slope_mid = (0.55 - m_p) / 0.55
    slope_late = (0.4 + m_p) / 0.4
    if mode == "corrected":
        mid = 0.05 + (t - 0.05) * slope_mid
    else:
        mid = slope_mid * t - (1.0 + slope_mid) * 0.05
    out = np.where(
        t <= 0.05, t, np.where(t <= 0.6, mid, slope_late * t + 1.0 - slope_late)
    )
    return float(out) if out.ndim == 0 else out


def contam_p(t, m_p: float, mode: str = "corrected"):
    """Phase-shift shape: m(h(t)) - m(t) - (m_p / 20) t."""
    t = np.asarray(t, dtype=float)
    out = mean_m(warp_h(t, m_p, mode)) - mean_m(t) - (m_p / 20.0) * t
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ContaminationLabels:
    """Realized per-cell contamination indicators."""

    expulsion: np.ndarray    # (n, p) bool
    phase_shift: np.ndarray  # (n, p) bool


def generate(scenario: SimScenario) -> tuple[CurveSet, ContaminationLabels]:
    """Draw a sample from the scenario.

    Every case consumes its own random stream derived from (seed, case
    index) in a fixed order (scores, case switches, component switches,
    noise), so scenarios sharing a seed are coupled draw-for-draw: samples
    generated under different contamination sizes differ only through the
    contamination terms.
    """
    structure = build_eigenstructure(scenario)
    grid = np.linspace(0.0, 1.0, OBS_GRID_SIZE)
    psi = tabulate_eigenfunctions(structure, grid)  # (L, p, m)
    sqrt_lam = np.sqrt(structure.eigenvalues)
    m_vals = mean_m(grid)
    ce_vals = contam_e(grid, scenario.m_e)
    cp_vals = contam_p(grid, scenario.m_p, scenario.warp) if scenario.m_p > 0 else np.zeros_like(grid)

    n, p, m = scenario.n, scenario.p, grid.size
    psi_flat = psi.reshape(scenario.n_terms, p * m)
    values = np.empty((n, p, m))
    lab_e = np.empty((n, p), dtype=bool)
    lab_p = np.empty((n, p), dtype=bool)
    children = seed_sequence(scenario.seed, "generate").spawn(n)
    for i in range(n):
        rng = np.random.default_rng(children[i])
        xi = rng.standard_normal(scenario.n_terms) * sqrt_lam
        u_case = rng.random(2)
        u_comp_e = rng.random(p)
        u_comp_p = rng.random(p)
        eps = rng.standard_normal((p, m)) * scenario.sigma_e
        b_ca_e = u_case[0] < scenario.p_ca_e
        b_ca_p = u_case[1] < scenario.p_ca_p
        cell_e = b_ca_e & (u_comp_e < scenario.p_ce_e)
        cell_p = b_ca_p & (u_comp_p < scenario.p_ce_p)
        z = (xi @ psi_flat).reshape(p, m)
        x = m_vals + z * scenario.sigma + eps
        x[cell_e] += ce_vals
        x[cell_p] += cp_vals
        values[i] = x
        lab_e[i] = cell_e
        lab_p[i] = cell_p
    curves = CurveSet(grid=grid, values=values, case_ids=np.arange(n))
    return curves, ContaminationLabels(expulsion=lab_e, phase_shift=lab_p)


# ---------------------------------------------------------------------------
# preset tables

_PHASE1_ME = {"C1": 0.04, "C2": 0.06, "C3": 0.08}
_PHASE1_MP = {"C1": 0.40, "C2": 0.45, "C3": 0.50}
_PHASE1_ME_CASEWISE = {"C1": 0.02, "C2": 0.03, "C3": 0.04}
_PHASE1_MP_CASEWISE = {"C1": 0.20, "C2": 0.30, "C3": 0.40}
_PHASE2_ME = {0: 0.0, 1: 0.01, 2: 0.02, 3: 0.03, 4: 0.04}
_PHASE2_MP = {0: 0.0, 1: 0.20, 2: 0.27, 3: 0.34, 4: 0.40}


def preset_names() -> list[str]:
    names = ["S0"]
    for scen in ("S1", "S2"):
        for out in ("OutE", "OutP"):
            names += [f"{scen}-{out}-C{i}" for i in (1, 2, 3)]
    for oc in ("OCE", "OCP"):
        names += [f"PhaseII-{oc}-SL{s}" for s in range(5)]
    return names


def scenario_preset(
    name: str, p_tilde: float = 0.05, n: int = 100, seed: int = 0
) -> SimScenario:
    """Scenario from the study's parameter tables.

    Phase I: S0 is clean; S1 plants cellwise outliers (case switches always
    on, component switches Bernoulli(p_tilde)); S2 plants casewise outliers
    (case switches Bernoulli(p_tilde), component switches always on); C1-C3
    grade the contamination size.  Phase II: OCE / OCP shift every cell of
    every case at severities SL0-SL4.
    """
    if not (0.0 <= p_tilde <= 1.0):
        raise ValidationError("p_tilde must lie in [0, 1]")
    base = SimScenario(n=n, seed=seed, name=name)
    if name == "S0":
        return base
    parts = name.split("-")
    if len(parts) == 3 and parts[0] in ("S1", "S2") and parts[2] in ("C1", "C2", "C3"):
        scen, out, level = parts
        if out not in ("OutE", "OutP"):
            raise ValidationError(f"unknown preset {name!r}")
        if scen == "S1":
            probs = dict(p_ca_e=1.0, p_ca_p=1.0)
            probs["p_ce_e"] = p_tilde if out == "OutE" else 0.0
            probs["p_ce_p"] = p_tilde if out == "OutP" else 0.0
            m_e = _PHASE1_ME[level] if out == "OutE" else 0.0
            m_p = _PHASE1_MP[level] if out == "OutP" else 0.0
        else:
            probs = dict(p_ce_e=1.0, p_ce_p=1.0)
            probs["p_ca_e"] = p_tilde if out == "OutE" else 0.0
            probs["p_ca_p"] = p_tilde if out == "OutP" else 0.0
            m_e = _PHASE1_ME_CASEWISE[level] if out == "OutE" else 0.0
            m_p = _PHASE1_MP_CASEWISE[level] if out == "OutP" else 0.0
        return replace(base, m_e=m_e, m_p=m_p, **probs)
    if len(parts) == 3 and parts[0] == "PhaseII" and parts[2].startswith("SL"):
        oc = parts[1]
        try:
            sl = int(parts[2][2:])
            if oc == "OCE":
                return replace(
                    base, p_ca_e=1.0, p_ce_e=1.0, m_e=_PHASE2_ME[sl]
                )
            if oc == "OCP":
                return replace(
                    base, p_ca_p=1.0, p_ce_p=1.0, m_p=_PHASE2_MP[sl]
                )
        except KeyError:
            pass
    raise ValidationError(
        f"unknown preset {name!r}; valid presets: {', '.join(preset_names())}"
    )
