"""Clamped B-spline bases on [0, 1]: evaluation, quadrature, and smoothing.

The whole pipeline represents curves by coefficient vectors in a single
B-spline system with uniform interior knots.  This module owns the basis
geometry: the Gram matrix of pairwise basis inner products (computed by
composite Gauss-Legendre quadrature, exact for products of the spline
polynomials), its symmetric square root, the second-derivative roughness
penalty, and penalized least-squares smoothing with optional GCV selection
of the penalty weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BSpline

from .errors import (
    DegenerateBasisError,
    InvalidConfigurationError,
    RankDeficientFitError,
    ShapeError,
    ValidationError,
)

#: log-spaced GCV candidate grid for the smoothing parameter
GCV_GRID = np.logspace(-10.0, 2.0, 25)

#: Gauss-Legendre nodes per inter-knot interval (exact to polynomial degree 9)
_QUAD_NODES = 5

#: relative eigenvalue threshold below which a Gram matrix counts as singular
_GRAM_EIG_FLOOR = 1e-12


def uniform_grid(n_points: int) -> np.ndarray:
    """n_points equally spaced abscissae spanning [0, 1]."""
    if n_points < 2:
        raise InvalidConfigurationError("a grid needs at least 2 points")
    return np.linspace(0.0, 1.0, n_points)


def check_grid(points) -> np.ndarray:
    """Validate an evaluation grid: 1-d, length >= 2, strictly increasing, inside [0, 1]."""
    g = np.asarray(points, dtype=float)
    if g.ndim != 1:
        raise ShapeError(f"grid must be 1-d, got shape {g.shape}")
    if g.size < 2:
        raise ValidationError("grid needs at least 2 points")
    if not np.all(np.diff(g) > 0):
        raise ValidationError("grid points must be strictly increasing")
    if g[0] < -1e-12 or g[-1] > 1 + 1e-12:
        raise ValidationError("grid points must lie in [0, 1]")
    return np.clip(g, 0.0, 1.0)


@dataclass(frozen=True)
class BasisSystem:
    """A clamped B-spline basis on [0, 1].

    Parameters
    ----------
    order : int
        Spline order (degree + 1); 4 gives cubic splines.
    interior_knots : tuple of float
        Strictly increasing knots in (0, 1).
    penalty_order : int, default=2
        Derivative order of the roughness penalty.
    """

    order: int
    interior_knots: tuple
    penalty_order: int = 2

    def __post_init__(self):
        if self.order < 2:
            raise InvalidConfigurationError("spline order must be >= 2")
        knots = tuple(float(k) for k in self.interior_knots)
        if any(not (0.0 < k < 1.0) for k in knots):
            raise InvalidConfigurationError("interior knots must lie in (0, 1)")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise InvalidConfigurationError("interior knots must be strictly increasing")
        object.__setattr__(self, "interior_knots", knots)

    @property
    def n_basis(self) -> int:
        return self.order + len(self.interior_knots)

    @property
    def degree(self) -> int:
        return self.order - 1

    @property
    def knot_vector(self) -> np.ndarray:
        """Full clamped knot vector (boundary knots repeated `order` times)."""
        return np.r_[
            np.zeros(self.order), np.asarray(self.interior_knots), np.ones(self.order)
        ]

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knot abscissae delimiting the polynomial pieces."""
        return np.r_[0.0, np.asarray(self.interior_knots), 1.0]


def build_basis(order: int, n_basis: int, penalty_order: int = 2) -> BasisSystem:
    """Basis with `n_basis` functions and uniform interior knots.

    With ``n_basis == order`` the domain is a single polynomial segment;
    otherwise the ``n_basis - order`` interior knots sit at i/(n_basis-order+1).
    """
    if order < 2:
        raise InvalidConfigurationError("spline order must be >= 2")
    if n_basis < order:
        raise InvalidConfigurationError(
            f"n_basis must be >= order, got n_basis={n_basis} < order={order}"
        )
    n_interior = n_basis - order
    knots = tuple((i + 1) / (n_interior + 1) for i in range(n_interior))
    return BasisSystem(order=order, interior_knots=knots, penalty_order=penalty_order)


def eval_basis(basis: BasisSystem, grid, derivative: int = 0) -> np.ndarray:
    """Design matrix of basis (or derivative) values, shape (len(grid), n_basis).

    Rows of the 0th-derivative matrix sum to one (B-spline partition of
    unity) and all entries are nonnegative.
    """
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1:
        raise ShapeError(f"grid must be 1-d, got shape {x.shape}")
    if x.size and (x.min() < -1e-12 or x.max() > 1 + 1e-12):
        raise ValidationError("evaluation points must lie in [0, 1]")
    x = np.clip(x, 0.0, 1.0)
    if derivative == 0:
        return BSpline.design_matrix(
            x, basis.knot_vector, basis.degree, extrapolate=False
        ).toarray()
    spl = BSpline(basis.knot_vector, np.eye(basis.n_basis), basis.degree)
    return spl.derivative(derivative)(x)


def _quadrature_rule(basis: BasisSystem) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights over the inter-knot intervals."""
    bp = basis.breakpoints
    x_ref, w_ref = leggauss(_QUAD_NODES)
    mid = (bp[:-1] + bp[1:]) / 2.0
    half = (bp[1:] - bp[:-1]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x_ref).ravel()
    weights = (half[:, None] * w_ref).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Pairwise basis inner products with symmetric square root and inverse root."""

    W: np.ndarray
    W_half: np.ndarray
    W_half_inv: np.ndarray

    @classmethod
    def from_w(cls, W: np.ndarray) -> "GramMatrix":
        """Build the root pair from a symmetric positive definite W."""
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ShapeError("W must be square")
        eigval, eigvec = np.linalg.eigh((W + W.T) / 2.0)
        if eigval[0] < _GRAM_EIG_FLOOR * eigval[-1]:
            raise DegenerateBasisError(
                f"Gram matrix numerically singular: min/max eigenvalue "
                f"{eigval[0]:.3e}/{eigval[-1]:.3e}"
            )
        root = np.sqrt(eigval)
        W_half = (eigvec * root) @ eigvec.T
        W_half_inv = (eigvec / root) @ eigvec.T
        return cls(W=W, W_half=W_half, W_half_inv=W_half_inv)


@lru_cache(maxsize=32)
def gram(basis: BasisSystem) -> GramMatrix:
    """Gram matrix of the basis under the L2([0,1]) inner product.

    Quadrature is exact for the polynomial products involved, so W agrees
    with the analytic inner products up to rounding.
    """
    nodes, weights = _quadrature_rule(basis)
    phi = eval_basis(basis, nodes)
    W = phi.T @ (weights[:, None] * phi)
    return GramMatrix.from_w((W + W.T) / 2.0)


@lru_cache(maxsize=32)
def penalty_matrix(basis: BasisSystem) -> np.ndarray:
    """Gram matrix of `penalty_order`-th basis derivatives (roughness penalty)."""
    nodes, weights = _quadrature_rule(basis)
    d = eval_basis(basis, nodes, derivative=basis.penalty_order)
    P = d.T @ (weights[:, None] * d)
    return (P + P.T) / 2.0


@lru_cache(maxsize=64)
def _design_uniform(basis: BasisSystem, n_points: int) -> np.ndarray:
    """Cached design matrix on the canonical uniform grids."""
    return eval_basis(basis, uniform_grid(n_points))


def design_matrix(basis: BasisSystem, grid: np.ndarray) -> np.ndarray:
    """eval_basis with caching for uniform grids (the pipeline's hot path)."""
    g = np.asarray(grid, dtype=float)
    m = g.size
    if m >= 2 and np.allclose(g, np.linspace(0.0, 1.0, m), rtol=0.0, atol=1e-15):
        return _design_uniform(basis, m)
    return eval_basis(basis, g)


def smooth_curves(values, grid, basis: BasisSystem, lam="gcv"):
    """Penalized least-squares fit of discretely observed curves.

    Parameters
    ----------
    values : array-like, shape (..., m)
        Observations on `grid`; any number of leading batch dimensions.
    grid : array-like, shape (m,)
        Common abscissae in [0, 1].
    basis : BasisSystem
    lam : float or "gcv"
        Penalty weight; "gcv" selects one per curve by generalized
        cross-validation over `GCV_GRID`.

    Returns
    -------
    coefs : ndarray, shape (..., n_basis)
    lambdas : ndarray, shape (...)
        The penalty weight used for each curve.
    """
    g = check_grid(grid)
    y = np.asarray(values, dtype=float)
    if y.shape[-1] != g.size:
        raise ShapeError(
            f"values last axis ({y.shape[-1]}) must match grid length ({g.size})"
        )
    batch_shape = y.shape[:-1]
    m = g.size
    K = basis.n_basis
    Y = y.reshape(-1, m).T  # (m, n_curves)
    phi = design_matrix(basis, g)
    G0 = phi.T @ phi
    rhs = phi.T @ Y

    if not isinstance(lam, str):
        lam_val = float(lam)
        if lam_val < 0:
            raise InvalidConfigurationError("smoothing parameter must be >= 0")
        coefs = _solve_penalized(G0, rhs, lam_val, basis, n_obs=m)
        lambdas = np.full(batch_shape, lam_val)
        return coefs.T.reshape(*batch_shape, K), lambdas
    if lam != "gcv":
        raise InvalidConfigurationError(f"lam must be a number or 'gcv', got {lam!r}")

    P = penalty_matrix(basis)
    n_curves = Y.shape[1]
    best_score = np.full(n_curves, np.inf)
    best_coef = np.zeros((K, n_curves))
    best_lam = np.full(n_curves, GCV_GRID[0])
    for lam_val in GCV_GRID:
        A = G0 + lam_val * P
        try:
            c = np.linalg.solve(A, rhs)
            tr_h = np.trace(np.linalg.solve(A, G0))
        except np.linalg.LinAlgError:
            continue
        rss = np.sum((Y - phi @ c) ** 2, axis=0)
        denom = m - tr_h
        score = m * rss / denom**2 if denom > 0 else np.full(n_curves, np.inf)
        better = score < best_score
        best_score[better] = score[better]
        best_coef[:, better] = c[:, better]
        best_lam[better] = lam_val
    return best_coef.T.reshape(*batch_shape, K), best_lam.reshape(batch_shape)


def _solve_penalized(G0, rhs, lam_val, basis, n_obs):
    K = G0.shape[0]
    if lam_val == 0.0:
        if n_obs < K:
            raise ValidationError(
                f"unpenalized fit needs >= {K} observation points, got {n_obs}"
            )
        try:
            c, low = _cho_solve(G0, rhs)
        except np.linalg.LinAlgError:
            raise RankDeficientFitError(
                "normal equations singular at lambda = 0"
            ) from None
        return c
    return np.linalg.solve(G0 + lam_val * penalty_matrix(basis), rhs)


def _cho_solve(A, b):
    L = np.linalg.cholesky(A)
    y = np.linalg.solve(L, b)
    return np.linalg.solve(L.T, y), True


def smooth_curve(y, grid, basis: BasisSystem, lam="gcv") -> np.ndarray:
    """Coefficients of a single smoothed curve (see `smooth_curves`)."""
    coefs, _ = smooth_curves(np.asarray(y, dtype=float), grid, basis, lam=lam)
    return coefs


def project_values(values, grid, basis: BasisSystem) -> np.ndarray:
    """Unpenalized least-squares projection of grid values onto the basis."""
    coefs, _ = smooth_curves(values, grid, basis, lam=0.0)
    return coefs


def inner_product(a, b, gram_matrix: GramMatrix) -> np.ndarray:
    """Inner product of coefficient stacks under the vector-function geometry.

    `a` and `b` hold per-component coefficient rows, shape (..., p, K); the
    result sums the componentwise L2 inner products: sum_j a_j' W b_j.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"coefficient shapes differ: {a.shape} vs {b.shape}")
    W = gram_matrix.W
    if a.shape[-1] != W.shape[0]:
        raise ShapeError(
            f"coefficient length {a.shape[-1]} does not match Gram size {W.shape[0]}"
        )
    return np.einsum("...jk,kl,...jl->...", a, W, b)


def norm_h(a, gram_matrix: GramMatrix) -> np.ndarray:
    """Norm induced by `inner_product`."""
    return np.sqrt(inner_product(a, a, gram_matrix))
