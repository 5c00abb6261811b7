"""Shared fixtures and synthetic-model builders for the test suite."""

import numpy as np
import pytest

from romfcc import basis as B
from romfcc import mfpca as M


@pytest.fixture(scope="session")
def bs10():
    return B.build_basis(4, 10)


@pytest.fixture(scope="session")
def gm10(bs10):
    return B.gram(bs10)


def orthonormal_eigvecs(rng, gm, p, K, n_vecs):
    """Random coefficient columns orthonormal under the blockwise W metric."""
    raw = rng.standard_normal((p * K, n_vecs))
    blocks = raw.reshape(p, K, n_vecs)
    wb = np.einsum("kl,pls->pks", gm.W, blocks).reshape(p * K, n_vecs)
    g = raw.T @ wb
    eigval, eigvec = np.linalg.eigh((g + g.T) / 2.0)
    return raw @ (eigvec / np.sqrt(eigval)) @ eigvec.T


def make_stub_model(
    bs, gm, p, eigenvalues, seed=0, n_retained=None, mean_scale=0.3, flavor="robust"
):
    """Hand-built model with unit variance functions.

    With v identically one, standardization is an exact affine bijection on
    coefficients, so score/reconstruction identities hold to rounding.
    """
    rng = np.random.default_rng(seed)
    K = bs.n_basis
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    L = eigenvalues.size
    b = orthonormal_eigvecs(rng, gm, p, K, L)
    grid = B.uniform_grid(200)
    return M.MfpcaModel(
        basis=bs,
        gram=gm,
        mean_coefs=rng.standard_normal((p, K)) * mean_scale,
        var_grid=np.ones((p, grid.size)),
        eval_grid=grid,
        eigvec_coefs=b,
        eigenvalues=eigenvalues,
        n_retained=L if n_retained is None else n_retained,
        flavor=flavor,
        variance_target=1.0,
        seed=seed,
    )


def kl_sample(rng, bs, gm, p, eigenvalues, n, mean_scale=0.3, noise=0.0):
    """Sample from a finite Karhunen-Loeve model on the basis.

    Returns (sample, mean_coefs, eigvec_coefs, scores).
    """
    K = bs.n_basis
    lam = np.asarray(eigenvalues, dtype=float)
    b = orthonormal_eigvecs(rng, gm, p, K, lam.size)
    mu = rng.standard_normal((p, K)) * mean_scale
    xi = rng.standard_normal((n, lam.size)) * np.sqrt(lam)
    coefs = mu[None] + (b @ xi.T).T.reshape(n, p, K)
    if noise > 0:
        coefs = coefs + noise * rng.standard_normal(coefs.shape)
    return M.FunctionalSample(basis=bs, coefs=coefs), mu, b, xi


@pytest.fixture(scope="session")
def small_basis():
    return B.build_basis(4, 8)


@pytest.fixture(scope="session")
def small_gram(small_basis):
    return B.gram(small_basis)
