import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from conftest import kl_sample, make_stub_model

from romfcc import cellfilter as CF
from romfcc import mfpca as M
from romfcc.errors import ValidationError


class TestFlagProportion:
    def test_zero_when_empirical_dominates(self):
        # all distances far below the reference's alpha quantile
        d = np.linspace(0.01, 0.5, 100)
        d_n, idx = CF.flag_proportion(d, n_components=5, alpha=0.95)
        assert d_n == 0.0
        assert idx.size == 0

    def test_flag_count_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            L = int(rng.integers(1, 12))
            n = int(rng.integers(20, 300))
            d = rng.chisquare(L, size=n) * rng.uniform(0.5, 3.0)
            d_n, idx = CF.flag_proportion(d, L)
            assert idx.size == int(np.floor(n * d_n))

    def test_flags_are_top_order_statistics(self):
        rng = np.random.default_rng(1)
        d = rng.chisquare(3, size=200) * 2.5
        d_n, idx = CF.flag_proportion(d, 3)
        if idx.size:
            flagged = np.zeros(200, dtype=bool)
            flagged[idx] = True
            assert d[flagged].min() >= d[~flagged].max()

    def test_tie_break_prefers_lower_case_index(self):
        d = np.array([50.0, 50.0, 50.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1])
        d_n, idx = CF.flag_proportion(d, n_components=1)
        assert 0 < idx.size < 3 or np.array_equal(idx, [0, 1, 2]) or idx.size == 0
        if 0 < idx.size < 3:
            assert idx[0] == 0  # ties broken toward lower index

    def test_null_distribution_rarely_flags(self):
        rng = np.random.default_rng(2)
        d = rng.chisquare(5, size=100_000)
        d_n, idx = CF.flag_proportion(d, 5)
        assert idx.size / 100_000 <= 0.005

    def test_planted_outliers_recovered(self):
        rng = np.random.default_rng(3)
        n, L = 2000, 5
        d = rng.chisquare(L, size=n)
        planted = rng.choice(n, size=100, replace=False)
        d[planted] = chi2.ppf(0.9999, L) * rng.uniform(1.0, 3.0, size=100)
        d_n, idx = CF.flag_proportion(d, L)
        recovered = np.isin(planted, idx).mean()
        assert recovered >= 0.8
        assert abs(idx.size - 100) <= 30

    def test_rejects_negative_distances(self):
        with pytest.raises(ValidationError):
            CF.flag_proportion(np.array([-1.0, 2.0]), 3)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=1, max_value=10), st.integers(min_value=15, max_value=200))
    def test_flag_count_identity_property(self, L, n):
        rng = np.random.default_rng(L * 1000 + n)
        d = rng.chisquare(L, size=n) * rng.uniform(0.2, 4.0)
        d_n, idx = CF.flag_proportion(d, L)
        assert idx.size == int(np.floor(n * d_n))
        assert 0.0 <= d_n <= 1.0


class TestFilterDistances:
    def test_distance_of_robust_mean_is_zero(self, bs10, gm10):
        model = make_stub_model(bs10, gm10, p=1, eigenvalues=[2.0, 1.0], seed=0)
        d = CF.score_distances(model, 2, model.mean_coefs[None, :, :])
        assert d[0] == pytest.approx(0.0, abs=1e-8)

    def test_unit_standardized_score_distance(self, bs10, gm10):
        model = make_stub_model(bs10, gm10, p=1, eigenvalues=[2.0, 1.0], seed=1)
        curve = model.mean_coefs + np.sqrt(2.0) * model.eigvec_coefs[:, 0].reshape(1, 10)
        d = CF.score_distances(model, 2, curve[None, :, :])
        assert d[0] == pytest.approx(1.0, abs=1e-6)

    def test_redundant_path_agreement(self, bs10, gm10):
        # score-formula distances match explicit inner-product evaluation
        rng = np.random.default_rng(4)
        sample, _, _, _ = kl_sample(
            rng, bs10, gm10, p=1, eigenvalues=[3.0, 1.5, 0.5], n=80, noise=0.02
        )
        dist, L_fil = CF.filter_distances(sample.coefs[:, 0], bs10, seed=5)
        model, _ = CF.fit_filter_model(sample.coefs[:, 0], bs10, seed=5)
        z = M.standardize(model, sample.coefs)
        oracle = np.empty(80)
        for i in range(80):
            xi = np.array(
                [
                    float(
                        np.einsum(
                            "pk,kl,pl->",
                            model.eigvec_coefs[:, l].reshape(1, 10),
                            gm10.W,
                            z[i],
                        )
                    )
                    for l in range(L_fil)
                ]
            )
            oracle[i] = np.sum(xi**2 / model.eigenvalues[:L_fil])
        np.testing.assert_allclose(dist, oracle, atol=1e-10)

    def test_deterministic(self, bs10, gm10):
        rng = np.random.default_rng(6)
        sample, _, _, _ = kl_sample(
            rng, bs10, gm10, p=1, eigenvalues=[2.0, 1.0], n=50, noise=0.02
        )
        d1, l1 = CF.filter_distances(sample.coefs[:, 0], bs10, seed=9)
        d2, l2 = CF.filter_distances(sample.coefs[:, 0], bs10, seed=9)
        assert l1 == l2
        np.testing.assert_array_equal(d1, d2)

    def test_clean_flag_fraction_shrinks_with_sample_size(self, bs10, gm10):
        # consistency: on clean Gaussian curves the flagged fraction at
        # n = 10^4 does not exceed the n = 10^3 fraction by more than 0.005
        fractions = {}
        for n in (1_000, 10_000):
            rng = np.random.default_rng(100 + n)
            sample, _, _, _ = kl_sample(
                rng, bs10, gm10, p=1, eigenvalues=[3.0, 1.5, 0.7], n=n, noise=0.02
            )
            dist, l_fil = CF.filter_distances(sample.coefs[:, 0], bs10, seed=n)
            _, idx = CF.flag_proportion(dist, l_fil)
            fractions[n] = idx.size / n
        assert fractions[10_000] <= fractions[1_000] + 0.005


@pytest.fixture(scope="module")
def contaminated(bs10, gm10):
    rng = np.random.default_rng(7)
    sample, mu, b, _ = kl_sample(
        rng, bs10, gm10, p=3, eigenvalues=[3.0, 1.5, 0.7], n=300, noise=0.02
    )
    planted = np.zeros((300, 3), dtype=bool)
    coefs = sample.coefs.copy()
    cells = [(i, i % 3) for i in range(0, 45)]
    for i, j in cells:
        coefs[i, j] += 40.0 * b[:, 0].reshape(3, 10)[j]
        planted[i, j] = True
    return M.FunctionalSample(basis=bs10, coefs=coefs), planted


class TestApplyFilter:
    def test_recovers_planted_cells(self, contaminated):
        sample, planted = contaminated
        filtered, report = CF.apply_filter(sample, seed=11)
        hit = (report.flagged & planted).sum() / planted.sum()
        assert hit >= 0.8

    def test_flag_count_identity_per_component(self, contaminated):
        sample, _ = contaminated
        _, report = CF.apply_filter(sample, seed=11)
        n = sample.n_cases
        for j in range(sample.n_components):
            assert report.flagged[:, j].sum() == int(np.floor(n * report.d_n[j]))

    def test_masking_is_component_local(self, contaminated, bs10):
        # distances in one component are unchanged when another component
        # of the input is wildly perturbed
        sample, _ = contaminated
        _, report_a = CF.apply_filter(sample, seed=13)
        perturbed = sample.coefs.copy()
        perturbed[:, 1] += 1000.0
        sample_b = M.FunctionalSample(basis=bs10, coefs=perturbed)
        _, report_b = CF.apply_filter(sample_b, seed=13)
        np.testing.assert_array_equal(report_a.distances[:, 0], report_b.distances[:, 0])
        np.testing.assert_array_equal(report_a.distances[:, 2], report_b.distances[:, 2])

    def test_all_components_flagged_removes_case(self, bs10, gm10):
        rng = np.random.default_rng(8)
        sample, mu, b, _ = kl_sample(
            rng, bs10, gm10, p=2, eigenvalues=[2.0, 1.0], n=120, noise=0.02
        )
        coefs = sample.coefs.copy()
        coefs[5] += 500.0  # every component of case 5 is extreme
        bad = M.FunctionalSample(basis=bs10, coefs=coefs)
        filtered, report = CF.apply_filter(bad, seed=15)
        assert 5 in report.removed_case_ids
        assert 5 not in filtered.case_ids
        assert report.flagged[5].all()

    def test_masked_cells_become_missing(self, contaminated):
        sample, _ = contaminated
        filtered, report = CF.apply_filter(sample, seed=11)
        kept = np.isin(sample.case_ids, filtered.case_ids)
        np.testing.assert_array_equal(filtered.observed, ~report.flagged[kept])

    def test_rejects_incomplete_input(self, bs10):
        observed = np.ones((20, 2), dtype=bool)
        observed[0, 0] = False
        sample = M.FunctionalSample(
            basis=bs10, coefs=np.zeros((20, 2, 10)), observed=observed
        )
        with pytest.raises(ValidationError):
            CF.apply_filter(sample, seed=0)
