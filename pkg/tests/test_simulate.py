import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import j0

from romfcc import simulate as S
from romfcc.errors import InvalidSeverityError, ValidationError


class TestBesselCorrelation:
    def test_unit_at_zero(self):
        assert S.bessel_corr(0.0) == 1.0

    def test_vanishes_at_first_bessel_zero(self):
        z = 0.125 * 2.404825557695773
        assert abs(S.bessel_corr(z)) < 1e-4

    def test_series_matches_scipy(self):
        z = np.linspace(0, 1, 101)
        np.testing.assert_allclose(S.bessel_corr(z), j0(z / 0.125), atol=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_even_function(self, z):
        assert S.bessel_corr(-z) == S.bessel_corr(z)


class TestMeanFunction:
    def test_pinned_left_endpoint(self):
        # frozen from direct evaluation of the four-term closed form
        assert S.mean_m(0.0) == pytest.approx(0.4113938832367146, abs=1e-12)

    def test_continuity_by_grid_refinement(self):
        # adjacent-sample jumps shrink linearly with the spacing (the
        # steepest term is the fast exponential at t = 0)
        jump_10k = np.abs(np.diff(S.mean_m(np.linspace(0, 1, 10_001)))).max()
        jump_100k = np.abs(np.diff(S.mean_m(np.linspace(0, 1, 100_001)))).max()
        assert jump_10k < 0.012
        assert jump_100k < 0.0012

    def test_early_transient_dies(self):
        t = np.linspace(0.0501, 1.0, 100)
        assert (np.exp(-371.4 * t) < 1e-8).all()


class TestContaminationShapes:
    def test_expulsion_zero_before_midpoint(self):
        assert S.contam_e(0.25, 0.08) == 0.0

    def test_expulsion_linear_after_midpoint(self):
        assert S.contam_e(0.75, 0.08) == pytest.approx(-0.04)
        assert S.contam_e(1.0, 0.04) == pytest.approx(-0.04)

    def test_warp_identity_branch(self):
        assert S.warp_h(0.03, 0.3) == 0.03

    def test_warp_fixed_right_endpoint(self):
        for m_p in (0.0, 0.2, 0.5):
            assert S.warp_h(1.0, m_p) == pytest.approx(1.0, abs=1e-12)

    def test_warp_middle_breakpoint_value(self):
        assert S.warp_h(0.6, 0.2) == pytest.approx(0.4, abs=1e-12)

    @pytest.mark.parametrize("m_p", [0.0, 0.1, 0.2, 0.4, 0.54])
    def test_corrected_warp_continuous(self, m_p):
        eps = 1e-13
        for bp in (0.05, 0.6):
            left = S.warp_h(bp - eps, m_p)
            right = S.warp_h(bp + eps, m_p)
            assert abs(right - left) < 1e-12
        assert S.warp_h(0.05, m_p) == pytest.approx(0.05, abs=1e-12)

    def test_verbatim_warp_keeps_published_jumps(self):
        eps = 1e-13
        jump1 = S.warp_h(0.05 + eps, 0.2, "verbatim") - S.warp_h(0.05 - eps, 0.2, "verbatim")
        jump2 = S.warp_h(0.6 + eps, 0.2, "verbatim") - S.warp_h(0.6 - eps, 0.2, "verbatim")
        assert jump1 == pytest.approx(-0.1, abs=1e-6)
        assert jump2 == pytest.approx(0.1, abs=1e-6)

    def test_phase_shift_vanishes_at_zero_size(self):
        # h is the identity at m_p = 0 up to float re-association
        t = np.linspace(0, 1, 200)
        np.testing.assert_allclose(S.contam_p(t, 0.0), 0.0, atol=1e-10)

    def test_severity_bound(self):
        with pytest.raises(InvalidSeverityError):
            S.warp_h(0.5, 0.55)


class TestEigenstructure:
    @pytest.fixture(scope="class")
    def structure(self):
        return S.build_eigenstructure(S.scenario_preset("S0", n=10))

    def test_kernel_reconstruction(self, structure):
        grid = structure.grid
        kernel = S.bessel_corr(grid[:, None] - grid[None, :])
        eta = np.maximum(structure.eta[:50], 0.0)
        recon = (structure.theta[:50].T * eta) @ structure.theta[:50]
        assert np.abs(recon - kernel).max() < 1e-3

    def test_within_block_eigenvalues_non_increasing(self, structure):
        head = structure.eta[:50]
        assert (np.diff(head) <= 1e-12).all()
        assert head[0] > 0

    def test_eigenfunction_orthonormality(self, structure):
        grid = structure.grid
        w = np.full(grid.size, grid[1] - grid[0])
        w[0] /= 2
        w[-1] /= 2
        gram = np.einsum("ipm,m,jpm->ij", structure.eigenfunctions, w, structure.eigenfunctions)
        assert np.abs(gram - np.eye(10)).max() < 1e-6

    def test_cross_block_damping_monotone(self, structure):
        grid = structure.grid
        eta = np.maximum(structure.eta, 0.0)
        recon = (structure.theta.T * eta) @ structure.theta
        norms = [np.linalg.norm(recon / (1 + abs(0 - j))) for j in range(1, 10)]
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_top_eigenvalues_positive_sorted(self, structure):
        lam = structure.eigenvalues
        assert lam.size == 10
        assert (lam > 0).all()
        assert (np.diff(lam) <= 1e-12).all()


class TestGenerate:
    def test_reproducible(self):
        scenario = S.scenario_preset("S1-OutE-C2", p_tilde=0.1, n=50, seed=7)
        a, la = S.generate(scenario)
        b, lb = S.generate(scenario)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(la.expulsion, lb.expulsion)

    def test_shapes_and_grid(self):
        curves, labels = S.generate(S.scenario_preset("S0", n=7, seed=1))
        assert curves.values.shape == (7, 10, 100)
        np.testing.assert_allclose(curves.grid, np.linspace(0, 1, 100))
        assert not labels.expulsion.any()
        assert not labels.phase_shift.any()

    def test_clean_sample_mean_matches_mean_function(self):
        curves, _ = S.generate(S.scenario_preset("S0", n=5000, seed=2))
        avg = curves.values.mean(axis=(0, 1))
        sigma_total = np.sqrt(0.01**2 + 0.0025**2)
        bound = 3 * sigma_total / np.sqrt(5000 * 10) * 6  # generous LLN envelope
        assert np.abs(avg - S.mean_m(curves.grid)).max() < max(bound, 2e-4)

    def test_score_covariance_matches_spectrum(self):
        scenario = S.scenario_preset("S0", n=5000, seed=3)
        structure = S.build_eigenstructure(scenario)
        curves, _ = S.generate(scenario)
        grid = curves.grid
        psi = S.tabulate_eigenfunctions(structure, grid)  # (10, 10, 100)
        w = np.full(grid.size, grid[1] - grid[0])
        w[0] /= 2
        w[-1] /= 2
        centered = (curves.values - S.mean_m(grid)) / 0.01
        xi_hat = np.einsum("npm,lpm,m->nl", centered, psi, w)
        emp = np.cov(xi_hat.T, ddof=1)
        np.testing.assert_allclose(np.diag(emp), structure.eigenvalues, rtol=0.10)

    def test_contaminated_fraction_matches_probability(self):
        scenario = S.scenario_preset("S1-OutE-C3", p_tilde=0.05, n=2000, seed=4)
        _, labels = S.generate(scenario)
        frac = labels.expulsion.mean()
        # binomial CI around p_tilde for n*p cells
        se = np.sqrt(0.05 * 0.95 / (2000 * 10))
        assert abs(frac - 0.05) < 4 * se
        assert not labels.phase_shift.any()

    def test_paired_scenarios_differ_only_on_contaminated_cells(self):
        clean, _ = S.generate(S.scenario_preset("S0", n=300, seed=5))
        dirty, labels = S.generate(S.scenario_preset("S1-OutE-C3", p_tilde=0.05, n=300, seed=5))
        diff = dirty.values - clean.values
        assert np.abs(diff[~labels.expulsion]).max() == 0.0
        after_mid = clean.grid > 0.5
        assert (diff[labels.expulsion][:, after_mid] <= 0).all()
        assert diff[labels.expulsion][:, after_mid].min() < -0.01

    def test_labels_match_bernoulli_product(self):
        # with case switches certain, cell labels follow the component draws
        scenario = S.scenario_preset("PhaseII-OCE-SL3", n=100, seed=6)
        _, labels = S.generate(scenario)
        assert labels.expulsion.all()
        assert not labels.phase_shift.any()


class TestPresets:
    def test_phase1_cellwise_tables(self):
        expected_me = {"C1": 0.04, "C2": 0.06, "C3": 0.08}
        for level, m_e in expected_me.items():
            sc = S.scenario_preset(f"S1-OutE-{level}", p_tilde=0.05, n=5)
            assert (sc.p_ca_e, sc.p_ca_p) == (1.0, 1.0)
            assert sc.p_ce_e == 0.05
            assert sc.p_ce_p == 0.0
            assert sc.m_e == m_e
            assert sc.m_p == 0.0
        expected_mp = {"C1": 0.40, "C2": 0.45, "C3": 0.50}
        for level, m_p in expected_mp.items():
            sc = S.scenario_preset(f"S1-OutP-{level}", p_tilde=0.05, n=5)
            assert sc.p_ce_p == 0.05
            assert sc.p_ce_e == 0.0
            assert sc.m_p == m_p

    def test_phase1_casewise_tables(self):
        expected_me = {"C1": 0.02, "C2": 0.03, "C3": 0.04}
        for level, m_e in expected_me.items():
            sc = S.scenario_preset(f"S2-OutE-{level}", p_tilde=0.1, n=5)
            assert (sc.p_ce_e, sc.p_ce_p) == (1.0, 1.0)
            assert sc.p_ca_e == 0.1
            assert sc.p_ca_p == 0.0
            assert sc.m_e == m_e
        expected_mp = {"C1": 0.20, "C2": 0.30, "C3": 0.40}
        for level, m_p in expected_mp.items():
            sc = S.scenario_preset(f"S2-OutP-{level}", p_tilde=0.1, n=5)
            assert sc.p_ca_p == 0.1
            assert sc.p_ca_e == 0.0
            assert sc.m_p == m_p

    def test_phase2_severity_tables(self):
        expected_me = {0: 0.0, 1: 0.01, 2: 0.02, 3: 0.03, 4: 0.04}
        for sl, m_e in expected_me.items():
            sc = S.scenario_preset(f"PhaseII-OCE-SL{sl}", n=5)
            assert (sc.p_ca_e, sc.p_ce_e, sc.p_ca_p, sc.p_ce_p) == (1.0, 1.0, 0.0, 0.0)
            assert sc.m_e == m_e
        expected_mp = {0: 0.0, 1: 0.20, 2: 0.27, 3: 0.34, 4: 0.40}
        for sl, m_p in expected_mp.items():
            sc = S.scenario_preset(f"PhaseII-OCP-SL{sl}", n=5)
            assert (sc.p_ca_p, sc.p_ce_p, sc.p_ca_e, sc.p_ce_e) == (1.0, 1.0, 0.0, 0.0)
            assert sc.m_p == m_p

    def test_scenario_zero_clean(self):
        sc = S.scenario_preset("S0", n=5)
        assert (sc.p_ca_e, sc.p_ca_p, sc.p_ce_e, sc.p_ce_p) == (0, 0, 0, 0)
        assert sc.sigma == 0.01
        assert sc.sigma_e == 0.0025
        assert sc.p == 10
        assert sc.n_terms == 10
        assert (sc.rho, sc.nu) == (0.125, 0.0)

    def test_unknown_preset_lists_valid_names(self):
        with pytest.raises(ValidationError, match="S1-OutE-C1"):
            S.scenario_preset("S9-bogus", n=5)

    def test_preset_names_cover_grid(self):
        names = S.preset_names()
        assert "S0" in names
        assert "S2-OutP-C2" in names
        assert "PhaseII-OCP-SL4" in names
        assert len(names) == 1 + 12 + 10
