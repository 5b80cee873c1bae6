import numpy as np
import pytest

from ohtlab import detection, patterns, radon, states
from ohtlab.errors import AliasingError, CoverageError


@pytest.fixture(scope="module")
def pf8():
    return patterns.build_pattern_functions(8)


def _grid_dataset(rho, n, seed, d=16, det=None):
    det = det or detection.DetectorModel()
    return detection.sample_quadratures(
        rho, detection.PhaseSchedule("grid", d=d), det, n, seed)


class TestConstruction:
    def test_m00_projects_out_ground_state(self, pf8):
        # Σ M_00 ψ_0² dq = 1, Σ M_00 ψ_k² dq = 0 for k < dim
        q = pf8.q_axis
        psi = states.hermite_psi_all(7, q)
        m00 = pf8.values(0, 0)
        assert np.trapezoid(m00 * psi[0] ** 2, q) == pytest.approx(1.0, abs=1e-6)
        for k in range(1, 8):
            assert abs(np.trapezoid(m00 * psi[k] ** 2, q)) < 1e-6

    def test_diagonal_band_orthogonality(self, pf8):
        q = pf8.q_axis
        psi = states.hermite_psi_all(7, q)
        for n in range(8):
            for nu in range(8):
                val = np.trapezoid(pf8.values(n, n) * psi[nu] ** 2, q)
                assert val == pytest.approx(1.0 if n == nu else 0.0, abs=1e-6)

    def test_index_symmetry(self, pf8):
        assert np.array_equal(pf8.values(5, 2), pf8.values(2, 5))

    def test_extrema_align_with_fock_distribution(self, pf8):
        # M_nn has n+1 maxima sitting on the maxima of ψ_n(q)²
        q = pf8.q_axis
        for n in range(6):
            psi2 = states.hermite_psi(n, q) ** 2
            m = pf8.values(n, n)
            support = np.abs(q) <= np.sqrt(2 * n + 1) + 0.5
            def maxima(y):
                idx = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:]) & support[1:-1])[0] + 1
                return q[idx]
            peaks_m = maxima(m)
            peaks_p = maxima(psi2)
            assert len(peaks_p) == n + 1
            assert len(peaks_m) == n + 1
            assert np.max(np.abs(peaks_m - peaks_p)) < 0.2

    def test_condition_logged_and_bounded(self, pf8):
        assert set(pf8.condition_numbers) == set(range(8))
        assert max(pf8.condition_numbers.values()) < 1e12
        assert max(pf8.biorth_residuals.values()) < 1e-9

    def test_dim_cap(self):
        with pytest.raises(ValueError):
            patterns.build_pattern_functions(31)

    def test_narrow_axis_rejected(self):
        with pytest.raises(ValueError):
            patterns.build_pattern_functions(4, q_axis=np.linspace(-4, 4, 1001))


class TestRhoFromQuadratures:
    def test_vacuum(self, vacuum, pf8):
        ds = _grid_dataset(vacuum, 200_000, seed=301, d=16)
        rho, err = patterns.rho_from_quadratures(ds, pf8)
        assert abs(rho.elements[0, 0].real - 1.0) <= 0.02
        mask = ~np.eye(8, dtype=bool)
        assert np.max(np.abs(rho.elements[mask])) <= 0.02

    def test_coherent_frobenius(self, coherent1, pf8):
        ds = _grid_dataset(coherent1, 200_000, seed=302)
        rho, err = patterns.rho_from_quadratures(ds, pf8, 8)
        truth = coherent1.elements[:8, :8]
        frob = np.sqrt(np.sum(np.abs(rho.elements - truth) ** 2))
        assert frob <= 3.0 * np.sqrt(np.sum(err**2))

    def test_squeezed_even_odd(self, squeezed05, pf8):
        ds = _grid_dataset(squeezed05, 300_000, seed=303, d=128)
        rho, err = patterns.rho_from_quadratures(ds, pf8, 64)
        pops = rho.populations()
        assert pops[1] <= 0.01
        assert pops[3] <= 0.01

    def test_hermitian_by_construction(self, thermal1, pf8):
        ds = _grid_dataset(thermal1, 50_000, seed=304)
        rho, _ = patterns.rho_from_quadratures(ds, pf8)
        assert np.max(np.abs(rho.elements - rho.elements.conj().T)) == 0.0

    def test_aliasing_refused(self, vacuum, pf8):
        # 4 phases over the full circle fold onto just 2 projection angles
        ds = _grid_dataset(vacuum, 10_000, seed=305, d=4)
        with pytest.raises(AliasingError):
            patterns.rho_from_quadratures(ds, pf8)

    def test_nonuniform_phases_refused(self, vacuum, pf8):
        base = detection.sample_quadratures(
            vacuum, detection.PhaseSchedule("grid", d=32),
            detection.DetectorModel(), 10_000, seed=306)
        rng = np.random.default_rng(0)
        crooked = detection.QuadratureDataset(
            thetas=np.sort(rng.random(32))[
                np.minimum((base.thetas / (2 * np.pi) * 32).astype(int), 31)] * 2 * np.pi * 0.99,
            qs=base.qs, meta=base.meta)
        with pytest.raises(CoverageError):
            patterns.rho_from_quadratures(crooked, pf8)

    def test_unbiasedness_over_seeds(self):
        # averaging estimates over seeds converges on the exact state; with
        # 200 seeds any systematic bias of 0.2 single-run standard errors
        # would show as a >=4σ deviation of a per-element mean
        amp = np.array([1.0, 0.6, 0.3, 0.2])
        amp = amp / np.linalg.norm(amp)
        truth = np.outer(amp, amp)
        rho_small = states.DensityMatrix(dim=4, elements=truth)
        pf4 = patterns.build_pattern_functions(4)
        half = detection.PhaseSchedule("grid", d=4, span=(0.0, np.pi))
        n_seeds = 200
        acc = np.zeros((4, 4), complex)
        for s in range(n_seeds):
            ds = detection.sample_quadratures(rho_small, half,
                                              detection.DetectorModel(), 5_000, 400 + s)
            rho, err = patterns.rho_from_quadratures(ds, pf4)
            acc += rho.elements
        bias = np.abs(acc / n_seeds - truth)
        assert np.max(bias / (err / np.sqrt(n_seeds))) < 4.0
        assert np.mean(bias) < 0.2 * np.mean(err)

    def test_phase_count_theorem(self):
        # support <= 3 photons: 4 and 32 projection angles agree
        amp = np.array([1.0, 0.6, 0.3, 0.2])
        amp = amp / np.linalg.norm(amp)
        rho_small = states.DensityMatrix(dim=4, elements=np.outer(amp, amp))
        pf4 = patterns.build_pattern_functions(4)
        half = lambda d: detection.PhaseSchedule("grid", d=d, span=(0.0, np.pi))
        det = detection.DetectorModel()
        ds4 = detection.sample_quadratures(rho_small, half(4), det, 200_000, 310)
        ds32 = detection.sample_quadratures(rho_small, half(32), det, 200_000, 311)
        r4, e4 = patterns.rho_from_quadratures(ds4, pf4, 4)
        r32, e32 = patterns.rho_from_quadratures(ds32, pf4, 32)
        diff = np.abs(r4.elements - r32.elements)
        comb = np.sqrt(e4**2 + e32**2)
        assert np.max(diff / comb) < 3.0

    def test_radon_pattern_agreement(self, coherent1, pf8):
        # the two reconstruction routes agree element-wise on one dataset
        ds = _grid_dataset(coherent1, 150_000, seed=312, d=64)
        rho_p, err_p = patterns.rho_from_quadratures(ds, pf8)
        w = radon.filtered_backprojection(ds)
        rho_r = states.rho_from_wigner(w, 8)
        diff = np.abs(rho_p.elements - rho_r.elements)
        # radon-route element noise estimated from a small bootstrap
        rng = np.random.default_rng(5)
        boots = []
        for _ in range(12):
            idx = rng.integers(0, len(ds), len(ds))
            sub = detection.QuadratureDataset(ds.thetas[idx], ds.qs[idx], ds.meta)
            boots.append(states.rho_from_wigner(
                radon.filtered_backprojection(sub), 8).elements)
        err_r = np.std(np.abs(np.array(boots)), axis=0)
        assert np.max(diff / np.sqrt(err_p**2 + err_r**2 + 1e-6)) < 3.0


class TestPnPhaseAveraged:
    def test_vacuum(self, vacuum, pf8):
        ds = detection.sample_quadratures(
            vacuum, detection.PhaseSchedule("uniform_random"),
            detection.DetectorModel(), 100_000, seed=320)
        p, se = patterns.pn_phase_averaged(ds, pf8)
        assert abs(p[0] - 1.0) <= 2.0 / np.sqrt(100_000) * 2
        assert np.all(np.abs(p[1:]) <= 4 * se[1:] + 1e-3)

    def test_thermal_bose_einstein(self, thermal1, pf8):
        ds = detection.sample_quadratures(
            thermal1, detection.PhaseSchedule("swept_linear"),
            detection.DetectorModel(), 200_000, seed=321)
        p, se = patterns.pn_phase_averaged(ds, pf8)
        expect = 0.5 ** (np.arange(8) + 1)
        assert np.max(np.abs(p - expect) / se) < 4.0

    def test_fock1(self, fock1, pf8):
        ds = detection.sample_quadratures(
            fock1, detection.PhaseSchedule("uniform_random"),
            detection.DetectorModel(), 100_000, seed=322)
        p, se = patterns.pn_phase_averaged(ds, pf8)
        assert p[1] >= 0.95

    def test_lossy_record_gives_smoothed_state(self, pf8):
        # no loss inversion: an η < 1 record reconstructs the smoothed state.
        # Smoothing a thermal state is again thermal, with
        # nbar' = nbar + (1/η − 1)/2 (Gaussian variances add) — an exact oracle.
        nbar, eta = 0.6, 0.5
        rho = states.make_state(states.StateSpec("thermal", nbar=nbar))
        ds = detection.sample_quadratures(
            rho, detection.PhaseSchedule("uniform_random"),
            detection.DetectorModel(eta_q=eta), 200_000, seed=325)
        p, se = patterns.pn_phase_averaged(ds, pf8)
        nbar_s = nbar + (1.0 / eta - 1.0) / 2.0
        expect = nbar_s ** np.arange(8) / (1 + nbar_s) ** (np.arange(8) + 1)
        assert np.max(np.abs(p - expect) / se) < 4.0

    def test_grid_aliasing_guard(self, vacuum, pf8):
        ds = _grid_dataset(vacuum, 5_000, seed=323, d=4)
        with pytest.raises(AliasingError):
            patterns.pn_phase_averaged(ds, pf8)

    def test_stderr_bounded_by_two_over_sqrt_n(self, thermal1, pf8):
        # |M_nn| stays near 2, so the error bars stay near the 2/√N ceiling
        ds = detection.sample_quadratures(
            thermal1, detection.PhaseSchedule("uniform_random"),
            detection.DetectorModel(), 50_000, seed=324)
        _, se = patterns.pn_phase_averaged(ds, pf8)
        assert np.all(se <= 2.2 / np.sqrt(50_000))
