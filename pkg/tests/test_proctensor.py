import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csqpt import fock
from csqpt.errors import NumericalContractError, ValidationError
from csqpt.oracles import EOM_CHANNEL, ChannelSpec, eom_process, theoretical_superoperator
from csqpt.phasespace import GridSpec
from csqpt.proctensor import (
    ProbeRecord,
    Superoperator,
    apply_superoperator,
    center_and_fit,
    choi_matrix,
    choi_min_eigenvalue,
    enforce_phase_symmetry,
    identity_superoperator,
    predict_output_direct,
    reconstruct_superoperator,
    response_at,
    sector_mask,
    trace_preservation_defect,
)

from conftest import PROBE_AMPLITUDES, noiseless_probes, random_density


class TestFit:
    def test_loss_channel_is_exactly_polynomial(self, eom_fit):
        # a lossy phase-shifted coherent state stays coherent: centered output is vacuum
        # up to the Fock truncation of the probes
        assert eom_fit.residual < 1e-4
        gain = np.sqrt(0.66) * np.exp(1j * np.deg2rad(36))
        assert np.allclose(eom_fit.mean_amp_coeffs, [0, gain, 0], atol=1e-5)
        vac = np.zeros((12, 12))
        vac[0, 0] = 1
        assert np.allclose(eom_fit.centered_at(3.7), vac, atol=1e-4)
        assert eom_fit.probe_dim == fock.required_dim(8.0) + 2

    @pytest.mark.parametrize("alpha", [0.0, 0.35, 2.3 * np.exp(0.7j), 5.1 * np.exp(-2.2j), 8.0j])
    def test_response_matches_oracle(self, eom_fit, alpha):
        dim = eom_fit.probe_dim
        truth = eom_process(fock.coherent_state(alpha, dim))
        assert np.abs(response_at(eom_fit, alpha) - truth).max() < 1e-5

    def test_reproduces_probes(self, eom_fit):
        for probe in noiseless_probes(EOM_CHANNEL):
            assert fock.fidelity(probe.output, response_at(eom_fit, probe.alpha)) >= 0.999

    def test_response_rotates_with_input_phase(self, identity_fit):
        a = response_at(identity_fit, 2.0)
        b = response_at(identity_fit, 2.0 * np.exp(1.1j))
        assert np.allclose(fock.phase_shift(a, 1.1), b, atol=1e-12)

    def test_no_extrapolation(self, eom_fit):
        with pytest.raises(ValidationError, match="beyond the probed range"):
            response_at(eom_fit, 8.5)

    def test_probe_order_irrelevant(self):
        probes = noiseless_probes(EOM_CHANNEL)
        a = center_and_fit(probes, centered_dim=8)
        b = center_and_fit(probes[::-1], centered_dim=8)
        assert np.allclose(a.centered_coeffs, b.centered_coeffs, atol=1e-12)

    def test_rejects_bad_probes(self):
        probes = noiseless_probes(EOM_CHANNEL)
        with pytest.raises(ValidationError):
            center_and_fit([])
        with pytest.raises(ValidationError, match="real and nonnegative"):
            center_and_fit(probes[:-1] + [ProbeRecord(1j, probes[-1].output)])
        with pytest.raises(ValidationError, match="distinct amplitudes"):
            center_and_fit(probes[:3])
        with pytest.raises(ValidationError, match="mixed dimensions"):
            center_and_fit(probes[:-1] + [ProbeRecord(8.0, probes[-1].output[:40, :40])])

    def test_residual_guard(self):
        dim = fock.required_dim(8.0) + 10
        rng = np.random.default_rng(3)
        probes = [ProbeRecord(a, fock.displace(random_density(3, int(rng.integers(1e6))), a, dim))
                  for a in PROBE_AMPLITUDES]
        with pytest.raises(NumericalContractError, match="residual"):
            center_and_fit(probes, centered_dim=20, residual_tol=1e-3)


class TestSuperoperatorBasics:
    def test_identity(self):
        sop = identity_superoperator(4)
        rho = random_density(4, 1)
        assert np.allclose(apply_superoperator(sop, rho), rho)
        assert trace_preservation_defect(sop) == 0
        w = np.linalg.eigvalsh(choi_matrix(sop))
        assert np.isclose(w.max(), 4) and np.allclose(w[:-1], 0)

    def test_shape_checks(self):
        with pytest.raises(ValidationError):
            Superoperator(np.zeros((2, 3, 2, 2)))
        with pytest.raises(ValidationError, match="does not match"):
            apply_superoperator(identity_superoperator(3), np.eye(4) / 4)

    def test_nonpositive_trace(self):
        with pytest.raises(NumericalContractError):
            apply_superoperator(Superoperator(-identity_superoperator(2).tensor), np.eye(2) / 2)

    def test_sector_mask(self):
        mask = sector_mask(3, 4)
        assert mask.shape == (3, 3, 4, 4)
        assert mask[0, 1, 2, 3] and not mask[0, 1, 3, 2] and mask[2, 2, 0, 0]

    def test_enforce_symmetry_reports_removed_fraction(self):
        t = theoretical_superoperator(EOM_CHANNEL, 3).tensor.copy()
        t[0, 1, 0, 0] = 0.1
        sop, removed = enforce_phase_symmetry(Superoperator(t))
        assert removed == pytest.approx(0.1 / np.linalg.norm(t))
        assert sop.tensor[0, 1, 0, 0] == 0 and sop.phase_symmetric
        assert sop.diagnostics["removed_mass"] == removed

    @given(st.integers(0, 10_000))
    def test_theory_tensor_linear(self, seed):
        sop = theoretical_superoperator(EOM_CHANNEL, 4)
        r1, r2 = random_density(4, seed), random_density(4, seed + 1)
        mix = apply_superoperator(sop, 0.3 * r1 + 0.7 * r2)
        assert np.allclose(mix, 0.3 * eom_process(r1) + 0.7 * eom_process(r2), atol=1e-12)


class TestReconstruction:
    def test_matches_theory(self, eom_sop6):
        theory = theoretical_superoperator(EOM_CHANNEL, 6)
        assert np.abs(eom_sop6.tensor - theory.tensor).max() < 1e-3
        assert eom_sop6.phase_symmetric
        assert not np.any(eom_sop6.tensor[~sector_mask(6, 6)])
        assert eom_sop6.diagnostics["removed_mass"] < 2e-3

    @given(st.integers(0, 10_000), st.floats(0, 2 * np.pi))
    def test_phase_covariance(self, eom_sop6, seed, phi):
        rho = np.zeros((6, 6), dtype=complex)
        rho[:4, :4] = random_density(4, seed)
        lhs = apply_superoperator(eom_sop6, fock.phase_shift(rho, phi))
        assert np.abs(lhs - fock.phase_shift(apply_superoperator(eom_sop6, rho), phi)).max() < 1e-6

    @given(st.integers(0, 10_000))
    def test_hermiticity_preserved_before_symmetrization(self, eom_sop6, seed):
        _, info = apply_superoperator(eom_sop6, random_density(6, seed), full_output=True)
        assert info["hermiticity_defect"] < 1e-8

    def test_physicality(self, eom_sop6):
        assert trace_preservation_defect(eom_sop6) < 1e-4
        assert choi_min_eigenvalue(eom_sop6) > -1e-3

    def test_identity_channel(self, identity_sop4):
        assert np.abs(identity_sop4.tensor - identity_superoperator(4).tensor).max() < 2e-3

    @given(st.integers(0, 10_000))
    def test_prediction_on_random_states(self, eom_sop6, seed):
        rho = random_density(6, seed)
        out = apply_superoperator(eom_sop6, rho)
        assert np.abs(out - eom_process(rho)).max() < 5e-3

    def test_direct_prediction(self, eom_fit, grid):
        rho = fock.reference_squeezed_vacuum(14)
        out, info = predict_output_direct(rho, eom_fit, 5.2, grid, full_output=True)
        assert abs(info["trace"] - 1) < 1e-3
        assert fock.fidelity(eom_process(rho), out, allow_nonpositive=True) > 0.999

    def test_short_probe_range_warns(self, grid):
        fit = center_and_fit(noiseless_probes(ChannelSpec(1.0, 0.0)), centered_dim=6)
        with pytest.warns(RuntimeWarning, match="shortfall"):
            reconstruct_superoperator(fit, 5.2, grid, 2, alpha_max_required=9.0)

    def test_grid_must_cover_disk(self, eom_fit):
        with pytest.raises(ValidationError, match="half_extent"):
            reconstruct_superoperator(eom_fit, 5.2, GridSpec(10.0, 512), 2)
