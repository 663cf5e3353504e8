import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csqpt import formats
from csqpt.calibration import CalibrationCurve
from csqpt.errors import ValidationError
from csqpt.fock import coherent_state, fock_state
from csqpt.mle import sample_quadratures
from csqpt.oracles import EOM_CHANNEL, theoretical_superoperator
from csqpt.phasespace import GridSpec, p_tilde_from_state, wigner
from csqpt.pipeline import PipelineConfig, save_config
from csqpt.proctensor import center_and_fit

from conftest import noiseless_probes, random_density


class TestDensity:
    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_json_round_trip_exact(self, seed, dim):
        rho = random_density(dim, seed)
        doc = json.loads(json.dumps(formats.density_to_json(rho)))
        assert np.array_equal(formats.density_from_json(doc), rho)

    def test_file_round_trip(self, tmp_path):
        rho = random_density(4, 1)
        formats.write_density(rho, tmp_path / "r.json")
        assert np.array_equal(formats.read_density(tmp_path / "r.json"), rho)
        assert formats.validate_file(tmp_path / "r.json", "density") == []

    @pytest.mark.parametrize("doc,match", [
        ({"rows": []}, "missing field"),
        ({"dim": 2, "rows": [[[1, 0], [0, 0]]]}, "expected 2 rows"),
        ({"dim": 2, "rows": [[[1, 0]], [[0, 0], [0, 0]]]}, "row 0"),
        ({"dim": 1, "rows": [[[0.5, 0]]]}, "trace"),
        ({"dim": 1, "rows": [[[1]]]}, r"\[re, im\]"),
        ({"dim": 0, "rows": []}, "positive integer"),
        ([1, 2], "JSON object"),
    ])
    def test_rejects(self, doc, match):
        with pytest.raises(ValidationError, match=match):
            formats.density_from_json(doc)

    def test_not_positive(self):
        rho = np.diag([1.2, -0.2])
        with pytest.raises(ValidationError):
            formats.density_from_json(formats.density_to_json(rho))
        formats.density_from_json(formats.density_to_json(rho, psd_tolerance=0.3))

    def test_approximate_writer_covers_negativity(self, tmp_path):
        rho = np.diag([1.01, -0.01])
        lam = formats.write_approximate_density(rho, tmp_path / "a.json", floor=1e-3)
        assert lam == pytest.approx(-0.01)
        doc = json.loads((tmp_path / "a.json").read_text())
        assert doc["psd_tolerance"] == 0.02
        assert formats.validate_file(tmp_path / "a.json", "density") == []
        formats.write_approximate_density(np.eye(2) / 2, tmp_path / "b.json", floor=1e-3)
        assert json.loads((tmp_path / "b.json").read_text())["psd_tolerance"] == 1e-3

    def test_nonfinite_reports_index(self):
        doc = formats.density_to_json(np.eye(2) / 2)
        doc["rows"][1][0][0] = float("nan")
        with pytest.raises(ValidationError, match=r"\(1, 0\)"):
            formats.density_from_json(doc)

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"dim": 1,\n "rows": [\n')
        (msg,) = formats.validate_file(path, "density")
        assert "line" in msg


class TestSuperoperator:
    def test_round_trip(self, tmp_path):
        sop = theoretical_superoperator(EOM_CHANNEL, 3)
        formats.write_superoperator(sop, tmp_path / "s.json")
        back = formats.read_superoperator(tmp_path / "s.json")
        assert np.array_equal(back.tensor, sop.tensor) and back.phase_symmetric

    def test_size_mismatch(self):
        doc = formats.superoperator_to_json(theoretical_superoperator(EOM_CHANNEL, 2))
        doc["dim_in"] = 3
        with pytest.raises(ValidationError, match="expected 36"):
            formats.superoperator_from_json(doc)

    def test_hermiticity_violation_named(self):
        sop = theoretical_superoperator(EOM_CHANNEL, 2)
        sop.tensor[0, 1, 0, 1] += 0.1
        with pytest.raises(ValidationError, match=r"\(l, k, n, m\)"):
            formats.superoperator_from_json(formats.superoperator_to_json(sop))


class TestFitAndManifest:
    def test_fit_round_trip(self, tmp_path):
        fit = center_and_fit(noiseless_probes(EOM_CHANNEL), centered_dim=6)
        formats.write_fit(fit, tmp_path / "fit.json")
        back = formats.read_fit(tmp_path / "fit.json")
        assert np.array_equal(back.centered_coeffs, fit.centered_coeffs)
        assert np.array_equal(back.mean_amp_coeffs, fit.mean_amp_coeffs)
        assert back.probe_dim == fit.probe_dim and back.residual == fit.residual

    def test_fit_size_check(self):
        doc = formats.fit_to_json(center_and_fit(noiseless_probes(EOM_CHANNEL), centered_dim=4))
        doc["dim"] = 5
        with pytest.raises(ValidationError, match="centered_coeffs"):
            formats.fit_from_json(doc)

    def test_manifest_relative_paths(self, tmp_path):
        (tmp_path / "sub").mkdir()
        formats.write_manifest([(0.0, "a.json"), (1.5, "/abs/b.json")], tmp_path / "sub" / "m.json")
        entries = formats.read_manifest(tmp_path / "sub" / "m.json")
        assert entries[0] == (0j, tmp_path / "sub" / "a.json")
        assert str(entries[1][1]) == "/abs/b.json" and entries[1][0] == 1.5

    def test_manifest_rejects_empty(self, tmp_path):
        (tmp_path / "m.json").write_text("[]")
        assert formats.validate_file(tmp_path / "m.json", "manifest")


class TestQuadratures:
    def test_round_trip_exact(self, tmp_path):
        data = sample_quadratures(coherent_state(0.5, 10), [0.0, 1.0], 50, seed=1)
        formats.write_quadratures(data, tmp_path / "q.csv")
        phases, quads = formats.read_quadratures(tmp_path / "q.csv")
        assert np.array_equal(phases, data.phases) and np.array_equal(quads, data.quadratures)

    @pytest.mark.parametrize("body,match", [
        ("theta,x\n0,1\n", "line 1"),
        ("phase_rad,quadrature\n0,1\n0,abc\n", "line 3"),
        ("phase_rad,quadrature\n0,1,2\n", "line 2"),
        ("phase_rad,quadrature\n0,inf\n", "line 2"),
        ("phase_rad,quadrature\n", "no samples"),
    ])
    def test_errors_carry_line(self, tmp_path, body, match):
        path = tmp_path / "q.csv"
        path.write_text(body)
        with pytest.raises(ValidationError, match=match):
            formats.read_quadratures(path)


class TestField:
    @pytest.mark.parametrize("k_space", [False, True])
    def test_round_trip_infers_grid(self, tmp_path, k_space):
        grid = GridSpec(6.0, 64)
        rho = fock_state(1, 3)
        field = p_tilde_from_state(rho, grid) if k_space else wigner(rho, grid)
        formats.write_field(field, tmp_path / "f.csv")
        back = formats.read_field(tmp_path / "f.csv")
        assert back.domain == field.domain
        assert back.grid.points_per_axis == 64
        assert back.grid.half_extent == pytest.approx(6.0, rel=1e-12)
        assert np.array_equal(back.values, field.values)

    def test_bad_header(self, tmp_path):
        (tmp_path / "f.csv").write_text("a,b,c,d\n0,0,0,0\n")
        assert "line 1" in formats.validate_file(tmp_path / "f.csv", "field")[0]


class TestCalibrationAndConfig:
    def test_calibration_round_trip(self, tmp_path):
        curve = CalibrationCurve((0, 1, 2), (1.6, 3.1, 3.8), 0.99)
        formats.write_calibration(curve, tmp_path / "c.csv")
        assert formats.read_calibration(tmp_path / "c.csv") == ("L", [0, 1, 2], [1.6, 3.1, 3.8])

    def test_calibration_bad_row(self, tmp_path):
        (tmp_path / "c.csv").write_text("n,L\n0,1.5\nx,2\n")
        assert "line 3" in formats.validate_file(tmp_path / "c.csv", "calibration")[0]

    def test_config(self, tmp_path):
        save_config(PipelineConfig(), tmp_path / "cfg.json")
        assert formats.validate_file(tmp_path / "cfg.json", "config") == []
        (tmp_path / "bad.json").write_text('{"dim": 4, "bogus": 1}')
        assert "bogus" in formats.validate_file(tmp_path / "bad.json", "config")[0]

    def test_unknown_kind_and_missing_file(self, tmp_path):
        assert "unknown kind" in formats.validate_file(tmp_path, "photo")[0]
        assert "no such file" in formats.validate_file(tmp_path / "nope.json", "density")[0]
