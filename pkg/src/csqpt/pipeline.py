"""End-to-end simulated experiment: coherent probes through a channel, tomography,
process reconstruction and verification on a squeezed vacuum.

Every intermediate artifact is written to the work directory.  ``summary.json``
depends only on the configuration, so repeated runs produce identical bytes;
wall-clock times go to ``timings.json``.
"""

import json
import time
import warnings
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import formats
from .conventions import variance_to_db
from .errors import CsqptError, ValidationError
from .fock import (
    coherent_state,
    fidelity,
    reference_squeezed_vacuum,
    quadrature_extrema,
    required_dim,
    required_displaced_dim,
)
from .mle import mle_reconstruct_centered, sample_quadratures
from .oracles import ChannelSpec, eom_process, theoretical_superoperator
from .phasespace import GridSpec
from .proctensor import (
    ProbeRecord,
    Superoperator,
    apply_superoperator,
    center_and_fit,
    choi_min_eigenvalue,
    predict_output_direct,
    reconstruct_superoperator,
    trace_preservation_defect,
)

#: smallest positivity tolerance recorded with outputs predicted from Klauder-regularized inputs
APPROX_PSD_TOL = 1e-3


@dataclass
class PipelineConfig:
    dim: int = 14
    grid_extent: float = 12.0
    grid_points: int = 512
    L: float = 5.2
    probe_amplitudes: list = field(default_factory=lambda: np.linspace(0.0, 8.0, 11).tolist())
    probe_dim: int = 0  # 0: automatic, see resolved_probe_dim
    samples_per_probe: int = 50_000
    phases_per_probe: int = 12
    seed: int = 1
    eta_channel: float = 0.66
    phase_channel: float = float(np.deg2rad(36.0))
    fit_degree: int = 3
    mean_fit_degree: int = 2
    centered_dim: int = 12
    mle_dim: int = 10
    mle_max_iters: int = 2000
    mle_tol: float = 1e-9
    detector_efficiency: float = 1.0
    noiseless: bool = False
    squeeze_theta: float = 0.0
    check_dim: int = 6

    def __post_init__(self):
        self.probe_amplitudes = [float(a) for a in self.probe_amplitudes]
        if self.dim < 1 or self.centered_dim < 1 or self.mle_dim < 1:
            raise ValidationError("dimensions must be positive")
        if not 1 <= self.check_dim <= self.dim:
            raise ValidationError("check_dim must lie in [1, dim]")
        if self.samples_per_probe < 1 or self.phases_per_probe < 1:
            raise ValidationError("samples_per_probe and phases_per_probe must be positive")
        if len(self.probe_amplitudes) < max(self.fit_degree, self.mean_fit_degree) + 1:
            raise ValidationError("too few probe amplitudes for the fit degree")
        if min(self.probe_amplitudes) < 0:
            raise ValidationError("probe amplitudes must be nonnegative")
        ChannelSpec(self.eta_channel, self.phase_channel)
        self.grid.check_supports(self.L)

    @property
    def grid(self):
        return GridSpec(self.grid_extent, self.grid_points)

    @property
    def channel(self):
        return ChannelSpec(self.eta_channel, self.phase_channel)

    @property
    def samples_per_phase(self):
        return max(1, self.samples_per_probe // self.phases_per_probe)

    def resolved_probe_dim(self):
        """Cutoff holding the largest probe; with tomography, the displaced ``mle_dim`` block."""
        if self.probe_dim:
            return self.probe_dim
        amax = max(self.probe_amplitudes)
        if self.noiseless:
            return required_dim(amax) + 2
        return required_displaced_dim(amax, self.mle_dim)


PRESETS = {
    "paper-eom": {},
    "identity": {"eta_channel": 1.0, "phase_channel": 0.0, "dim": 4, "check_dim": 4},
}


def preset_config(name, **overrides):
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PipelineConfig(**{**PRESETS[name], **overrides})


def config_to_json(config):
    return asdict(config)


def config_from_json(doc, where="config"):
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValidationError(f"{where}: unknown field(s) {', '.join(unknown)}")
    try:
        return PipelineConfig(**doc)
    except TypeError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def save_config(config, path):
    Path(path).write_text(json.dumps(config_to_json(config), indent=1) + "\n")


def load_config(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_json(doc, str(path))


@contextmanager
def _stage(name, timings):
    start = time.perf_counter()
    try:
        yield
    except CsqptError as exc:
        exc.args = (f"stage '{name}' failed: {exc}",) + exc.args[1:]
        raise
    finally:
        timings[name] = time.perf_counter() - start


def _db_pair(rho):
    vmax, vmin, _ = quadrature_extrema(rho)
    return [float(variance_to_db(vmax)), float(variance_to_db(vmin))]


def _test_input(config):
    """The squeezed vacuum cropped to ``dim`` (renormalized), with the discarded population."""
    full = reference_squeezed_vacuum(max(config.dim, 20), config.squeeze_theta)
    block = full[: config.dim, : config.dim]
    kept = float(np.trace(block).real)
    return block / kept, 1.0 - kept


def run_experiment(config, workdir):
    """Run every stage and return the summary dictionary (also written as ``summary.json``)."""
    workdir = Path(workdir)
    probe_dir = workdir / "probes"
    probe_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, workdir / "config.json")
    timings = {}
    channel = config.channel
    pd = config.resolved_probe_dim()
    summary = {"config": config_to_json(config), "probe_dim": pd}

    with _stage("probes", timings):
        seeds = np.random.SeedSequence(config.seed).spawn(len(config.probe_amplitudes))
        phases = np.arange(config.phases_per_probe) * np.pi / config.phases_per_probe
        probes, manifest, probe_fids = [], [], []
        for i, (a, ss) in enumerate(zip(config.probe_amplitudes, seeds)):
            truth = eom_process(coherent_state(a, pd), channel)
            if config.noiseless:
                out = truth
            else:
                data = sample_quadratures(truth, phases, config.samples_per_phase, ss,
                                          efficiency=config.detector_efficiency)
                formats.write_quadratures(data, probe_dir / f"quadratures_{i:02d}.csv")
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    out = mle_reconstruct_centered(data, config.mle_dim, pd, config.mle_max_iters, config.mle_tol)
                probe_fids.append(fidelity(truth, out))
            name = f"probe_{i:02d}.json"
            formats.write_density(out, probe_dir / name)
            manifest.append((a, name))
            probes.append(ProbeRecord(a, out))
        formats.write_manifest(manifest, probe_dir / "manifest.json")
        if probe_fids:
            summary["probe_fidelity_min"] = float(min(probe_fids))
            summary["probe_fidelity_mean"] = float(np.mean(probe_fids))

    with _stage("fit-probes", timings):
        fit = center_and_fit(probes, config.fit_degree, config.mean_fit_degree, config.centered_dim)
        formats.write_fit(fit, workdir / "fit.json")
        summary["fit_residual"] = fit.residual

    with _stage("reconstruct-process", timings):
        sop = reconstruct_superoperator(fit, config.L, config.grid, config.dim)
        formats.write_superoperator(sop, workdir / "superoperator.json")
        theory = theoretical_superoperator(channel, config.dim)
        c = config.check_dim
        err = np.abs(sop.tensor - theory.tensor)[:c, :c, :c, :c]
        diag = max(err[k, k, m, m] for k in range(c) for m in range(c))
        summary.update(
            trace_defect=trace_preservation_defect(sop),
            choi_min_eigenvalue=choi_min_eigenvalue(sop),
            removed_mass=sop.diagnostics["removed_mass"],
            check_dim=c,
            oracle_max_error=float(err.max()),
            diagonal_max_error=float(diag),
        )
        block = Superoperator(sop.tensor[:c, :c, :c, :c], phase_symmetric=True)
        summary["block_trace_defect"] = trace_preservation_defect(block)
        summary["block_choi_min_eigenvalue"] = choi_min_eigenvalue(block)

    with _stage("predict", timings):
        rho_in, lost = _test_input(config)
        formats.write_density(rho_in, workdir / "input_state.json")
        oracle = eom_process(rho_in, channel)
        formats.write_density(oracle, workdir / "oracle_output.json")
        predicted = apply_superoperator(sop, rho_in)
        direct = predict_output_direct(rho_in, fit, config.L, config.grid)
        summary.update(
            predicted_min_eigenvalue=formats.write_approximate_density(
                predicted, workdir / "predicted_output.json", APPROX_PSD_TOL),
            direct_min_eigenvalue=formats.write_approximate_density(
                direct, workdir / "predicted_direct.json", APPROX_PSD_TOL),
            input_truncation=lost,
            fidelity_predicted=fidelity(oracle, predicted, allow_nonpositive=True),
            fidelity_direct=fidelity(oracle, direct, allow_nonpositive=True),
            input_db=_db_pair(rho_in),
            predicted_db=_db_pair(predicted),
            oracle_db=_db_pair(oracle),
        )

    (workdir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    (workdir / "timings.json").write_text(json.dumps(timings, indent=1) + "\n")
    return summary
