"""Command-line entry point ``csqpt``.

Exit status: 0 on success, 1 for invalid input, 2 when a numerical contract is
violated (truncation, failed quadrature, non-physical intermediate).
"""

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import formats
from .calibration import calibration_curve
from .errors import NumericalContractError, ValidationError
from .mle import HomodyneDataset, mle_reconstruct, mle_reconstruct_centered, sample_quadratures
from .oracles import PRESETS as CHANNELS
from .oracles import ChannelSpec, eom_process, theoretical_superoperator
from .phasespace import GridSpec, regularized_p, regularized_p_tilde, wigner
from .pipeline import PRESETS, PipelineConfig, load_config, preset_config, run_experiment, save_config
from .proctensor import (
    ProbeRecord,
    apply_superoperator,
    center_and_fit,
    predict_output_direct,
    reconstruct_superoperator,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


def _grid(args):
    return GridSpec(args.grid_extent, args.grid_points)


def _channel(args):
    if args.preset:
        return CHANNELS[args.preset]
    return ChannelSpec(args.eta, np.deg2rad(args.phase_deg))


def _add_grid(p):
    p.add_argument("--grid-extent", type=float, default=12.0, help="half-width of the (x, p) grid")
    p.add_argument("--grid-points", type=int, default=512, help="nodes per axis (power of two)")


def _add_channel(p):
    p.add_argument("--preset", choices=sorted(CHANNELS), help="named channel; overrides --eta/--phase-deg")
    p.add_argument("--eta", type=float, default=1.0, help="power transmission")
    p.add_argument("--phase-deg", type=float, default=0.0)


def cmd_sample(args):
    rho = formats.read_density(args.state)
    phases = np.arange(args.phases) * np.pi / args.phases
    data = sample_quadratures(rho, phases, args.count, args.seed, efficiency=args.eta)
    formats.write_quadratures(data, args.out)


def cmd_mle(args):
    phases, quads = formats.read_quadratures(args.data)
    data = HomodyneDataset(phases, quads, efficiency=args.eta)
    if args.out_dim:
        rho, info = mle_reconstruct_centered(data, args.dim, args.out_dim, args.max_iters, args.tol, full_output=True)
    else:
        rho, info = mle_reconstruct(data, args.dim, args.max_iters, args.tol, full_output=True)
    formats.write_density(rho, args.out)
    print(f"iterations={info.iterations} converged={info.converged} loglik={info.log_likelihood[-1]:.6f}")


def cmd_wigner(args):
    formats.write_field(wigner(formats.read_density(args.state), _grid(args)), args.out)


def cmd_pfunc(args):
    rho = formats.read_density(args.state)
    fn = regularized_p_tilde if args.k_space else regularized_p
    formats.write_field(fn(rho, args.L, _grid(args)), args.out)


def cmd_oracle(args):
    rho = formats.read_density(args.state)
    formats.write_density(eom_process(rho, _channel(args)), args.out)


def cmd_oracle_sop(args):
    formats.write_superoperator(theoretical_superoperator(_channel(args), args.dim), args.out)


def cmd_fit_probes(args):
    probes = []
    for alpha, path in formats.read_manifest(args.manifest):
        probes.append(ProbeRecord(alpha, formats.read_density(path)))
    fit = center_and_fit(probes, args.degree, args.mean_degree, args.centered_dim)
    formats.write_fit(fit, args.out)
    print(f"residual={fit.residual:.3e}")


def cmd_reconstruct(args):
    fit = formats.read_fit(args.fit)
    sop = reconstruct_superoperator(fit, args.L, _grid(args), args.dim, args.dim_out)
    formats.write_superoperator(sop, args.out)
    print(f"removed_mass={sop.diagnostics['removed_mass']:.3e}")


def cmd_apply(args):
    sop = formats.read_superoperator(args.sop)
    out, info = apply_superoperator(sop, formats.read_density(args.state), full_output=True)
    lam = formats.write_approximate_density(out, args.out, args.psd_tolerance)
    print(f"trace_before_normalization={info['trace']:.9f} min_eigenvalue={lam:.3e}")


def cmd_predict_direct(args):
    fit = formats.read_fit(args.fit)
    out, info = predict_output_direct(formats.read_density(args.state), fit, args.L, _grid(args), full_output=True)
    lam = formats.write_approximate_density(out, args.out, args.psd_tolerance)
    print(f"trace_before_normalization={info['trace']:.9f} min_eigenvalue={lam:.3e}")


def cmd_calibrate(args):
    curve = calibration_curve(args.parameter, args.max_n, args.target_fidelity, _grid(args), args.L)
    formats.write_calibration(curve, args.out)


def _config_from_args(args):
    if args.config:
        config = load_config(args.config)
        base = dataclasses.asdict(config)
    else:
        base = dataclasses.asdict(preset_config(args.preset))
    for f in dataclasses.fields(PipelineConfig):
        value = getattr(args, f"cfg_{f.name}")
        if value is not None:
            base[f.name] = value
    return PipelineConfig(**base)


def cmd_run_experiment(args):
    config = _config_from_args(args)
    if args.write_config:
        save_config(config, args.write_config)
        return
    summary = run_experiment(config, args.workdir)
    shown = {k: v for k, v in summary.items() if k != "config"}
    print(json.dumps(shown, indent=1, sort_keys=True))


def cmd_validate(args):
    problems = formats.validate_file(args.path, args.kind)
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return EXIT_INVALID
    print("ok")


def cmd_plot_export(args):
    if args.kind == "density":
        rho = formats.read_density(args.artifact)
        formats.write_field(wigner(rho, _grid(args)), args.out)
    elif args.kind == "superoperator":
        sop = formats.read_superoperator(args.artifact)
        d = min(sop.dim_in, sop.dim_out)
        with open(args.out, "w") as fh:
            fh.write("m,k,value\n")
            for m in range(sop.dim_in):
                for k in range(d):
                    fh.write(f"{m},{k},{float(sop.tensor[k, k, m, m].real)!r}\n")
    elif args.kind == "calibration":
        name, ns, vals = formats.read_calibration(args.artifact)
        with open(args.out, "w") as fh:
            fh.write(f"n,{name}\n")
            fh.writelines(f"{n},{v!r}\n" for n, v in zip(ns, vals))
    elif args.kind == "field":
        formats.write_field(formats.read_field(args.artifact), args.out)
    else:
        raise ValidationError(f"plot-export does not handle kind {args.kind!r}")


def _add_config_flags(p):
    g = p.add_argument_group("config overrides (same names as the config file fields)")
    for f in dataclasses.fields(PipelineConfig):
        flags = [f"--{f.name}"]
        if "_" in f.name:
            flags.append(f"--{f.name.replace('_', '-')}")
        kw = {"dest": f"cfg_{f.name}", "default": None}
        if f.type is bool:
            kw["action"] = argparse.BooleanOptionalAction
        elif f.type is list:
            kw.update(type=float, nargs="+")
        else:
            kw["type"] = f.type
        g.add_argument(*flags, **kw)


def build_parser():
    parser = argparse.ArgumentParser(prog="csqpt", description="Coherent-state quantum process tomography toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="simulate homodyne data from a density matrix")
    p.add_argument("--state", required=True)
    p.add_argument("--phases", type=int, default=12)
    p.add_argument("--count", type=int, default=4167, help="samples per phase")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, default=1.0, help="detector efficiency")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mle", help="maximum-likelihood state from quadrature CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out-dim", type=int, default=0, help="reconstruct around the mean amplitude, then displace into this cutoff")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mle)

    p = sub.add_parser("wigner", help="Wigner function grid CSV")
    p.add_argument("--state", required=True)
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_wigner)

    p = sub.add_parser("pfunc", help="regularized P function grid CSV")
    p.add_argument("--state", required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--k-space", action="store_true", help="emit the filtered transform instead")
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pfunc)

    p = sub.add_parser("oracle", help="apply the exact loss + phase channel")
    p.add_argument("--state", required=True)
    _add_channel(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("oracle-sop", help="exact superoperator of the loss + phase channel")
    p.add_argument("--dim", type=int, required=True)
    _add_channel(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle_sop)

    p = sub.add_parser("fit-probes", help="interpolate probe outputs listed in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--mean-degree", type=int, default=2)
    p.add_argument("--centered-dim", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_probes)

    p = sub.add_parser("reconstruct-process", help="superoperator from a probe fit")
    p.add_argument("--fit", required=True)
    p.add_argument("--L", type=float, default=5.2)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--dim-out", type=int, default=None)
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    for name, func, help_ in (
        ("apply", cmd_apply, "apply a stored superoperator to a state"),
        ("predict-direct", cmd_predict_direct, "predict a process output from the probe fit"),
    ):
        p = sub.add_parser(name, help=help_)
        if name == "apply":
            p.add_argument("--sop", required=True)
        else:
            p.add_argument("--fit", required=True)
            p.add_argument("--L", type=float, default=5.2)
            _add_grid(p)
        p.add_argument("--state", required=True)
        p.add_argument("--psd-tolerance", type=float, default=1e-3,
                       help="smallest positivity tolerance recorded with the approximate output; "
                            "raised to cover its actual negativity")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("calibrate", help="required L or probe radius for Fock states 0..max-n")
    p.add_argument("--max-n", type=int, required=True)
    p.add_argument("--target-fidelity", type=float, required=True)
    p.add_argument("--parameter", choices=["L", "alpha_max"], default="L")
    p.add_argument("--L", type=float, default=None, help="cutoff for the alpha_max scan (default: calibrated per n)")
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("run-experiment", help="full simulated tomography pipeline")
    p.add_argument("--preset", choices=sorted(PRESETS), default="paper-eom")
    p.add_argument("--config", help="flat JSON config; flags below override its fields")
    p.add_argument("--workdir", default="csqpt-run")
    p.add_argument("--write-config", metavar="PATH", help="write the resolved config and exit")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("validate", help="check a file against its format")
    p.add_argument("path")
    p.add_argument("--kind", required=True, choices=formats.KINDS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot-export", help="CSV data for external plotting")
    p.add_argument("artifact")
    p.add_argument("--kind", required=True, choices=["density", "superoperator", "calibration", "field"])
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot_export)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalContractError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
