"""Reading, writing and validating the on-disk artifact formats.

Complex numbers are stored as ``[re, im]`` pairs.  Writers emit Python's
shortest round-trip float repr, so JSON files reload bit for bit.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

from .conventions import PSD_TOL
from .errors import ValidationError
from .fock import check_density_matrix
from .phasespace import FREQUENCY, POSITION, GridSpec, PhaseSpaceField
from .proctensor import InterpolatedResponse, Superoperator

KINDS = ("density", "superoperator", "quadratures", "manifest", "field", "calibration", "fit", "config")
QUADRATURE_HEADER = ["phase_rad", "quadrature"]


def _pairs(a):
    return [[float(z.real), float(z.imag)] for z in np.asarray(a, dtype=complex).ravel()]


def _complex(pairs, where):
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ValidationError(f"{where}: expected [re, im] pairs")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(f"{where}: non-finite value at index {tuple(int(i) for i in bad[:-1])}")
    return arr[..., 0] + 1j * arr[..., 1]


def _dump(obj, path):
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1) + "\n")
    return path


def _load(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def _require(doc, keys, where):
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ValidationError(f"{where}: missing field(s) {', '.join(missing)}")


# density matrices

def density_to_json(rho, psd_tolerance=None):
    rho = np.asarray(rho, dtype=complex)
    doc = {"dim": rho.shape[0], "rows": [[[float(z.real), float(z.imag)] for z in row] for row in rho]}
    if psd_tolerance is not None:
        doc["psd_tolerance"] = float(psd_tolerance)
    return doc


def density_from_json(doc, where="density matrix", validate=True):
    """Parse ``{"dim", "rows"}``; an optional ``psd_tolerance`` loosens the positivity check.

    Approximate outputs (Klauder-regularized predictions) are not exactly positive
    and are written with the tolerance they satisfy.
    """
    _require(doc, ["dim", "rows"], where)
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"{where}: dim must be a positive integer")
    rows = doc["rows"]
    if not isinstance(rows, list) or len(rows) != dim:
        raise ValidationError(f"{where}: expected {dim} rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim:
            raise ValidationError(f"{where}: row {i} must hold {dim} entries")
    rho = _complex(rows, where)
    if validate:
        try:
            check_density_matrix(rho, trace_tol=1e-9, psd_tol=float(doc.get("psd_tolerance", PSD_TOL)))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return rho


def write_density(rho, path, psd_tolerance=None):
    return _dump(density_to_json(rho, psd_tolerance), path)


def write_approximate_density(rho, path, floor=1e-3):
    """Write a non-positive approximate state with a tolerance covering its negativity.

    The recorded ``psd_tolerance`` is twice the largest negative eigenvalue (at
    least ``floor``); the smallest eigenvalue is returned.
    """
    lam = float(np.linalg.eigvalsh(np.asarray(rho, dtype=complex)).min())
    write_density(rho, path, psd_tolerance=max(floor, float(f"{-2 * lam:.1e}")))
    return lam


def read_density(path, validate=True):
    return density_from_json(_load(path), str(path), validate)


# superoperators

def superoperator_to_json(sop):
    return {
        "dim_in": sop.dim_in,
        "dim_out": sop.dim_out,
        "phase_symmetric": bool(sop.phase_symmetric),
        "tensor": _pairs(sop.tensor),
    }


def superoperator_from_json(doc, where="superoperator"):
    _require(doc, ["dim_in", "dim_out", "phase_symmetric", "tensor"], where)
    di, do = doc["dim_in"], doc["dim_out"]
    flat = _complex(doc["tensor"], where)
    if flat.size != do * do * di * di:
        raise ValidationError(f"{where}: tensor has {flat.size} entries, expected {do * do * di * di}")
    tensor = flat.reshape(do, do, di, di)
    herm = np.abs(tensor - tensor.transpose(1, 0, 3, 2).conj())
    if herm.max() > 1e-8:
        idx = tuple(int(i) for i in np.unravel_index(np.argmax(herm), herm.shape))
        raise ValidationError(f"{where}: not Hermiticity-preserving at (l, k, n, m) = {idx}")
    return Superoperator(tensor, phase_symmetric=bool(doc["phase_symmetric"]))


def write_superoperator(sop, path):
    return _dump(superoperator_to_json(sop), path)


def read_superoperator(path):
    return superoperator_from_json(_load(path), str(path))


# interpolated probe responses

def fit_to_json(fit):
    return {
        "amplitudes": [float(a) for a in fit.amplitudes],
        "mean_amp_coeffs": _pairs(fit.mean_amp_coeffs),
        "centered_coeffs": _pairs(fit.centered_coeffs),
        "degree": fit.degree,
        "dim": fit.dim,
        "probe_dim": fit.probe_dim,
        "residual": fit.residual,
        "phase_symmetric": fit.phase_symmetric,
    }


def fit_from_json(doc, where="fit"):
    _require(doc, ["amplitudes", "mean_amp_coeffs", "centered_coeffs", "degree", "dim", "probe_dim"], where)
    degree, dim = doc["degree"], doc["dim"]
    coeffs = _complex(doc["centered_coeffs"], where)
    if coeffs.size != (degree + 1) * dim * dim:
        raise ValidationError(f"{where}: centered_coeffs size does not match degree {degree} and dim {dim}")
    return InterpolatedResponse(
        amplitudes=np.asarray(doc["amplitudes"], dtype=float),
        mean_amp_coeffs=_complex(doc["mean_amp_coeffs"], where),
        centered_coeffs=coeffs.reshape(degree + 1, dim, dim),
        degree=degree,
        dim=dim,
        probe_dim=doc["probe_dim"],
        residual=float(doc.get("residual", 0.0)),
        phase_symmetric=bool(doc.get("phase_symmetric", True)),
    )


def write_fit(fit, path):
    return _dump(fit_to_json(fit), path)


def read_fit(path):
    return fit_from_json(_load(path), str(path))


# probe manifests

def write_manifest(entries, path):
    """``entries`` is a list of ``(alpha, output_file)``; paths are stored as given."""
    doc = [{"alpha": [float(complex(a).real), float(complex(a).imag)], "output_file": str(f)} for a, f in entries]
    return _dump(doc, path)


def read_manifest(path):
    """Return ``[(alpha, resolved_path)]``; relative paths resolve against the manifest's folder."""
    path = Path(path)
    doc = _load(path)
    if not isinstance(doc, list) or not doc:
        raise ValidationError(f"{path}: manifest must be a non-empty list")
    out = []
    for i, entry in enumerate(doc):
        _require(entry, ["alpha", "output_file"], f"{path}: entry {i}")
        alpha = complex(_complex(entry["alpha"], f"{path}: entry {i} alpha"))
        target = Path(entry["output_file"])
        out.append((alpha, target if target.is_absolute() else path.parent / target))
    return out


# quadrature samples

def write_quadratures(data, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(QUADRATURE_HEADER)
        for theta, x in zip(data.phases, data.quadratures):
            w.writerow([repr(float(theta)), repr(float(x))])
    return Path(path)


def read_quadratures(path):
    """Return ``(phases, quadratures)`` arrays; errors carry the 1-based line number."""
    phases, quads = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != QUADRATURE_HEADER:
            raise ValidationError(f"{path}: line 1: header must be {','.join(QUADRATURE_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValidationError(f"{path}: line {line}: expected 2 fields, got {len(row)}")
            try:
                theta, x = float(row[0]), float(row[1])
            except ValueError:
                raise ValidationError(f"{path}: line {line}: not a number") from None
            if not (math.isfinite(theta) and math.isfinite(x)):
                raise ValidationError(f"{path}: line {line}: non-finite value")
            phases.append(theta)
            quads.append(x)
    if not phases:
        raise ValidationError(f"{path}: no samples")
    return np.array(phases), np.array(quads)


# phase-space fields

def write_field(field, path):
    names = ["x", "p"] if field.domain == POSITION else ["k_x", "k_p"]
    axis = field.axis
    X, P = np.meshgrid(axis, axis, indexing="ij")
    vals = np.asarray(field.values, dtype=complex)
    table = np.column_stack([X.ravel(), P.ravel(), vals.real.ravel(), vals.imag.ravel()])
    np.savetxt(path, table, delimiter=",", header=",".join(names + ["re", "im"]), comments="", fmt="%.17g")
    return Path(path)


def read_field(path):
    """Rebuild a field, inferring the grid from the node coordinates."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header == ["x", "p", "re", "im"]:
        domain = POSITION
    elif header == ["k_x", "k_p", "re", "im"]:
        domain = FREQUENCY
    else:
        raise ValidationError(f"{path}: line 1: unknown field header {','.join(header)}")
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if table.shape[1] != 4:
        raise ValidationError(f"{path}: expected 4 columns")
    bad = np.flatnonzero(~np.all(np.isfinite(table), axis=1))
    if bad.size:
        raise ValidationError(f"{path}: line {bad[0] + 2}: non-finite value")
    n = math.isqrt(table.shape[0])
    if n * n != table.shape[0]:
        raise ValidationError(f"{path}: {table.shape[0]} rows do not form a square grid")
    step = table[n, 0] - table[0, 0]
    half = n * step / 2 if domain == POSITION else np.pi / step
    grid = GridSpec(half_extent=float(half), points_per_axis=n)
    return PhaseSpaceField(grid, domain, (table[:, 2] + 1j * table[:, 3]).reshape(n, n))


# calibration curves

def write_calibration(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", curve.parameter])
        for n, v in zip(curve.n_values, curve.parameter_values):
            w.writerow([n, repr(float(v))])
    return Path(path)


def read_calibration(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) != 2 or rows[0][0] != "n":
        raise ValidationError(f"{path}: line 1: header must be n,<parameter>")
    ns, vals = [], []
    for line, row in enumerate(rows[1:], start=2):
        try:
            n, v = int(row[0]), float(row[1])
        except (ValueError, IndexError):
            raise ValidationError(f"{path}: line {line}: expected an integer n and a number") from None
        if not math.isfinite(v):
            raise ValidationError(f"{path}: line {line}: non-finite value")
        ns.append(n)
        vals.append(v)
    return rows[0][1], ns, vals


def validate_file(path, kind):
    """Check ``path`` against the schema of ``kind``; returns a list of diagnostics (empty when valid)."""
    from .pipeline import load_config

    path = Path(path)
    if kind not in KINDS:
        return [f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}"]
    if not path.is_file():
        return [f"{path}: no such file"]
    readers = {
        "density": read_density,
        "superoperator": read_superoperator,
        "quadratures": read_quadratures,
        "manifest": read_manifest,
        "field": read_field,
        "calibration": read_calibration,
        "fit": read_fit,
        "config": load_config,
    }
    try:
        readers[kind](path)
    except (ValidationError, ValueError, TypeError) as exc:
        return [str(exc)]
    return []
