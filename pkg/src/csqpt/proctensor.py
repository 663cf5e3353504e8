"""Process superoperators reconstructed from coherent-state probe responses.

A phase-symmetric process is fully described by its outputs for real,
nonnegative probe amplitudes: ``E(|r e^{i phi}><r e^{i phi}|) = U(phi) E(|r><r|) U(phi)^dag``.
Probe outputs are centered by their mean amplitude, the centered matrix elements
and the mean amplitude are fitted with low-degree polynomials in ``r``, and the
superoperator follows from integrating regularized P functions of ``|n><m|``
against the interpolated response over the probed disk.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from ._parallel import pmap
from .errors import NumericalContractError, TruncationError, ValidationError
from .fock import displace, displacement_matrix, hermitize, mean_amplitude, phase_shift
from .conventions import TRUNCATION_TOL
from .phasespace import alpha_mesh, regularized_p, regularized_p_fock_pairs

DEFAULT_DEGREE = 3
DEFAULT_MEAN_DEGREE = 2
DEFAULT_RESIDUAL_TOL = 0.05


@dataclass
class ProbeRecord:
    alpha: complex
    output: np.ndarray


@dataclass
class InterpolatedResponse:
    amplitudes: np.ndarray
    mean_amp_coeffs: np.ndarray  # increasing powers of r
    centered_coeffs: np.ndarray  # (degree + 1, dim, dim)
    degree: int
    dim: int
    probe_dim: int
    residual: float = 0.0
    phase_symmetric: bool = True

    @property
    def mean_degree(self):
        return len(self.mean_amp_coeffs) - 1

    @property
    def max_amplitude(self):
        return float(np.max(self.amplitudes))

    def mean_amplitude_at(self, r):
        return np.polynomial.polynomial.polyval(np.asarray(r, dtype=float), self.mean_amp_coeffs)

    def centered_at(self, r):
        r = np.asarray(r, dtype=float)
        powers = r[..., None] ** np.arange(self.degree + 1)
        return np.tensordot(powers, self.centered_coeffs, axes=([-1], [0]))


@dataclass
class Superoperator:
    """Rank-4 tensor ``tensor[l, k, n, m]``: output element (l, k) per input element (n, m)."""

    tensor: np.ndarray
    phase_symmetric: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=complex)
        if t.ndim != 4 or t.shape[0] != t.shape[1] or t.shape[2] != t.shape[3]:
            raise ValidationError(f"superoperator tensor must have shape (d_out, d_out, d_in, d_in), got {t.shape}")
        self.tensor = t

    @property
    def dim_out(self):
        return self.tensor.shape[0]

    @property
    def dim_in(self):
        return self.tensor.shape[2]


def identity_superoperator(dim):
    eye = np.eye(dim)
    return Superoperator(np.einsum("ln,km->lknm", eye, eye).astype(complex), phase_symmetric=True)


def _vandermonde(r, degree):
    return np.asarray(r, dtype=float)[:, None] ** np.arange(degree + 1)


def center_and_fit(probes, degree=DEFAULT_DEGREE, mean_degree=DEFAULT_MEAN_DEGREE, centered_dim=None,
                   residual_tol=DEFAULT_RESIDUAL_TOL):
    """Displacement-centered polynomial interpolation of probe outputs over amplitude."""
    if not probes:
        raise ValidationError("no probes given")
    dims = {np.shape(p.output)[0] for p in probes}
    if len(dims) != 1:
        raise ValidationError(f"probe outputs have mixed dimensions {sorted(dims)}")
    probe_dim = dims.pop()
    centered_dim = probe_dim if centered_dim is None else centered_dim
    amps = np.array([complex(p.alpha) for p in probes])
    if np.any(np.abs(amps.imag) > 1e-12) or np.any(amps.real < 0):
        raise ValidationError("probe amplitudes must be real and nonnegative; phase symmetry supplies the rest")
    r = amps.real
    order = np.argsort(r, kind="stable")
    r = r[order]
    need = max(degree, mean_degree) + 1
    if np.unique(r).size < need:
        raise ValidationError(f"{np.unique(r).size} distinct amplitudes cannot determine a degree-{need - 1} fit")

    means = np.empty(len(probes), dtype=complex)
    centered = np.empty((len(probes), centered_dim, centered_dim), dtype=complex)
    for i, j in enumerate(order):
        out = np.asarray(probes[j].output, dtype=complex)
        means[i] = mean_amplitude(out)
        centered[i] = displace(out, -means[i], dim_out=centered_dim)

    V = _vandermonde(r, degree)
    coef, *_ = np.linalg.lstsq(V, centered.reshape(len(r), -1), rcond=None)
    resid = np.abs(V @ coef - centered.reshape(len(r), -1)).max(axis=0)
    Vm = _vandermonde(r, mean_degree)
    mcoef, *_ = np.linalg.lstsq(Vm, means, rcond=None)
    mresid = float(np.abs(Vm @ mcoef - means).max())
    worst = int(np.argmax(resid))
    residual = max(float(resid[worst]), mresid)
    if residual > residual_tol:
        l, k = divmod(worst, centered_dim)
        where = f"element ({l}, {k})" if resid[worst] >= mresid else "mean amplitude"
        raise NumericalContractError(f"polynomial fit residual {residual:.3e} exceeds {residual_tol} at {where}")
    return InterpolatedResponse(
        amplitudes=r,
        mean_amp_coeffs=mcoef,
        centered_coeffs=coef.reshape(degree + 1, centered_dim, centered_dim),
        degree=degree,
        dim=centered_dim,
        probe_dim=probe_dim,
        residual=residual,
    )


def _check_range(fit, r):
    if np.max(r) > fit.max_amplitude * (1 + 1e-12) + 1e-12:
        raise ValidationError(f"|alpha|={np.max(r):.4g} beyond the probed range {fit.max_amplitude:.4g}; no extrapolation")


def _response_blocks(fit, radii, dim_out, chunk=2048):
    """Unnormalized ``dim_out`` blocks of the interpolated response at real amplitudes."""
    radii = np.asarray(radii, dtype=float)
    out = np.empty((radii.size, dim_out, dim_out), dtype=complex)
    for s in range(0, radii.size, chunk):
        r = radii[s:s + chunk]
        D = displacement_matrix(fit.mean_amplitude_at(r), dim_out, fit.dim)
        out[s:s + chunk] = D @ fit.centered_at(r) @ np.conj(D).swapaxes(-1, -2)
    return out


def response_at(fit, alpha, dim_out=None, allow_truncation=False, full_output=False):
    """Interpolated process output for the coherent input ``|alpha>``.

    Fits are evaluated at ``|alpha|``, re-displaced by the fitted mean amplitude and
    rotated by ``arg(alpha)``.  The result is projected onto the positive cone
    (the clipped weight is reported as ``info['clipped']``) and renormalized unless
    the population lost past ``dim_out`` exceeds the truncation tolerance, which
    raises (or, with ``allow_truncation``, returns the raw block).
    """
    alpha = complex(alpha)
    r = abs(alpha)
    _check_range(fit, r)
    dim_out = fit.probe_dim if dim_out is None else dim_out
    block = phase_shift(_response_blocks(fit, [r], dim_out)[0], np.angle(alpha))
    tr = float(np.trace(block).real)
    info = {"trace": tr}
    if 1.0 - tr > TRUNCATION_TOL:
        if not allow_truncation:
            raise TruncationError(f"response at |alpha|={r:.4g} loses {1 - tr:.3e} past dim={dim_out}", discarded=1 - tr)
        rho = block
    else:
        w, v = np.linalg.eigh(hermitize(block))
        info["clipped"] = float(-w[w < 0].sum())
        w = np.clip(w, 0.0, None)
        rho = hermitize((v * w) @ v.conj().T) / w.sum()
    return (rho, info) if full_output else rho


class _DiskQuadrature:
    """Grid nodes inside the probed disk, grouped by radius for the phase-symmetric response."""

    def __init__(self, fit, grid, dim_out):
        self.grid = grid
        alpha = alpha_mesh(grid).ravel()
        radius = fit.max_amplitude
        if np.sqrt(2.0) * radius > grid.half_extent:
            raise ValidationError(
                f"probe range |alpha| <= {radius:.3g} needs half_extent >= {np.sqrt(2) * radius:.3g}, grid has {grid.half_extent}"
            )
        self.mask = np.abs(alpha) <= radius
        nodes = alpha[self.mask]
        r2 = np.round(np.abs(nodes) ** 2, 10)
        uniq, inv = np.unique(r2, return_inverse=True)
        self.responses = _response_blocks(fit, np.sqrt(uniq), dim_out)
        self.aggregate = scipy.sparse.csr_matrix(
            (np.ones(nodes.size), (inv, np.arange(nodes.size))), shape=(uniq.size, nodes.size)
        )
        self.dim_out = dim_out
        offsets = np.arange(-(dim_out - 1), dim_out)
        self.harmonics = np.exp(1j * np.angle(nodes)[:, None] * offsets[None, :])
        l = np.arange(dim_out)
        self.sector = (l[:, None] - l[None, :]) + dim_out - 1

    def integrate(self, values):
        """``iint P(alpha) E(|alpha><alpha|) dx dp`` over the disk, for a P field on the grid."""
        w = np.asarray(values).ravel()[self.mask] * self.grid.cell_area
        B = self.aggregate @ (w[:, None] * self.harmonics)
        return np.einsum("ulk,ulk->lk", B[:, self.sector], self.responses)

    def integrate_pair(self, values):
        """Integrals for a P field and for its complex conjugate."""
        w = np.asarray(values).ravel()[self.mask] * self.grid.cell_area
        B = self.aggregate @ (w[:, None] * self.harmonics)
        Bc = np.conj(B[:, ::-1])
        return (np.einsum("ulk,ulk->lk", B[:, self.sector], self.responses),
                np.einsum("ulk,ulk->lk", Bc[:, self.sector], self.responses))


def sector_mask(dim_out, dim_in):
    """True where ``l - k == n - m``, the only elements a phase-symmetric process may populate."""
    lo = np.arange(dim_out)
    li = np.arange(dim_in)
    d_out = lo[:, None] - lo[None, :]
    d_in = li[:, None] - li[None, :]
    return d_out[:, :, None, None] == d_in[None, None, :, :]


def enforce_phase_symmetry(sop):
    """Zero the off-sector elements; returns the new operator and the removed Frobenius fraction."""
    keep = sector_mask(sop.dim_out, sop.dim_in)
    total = np.linalg.norm(sop.tensor)
    removed = np.linalg.norm(sop.tensor[~keep]) / total if total > 0 else 0.0
    tensor = np.where(keep, sop.tensor, 0.0)
    diag = dict(sop.diagnostics, removed_mass=float(removed))
    return Superoperator(tensor, phase_symmetric=True, diagnostics=diag), float(removed)


def reconstruct_superoperator(fit, L, grid, dim_in, dim_out=None, alpha_max_required=None):
    """Superoperator ``E[l, k, n, m] = iint P_L[n, m](x, p) rho_out(alpha)[l, k] dx dp``.

    The integral runs over grid nodes inside the probed disk.  Off-sector elements
    are removed afterwards; their Frobenius fraction is kept in
    ``diagnostics['removed_mass']``.
    """
    grid.check_supports(L)
    dim_out = dim_in if dim_out is None else dim_out
    if alpha_max_required is not None and fit.max_amplitude < alpha_max_required:
        warnings.warn(
            f"probes reach |alpha|={fit.max_amplitude:.3g} but {alpha_max_required:.3g} is required; "
            f"shortfall {alpha_max_required - fit.max_amplitude:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    quad = _DiskQuadrature(fit, grid, dim_out)
    tensor = np.zeros((dim_out, dim_out, dim_in, dim_in), dtype=complex)

    def work(item):
        n, m, P = item
        return n, m, quad.integrate_pair(P)

    for n, m, (e_nm, e_mn) in pmap(work, regularized_p_fock_pairs(dim_in, L, grid)):
        tensor[:, :, n, m] = e_nm
        if m != n:
            tensor[:, :, m, n] = e_mn
    raw = Superoperator(tensor, diagnostics={"L": L, "disk_radius": fit.max_amplitude, "nodes": int(quad.mask.sum())})
    sop, _ = enforce_phase_symmetry(raw)
    return sop


def predict_output_direct(rho, fit, L, grid, dim_out=None, full_output=False):
    """Process output from the regularized P function of ``rho``, bypassing the tensor."""
    rho = np.asarray(rho, dtype=complex)
    dim_out = rho.shape[0] if dim_out is None else dim_out
    grid.check_supports(L)
    P = regularized_p(rho, L, grid)
    out = _DiskQuadrature(fit, grid, dim_out).integrate(P.values)
    tr = float(np.trace(out).real)
    if tr <= 0:
        raise NumericalContractError(f"predicted output has nonpositive trace {tr:.3e}")
    out = hermitize(out) / tr
    return (out, {"trace": tr}) if full_output else out


def apply_superoperator(sop, rho, full_output=False):
    """Contract ``E[l, k, n, m] rho[n, m]``, then Hermitize and renormalize."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (sop.dim_in, sop.dim_in):
        raise ValidationError(f"state of shape {rho.shape} does not match superoperator input dim {sop.dim_in}")
    out = np.einsum("lknm,nm->lk", sop.tensor, rho)
    tr = float(np.trace(out).real)
    if tr <= 0:
        raise NumericalContractError(f"superoperator output has nonpositive trace {tr:.3e}")
    result = hermitize(out) / tr
    if full_output:
        return result, {"trace": tr, "hermiticity_defect": float(np.abs(out - out.conj().T).max())}
    return result


def trace_preservation_defect(sop):
    """``max_{n,m} |sum_l E[l, l, n, m] - delta_nm|``."""
    tr = np.einsum("llnm->nm", sop.tensor)
    return float(np.abs(tr - np.eye(sop.dim_in)).max())


def choi_matrix(sop):
    """Choi matrix indexed ``C[(n, l), (m, k)] = E[l, k, n, m]``."""
    di, do = sop.dim_in, sop.dim_out
    return sop.tensor.transpose(2, 0, 3, 1).reshape(di * do, di * do)


def choi_min_eigenvalue(sop):
    return float(np.linalg.eigvalsh(hermitize(choi_matrix(sop))).min())
