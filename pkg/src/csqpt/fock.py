"""Truncated Fock-space states, operators and figures of merit.

Density matrices are plain ``numpy`` arrays of shape ``(dim, dim)`` indexed by
photon number.  Coherent amplitudes are Python/numpy complex numbers.
"""

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaincc, gammaln

from .conventions import HERMITIAN_TOL, PHASE_SIGN, PSD_TOL, TRUNCATION_TOL, VACUUM_VARIANCE
from .errors import NumericalContractError, TruncationError, ValidationError

#: squeezed vacuum used for the verification run, in dB relative to vacuum noise
REFERENCE_SQUEEZING_DB = -1.58
REFERENCE_ANTISQUEEZING_DB = 2.91


def annihilation(dim):
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def hermitize(m):
    m = np.asarray(m)
    return 0.5 * (m + m.conj().swapaxes(-1, -2))


def check_density_matrix(rho, *, trace_tol=1e-9, psd_tol=PSD_TOL, hermitian_tol=HERMITIAN_TOL):
    """Validate ``rho`` against the density-matrix invariants and return it as complex.

    Raises ``ValidationError`` naming the first violated invariant.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
        raise ValidationError(f"density matrix must be square and non-empty, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValidationError("density matrix has non-finite entries")
    dev = np.abs(rho - rho.conj().T)
    if dev.max() > hermitian_tol:
        n, m = np.unravel_index(np.argmax(dev), dev.shape)
        raise ValidationError(f"density matrix is not Hermitian at entry ({n}, {m}): deviation {dev[n, m]:.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValidationError(f"density matrix trace is {tr:.12g}, expected 1")
    lo = np.linalg.eigvalsh(hermitize(rho)).min()
    if lo < -psd_tol:
        raise ValidationError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def normalize(rho):
    """Hermitize and rescale to unit trace; returns ``(rho, trace_before)``."""
    rho = hermitize(rho)
    tr = np.trace(rho).real
    if tr <= 0:
        raise NumericalContractError(f"cannot normalize operator with trace {tr:.3e}")
    return rho / tr, tr


def required_dim(alpha, tol=TRUNCATION_TOL):
    """Smallest cutoff keeping the discarded population of ``|alpha>`` below ``tol``."""
    dim = 1
    while _discarded_coherent(alpha, dim) > tol:
        dim += 1
    return dim


def required_displaced_dim(beta, block_dim, tol=TRUNCATION_TOL):
    """Smallest cutoff holding ``D(beta)|n>`` for every ``n < block_dim`` within ``tol``."""
    dim = required_dim(beta, tol) + block_dim
    while True:
        kept = np.cumsum(np.abs(displacement_matrix(beta, dim, block_dim)) ** 2, axis=0).min(axis=1)
        ok = np.flatnonzero(kept >= 1.0 - tol)
        if ok.size:
            return int(ok[0]) + 1
        dim *= 2


def _discarded_coherent(alpha, dim):
    mean = abs(alpha) ** 2
    if mean == 0:
        return 0.0
    # Poisson CDF: P(n < dim) = Q(dim, |alpha|^2)
    return float(1.0 - gammaincc(dim, mean))


def coherent_amplitudes(alpha, dim):
    """Untruncated amplitudes <n|alpha> for n < dim (vectorized over ``alpha``)."""
    alpha = np.asarray(alpha, dtype=complex)
    out = np.empty(alpha.shape + (dim,), dtype=complex)
    out[..., 0] = np.exp(-0.5 * np.abs(alpha) ** 2)
    for n in range(1, dim):
        out[..., n] = out[..., n - 1] * alpha / np.sqrt(n)
    return out


def coherent_state(alpha, dim, allow_truncation=False):
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    alpha = complex(alpha)
    lost = _discarded_coherent(alpha, dim)
    if lost > TRUNCATION_TOL and not allow_truncation:
        raise TruncationError(
            f"coherent state |alpha|={abs(alpha):.4g} loses {lost:.3e} of its population at dim={dim}; "
            f"need dim >= {required_dim(alpha)}",
            discarded=lost,
        )
    c = coherent_amplitudes(alpha, dim)
    rho = np.outer(c, c.conj())
    return rho / np.trace(rho).real


def fock_state(n, dim):
    if not 0 <= n < dim:
        raise ValidationError(f"Fock index {n} outside cutoff {dim}")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    return rho


def thermal_state(nbar, dim, allow_truncation=False):
    if nbar < 0:
        raise ValidationError("mean photon number must be nonnegative")
    n = np.arange(dim)
    if nbar == 0:
        p = (n == 0).astype(float)
    else:
        p = (nbar / (nbar + 1.0)) ** n / (nbar + 1.0)
    lost = 1.0 - p.sum()
    if lost > TRUNCATION_TOL and not allow_truncation:
        raise TruncationError(f"thermal state loses {lost:.3e} at dim={dim}", discarded=lost)
    return np.diag(p / p.sum()).astype(complex)


def squeezed_thermal_state(var_min, var_max, theta=0.0, dim=20):
    """Zero-mean Gaussian state with quadrature variance ``var_max`` along ``theta``
    and ``var_min`` along ``theta + pi/2``.

    Built as a thermal state squeezed in a padded working space; the padding is
    cropped and the discarded population checked against the truncation policy.
    """
    if var_min > var_max:
        raise ValidationError("var_min must not exceed var_max")
    if var_min <= 0 or var_min * var_max < VACUUM_VARIANCE**2 - 1e-12:
        raise ValidationError(
            f"variances ({var_min}, {var_max}) violate the uncertainty bound var_min*var_max >= 1/4"
        )
    geo = max(np.sqrt(var_min * var_max), VACUUM_VARIANCE)
    nbar = geo - 0.5
    r = 0.5 * np.log(geo / var_min)

    work = dim + 80
    rho = thermal_state(nbar, work, allow_truncation=True)
    a = annihilation(work)
    # S(r) = exp(r/2 (a^2 - a^dag^2)) squeezes x: Var(x) = geo * exp(-2r)
    squeeze = expm(0.5 * r * (a @ a - a.conj().T @ a.conj().T))
    rho = squeeze @ rho @ squeeze.conj().T
    block = rho[:dim, :dim]
    lost = 1.0 - np.trace(block).real
    if lost > TRUNCATION_TOL:
        raise TruncationError(f"squeezed state loses {lost:.3e} of its population at dim={dim}", discarded=lost)
    block = hermitize(block) / np.trace(block).real
    # x now carries var_min; rotate so var_max lands on theta
    return phase_shift(block, theta - np.pi / 2)


def reference_squeezed_vacuum(dim=20, theta=0.0):
    """The -1.58 dB / +2.91 dB squeezed vacuum, anti-squeezed axis along ``theta``."""
    vmin = VACUUM_VARIANCE * 10 ** (REFERENCE_SQUEEZING_DB / 10)
    vmax = VACUUM_VARIANCE * 10 ** (REFERENCE_ANTISQUEEZING_DB / 10)
    return squeezed_thermal_state(vmin, vmax, theta, dim)


def psd_sqrt(m, tol=PSD_TOL):
    """Matrix square root of a PSD matrix; eigenvalues in ``[-tol, 0)`` are clamped.

    Eigenvalues at rounding level are set to zero so that rank-deficient inputs
    do not pick up ``sqrt(eps)``-sized spurious components.
    """
    w, v = np.linalg.eigh(hermitize(m))
    if w.min() < -tol:
        raise NumericalContractError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    floor = 10 * w.size * np.finfo(float).eps * max(w.max(), 0.0)
    w = np.where(w > floor, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, sigma, psd_tol=PSD_TOL, allow_nonpositive=False):
    """Uhlmann fidelity ``[Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2``.

    Evaluated as the squared nuclear norm of ``sqrt(rho) sqrt(sigma)``, which is
    symmetric in the arguments.  With ``allow_nonpositive`` one argument may have
    negative eigenvalues (as the Klauder approximation of a state does); the
    square root is then taken of the positive argument only and negative
    eigenvalues of the sandwiched product are dropped.
    """
    rho = hermitize(np.asarray(rho, dtype=complex))
    sigma = hermitize(np.asarray(sigma, dtype=complex))
    if rho.shape != sigma.shape:
        raise ValidationError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    lo_r = np.linalg.eigvalsh(rho).min()
    lo_s = np.linalg.eigvalsh(sigma).min()
    if min(lo_r, lo_s) >= -psd_tol:
        sv = np.linalg.svd(psd_sqrt(rho, psd_tol) @ psd_sqrt(sigma, psd_tol), compute_uv=False)
        return float(np.sum(sv) ** 2)
    if not allow_nonpositive:
        raise NumericalContractError(f"fidelity input not positive semidefinite (min eigenvalue {min(lo_r, lo_s):.3e})")
    if lo_s > lo_r:
        rho, sigma = sigma, rho
    root = psd_sqrt(rho, tol=psd_tol)
    w = np.linalg.eigvalsh(hermitize(root @ sigma @ root))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def displacement_matrix(beta, dim_out, dim_in=None):
    """Exact matrix elements ``<m|D(beta)|n>`` for ``m < dim_out``, ``n < dim_in``.

    Closed Laguerre form (for m >= n)
    ``sqrt(n!/m!) beta^(m-n) exp(-|beta|^2/2) L_n^(m-n)(|beta|^2)``, evaluated with
    a log-scaled prefactor.  ``beta`` may be an array; the result then has shape
    ``beta.shape + (dim_out, dim_in)``.
    """
    dim_in = dim_out if dim_in is None else dim_in
    beta = np.asarray(beta, dtype=complex)[..., None, None]
    m = np.arange(dim_out)[:, None]
    n = np.arange(dim_in)[None, :]
    lo = np.minimum(m, n)
    k = np.abs(m - n)
    x = np.abs(beta) ** 2
    safe = np.where(x > 0, np.abs(beta), 1.0)
    log_pref = 0.5 * (gammaln(lo + 1) - gammaln(lo + k + 1)) + k * np.log(safe) - 0.5 * x
    # below the diagonal beta^k, above it (-conj beta)^k
    phase = np.where(m >= n, np.exp(1j * k * np.angle(beta)), (-1.0) ** k * np.exp(-1j * k * np.angle(beta)))
    out = np.exp(log_pref) * phase * eval_genlaguerre(lo, k, x)
    return np.where((x == 0) & (k > 0), 0.0, out)


def displace(rho, beta, dim_out=None, allow_truncation=False):
    """``D(beta) rho D(beta)^dag`` projected onto the first ``dim_out`` Fock states."""
    rho = np.asarray(rho, dtype=complex)
    dim_out = rho.shape[0] if dim_out is None else dim_out
    d = displacement_matrix(beta, dim_out, rho.shape[0])
    out = d @ rho @ d.conj().T
    lost = np.trace(rho).real - np.trace(out).real
    if lost > TRUNCATION_TOL and not allow_truncation:
        raise TruncationError(
            f"displacement by {complex(beta):.4g} pushes {lost:.3e} of the population past dim={dim_out}",
            discarded=lost,
        )
    return out


def phase_shift(rho, phi):
    """``U(phi) rho U(phi)^dag`` with ``U(phi)|n> = exp(i n phi)|n>``."""
    rho = np.asarray(rho, dtype=complex)
    n = np.arange(rho.shape[0])
    return rho * np.exp(1j * PHASE_SIGN * phi * (n[:, None] - n[None, :]))


def mean_amplitude(rho):
    """``Tr(a rho)``."""
    rho = np.asarray(rho)
    return complex(np.sum(np.sqrt(np.arange(1, rho.shape[0])) * np.diagonal(rho, -1)))


def _second_moments(rho):
    rho = np.asarray(rho)
    n = np.arange(rho.shape[0])
    nbar = float(np.sum(n * np.diagonal(rho).real))
    a2 = complex(np.sum(np.sqrt(n[1:-1] * n[2:]) * np.diagonal(rho, -2))) if rho.shape[0] > 2 else 0j
    return nbar, a2


def quadrature_mean(rho, theta):
    return float(np.sqrt(2.0) * (mean_amplitude(rho) * np.exp(-1j * theta)).real)


def quadrature_variance(rho, theta):
    """Variance of ``x cos(theta) + p sin(theta)``; the vacuum gives 1/2."""
    a = mean_amplitude(rho)
    nbar, a2 = _second_moments(rho)
    c = a2 - a * a
    return float(0.5 + nbar - abs(a) ** 2 + (c * np.exp(-2j * theta)).real)


def quadrature_extrema(rho):
    """``(max_variance, min_variance, theta_of_max)`` over all quadrature angles."""
    a = mean_amplitude(rho)
    nbar, a2 = _second_moments(rho)
    c = a2 - a * a
    base = 0.5 + nbar - abs(a) ** 2
    return base + abs(c), base - abs(c), 0.5 * np.angle(c)
