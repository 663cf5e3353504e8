"""Wigner and regularized Glauber-Sudarshan functions on FFT grids.

All fields live on a square ``(x, p)`` grid or its conjugate ``(k_x, k_p)`` grid.
The continuous Fourier convention is

    F(k_x, k_p) = iint f(x, p) exp(-i (k_x x + k_p p)) dx dp,

under which the vacuum Wigner function transforms to ``exp(-|k|^2 / 4)`` and the
P function of any state obeys ``P~ = W~ exp(|k|^2 / 4)`` exactly.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from ._parallel import thread_count
from .conventions import xp_to_alpha
from .errors import NumericalContractError, ValidationError
from .fock import coherent_amplitudes, hermitize

POSITION = "xp"
FREQUENCY = "k"

# exp() overflows past ~709; values beyond this exponent are never meaningful here
_MAX_EXPONENT = 700.0
#: room in k-space needed beyond L for the G_L roll-off
GL_ROLLOFF = 4.0


@dataclass(frozen=True)
class GridSpec:
    """Square grid spanning ``[-half_extent, half_extent)`` on both axes."""

    half_extent: float = 12.0
    points_per_axis: int = 512

    def __post_init__(self):
        n = self.points_per_axis
        if n < 64 or n & (n - 1):
            raise ValidationError(f"points_per_axis must be a power of two >= 64, got {n}")
        if not self.half_extent > 0:
            raise ValidationError("half_extent must be positive")

    @property
    def spacing(self):
        return 2.0 * self.half_extent / self.points_per_axis

    @property
    def axis(self):
        return (np.arange(self.points_per_axis) - self.points_per_axis // 2) * self.spacing

    @property
    def k_spacing(self):
        return np.pi / self.half_extent

    @property
    def k_axis(self):
        return (np.arange(self.points_per_axis) - self.points_per_axis // 2) * self.k_spacing

    @property
    def k_extent(self):
        """Half-width of the conjugate grid, ``pi N / (2 half_extent)``."""
        return np.pi * self.points_per_axis / (2.0 * self.half_extent)

    @property
    def cell_area(self):
        return self.spacing**2

    def check_supports(self, L):
        if self.k_extent <= L + GL_ROLLOFF:
            need = int(2 ** np.ceil(np.log2((L + GL_ROLLOFF) * 2 * self.half_extent / np.pi + 1)))
            raise ValidationError(
                f"grid k-extent {self.k_extent:.3g} cannot hold L={L} plus roll-off; "
                f"use points_per_axis >= {need} at half_extent {self.half_extent}"
            )


@dataclass
class PhaseSpaceField:
    grid: GridSpec
    domain: str
    values: np.ndarray

    def __post_init__(self):
        if self.domain not in (POSITION, FREQUENCY):
            raise ValidationError(f"unknown domain tag {self.domain!r}")
        if not np.all(np.isfinite(self.values)):
            raise NumericalContractError("phase-space field has non-finite values")

    @property
    def axis(self):
        return self.grid.axis if self.domain == POSITION else self.grid.k_axis


@lru_cache(maxsize=8)
def _mesh(grid):
    x = grid.axis
    X, P = np.meshgrid(x, x, indexing="ij")
    return X, P


@lru_cache(maxsize=8)
def _k_mesh(grid):
    k = grid.k_axis
    return np.meshgrid(k, k, indexing="ij")


def alpha_mesh(grid):
    X, P = _mesh(grid)
    return xp_to_alpha(X, P)


def _fft_workers():
    return thread_count()


def fourier2(values, grid):
    """Continuum-normalized forward transform of a position-space array."""
    f = scipy.fft.fft2(np.fft.ifftshift(values), workers=_fft_workers())
    return grid.cell_area * np.fft.fftshift(f)


def inverse_fourier2(values, grid):
    f = scipy.fft.ifft2(np.fft.ifftshift(values), workers=_fft_workers())
    return np.fft.fftshift(f) / grid.cell_area


def wigner_kernels(dim, grid, max_index=None):
    """Yield ``(n, d, K)`` with ``K`` the Wigner function of ``|n><n+d|``.

    Kernels follow from the generalized Laguerre form
    ``(-1)^n sqrt(n!/(n+d)!) (2 alpha)^d exp(-2|alpha|^2) L_n^(d)(4|alpha|^2) / pi``,
    propagated in ``n`` on the normalized functions so nothing overflows.  The
    kernel of ``|n+d><n|`` is ``conj(K)``.
    """
    alpha = alpha_mesh(grid)
    y = 4.0 * np.abs(alpha) ** 2
    two_alpha = 2.0 * alpha
    top = dim if max_index is None else max_index
    head = np.exp(-0.5 * y) / np.pi
    for d in range(dim):
        if d > 0:
            head = head * two_alpha / np.sqrt(d)
        prev, cur = None, head
        for n in range(min(dim - d, top)):
            yield n, d, cur
            nxt = (2 * n + 1 + d - y) * cur
            if prev is not None:
                nxt += np.sqrt(n * (n + d)) * prev
            prev, cur = cur, -nxt / np.sqrt((n + 1) * (n + 1 + d))


def wigner_kernel(n, m, grid):
    """Wigner function of the (generally non-Hermitian) operator ``|n><m|``."""
    lo, d = min(n, m), abs(n - m)
    for i, dd, K in wigner_kernels(lo + d + 1, grid):
        if dd == d and i == lo:
            return K.copy() if m >= n else np.conj(K)
    raise AssertionError("unreachable")


def _wigner_values(rho, grid):
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    W = np.zeros((grid.points_per_axis,) * 2, dtype=complex)
    for n, d, K in wigner_kernels(dim, grid):
        up, down = rho[n, n + d], rho[n + d, n]
        if d == 0:
            if up != 0:
                W += up * K
            continue
        if up != 0:
            W += up * K
        if down != 0:
            W += down * np.conj(K)
    return W


def _check_boundary(values, what):
    edge = max(np.abs(values[0]).max(), np.abs(values[-1]).max(), np.abs(values[:, 0]).max(), np.abs(values[:, -1]).max())
    if edge > 1e-10:
        warnings.warn(f"{what} reaches {edge:.2e} at the grid boundary; enlarge half_extent", RuntimeWarning, stacklevel=3)


def wigner(rho, grid=GridSpec()):
    """Wigner function normalized so that ``iint W dx dp = Tr rho``."""
    W = _wigner_values(rho, grid)
    _check_boundary(W, "Wigner function")
    rho = np.asarray(rho)
    if np.allclose(rho, rho.conj().T, atol=1e-12):
        W = W.real.astype(complex)
    return PhaseSpaceField(grid, POSITION, W)


def _gl_f(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    yp = y[pos]
    out[pos] = yp**4 * np.exp(-1.0 / yp**2)
    return out


def gl_exponent(kx, kp, L):
    """``-log G_L``: the sum of the four one-sided bump terms."""
    kx = np.asarray(kx, dtype=float)
    kp = np.asarray(kp, dtype=float)
    return _gl_f(kx - L) + _gl_f(-kx - L) + _gl_f(kp - L) + _gl_f(-kp - L)


def evaluate_gl(kx, kp, L):
    """Low-pass window equal to one on ``max(|k_x|, |k_p|) <= L``."""
    if not L > 0:
        raise ValidationError("L must be positive")
    g = np.exp(-gl_exponent(kx, kp, L))
    return float(g) if np.ndim(g) == 0 else g


def _p_tilde_from_wigner(W, grid, L=None):
    KX, KP = _k_mesh(grid)
    expo = 0.25 * (KX**2 + KP**2)
    if L is not None:
        expo = expo - gl_exponent(KX, KP, L)
    Wt = fourier2(W, grid)
    gain = np.exp(np.minimum(expo, _MAX_EXPONENT))
    gain[expo < -_MAX_EXPONENT] = 0.0
    return Wt * gain


def p_tilde_from_state(rho, grid=GridSpec()):
    """Fourier transform of the P function, ``W~ exp(|k|^2/4)``.

    Without regularization the gain explodes at large ``|k|``; the exponent is
    capped so the field stays finite, and only the region a later ``G_L`` keeps
    is physically meaningful.
    """
    W = _wigner_values(rho, grid)
    return PhaseSpaceField(grid, FREQUENCY, _p_tilde_from_wigner(W, grid))


def regularized_p_tilde(rho, L, grid=GridSpec()):
    """``P~ G_L``, the Klauder-filtered transform."""
    grid.check_supports(L)
    W = _wigner_values(rho, grid)
    return PhaseSpaceField(grid, FREQUENCY, _p_tilde_from_wigner(W, grid, L))


def _regularize(W, L, grid):
    return inverse_fourier2(_p_tilde_from_wigner(W, grid, L), grid)


def regularized_p(rho, L, grid=GridSpec()):
    """Regularized P function ``P_L`` on the position grid."""
    grid.check_supports(L)
    rho = np.asarray(rho, dtype=complex)
    P = _regularize(_wigner_values(rho, grid), L, grid)
    if np.allclose(rho, rho.conj().T, atol=1e-12):
        P = P.real.astype(complex)
    return PhaseSpaceField(grid, POSITION, P)


def regularized_p_fock_pair(n, m, L, grid=GridSpec()):
    """``P_L`` of the operator ``|n><m|``; ``P_L(m, n) = conj(P_L(n, m))``."""
    if n < 0 or m < 0:
        raise ValidationError("Fock indices must be nonnegative")
    grid.check_supports(L)
    return PhaseSpaceField(grid, POSITION, _regularize(wigner_kernel(n, m, grid), L, grid))


def regularized_p_fock_pairs(dim, L, grid=GridSpec()):
    """Yield ``(n, m, P_L)`` for ``n <= m < dim``; the lower triangle follows by conjugation."""
    grid.check_supports(L)
    for n, d, K in wigner_kernels(dim, grid):
        yield n, n + d, _regularize(K, L, grid)


@lru_cache(maxsize=2)
def _coherent_matrix(grid, dim):
    return coherent_amplitudes(alpha_mesh(grid).ravel(), dim)


def disk_mask(grid, radius):
    """Grid nodes with ``|alpha| <= radius``."""
    return np.abs(alpha_mesh(grid)) <= radius


def p_integral(values, grid, dim, radius=None):
    """Unnormalized ``iint P |alpha><alpha| dx dp`` restricted to ``dim`` Fock states."""
    C = _coherent_matrix(grid, dim)
    w = np.asarray(values).ravel() * grid.cell_area
    if radius is not None:
        keep = disk_mask(grid, radius).ravel()
        C, w = C[keep], w[keep]
    return (C * w[:, None]).T @ C.conj()


def state_from_p(p_field, dim, radius=None, full_output=False, trace_tol=0.05):
    """Density matrix ``iint P(x, p) |alpha><alpha| dx dp`` by Riemann sum.

    The result is Hermitized and renormalized; ``full_output`` also returns the
    trace before renormalization.  ``radius`` restricts the quadrature to the disk
    ``|alpha| <= radius`` (the trace check is then skipped).
    """
    if p_field.domain != POSITION:
        raise ValidationError("state_from_p needs a position-space field")
    rho = p_integral(p_field.values, p_field.grid, dim, radius)
    tr = float(np.trace(rho).real)
    if radius is None and abs(tr - 1.0) > trace_tol:
        raise NumericalContractError(
            f"P-function quadrature has trace {tr:.4f}; the grid or L is mismatched to the state"
        )
    if tr <= 0:
        raise NumericalContractError(f"P-function quadrature has nonpositive trace {tr:.3e}")
    rho = hermitize(rho) / tr
    if full_output:
        return rho, {"trace": tr}
    return rho
