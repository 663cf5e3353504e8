"""Choice of the regularization cutoff L and the probe range from Fock-state worst cases.

For states confined to the first ``N + 1`` Fock levels the Fock state ``|N>`` is
the hardest to represent with a band-limited P function, so both parameters are
calibrated on ``|N>`` alone.  Fidelities with a pure target reduce to
``<N|rho|N>`` of the renormalized round-trip matrix.
"""

from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import eval_laguerre

from ._parallel import pmap
from .errors import ValidationError
from .phasespace import GL_ROLLOFF, GridSpec, _coherent_matrix, alpha_mesh, regularized_p_fock_pair

L_STEP = 0.1
ALPHA_STEP = 0.25
#: Fock levels kept above N in the round-trip matrix
DIM_MARGIN = 12


@dataclass(frozen=True)
class CalibrationCurve:
    n_values: tuple
    parameter_values: tuple
    target_fidelity: float
    parameter: str = "L"

    def is_nondecreasing(self):
        return bool(np.all(np.diff(self.parameter_values) >= -1e-12))


def _check_target(n, target_fidelity):
    if n < 0:
        raise ValidationError("n must be nonnegative")
    if not 0.0 < target_fidelity < 1.0:
        raise ValidationError(f"target fidelity must lie in (0, 1), got {target_fidelity}")


def _fock_fidelity(rho, n):
    return float(rho[n, n].real / np.trace(rho).real)


def round_trip_fidelity(n, L, grid=GridSpec(), dim=None):
    """Fidelity of ``|n>`` with the state rebuilt from its regularized P function."""
    dim = n + DIM_MARGIN if dim is None else dim
    P = regularized_p_fock_pair(n, n, L, grid).values.real.ravel() * grid.cell_area
    C = _coherent_matrix(grid, dim)
    rho = (C * P[:, None]).T @ C.conj()
    return _fock_fidelity(rho, n)


def required_L(n, target_fidelity, grid=GridSpec()):
    """Smallest L on the 0.1 ladder whose round trip of ``|n>`` reaches the target."""
    _check_target(n, target_fidelity)
    top = grid.k_extent - GL_ROLLOFF
    steps = int(np.floor(top / L_STEP + 1e-9))
    for i in range(1, steps + 1):
        L = round(i * L_STEP, 10)
        if round_trip_fidelity(n, L, grid) >= target_fidelity:
            return L
    need = int(2 ** np.ceil(np.log2(2 * grid.points_per_axis)))
    raise ValidationError(
        f"|{n}> does not reach fidelity {target_fidelity} for L <= {top:.3g} on this grid; "
        f"try points_per_axis={need}"
    )


def _disk_fidelities(n, L, radii, grid, dim):
    """Round-trip fidelity of ``|n>`` with the quadrature cut to each disk radius."""
    P = regularized_p_fock_pair(n, n, L, grid).values.real.ravel() * grid.cell_area
    r = np.abs(alpha_mesh(grid)).ravel()
    C = _coherent_matrix(grid, dim)
    shell = np.searchsorted(radii, r, side="left")
    rho = np.zeros((dim, dim), dtype=complex)
    out = np.empty(len(radii))
    for i in range(len(radii)):
        sel = shell == i
        rho += (C[sel] * P[sel, None]).T @ C[sel].conj()
        out[i] = _fock_fidelity(rho, n) if np.trace(rho).real > 0 else -np.inf
    return out


def required_alpha_max(n, target_fidelity, L=None, grid=GridSpec()):
    """Smallest disk radius on the 0.25 ladder that keeps the round trip within target.

    The fidelity of a non-positive Klauder matrix can overshoot 1, so a radius
    qualifies when ``|1 - F| <= 1 - target`` holds for it and every larger radius
    on the ladder.  ``L`` defaults to :func:`required_L` at the same target.
    """
    _check_target(n, target_fidelity)
    L = required_L(n, target_fidelity, grid) if L is None else L
    grid.check_supports(L)
    top = grid.half_extent / np.sqrt(2.0)
    radii = ALPHA_STEP * np.arange(1, int(np.floor(top / ALPHA_STEP)) + 1)
    fid = _disk_fidelities(n, L, radii, grid, n + DIM_MARGIN)
    ok = np.abs(1.0 - fid) <= 1.0 - target_fidelity
    if not ok[-1]:
        raise ValidationError(
            f"|{n}> misses fidelity {target_fidelity} even at radius {radii[-1]} (F={fid[-1]:.6f}); "
            "enlarge half_extent or raise L"
        )
    bad = np.flatnonzero(~ok)
    first = 0 if bad.size == 0 else bad[-1] + 1
    return float(radii[first])


def wigner_mass_radius(n, mass=0.99):
    """Radius in ``|alpha|`` beyond which the enclosed Wigner weight of ``|n>`` stays >= ``mass``."""
    r = np.linspace(0.0, np.sqrt(n + 1.0) + 6.0, 20001)
    W = (-1) ** n * np.exp(-2 * r**2) * eval_laguerre(n, 4 * r**2) / np.pi
    # dx dp = 2 d^2 alpha = 4 pi r dr on circles
    enclosed = cumulative_trapezoid(4 * np.pi * r * W, r, initial=0.0)
    below = np.flatnonzero(enclosed < mass)
    return float(r[below[-1] + 1]) if below.size else 0.0


def calibration_curve(parameter, max_n, target_fidelity, grid=GridSpec(), L=None):
    """``required_L`` or ``required_alpha_max`` for ``n = 0..max_n``."""
    if parameter == "L":
        fn = partial(required_L, target_fidelity=target_fidelity, grid=grid)
    elif parameter == "alpha_max":
        fn = partial(required_alpha_max, target_fidelity=target_fidelity, L=L, grid=grid)
    else:
        raise ValidationError(f"unknown calibration parameter {parameter!r}")
    ns = tuple(range(max_n + 1))
    return CalibrationCurve(ns, tuple(pmap(fn, ns)), target_fidelity, parameter)
