"""Physical conventions shared by every module.

Quadratures are ``x = (a + a^dag)/sqrt(2)`` and ``p = (a - a^dag)/(i sqrt(2))``
so that ``[x, p] = i`` and the vacuum has quadrature variance 1/2.  A coherent
amplitude ``alpha`` sits at ``(x, p) = (sqrt(2) Re alpha, sqrt(2) Im alpha)``.
The phase-shift operator acts as ``U(phi)|n> = exp(i n phi)|n>``, so
``U(phi)|alpha> = |alpha exp(i phi)>``.

Phase-space integrals are carried out in ``(x, p)`` coordinates, where
``d^2 alpha = dx dp / 2``.  A P function normalized with ``iint P dx dp = Tr rho``
then satisfies ``rho = iint P(x, p) |alpha><alpha| dx dp``.
"""

import numpy as np

HBAR = 1.0
VACUUM_VARIANCE = 0.5
#: sign of the exponent in U(phi)|n> = exp(PHASE_SIGN * i n phi)|n>
PHASE_SIGN = 1

#: largest population a truncation may silently discard
TRUNCATION_TOL = 1e-6
#: smallest eigenvalue tolerated before a matrix counts as non-positive
PSD_TOL = 1e-9
HERMITIAN_TOL = 1e-12


def alpha_to_xp(alpha):
    alpha = np.asarray(alpha)
    return np.sqrt(2.0) * alpha.real, np.sqrt(2.0) * alpha.imag


def xp_to_alpha(x, p):
    return (np.asarray(x) + 1j * np.asarray(p)) / np.sqrt(2.0)


def variance_to_db(variance):
    """Quadrature variance relative to vacuum noise, in decibels."""
    return 10.0 * np.log10(np.asarray(variance) / VACUUM_VARIANCE)


def db_to_variance(db):
    return VACUUM_VARIANCE * 10.0 ** (np.asarray(db) / 10.0)
