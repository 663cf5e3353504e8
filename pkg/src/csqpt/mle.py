"""Simulated homodyne tomography and iterative maximum-likelihood reconstruction.

Quadratures are normalized to vacuum variance 1/2.  The reconstruction is the
R-rho-R expectation-maximization scheme on binned data: each phase's samples
are histogrammed and the POVM is integrated over every bin, which keeps the
cost per iteration independent of the sample count.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, NumericalContractError, ValidationError
from .fock import displace, hermitize, phase_shift
from .oracles import loss_adjoint, loss_channel

N_BINS = 256
_PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class HomodyneDataset:
    """Quadrature samples with their local-oscillator phases (kept in order)."""

    phases: np.ndarray
    quadratures: np.ndarray
    efficiency: float = 1.0

    def __post_init__(self):
        phases = np.mod(np.asarray(self.phases, dtype=float), 2 * np.pi)
        quads = np.asarray(self.quadratures, dtype=float)
        if phases.shape != quads.shape or phases.ndim != 1:
            raise ValidationError("phases and quadratures must be 1-D arrays of equal length")
        if phases.size == 0:
            raise ValidationError("dataset is empty")
        if not (np.all(np.isfinite(phases)) and np.all(np.isfinite(quads))):
            raise ValidationError("dataset contains non-finite values")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValidationError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "quadratures", quads)

    def __len__(self):
        return self.quadratures.size

    def shifted(self, beta):
        """Samples of ``D(-beta) rho D(-beta)^dag``: each quadrature moves by its mean shift."""
        shift = np.sqrt(2.0) * (beta * np.exp(-1j * self.phases)).real
        return HomodyneDataset(self.phases, self.quadratures - shift, self.efficiency)


def hermite_functions(x, dim):
    """``psi_n(x)`` for ``n < dim``, shape ``x.shape + (dim,)``; ``psi_0 = pi^-1/4 exp(-x^2/2)``."""
    x = np.asarray(x, dtype=float)
    psi = np.empty(x.shape + (dim,))
    psi[..., 0] = np.pi**-0.25 * np.exp(-0.5 * x**2)
    if dim > 1:
        psi[..., 1] = np.sqrt(2.0) * x * psi[..., 0]
    for n in range(1, dim - 1):
        psi[..., n + 1] = np.sqrt(2.0 / (n + 1)) * x * psi[..., n] - np.sqrt(n / (n + 1)) * psi[..., n - 1]
    return psi


def quadrature_pdf(rho, theta, x):
    """Probability density of ``x_theta = x cos(theta) + p sin(theta)``.

    ``pr(x|theta) = <x_theta|rho|x_theta>`` with ``<n|x_theta> = exp(i n theta) psi_n(x)``.
    """
    rho = np.asarray(rho, dtype=complex)
    psi = hermite_functions(x, rho.shape[0])
    rotated = phase_shift(rho, -theta)
    return np.sum((psi @ rotated) * psi, axis=-1).real


def sample_quadratures(rho, phases, count_per_phase, seed, efficiency=1.0, n_grid=8192):
    """Draw ``count_per_phase`` samples at each phase by inverse-CDF sampling.

    With ``efficiency < 1`` the samples come from the lossy detector, i.e. from
    ``loss_channel(rho, efficiency)``, and the dataset records that efficiency.
    """
    if count_per_phase < 1:
        raise ValidationError("count_per_phase must be >= 1")
    rho = np.asarray(rho, dtype=complex)
    if efficiency < 1.0:
        rho = loss_channel(rho, efficiency)
    rng = np.random.default_rng(seed)
    dim = rho.shape[0]
    out_phase, out_x = [], []
    for theta in np.asarray(phases, dtype=float):
        mean = np.sqrt(2.0) * (np.sum(np.sqrt(np.arange(1, dim)) * np.diagonal(rho, -1)) * np.exp(-1j * theta)).real
        half = math.sqrt(2 * dim + 1) + 8.0
        x = np.linspace(mean - half, mean + half, n_grid)
        pdf = np.clip(quadrature_pdf(rho, theta, x), 0.0, None)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))])
        cdf /= cdf[-1]
        u = rng.random(count_per_phase)
        out_x.append(np.interp(u, cdf, x))
        out_phase.append(np.full(count_per_phase, theta))
    return HomodyneDataset(np.concatenate(out_phase), np.concatenate(out_x), efficiency)


def estimate_mean_amplitude(data):
    """Least-squares fit of ``<x_theta> = sqrt(2) Re(<a> exp(-i theta))`` to the samples.

    For a lossy detector the fit returns the post-loss amplitude divided by
    ``sqrt(efficiency)``, i.e. the amplitude of the state before detection.
    """
    design = np.sqrt(2.0) * np.column_stack([np.cos(data.phases), np.sin(data.phases)])
    (re, im), *_ = np.linalg.lstsq(design, data.quadratures, rcond=None)
    return complex(re, im) / np.sqrt(data.efficiency)


@dataclass
class _BinnedPOVM:
    """Per-phase bin counts and bin-integrated POVM matrices."""

    phases: np.ndarray
    counts: np.ndarray  # (n_phases, n_bins)
    elements: np.ndarray  # (n_bins, dim, dim) real, before the phase rotation
    rotations: np.ndarray  # (n_phases, dim, dim) exp(i (n - m) theta)


def _bin_integrals(edges, dim, order=8):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    xs = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    ws = 0.5 * (hi - lo) * weights
    psi = hermite_functions(xs, dim)  # (bins, order, dim)
    return np.einsum("bq,bqn,bqm->bnm", ws, psi, psi)


def _x_range(data, dim):
    spread = 0.0
    for theta in np.unique(data.phases):
        q = data.quadratures[data.phases == theta]
        spread = max(spread, abs(q.mean()) + 6.0 * q.std())
    return max(spread, math.sqrt(2 * dim + 1) + 4.0)


def bin_dataset(data, dim, n_bins=N_BINS):
    """Histogram each phase and integrate the (efficiency-smeared) POVM over the bins."""
    x_max = _x_range(data, dim)
    edges = np.linspace(-x_max, x_max, n_bins + 1)
    phases = np.unique(data.phases)
    counts = np.empty((phases.size, n_bins))
    for i, theta in enumerate(phases):
        q = np.clip(data.quadratures[data.phases == theta], -x_max, x_max)
        counts[i], _ = np.histogram(q, bins=edges)
    elements = _bin_integrals(edges, dim)
    if data.efficiency < 1.0:
        elements = loss_adjoint(elements, data.efficiency).real
    n = np.arange(dim)
    rotations = np.exp(1j * phases[:, None, None] * (n[:, None] - n[None, :]))
    return _BinnedPOVM(phases, counts, elements, rotations)


def _bin_probabilities(povm, rho):
    # p[theta, b] = Tr(Pi_{theta,b} rho), Pi = rotation * elements
    weighted = povm.rotations * rho.T[None]
    p = np.einsum("bnm,tnm->tb", povm.elements, weighted).real
    return np.maximum(p, _PROB_FLOOR)


def _r_operator(povm, p):
    ratio = povm.counts / p
    per_phase = np.einsum("tb,bnm->tnm", ratio, povm.elements)
    return np.sum(povm.rotations * per_phase, axis=0)


def _binned_loglik(povm, p):
    return float(np.sum(povm.counts * np.log(p)))


@dataclass
class MLEInfo:
    converged: bool
    iterations: int
    log_likelihood: list = field(default_factory=list)
    dilutions: int = 0


def mle_reconstruct(data, dim, max_iters=2000, tol=1e-9, full_output=False, n_bins=N_BINS):
    """Maximum-likelihood density matrix from homodyne data.

    Iterates ``rho <- R rho R / Tr(...)`` from the maximally mixed state.  A step
    that would lower the likelihood is replaced by the diluted update
    ``(1 + eps R) rho (1 + eps R)`` with shrinking ``eps``, so accepted iterates
    never lose likelihood.  Stops when the per-sample gain drops below ``tol``.
    """
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    povm = bin_dataset(data, dim, n_bins)
    total = povm.counts.sum()
    rho = np.eye(dim, dtype=complex) / dim
    p = _bin_probabilities(povm, rho)
    ll = _binned_loglik(povm, p)
    info = MLEInfo(converged=False, iterations=0, log_likelihood=[ll])
    eye = np.eye(dim)
    for it in range(1, max_iters + 1):
        R = _r_operator(povm, p) / total
        eps = None
        while True:
            step = R if eps is None else (eye + eps * R) / (1.0 + eps)
            cand = step @ rho @ step.conj().T
            cand = hermitize(cand) / np.trace(cand).real
            p_new = _bin_probabilities(povm, cand)
            ll_new = _binned_loglik(povm, p_new)
            if ll_new >= ll - 1e-12 * total:
                break
            eps = 1.0 if eps is None else eps / 2.0
            info.dilutions += 1
            if eps < 1e-12:
                raise NumericalContractError(f"likelihood decreased at iteration {it} for every step size")
        gain = (ll_new - ll) / total
        rho, p, ll = cand, p_new, ll_new
        info.log_likelihood.append(ll)
        info.iterations = it
        if gain < tol:
            info.converged = True
            break
    if not info.converged:
        warnings.warn(f"MLE did not reach tol={tol} within {max_iters} iterations", ConvergenceWarning, stacklevel=2)
    if full_output:
        return rho, info
    return rho


def mle_reconstruct_centered(data, dim, out_dim, max_iters=2000, tol=1e-9, full_output=False, n_bins=N_BINS):
    """Reconstruct a strongly displaced state in a small cutoff.

    The mean amplitude ``beta`` is estimated from the data, the samples are
    shifted so they describe ``D(-beta) rho D(-beta)^dag``, that centered state is
    reconstructed with ``dim`` Fock states, and ``D(beta)`` maps it back onto
    ``out_dim`` states.
    """
    beta = estimate_mean_amplitude(data)
    shift = beta * np.sqrt(data.efficiency)
    centered = data.shifted(shift)
    sigma, info = mle_reconstruct(centered, dim, max_iters, tol, full_output=True, n_bins=n_bins)
    rho = hermitize(displace(sigma, beta, dim_out=out_dim))
    rho /= np.trace(rho).real
    if full_output:
        return rho, info
    return rho


def log_likelihood(data, rho):
    """``sum_j log pr(x_j | theta_j)`` under the dataset's detector efficiency."""
    rho = np.asarray(rho, dtype=complex)
    if data.efficiency < 1.0:
        rho = loss_channel(rho, data.efficiency)
    total = 0.0
    for theta in np.unique(data.phases):
        x = data.quadratures[data.phases == theta]
        pdf = quadrature_pdf(rho, theta, x)
        total += float(np.sum(np.log(np.maximum(pdf, _PROB_FLOOR))))
    return total
