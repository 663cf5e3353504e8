"""Exact reference channels: Bernoulli loss, phase shift and their composition."""

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .errors import ValidationError
from .fock import phase_shift


@dataclass(frozen=True)
class ChannelSpec:
    transmission: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.transmission <= 1.0:
            raise ValidationError(f"transmission must lie in [0, 1], got {self.transmission}")


#: 34 % power loss with a 36 degree phase shift
EOM_CHANNEL = ChannelSpec(transmission=0.66, phase=np.deg2rad(36.0))
PRESETS = {"paper-eom": EOM_CHANNEL, "identity": ChannelSpec(1.0, 0.0)}


def loss_kraus(eta, dim):
    """Kraus operators ``A_k`` (k photons lost) of the Bernoulli loss channel."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"eta must lie in [0, 1], got {eta}")
    ops = np.zeros((dim, dim, dim))
    for k in range(dim):
        for n in range(k, dim):
            ops[k, n - k, n] = np.sqrt(comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k)
    return ops


def loss_channel(rho, eta):
    """Apply ``sum_k A_k rho A_k^dag``; works for any operator, not just states."""
    rho = np.asarray(rho, dtype=complex)
    A = loss_kraus(eta, rho.shape[0])
    return np.einsum("kab,bc,kdc->ad", A, rho, A, optimize=True)


def loss_adjoint(op, eta):
    """Heisenberg-picture loss ``sum_k A_k^dag op A_k`` (maps POVM elements)."""
    op = np.asarray(op)
    A = loss_kraus(eta, op.shape[-1])
    return np.einsum("kba,...bc,kcd->...ad", A, op, A, optimize=True)


def eom_process(rho, spec=EOM_CHANNEL):
    """Loss followed by a phase shift; the two commute."""
    return phase_shift(loss_channel(rho, spec.transmission), spec.phase)


def theoretical_superoperator(spec, dim):
    """Exact tensor ``E[l, k, n, m]`` of :func:`eom_process` on a ``dim`` cutoff."""
    from .proctensor import Superoperator

    tensor = np.zeros((dim,) * 4, dtype=complex)
    for n in range(dim):
        for m in range(dim):
            basis = np.zeros((dim, dim), dtype=complex)
            basis[n, m] = 1.0
            tensor[:, :, n, m] = eom_process(basis, spec)
    return Superoperator(tensor, phase_symmetric=True)
