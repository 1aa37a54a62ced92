"""Pulsed z-gradients, gradient echoes and diffusion on a sliced sample."""
from __future__ import annotations

import numpy as np

from .dsl import Diffuse, Gradient
from .errors import ValidationError
from .molecule import MoleculeSpec, z_signs
from .states import EnsembleState, LabState

DEFAULT_SLICES = 64


def make_ensemble(state: LabState, n_slices: int = DEFAULT_SLICES, extent_a: float = 1.0) -> EnsembleState:
    """Replicate ``state`` at midpoint positions z_k = -a + (k + 1/2) 2a / n."""
    if n_slices < 2:
        raise ValidationError("an ensemble needs at least 2 slices")
    if extent_a <= 0:
        raise ValidationError("extent must be positive")
    step = 2.0 * extent_a / n_slices
    z = -extent_a + (np.arange(n_slices) + 0.5) * step
    rho = np.broadcast_to(state.rho, (n_slices,) + state.rho.shape).copy()
    return EnsembleState(z, rho, state.frames, float(extent_a), state.elapsed, state.deviation)


def gradient_phases(ens: EnsembleState, area: float, mol: MoleculeSpec) -> np.ndarray:
    """Per-slice elementwise factors of prod_j rotation(Z_j, area * moment_j * z).

    Shape (slices, 2^n, 2^n).
    """
    moments = np.array([s.moment_ratio for s in mol.spins])
    # rotation(Z, t) = diag(exp(-i t s / 2)) for sigma_z eigenvalue s
    half = -0.5 * area * np.outer(ens.z, z_signs(mol.n) @ moments)
    return np.exp(1j * (half[:, :, None] - half[:, None, :]))


def apply_gradient(ens: EnsembleState, ev: Gradient, mol: MoleculeSpec) -> EnsembleState:
    """Wind each slice about z by sign * area * moment_ratio * z per spin."""
    if not isinstance(ens, EnsembleState):
        raise ValidationError("gradient event needs an ensemble state")
    area = ev.sign * ev.area
    if area == 0:
        return ens
    return ens.replace(rho=ens.rho * gradient_phases(ens, area, mol))


def _pairwise_mean(rho: np.ndarray) -> np.ndarray:
    # fixed summation tree keeps averages bit-stable
    parts = list(rho)
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0] / len(rho)


def average(ens: EnsembleState) -> LabState:
    """Uniform mean over slices."""
    return LabState(_pairwise_mean(ens.rho), ens.frames, ens.elapsed, ens.deviation)


def apply_diffusion(ens: EnsembleState, ev: Diffuse | None = None) -> EnsembleState:
    """Erase positional memory: slice <- (1 - p) slice + p mean, default p = 1."""
    if not isinstance(ens, EnsembleState):
        raise ValidationError("diffuse event needs an ensemble state")
    p = 1.0 if ev is None else ev.mixing
    mean = _pairwise_mean(ens.rho)
    if p == 1.0:
        rho = np.broadcast_to(mean, ens.rho.shape).copy()
    else:
        rho = (1.0 - p) * ens.rho + p * mean[None]
    return ens.replace(rho=rho)
