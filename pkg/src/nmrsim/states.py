"""Density-state containers for a single sample and a z-sliced ensemble."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .molecule import FrameBook, MoleculeSpec, z_signs
from .operators import PauliPolynomial, realize


@dataclass(frozen=True)
class LabState:
    """Density (or deviation) matrix in the reference frame.

    ``frames`` holds the virtual z-rotation offsets and ``elapsed`` the time
    since the start of the program; together they place each spin's logical
    frame relative to the reference frame.
    """

    rho: np.ndarray
    frames: FrameBook
    elapsed: float = 0.0
    deviation: bool = True

    @classmethod
    def from_operator(cls, rho, deviation: bool = True) -> "LabState":
        rho = np.array(rho, dtype=complex)
        n = rho.shape[0].bit_length() - 1
        return cls(rho, FrameBook.zeros(n), 0.0, deviation)

    @classmethod
    def from_polynomial(cls, poly: PauliPolynomial, n: int | None = None) -> "LabState":
        return cls.from_operator(realize(poly, n), deviation=True)

    @property
    def n(self) -> int:
        return len(self.frames.offsets)

    def replace(self, **changes) -> "LabState":
        return replace(self, **changes)


@dataclass(frozen=True)
class EnsembleState:
    """Copies of one state at midpoint z-slices over [-a, a], uniformly weighted.

    ``rho`` is stacked with shape (slices, 2^n, 2^n); all slices share one
    FrameBook and clock.
    """

    z: np.ndarray
    rho: np.ndarray
    frames: FrameBook
    extent_a: float
    elapsed: float = 0.0
    deviation: bool = True

    @property
    def n(self) -> int:
        return len(self.frames.offsets)

    @property
    def n_slices(self) -> int:
        return len(self.z)

    def replace(self, **changes) -> "EnsembleState":
        return replace(self, **changes)

    def slice(self, k: int) -> LabState:
        return LabState(self.rho[k].copy(), self.frames, self.elapsed, self.deviation)


def frame_phase_matrix(mol: MoleculeSpec, frames: FrameBook, elapsed: float) -> np.ndarray:
    """Elementwise factors taking a reference-frame rho to the logical frames.

    rho_logical = V rho V^dagger with V = prod_j exp(+i theta_j Z_j / 2).
    """
    theta = frames.phases(mol, elapsed)
    phase = 0.5 * (z_signs(mol.n) @ theta)
    return np.exp(1j * (phase[:, None] - phase[None, :]))


def logical_rho(state, mol: MoleculeSpec) -> np.ndarray:
    """The state as seen in the spins' logical frames."""
    return state.rho * frame_phase_matrix(mol, state.frames, state.elapsed)


def from_logical(rho_logical, mol: MoleculeSpec, frames: FrameBook, elapsed: float) -> np.ndarray:
    return rho_logical * frame_phase_matrix(mol, frames, elapsed).conj()
