"""Static spin-system description, internal Hamiltonian and thermal deviation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .operators import PauliPolynomial

# |J| must stay below this fraction of the shift difference for same-species pairs
WEAK_COUPLING_RATIO = 0.2


@dataclass(frozen=True)
class Spin:
    name: str
    species: str
    moment_ratio: float = 1.0
    shift_hz: float = 0.0
    relax_rate: float = 0.0


@dataclass(frozen=True)
class MoleculeSpec:
    """Spins plus a symmetric J-coupling table (Hz).

    Shifts are relative to each species' own rotating frame, so Larmor
    frequencies never enter the numerics.
    """

    spins: tuple[Spin, ...]
    couplings: dict[frozenset, float] = field(default_factory=dict)
    name: str = "molecule"

    def __post_init__(self):
        object.__setattr__(self, "spins", tuple(self.spins))
        names = [s.name for s in self.spins]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate spin names")
        if not self.spins:
            raise ValidationError("molecule has no spins")
        for s in self.spins:
            if s.relax_rate < 0:
                raise ValidationError(f"spin {s.name}: negative relaxation rate")
        clean = {}
        for pair, j in self.couplings.items():
            pair = frozenset(pair)
            if len(pair) != 2:
                raise ValidationError(f"self-coupling on {sorted(pair)}")
            unknown = pair - set(names)
            if unknown:
                raise ValidationError(f"coupling references unknown spin {sorted(unknown)[0]}")
            if float(j) != 0.0:
                clean[pair] = float(j)
        object.__setattr__(self, "couplings", clean)

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.spins]

    def index(self, name: str) -> int:
        for i, s in enumerate(self.spins):
            if s.name == name:
                return i
        raise ValidationError(f"unknown spin {name!r}")

    def coupling(self, a, b) -> float:
        a = self.spins[a].name if isinstance(a, int) else a
        b = self.spins[b].name if isinstance(b, int) else b
        return self.couplings.get(frozenset((a, b)), 0.0)

    def species_members(self, species: str) -> list[str]:
        members = [s.name for s in self.spins if s.species == species]
        if not members:
            raise ValidationError(f"no spins of species {species!r}")
        return members

    @property
    def relax_rates(self) -> np.ndarray:
        return np.array([s.relax_rate for s in self.spins])

    @property
    def shifts(self) -> np.ndarray:
        return np.array([s.shift_hz for s in self.spins])

    def check_weak_coupling(self):
        """Reject same-species pairs whose coupling is not small against the shift split."""
        for pair, j in self.couplings.items():
            a, b = sorted(pair, key=self.index)
            sa, sb = self.spins[self.index(a)], self.spins[self.index(b)]
            if sa.species != sb.species:
                continue
            if abs(j) > WEAK_COUPLING_RATIO * abs(sa.shift_hz - sb.shift_hz):
                raise ValidationError(
                    f"coupling {a}-{b} ({j:g} Hz) is not weak against the shift "
                    f"difference {abs(sa.shift_hz - sb.shift_hz):g} Hz"
                )

    def with_couplings(self, couplings) -> "MoleculeSpec":
        return MoleculeSpec(self.spins, couplings, self.name)

    def with_relax_rates(self, rates) -> "MoleculeSpec":
        spins = [
            Spin(s.name, s.species, s.moment_ratio, s.shift_hz, float(r))
            for s, r in zip(self.spins, rates)
        ]
        return MoleculeSpec(spins, self.couplings, self.name)


def z_signs(n: int) -> np.ndarray:
    """Array (2^n, n) of sigma_z eigenvalues (+1 for bit 0) per basis state."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1 - 2 * bits


def hamiltonian_diagonal(mol: MoleculeSpec, decouple=()) -> np.ndarray:
    """Diagonal of the weak-coupling Hamiltonian in rad/s.

    H = sum_i pi shift_i Z_i + sum_{i<j} (pi J_ij / 2) Z_i Z_j, with couplings
    that touch a spin in ``decouple`` removed.
    """
    mol.check_weak_coupling()
    z = z_signs(mol.n)
    diag = z @ (math.pi * mol.shifts)
    off = set(decouple)
    for pair, j in mol.couplings.items():
        if pair & off:
            continue
        a, b = (mol.index(x) for x in pair)
        diag = diag + (math.pi * j / 2) * z[:, a] * z[:, b]
    return diag.astype(float)


def internal_hamiltonian(mol: MoleculeSpec, decouple=()) -> np.ndarray:
    """The internal Hamiltonian as a (diagonal) matrix in rad/s."""
    return np.diag(hamiltonian_diagonal(mol, decouple)).astype(complex)


def equilibrium_deviation(mol: MoleculeSpec, epsilons) -> PauliPolynomial:
    """Thermal deviation sum_l eps_l Z_l (identity part dropped).

    Positive eps means an excess of |0>.
    """
    epsilons = list(epsilons)
    if len(epsilons) != mol.n:
        raise ValidationError(f"need {mol.n} biases, got {len(epsilons)}")
    terms = []
    for i, eps in enumerate(epsilons):
        letters = "I" * i + "Z" + "I" * (mol.n - i - 1)
        terms.append((float(eps), letters))
    return PauliPolynomial(terms, n=mol.n)


@dataclass(frozen=True)
class FrameBook:
    """Per-spin frame offsets theta_0 (radians) set by virtual z-rotations.

    A z-rotation by phi lowers theta_0 by phi. The absolute phase of a spin's
    logical frame at time t is theta_0 + 2 pi shift t.
    """

    offsets: tuple[float, ...]

    @classmethod
    def zeros(cls, n: int) -> "FrameBook":
        return cls((0.0,) * n)

    def rotate(self, site: int, angle: float) -> "FrameBook":
        offsets = list(self.offsets)
        offsets[site] -= angle
        return FrameBook(tuple(offsets))

    def phases(self, mol: MoleculeSpec, elapsed: float) -> np.ndarray:
        return np.asarray(self.offsets) + 2 * math.pi * mol.shifts * elapsed

    def reported(self) -> tuple[float, ...]:
        return tuple(math.remainder(p, 2 * math.pi) for p in self.offsets)


def coherence_decay_rates(mol: MoleculeSpec) -> np.ndarray:
    """Phase-damping rate of each matrix element |i><j| in 1/s.

    An element decays at the summed rate of the spins whose bits differ
    between i and j, which is the Pauli-basis rule (X/Y on spin k decays at
    lambda_k) written in the computational basis.
    """
    z = z_signs(mol.n)
    differ = z[:, None, :] != z[None, :, :]
    return differ @ mol.relax_rates
