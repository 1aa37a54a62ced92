"""Execute pulse programs on lab states and z-sliced ensembles.

The density matrix is kept in the reference frame and evolves under the full
internal Hamiltonian (shifts included). Each spin's logical frame runs at its
own shift and is further offset by virtual z-rotations; RF pulse phases are
taken relative to that logical frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import acquisition
from .dsl import (
    Acquire, Checkpoint, Delay, Diffuse, Gate, Gradient, Pulse, PulseProgram, ZRot,
)
from .ensemble import apply_diffusion, apply_gradient, average
from .errors import InvariantError, ValidationError
from .molecule import MoleculeSpec, coherence_decay_rates, hamiltonian_diagonal
from .operators import HERMITIAN_TOL, PauliPolynomial, deviation_decompose
from .states import EnsembleState, LabState, logical_rho

MIN_SLICES_PER_90 = 64


def _spin_rotation(phase: float, angle: float) -> np.ndarray:
    """exp(-i angle (cos phase X + sin phase Y) / 2)."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    e = complex(math.cos(phase), math.sin(phase))
    return np.array([[c, -1j * s * e.conjugate()], [-1j * s * e, c]])


def pulse_unitary(mol: MoleculeSpec, targets, phase_rad: float, angle_rad: float, frame_phases) -> np.ndarray:
    """Reference-frame unitary of an ideal selective pulse on ``targets``.

    The axis of spin j sits at phase_rad + frame_phases[j].
    """
    idx = {mol.index(t) for t in targets}
    u = np.ones((1, 1), dtype=complex)
    for j in range(mol.n):
        if j in idx:
            factor = _spin_rotation(phase_rad + frame_phases[j], angle_rad)
        else:
            factor = np.eye(2, dtype=complex)
        u = np.kron(u, factor)
    return u


def delay_factors(mol: MoleculeSpec, duration: float, decouple=(), relax: bool = True) -> np.ndarray:
    """Elementwise propagator of a delay: exp(-iHt) rho exp(iHt) with phase damping."""
    e = hamiltonian_diagonal(mol, decouple)
    f = np.exp(-1j * duration * (e[:, None] - e[None, :]))
    if relax and duration > 0 and np.any(mol.relax_rates > 0):
        f = f * np.exp(-duration * coherence_decay_rates(mol))
    return f


def gate_unitary(name: str, sites, n: int) -> np.ndarray:
    """Permutation matrix of an ideal cnot (control, target) or toffoli (c1, c2, target)."""
    *controls, target = sites
    dim = 2**n
    perm = np.zeros((dim, dim))
    for i in range(dim):
        bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
        if all(bits[c] for c in controls):
            bits[target] ^= 1
        j = int("".join(map(str, bits)), 2)
        perm[j, i] = 1.0
    return perm.astype(complex)


def _conj(state, u):
    return state.replace(rho=u @ state.rho @ u.conj().T)


def apply_pulse(state, ev: Pulse, mol: MoleculeSpec):
    """Rotate the targets about an in-plane axis of their logical frames."""
    targets = ev.targets.resolve(mol)
    phase = math.radians(ev.phase_deg)
    angle = math.radians(ev.angle_deg)
    if not ev.duration_s:
        u = pulse_unitary(mol, targets, phase, angle, state.frames.phases(mol, state.elapsed))
        return _conj(state, u)
    n_steps = max(MIN_SLICES_PER_90, math.ceil(MIN_SLICES_PER_90 * abs(ev.angle_deg) / 90.0))
    dt = ev.duration_s / n_steps
    free = delay_factors(mol, dt, relax=False)
    rho = state.rho
    for k in range(n_steps):
        rho = rho * free
        t_mid = state.elapsed + (k + 0.5) * dt
        u = pulse_unitary(mol, targets, phase, angle / n_steps, state.frames.phases(mol, t_mid))
        rho = u @ rho @ u.conj().T
    return state.replace(rho=rho, elapsed=state.elapsed + ev.duration_s)


def apply_zrot(state, ev: ZRot, mol: MoleculeSpec):
    """Virtual z-rotation: shift the target's frame, leave rho alone."""
    site = mol.index(ev.target)
    return state.replace(frames=state.frames.rotate(site, math.radians(ev.angle_deg)))


def apply_delay(state, ev: Delay, mol: MoleculeSpec):
    """Free evolution under H (decoupled couplings removed), then phase damping."""
    if ev.duration_s < 0:
        raise ValidationError("negative delay")
    if ev.duration_s == 0:
        return state
    decouple = ev.decouple.resolve(mol)
    f = delay_factors(mol, ev.duration_s, decouple, ev.relax)
    return state.replace(rho=state.rho * f, elapsed=state.elapsed + ev.duration_s)


def apply_gate(state, ev: Gate, mol: MoleculeSpec):
    """Conjugate by an ideal permutation gate, defined in the logical frames."""
    names = ev.targets.resolve(mol)
    from .dsl import GATE_ARITY

    if len(names) != GATE_ARITY[ev.name]:
        raise ValidationError(f"gate {ev.name} takes {GATE_ARITY[ev.name]} spins, got {len(names)}")
    p = gate_unitary(ev.name, [mol.index(x) for x in names], mol.n)
    # the gate acts on logical states; move it into the reference frame
    from .states import frame_phase_matrix

    v = np.diag(frame_phase_matrix(mol, state.frames, state.elapsed)[:, 0])
    u = v.conj() @ p @ v
    return _conj(state, u)


@dataclass
class RunResult:
    final: object
    checkpoints: dict = field(default_factory=dict)
    fid: Optional[acquisition.FidRecord] = None


def check_state(state, where: str = ""):
    rho = state.rho
    herm = np.max(np.abs(rho - np.swapaxes(rho, -1, -2).conj()))
    if herm > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(rho)))):
        raise InvariantError(f"state lost Hermiticity ({herm:.2e}) {where}".strip())


def current_deviation(state, mol: MoleculeSpec) -> PauliPolynomial:
    """Logical-frame deviation of a lab state or ensemble average, identity dropped."""
    if isinstance(state, EnsembleState):
        state = average(state)
    return deviation_decompose(logical_rho(state, mol)).deviation


def apply_event(state, ev, mol: MoleculeSpec):
    if isinstance(ev, Pulse):
        return apply_pulse(state, ev, mol)
    if isinstance(ev, ZRot):
        return apply_zrot(state, ev, mol)
    if isinstance(ev, Delay):
        return apply_delay(state, ev, mol)
    if isinstance(ev, Gate):
        return apply_gate(state, ev, mol)
    if isinstance(ev, Gradient):
        return apply_gradient(state, ev, mol)
    if isinstance(ev, Diffuse):
        return apply_diffusion(state, ev)
    raise TypeError(f"cannot apply {ev!r}")


def run_program(initial, prog: PulseProgram, mol: MoleculeSpec, check_invariants: bool = True) -> RunResult:
    """Apply a validated program's events in order.

    ``initial`` is a LabState, or an EnsembleState when the program contains
    gradient or diffusion events. Checkpoints record the logical-frame
    deviation (ensemble-averaged); an acquire event produces the FID.
    """
    if prog.needs_ensemble and not isinstance(initial, EnsembleState):
        raise ValidationError("gradient/diffuse events need an ensemble context")
    state = initial
    result = RunResult(final=initial)
    for k, ev in enumerate(prog.events):
        if isinstance(ev, Checkpoint):
            result.checkpoints[ev.label] = current_deviation(state, mol)
            continue
        if isinstance(ev, Acquire):
            result.fid = acquisition.acquire(
                state, ev.duration_s, ev.dwell_s, ev.observe.resolve(mol), mol
            )
            continue
        state = apply_event(state, ev, mol)
        if check_invariants:
            check_state(state, f"after event {k} ({type(ev).__name__})")
    result.final = state
    return result
