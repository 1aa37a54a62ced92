"""FID synthesis, spectra, transition tables and read-out of expectations.

The FID of spin a is M_a(t) = tr(rho(t) sigma_+^(a)) with sigma_+ = 2|0><1|,
taken in the logical frames fixed at the acquire event. Because the
Hamiltonian is diagonal and relaxation is phase damping, every coherence is
a single decaying tone, so the FID is summed in closed form.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks

from .errors import InvariantError, ValidationError
from .molecule import MoleculeSpec, hamiltonian_diagonal
from .states import EnsembleState, logical_rho

PARSEVAL_TOL = 1e-9
UP, DOWN = "U", "D"


@dataclass(frozen=True)
class FidRecord:
    dwell_s: float
    samples: np.ndarray
    observed: tuple[str, ...] = ()

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or len(samples) < 2:
            raise ValidationError("an FID needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("FID has non-finite samples")
        if not self.dwell_s > 0:
            raise ValidationError("dwell must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "observed", tuple(self.observed))

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dwell_s

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class Spectrum:
    freqs_hz: np.ndarray
    amplitudes: np.ndarray
    resolution_hz: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.amplitudes)


class Transition(NamedTuple):
    spin: str
    label: str
    freq_hz: float


class ReadOut(NamedTuple):
    p1: float
    raw: float


def _coherences(mol: MoleculeSpec, site: int):
    """Index pairs (i, j): i has bit ``site`` set, j is i with it cleared."""
    n = mol.n
    bit = 1 << (n - 1 - site)
    i = np.array([k for k in range(2**n) if k & bit])
    return i, i ^ bit


def acquire(state, duration_s: float, dwell_s: float, observe, mol: MoleculeSpec) -> FidRecord:
    """Sample M(t_k) = sum_a tr(rho(t_k) sigma_+^(a)) at t_k = k * dwell.

    Ensembles are averaged first (acquisition is linear). Evolution during
    acquisition is the full internal Hamiltonian plus phase damping.
    """
    observe = tuple(observe)
    if not observe:
        raise ValidationError("acquire needs at least one observed spin")
    if not (0 < dwell_s <= duration_s):
        raise ValidationError("dwell must be positive and no longer than the acquisition")
    if isinstance(state, EnsembleState):
        from .ensemble import average

        state = average(state)
    rho = logical_rho(state, mol)
    n_samples = max(2, int(round(duration_s / dwell_s)))
    t = np.arange(n_samples) * dwell_s
    energies = hamiltonian_diagonal(mol)
    rates = mol.relax_rates
    samples = np.zeros(n_samples, dtype=complex)
    for name in observe:
        a = mol.index(name)
        i, j = _coherences(mol, a)
        amps = 2.0 * rho[i, j]
        keep = amps != 0
        if not np.any(keep):
            continue
        rate = 1j * (energies[j[keep]] - energies[i[keep]]) - rates[a]
        samples += np.exp(np.outer(t, rate)) @ amps[keep]
    return FidRecord(dwell_s, samples, observe)


def dft(fid: FidRecord, center_hz: float = 0.0) -> Spectrum:
    """Spectrum A(f) = dwell * sum_k M(t_k) exp(-i 2 pi f t_k).

    The frequency window is center_hz +- 1/(2 dwell); tones outside the
    Nyquist band around zero alias into it unless a center is supplied.
    """
    n = len(fid)
    samples = fid.samples
    if center_hz:
        samples = samples * np.exp(-2j * math.pi * center_hz * fid.times)
    amps = np.fft.fftshift(np.fft.fft(samples)) * fid.dwell_s
    freqs = np.fft.fftshift(np.fft.fftfreq(n, fid.dwell_s)) + center_hz
    time_energy = float(np.sum(np.abs(fid.samples) ** 2)) * fid.dwell_s
    freq_energy = float(np.sum(np.abs(amps) ** 2)) / (n * fid.dwell_s)
    if abs(time_energy - freq_energy) > PARSEVAL_TOL * max(time_energy, 1e-300):
        raise InvariantError(f"Parseval violated: {time_energy!r} vs {freq_energy!r}")
    return Spectrum(freqs, amps, 1.0 / (n * fid.dwell_s))


def find_peaks(spec: Spectrum, rel_height: float = 0.05, part: str = "mag") -> np.ndarray:
    """Frequencies of local maxima above ``rel_height`` of the largest.

    ``part`` selects the magnitude ("mag") or the absorption ("real")
    spectrum. Closely spaced lines pull magnitude maxima through their
    dispersive tails; absorption maxima sit closer to the true lines.
    """
    if part == "mag":
        mag = spec.magnitude
    elif part == "real":
        mag = spec.amplitudes.real
    else:
        raise ValueError(f"unknown spectrum part {part!r}")
    if not np.any(mag > 0):
        return np.array([])
    idx, _ = _scipy_find_peaks(mag, height=rel_height * mag.max())
    return spec.freqs_hz[idx]


def hwhm(spec: Spectrum, freq_hz: float) -> float:
    """Half-width at half-maximum of the power |A|^2 around the peak nearest freq_hz.

    For a tone decaying at rate lambda this is lambda / (2 pi).
    """
    power = spec.magnitude**2
    k = int(np.argmin(np.abs(spec.freqs_hz - freq_hz)))
    half = power[k] / 2

    def crossing(step):
        m = k
        while 0 <= m + step < len(power) and power[m + step] > half:
            m += step
        if not 0 <= m + step < len(power):
            raise ValidationError("peak runs off the spectral window")
        # linear interpolation between the last point above and first below
        p0, p1 = power[m], power[m + step]
        frac = (p0 - half) / (p0 - p1)
        return abs(spec.freqs_hz[m] + frac * (spec.freqs_hz[m + step] - spec.freqs_hz[m]) - spec.freqs_hz[k])

    return 0.5 * (crossing(-1) + crossing(+1))


def transition_table(mol: MoleculeSpec, observe=None) -> list[Transition]:
    """Peak-group frequencies per observed spin.

    The label has '+' at the observed spin and U (E-up, |0>) or D (E-down,
    |1>) on every other spin. A neighbour in U shifts the line by +J/2, so
    the all-U peak is the right-most one when all couplings are positive.
    """
    observe = mol.names if observe is None else list(observe)
    rows = []
    for name in observe:
        a = mol.index(name)
        others = [b for b in range(mol.n) if b != a]
        for pattern in itertools.product((UP, DOWN), repeat=len(others)):
            label = [""] * mol.n
            label[a] = "+"
            freq = mol.spins[a].shift_hz
            for b, s in zip(others, pattern):
                label[b] = s
                freq += mol.coupling(a, b) / 2 * (1 if s == UP else -1)
            rows.append(Transition(name, "".join(label), freq))
    return rows


def _check_band(fid: FidRecord, freq_hz: float, center_hz: float):
    nyquist = 0.5 / fid.dwell_s
    if abs(freq_hz - center_hz) > nyquist:
        raise ValidationError(
            f"{freq_hz:g} Hz lies outside the band {center_hz:g} +- {nyquist:g} Hz"
        )


def peak_amplitude(fid: FidRecord, freq_hz: float, decay: float = 0.0, center_hz: float = 0.0) -> complex:
    """Matched-filter amplitude of the tone exp(i 2 pi f t - decay t).

    A unit tone returns 1; other tones leak in only through their overlap.
    """
    _check_band(fid, freq_hz, center_hz)
    model = np.exp((2j * math.pi * freq_hz - decay) * fid.times)
    return complex(np.vdot(model, fid.samples) / np.vdot(model, model).real)


def group_amplitudes(fid: FidRecord, freqs_hz, decay: float = 0.0, center_hz: float = 0.0) -> np.ndarray:
    """Joint least-squares amplitudes of known tones sharing one decay rate."""
    freqs = list(freqs_hz)
    for f in freqs:
        _check_band(fid, f, center_hz)
    basis = np.exp(np.outer(fid.times, 2j * math.pi * np.asarray(freqs, dtype=float) - decay))
    coef, *_ = np.linalg.lstsq(basis, fid.samples, rcond=None)
    return coef


def group_readout(fid: FidRecord, mol: MoleculeSpec, spin: str, center_hz: float = 0.0) -> dict:
    """Label -> amplitude for the full peak group of ``spin``."""
    rows = [r for r in transition_table(mol, [spin])]
    freqs = [r.freq_hz for r in rows]
    if len(set(np.round(freqs, 9))) != len(freqs):
        raise ValidationError(f"peak group of {spin} has degenerate lines; cannot resolve")
    amps = group_amplitudes(fid, freqs, mol.spins[mol.index(spin)].relax_rate, center_hz)
    return {r.label: a for r, a in zip(rows, amps)}


def infer_expectation(amplitudes: dict, target: str) -> float:
    """Pauli coefficient of ``target`` from a resolved peak group.

    ``target`` has one X or Y letter (the observed spin) and I/Z elsewhere.
    Each peak is weighted by the product of the Z eigenvalues of its label,
    X reads the real and Y the imaginary part. The sum is divided by 2^n,
    so deviation XI gives 1 and X(I+Z)/2 gives 1/2 for both XI and XZ.
    """
    target = target.upper()
    planar = [k for k, c in enumerate(target) if c in "XY"]
    if len(planar) != 1 or any(c not in "IXYZ" for c in target):
        raise ValidationError(f"target {target!r} needs exactly one X or Y letter")
    a = planar[0]
    n = len(target)
    expected = 2 ** (n - 1)
    if len(amplitudes) != expected:
        raise ValidationError(f"need all {expected} peaks of the group, got {len(amplitudes)}")
    total = 0.0
    for label, amp in amplitudes.items():
        if len(label) != n or label[a] != "+":
            raise ValidationError(f"label {label!r} does not belong to spin {a}")
        sign = 1
        for b, letter in enumerate(target):
            if letter == "Z":
                sign *= 1 if label[b] == UP else -1
        part = amp.real if target[a] == "X" else amp.imag
        total += sign * part
    return total / 2**n


def probability_from_signals(a_initial: float, a_final: float) -> ReadOut:
    """p1 = (1 - a_final / a_initial) / 2, clamped to [0, 1]; the unclamped value is kept."""
    if a_initial == 0:
        raise ValidationError("reference signal is zero")
    raw = (1.0 - a_final / a_initial) / 2.0
    return ReadOut(min(1.0, max(0.0, raw)), raw)


# CSV round-trip -----------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_fid_csv(path, fid: FidRecord):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "re", "im"])
        for t, m in zip(fid.times, fid.samples):
            w.writerow([_fmt(t), _fmt(m.real), _fmt(m.imag)])


def read_fid_csv(path) -> FidRecord:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ["t_s", "re", "im"]:
            raise ValidationError(f"{path}: unexpected FID header {r.fieldnames}")
        rows = [(float(x["t_s"]), complex(float(x["re"]), float(x["im"]))) for x in r]
    if len(rows) < 2:
        raise ValidationError(f"{path}: too few samples")
    return FidRecord(rows[1][0] - rows[0][0], np.array([m for _, m in rows]))


def write_spectrum_csv(path, spec: Spectrum):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "re", "im", "mag"])
        for f, a in zip(spec.freqs_hz, spec.amplitudes):
            w.writerow([_fmt(f), _fmt(a.real), _fmt(a.imag), _fmt(abs(a))])


def read_spectrum_csv(path) -> Spectrum:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ["freq_hz", "re", "im", "mag"]:
            raise ValidationError(f"{path}: unexpected spectrum header {r.fieldnames}")
        rows = [(float(x["freq_hz"]), complex(float(x["re"]), float(x["im"]))) for x in r]
    freqs = np.array([f for f, _ in rows])
    return Spectrum(freqs, np.array([a for _, a in rows]), float(freqs[1] - freqs[0]))


def write_transitions_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["spin", "label", "freq_hz"])
        for row in rows:
            w.writerow([row.spin, row.label, _fmt(row.freq_hz)])


def read_transitions_csv(path) -> list[Transition]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ["spin", "label", "freq_hz"]:
            raise ValidationError(f"{path}: unexpected transition header {r.fieldnames}")
        return [Transition(x["spin"], x["label"], float(x["freq_hz"])) for x in r]
