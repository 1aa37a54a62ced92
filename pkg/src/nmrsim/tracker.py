"""Symbolic product-operator tracking of pulse programs, including gradients.

A deviation that depends on the sample position z is stored as a sum of
spatial harmonics, c(z) = sum_k P_k exp(i k z), each P_k a PauliPolynomial.
Everything is expressed in the spins' logical frames, so chemical shifts drop
out and only couplings, relaxation and the events themselves act.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dsl import Acquire, Checkpoint, Delay, Diffuse, Gate, Gradient, Pulse, PulseProgram, ZRot
from .errors import ValidationError
from .molecule import MoleculeSpec
from .operators import PauliPolynomial, anticommutes, po_rotate

# wavenumbers closer than this are the same harmonic (absorbs +q then -q round-off)
KEY_TOL = 1e-9


def _find_key(harmonics: dict, k: float) -> float:
    if abs(k) <= KEY_TOL:
        return 0.0
    for key in harmonics:
        if abs(key - k) <= KEY_TOL * max(1.0, abs(k)):
            return key
    return k


def _accumulate(harmonics: dict, k: float, poly: PauliPolynomial, n: int):
    key = _find_key(harmonics, k)
    harmonics[key] = harmonics.get(key, PauliPolynomial(n=n)) + poly


def _site_letters(n: int, letters: dict) -> str:
    return "".join(letters.get(k, "I") for k in range(n))


@dataclass(frozen=True)
class ZSeries:
    """Position-dependent deviation as spatial harmonics (key: wavenumber)."""

    n: int
    harmonics: dict = field(default_factory=dict)

    @classmethod
    def constant(cls, poly: PauliPolynomial, n: int | None = None) -> "ZSeries":
        n = poly.n if n is None else n
        return cls(n, {0.0: poly})

    @classmethod
    def from_trig(cls, n: int, pieces) -> "ZSeries":
        """Build from (kind, k, poly) with kind in {'const', 'cos', 'sin'}."""
        out: dict = {}

        def add(key, poly):
            _accumulate(out, key, poly, n)

        for kind, k, poly in pieces:
            if kind == "const":
                add(0.0, poly)
            elif kind == "cos":
                add(k, poly * 0.5)
                add(-k, poly * 0.5)
            elif kind == "sin":
                add(k, poly * -0.5j)
                add(-k, poly * 0.5j)
            else:
                raise ValueError(kind)
        return cls(n, _prune(out))

    def map(self, fn) -> "ZSeries":
        return ZSeries(self.n, _prune({k: fn(p) for k, p in self.harmonics.items()}))

    def at(self, z: float) -> PauliPolynomial:
        total = PauliPolynomial(n=self.n)
        for k, p in self.harmonics.items():
            total = total + p * complex(math.cos(k * z), math.sin(k * z))
        return total

    def mean(self) -> PauliPolynomial:
        """Sample average once every z-winding has been averaged out."""
        return self.harmonics.get(0.0, PauliPolynomial(n=self.n))

    def max_abs_difference(self, other: "ZSeries") -> float:
        diff = dict(self.harmonics)
        for k, p in other.harmonics.items():
            _accumulate(diff, k, -p, self.n)
        return max((max((abs(c) for c, _ in p.terms), default=0.0) for p in diff.values()), default=0.0)

    def __add__(self, other: "ZSeries") -> "ZSeries":
        out = dict(self.harmonics)
        for k, p in other.harmonics.items():
            _accumulate(out, k, p, self.n)
        return ZSeries(self.n, _prune(out))

    def __mul__(self, scalar) -> "ZSeries":
        return self.map(lambda p: p * scalar)

    __rmul__ = __mul__

    def __str__(self):
        parts = []
        for k in sorted(self.harmonics):
            body = str(self.harmonics[k])
            parts.append(body if k == 0 else f"e^(i{k:g}z)*({body})")
        return " + ".join(parts) if parts else "0"


def _prune(harmonics: dict) -> dict:
    return {k: p for k, p in harmonics.items() if len(p)}


def _pulse(series: ZSeries, sites, phase: float, angle: float) -> ZSeries:
    n = series.n

    def rotate(poly):
        for j in sites:
            z = _site_letters(n, {j: "Z"})
            x = _site_letters(n, {j: "X"})
            # R_phase(angle) = Rz(phase) Rx(angle) Rz(-phase)
            poly = po_rotate(poly, z, -phase)
            poly = po_rotate(poly, x, angle)
            poly = po_rotate(poly, z, phase)
        return poly

    return series.map(rotate)


def _delay(series: ZSeries, mol: MoleculeSpec, ev: Delay) -> ZSeries:
    n = mol.n
    off = set(ev.decouple.resolve(mol))
    t = ev.duration_s
    couplings = []
    for pair, j in mol.couplings.items():
        if pair & off:
            continue
        a, b = sorted(mol.index(x) for x in pair)
        couplings.append((_site_letters(n, {a: "Z", b: "Z"}), math.pi * j * t))
    rates = mol.relax_rates if ev.relax else None

    def evolve(poly):
        for gen, angle in couplings:
            poly = po_rotate(poly, gen, angle)
        if rates is not None and t > 0 and any(rates):
            terms = []
            for c, letters in poly.terms:
                decay = sum(rates[k] for k, ch in enumerate(letters) if ch in "XY")
                terms.append((c * math.exp(-decay * t), letters))
            poly = PauliPolynomial(terms, n=n)
        return poly

    return series.map(evolve)


def _gradient(series: ZSeries, mol: MoleculeSpec, ev: Gradient) -> ZSeries:
    n = mol.n
    area = ev.sign * ev.area
    current = dict(series.harmonics)
    for j, spin in enumerate(mol.spins):
        q = area * spin.moment_ratio
        if q == 0:
            continue
        zj = _site_letters(n, {j: "Z"})
        nxt: dict = {}

        def add(key, poly):
            _accumulate(nxt, key, poly, n)

        for k, poly in current.items():
            still = PauliPolynomial([(c, t) for c, t in poly.terms if not anticommutes(zj, t)], n=n)
            moving = PauliPolynomial([(c, t) for c, t in poly.terms if anticommutes(zj, t)], n=n)
            add(k, still)
            if len(moving):
                # rotation(Z, qz) T = cos(qz) T - i sin(qz) Z T; r = -i Z T
                r = po_rotate(moving, zj, math.pi / 2)
                add(k + q, (moving - r * 1j) * 0.5)
                add(k - q, (moving + r * 1j) * 0.5)
        current = _prune(nxt)
    return ZSeries(n, current)


def _diffuse(series: ZSeries, ev: Diffuse) -> ZSeries:
    p = ev.mixing
    out = {}
    for k, poly in series.harmonics.items():
        if k == 0.0:
            out[k] = poly
        elif p != 1.0:
            out[k] = poly * (1.0 - p)
    return ZSeries(series.n, _prune(out))


def track(initial, prog: PulseProgram, mol: MoleculeSpec) -> tuple[ZSeries, dict]:
    """Run ``prog`` symbolically; returns the final series and checkpoint series.

    Only ideal (instantaneous) pulses are tracked; gates and finite pulses
    are rejected. Acquire events are ignored.
    """
    series = initial if isinstance(initial, ZSeries) else ZSeries.constant(initial, mol.n)
    checkpoints = {}
    for ev in prog.events:
        if isinstance(ev, Checkpoint):
            checkpoints[ev.label] = series
        elif isinstance(ev, Pulse):
            if ev.duration_s:
                raise ValidationError("the symbolic tracker handles instantaneous pulses only")
            sites = [mol.index(x) for x in ev.targets.resolve(mol)]
            series = _pulse(series, sites, math.radians(ev.phase_deg), math.radians(ev.angle_deg))
        elif isinstance(ev, ZRot):
            z = _site_letters(mol.n, {mol.index(ev.target): "Z"})
            series = series.map(lambda p, z=z, a=math.radians(ev.angle_deg): po_rotate(p, z, a))
        elif isinstance(ev, Delay):
            series = _delay(series, mol, ev)
        elif isinstance(ev, Gradient):
            series = _gradient(series, mol, ev)
        elif isinstance(ev, Diffuse):
            series = _diffuse(series, ev)
        elif isinstance(ev, Gate):
            raise ValidationError("the symbolic tracker does not expand gates")
        elif isinstance(ev, Acquire):
            continue
        else:
            raise TypeError(f"cannot track {ev!r}")
    return series, checkpoints
