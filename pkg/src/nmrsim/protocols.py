"""Prebuilt pulse programs and the harnesses that check them.

Covers the controlled-not, refocusing, labeled pseudopure preparation, the
three-qubit phase-error-correcting code and the simulated spectra.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import acquisition as acq
from .dsl import (
    Acquire, Checkpoint, Delay, Diffuse, Gate, Gradient, Pulse, PulseProgram, TargetSet, ZRot,
)
from .engine import run_program
from .ensemble import average, make_ensemble
from .errors import ValidationError
from .molecule import MoleculeSpec, Spin
from .operators import PauliPolynomial, deviation_decompose, realize
from .states import LabState, logical_rho
from .tracker import ZSeries, track

# parameters of the simulated carbon spectra
FIG_DWELL = 1.0 / 1450.0
FIG_SAMPLES = 2048
FIG_HALFTIME = 0.0385
FIG_RATE = math.log(2) / FIG_HALFTIME
FIG_CENTER_HZ = 450.0

# proton, first carbon, second carbon
QEC_HALFTIMES = (2.0, 0.76, 0.42)

PSEUDOPURE_AREA = math.pi


# ---------------------------------------------------------------------------
# molecules


def tce(relax_rates=(0.0, 0.0, 0.0)) -> MoleculeSpec:
    """Labeled trichloroethylene: proton plus two carbons."""
    h, c1, c2 = relax_rates
    spins = (
        Spin("H", "H1", 4.0, 0.0, h),
        Spin("C1", "C13", 1.0, 0.0, c1),
        Spin("C2", "C13", 1.0, 900.0, c2),
    )
    couplings = {
        frozenset(("C1", "C2")): 100.0,
        frozenset(("H", "C1")): 200.0,
        frozenset(("H", "C2")): 9.0,
    }
    return MoleculeSpec(spins, couplings, "tce")


def carbon_pair(j_hz: float = 100.0, shift_hz: float = 900.0, relax: float = 0.0) -> MoleculeSpec:
    """The two carbons of TCE on their own (proton decoupled)."""
    spins = (
        Spin("C1", "C13", 1.0, 0.0, relax),
        Spin("C2", "C13", 1.0, shift_hz, relax),
    )
    return MoleculeSpec(spins, {frozenset(("C1", "C2")): j_hz}, "tce2")


def peakgroup_molecule(relax: float = FIG_RATE) -> MoleculeSpec:
    """Observed spin A coupled to three others at 100, 60 and 24 Hz."""
    spins = (
        Spin("A", "C13", 1.0, 0.0, relax),
        Spin("B", "H1", 4.0, 0.0, relax),
        Spin("C", "F19", 3.8, 0.0, relax),
        Spin("D", "P31", 1.6, 0.0, relax),
    )
    couplings = {
        frozenset(("A", "B")): 100.0,
        frozenset(("A", "C")): 60.0,
        frozenset(("A", "D")): 24.0,
    }
    return MoleculeSpec(spins, couplings, "peakgroup")


def rates_from_halftimes(halftimes) -> list[float]:
    if any(h <= 0 for h in halftimes):
        raise ValidationError("half-times must be positive")
    return [math.log(2) / h for h in halftimes]


# ---------------------------------------------------------------------------
# controlled-not


def _others(mol: MoleculeSpec, *names) -> TargetSet:
    return TargetSet(tuple(x for x in mol.names if x not in names))


def cnot_events(mol: MoleculeSpec, control: str, target: str, relax: bool = True) -> list:
    """Pulses and delay whose net logical unitary is CNOT up to a global phase.

    The ZZ evolution over 1/(2J) is conjugated by y-rotations on the target;
    two virtual z-rotations remove the leftover single-spin phases.
    """
    j = mol.coupling(control, target)
    if j == 0:
        raise ValidationError(f"no coupling between {control} and {target}")
    return [
        Pulse(TargetSet.of(target), 90.0, 90.0),
        Delay(1.0 / (2.0 * abs(j)), _others(mol, control, target), relax),
        ZRot(target, -90.0 if j > 0 else 90.0),
        ZRot(control, 90.0 if j > 0 else -90.0),
        Pulse(TargetSet.of(target), 270.0, 90.0),
    ]


def cnot_program(control: str, target: str, mol: MoleculeSpec) -> PulseProgram:
    return PulseProgram("cnot", mol.name, tuple(cnot_events(mol, control, target)))


def ideal_gate(name: str, sites, n: int) -> np.ndarray:
    from .engine import gate_unitary

    return gate_unitary(name, sites, n)


def program_unitary(prog: PulseProgram, mol: MoleculeSpec) -> np.ndarray:
    """Net logical-frame unitary of a program without gradients or relaxation.

    Extracted from the images of |i><0|: with U|i> = u_i, the image is
    |u_i><u_0|, so one column of each image fixes u_i up to a shared phase.
    """
    if prog.needs_ensemble:
        raise ValidationError("programs with gradients have no single unitary")
    if np.any(mol.relax_rates):
        mol = mol.with_relax_rates([0.0] * mol.n)
    dim = 2**mol.n
    images = []
    for i in range(dim):
        rho = np.zeros((dim, dim), dtype=complex)
        rho[i, 0] = 1.0
        state = LabState.from_operator(rho)
        out = run_program(state, prog, mol, check_invariants=False).final
        images.append(logical_rho(out, mol))
    k = int(np.argmax(np.abs(np.diag(images[0]))))
    ref = math.sqrt(images[0][k, k].real)
    return np.stack([img[:, k] / ref for img in images], axis=1)


def truth_table(u: np.ndarray) -> dict:
    """Basis-state mapping of a (near-)permutation unitary, as bit strings."""
    n = u.shape[0].bit_length() - 1
    out = {}
    for i in range(u.shape[0]):
        j = int(np.argmax(np.abs(u[:, i])))
        out[format(i, f"0{n}b")] = format(j, f"0{n}b")
    return out


# ---------------------------------------------------------------------------
# refocusing


def refocus_program(spin: str, total_delay_s: float, axis: str = "x", mol_name: str = "molecule",
                    second_pulse: bool = True) -> PulseProgram:
    if total_delay_s <= 0:
        raise ValidationError("refocusing needs a positive total delay")
    from .dsl import AXES

    phase = AXES[axis]
    half = total_delay_s / 2
    events = [Delay(half), Pulse(TargetSet.of(spin), phase, 180.0), Delay(half)]
    if second_pulse:
        events.append(Pulse(TargetSet.of(spin), phase, 180.0))
    return PulseProgram("refocus", mol_name, tuple(events))


# ---------------------------------------------------------------------------
# labeled pseudopure state


def pseudopure_program(mol: MoleculeSpec, area: float = PSEUDOPURE_AREA) -> PulseProgram:
    """Network taking deviation ZI to -X(I+Z)/2 plus z-winding terms.

    Checkpoints "1" ... "9" sit between the events.
    """
    if mol.n != 2:
        raise ValidationError("the pseudopure network needs exactly two spins")
    a, b = mol.names
    j = mol.coupling(a, b)
    if j == 0:
        raise ValidationError("the pseudopure network needs a nonzero coupling")
    tau = 1.0 / (2.0 * abs(j))
    steps = [
        Pulse(TargetSet.of(a), 90.0, 90.0),
        Delay(tau),
        Pulse(TargetSet.of(b), 90.0, 90.0),
        Gradient(area, +1),
        Pulse(TargetSet.of(b), 270.0, 90.0),
        Delay(tau),
        Pulse(TargetSet.of(b), 180.0, 90.0),
        Gradient(2 * area, -1),
    ]
    events = [Checkpoint("1")]
    for k, ev in enumerate(steps, start=2):
        events += [ev, Checkpoint(str(k))]
    return PulseProgram("pseudopure", mol.name, tuple(events))


def _p(text: str) -> PauliPolynomial:
    return PauliPolynomial.parse(text, n=2)


def pseudopure_expected(area: float = PSEUDOPURE_AREA) -> dict:
    """The nine checkpoint deviations for input ZI, as spatial harmonics.

    From row 4 on, the tracked deviation is half of the written form.
    """
    k = 2 * area
    h = 0.5
    rows = {
        "1": [("const", 0, _p("ZI"))],
        "2": [("const", 0, _p("XI"))],
        "3": [("const", 0, _p("YZ"))],
        "4": [("const", 0, _p("YX+XY") * h), ("const", 0, _p("YX-XY") * h)],
        "5": [("cos", k, _p("YX+XY") * h), ("sin", k, _p("YY-XX") * h), ("const", 0, _p("YX-XY") * h)],
        "6": [("cos", k, _p("YZ+XY") * h), ("sin", k, _p("YY-XZ") * h), ("const", 0, _p("YZ-XY") * h)],
        "7": [("cos", k, _p("-XI+XY") * h), ("sin", k, _p("YY-YI") * h), ("const", 0, _p("-XI-XY") * h)],
        "8": [("cos", k, _p("-XI-XZ") * h), ("sin", k, _p("-YZ-YI") * h), ("const", 0, _p("-XI+XZ") * h)],
        # -(cos(-kz) X + sin(-kz) Y)(I - Z)
        "9": [("const", 0, _p("-XI-XZ") * h), ("cos", k, _p("-XI+XZ") * h), ("sin", k, _p("YI-YZ") * h)],
    }
    return {label: ZSeries.from_trig(2, pieces) for label, pieces in rows.items()}


@dataclass
class CheckpointRow:
    expected: object
    observed: object
    max_coeff_error: float


@dataclass
class CheckpointReport:
    rows: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max((r.max_coeff_error for r in self.rows.values()), default=0.0)

    def format(self) -> str:
        lines = [f"{'row':<4} {'max_err':>10}  expected | observed"]
        for label, r in self.rows.items():
            lines.append(f"({label}) {r.max_coeff_error:10.3g}  {r.expected} | {r.observed}")
        return "\n".join(lines) + "\n"


def pseudopure_checkpoints(mol: MoleculeSpec | None = None, area: float = PSEUDOPURE_AREA) -> CheckpointReport:
    """Track the network symbolically and compare with the expected rows."""
    mol = carbon_pair() if mol is None else mol
    _, observed = track(_p("ZI"), pseudopure_program(mol, area), mol)
    expected = pseudopure_expected(area)
    report = CheckpointReport()
    for label, exp in expected.items():
        obs = observed[label]
        report.rows[label] = CheckpointRow(exp, obs, exp.max_abs_difference(obs))
    return report


@dataclass
class PseudopureResult:
    final: PauliPolynomial
    target: PauliPolynomial
    residual: float
    checkpoints: dict


def pseudopure_numeric(mol: MoleculeSpec | None = None, area: float = PSEUDOPURE_AREA,
                       n_slices: int = 64, extent_a: float = 1.0) -> PseudopureResult:
    """Run the network on a sliced ensemble; compare the average with -X(I+Z)/2."""
    mol = carbon_pair() if mol is None else mol
    ens = make_ensemble(LabState.from_polynomial(_p("ZI")), n_slices, extent_a)
    res = run_program(ens, pseudopure_program(mol, area), mol)
    final = deviation_decompose(logical_rho(average(res.final), mol)).deviation
    target = _p("XI+XZ") * -0.5
    residual = float(np.linalg.norm(realize(final - target, 2), ord=2)) if len(final - target) else 0.0
    return PseudopureResult(final, target, residual, res.checkpoints)


def input_prep_program(mol: MoleculeSpec, area: float = PSEUDOPURE_AREA, phase_deg: float = 90.0) -> PulseProgram:
    """Remove spin 2's polarization: 90 degree pulse, gradient, diffusion."""
    if mol.n != 2:
        raise ValidationError("input preparation is defined for two spins")
    b = mol.names[1]
    return PulseProgram("input_prep", mol.name, (
        Pulse(TargetSet.of(b), phase_deg, 90.0), Gradient(area, +1), Diffuse(),
    ))


def input_prep_cycle(mol: MoleculeSpec) -> tuple[PulseProgram, PulseProgram]:
    """Phase-cycled alternative: the same 90 degree pulse about +y and -y.

    Summing the two runs cancels spin 2's planar terms.
    """
    b = mol.names[1]
    return (
        PulseProgram("input_prep_a", mol.name, (Pulse(TargetSet.of(b), 90.0, 90.0),)),
        PulseProgram("input_prep_b", mol.name, (Pulse(TargetSet.of(b), 270.0, 90.0),)),
    )


# ---------------------------------------------------------------------------
# three-qubit phase-error code


@dataclass(frozen=True)
class QecLayout:
    data: str
    syndromes: tuple[str, str]


def qec_layout(mol: MoleculeSpec, data: str | None = None) -> QecLayout:
    if mol.n != 3:
        raise ValidationError("the phase-error code needs exactly three spins")
    data = mol.names[2] if data is None else data
    mol.index(data)
    s1, s2 = [x for x in mol.names if x != data]
    return QecLayout(data, (s1, s2))


def qec_programs(mol: MoleculeSpec, data: str | None = None, pulsed_cnots: bool = False) -> dict:
    """Encode, decode (exact inverse of encode) and Toffoli correction.

    encode: z-rotation by 180 on the data spin, CNOT data->s1, CNOT data->s2,
    then 90 degree y-rotations on all three; it maps (a|0> + b|1>)|00> to
    -i (a|+++> + b|---|). With ``pulsed_cnots`` the CNOTs are pulse
    sequences with relaxation-free delays instead of ideal gates.
    """
    lay = qec_layout(mol, data)
    s1, s2 = lay.syndromes
    d = lay.data
    everyone = TargetSet(tuple(mol.names))

    def cnot(c, t):
        # CNOT is its own inverse (the pulsed one up to a global phase)
        if not pulsed_cnots:
            return [Gate("cnot", TargetSet.of(c, t))]
        return cnot_events(mol, c, t, relax=False)

    encode = [ZRot(d, 180.0)] + cnot(d, s1) + cnot(d, s2) + [Pulse(everyone, 90.0, 90.0)]
    decode = [Pulse(everyone, 270.0, 90.0)] + cnot(d, s2) + cnot(d, s1) + [ZRot(d, -180.0)]
    correct = [Gate("toffoli", TargetSet.of(s1, s2, d))]
    return {
        "encode": PulseProgram("encode", mol.name, tuple(encode)),
        "decode_inverse": PulseProgram("decode", mol.name, tuple(decode)),
        "correct": PulseProgram("correct", mol.name, tuple(correct)),
    }


def _data_reduced(rho: np.ndarray, mol: MoleculeSpec, data: str) -> np.ndarray:
    n = mol.n
    t = rho.reshape([2] * (2 * n))
    d = mol.index(data)
    others = [k for k in range(n) if k != d]
    # trace over every other spin
    for k in sorted(others, reverse=True):
        t = np.trace(t, axis1=k, axis2=k + t.ndim // 2)
    return t.reshape(2, 2)


def qec_error_check(mol: MoleculeSpec, error_spin: str | None, psi, data: str | None = None) -> float:
    """Encode, apply a full sigma_z error, decode and correct.

    Returns the trace distance between the data spin's output and the input
    qubit state psi; syndromes start in |00>.
    """
    lay = qec_layout(mol, data)
    progs = qec_programs(mol, lay.data)
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    zero = np.array([1.0, 0.0], dtype=complex)
    full = np.ones(1, dtype=complex)
    for name in mol.names:
        full = np.kron(full, psi if name == lay.data else zero)
    rho = np.outer(full, full.conj())
    events = list(progs["encode"].events)
    if error_spin is not None:
        # zrot by 180 is sigma_z up to a global phase
        events.append(_ExplicitZ(error_spin))
    events += list(progs["decode_inverse"].events) + list(progs["correct"].events)
    state = LabState.from_operator(rho, deviation=False)
    from .engine import apply_event

    for ev in events:
        if isinstance(ev, _ExplicitZ):
            state = _explicit_z(state, mol, ev.spin)
        else:
            state = apply_event(state, ev, mol)
    out = _data_reduced(logical_rho(state, mol), mol, lay.data)
    target = np.outer(psi, psi.conj())
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(out - target))))


@dataclass(frozen=True)
class _ExplicitZ:
    spin: str


def _explicit_z(state, mol: MoleculeSpec, spin: str):
    from .molecule import z_signs

    s = z_signs(mol.n)[:, mol.index(spin)]
    return state.replace(rho=state.rho * np.outer(s, s))


@dataclass(frozen=True)
class FidelityReport:
    f_x: float
    f_y: float
    f_z: float

    @property
    def f(self) -> float:
        return (1.0 + self.f_x + self.f_y + self.f_z) / 4.0


@dataclass
class FidelityCurve:
    delays_s: list
    pre: list
    post: list

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["delay_ms", "f_pre", "f_post", "fx_pre", "fy_pre", "fz_pre",
                        "fx_post", "fy_post", "fz_post"])
            for t, a, b in zip(self.delays_s, self.pre, self.post):
                vals = [t * 1e3, a.f, b.f, a.f_x, a.f_y, a.f_z, b.f_x, b.f_y, b.f_z]
                w.writerow([format(float(v), ".17g") for v in vals])

    @staticmethod
    def read_csv(path) -> "FidelityCurve":
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.DictReader(fh)
            if r.fieldnames[:3] != ["delay_ms", "f_pre", "f_post"]:
                raise ValidationError(f"{path}: unexpected fidelity header {r.fieldnames}")
            rows = list(r)
        delays = [float(x["delay_ms"]) / 1e3 for x in rows]
        pre = [FidelityReport(*(float(x[k]) for k in ("fx_pre", "fy_pre", "fz_pre"))) for x in rows]
        post = [FidelityReport(*(float(x[k]) for k in ("fx_post", "fy_post", "fz_post"))) for x in rows]
        return FidelityCurve(delays, pre, post)


def _sigma_u_input(mol: MoleculeSpec, data: str, u: str) -> PauliPolynomial:
    letters = ["U"] * mol.n
    letters[mol.index(data)] = u
    return PauliPolynomial([(1.0, "".join(letters))], n=mol.n)


def _signal_ratio(rho_in: np.ndarray, rho_out: np.ndarray, mol: MoleculeSpec, data: str, u: str) -> float:
    letters = ["I"] * mol.n
    letters[mol.index(data)] = u
    obs = realize("".join(letters), mol.n)
    return float(np.trace(rho_out @ obs).real / np.trace(rho_in @ obs).real)


def qec_benchmark(mol: MoleculeSpec, delays, rates, data: str | None = None) -> FidelityCurve:
    """Fidelity of the data qubit before and after correction versus delay.

    For each u in x, y, z the deviation sigma_u |00><00| on (data, syndromes)
    is encoded, left to phase-damp for t with every coupling decoupled, and
    decoded. f_u is the signed ratio of output to input sigma_u signal.
    """
    rates = list(rates)
    if len(rates) != mol.n:
        raise ValidationError(f"need {mol.n} relaxation rates, got {len(rates)}")
    if any(r < 0 for r in rates):
        raise ValidationError("relaxation rates must be non-negative")
    lay = qec_layout(mol, data)
    mol = mol.with_relax_rates(rates)
    progs = qec_programs(mol, lay.data)
    everyone = TargetSet(tuple(mol.names))
    pre_curve, post_curve = [], []
    for t in delays:
        if t < 0:
            raise ValidationError("negative delay in sweep")
        wait = PulseProgram("wait", mol.name, (Delay(float(t), everyone),))
        first = progs["encode"] + wait + progs["decode_inverse"]
        pre, post = {}, {}
        for u in "XYZ":
            state = LabState.from_polynomial(_sigma_u_input(mol, lay.data, u), mol.n)
            rho_in = logical_rho(state, mol)
            mid = run_program(state, first, mol).final
            end = run_program(mid, progs["correct"], mol).final
            pre[u] = _signal_ratio(rho_in, logical_rho(mid, mol), mol, lay.data, u)
            post[u] = _signal_ratio(rho_in, logical_rho(end, mol), mol, lay.data, u)
        pre_curve.append(FidelityReport(pre["X"], pre["Y"], pre["Z"]))
        post_curve.append(FidelityReport(post["X"], post["Y"], post["Z"]))
    return FidelityCurve(list(map(float, delays)), pre_curve, post_curve)


def analytic_fidelity(delays, rates, data_index: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Oracle for the code under independent phase flips.

    Each spin suffers a full flip with p_i(t) = (1 - exp(-lambda_i t)) / 2.
    All eight flip patterns are enumerated: before correction the data is
    intact when its own spin did not flip, afterwards when at most one spin
    flipped. A Pauli channel's entanglement fidelity is its no-error weight.
    """
    delays = np.asarray(delays, dtype=float)
    rates = np.asarray(rates, dtype=float)
    f_pre = np.zeros_like(delays)
    f_post = np.zeros_like(delays)
    p = (1.0 - np.exp(-np.outer(delays, rates))) / 2.0
    for pattern in itertools.product((0, 1), repeat=len(rates)):
        weight = np.ones_like(delays)
        for i, e in enumerate(pattern):
            weight = weight * (p[:, i] if e else 1.0 - p[:, i])
        if pattern[data_index] == 0:
            f_pre += weight
        if sum(pattern) <= 1:
            f_post += weight
    return f_pre, f_post


def initial_slope(delays, values, window_s: float = 0.2, degree: int = 3) -> float:
    """Slope at t = 0 from a least-squares polynomial over t <= window_s."""
    delays = np.asarray(delays, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = delays <= window_s + 1e-12
    if mask.sum() <= degree:
        raise ValidationError(f"need more than {degree} points within {window_s} s for a slope fit")
    coeffs = np.polynomial.polynomial.polyfit(delays[mask], values[mask], degree)
    return float(coeffs[1])


# ---------------------------------------------------------------------------
# simulated spectra


def figure_acquire(observe) -> Acquire:
    return Acquire(FIG_SAMPLES * FIG_DWELL, FIG_DWELL, TargetSet(tuple(observe)))


def c13peaks_fid(coupled: bool) -> tuple[acq.FidRecord, MoleculeSpec]:
    """Both carbons along x, shifts 0 and 900 Hz, with or without J = 100 Hz."""
    mol = carbon_pair(100.0 if coupled else 0.0, 900.0, FIG_RATE)
    state = LabState.from_polynomial(PauliPolynomial.parse("XI + IX"))
    prog = PulseProgram("c13peaks", mol.name, (figure_acquire(mol.names),))
    return run_program(state, prog, mol).fid, mol


def labeled_pseudopure(mol: MoleculeSpec, spin: str | None = None) -> PauliPolynomial:
    """sigma_x on ``spin`` times |0...0><0...0| on the others."""
    spin = mol.names[0] if spin is None else spin
    letters = ["U"] * mol.n
    letters[mol.index(spin)] = "X"
    return PauliPolynomial([(1.0, "".join(letters))], n=mol.n)


def peakgroup_fid(labeled: bool) -> tuple[acq.FidRecord, MoleculeSpec]:
    """Spin A's peak group: from XIII (all eight lines) or the labeled pseudopure state."""
    mol = peakgroup_molecule()
    dev = labeled_pseudopure(mol) if labeled else PauliPolynomial.parse("XIII")
    state = LabState.from_polynomial(dev, mol.n)
    prog = PulseProgram("peakgroup", mol.name, (figure_acquire(["A"]),))
    return run_program(state, prog, mol).fid, mol
