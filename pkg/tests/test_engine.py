import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmrsim import acquisition as acq
from nmrsim.dsl import Delay, Diffuse, Gate, Gradient, Pulse, PulseProgram, TargetSet, ZRot
from nmrsim.engine import apply_delay, apply_event, apply_gate, apply_pulse, apply_zrot, run_program
from nmrsim.errors import ValidationError
from nmrsim.molecule import MoleculeSpec, Spin
from nmrsim.operators import PauliPolynomial, deviation_decompose, embed, realize, rotation
from nmrsim.protocols import carbon_pair, refocus_program, tce
from nmrsim.states import LabState, logical_rho

Z = np.diag([1.0, -1.0]).astype(complex)


def lab(text, n=None):
    return LabState.from_polynomial(PauliPolynomial.parse(text), n)


def dev(state, mol):
    return deviation_decompose(logical_rho(state, mol)).deviation


def zz_pair(j=100.0):
    return MoleculeSpec((Spin("A", "C13"), Spin("B", "H1")), {("A", "B"): j}, "zz")


def single(rate=0.0, shift=0.0):
    return MoleculeSpec((Spin("A", "C13", shift_hz=shift, relax_rate=rate),), {}, "one")


def test_y90_tips_z_to_x():
    mol = single()
    state = LabState.from_operator(np.diag([1.0, 0.0]))
    out = apply_pulse(state, Pulse("A", 90.0, 90.0), mol)
    assert np.allclose(out.rho, realize("0.5*I + 0.5*X", 1))


def test_x90_tips_z_toward_minus_y():
    out = apply_pulse(lab("Z"), Pulse("A", 0.0, 90.0), single())
    assert dev(out, single()) == PauliPolynomial.parse("-Y")


def test_two_x180_restore_state():
    mol = single()
    s = lab("0.3*X + 0.2*Y + 0.7*Z")
    out = apply_pulse(apply_pulse(s, Pulse("A", 0.0, 180.0), mol), Pulse("A", 0.0, 180.0), mol)
    assert np.allclose(out.rho, s.rho, atol=1e-15)


def test_zrot_matches_explicit_rotation_before_pulse():
    mol = single(shift=123.0)
    s = apply_zrot(lab("X"), ZRot("A", 90.0), mol)
    via_frame = apply_pulse(s, Pulse("A", 0.0, 90.0), mol)
    u = rotation("X", math.pi / 2) @ rotation("Z", math.pi / 2)
    assert np.allclose(logical_rho(via_frame, mol), u @ realize("X", 1) @ u.conj().T)
    assert dev(via_frame, mol).max_abs_difference(PauliPolynomial.parse("Z")) < 1e-12


def test_zrot_then_inverse_restores_frames():
    mol = carbon_pair()
    s = lab("XI")
    out = apply_zrot(apply_zrot(s, ZRot("C1", 37.0), mol), ZRot("C1", -37.0), mol)
    assert out.frames.offsets == s.frames.offsets


def test_zz_delay_maps_xi_to_yz():
    mol = zz_pair()
    out = apply_delay(lab("XI"), Delay(1 / 200), mol)
    assert dev(out, mol).chop(1e-12).max_abs_difference(PauliPolynomial.parse("YZ")) < 1e-12


def test_delay_relaxation_halves_x_at_halftime():
    rate = math.log(2) / 0.0385
    mol = single(rate)
    out = apply_delay(lab("X"), Delay(0.0385), mol)
    assert dev(out, mol)["X"] == pytest.approx(0.5, abs=1e-12)


def test_zero_delay_is_identity():
    s = lab("XY")
    assert apply_delay(s, Delay(0.0), carbon_pair()) is s


def test_decoupled_delay_equals_delay_without_couplings():
    mol = tce()
    s = lab("XXY")
    a = apply_delay(s, Delay(0.013, TargetSet.of("H")), mol)
    stripped = mol.with_couplings({frozenset(("C1", "C2")): 100.0})
    b = apply_delay(s, Delay(0.013), stripped)
    assert np.allclose(a.rho, b.rho, atol=1e-14)


@pytest.mark.parametrize("inp,out", [("10", "11"), ("01", "01"), ("11", "10"), ("00", "00")])
def test_cnot_gate_truth_table(inp, out):
    mol = zz_pair()
    k = int(inp, 2)
    rho = np.zeros((4, 4), dtype=complex)
    rho[k, k] = 1
    res = apply_gate(LabState.from_operator(rho), Gate("cnot", TargetSet.of("A", "B")), mol)
    m = int(out, 2)
    assert abs(res.rho[m, m] - 1) < 1e-15


def test_toffoli_truth_table():
    mol = tce()
    for inp, out in (("110", "111"), ("100", "100"), ("111", "110")):
        rho = np.zeros((8, 8), dtype=complex)
        rho[int(inp, 2), int(inp, 2)] = 1
        res = apply_gate(LabState.from_operator(rho), Gate("toffoli", TargetSet.of("H", "C1", "C2")), mol)
        assert res.rho[int(out, 2), int(out, 2)] == 1


def test_gate_arity_checked():
    with pytest.raises(ValidationError):
        apply_gate(lab("ZZZ"), Gate("cnot", TargetSet.of("H", "C1", "C2")), tce())


def test_empty_program_returns_initial():
    s = lab("XZ")
    res = run_program(s, PulseProgram("e", "tce2", ()), carbon_pair())
    assert res.final is s and res.checkpoints == {} and res.fid is None


def test_gradient_needs_ensemble():
    prog = PulseProgram("g", "tce2", (Gradient(1.0),))
    with pytest.raises(ValidationError):
        run_program(lab("XI"), prog, carbon_pair())


def random_state(rng, n):
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    return LabState.from_operator(a + a.conj().T)


@pytest.mark.parametrize("axis", ["x", "y", "-x", "-y"])
def test_refocusing_restores_random_states(axis):
    mol = zz_pair()
    rng = np.random.default_rng(1)
    prog = refocus_program("A", 0.0123, axis, mol.name)
    for _ in range(50):
        s = random_state(rng, 2)
        out = run_program(s, prog, mol).final
        assert np.max(np.abs(out.rho - s.rho)) < 1e-10


def test_refocusing_without_second_pulse_flips():
    mol = zz_pair()
    out = run_program(lab("ZI"), refocus_program("A", 0.01, "x", mol.name, second_pulse=False), mol).final
    assert dev(out, mol).max_abs_difference(PauliPolynomial.parse("-ZI")) < 1e-12


def test_finite_pulse_converges_to_instantaneous():
    mol = carbon_pair()
    s = lab("ZI + 0.5*IZ")
    ideal = apply_pulse(s, Pulse("C1", 0.0, 90.0), mol)
    errors = []
    for width in (4e-5, 2e-5, 1e-5):
        out = apply_pulse(s, Pulse("C1", 0.0, 90.0, width), mol)
        errors.append(np.max(np.abs(logical_rho(out, mol) - logical_rho(ideal, mol))))
    assert errors[0] > errors[1] > errors[2]
    # first order in the width
    assert 1.5 < errors[0] / errors[1] < 2.5 and 1.5 < errors[1] / errors[2] < 2.5


event_strategy = st.one_of(
    st.builds(Pulse, st.sampled_from([TargetSet.of("C1"), TargetSet.of("C2"), TargetSet((), "C13")]),
              st.floats(0, 359), st.floats(-360, 360)),
    st.builds(ZRot, st.sampled_from(["C1", "C2"]), st.floats(-360, 360)),
    st.builds(Delay, st.floats(0, 0.02)),
)


@given(st.lists(event_strategy, max_size=8))
def test_unitary_events_preserve_spectrum_and_hermiticity(evs):
    mol = carbon_pair(relax=0.0)
    s = lab("ZI + 0.4*IZ + 0.3*XY")
    before = np.linalg.eigvalsh(s.rho)
    res = run_program(s, PulseProgram("r", mol.name, tuple(evs)), mol)
    after = np.linalg.eigvalsh(res.final.rho)
    assert np.allclose(before, after, atol=1e-10)
    assert abs(np.trace(res.final.rho) - np.trace(s.rho)) < 1e-12


@given(st.floats(0, 0.5), st.floats(0, 20), st.floats(0, 20))
def test_phase_damping_never_grows_coefficients(t, r1, r2):
    mol = carbon_pair(j_hz=0.0).with_relax_rates([r1, r2])
    s = lab("XI + YZ + 0.5*XY + ZZ")
    before = dev(s, mol)
    after = dev(apply_delay(s, Delay(t), mol), mol)
    for _, letters in after.terms:
        assert abs(after[letters]) <= abs(before[letters]) + 1e-12


def explicit_run(state, events, mol):
    """Reference path: z-rotations conjugate rho instead of moving frames."""
    for ev in events:
        if isinstance(ev, ZRot):
            u = embed(np.diag(np.exp([-0.5j * math.radians(ev.angle_deg), 0.5j * math.radians(ev.angle_deg)])),
                      mol.index(ev.target), mol.n)
            state = state.replace(rho=u @ state.rho @ u.conj().T)
        else:
            state = apply_event(state, ev, mol)
    return state


def test_frame_and_explicit_z_rotations_give_identical_fids():
    mol = carbon_pair(relax=5.0)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        evs = []
        for _ in range(6):
            kind = rng.integers(3)
            if kind == 0:
                evs.append(Pulse(TargetSet.of(str(rng.choice(["C1", "C2"]))), rng.uniform(0, 360), rng.uniform(-180, 180)))
            elif kind == 1:
                evs.append(ZRot(str(rng.choice(["C1", "C2"])), rng.uniform(-360, 360)))
            else:
                evs.append(Delay(rng.uniform(0, 0.01)))
        s = lab("ZI + IZ")
        a = run_program(s, PulseProgram("p", mol.name, tuple(evs)), mol).final
        b = explicit_run(s, evs, mol)
        fa = acq.acquire(a, 0.2, 1e-3, ["C1", "C2"], mol).samples
        fb = acq.acquire(b, 0.2, 1e-3, ["C1", "C2"], mol).samples
        worst = max(worst, np.max(np.abs(fa - fb)))
    assert worst < 1e-9
