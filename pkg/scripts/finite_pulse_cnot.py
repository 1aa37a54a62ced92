"""How far the pulsed CNOT drifts from the ideal gate as pulses get longer.

Couplings and shifts keep acting during a finite pulse, so the net unitary
moves away from CNOT roughly in proportion to the pulse width.
"""
import argparse
from dataclasses import replace

from nmrsim import protocols as pr
from nmrsim.dsl import Pulse, PulseProgram
from nmrsim.operators import phase_invariant_distance


def widened(events, width_s):
    return tuple(replace(ev, duration_s=width_s) if isinstance(ev, Pulse) else ev for ev in events)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths-us", type=float, nargs="+", default=[0, 5, 10, 25, 50, 100])
    args = ap.parse_args()
    mol = pr.carbon_pair()
    ideal = pr.ideal_gate("cnot", [0, 1], 2)
    events = pr.cnot_events(mol, "C1", "C2")
    print(f"{'width_us':>9}{'distance':>12}")
    for w in args.widths_us:
        prog = PulseProgram("cnot", mol.name, widened(events, w * 1e-6))
        u = pr.program_unitary(prog, mol)
        print(f"{w:9.1f}{phase_invariant_distance(u, ideal):12.3e}")


if __name__ == "__main__":
    main()
