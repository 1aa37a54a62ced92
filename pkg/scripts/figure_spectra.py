"""Write the simulated carbon and peak-group spectra as CSV files.

Usage: python3 scripts/figure_spectra.py [--out DIR]
"""
import argparse
from pathlib import Path

import numpy as np

from nmrsim import acquisition as acq
from nmrsim import protocols as pr


def dump(name, fid, mol, center, out: Path, observe):
    d = out / name
    d.mkdir(parents=True, exist_ok=True)
    spec = acq.dft(fid, center)
    acq.write_fid_csv(d / "fid.csv", fid)
    acq.write_spectrum_csv(d / "spectrum.csv", spec)
    acq.write_transitions_csv(d / "transitions.csv", acq.transition_table(mol, observe))
    mag = np.round(acq.find_peaks(spec), 2).tolist()
    real = np.round(acq.find_peaks(spec, part="real"), 2).tolist()
    print(f"{name:<18} magnitude maxima {mag}")
    print(f"{'':<18} absorption maxima {real}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/figures"))
    args = ap.parse_args()
    for coupled in (False, True):
        fid, mol = pr.c13peaks_fid(coupled)
        dump(f"c13-{'coupled' if coupled else 'uncoupled'}", fid, mol, pr.FIG_CENTER_HZ, args.out, mol.names)
    for labeled in (False, True):
        fid, mol = pr.peakgroup_fid(labeled)
        dump(f"peakgroup-{'labeled' if labeled else 'all'}", fid, mol, 0.0, args.out, ["A"])
        amps = acq.group_readout(fid, mol, "A")
        print("  " + "  ".join(f"{k}:{abs(v):.3f}" for k, v in sorted(amps.items())))


if __name__ == "__main__":
    main()
