"""Command-line front end.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 numeric
invariant violation. ``NMRSIM_OUT`` overrides the output directory.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import acquisition as acq
from . import protocols as P
from .dsl import Checkpoint, Delay, PulseProgram, load_molecule, load_program, validate
from .engine import run_program
from .ensemble import make_ensemble
from .errors import InvariantError, ParseError, ValidationError
from .molecule import equilibrium_deviation
from .operators import PauliPolynomial, phase_invariant_distance
from .states import LabState

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_INVARIANT = 0, 2, 3, 4

BUILTINS = (
    "fig-c13peaks-uncoupled",
    "fig-c13peaks-coupled",
    "fig-peakgroup",
    "cnot-verify",
    "pseudopure",
    "qec-bench",
)


@dataclass
class RunConfig:
    molecule: Optional[Path] = None
    program: Optional[Path] = None
    builtin: Optional[str] = None
    slices: int = 64
    extent: float = 1.0
    center_hz: Optional[float] = None
    initial: Optional[str] = None
    out: Path = Path("out")
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def check(self):
        for path in (self.molecule, self.program):
            if path is not None and not Path(path).is_file():
                raise ValidationError(f"file not found: {path}")
        if self.slices < 2 or self.slices & (self.slices - 1):
            raise ValidationError(f"slice count must be a power of two, got {self.slices}")
        if self.extent <= 0:
            raise ValidationError("ensemble extent must be positive")


def output_dir(flag: Optional[str]) -> Path:
    env = os.environ.get("NMRSIM_OUT")
    path = Path(env) if env else Path(flag or "out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def parse_sweep(text: str) -> list[float]:
    """'start:stop:step' in ms (stop inclusive) or a comma list; returns seconds."""
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError
            start, stop, step = parts
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [(start + k * step) * 1e-3 for k in range(count)]
        values = [float(x) for x in text.split(",") if x.strip()]
        if not values:
            raise ValueError
        return [v * 1e-3 for v in values]
    except ValueError:
        raise ParseError(f"malformed sweep {text!r}; expected start:stop:step in ms") from None


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise ParseError(f"malformed number list {text!r}") from None


# ---------------------------------------------------------------------------
# run


def _emit_spectrum(fid, mol, out: Path, center_hz: float, observe) -> acq.Spectrum:
    spec = acq.dft(fid, center_hz)
    acq.write_fid_csv(out / "fid.csv", fid)
    acq.write_spectrum_csv(out / "spectrum.csv", spec)
    table = acq.transition_table(mol, observe)
    acq.write_transitions_csv(out / "transitions.csv", table)
    print(f"spectrum: {len(fid)} samples, resolution {spec.resolution_hz:.4g} Hz, "
          f"window {center_hz:g} +- {0.5 / fid.dwell_s:g} Hz")
    print("magnitude maxima (Hz): " + ", ".join(f"{f:.2f}" for f in acq.find_peaks(spec)))
    print(f"{'spin':<6}{'label':<10}{'freq_hz':>10}{'|amp|':>12}")
    for row in table:
        try:
            amp = acq.peak_amplitude(fid, row.freq_hz, mol.spins[mol.index(row.spin)].relax_rate, center_hz)
            shown = f"{abs(amp):12.4g}"
        except ValidationError:
            shown = f"{'out of band':>12}"
        print(f"{row.spin:<6}{row.label:<10}{row.freq_hz:>10.2f}{shown}")
    return spec


def _builtin_c13(cfg: RunConfig, coupled: bool, out: Path) -> int:
    if cfg.molecule is not None:
        mol = load_molecule(cfg.molecule)
        if mol.n != 2:
            raise ValidationError("the carbon spectrum builtin needs a two-spin molecule")
        if not coupled:
            mol = mol.with_couplings({})
        mol = mol.with_relax_rates([P.FIG_RATE] * 2)
        state = LabState.from_polynomial(PauliPolynomial.parse("XI + IX"))
        prog = PulseProgram("c13peaks", mol.name, (P.figure_acquire(mol.names),))
        fid = run_program(state, prog, mol).fid
    else:
        fid, mol = P.c13peaks_fid(coupled)
    center = P.FIG_CENTER_HZ if cfg.center_hz is None else cfg.center_hz
    _emit_spectrum(fid, mol, out, center, mol.names)
    return EXIT_OK


def _builtin_peakgroup(cfg: RunConfig, out: Path) -> int:
    for labeled, sub in ((False, "group"), (True, "labeled")):
        fid, mol = P.peakgroup_fid(labeled)
        d = out / sub
        d.mkdir(exist_ok=True)
        print(f"[{sub}]")
        _emit_spectrum(fid, mol, d, cfg.center_hz or 0.0, ["A"])
    return EXIT_OK


def _builtin_cnot(cfg: RunConfig, out: Path) -> int:
    mol = load_molecule(cfg.molecule) if cfg.molecule else P.carbon_pair()
    control = cfg.extra.get("control") or mol.names[0]
    target = cfg.extra.get("target") or mol.names[1]
    prog = P.cnot_program(control, target, mol)
    u = P.program_unitary(prog, mol)
    ideal = P.ideal_gate("cnot", [mol.index(control), mol.index(target)], mol.n)
    dist = phase_invariant_distance(u, ideal)
    print(f"cnot {control} -> {target} on {mol.name}: phase-invariant distance {dist:.3e}")
    for k, v in P.truth_table(u).items():
        print(f"  |{k}> -> |{v}>")
    if dist > 1e-9:
        raise InvariantError(f"pulse CNOT deviates from the ideal gate by {dist:.3e}")
    return EXIT_OK


def _builtin_pseudopure(cfg: RunConfig, out: Path) -> int:
    mol = load_molecule(cfg.molecule) if cfg.molecule else P.carbon_pair()
    report = P.pseudopure_checkpoints(mol)
    (out / "checkpoints.txt").write_text(report.format(), encoding="utf-8")
    res = P.pseudopure_numeric(mol, n_slices=cfg.slices, extent_a=cfg.extent)
    print(report.format(), end="")
    print(f"ensemble average: {res.final}   residual vs {res.target}: {res.residual:.3e}")
    # read out spin 1 from the prepared state
    state = LabState.from_polynomial(res.final, mol.n)
    relaxed = mol.with_relax_rates([P.FIG_RATE] * mol.n)
    prog = PulseProgram("readout", mol.name, (P.figure_acquire([mol.names[0]]),))
    fid = run_program(state, prog, relaxed).fid
    _emit_spectrum(fid, relaxed, out, cfg.center_hz or 0.0, [mol.names[0]])
    if report.max_error != 0:
        raise InvariantError(f"symbolic checkpoints differ by {report.max_error:g}")
    return EXIT_OK


def _program_run(cfg: RunConfig, out: Path) -> int:
    if cfg.molecule is None:
        raise ValidationError("--program needs --molecule")
    mol = load_molecule(cfg.molecule)
    prog = validate(load_program(cfg.program), mol)
    if cfg.initial:
        try:
            dev = PauliPolynomial.parse(cfg.initial, n=mol.n)
        except ValueError as exc:
            raise ParseError(f"initial deviation: {exc}") from None
    else:
        dev = equilibrium_deviation(mol, [s.moment_ratio for s in mol.spins])
    state = LabState.from_polynomial(dev, mol.n)
    if prog.needs_ensemble:
        state = make_ensemble(state, cfg.slices, cfg.extent)
    res = run_program(state, prog, mol)
    if res.checkpoints:
        lines = [f"({k}) {v}" for k, v in res.checkpoints.items()]
        (out / "checkpoints.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        print("\n".join(lines))
    if res.fid is not None:
        last = prog.events[-1]
        _emit_spectrum(res.fid, mol, out, cfg.center_hz or 0.0, last.observe.resolve(mol))
    return EXIT_OK


def cmd_run(cfg: RunConfig) -> int:
    cfg.check()
    out = cfg.out
    if cfg.builtin is None and cfg.program is None:
        raise ValidationError("give --program or --builtin")
    if cfg.builtin == "fig-c13peaks-uncoupled":
        return _builtin_c13(cfg, False, out)
    if cfg.builtin == "fig-c13peaks-coupled":
        return _builtin_c13(cfg, True, out)
    if cfg.builtin == "fig-peakgroup":
        return _builtin_peakgroup(cfg, out)
    if cfg.builtin == "cnot-verify":
        return _builtin_cnot(cfg, out)
    if cfg.builtin == "pseudopure":
        return _builtin_pseudopure(cfg, out)
    if cfg.builtin == "qec-bench":
        return cmd_qec_bench(cfg, "0:1000:50", ",".join(map(str, P.QEC_HALFTIMES)))
    return _program_run(cfg, out)


# ---------------------------------------------------------------------------
# qec-bench


def cmd_qec_bench(cfg: RunConfig, delays: str, halftimes: str, data: Optional[str] = None) -> int:
    cfg.check()
    sweep = parse_sweep(delays)
    halves = parse_floats(halftimes)
    mol = load_molecule(cfg.molecule) if cfg.molecule else P.tce()
    if len(halves) != mol.n:
        raise ValidationError(f"{len(halves)} half-times given for {mol.n} spins")
    rates = P.rates_from_halftimes(halves)
    curve = P.qec_benchmark(mol, sweep, rates, data)
    curve.write_csv(cfg.out / "fidelity.csv")
    f_pre = [r.f for r in curve.pre]
    f_post = [r.f for r in curve.post]
    print(f"{'delay_ms':>9}{'f_pre':>10}{'f_post':>10}")
    for t, a, b in zip(sweep, f_pre, f_post):
        print(f"{t * 1e3:9.1f}{a:10.5f}{b:10.5f}")
    try:
        s_pre = P.initial_slope(sweep, f_pre)
        s_post = P.initial_slope(sweep, f_post)
        print(f"initial slope f_pre {s_pre:.5g} /s, f_post {s_post:.5g} /s, "
              f"ratio {abs(s_post) / abs(s_pre) if s_pre else float('nan'):.3g}")
    except ValidationError as exc:
        print(f"initial slope not fitted: {exc}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# checkpoints


def cmd_checkpoints(cfg: RunConfig, area: float, relax: float) -> int:
    cfg.check()
    mol = load_molecule(cfg.molecule) if cfg.molecule else P.carbon_pair()
    report = P.pseudopure_checkpoints(mol, area)
    if relax > 0:
        from .tracker import track

        relaxed = mol.with_relax_rates([relax] * mol.n)
        prog = P.pseudopure_program(mol, area)
        _, observed = track(PauliPolynomial.parse("ZI"), prog, relaxed)
        # every coefficient decays by at most exp(-2 relax t) after t of delays
        elapsed, envelope = 0.0, {}
        for ev in prog.events:
            if isinstance(ev, Delay):
                elapsed += ev.duration_s
            elif isinstance(ev, Checkpoint):
                envelope[ev.label] = 1.0 - math.exp(-2 * relax * elapsed)
        print(f"{'row':<5}{'max_err':>10}{'envelope':>10}")
        worst = 0.0
        for label, row in report.rows.items():
            err = row.expected.max_abs_difference(observed[label])
            print(f"({label}) {err:10.3g}{envelope[label]:10.3g}")
            if err > envelope[label] + 1e-12:
                worst = max(worst, err)
        if worst:
            raise InvariantError(f"relaxed checkpoints leave the decay envelope by {worst:g}")
        return EXIT_OK
    text = report.format()
    (cfg.out / "checkpoints.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    spread = 2 * area * cfg.extent
    res = P.pseudopure_numeric(mol, area, cfg.slices, cfg.extent)
    print(f"row (9) ensemble residual after averaging: {res.residual:.3e}")
    turns = spread / (2 * math.pi)
    if abs(turns - round(turns)) > 1e-9:
        print(f"warning: first-gradient spread {spread:.4g} rad is not a multiple of 2 pi; "
              "averaging is incomplete", file=sys.stderr)
    if report.max_error != 0:
        raise InvariantError(f"symbolic checkpoints differ by {report.max_error:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmrsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--molecule", type=Path, help="molecule description file")
        p.add_argument("--out", default=None, help="output directory (default ./out)")
        p.add_argument("--slices", type=int, default=64, help="ensemble slices (power of two)")
        p.add_argument("--extent", type=float, default=1.0, help="sample half-length a")
        p.add_argument("--seed", type=int, default=0, help="recorded for reproducibility")

    run = sub.add_parser("run", help="run a program file or a builtin")
    common(run)
    src = run.add_mutually_exclusive_group()
    src.add_argument("--program", type=Path, help="pulse program file")
    src.add_argument("--builtin", choices=BUILTINS)
    run.add_argument("--initial", help="initial deviation, e.g. 'XI + IX' (default: thermal)")
    run.add_argument("--center-hz", type=float, default=None, help="spectral window center")
    run.add_argument("--control", help="cnot-verify control spin")
    run.add_argument("--target", help="cnot-verify target spin")

    qec = sub.add_parser("qec-bench", help="phase-damping sweep of the three-qubit code")
    common(qec)
    qec.add_argument("--delays", default="0:1000:50", help="start:stop:step in ms")
    qec.add_argument("--halftimes", default=",".join(map(str, P.QEC_HALFTIMES)),
                     help="per-spin phase half-times in s")
    qec.add_argument("--data", help="spin carrying the data qubit (default: third)")

    cp = sub.add_parser("checkpoints", help="pseudopure checkpoint table")
    common(cp)
    cp.add_argument("--area", type=float, default=P.PSEUDOPURE_AREA, help="first gradient area")
    cp.add_argument("--relax", type=float, default=0.0, help="phase-damping rate for every spin")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(
            molecule=args.molecule,
            program=getattr(args, "program", None),
            builtin=getattr(args, "builtin", None),
            slices=args.slices,
            extent=args.extent,
            center_hz=getattr(args, "center_hz", None),
            initial=getattr(args, "initial", None),
            out=output_dir(args.out),
            seed=args.seed,
            extra={"control": getattr(args, "control", None), "target": getattr(args, "target", None)},
        )
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "qec-bench":
            return cmd_qec_bench(cfg, args.delays, args.halftimes, args.data)
        return cmd_checkpoints(cfg, args.area, args.relax)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
