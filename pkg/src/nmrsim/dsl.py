"""Text formats for molecules and pulse programs.

Program grammar::

    program   := "program" IDENT "uses" IDENT "{" event* "}"
    event     := pulse | zrot | delay | grad | diffuse | gate | acquire | checkpoint
    pulse     := "pulse" targets axis NUMBER ["for" NUMBER unit]
    axis      := "x" | "y" | "-x" | "-y" | "phase" NUMBER
    zrot      := "zrot" IDENT NUMBER
    delay     := "delay" NUMBER unit ["decouple" targets] ["norelax"]
    grad      := "gradient" ("+"|"-") NUMBER
    diffuse   := "diffuse" [NUMBER]
    gate      := "gate" ("cnot"|"toffoli") targets
    acquire   := "acquire" NUMBER unit "dwell" NUMBER unit "observe" targets
    checkpoint:= "checkpoint" STRING
    targets   := IDENT ("," IDENT)* | "all" IDENT
    unit      := "s" | "ms" | "us"

Molecule grammar (one statement per line, ``#`` comments)::

    molecule IDENT
    spin IDENT species IDENT moment NUMBER shift NUMBER hz relax NUMBER persec
    coupling IDENT IDENT NUMBER hz

Angles are written in degrees and normalized into (-360, 360]; pulse phases
into [0, 360).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .errors import ParseError, ValidationError
from .molecule import MoleculeSpec, Spin

# divisors to seconds; dividing keeps "5 ms" equal to the literal 0.005
UNITS = {"s": 1, "ms": 1000, "us": 1000000}
AXES = {"x": 0.0, "y": 90.0, "-x": 180.0, "-y": 270.0}
GATE_ARITY = {"cnot": 2, "toffoli": 3}


@dataclass(frozen=True)
class TargetSet:
    """Explicit spin names, or every spin of one species."""

    names: tuple[str, ...] = ()
    species: Optional[str] = None

    @classmethod
    def of(cls, *names: str) -> "TargetSet":
        return cls(tuple(names))

    def resolve(self, mol: MoleculeSpec) -> list[str]:
        if self.species is not None:
            return mol.species_members(self.species)
        for name in self.names:
            mol.index(name)
        return list(self.names)

    def __str__(self):
        if self.species is not None:
            return f"all {self.species}"
        return ",".join(self.names)


def _targets(spec) -> TargetSet:
    if isinstance(spec, TargetSet):
        return spec
    if isinstance(spec, str):
        return TargetSet.of(spec)
    return TargetSet(tuple(spec))


def normalize_angle(deg: float) -> float:
    if -360.0 < deg <= 360.0:
        return float(deg)
    return math.fmod(deg, 360.0) + 0.0


def normalize_phase(deg: float) -> float:
    return math.fmod(deg, 360.0) % 360.0 + 0.0


@dataclass(frozen=True)
class Pulse:
    targets: TargetSet
    phase_deg: float
    angle_deg: float
    duration_s: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "targets", _targets(self.targets))
        object.__setattr__(self, "phase_deg", normalize_phase(self.phase_deg))
        object.__setattr__(self, "angle_deg", normalize_angle(self.angle_deg))


@dataclass(frozen=True)
class ZRot:
    target: str
    angle_deg: float

    def __post_init__(self):
        object.__setattr__(self, "angle_deg", normalize_angle(self.angle_deg))


@dataclass(frozen=True)
class Delay:
    duration_s: float
    decouple: TargetSet = field(default_factory=TargetSet)
    relax: bool = True

    def __post_init__(self):
        object.__setattr__(self, "decouple", _targets(self.decouple))
        if self.duration_s < 0:
            raise ValidationError("negative delay duration")


@dataclass(frozen=True)
class Gradient:
    area: float
    sign: int = 1


@dataclass(frozen=True)
class Diffuse:
    mixing: float = 1.0


@dataclass(frozen=True)
class Gate:
    name: str
    targets: TargetSet

    def __post_init__(self):
        object.__setattr__(self, "targets", _targets(self.targets))


@dataclass(frozen=True)
class Acquire:
    duration_s: float
    dwell_s: float
    observe: TargetSet

    def __post_init__(self):
        object.__setattr__(self, "observe", _targets(self.observe))


@dataclass(frozen=True)
class Checkpoint:
    label: str


Event = Union[Pulse, ZRot, Delay, Gradient, Diffuse, Gate, Acquire, Checkpoint]


@dataclass(frozen=True)
class PulseProgram:
    name: str
    molecule: str
    events: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def __add__(self, other: "PulseProgram") -> "PulseProgram":
        return PulseProgram(self.name, self.molecule, self.events + other.events)

    @property
    def needs_ensemble(self) -> bool:
        return any(isinstance(e, (Gradient, Diffuse)) for e in self.events)


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<punct>[{},+\-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str, keep_newlines: bool = False) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            if keep_newlines:
                tokens.append(Token("nl", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Cursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column)

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, kind, text=None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def accept(self, kind, text=None):
        if self.at(kind, text):
            return self.advance()
        return None

    def expect(self, kind, text=None) -> Token:
        if not self.at(kind, text):
            want = repr(text) if text else kind
            got = repr(self.tok.text) if self.tok.kind != "eof" else "end of input"
            raise self.error(f"expected {want}, got {got}")
        return self.advance()

    def number(self, signed=True) -> float:
        sign = 1.0
        if signed and self.at("punct", "-"):
            self.advance()
            sign = -1.0
        elif signed and self.at("punct", "+"):
            self.advance()
        return sign * float(self.expect("number").text)

    def duration(self) -> float:
        if self.at("punct", "-"):
            raise self.error("negative duration")
        value = self.number(signed=False)
        unit = self.expect("ident")
        if unit.text not in UNITS:
            raise self.error(f"unknown time unit {unit.text!r}", unit)
        return value / UNITS[unit.text]

    def targets(self) -> TargetSet:
        if self.accept("ident", "all"):
            return TargetSet(species=self.expect("ident").text)
        names = [self.expect("ident").text]
        while self.accept("punct", ","):
            names.append(self.expect("ident").text)
        return TargetSet(tuple(names))


def _parse_axis(cur: _Cursor) -> float:
    if cur.accept("punct", "-"):
        tok = cur.expect("ident")
        if tok.text not in ("x", "y"):
            raise cur.error(f"unknown pulse axis -{tok.text}", tok)
        return AXES["-" + tok.text]
    tok = cur.expect("ident")
    if tok.text == "phase":
        return cur.number()
    if tok.text not in AXES:
        raise cur.error(f"unknown pulse axis {tok.text!r}", tok)
    return AXES[tok.text]


def _parse_event(cur: _Cursor):
    kw = cur.expect("ident")
    word = kw.text
    if word == "pulse":
        targets = cur.targets()
        phase = _parse_axis(cur)
        angle = cur.number()
        duration = cur.duration() if cur.accept("ident", "for") else None
        return Pulse(targets, phase, angle, duration)
    if word == "zrot":
        target = cur.expect("ident").text
        return ZRot(target, cur.number())
    if word == "delay":
        duration = cur.duration()
        decouple = cur.targets() if cur.accept("ident", "decouple") else TargetSet()
        relax = not cur.accept("ident", "norelax")
        return Delay(duration, decouple, relax)
    if word == "gradient":
        if cur.accept("punct", "+"):
            sign = 1
        elif cur.accept("punct", "-"):
            sign = -1
        else:
            raise cur.error("gradient needs a sign (+ or -)")
        return Gradient(cur.number(signed=False), sign)
    if word == "diffuse":
        if cur.at("number"):
            tok = cur.tok
            p = cur.number(signed=False)
            if not 0.0 <= p <= 1.0:
                raise cur.error("diffusion mixing must lie in [0, 1]", tok)
            return Diffuse(p)
        return Diffuse()
    if word == "gate":
        name = cur.expect("ident")
        if name.text not in GATE_ARITY:
            raise cur.error(f"unknown gate {name.text!r}", name)
        return Gate(name.text, cur.targets())
    if word == "acquire":
        duration = cur.duration()
        cur.expect("ident", "dwell")
        tok = cur.tok
        dwell = cur.duration()
        if dwell <= 0:
            raise cur.error("dwell must be positive", tok)
        cur.expect("ident", "observe")
        return Acquire(duration, dwell, cur.targets())
    if word == "checkpoint":
        return Checkpoint(cur.expect("string").text[1:-1])
    raise cur.error(f"unknown event keyword {word!r}", kw)


def parse_program(text: str) -> PulseProgram:
    """Parse pulse-program source into an event list (textual order)."""
    cur = _Cursor(tokenize(text))
    cur.expect("ident", "program")
    name = cur.expect("ident").text
    cur.expect("ident", "uses")
    molecule = cur.expect("ident").text
    cur.expect("punct", "{")
    events = []
    while not cur.accept("punct", "}"):
        if cur.at("eof"):
            raise cur.error("missing closing '}'")
        events.append(_parse_event(cur))
    cur.expect("eof")
    return PulseProgram(name, molecule, tuple(events))


def _num(x: float) -> str:
    return repr(float(x))


def _axis_text(phase: float) -> str:
    for text, value in AXES.items():
        if phase == value:
            return text
    return f"phase {_num(phase)}"


def format_event(ev) -> str:
    if isinstance(ev, Pulse):
        out = f"pulse {ev.targets} {_axis_text(ev.phase_deg)} {_num(ev.angle_deg)}"
        if ev.duration_s is not None:
            out += f" for {_num(ev.duration_s)} s"
        return out
    if isinstance(ev, ZRot):
        return f"zrot {ev.target} {_num(ev.angle_deg)}"
    if isinstance(ev, Delay):
        out = f"delay {_num(ev.duration_s)} s"
        if ev.decouple.names or ev.decouple.species:
            out += f" decouple {ev.decouple}"
        if not ev.relax:
            out += " norelax"
        return out
    if isinstance(ev, Gradient):
        return f"gradient {'+' if ev.sign > 0 else '-'} {_num(ev.area)}"
    if isinstance(ev, Diffuse):
        return "diffuse" if ev.mixing == 1.0 else f"diffuse {_num(ev.mixing)}"
    if isinstance(ev, Gate):
        return f"gate {ev.name} {ev.targets}"
    if isinstance(ev, Acquire):
        return f"acquire {_num(ev.duration_s)} s dwell {_num(ev.dwell_s)} s observe {ev.observe}"
    if isinstance(ev, Checkpoint):
        return f'checkpoint "{ev.label}"'
    raise TypeError(f"not a pulse event: {ev!r}")


def format_program(prog: PulseProgram) -> str:
    lines = [f"program {prog.name} uses {prog.molecule} {{"]
    lines += [f"    {format_event(ev)}" for ev in prog.events]
    lines.append("}")
    return "\n".join(lines) + "\n"


def validate(prog: PulseProgram, mol: MoleculeSpec) -> PulseProgram:
    """Check a parsed program against the molecule it will run on."""
    if prog.molecule != mol.name:
        raise ValidationError(f"program {prog.name} uses {prog.molecule!r}, molecule is {mol.name!r}")
    for k, ev in enumerate(prog.events):
        if isinstance(ev, Pulse):
            ev.targets.resolve(mol)
        elif isinstance(ev, ZRot):
            mol.index(ev.target)
        elif isinstance(ev, Delay):
            ev.decouple.resolve(mol)
        elif isinstance(ev, Gate):
            names = ev.targets.resolve(mol)
            if len(names) != GATE_ARITY[ev.name] or len(set(names)) != len(names):
                raise ValidationError(
                    f"gate {ev.name} needs {GATE_ARITY[ev.name]} distinct spins, got {names}"
                )
        elif isinstance(ev, Acquire):
            if k != len(prog.events) - 1:
                raise ValidationError("acquire must be the last event")
            if not ev.observe.resolve(mol):
                raise ValidationError("acquire observes no spins")
            if ev.dwell_s <= 0 or ev.dwell_s > ev.duration_s:
                raise ValidationError("acquire needs 0 < dwell <= duration")
    return prog


# ---------------------------------------------------------------------------
# molecule files


def parse_molecule(text: str, name: Optional[str] = None) -> MoleculeSpec:
    """Parse a molecule description (see module docstring for the grammar)."""
    cur = _Cursor(tokenize(text, keep_newlines=True))
    spins: list[Spin] = []
    couplings: dict[frozenset, float] = {}
    mol_name = None
    while not cur.at("eof"):
        if cur.accept("nl"):
            continue
        kw = cur.expect("ident")
        if kw.text == "molecule":
            mol_name = cur.expect("ident").text
        elif kw.text == "spin":
            spin_name = cur.expect("ident")
            if any(s.name == spin_name.text for s in spins):
                raise cur.error(f"duplicate spin {spin_name.text!r}", spin_name)
            cur.expect("ident", "species")
            species = cur.expect("ident").text
            cur.expect("ident", "moment")
            moment = cur.number()
            cur.expect("ident", "shift")
            shift = cur.number()
            cur.expect("ident", "hz")
            cur.expect("ident", "relax")
            tok = cur.tok
            relax = cur.number()
            if relax < 0:
                raise cur.error("relaxation rate must be non-negative", tok)
            cur.expect("ident", "persec")
            spins.append(Spin(spin_name.text, species, moment, shift, relax))
        elif kw.text == "coupling":
            a = cur.expect("ident")
            b = cur.expect("ident")
            j = cur.number()
            cur.expect("ident", "hz")
            known = {s.name for s in spins}
            for tok in (a, b):
                if tok.text not in known:
                    raise cur.error(f"coupling references undeclared spin {tok.text!r}", tok)
            if a.text == b.text:
                raise cur.error("self-coupling", b)
            pair = frozenset((a.text, b.text))
            if pair in couplings and couplings[pair] != j:
                raise cur.error(
                    f"coupling {a.text}-{b.text} declared as {couplings[pair]:g} and {j:g} Hz", a
                )
            couplings[pair] = j
        else:
            raise cur.error(f"unknown statement {kw.text!r}", kw)
        if not cur.at("eof"):
            cur.expect("nl")
    if not spins:
        raise ParseError("molecule declares no spins", cur.tok.line, cur.tok.column)
    return MoleculeSpec(tuple(spins), couplings, mol_name or name or "molecule")


def format_molecule(mol: MoleculeSpec) -> str:
    lines = [f"molecule {mol.name}"]
    for s in mol.spins:
        lines.append(
            f"spin {s.name} species {s.species} moment {_num(s.moment_ratio)} "
            f"shift {_num(s.shift_hz)} hz relax {_num(s.relax_rate)} persec"
        )
    for pair, j in mol.couplings.items():
        a, b = sorted(pair, key=mol.index)
        lines.append(f"coupling {a} {b} {_num(j)} hz")
    return "\n".join(lines) + "\n"


def load_molecule(path) -> MoleculeSpec:
    path = Path(path)
    return parse_molecule(path.read_text(encoding="utf-8"), name=path.stem)


def load_program(path) -> PulseProgram:
    return parse_program(Path(path).read_text(encoding="utf-8"))
