"""Multi-spin operator algebra.

Numeric operators are plain complex ``numpy`` arrays of dimension ``2**n``.
Site 0 is the leftmost tensor factor and ``|0>`` (spin up) is the +1
eigenvector of sigma_z.

Symbolic product operators are held in :class:`PauliPolynomial`, keyed by a
letter string with one letter per spin:

    ``I X Y Z``  identity and Pauli matrices
    ``U D``      projectors e_up = |0><0| and e_down = |1><1|
"""
from __future__ import annotations

import math
import re
from typing import NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-10

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "U": np.array([[1, 0], [0, 0]], dtype=complex),
    "D": np.array([[0, 0], [0, 1]], dtype=complex),
}
_LABELS = {
    "I": "I", "X": "X", "Y": "Y", "Z": "Z",
    "PLUS": "PLUS", "EUP": "U", "EDN": "D",
}
LETTERS = "IXYZUD"
_ORDER = {c: i for i, c in enumerate(LETTERS)}

# single-site Pauli products: (a, b) -> (phase, c) with a.b = phase * c
_PRODUCT = {}
for _a in "IXYZ":
    for _b in "IXYZ":
        _m = _SINGLE[_a] @ _SINGLE[_b]
        for _c in "IXYZ":
            _ph = np.trace(_SINGLE[_c] @ _m) / 2
            if abs(_ph) > 0.5:
                _PRODUCT[_a, _b] = (complex(np.round(_ph.real) + 1j * np.round(_ph.imag)), _c)


def pauli(label: str) -> np.ndarray:
    """Return a 2x2 single-spin operator.

    ``label`` is one of ``I, X, Y, Z, PLUS, EUP, EDN``. ``PLUS`` is
    sigma_x + i sigma_y = [[0, 2], [0, 0]].
    """
    key = _LABELS.get(label)
    if key is None:
        raise ValueError(f"unknown single-spin operator {label!r}")
    if key == "PLUS":
        return _SINGLE["X"] + 1j * _SINGLE["Y"]
    return _SINGLE[key].copy()


def n_spins(op: np.ndarray) -> int:
    """Spin count of a square operator of dimension 2**n."""
    dim = op.shape[0]
    if op.ndim != 2 or op.shape[1] != dim or dim < 2 or dim & (dim - 1):
        raise ValueError(f"operator shape {op.shape} is not 2^n x 2^n")
    return dim.bit_length() - 1


def embed(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """Tensor ``op`` into an n-spin space at ``site``, identity elsewhere."""
    if not 0 <= site < n:
        raise ValueError(f"site {site} out of range for {n} spins")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError("embed expects a single-spin 2x2 operator")
    left = np.eye(2**site, dtype=complex)
    right = np.eye(2 ** (n - site - 1), dtype=complex)
    return np.kron(np.kron(left, op), right)


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= tol)


def is_unitary(u: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    eye = np.eye(u.shape[0])
    return bool(np.max(np.abs(u.conj().T @ u - eye)) <= tol)


# --------------------------------------------------------------------------
# symbolic product operators


class PauliTerm(NamedTuple):
    coefficient: complex
    letters: str


def _check_letters(letters: str) -> str:
    if not letters or any(c not in _ORDER for c in letters):
        raise ValueError(f"invalid product-operator letters {letters!r}")
    return letters


class PauliPolynomial:
    """A linear combination of product operators in canonical form.

    Terms with equal letter strings are merged, exact zeros dropped and the
    remainder ordered by letter (I < X < Y < Z < U < D, leftmost spin most
    significant).
    """

    __slots__ = ("_coeffs", "n")

    def __init__(self, terms=(), n: int | None = None):
        coeffs: dict[str, complex] = {}
        for coefficient, letters in terms:
            _check_letters(letters)
            if n is None:
                n = len(letters)
            elif len(letters) != n:
                raise ValueError(f"term {letters!r} does not have {n} letters")
            coeffs[letters] = coeffs.get(letters, 0j) + complex(coefficient)
        self.n = n
        self._coeffs = {
            k: coeffs[k]
            for k in sorted(coeffs, key=lambda s: [_ORDER[c] for c in s])
            if coeffs[k] != 0
        }

    @classmethod
    def from_dict(cls, mapping, n: int | None = None) -> "PauliPolynomial":
        return cls(((c, k) for k, c in mapping.items()), n=n)

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "PauliPolynomial":
        """Parse strings such as ``"XX + i*XY - 0.5*ZZ"`` or ``"(0.5+1j)*XY"``."""
        text = text.replace(" ", "")
        if text in ("", "0"):
            return cls(n=n)
        pattern = re.compile(
            r"([+-]?)(?:(\([^)]*\)|[0-9.eE+-]*j?|i)\*?)?([IXYZUD]+)"
        )
        terms = []
        pos = 0
        while pos < len(text):
            m = pattern.match(text, pos)
            if not m or m.end() == pos:
                raise ValueError(f"cannot parse product operator text at {text[pos:]!r}")
            sign, coeff, letters = m.groups()
            if coeff in (None, ""):
                value = 1.0
            elif coeff == "i":
                value = 1j
            else:
                value = complex(coeff.strip("()"))
            terms.append(((-1 if sign == "-" else 1) * value, letters))
            pos = m.end()
        return cls(terms, n=n)

    @property
    def terms(self) -> list[PauliTerm]:
        return [PauliTerm(c, k) for k, c in self._coeffs.items()]

    def coefficients(self) -> dict[str, complex]:
        return dict(self._coeffs)

    def __getitem__(self, letters: str) -> complex:
        return self._coeffs.get(letters, 0j)

    def __len__(self):
        return len(self._coeffs)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: "PauliPolynomial") -> "PauliPolynomial":
        return PauliPolynomial(self.terms + other.terms, n=self.n or other.n)

    def __sub__(self, other: "PauliPolynomial") -> "PauliPolynomial":
        return self + (-1) * other

    def __neg__(self):
        return (-1) * self

    def __mul__(self, scalar) -> "PauliPolynomial":
        return PauliPolynomial(((scalar * c, k) for k, c in self._coeffs.items()), n=self.n)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PauliPolynomial):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        return hash(tuple(self._coeffs.items()))

    def chop(self, tol: float) -> "PauliPolynomial":
        return PauliPolynomial(((c, k) for k, c in self._coeffs.items() if abs(c) > tol), n=self.n)

    def max_abs_difference(self, other: "PauliPolynomial") -> float:
        keys = set(self._coeffs) | set(other._coeffs)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def __str__(self):
        if not self._coeffs:
            return "0"
        parts = []
        for k, c in self._coeffs.items():
            parts.append(f"{_format_coeff(c)}*{k}")
        return " + ".join(parts)

    def __repr__(self):
        return f"PauliPolynomial({str(self)!r})"


def _format_coeff(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"{c.imag!r}j"
    return f"({c.real!r}{c.imag:+}j)"


def _as_polynomial(obj, n=None) -> PauliPolynomial:
    if isinstance(obj, PauliPolynomial):
        return obj
    if isinstance(obj, PauliTerm):
        return PauliPolynomial([obj])
    if isinstance(obj, str):
        return PauliPolynomial.parse(obj, n=n)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a product operator")


def realize(poly, n: int | None = None) -> np.ndarray:
    """Matrix of a product-operator polynomial (sum of tensor products)."""
    poly = _as_polynomial(poly, n)
    if n is None:
        n = poly.n
    if n is None:
        raise ValueError("spin count unknown for an empty polynomial")
    if poly.n is not None and poly.n != n:
        raise ValueError(f"polynomial acts on {poly.n} spins, not {n}")
    out = np.zeros((2**n, 2**n), dtype=complex)
    for c, letters in poly.terms:
        m = np.ones((1, 1), dtype=complex)
        for ch in letters:
            m = np.kron(m, _SINGLE[ch])
        out += c * m
    return out


def _exact_cos_sin(angle: float) -> tuple[float, float]:
    # quarter turns come out exact so symbolic tracking has zero round-off
    q = angle / (math.pi / 2)
    r = round(q)
    if abs(q - r) < 1e-12:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[r % 4]
    return math.cos(angle), math.sin(angle)


def rotation(generator, angle: float, n: int | None = None) -> np.ndarray:
    """Unitary exp(-i G angle / 2).

    ``generator`` may be a product operator or a Hermitian matrix. Involutions
    (G^2 = 1) use the closed form cos(angle/2) - i sin(angle/2) G; anything
    else goes through an eigendecomposition.
    """
    if isinstance(generator, np.ndarray):
        g = np.asarray(generator, dtype=complex)
        n_spins(g)
    else:
        g = realize(generator, n)
    if not is_hermitian(g):
        raise ValueError("rotation generator is not Hermitian")
    eye = np.eye(g.shape[0], dtype=complex)
    if np.max(np.abs(g @ g - eye)) <= HERMITIAN_TOL:
        c, s = _exact_cos_sin(angle / 2)
        return c * eye - 1j * s * g
    w, v = np.linalg.eigh(g)
    return (v * np.exp(-0.5j * angle * w)) @ v.conj().T


def conjugate(state: np.ndarray, u: np.ndarray) -> np.ndarray:
    """u . state . u^dagger."""
    if state.shape != u.shape:
        raise ValueError(f"dimension mismatch {state.shape} vs {u.shape}")
    if not is_unitary(u):
        raise ValueError("conjugating operator is not unitary")
    return u @ state @ u.conj().T


def expectation(state: np.ndarray, obs: np.ndarray) -> complex:
    """tr(state . obs)."""
    if state.shape != obs.shape:
        raise ValueError(f"dimension mismatch {state.shape} vs {obs.shape}")
    return complex(np.einsum("ij,ji->", state, obs))


def bloch_vector(state: np.ndarray) -> tuple[float, float, float]:
    """(tr(rho X), tr(rho Y), tr(rho Z)) for a single-spin density matrix."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (2, 2):
        raise ValueError("bloch_vector expects a 2x2 density matrix")
    if not is_hermitian(state):
        raise ValueError("state is not Hermitian")
    if abs(np.trace(state) - 1) > HERMITIAN_TOL:
        raise ValueError(f"state has trace {np.trace(state).real:g}, expected 1")
    return tuple(expectation(state, _SINGLE[c]).real for c in "XYZ")


def expand_projectors(poly: PauliPolynomial) -> PauliPolynomial:
    """Rewrite e_up/e_down letters as (I +/- Z)/2."""
    out = []
    for c, letters in poly.terms:
        partial = [(c, "")]
        for ch in letters:
            if ch == "U":
                partial = [(a / 2, s + "I") for a, s in partial] + [(a / 2, s + "Z") for a, s in partial]
            elif ch == "D":
                partial = [(a / 2, s + "I") for a, s in partial] + [(-a / 2, s + "Z") for a, s in partial]
            else:
                partial = [(a, s + ch) for a, s in partial]
        out.extend(partial)
    return PauliPolynomial(out, n=poly.n)


def multiply_letters(a: str, b: str) -> tuple[complex, str]:
    """Product of two Pauli strings (letters IXYZ): a.b = phase * result."""
    phase = 1 + 0j
    letters = []
    for x, y in zip(a, b):
        ph, c = _PRODUCT[x, y]
        phase *= ph
        letters.append(c)
    return phase, "".join(letters)


def anticommutes(a: str, b: str) -> bool:
    clashes = sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y)
    return clashes % 2 == 1


def po_rotate(poly, generator, angle: float) -> PauliPolynomial:
    """Conjugate a product-operator polynomial by exp(-i G angle / 2).

    ``generator`` is a single Pauli product (letters in IXYZ, coefficient +1
    or -1). Terms commuting with G pass through; an anticommuting term T maps
    to cos(angle) T - i sin(angle) G.T.
    """
    poly = expand_projectors(_as_polynomial(poly))
    if isinstance(generator, str):
        generator = PauliTerm(1.0, generator)
    coeff, g = generator
    if any(ch not in "IXYZ" for ch in g):
        raise ValueError("rotation generator must be a Pauli product (no e_up/e_down)")
    coeff = complex(coeff)
    if coeff.imag != 0 or abs(abs(coeff.real) - 1) > 1e-12:
        raise ValueError("generator coefficient must be +1 or -1")
    if poly.n is not None and len(g) != poly.n:
        raise ValueError("generator and polynomial act on different spin counts")
    if coeff.real < 0:
        angle = -angle
    c, s = _exact_cos_sin(angle)
    out = []
    for a, t in poly.terms:
        if not anticommutes(g, t):
            out.append((a, t))
            continue
        phase, gt = multiply_letters(g, t)
        if c:
            out.append((a * c, t))
        if s:
            out.append((a * s * (-1j) * phase, gt))
    return PauliPolynomial(out, n=poly.n)


class Decomposition(NamedTuple):
    identity: complex
    deviation: PauliPolynomial


_BASIS = np.stack([_SINGLE[c] for c in "IXYZ"])


def pauli_coefficients(state: np.ndarray) -> np.ndarray:
    """Array of tr(state P) / 2^n for all Pauli strings, shape (4,)*n."""
    n = n_spins(state)
    t = np.asarray(state, dtype=complex).reshape([2] * (2 * n))
    for m in range(n):
        k = n - m - 1
        # basis[p, c, r] pairs with state[r, c]
        t = np.tensordot(_BASIS, t, axes=([2, 1], [m + k, n + k]))
    return t / 2**n


def deviation_decompose(state: np.ndarray, tol: float = 1e-13) -> Decomposition:
    """Expand a Hermitian operator in the Pauli-product basis.

    The identity coefficient is returned separately; coefficients with
    magnitude at or below ``tol`` are dropped from the deviation.
    """
    if not is_hermitian(state):
        raise ValueError("state is not Hermitian")
    n = n_spins(state)
    coeffs = pauli_coefficients(state)
    flat = coeffs.reshape(-1)
    identity = complex(flat[0])
    terms = []
    for idx in np.flatnonzero(np.abs(flat) > tol):
        if idx == 0:
            continue
        letters = "".join("IXYZ"[d] for d in np.unravel_index(idx, coeffs.shape))
        value = flat[idx]
        terms.append((complex(value.real, 0.0) if abs(value.imag) <= tol else complex(value), letters))
    return Decomposition(identity, PauliPolynomial(terms, n=n))


def phase_invariant_distance(u: np.ndarray, v: np.ndarray) -> float:
    """min over phi of ||u - e^{i phi} v|| (spectral norm, overlap-optimal phi)."""
    overlap = np.vdot(v, u)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(u - phase * v, ord=2))


def operator_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Spectral-norm distance between two operators."""
    return float(np.linalg.norm(a - b, ord=2))
