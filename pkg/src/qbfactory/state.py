"""Dense n-qubit state vectors with projector operators and post-selection.

Qubit 0 is the most significant bit of a basis index, so ``|01>`` is index 1.

A state is either numeric (complex amplitudes at a fixed p) or symbolic
(``FieldElement`` amplitudes).  Numeric amplitudes are kept relative to the
last normalization, so after a non-unitary operator the squared norm of a
branch is exactly the probability of reaching it.  Symbolic states carry
relative amplitudes only and never track probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from gmpy2 import mpc

from .errors import CapacityError, DimensionError, PostSelectionError
from .field import INV_SQRT2, FieldElement, high_precision

MAX_QUBITS = 12
INFINITY = math.inf
# branches lighter than this are treated as impossible
BRANCH_TOL = 1e-24


# ---------------------------------------------------------------------------
# operators

class Operator:
    """A 2^k x 2^k matrix acting on k qubits.

    ``entries`` holds 128-bit coefficients so symbolic runs do not pick up
    double rounding (1/sqrt(2) in particular); ``matrix`` is the complex view.
    """

    __slots__ = ("entries", "matrix", "unitary", "name", "n_qubits")

    def __init__(self, matrix, name: str = "U", unitary: bool | None = None):
        ent = np.array(matrix, dtype=object)
        if ent.ndim != 2 or ent.shape[0] != ent.shape[1]:
            raise DimensionError("operator matrix must be square")
        dim = ent.shape[0]
        k = dim.bit_length() - 1
        if dim < 2 or 1 << k != dim:
            raise DimensionError(f"operator dimension {dim} is not a power of two")
        ent = np.vectorize(high_precision, otypes=[object])(ent)
        mat = np.array([[complex(x) for x in row] for row in ent], dtype=complex)
        is_unitary = bool(np.allclose(mat.conj().T @ mat, np.eye(dim), atol=1e-9))
        if unitary and not is_unitary:
            raise DimensionError(f"operator {name} is flagged unitary but M^dagger M != I")
        self.entries = ent
        self.matrix = mat
        self.unitary = is_unitary if unitary is None else bool(unitary)
        self.name = name
        self.n_qubits = k

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "Operator") -> "Operator":
        """Composition: ``(A @ B)`` applies B first."""
        if self.dim != other.dim:
            raise DimensionError("cannot compose operators of different size")
        return Operator(self.entries.dot(other.entries), f"{self.name}.{other.name}")

    def __add__(self, other: "Operator") -> "Operator":
        if self.dim != other.dim:
            raise DimensionError("cannot add operators of different size")
        return Operator(self.entries + other.entries, f"({self.name}+{other.name})")

    def kron(self, other: "Operator") -> "Operator":
        return Operator(np.kron(self.entries, other.entries), f"{self.name}(x){other.name}")

    def scaled(self, c, name: str | None = None) -> "Operator":
        c = high_precision(c)
        return Operator(self.entries * c, name or f"{self.name}*c")

    def dagger(self) -> "Operator":
        ent = np.vectorize(lambda z: z.conjugate(), otypes=[object])(self.entries.T)
        return Operator(ent, f"{self.name}^dag")

    def __repr__(self):
        return f"Operator({self.name}, {self.n_qubits} qubit{'s' if self.n_qubits > 1 else ''})"


def _h():
    r = INV_SQRT2
    return [[r, r], [r, -r]]


I2 = Operator([[1, 0], [0, 1]], "I")
X = Operator([[0, 1], [1, 0]], "X")
Z = Operator([[1, 0], [0, -1]], "Z")
H = Operator(_h(), "H")
M0 = Operator([[1, 0], [0, 0]], "M0")
M1 = Operator([[0, 0], [0, 1]], "M1")
# projector onto |+>
MD = Operator([[0.5, 0.5], [0.5, 0.5]], "Md")
CNOT = Operator([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], "CNOT")
SWAP = Operator([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], "SWAP")
# heralding amplitude of the photonic two-qubit logic (success 1/8)
HERALD = INV_SQRT2 / 2


def u_a(a: float) -> Operator:
    """The real single-qubit unitary [[sqrt a, sqrt(1-a)], [sqrt(1-a), -sqrt a]]."""
    if not 0.0 <= a <= 1.0:
        raise ValueError("a must lie in [0, 1]")
    x, y = math.sqrt(a), math.sqrt(1.0 - a)
    return Operator([[x, y], [y, -x]], f"U_a({a:g})")


# ---------------------------------------------------------------------------
# states

@dataclass(frozen=True, eq=False)
class StateVector:
    """Immutable state.  ``amps`` is complex (numeric) or object (symbolic)."""

    amps: np.ndarray
    success_prob: float = 1.0
    p_value: float | None = None
    n_qubits: int = field(init=False)

    def __post_init__(self):
        a = self.amps
        n = len(a).bit_length() - 1
        if len(a) < 2 or 1 << n != len(a):
            raise DimensionError(f"amplitude vector of length {len(a)} is not 2^n")
        if n > MAX_QUBITS:
            raise CapacityError(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
        object.__setattr__(self, "n_qubits", n)
        a.setflags(write=False)

    @property
    def symbolic(self) -> bool:
        return self.amps.dtype == object

    @property
    def dim(self) -> int:
        return len(self.amps)

    def norm_squared(self) -> float:
        self._need_numeric("norm")
        return float(np.vdot(self.amps, self.amps).real)

    def normalized(self) -> "StateVector":
        self._need_numeric("normalize")
        n = math.sqrt(self.norm_squared())
        if n == 0.0:
            raise PostSelectionError("cannot normalize the zero vector")
        return StateVector(self.amps / n, self.success_prob, self.p_value)

    def relative_amplitudes(self) -> list:
        """h_i = k_i / k_last for i < 2^n - 1; ``inf`` where k_last is 0."""
        last = self.amps[-1]
        if self.symbolic:
            if last.is_zero():
                raise PostSelectionError("last amplitude is zero; relative form undefined")
            inv = last.inv()
            return [k * inv for k in self.amps[:-1]]
        if abs(last) <= 1e-15 * max(1.0, float(np.max(np.abs(self.amps)))):
            return [INFINITY if abs(k) > 0 else complex("nan") for k in self.amps[:-1]]
        return [complex(k / last) for k in self.amps[:-1]]

    def ratio(self):
        """Relative amplitude h = k0/k1 of a single-qubit state."""
        if self.n_qubits != 1:
            raise DimensionError("ratio() needs a single-qubit state")
        return self.relative_amplitudes()[0]

    def evaluate(self, p: float) -> "StateVector":
        """Numeric, normalized version of a symbolic state at p."""
        if not self.symbolic:
            return self
        amps = np.array([k(p) for k in self.amps], dtype=complex)
        n = np.linalg.norm(amps)
        if n == 0.0:
            raise PostSelectionError(f"state vanishes at p={p}")
        return StateVector(amps / n, 1.0, p)

    def _need_numeric(self, what):
        if self.symbolic:
            raise TypeError(f"{what} needs a numeric state")

    def __repr__(self):
        kind = "symbolic" if self.symbolic else "numeric"
        return f"StateVector({kind}, n_qubits={self.n_qubits}, success_prob={self.success_prob:.6g})"


def _sym_array(values) -> np.ndarray:
    out = np.empty(len(values), dtype=object)
    for i, v in enumerate(values):
        out[i] = FieldElement.coerce(v)
    return out


def make_state(amps: Sequence, symbolic: bool = False, p_value=None) -> StateVector:
    """Wrap raw amplitudes.  Numeric input is normalized."""
    if symbolic:
        return StateVector(_sym_array(amps), 1.0, None)
    a = np.asarray(amps, dtype=complex)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise DimensionError("all amplitudes are zero")
    return StateVector(a / n, 1.0, p_value)


def make_quoin(p: float | None = None) -> StateVector:
    """sqrt(p)|0> + sqrt(1-p)|1>; with ``p=None`` the symbolic form (s, 1)."""
    if p is None:
        return StateVector(_sym_array([FieldElement.s(), 1]))
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    return StateVector(np.array([math.sqrt(p), math.sqrt(1.0 - p)], dtype=complex), 1.0, p)


def make_constant_state(alpha, symbolic: bool = False) -> StateVector:
    """State proportional to alpha|0> + |1>; ``alpha=inf`` gives |0>."""
    if alpha is INFINITY or (isinstance(alpha, (int, float)) and math.isinf(alpha)):
        pair = (1, 0)
    else:
        pair = (alpha, 1)
    if symbolic:
        return StateVector(_sym_array(pair))
    v = np.array([complex(high_precision(x)) for x in pair], dtype=complex)
    return StateVector(v / np.linalg.norm(v))


def basis_state(index: int, n_qubits: int, symbolic: bool = False) -> StateVector:
    if symbolic:
        return StateVector(_sym_array([1 if i == index else 0 for i in range(1 << n_qubits)]))
    v = np.zeros(1 << n_qubits, dtype=complex)
    v[index] = 1.0
    return StateVector(v)


def tensor(x: StateVector, y: StateVector) -> StateVector:
    if x.n_qubits + y.n_qubits > MAX_QUBITS:
        raise CapacityError(f"{x.n_qubits + y.n_qubits} qubits exceeds the cap of {MAX_QUBITS}")
    if x.symbolic != y.symbolic:
        raise TypeError("cannot mix symbolic and numeric states")
    if x.symbolic:
        amps = np.empty(x.dim * y.dim, dtype=object)
        for i, a in enumerate(x.amps):
            for j, b in enumerate(y.amps):
                amps[i * y.dim + j] = a * b
        return StateVector(amps)
    p = x.p_value if x.p_value is not None else y.p_value
    return StateVector(np.kron(x.amps, y.amps), x.success_prob * y.success_prob, p)


def tensor_all(states: Sequence[StateVector]) -> StateVector:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def _check_targets(state: StateVector, op: Operator, targets) -> tuple:
    targets = tuple(int(t) for t in np.atleast_1d(targets))
    if len(set(targets)) != len(targets):
        raise DimensionError("target qubits must be distinct")
    if any(t < 0 or t >= state.n_qubits for t in targets):
        raise DimensionError(f"targets {targets} out of range for {state.n_qubits} qubits")
    if len(targets) != op.n_qubits:
        raise DimensionError(f"{op.name} acts on {op.n_qubits} qubits, got {len(targets)} targets")
    return targets


def apply_operator(state: StateVector, op: Operator, targets) -> StateVector:
    """Apply ``op`` to the listed qubits (first target = operator's qubit 0).

    Non-unitary operators leave the numeric state unnormalized; the lost
    weight is accounted for when a branch is post-selected.
    """
    targets = _check_targets(state, op, targets)
    n = state.n_qubits
    rest = [q for q in range(n) if q not in targets]
    order = list(targets) + rest
    if not state.symbolic:
        t = state.amps.reshape((2,) * n).transpose(order).reshape(op.dim, -1)
        t = (op.matrix @ t).reshape((2,) * n)
        out = t.transpose(np.argsort(order)).reshape(-1)
        return StateVector(out, state.success_prob, state.p_value)
    t = state.amps.reshape((2,) * n).transpose(order).reshape(op.dim, -1)
    res = np.empty(t.shape, dtype=object)
    for r in range(op.dim):
        row = op.entries[r]
        nz = [(c, row[c]) for c in range(op.dim) if row[c] != 0]
        for col in range(t.shape[1]):
            acc = FieldElement()
            for c, m in nz:
                v = t[c, col]
                if m == 1:
                    acc = acc + v
                else:
                    acc = acc + v * m
            res[r, col] = acc
    out = res.reshape((2,) * n).transpose(np.argsort(order)).reshape(-1)
    return StateVector(np.ascontiguousarray(out), 1.0, None)


def _branch_indices(n: int, qubit: int, outcome: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return idx[((idx >> (n - 1 - qubit)) & 1) == outcome]


def postselect(state: StateVector, qubit: int, outcome: int):
    """Keep the ``outcome`` branch of ``qubit`` and drop that qubit.

    Returns ``(state, prob)``.  ``prob`` is the branch probability for
    numeric states and ``None`` for symbolic ones.
    """
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise DimensionError(f"qubit {qubit} out of range")
    if n == 1:
        raise DimensionError("cannot post-select the only qubit; use born_probs")
    idx = _branch_indices(n, qubit, outcome)
    sub = state.amps[idx]
    if state.symbolic:
        if all(k.is_zero() for k in sub):
            raise PostSelectionError(f"branch qubit {qubit} = {outcome} is identically zero")
        return StateVector(np.array(sub, dtype=object)), None
    mass = float(np.vdot(sub, sub).real)
    if mass <= BRANCH_TOL:
        raise PostSelectionError(f"branch qubit {qubit} = {outcome} has zero probability")
    return StateVector(sub / math.sqrt(mass), state.success_prob * mass, state.p_value), mass


def _index(label, n: int) -> int:
    if isinstance(label, str):
        if len(label) != n or set(label) - {"0", "1"}:
            raise DimensionError(f"basis label {label!r} does not fit {n} qubits")
        return int(label, 2)
    i = int(label)
    if not 0 <= i < 1 << n:
        raise DimensionError(f"basis index {i} out of range")
    return i


def born_probs(state: StateVector, basis_set=None) -> dict:
    """Born probabilities conditioned on ``basis_set`` (labels or indices)."""
    n = state.n_qubits
    labels = list(range(1 << n)) if basis_set is None else list(basis_set)
    if not labels:
        raise ValueError("basis_set is empty")
    idx = [_index(b, n) for b in labels]
    if state.symbolic:
        raise TypeError("born_probs needs a numeric state; call evaluate(p) first")
    w = np.abs(state.amps[idx]) ** 2
    total = float(w.sum())
    if total <= BRANCH_TOL:
        raise PostSelectionError("conditioning set has zero probability")
    return {b: float(x / total) for b, x in zip(labels, w)}


def conditional_prob(state: StateVector, basis_all, basis_head) -> float:
    """Probability of landing in ``basis_head`` given an outcome in ``basis_all``."""
    probs = born_probs(state, basis_all)
    n = state.n_qubits
    heads = {_index(b, n) for b in basis_head}
    return sum(v for k, v in probs.items() if _index(k, n) in heads)


def sample_measure(state: StateVector, rng: np.random.Generator, shots: int | None = None):
    """Computational-basis outcomes drawn from the Born rule."""
    if state.symbolic:
        raise TypeError("sampling needs a numeric state")
    w = np.abs(state.amps) ** 2
    w = w / w.sum()
    if shots is None:
        return int(rng.choice(len(w), p=w))
    return rng.choice(len(w), size=shots, p=w)


def state_fidelity(x: StateVector, y: StateVector) -> float:
    """|<x|y>|^2 for normalized versions of x and y (global phase ignored)."""
    if x.n_qubits != y.n_qubits:
        raise DimensionError("fidelity needs equal qubit counts")
    a = x.amps if not x.symbolic else x.evaluate(x.p_value).amps
    b = y.amps if not y.symbolic else y.evaluate(y.p_value).amps
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise PostSelectionError("fidelity with the zero vector")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2 / (na * nb) ** 2))


def hadamard_all(n: int, symbolic: bool = False) -> StateVector:
    """H^n |0...0>, the balanced state with every relative amplitude 1."""
    st = basis_state(0, n, symbolic)
    for q in range(n):
        st = apply_operator(st, H, [q])
    return st


__all__ = [
    "Operator",
    "StateVector",
    "I2",
    "X",
    "Z",
    "H",
    "M0",
    "M1",
    "MD",
    "CNOT",
    "SWAP",
    "HERALD",
    "INFINITY",
    "u_a",
    "make_state",
    "make_quoin",
    "make_constant_state",
    "basis_state",
    "tensor",
    "tensor_all",
    "apply_operator",
    "postselect",
    "born_probs",
    "conditional_prob",
    "sample_measure",
    "state_fidelity",
    "hadamard_all",
]
