"""Basic operations on relative amplitudes and the circuits built from them.

Single-qubit states are read in homogeneous form ``k0|0> + k1|1>`` with
relative amplitude ``h = k0/k1``.  ``h = 0`` is ``|1>`` and ``h = inf`` is
``|0>``, so neither needs special treatment in the circuits.

Every numeric operation accepts ``rng``.  With ``rng=None`` the heralded
branch is taken unconditionally, which is useful for checking amplitudes;
with a generator, success is drawn with the branch probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    AttemptCapExceeded,
    CapacityError,
    DegenerateInputError,
    DimensionError,
    FieldDomainError,
    PostSelectionError,
    SynthesisError,
)
from .expr import Binary, Num, Sym, Unary, evaluate, has_symbols, parse_expression, to_field, to_string
from .field import INV_SQRT2, SQRT2, FieldElement, Poly, RationalFn, high_precision
from .ledger import ConsumptionLedger
from .state import (
    CNOT,
    H,
    HERALD,
    I2,
    M0,
    M1,
    MAX_QUBITS,
    MD,
    X,
    StateVector,
    apply_operator,
    hadamard_all,
    make_constant_state,
    make_quoin,
    postselect,
    tensor,
)

DEFAULT_ATTEMPT_CAP = 10**6

# herald * (M0 (x) I + M1 (x) X); post-select qubit 1
MULTIPLY_OP = (M0.kron(I2) + M1.kron(X)).scaled(HERALD, "multiply")
# herald * (H (x) I)(M0 (x) I + M1 (x) M0.X); post-select qubit 0
ADD_OP = (H.kron(I2) @ (M0.kron(I2) + M1.kron(M0 @ X))).scaled(HERALD, "add")
# the example-coin circuit merges two adds and a multiply into one gate
EXAMPLE_COIN_OP = ((X @ H).kron(I2) @ (M0.kron(I2) + M1.kron(X))).scaled(HERALD, "example_coin")
P_STATE_OP = ((H @ M0).kron(H @ M0) + (M1 @ MD @ M1).kron(X)).scaled(HERALD, "p_state")


class BasicResult(NamedTuple):
    state: StateVector | None
    success: bool
    prob: float | None


@dataclass
class CircuitPlan:
    steps: list = field(default_factory=list)
    quoins_per_attempt: int = 0
    description: str = ""

    def add(self, **step) -> int:
        step = {"id": len(self.steps), **step}
        self.steps.append(step)
        if step["op"] == "quoin":
            self.quoins_per_attempt += 1
        return step["id"]

    def count(self, op: str) -> int:
        return sum(1 for s in self.steps if s["op"] == op)

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "quoins_per_attempt": self.quoins_per_attempt,
            "steps": self.steps,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _single(state: StateVector, what: str):
    if state.n_qubits != 1:
        raise DimensionError(f"{what} expects a single-qubit state")


def _is_zero_amp(v) -> bool:
    return v.is_zero() if isinstance(v, FieldElement) else abs(v) == 0.0


def _herald(post: StateVector, prob, rng) -> BasicResult:
    if prob is None or rng is None:
        return BasicResult(post, True, prob)
    if rng.random() < prob:
        return BasicResult(post, True, prob)
    return BasicResult(None, False, prob)


def _run(state, op, targets, qubit, outcome, rng, degenerate_msg):
    st = apply_operator(state, op, targets)
    try:
        post, prob = postselect(st, qubit, outcome)
    except PostSelectionError as exc:
        raise DegenerateInputError(degenerate_msg) from exc
    return _herald(post, prob, rng)


def multiply_states(x: StateVector, y: StateVector, mode="multiply", rng=None) -> BasicResult:
    """|h1>,|h2> -> |h1*h2> (or |h1/h2> in divide mode)."""
    _single(x, "multiply_states")
    _single(y, "multiply_states")
    if mode not in ("multiply", "divide"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "divide" and _is_zero_amp(y.amps[0]):
        raise DegenerateInputError("division by a state with relative amplitude 0")
    outcome = 0 if mode == "multiply" else 1
    return _run(tensor(x, y), MULTIPLY_OP, [0, 1], 1, outcome, rng, "product of 0 and infinity is undefined")


def invert_state(x: StateVector) -> StateVector:
    """|h> -> |1/h> with a Pauli X; deterministic."""
    _single(x, "invert_state")
    return apply_operator(x, X, [0])


def add_states(x: StateVector, y: StateVector, mode="add", rng=None) -> BasicResult:
    """|h1>,|h2> -> |h1+h2> (or |h2-h1> in subtract mode).

    The circuit consumes |1/h1>; the X that prepares it from |h1> is applied
    here, so callers pass |h1> directly.
    """
    _single(x, "add_states")
    _single(y, "add_states")
    if mode not in ("add", "subtract"):
        raise ValueError(f"unknown mode {mode!r}")
    outcome = 0 if mode == "add" else 1
    st = tensor(invert_state(x), y)
    return _run(st, ADD_OP, [0, 1], 0, outcome, rng, "both inputs are infinite")


# ---------------------------------------------------------------------------
# basic operations on n-qubit states (auxiliary qubit prepended as qubit 0)

def _two_level(amps, i, j, m):
    """Apply the 2x2 matrix ``m`` to basis vectors i and j in place."""
    a, b = amps[i], amps[j]
    amps[i] = _lin(m[0][0], a, m[0][1], b)
    amps[j] = _lin(m[1][0], a, m[1][1], b)


def _lin(c1, a, c2, b):
    out = 0
    for c, v in ((c1, a), (c2, b)):
        if c == 0:
            continue
        term = v if c == 1 else v * c
        out = term if isinstance(out, int) else out + term
    if isinstance(out, int):
        return FieldElement() if isinstance(a, FieldElement) else 0j
    return out


_SWAP2 = ((0, 1), (1, 0))
_B2 = ((INV_SQRT2, -INV_SQRT2), (INV_SQRT2, INV_SQRT2))
_B2_FLOAT = ((float(INV_SQRT2), -float(INV_SQRT2)), (float(INV_SQRT2), float(INV_SQRT2)))


def apply_basic_general(kind: str, state: StateVector, aux: StateVector | None, target_basis: int, rng=None) -> BasicResult:
    """Replace the relative amplitude h_k of an n-qubit state.

    ``inverse``: h_k -> 1/h_k using aux |h_k> (built from the state if None).
    ``multiply``: h_k -> h_k * l for aux |l>.
    ``add``: h_k -> h_k + l for aux |l>, followed by a multiply with the
    constant state |sqrt 2> to undo the 1/sqrt 2 of the two-level Hadamard.
    """
    n = state.n_qubits
    if n + 1 > MAX_QUBITS:
        raise CapacityError("no room for the auxiliary qubit")
    N = 1 << n
    k = int(target_basis)
    if not 0 <= k <= N - 2:
        raise DimensionError(f"target basis {k} outside [0, {N - 2}]")
    if kind == "inverse":
        if _is_zero_amp(state.amps[k]):
            raise DegenerateInputError("cannot invert a zero relative amplitude")
        if aux is None:
            if state.symbolic:
                hk = state.amps[k] / state.amps[-1]
            else:
                hk = state.amps[k] / state.amps[-1] if state.amps[-1] != 0 else math.inf
            aux = make_constant_state(hk, symbolic=state.symbolic)
    elif kind not in ("multiply", "add"):
        raise ValueError(f"unknown basic operation {kind!r}")
    if aux is None:
        raise ValueError(f"{kind} needs an auxiliary state")
    _single(aux, "auxiliary state")
    joint = tensor(aux, state)
    amps = np.array(joint.amps, dtype=joint.amps.dtype)
    if kind == "inverse":
        _two_level(amps, k, N + N - 1, _SWAP2)
        outcome = 0
    elif kind == "multiply":
        _two_level(amps, k, N + k, _SWAP2)
        outcome = 1
    else:
        _two_level(amps, N - 1, N + k, _B2 if state.symbolic else _B2_FLOAT)
        outcome = 1
    moved = StateVector(amps, joint.success_prob, joint.p_value)
    try:
        post, prob = postselect(moved, 0, outcome)
    except PostSelectionError as exc:
        raise DegenerateInputError(f"{kind} branch vanished") from exc
    res = _herald(post, prob, rng)
    if kind != "add" or not res.success:
        return res
    root2 = make_constant_state(SQRT2, symbolic=state.symbolic)
    res2 = apply_basic_general("multiply", res.state, root2, k, rng)
    prob2 = None if prob is None else prob * res2.prob
    return BasicResult(res2.state, res2.success, prob2)


# ---------------------------------------------------------------------------
# single-qubit synthesis from expression trees

def _expand_p(node):
    """Rewrite p as s*s/(s*s+1) so every leaf is a quoin or a constant."""
    if isinstance(node, Sym) and node.name == "p":
        ss = Binary("*", Sym("s"), Sym("s"))
        return Binary("/", ss, Binary("+", Binary("*", Sym("s"), Sym("s")), Num(1.0)))
    if isinstance(node, Unary):
        return Unary(node.op, _expand_p(node.operand))
    if isinstance(node, Binary):
        return Binary(node.op, _expand_p(node.left), _expand_p(node.right))
    return node


def _complex_num(c: complex):
    """Expression tree for a complex constant."""
    re, im = float(c.real), float(c.imag)

    def real_lit(v):
        return Num(abs(v)) if v >= 0 else Unary("-", Num(abs(v)))

    if im == 0.0:
        return real_lit(re)
    imag = Num(abs(im), True) if im > 0 else Unary("-", Num(abs(im), True))
    if re == 0.0:
        return imag
    return Binary("+", real_lit(re), imag)


def _poly_expr(poly: Poly):
    coeffs = [complex(c) for c in poly.coeffs]
    if not coeffs:
        return Num(0.0)
    node = _complex_num(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        node = Binary("*", node, Sym("p"))
        if c != 0:
            node = Binary("+", node, _complex_num(c))
    return node


def _rational_expr(r: RationalFn):
    num = _poly_expr(r.num)
    if r.den.degree == 0 and complex(r.den.coeffs[0]) == 1:
        return num
    return Binary("/", num, _poly_expr(r.den))


def field_to_expr(x: FieldElement):
    """Expression tree a(p) + b(p)*s for an element of M."""
    parts = []
    if not x.a.is_zero():
        parts.append(_rational_expr(x.a))
    if not x.b.is_zero():
        parts.append(Binary("*", _rational_expr(x.b), Sym("s")))
    if not parts:
        return Num(0.0)
    return parts[0] if len(parts) == 1 else Binary("+", parts[0], parts[1])


def _as_tree(expr):
    if isinstance(expr, str):
        return parse_expression(expr)
    if isinstance(expr, FieldElement):
        return field_to_expr(expr)
    if isinstance(expr, (int, float, complex)):
        return _complex_num(complex(expr))
    if isinstance(expr, (Num, Sym, Unary, Binary)):
        return expr
    raise TypeError(f"cannot synthesize from {type(expr).__name__}")


def compile_plan(expr) -> tuple[CircuitPlan, object]:
    """Compile an expression to a plan of basic operations.

    Returns the plan and the (p-expanded) tree it realizes.  Constant
    subtrees are folded into a single constant-state injection.
    """
    tree = _as_tree(expr)
    try:
        to_field(tree)
    except (FieldDomainError, ZeroDivisionError) as exc:
        raise SynthesisError(f"expression divides by the zero element: {exc}") from exc
    tree = _expand_p(tree)
    plan = CircuitPlan(description=to_string(tree))

    def emit(node) -> int:
        if not has_symbols(node):
            try:
                c = evaluate(node, 0.5)
            except ZeroDivisionError as exc:
                raise SynthesisError("constant subexpression divides by zero") from exc
            return plan.add(op="constant", value=[c.real, c.imag])
        if isinstance(node, Sym):
            return plan.add(op="quoin")
        if isinstance(node, Unary):
            child = emit(node.operand)
            neg = plan.add(op="constant", value=[-1.0, 0.0])
            return plan.add(op="multiply", inputs=[child, neg])
        left = emit(node.left)
        right = emit(node.right)
        if node.op == "+":
            return plan.add(op="add", inputs=[left, right])
        if node.op == "-":
            # subtract mode returns h_y - h_x
            return plan.add(op="subtract", inputs=[right, left])
        if node.op == "*":
            return plan.add(op="multiply", inputs=[left, right])
        inv = plan.add(op="invert", inputs=[right])
        return plan.add(op="multiply", inputs=[left, inv])

    emit(tree)
    return plan, tree


@dataclass
class SynthesisResult:
    plan: CircuitPlan
    state: StateVector
    success_prob: float | None
    expected_quoins: float | None
    quoins_used: int | None
    attempts: int | None


def execute_plan(plan: CircuitPlan, p: float | None = None, rng=None, max_attempts=DEFAULT_ATTEMPT_CAP) -> SynthesisResult:
    """Run a plan symbolically (p=None), forced (rng=None) or by sampling."""
    steps = plan.steps
    symbolic = p is None

    def leaf(step):
        if step["op"] == "quoin":
            return make_quoin(p)
        re, im = step["value"]
        return make_constant_state(complex(re, im), symbolic=symbolic)

    def apply(step, states):
        op = step["op"]
        if op == "add":
            return add_states(states[0], states[1], "add", rng)
        if op == "subtract":
            return add_states(states[0], states[1], "subtract", rng)
        if op == "multiply":
            return multiply_states(states[0], states[1], "multiply", rng)
        if op == "invert":
            return BasicResult(invert_state(states[0]), True, 1.0)
        raise SynthesisError(f"unknown plan step {op!r}")

    if symbolic or rng is None:
        out, prob, cost = {}, {}, {}
        for step in steps:
            i = step["id"]
            if step["op"] in ("quoin", "constant"):
                out[i] = leaf(step)
                prob[i] = 1.0
                cost[i] = 1.0 if step["op"] == "quoin" else 0.0
                continue
            ins = step["inputs"]
            res = apply(step, [out[j] for j in ins])
            out[i] = res.state
            pr = 1.0 if res.prob is None else res.prob
            prob[i] = pr * math.prod(prob[j] for j in ins)
            cost[i] = sum(cost[j] for j in ins) / pr if pr > 0 else math.inf
        last = steps[-1]["id"]
        if symbolic:
            return SynthesisResult(plan, out[last], None, None, None, None)
        return SynthesisResult(plan, out[last], prob[last], cost[last], None, None)

    counters = {"quoins": 0, "attempts": 0}
    by_id = {s["id"]: s for s in steps}

    def produce(i):
        step = by_id[i]
        if step["op"] in ("quoin", "constant"):
            counters["quoins"] += step["op"] == "quoin"
            return leaf(step)
        tries = 0
        while True:
            tries += 1
            counters["attempts"] += 1
            if tries > max_attempts:
                raise AttemptCapExceeded(f"step {i} failed {max_attempts} times")
            res = apply(step, [produce(j) for j in step["inputs"]])
            if res.success:
                return res.state

    final = produce(steps[-1]["id"])
    return SynthesisResult(plan, final, None, None, counters["quoins"], counters["attempts"])


def synthesize_single(expr, p: float | None = None, rng=None, max_attempts=DEFAULT_ATTEMPT_CAP) -> SynthesisResult:
    """Build |h> for an expression h over constants, p and s."""
    plan, _ = compile_plan(expr)
    return execute_plan(plan, p, rng, max_attempts)


def synthesize_multi(targets, p: float | None = None, rng=None, max_attempts=DEFAULT_ATTEMPT_CAP):
    """n-qubit state with relative amplitudes ``targets`` (length 2^n - 1).

    Starts from the balanced state H^n|0> and multiplies each target into
    its basis amplitude with a synthesized auxiliary qubit.
    """
    m = len(targets)
    n = (m + 1).bit_length() - 1
    if m < 1 or (1 << n) - 1 != m:
        raise DimensionError(f"{m} targets is not 2^n - 1")
    if n + 1 > MAX_QUBITS:
        raise CapacityError(f"{n} qubits plus an auxiliary exceeds the cap")
    plan = CircuitPlan(description=f"balanced {n}-qubit state with {m} basis multiplies")
    plan.add(op="balanced", qubits=n)
    state = hadamard_all(n, symbolic=p is None)
    total_prob = 1.0
    quoins = 0
    for i, t in enumerate(targets):
        sub_plan, _ = compile_plan(t)
        plan.add(op="multiply_basis", basis=i, aux=sub_plan.to_dict())
        plan.quoins_per_attempt += sub_plan.quoins_per_attempt
        tries = 0
        while True:
            tries += 1
            if tries > max_attempts:
                raise AttemptCapExceeded(f"basis {i} failed {max_attempts} times")
            aux = execute_plan(sub_plan, p, rng, max_attempts)
            quoins += aux.quoins_used or 0
            res = apply_basic_general("multiply", state, aux.state, i, rng)
            if res.success:
                break
        state = res.state
        if res.prob is not None and aux.success_prob is not None:
            total_prob *= res.prob * aux.success_prob
    return plan, state, (None if p is None else total_prob)


# ---------------------------------------------------------------------------
# canned circuits

EXAMPLE_COIN_PLAN = CircuitPlan(
    steps=[
        {"id": 0, "op": "quoin"},
        {"id": 1, "op": "quoin"},
        {"id": 2, "op": "gate", "name": "C-X", "targets": [0, 1]},
        {"id": 3, "op": "gate", "name": "X.H", "targets": [0]},
        {"id": 4, "op": "herald", "amplitude": float(HERALD)},
        {"id": 5, "op": "postselect", "qubit": 1, "outcome": 0},
    ],
    quoins_per_attempt=2,
    description="((X.H) (x) I)(M0 (x) I + M1 (x) X) on two quoins, keep qubit 1 = 0; output h = 2p-1",
)


def example_coin_circuit(p: float | None = None):
    """Forced run of the example coin; returns (state, success probability)."""
    st = apply_operator(tensor(make_quoin(p), make_quoin(p)), EXAMPLE_COIN_OP, [0, 1])
    return postselect(st, 1, 0)


def example_coin_success_prob(p: float) -> float:
    return ((2 * p - 1) ** 2 + 1) / 16


def _attempt_ledger(prob, quoins_each, rng, loss_survival, max_attempts):
    ledger = ConsumptionLedger(loss_survival=loss_survival)
    if rng is None:
        ledger.record(quoins=quoins_each, outputs=1, attempts=1)
        return ledger, 1
    q = prob * loss_survival
    if q <= 0.0:
        raise AttemptCapExceeded("success probability is zero")
    attempts = int(rng.geometric(q))
    if attempts > max_attempts:
        raise AttemptCapExceeded(f"needed {attempts} attempts, cap is {max_attempts}")
    ledger.record(quoins=quoins_each * attempts, outputs=1, attempts=attempts)
    return ledger, attempts


def build_example_coin(p: float, rng=None, loss_survival=1.0, max_attempts=DEFAULT_ATTEMPT_CAP):
    """|f_q(p)> = (2p-1)|0> + |1> up to normalization, with its cost.

    Returns ``(state, attempts, ledger)``; without ``rng`` the first attempt
    is taken as successful.
    """
    state, prob = example_coin_circuit(p)
    ledger, attempts = _attempt_ledger(prob, 2, rng, loss_survival, max_attempts)
    return state, attempts, ledger


def psi2_state(p: float | None = None) -> StateVector:
    """CNOT then H on the first qubit of two quoins (unnormalized in symbolic mode)."""
    st = apply_operator(tensor(make_quoin(p), make_quoin(p)), CNOT, [0, 1])
    return apply_operator(st, H, [0])


def g_state_circuit(p: float | None = None):
    st = apply_operator(psi2_state(p), CNOT, [0, 1])
    return postselect(st, 1, 1)


def build_g_state(p: float, rng=None, loss_survival=1.0, max_attempts=DEFAULT_ATTEMPT_CAP):
    """sqrt(4p(1-p))|0> + (2p-1)|1>; post-selection succeeds with probability 1/2."""
    state, prob = g_state_circuit(p)
    ledger, _ = _attempt_ledger(prob, 2, rng, loss_survival, max_attempts)
    return state, ledger


def p_state_circuit(p: float | None = None):
    st = apply_operator(tensor(make_quoin(p), make_quoin(p)), P_STATE_OP, [0, 1])
    return postselect(st, 1, 0)


def build_p_state(p: float, rng=None, loss_survival=1.0, max_attempts=DEFAULT_ATTEMPT_CAP):
    """p|0> + |1> from two quoins via the half-amplitude projector trick."""
    state, prob = p_state_circuit(p)
    ledger, _ = _attempt_ledger(prob, 2, rng, loss_survival, max_attempts)
    return state, ledger


def sample_attempts(state: StateVector, prob: float, rng, size: int, loss_survival=1.0) -> np.ndarray:
    """Outcomes of ``size`` independent attempts of a heralded circuit.

    Each entry is -1 when the herald or the loss check fails, otherwise the
    computational-basis outcome of measuring the output state.
    """
    w = np.abs(state.amps) ** 2
    w = w / w.sum()
    ok = rng.random(size) < prob * loss_survival
    out = np.full(size, -1, dtype=np.int64)
    k = int(ok.sum())
    if k:
        out[ok] = rng.choice(len(w), size=k, p=w)
    return out


__all__ = [
    "BasicResult",
    "CircuitPlan",
    "SynthesisResult",
    "MULTIPLY_OP",
    "ADD_OP",
    "EXAMPLE_COIN_OP",
    "P_STATE_OP",
    "EXAMPLE_COIN_PLAN",
    "multiply_states",
    "add_states",
    "invert_state",
    "apply_basic_general",
    "compile_plan",
    "execute_plan",
    "field_to_expr",
    "synthesize_single",
    "synthesize_multi",
    "example_coin_circuit",
    "example_coin_success_prob",
    "build_example_coin",
    "psi2_state",
    "g_state_circuit",
    "build_g_state",
    "p_state_circuit",
    "build_p_state",
    "sample_attempts",
]
