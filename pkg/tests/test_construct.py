import json
import math

import numpy as np
import pytest

from qbfactory.coin import success_prob_surface
from qbfactory.construct import (
    add_states,
    apply_basic_general,
    build_example_coin,
    build_g_state,
    build_p_state,
    compile_plan,
    example_coin_circuit,
    example_coin_success_prob,
    execute_plan,
    field_to_expr,
    invert_state,
    multiply_states,
    sample_attempts,
    synthesize_multi,
    synthesize_single,
)
from qbfactory.errors import DegenerateInputError, DimensionError, SynthesisError
from qbfactory.expr import to_field
from qbfactory.field import field_eval
from qbfactory.state import born_probs, make_constant_state, make_quoin, make_state

C = make_constant_state


@pytest.mark.parametrize("h1, h2", [(1, 1), (0, 5), (1j, 1j), (0.3, -2.0), (math.inf, 0.5)])
def test_multiply_ratio_and_probability(h1, h2):
    r = multiply_states(C(h1), C(h2))
    want = h1 * h2 if math.isfinite(abs(h1)) else math.inf
    if want == math.inf:
        assert r.state.ratio() == math.inf
    else:
        assert r.state.ratio() == pytest.approx(want)
    assert r.prob == pytest.approx(success_prob_surface("multiply", h1, h2))


def test_divide_mode():
    r = multiply_states(C(3.0), C(4.0), "divide")
    assert r.state.ratio() == pytest.approx(0.75)
    with pytest.raises(DegenerateInputError):
        multiply_states(C(3.0), C(0.0), "divide")


def test_zero_times_infinity():
    with pytest.raises(DegenerateInputError):
        multiply_states(C(0.0), C(math.inf))


@pytest.mark.parametrize("h1, h2", [(-1, 1), (1, 1), (1j, 1j), (0.5, 2.0), (2 - 1j, 0.25)])
def test_add_ratio_and_probability(h1, h2):
    r = add_states(C(h1), C(h2))
    assert r.state.ratio() == pytest.approx(h1 + h2, abs=1e-12)
    assert r.prob == pytest.approx(success_prob_surface("add", h1, h2))


def test_subtract_is_second_minus_first():
    assert add_states(C(0.5), C(2.0), "subtract").state.ratio() == pytest.approx(1.5)


def test_invert():
    assert invert_state(C(4.0)).ratio() == pytest.approx(0.25)
    assert invert_state(C(0.0)).ratio() == math.inf


def test_surface_maxima():
    assert success_prob_surface("multiply", 0, 0) == pytest.approx(1 / 8, abs=1e-12)
    h = math.sqrt(0.5)
    assert success_prob_surface("add", h, h) == pytest.approx(1 / 12, abs=1e-12)


def test_general_add_multiply_inverse():
    st = make_state([2, 1, 1, 1])
    assert apply_basic_general("add", st, C(3), 0).state.relative_amplitudes() == pytest.approx([5, 1, 1])
    assert apply_basic_general("multiply", st, C(-2), 1).state.relative_amplitudes() == pytest.approx([2, -2, 1])
    assert apply_basic_general("inverse", st, None, 0).state.relative_amplitudes() == pytest.approx([0.5, 1, 1])
    with pytest.raises(DimensionError):
        apply_basic_general("multiply", st, C(2), 3)


def test_general_symbolic_matches_numeric():
    sym = make_state([2, 1, 1, 1], symbolic=True)
    res = apply_basic_general("add", sym, make_quoin(), 2)
    for p in (0.2, 0.6):
        got = [complex(field_eval(h, p)) for h in res.state.relative_amplitudes()]
        assert got == pytest.approx([2, 1, 1 + math.sqrt(p / (1 - p))])


def test_inverse_of_quoin():
    assert apply_basic_general("inverse", make_quoin(0.2), None, 0).state.ratio() == pytest.approx(2.0)


def test_plan_structure_and_json():
    plan, _ = compile_plan("(s*s-1)/(s*s+1)")
    assert plan.quoins_per_attempt == 4
    counts = {op: plan.count(op) for op in ("constant", "multiply", "add", "subtract", "invert")}
    assert counts == {"constant": 2, "multiply": 3, "add": 1, "subtract": 1, "invert": 1}
    doc = json.loads(plan.to_json())
    assert doc["quoins_per_attempt"] == 4
    assert all("op" in s for s in doc["steps"])


def test_forced_synthesis_value_and_cost():
    r = synthesize_single("(s*s-1)/(s*s+1)", 0.3)
    assert r.state.ratio() == pytest.approx(-0.4)
    assert r.expected_quoins == pytest.approx(15421, rel=1e-3)


def test_symbolic_synthesis():
    r = synthesize_single("p")
    assert field_eval(r.state.ratio(), 0.3) == pytest.approx(0.3)
    assert r.success_prob is None


def test_monte_carlo_synthesis(rng):
    r = synthesize_single("s*s", 0.4, rng)
    assert r.state.ratio() == pytest.approx(0.4 / 0.6)
    assert r.quoins_used >= 2 and r.attempts >= 1


def test_zero_divisor_rejected():
    with pytest.raises(SynthesisError):
        compile_plan("1/(s*s-p/(1-p))")


def test_field_to_expr_round_trip():
    x = to_field("(2*p-1)/(p+3) + 2i*s")
    back = to_field(field_to_expr(x))
    assert (back - x).is_zero()


def test_multi_qubit_synthesis():
    plan, st, prob = synthesize_multi(["p", "2", "s"], 0.3)
    assert st.n_qubits == 2
    assert st.relative_amplitudes() == pytest.approx([0.3, 2, math.sqrt(0.3 / 0.7)])
    assert 0 < prob < 1
    with pytest.raises(DimensionError):
        synthesize_multi(["p", "s"], 0.3)


def test_example_coin():
    st, prob = example_coin_circuit(0.5)
    assert prob == pytest.approx(1 / 16)
    assert example_coin_success_prob(0.5) == pytest.approx(1 / 16)
    sym, _ = example_coin_circuit(None)
    assert (sym.ratio() - to_field("2*p-1")).is_zero()
    state, attempts, ledger = build_example_coin(0.3, np.random.default_rng(1), loss_survival=0.6)
    assert ledger.quoins_consumed == 2 * attempts
    assert state.ratio() == pytest.approx(-0.4)


def test_g_and_p_states():
    g, _ = build_g_state(0.3)
    assert born_probs(g)[0] == pytest.approx(0.84)
    ps, _ = build_p_state(0.5)
    assert ps.ratio() == pytest.approx(0.5)


def test_sample_attempts_marks_failures(rng):
    st, prob = example_coin_circuit(0.5)
    out = sample_attempts(st, prob, rng, 50_000)
    rate = (out >= 0).mean()
    assert abs(rate - 1 / 16) < 4 * math.sqrt((1 / 16) * (15 / 16) / 50_000)
    assert np.all(out[out >= 0] == 1)


def test_execute_plan_requires_known_ops():
    plan, _ = compile_plan("s+1")
    plan.steps[-1]["op"] = "teleport"
    with pytest.raises(SynthesisError):
        execute_plan(plan, 0.3)
