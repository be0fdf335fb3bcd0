import math

import numpy as np
import pytest

from qbfactory.errors import CapacityError, DimensionError, PostSelectionError
from qbfactory.field import FieldElement
from qbfactory.state import (
    CNOT,
    H,
    HERALD,
    SWAP,
    X,
    Operator,
    apply_operator,
    basis_state,
    born_probs,
    conditional_prob,
    hadamard_all,
    make_constant_state,
    make_quoin,
    make_state,
    postselect,
    sample_measure,
    state_fidelity,
    tensor,
    tensor_all,
    u_a,
)


def test_quoin_amplitudes():
    q = make_quoin(0.3)
    assert np.allclose(q.amps, [math.sqrt(0.3), math.sqrt(0.7)])
    assert q.ratio() == pytest.approx(math.sqrt(0.3 / 0.7))
    with pytest.raises(ValueError):
        make_quoin(1.2)


def test_symbolic_quoin_is_s():
    q = make_quoin()
    assert q.symbolic
    assert q.ratio() == FieldElement.s()


def test_constant_state_infinity_is_zero_ket():
    st = make_constant_state(math.inf)
    assert np.allclose(st.amps, [1, 0])
    assert st.ratio() == math.inf


def test_gates_are_unitary():
    for g in (X, H, CNOT, SWAP, u_a(0.3)):
        m = g.matrix
        assert np.allclose(m.conj().T @ m, np.eye(len(m)))
        assert g.unitary
    assert float(HERALD) == pytest.approx(1 / (2 * math.sqrt(2)))


def test_qubit_zero_is_most_significant():
    st = apply_operator(basis_state(0, 2), X, [0])
    assert np.argmax(np.abs(st.amps)) == 2


def test_cnot_on_reversed_targets():
    st = apply_operator(basis_state(1, 2), CNOT, [1, 0])  # control qubit 1
    assert np.argmax(np.abs(st.amps)) == 3


def test_postselect_drops_qubit_and_reports_mass():
    st = tensor(make_quoin(0.2), make_quoin(0.5))
    post, prob = postselect(st, 0, 1)
    assert post.n_qubits == 1
    assert prob == pytest.approx(0.8)
    assert np.allclose(post.amps, make_quoin(0.5).amps)


def test_postselect_zero_branch():
    with pytest.raises(PostSelectionError):
        postselect(basis_state(0, 2), 0, 1)


def test_born_probs_and_conditional():
    st = make_state([1, 1, 1, 1])
    assert born_probs(st) == {i: pytest.approx(0.25) for i in range(4)}
    assert conditional_prob(st, ["01", "10"], ["01"]) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        born_probs(st, ["011"])


def test_sampling_frequencies(rng):
    st = make_quoin(0.3)
    out = sample_measure(st, rng, 100_000)
    assert abs((out == 0).mean() - 0.3) < 4 * math.sqrt(0.3 * 0.7 / 100_000)


def test_symbolic_and_numeric_agree():
    op = CNOT @ H.kron(u_a(0.4))
    sym = apply_operator(tensor(make_quoin(), make_quoin()), op, [0, 1])
    for p in (0.15, 0.5, 0.85):
        num = apply_operator(tensor(make_quoin(p), make_quoin(p)), op, [0, 1])
        assert state_fidelity(sym.evaluate(p), num) == pytest.approx(1.0, abs=1e-12)


def test_operator_composition_order():
    # (A @ B) applies B first
    st = apply_operator(basis_state(0, 1), H @ X, [0])
    assert np.allclose(st.amps, [1 / math.sqrt(2), -1 / math.sqrt(2)])


def test_dimension_checks():
    with pytest.raises(DimensionError):
        make_state([1, 0, 0])
    with pytest.raises(DimensionError):
        apply_operator(make_quoin(0.5), CNOT, [0])
    with pytest.raises(CapacityError):
        tensor_all([make_quoin(0.5)] * 13)


def test_hadamard_all_is_balanced():
    st = hadamard_all(3)
    assert np.allclose(st.relative_amplitudes(), [1] * 7)


def test_operator_dagger_and_kron():
    op = Operator([[1, 2j], [0, 1]], "T")
    assert np.allclose(op.dagger().matrix, op.matrix.conj().T)
    assert op.kron(X).n_qubits == 2
