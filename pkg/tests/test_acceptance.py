"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import contextlib
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.optimize import minimize

from conftest import random_element
from qbfactory.classical import (
    classical_fct_cost,
    doubling_cost_estimate,
    g_protocol1,
    g_protocol2,
    g_protocol3,
    quantum_cost_report,
)
from qbfactory.coin import (
    cbf_check,
    constant_coin,
    extend_common_zeros,
    f_a_coin,
    f_c_coin,
    f_wedge_coin,
    spb_check,
    success_prob_surface,
    common_zero_example_coin,
)
from qbfactory.construct import (
    add_states,
    apply_basic_general,
    build_example_coin,
    compile_plan,
    example_coin_circuit,
    execute_plan,
    multiply_states,
    synthesize_multi,
)
from qbfactory.errors import SynthesisError
from qbfactory.expr import Binary, Num, Sym, Unary, evaluate
from qbfactory.fidelity import fidelity_report, measured_table
from qbfactory.field import field_eval
from qbfactory.state import CNOT, H, apply_operator, make_constant_state, make_quoin, make_state, tensor, u_a
from qbfactory.sweep import RunConfig, run_sweep

FC_TABLE = [0.500, 0.390, 0.265, 0.138, 0.038, 0.000, 0.038, 0.138, 0.265, 0.390, 0.500]


@contextlib.contextmanager
def criterion(capsys, number, title):
    """Print one PASS/FAIL line for the criterion, whatever happens inside."""
    notes = []
    try:
        yield notes
    except BaseException as exc:
        with capsys.disabled():
            print(f"\nFAIL criterion {number} ({title}): {type(exc).__name__}: {exc}")
        raise
    with capsys.disabled():
        print(f"\nPASS criterion {number} ({title})" + (": " + "; ".join(notes) if notes else ""))


def within(est, mean, sd, k=4.0):
    return abs(est - mean) <= k * sd


def test_criterion_1_fc_curve(capsys):
    with criterion(capsys, 1, "f_c curve") as notes:
        t0 = time.perf_counter()
        rows = run_sweep(RunConfig(subcommand="coin", p_step=0.1, shots=100_000, seed=2024), "fc")
        elapsed = time.perf_counter() - t0
        assert len(rows) == 11
        for row, want in zip(rows, FC_TABLE):
            p = row["p"]
            f = (2 * p - 1) ** 2 / (1 + (2 * p - 1) ** 2)
            sd = math.sqrt(f * (1 - f) / 100_000)
            assert within(row["estimate"], f, sd), (p, row["estimate"], f)
            assert round(row["theoretical"], 3) == pytest.approx(want), (p, row["theoretical"])
        assert elapsed < 30.0, elapsed
        notes.append(f"11 points, runtime {elapsed:.2f}s")


def test_criterion_2_success_probabilities(capsys):
    with criterion(capsys, 2, "success probabilities") as notes:
        rng = np.random.default_rng(7)
        n_out = 20_000
        attempts = sum(build_example_coin(0.5, rng)[1] for _ in range(n_out))
        rate = n_out / attempts
        sd = math.sqrt((1 / 16) * (15 / 16) / attempts)
        assert within(rate, 1 / 16, sd), rate
        notes.append(f"example coin success {rate:.5f} over {attempts} attempts")

        values = [-1.5, -0.5j, 0.0, 0.7, 2.0]
        trials = 3000
        worst = 0.0
        for kind, fn in (("multiply", multiply_states), ("add", add_states)):
            for h1 in values:
                for h2 in values:
                    x, y = make_constant_state(h1), make_constant_state(h2)
                    wins = sum(fn(x, y, rng=rng).success for _ in range(trials))
                    pr = success_prob_surface(kind, h1, h2)
                    z = abs(wins / trials - pr) / math.sqrt(pr * (1 - pr) / trials)
                    worst = max(worst, z)
                    assert z <= 4.0, (kind, h1, h2, wins / trials, pr)
        notes.append(f"5x5 grids within {worst:.2f} sigma")

        def neg(kind):
            return lambda v: -success_prob_surface(kind, complex(v[0], v[1]), complex(v[2], v[3]))

        best = {}
        for kind in ("multiply", "add"):
            starts = [np.array(s) for s in ([0.1, 0, 0.1, 0], [0.6, 0.1, 0.8, -0.1], [-0.4, 0.3, -0.5, 0.2])]
            vals = [-minimize(neg(kind), s, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000}).fun for s in starts]
            best[kind] = max(vals)
        assert abs(best["multiply"] - 1 / 8) < 1e-9, best
        assert abs(best["add"] - 1 / 12) < 1e-9, best
        assert success_prob_surface("multiply", 0, 0) == 1 / 8
        h = math.sqrt(0.5)
        assert abs(success_prob_surface("add", h, h) - 1 / 12) < 1e-15
        notes.append(f"maxima {best['multiply']:.12f}, {best['add']:.12f}")


def test_criterion_3_protocol_equivalence(capsys):
    with criterion(capsys, 3, "protocol equivalence") as notes:
        rng = np.random.default_rng(33)
        n = 100_000
        costs = {}
        for p in (0.1, 0.3, 0.5, 0.7, 0.9):
            g = 4 * p * (1 - p)
            sd = math.sqrt(max(g * (1 - g), 0.0) / n)
            results = [proto(p, rng, n) for proto in (g_protocol1, g_protocol2, g_protocol3)]
            means = [bits.mean() for bits, _ in results]
            for m in means:
                assert within(m, g, sd) if sd > 0 else m == g, (p, means)
            for i in range(3):
                for j in range(i + 1, 3):
                    assert abs(means[i] - means[j]) <= 4 * math.sqrt(2) * sd or sd == 0, (p, means)
            if p == 0.5:
                costs = {k + 1: led.mean_quoins() for k, (_, led) in enumerate(results)}
        # protocols 2 and 3 both cost 4 quoins in expectation; allow sampling noise on that tie
        tie_sd = math.sqrt(2 * 8.0 / n)  # difference of two means of 2*Geometric(1/2), variance 8 each
        assert costs[3] <= costs[2] + 4 * tie_sd, costs
        assert costs[2] <= costs[1], costs
        notes.append("mean quoins at p=0.5: " + ", ".join(f"protocol {k} {v:.3f}" for k, v in costs.items()))


def test_criterion_4_advantage_figures(capsys):
    with criterion(capsys, 4, "quantum advantage figures") as notes:
        r = quantum_cost_report(0.5, 0.6, np.random.default_rng(44), 100_000)
        assert r["predicted"] == pytest.approx(53.3, abs=0.05)
        assert within(r["mean_quoins_per_coin"], r["predicted"], r["stderr"])
        classical = classical_fct_cost(0.5, 0.0221)["total"]
        assert abs(classical / 5.003e4 - 1) < 0.01, classical
        doubling = doubling_cost_estimate(0.0221)
        assert abs(doubling / 2.285e4 - 1) < 0.01, doubling
        notes.append(
            f"quantum {r['predicted']:.2f} predicted / {r['mean_quoins_per_coin']:.2f} sampled, "
            f"classical {classical:.1f}, doubling {doubling:.1f}"
        )


def test_criterion_5_fidelity_fixtures(capsys):
    with criterion(capsys, 5, "fidelity fixtures") as notes:
        r = fidelity_report(measured_table("HV"), measured_table("DA"))
        printed = {k: round(100 * v, 2) for k, v in r.items()}
        assert printed == {
            "f_hv": 97.24,
            "f_da": 94.16,
            "process_lower": 91.40,
            "process_upper": 94.16,
            "average_lower": 93.12,
            "average_upper": 95.33,
        }, printed
        notes.append(", ".join(f"{k}={v:.2f}%" for k, v in printed.items()))


def _rand_tree(rng, d):
    if d <= 1 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.35:
            return Sym("p")
        if r < 0.7:
            return Sym("s")
        return Num(round(float(rng.uniform(0.1, 3.0)), 3), bool(rng.random() < 0.25))
    if rng.random() < 0.15:
        return Unary("-", _rand_tree(rng, d - 1))
    return Binary(str(rng.choice(list("+-*/"))), _rand_tree(rng, d - 1), _rand_tree(rng, d - 1))


def test_criterion_6_field_and_constructor_soundness(capsys):
    with criterion(capsys, 6, "field and constructor soundness") as notes:
        rng = np.random.default_rng(66)
        elems = [random_element(rng) for _ in range(1000)]
        worst_eval = 0.0
        for i, x in enumerate(elems):
            y, z = elems[(i + 1) % 1000], elems[(i + 7) % 1000]
            assert (x + y - (y + x)).is_zero()
            assert (x * y - y * x).is_zero()
            assert ((x + y) + z - (x + (y + z))).is_zero()
            assert ((x * y) * z - x * (y * z)).is_zero()
            assert (x * (y + z) - (x * y + x * z)).is_zero()
            assert (x * x.inv() - 1).is_zero()
            p = float(rng.uniform(0.02, 0.98))
            xv, yv = complex(field_eval(x, p)), complex(field_eval(y, p))
            for got, want in ((field_eval(x * y, p), xv * yv), (field_eval(x + y, p), xv + yv), (field_eval(x.inv(), p), 1 / xv)):
                err = abs(got - want) / max(1.0, abs(want))
                worst_eval = max(worst_eval, err)
                assert err <= 1e-9, (i, p, got, want)
        notes.append(f"1000 elements, worst homomorphism error {worst_eval:.1e}")

        worst_syn, count = 0.0, 0
        while count < 200:
            tree = _rand_tree(rng, 5)
            try:
                plan, _ = compile_plan(tree)
            except SynthesisError:
                continue  # semantically a division by zero
            count += 1
            for p in rng.uniform(0.02, 0.98, 10):
                h = evaluate(tree, p)
                got = execute_plan(plan, p).state.ratio()
                err = abs(got - h) / max(1.0, abs(h))
                worst_syn = max(worst_syn, err)
                assert err <= 1e-8, (tree, p, got, h)
        notes.append(f"200 expressions x 10 p, worst {worst_syn:.1e}")

        worst_loc = 0.0
        for _ in range(200):
            n = int(rng.integers(1, 4))
            N = 1 << n
            amps = rng.normal(size=N) + 1j * rng.normal(size=N)
            st = make_state(amps)
            k = int(rng.integers(0, N - 1))
            kind = str(rng.choice(["add", "multiply", "inverse"]))
            aux = None if kind == "inverse" else make_constant_state(complex(rng.normal(), rng.normal()))
            before = st.relative_amplitudes()
            after = apply_basic_general(kind, st, aux, k).state.relative_amplitudes()
            for j in range(N - 1):
                if j != k:
                    d = abs(after[j] - before[j]) / max(1.0, abs(before[j]))
                    worst_loc = max(worst_loc, d)
                    assert d <= 1e-9, (kind, n, k, j)
            l = aux.ratio() if aux is not None else None
            want = {"add": lambda: before[k] + l, "multiply": lambda: before[k] * l, "inverse": lambda: 1 / before[k]}[kind]()
            assert abs(after[k] - want) <= 1e-9 * max(1.0, abs(want))
        notes.append(f"locality worst drift {worst_loc:.1e}")

        worst_sym = 0.0
        circuits = [
            ("example coin", lambda p: example_coin_circuit(p)[0]),
            ("u_a then H", lambda p: apply_operator(apply_operator(make_quoin(p), u_a(0.3), [0]), H, [0])),
            ("CNOT pair", lambda p: apply_operator(tensor(make_quoin(p), make_quoin(p)), CNOT, [0, 1])),
            ("multi", lambda p: synthesize_multi(["p", "2*s", "1-p"], p)[1]),
        ]
        for name, build in circuits:
            sym = build(None)
            for p in (0.13, 0.42, 0.77):
                num = build(p)
                hs = [complex(field_eval(h, p)) for h in sym.relative_amplitudes()]
                hn = num.relative_amplitudes()
                for a, b in zip(hs, hn):
                    d = abs(a - b) / max(1.0, abs(b))
                    worst_sym = max(worst_sym, d)
                    assert d <= 1e-8, (name, p, a, b)
        notes.append(f"symbolic vs numeric worst {worst_sym:.1e}")


def test_criterion_7_feasibility_verdicts(capsys):
    with criterion(capsys, 7, "feasibility verdicts") as notes:
        assert not cbf_check(f_wedge_coin()).passes
        assert not cbf_check(f_c_coin()).passes
        assert cbf_check(constant_coin(0.5)).passes
        va = spb_check(f_a_coin(0.3))
        assert va.passes and len(va.zeros) == 1
        assert va.zeros[0].location == pytest.approx(0.3, abs=1e-6)
        assert abs(va.zeros[0].order - 2) <= 0.05
        vc = spb_check(f_c_coin())
        assert vc.passes and len(vc.zeros) == 1
        assert vc.zeros[0].location == pytest.approx(0.5, abs=1e-6)
        assert abs(vc.zeros[0].order - 2) <= 0.05
        value = extend_common_zeros(common_zero_example_coin())(0.5)
        assert abs(value - 0.5) <= 1e-8, value
        notes.append(
            f"f_a zero order {va.zeros[0].slopes[0]:.3f}, f_c zero order {vc.zeros[0].slopes[0]:.3f}, "
            f"extended value {value:.12f}"
        )


CLI_RUNS = [
    ["coin", "--coin", "fc", "--shots", "60000", "--seed", "99"],
    ["coin", "--coin", "g1", "--shots", "30000", "--seed", "5", "--format", "json"],
    ["coin", "--coin", "fa:0.3", "--shots", "30000", "--seed", "6", "--loss", "0.7"],
    ["cost", "--shots", "40000", "--seed", "7", "--loss", "0.6"],
    ["construct", "--expr", "(s*s-1)/(s*s+1)", "--shots", "30000", "--seed", "8", "--p-step", "0.25"],
    ["fidelity", "--simulate", "--noise", "0.05", "--shots", "20000", "--seed", "9", "--format", "json"],
]


def test_criterion_8_cli_determinism(capsys, tmp_path):
    with criterion(capsys, 8, "CLI determinism") as notes:
        for i, args in enumerate(CLI_RUNS):
            outputs = []
            for workers, rep in ((1, 0), (8, 0), (8, 1)):
                path = tmp_path / f"run{i}_{workers}_{rep}.out"
                cmd = [sys.executable, "-m", "qbfactory", *args, "--workers", str(workers), "--out", str(path)]
                res = subprocess.run(cmd, capture_output=True, text=True)
                assert res.returncode == 0, (args, res.stderr)
                outputs.append(path.read_bytes())
            assert outputs[0] == outputs[1] == outputs[2], args
            assert len(outputs[0]) > 0
        notes.append(f"{len(CLI_RUNS)} runs byte-identical with 1 and 8 workers")
