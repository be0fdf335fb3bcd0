"""Parameter sweeps, seeded Monte Carlo chunks and report emission.

Randomness for a chunk of shots comes from
``SeedSequence([seed, subcommand code, p index, chunk index])``.  Chunks
have a fixed size, so results do not depend on how many worker threads
process them.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classical import g_protocol1, g_protocol2, g_protocol3, quantum_predicted_cost, classical_fct_cost
from .coin import f_a_eval, f_c_eval
from .construct import compile_plan, example_coin_circuit, execute_plan, g_state_circuit
from .errors import ConfigError, QbfError
from .expr import evaluate, parse_expression
from .state import apply_operator, make_quoin, sample_measure, u_a

HEADER = ("p", "theoretical", "estimate", "stddev", "success_prob", "quoins_mean", "seed")
COST_HEADER = ("p", "quantum_predicted", "quantum_empirical", "quantum_stderr", "classical_total", "l_factor", "ratio", "seed")
SUBCOMMAND_CODES = {"construct": 1, "coin": 2, "cost": 3, "fidelity": 4, "check": 5}
CHUNK = 10_000


@dataclass
class RunConfig:
    subcommand: str = "coin"
    p_start: float = 0.0
    p_stop: float = 1.0
    p_step: float = 0.1
    shots: int = 10_000
    seed: int = 0
    loss_survival: float = 1.0
    output_path: str | None = None
    format: str = "csv"
    workers: int = 1
    eps_c: float = 0.0221

    def validate(self) -> "RunConfig":
        if self.subcommand not in SUBCOMMAND_CODES:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if not self.p_step > 0:
            raise ConfigError("p step must be positive")
        if not (0.0 <= self.p_start <= 1.0 and 0.0 <= self.p_stop <= 1.0):
            raise ConfigError("p grid must lie within [0, 1]")
        if self.p_stop < self.p_start:
            raise ConfigError("p stop is below p start")
        if self.shots < 1:
            raise ConfigError("shots must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not 0.0 < self.loss_survival <= 1.0:
            raise ConfigError("loss survival must lie in (0, 1]")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0.0 < self.eps_c < 0.5:
            raise ConfigError("eps_c must lie in (0, 0.5)")
        return self

    def p_grid(self) -> list[float]:
        n = int(math.floor((self.p_stop - self.p_start) / self.p_step + 1e-9)) + 1
        return [min(1.0, round(self.p_start + i * self.p_step, 12)) for i in range(n)]


def chunk_rng(seed: int, subcommand: str, p_index: int, chunk_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), SUBCOMMAND_CODES[subcommand], p_index, chunk_index])
    return np.random.default_rng(ss)


def _chunks(shots: int):
    sizes = [CHUNK] * (shots // CHUNK)
    if shots % CHUNK:
        sizes.append(shots % CHUNK)
    return sizes


# ---------------------------------------------------------------------------
# per-target simulation: each returns (theoretical, success_prob, chunk_fn)
# where chunk_fn(rng, n) -> (heads, quoins)

def _state_sampler(state, prob, loss, quoins_each, head=0):
    w = state

    def run(rng, n):
        heads = int(np.count_nonzero(sample_measure(w, rng, n) == head))
        att = rng.geometric(prob * loss, size=n)
        return heads, int(quoins_each * att.sum())

    return run


def _target(name: str, p: float, loss: float, plan=None, tree=None):
    if plan is not None:
        try:
            h = evaluate(tree, p)
            theo = abs(h) ** 2 / (1.0 + abs(h) ** 2)
        except ZeroDivisionError:
            theo = math.nan
        try:
            res = execute_plan(plan, p)
        except (QbfError, ZeroDivisionError):
            # a degenerate intermediate state at this p: report the point as undefined
            return theo, math.nan, lambda rng, n: (None, None), math.nan

        def run(rng, n):
            heads = int(np.count_nonzero(sample_measure(res.state, rng, n) == 0))
            return heads, None

        exp_q = res.expected_quoins
        return theo, res.success_prob * loss, run, exp_q / loss if exp_q is not None else math.nan
    if name == "fc":
        state, prob = example_coin_circuit(p)
        return float(f_c_eval(p)), prob * loss, _state_sampler(state, prob, loss, 2), None
    if name == "g2":
        _, prob = g_state_circuit(p)

        def run(rng, n):
            bits, led = g_protocol2(p, rng, n, loss)
            return int(bits.sum()), led.quoins_consumed

        return 4 * p * (1 - p), prob * loss, run, None
    if name == "g3":
        def run(rng, n):
            bits, led = g_protocol3(p, rng, n, loss)
            return int(bits.sum()), led.quoins_consumed

        return 4 * p * (1 - p), 0.5 * loss, run, None
    if name == "g1":
        m = 2 * p * (1 - p)
        nn = 0.5 - m
        s, t = m / (1 + m), nn / (1 + nn)

        def run(rng, n):
            bits, led = g_protocol1(p, rng, n)
            return int(bits.sum()), led.quoins_consumed

        return 4 * p * (1 - p), s * (1 - t) + (1 - s) * t, run, None
    if name.startswith("fa:"):
        try:
            a = float(name[3:])
        except ValueError as exc:
            raise ConfigError(f"bad coin spec {name!r}") from exc
        if not 0.0 <= a <= 1.0:
            raise ConfigError("a must lie in [0, 1]")
        state = apply_operator(make_quoin(p), u_a(a), [0])
        return float(f_a_eval(a, p)), loss, _state_sampler(state, 1.0, loss, 1, head=1), None
    raise ConfigError(f"unknown coin {name!r}")


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    if math.isinf(x):
        return x
    return float(format(float(x), ".12g"))


def run_sweep(config: RunConfig, target: str, expr: str | None = None) -> list[dict]:
    """One row per grid point: theory, Monte Carlo estimate and costs."""
    config.validate()
    plan = tree = None
    if expr is not None:
        plan, _ = compile_plan(expr)
        tree = parse_expression(expr)
    grid = config.p_grid()
    setups = [_target(target, p, config.loss_survival, plan, tree) for p in grid]
    tasks = [(i, c, n) for i in range(len(grid)) for c, n in enumerate(_chunks(config.shots))]

    def work(task):
        i, c, n = task
        rng = chunk_rng(config.seed, config.subcommand, i, c)
        return setups[i][2](rng, n)

    results = _map(work, tasks, config.workers)
    rows = []
    for i, p in enumerate(grid):
        theo, prob, _, fixed_q = setups[i]
        parts = [r for (j, _, _), r in zip(tasks, results) if j == i]
        if any(h is None for h, _ in parts):
            est = math.nan
        else:
            est = sum(h for h, _ in parts) / config.shots
        if fixed_q is None:
            quoins = sum(q for _, q in parts) / config.shots
        else:
            quoins = fixed_q
        rows.append({
            "p": _fmt(p),
            "theoretical": _fmt(theo),
            "estimate": _fmt(est),
            "stddev": _fmt(math.sqrt(est * (1.0 - est) / config.shots) if not math.isnan(est) else math.nan),
            "success_prob": _fmt(prob),
            "quoins_mean": _fmt(quoins),
            "seed": int(config.seed),
        })
    return rows


def run_cost(config: RunConfig) -> list[dict]:
    """Quantum (predicted and sampled) against classical coin consumption."""
    config.validate()
    grid = config.p_grid()
    sizes = _chunks(config.shots)
    tasks = [(i, c, n) for i in range(len(grid)) for c, n in enumerate(sizes)]
    probs = [example_coin_circuit(p)[1] * config.loss_survival for p in grid]

    def work(task):
        i, c, n = task
        rng = chunk_rng(config.seed, config.subcommand, i, c)
        q = 2.0 * rng.geometric(probs[i], size=n)
        return float(q.sum()), float((q * q).sum())

    results = _map(work, tasks, config.workers)
    rows = []
    for i, p in enumerate(grid):
        parts = [r for (j, _, _), r in zip(tasks, results) if j == i]
        n = config.shots
        s1 = sum(a for a, _ in parts)
        s2 = sum(b for _, b in parts)
        mean = s1 / n
        var = max(0.0, (s2 - n * mean * mean) / (n - 1)) if n > 1 else math.nan
        predicted = quantum_predicted_cost(p, config.loss_survival)
        classical = classical_fct_cost(p, config.eps_c)
        rows.append({
            "p": _fmt(p),
            "quantum_predicted": _fmt(predicted),
            "quantum_empirical": _fmt(mean),
            "quantum_stderr": _fmt(math.sqrt(var / n) if n > 1 else math.nan),
            "classical_total": _fmt(classical["total"]),
            "l_factor": _fmt(classical["l_tosses"]),
            "ratio": _fmt(classical["total"] / predicted),
            "seed": int(config.seed),
        })
    return rows


def _map(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _cell(v):
    if v is None:
        return "nan"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".12g")


def render_report(rows: list[dict], fmt: str = "csv", header=None) -> str:
    if not rows:
        raise ValueError("no rows to emit")
    header = tuple(header or rows[0].keys())
    if fmt == "json":
        objs = [{k: (None if isinstance(r[k], float) and math.isinf(r[k]) else r[k]) for k in header} for r in rows]
        return json.dumps(objs, indent=2) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(r[k]) for k in header])
    return buf.getvalue()


def emit_report(rows: list[dict], fmt: str = "csv", path=None, header=None) -> str:
    """Render rows and write them to ``path`` (if given); returns the text."""
    text = render_report(rows, fmt, header)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_report(path) -> list[dict]:
    """Load a CSV or JSON report back into rows (nan cells become None)."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return json.loads(text)
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in r.items():
            if v == "nan":
                row[k] = None
            elif k == "seed":
                row[k] = int(v)
            else:
                row[k] = float(v)
        rows.append(row)
    return rows


__all__ = [
    "HEADER",
    "COST_HEADER",
    "RunConfig",
    "chunk_rng",
    "run_sweep",
    "run_cost",
    "render_report",
    "emit_report",
    "read_report",
]
