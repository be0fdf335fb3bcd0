"""Classical coin protocols and the quantum-versus-classical cost accounting.

Coin sources expose ``draw(k)`` returning a boolean array (True = head), so
every protocol below runs many independent instances at once.  Each source
counts its own tosses; the quoin count of a protocol is the number of
quantum coins measured by its sources.
"""

from __future__ import annotations

import math

import numpy as np

from .construct import (
    DEFAULT_ATTEMPT_CAP,
    example_coin_circuit,
    g_state_circuit,
    psi2_state,
)
from .errors import AttemptCapExceeded, DataError
from .ledger import ConsumptionLedger
from .state import H, StateVector, apply_operator, make_quoin, sample_measure


class CoinStream:
    """A source of coin tosses with a toss counter.

    Use :meth:`analytic`, :meth:`quantum` or :meth:`recorded` to build one.
    """

    def __init__(self, kind: str, *, prob=None, rng=None, state=None, heads=(0,), sequence=None, seed=None):
        self.kind = kind
        self.prob = prob
        self.rng = rng
        self.state = state
        self.heads = np.array(sorted(heads))
        self.sequence = None if sequence is None else np.asarray(sequence, dtype=bool)
        self.seed = seed
        self.tosses_consumed = 0
        self._pos = 0

    @classmethod
    def analytic(cls, prob: float, rng=None, seed=None):
        if not 0.0 <= prob <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        rng = rng if rng is not None else np.random.default_rng(seed)
        return cls("analytic", prob=prob, rng=rng, seed=seed)

    @classmethod
    def quantum(cls, state: StateVector, rng=None, heads=(0,), seed=None):
        """Measure fresh copies of ``state`` in the computational basis."""
        rng = rng if rng is not None else np.random.default_rng(seed)
        w = np.abs(state.amps) ** 2
        prob = float(w[list(heads)].sum() / w.sum())
        return cls("quantum", prob=prob, rng=rng, state=state, heads=heads, seed=seed)

    @classmethod
    def recorded(cls, sequence):
        """Replay a fixed sequence; accepts 0/1 values or 'H'/'T' characters."""
        if isinstance(sequence, str):
            bad = set(sequence.upper()) - {"H", "T"}
            if bad:
                raise DataError(f"unexpected symbols {sorted(bad)} in recorded stream")
            sequence = [c == "H" for c in sequence.upper()]
        return cls("recorded", sequence=sequence)

    def draw(self, k: int | None = None):
        n = 1 if k is None else int(k)
        if self.kind == "recorded":
            if self._pos + n > len(self.sequence):
                raise DataError("recorded stream exhausted")
            out = self.sequence[self._pos:self._pos + n].copy()
            self._pos += n
        elif self.kind == "quantum":
            out = np.isin(sample_measure(self.state, self.rng, n), self.heads)
        else:
            out = self.rng.random(n) < self.prob
        self.tosses_consumed += n
        return bool(out[0]) if k is None else out


def _batched(k, trial, max_rounds):
    """Run ``trial(m)`` on pending instances until each one settles.

    ``trial`` returns ``(done, value)`` arrays of length m.
    """
    out = np.zeros(k, dtype=bool)
    pending = np.arange(k)
    rounds = 0
    while pending.size:
        rounds += 1
        if rounds > max_rounds:
            raise AttemptCapExceeded(f"{pending.size} instances unfinished after {max_rounds} rounds")
        done, value = trial(pending.size)
        out[pending[done]] = value[done]
        pending = pending[~done]
    return out


def von_neumann_batch(stream: CoinStream, k: int, max_rounds=DEFAULT_ATTEMPT_CAP):
    """Toss twice; if the tosses differ, output the second one."""

    def trial(m):
        a, b = stream.draw(m), stream.draw(m)
        return a != b, b

    return _batched(k, trial, max_rounds)


def von_neumann_fair(stream: CoinStream, max_rounds=DEFAULT_ATTEMPT_CAP) -> bool:
    return bool(von_neumann_batch(stream, 1, max_rounds)[0])


def ratio_batch(draw, k: int, max_rounds=DEFAULT_ATTEMPT_CAP):
    """Head probability l/(1+l) from an l-coin given as ``draw(m)``.

    Toss twice: head-head repeats, head-tail is head, a leading tail is tail.
    """

    def trial(m):
        x, y = draw(m), draw(m)
        return ~(x & y), x & ~y

    return _batched(k, trial, max_rounds)


def ratio_coin(stream: CoinStream, max_rounds=DEFAULT_ATTEMPT_CAP) -> bool:
    return bool(ratio_batch(stream.draw, 1, max_rounds)[0])


def _ledger(quoins, outputs, attempts, loss):
    led = ConsumptionLedger(loss_survival=loss)
    led.record(quoins=int(quoins), outputs=int(outputs), attempts=int(attempts))
    return led


def g_protocol1(p: float, rng, n_outputs: int = 1, max_rounds=DEFAULT_ATTEMPT_CAP):
    """4p(1-p)-coin from a p-coin and a q-coin, q = (1 + 2 sqrt(p(1-p)))/2.

    Both coins come from measuring quoins: in the Z basis for p and in the
    D/A basis for q.  m = 2p(1-p) is "two p-tosses differ", n = 1/2 - m is
    "two q-tosses differ"; s = m/(1+m) and t = n/(1+n) are ratio coins and
    the final loop outputs head on (s head, t tail) and tail on (s tail,
    t head), giving m/(m+n) = 4p(1-p).
    """
    quoin = make_quoin(p)
    p_coin = CoinStream.quantum(quoin, rng)
    q_coin = CoinStream.quantum(apply_operator(quoin, H, [0]), rng)

    def m_coin(k):
        return p_coin.draw(k) != p_coin.draw(k)

    def n_coin(k):
        return q_coin.draw(k) != q_coin.draw(k)

    def trial(k):
        s = ratio_batch(m_coin, k, max_rounds)
        t = ratio_batch(n_coin, k, max_rounds)
        return s != t, s & ~t

    bits = _batched(n_outputs, trial, max_rounds)
    quoins = p_coin.tosses_consumed + q_coin.tosses_consumed
    return bits, _ledger(quoins, n_outputs, quoins, 1.0)


def _geometric(rng, prob, size, max_attempts):
    if prob <= 0.0:
        raise AttemptCapExceeded("success probability is zero")
    att = rng.geometric(prob, size=size)
    if att.size and att.max() > max_attempts:
        raise AttemptCapExceeded(f"an output needed {int(att.max())} attempts")
    return att


def g_protocol2(p: float, rng, n_outputs: int = 1, loss_survival=1.0, max_attempts=DEFAULT_ATTEMPT_CAP):
    """Prepare sqrt(4p(1-p))|0> + (2p-1)|1> (two quoins, success 1/2) and measure Z."""
    state, prob = g_state_circuit(p)
    att = _geometric(rng, prob * loss_survival, n_outputs, max_attempts)
    bits = sample_measure(state, rng, n_outputs) == 0
    return bits, _ledger(2 * att.sum(), n_outputs, att.sum(), loss_survival)


def g_protocol3(p: float, rng, n_outputs: int = 1, loss_survival=1.0, max_attempts=DEFAULT_ATTEMPT_CAP):
    """Measure psi_2 directly; keep outcomes 01 and 10, call 01 a head."""
    st = psi2_state(p)
    st = StateVector(st.amps / np.linalg.norm(st.amps), 1.0, p)
    attempts = 0

    def trial(m):
        nonlocal attempts
        attempts += m
        alive = rng.random(m) < loss_survival
        o = sample_measure(st, rng, m)
        return alive & ((o == 1) | (o == 2)), o == 1

    bits = _batched(n_outputs, trial, max_attempts)
    return bits, _ledger(2 * attempts, n_outputs, attempts, loss_survival)


# ---------------------------------------------------------------------------
# cost formulas

def doubling_cost_estimate(eps: float) -> float:
    """Coins used by the doubling construction at truncation eps: -(1/eps^2) ln(eps^2/36)."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    return -math.log(eps * eps / 36.0) / (eps * eps)


def truncated_l(p: float, eps_c: float) -> float:
    """l(p) = (2p-1)^2 raised to at least 2 eps_c."""
    return max((2.0 * p - 1.0) ** 2, 2.0 * eps_c)


def classical_fct_cost(p: float, eps_c: float = 0.0221) -> dict:
    """Classical coins per truncated f_c output.

    Each l-coin costs ``doubling_cost_estimate(eps_c)`` p-coins and one
    output takes 2/(1-l)^2 l-coins on average.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    l = truncated_l(p, eps_c)
    per_l = doubling_cost_estimate(eps_c)
    factor = math.inf if l >= 1.0 else 2.0 / (1.0 - l) ** 2
    return {"l": l, "per_l_coin": per_l, "l_tosses": factor, "total": per_l * factor}


def quantum_predicted_cost(p: float, loss_survival: float = 1.0) -> float:
    """Expected quoins per f_c coin: 2 / (Pr_c * survival)."""
    _, prob = example_coin_circuit(p)
    return 2.0 / (prob * loss_survival)


def quantum_cost_report(p: float, loss_survival: float = 1.0, rng=None, shots: int = 10_000) -> dict:
    """Monte Carlo quoins per successful f_c coin next to the prediction."""
    if not 0.0 < loss_survival <= 1.0:
        raise ValueError("loss_survival must lie in (0, 1]")
    _, prob = example_coin_circuit(p)
    predicted = 2.0 / (prob * loss_survival)
    out = {"p": p, "loss_survival": loss_survival, "success_prob": prob, "predicted": predicted}
    if rng is not None and shots > 0:
        quoins = 2 * _geometric(rng, prob * loss_survival, shots, DEFAULT_ATTEMPT_CAP)
        out["mean_quoins_per_coin"] = float(quoins.mean())
        out["stderr"] = float(quoins.std(ddof=1) / math.sqrt(shots)) if shots > 1 else math.nan
        out["shots"] = shots
    return out


def advantage_compare(p: float, eps_c: float = 0.0221, loss_survival: float = 0.6, rng=None, shots: int = 0) -> dict:
    classical = classical_fct_cost(p, eps_c)
    quantum = quantum_cost_report(p, loss_survival, rng, shots)
    return {
        "p": p,
        "eps_c": eps_c,
        "loss_survival": loss_survival,
        "quantum_predicted": quantum["predicted"],
        "quantum_empirical": quantum.get("mean_quoins_per_coin", math.nan),
        "quantum_stderr": quantum.get("stderr", math.nan),
        "classical_total": classical["total"],
        "l_factor": classical["l_tosses"],
        "ratio": classical["total"] / quantum["predicted"],
    }


__all__ = [
    "CoinStream",
    "von_neumann_fair",
    "von_neumann_batch",
    "ratio_coin",
    "ratio_batch",
    "g_protocol1",
    "g_protocol2",
    "g_protocol3",
    "doubling_cost_estimate",
    "truncated_l",
    "classical_fct_cost",
    "quantum_predicted_cost",
    "quantum_cost_report",
    "advantage_compare",
]
