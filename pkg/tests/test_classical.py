import math

import numpy as np
import pytest

from qbfactory.classical import (
    CoinStream,
    advantage_compare,
    classical_fct_cost,
    doubling_cost_estimate,
    g_protocol1,
    g_protocol2,
    g_protocol3,
    quantum_cost_report,
    quantum_predicted_cost,
    ratio_batch,
    ratio_coin,
    truncated_l,
    von_neumann_batch,
    von_neumann_fair,
)
from qbfactory.errors import AttemptCapExceeded, DataError
from qbfactory.ledger import ConsumptionLedger
from qbfactory.state import make_quoin


def _within(x, mean, n, k=4.0):
    return abs(x - mean) <= k * math.sqrt(max(mean * (1 - mean), 1e-12) / n)


def test_von_neumann_is_fair(rng):
    s = CoinStream.analytic(0.3, rng)
    bits = von_neumann_batch(s, 100_000)
    assert _within(bits.mean(), 0.5, 100_000)
    # expected tosses per output 1/(p(1-p)) = 4.76
    assert s.tosses_consumed / 100_000 == pytest.approx(1 / 0.21, rel=0.02)


def test_ratio_coin(rng):
    s = CoinStream.analytic(0.5, rng)
    bits = ratio_batch(s.draw, 100_000)
    assert _within(bits.mean(), 1 / 3, 100_000)


def test_recorded_stream_replay():
    r = CoinStream.recorded("HTHTTHHT")
    assert [von_neumann_fair(r) for _ in range(3)] == [False, False, True]
    assert r.tosses_consumed == 6
    assert von_neumann_fair(r) is False
    with pytest.raises(DataError):
        von_neumann_fair(r)
    with pytest.raises(DataError):
        CoinStream.recorded("HTX")


def test_recorded_ratio_coin():
    assert ratio_coin(CoinStream.recorded("HHHT")) is True
    assert ratio_coin(CoinStream.recorded("TH")) is False


def test_quantum_stream_frequency(rng):
    s = CoinStream.quantum(make_quoin(0.2), rng)
    assert _within(s.draw(50_000).mean(), 0.2, 50_000)


def test_attempt_cap():
    s = CoinStream.analytic(1.0, np.random.default_rng(0))
    with pytest.raises(AttemptCapExceeded):
        von_neumann_batch(s, 10, max_rounds=5)


@pytest.mark.parametrize("proto", [g_protocol1, g_protocol2, g_protocol3])
def test_g_protocols_small(proto, rng):
    bits, ledger = proto(0.3, rng, 20_000)
    assert _within(bits.mean(), 0.84, 20_000)
    assert ledger.outputs_produced == 20_000
    assert ledger.quoins_consumed >= 2 * 20_000 or proto is g_protocol1


def test_g_protocols_at_endpoints(rng):
    for proto in (g_protocol1, g_protocol3):
        bits, _ = proto(0.0, rng, 1000)
        assert not bits.any()


def test_cost_formulas():
    assert doubling_cost_estimate(0.0221) == pytest.approx(2.285e4, rel=0.01)
    c = classical_fct_cost(0.5, 0.0221)
    assert c["total"] == pytest.approx(5.003e4, rel=0.01)
    assert c["l"] == pytest.approx(0.0442)
    assert c["l_tosses"] == pytest.approx(2 / (1 - 0.0442) ** 2)
    assert truncated_l(0.9, 0.0221) == pytest.approx(0.64)
    assert quantum_predicted_cost(0.5) == pytest.approx(32.0)
    assert quantum_predicted_cost(0.5, 0.6) == pytest.approx(53.333333, rel=1e-6)
    with pytest.raises(ValueError):
        doubling_cost_estimate(0.0)


def test_quantum_cost_report(rng):
    r = quantum_cost_report(0.5, 0.6, rng, 20_000)
    assert abs(r["mean_quoins_per_coin"] - r["predicted"]) <= 4 * r["stderr"]


def test_advantage_ratio_is_quotient():
    a = advantage_compare(0.5)
    assert a["ratio"] == pytest.approx(a["classical_total"] / a["quantum_predicted"])


def test_ledger():
    a = ConsumptionLedger()
    a.record(quoins=10, outputs=2, attempts=5)
    b = a.merge(ConsumptionLedger(4, 1, 2, 2))
    assert b.mean_quoins() == pytest.approx(3.5)
    assert b.to_dict()["classical_coins_consumed"] == 1
    with pytest.raises(ValueError):
        a.record(quoins=-1)
    with pytest.raises(ValueError):
        ConsumptionLedger(loss_survival=0.0)
    with pytest.raises(ValueError):
        ConsumptionLedger().mean_quoins()
