"""Resource accounting shared by the quantum and classical protocols."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class ConsumptionLedger:
    quoins_consumed: int = 0
    classical_coins_consumed: int = 0
    outputs_produced: int = 0
    attempts: int = 0
    loss_survival: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.loss_survival <= 1.0:
            raise ValueError("loss_survival must lie in (0, 1]")

    def record(self, quoins: int = 0, coins: int = 0, outputs: int = 0, attempts: int = 0):
        if min(quoins, coins, outputs, attempts) < 0:
            raise ValueError("ledger counters only grow")
        self.quoins_consumed += int(quoins)
        self.classical_coins_consumed += int(coins)
        self.outputs_produced += int(outputs)
        self.attempts += int(attempts)

    def merge(self, other: "ConsumptionLedger") -> "ConsumptionLedger":
        return ConsumptionLedger(
            self.quoins_consumed + other.quoins_consumed,
            self.classical_coins_consumed + other.classical_coins_consumed,
            self.outputs_produced + other.outputs_produced,
            self.attempts + other.attempts,
            self.loss_survival,
        )

    def _per_output(self, total):
        if self.outputs_produced <= 0:
            raise ValueError("no outputs recorded yet")
        return total / self.outputs_produced

    def mean_quoins(self) -> float:
        return self._per_output(self.quoins_consumed)

    def mean_coins(self) -> float:
        return self._per_output(self.classical_coins_consumed)

    def to_dict(self) -> dict:
        return asdict(self)
