"""Truth-table fidelities of two-qubit gates and state fidelity from counts.

A truth table has one column per input basis state and one row per output
basis state.  Columns are normalized independently, so the classical
fidelity is the mean over inputs of Pr(expected output | input).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .state import H, Operator

LABELS = {"HV": ("HH", "HV", "VH", "VV"), "DA": ("DD", "DA", "AD", "AA")}
# expected output row for each input column of a controlled-NOT
HV_MAP = (0, 1, 3, 2)
DA_MAP = (0, 3, 2, 1)
DEFAULT_MAPS = {"HV": HV_MAP, "DA": DA_MAP}

# measured coincidence counts of a controlled-NOT, rows = outputs, columns = inputs
HV_COUNTS = (
    (2061, 41, 7, 0),
    (41, 1826, 3, 16),
    (14, 15, 39, 1966),
    (15, 7, 2065, 26),
)
DA_COUNTS = (
    (1580, 5, 105, 12),
    (12, 100, 0, 2060),
    (95, 7, 2132, 6),
    (3, 1939, 13, 117),
)


@dataclass(frozen=True)
class TruthTable:
    basis_label: str
    counts: np.ndarray
    expected_map: tuple

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (4, 4):
            raise DataError(f"truth table must be 4x4, got {c.shape}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise DataError("counts must be finite and nonnegative")
        if sorted(self.expected_map) != [0, 1, 2, 3]:
            raise DataError("expected map must be a permutation of the four outputs")
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "expected_map", tuple(int(i) for i in self.expected_map))

    @classmethod
    def from_counts(cls, counts, basis_label="HV", expected_map=None):
        if expected_map is None:
            if basis_label not in DEFAULT_MAPS:
                raise DataError(f"no default map for basis {basis_label!r}")
            expected_map = DEFAULT_MAPS[basis_label]
        return cls(basis_label, np.asarray(counts, dtype=float), expected_map)

    def column_probabilities(self) -> np.ndarray:
        totals = self.counts.sum(axis=0)
        if np.any(totals <= 0):
            raise DataError(f"input column {int(np.argmin(totals))} has no counts")
        return self.counts / totals


def measured_table(basis: str) -> TruthTable:
    """Measured controlled-NOT count tables in the HV or DA basis."""
    counts = {"HV": HV_COUNTS, "DA": DA_COUNTS}[basis]
    return TruthTable.from_counts(counts, basis)


def classical_fidelity(table: TruthTable) -> float:
    probs = table.column_probabilities()
    return float(np.mean([probs[table.expected_map[j], j] for j in range(4)]))


def process_fidelity_bounds(f_hv: float, f_da: float) -> tuple[float, float]:
    """Lower and upper bounds on the process fidelity from two bases."""
    for f in (f_hv, f_da):
        if not 0.0 <= f <= 1.0:
            raise ValueError("fidelities must lie in [0, 1]")
    return max(0.0, f_hv + f_da - 1.0), min(f_hv, f_da)


def average_fidelity(f_p: float, dim_n: int = 4) -> float:
    if not 0.0 <= f_p <= 1.0:
        raise ValueError("f_p must lie in [0, 1]")
    if dim_n < 1:
        raise ValueError("dimension must be positive")
    return (dim_n * f_p + 1.0) / (dim_n + 1.0)


def state_fidelity_from_counts(cc_parallel: int, cc_perp: int) -> tuple[float, float]:
    """Fidelity and its binomial standard deviation."""
    if cc_parallel < 0 or cc_perp < 0:
        raise DataError("counts must be nonnegative")
    n = cc_parallel + cc_perp
    if n <= 0:
        raise DataError("no counts")
    f = cc_parallel / n
    return f, math.sqrt(f * (1.0 - f) / n)


def _basis_change(basis: str) -> np.ndarray:
    if basis == "HV":
        return np.eye(4, dtype=complex)
    if basis == "DA":
        return np.kron(H.matrix, H.matrix)
    raise ValueError(f"unknown basis pair {basis!r}")


def ideal_probabilities(gate: Operator, basis: str) -> np.ndarray:
    """Pr(output | input) for basis-state inputs, both in the named basis."""
    if gate.n_qubits != 2:
        raise ValueError("truth tables need a two-qubit gate")
    B = _basis_change(basis)
    amps = B.conj().T @ gate.matrix @ B  # column j: output amplitudes for input j
    probs = np.abs(amps) ** 2
    return probs / probs.sum(axis=0)


def simulate_truth_table(gate: Operator, noise_lambda: float, shots_per_column: int, basis_pair: str, rng) -> TruthTable:
    """Sample counts from (1 - lambda) Pr_ideal + lambda / 4 for each input."""
    if not 0.0 <= noise_lambda <= 1.0:
        raise ValueError("noise_lambda must lie in [0, 1]")
    ideal = ideal_probabilities(gate, basis_pair)
    mixed = (1.0 - noise_lambda) * ideal + noise_lambda / 4.0
    counts = np.column_stack([rng.multinomial(shots_per_column, mixed[:, j] / mixed[:, j].sum()) for j in range(4)])
    expected = tuple(int(i) for i in np.argmax(ideal, axis=0))
    return TruthTable(basis_pair, counts.astype(float), expected)


def read_truth_table_csv(path, basis_label: str, expected_map=None) -> TruthTable:
    """Read a 4x4 table: a header naming the inputs, then one labelled row per output."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) != 5:
        raise DataError(f"expected a header and 4 rows, found {len(rows)} lines")
    body = rows[1:]
    try:
        counts = [[float(x) for x in (r[1:] if len(r) == 5 else r)] for r in body]
    except ValueError as exc:
        raise DataError(f"non-numeric count: {exc}") from exc
    if any(len(r) != 4 for r in counts):
        raise DataError("each row needs four counts")
    return TruthTable.from_counts(counts, basis_label, expected_map)


def fidelity_report(hv: TruthTable, da: TruthTable, dim_n: int = 4) -> dict:
    f_hv, f_da = classical_fidelity(hv), classical_fidelity(da)
    lower, upper = process_fidelity_bounds(f_hv, f_da)
    return {
        "f_hv": f_hv,
        "f_da": f_da,
        "process_lower": lower,
        "process_upper": upper,
        "average_lower": average_fidelity(lower, dim_n),
        "average_upper": average_fidelity(upper, dim_n),
    }


__all__ = [
    "TruthTable",
    "HV_MAP",
    "DA_MAP",
    "HV_COUNTS",
    "DA_COUNTS",
    "measured_table",
    "classical_fidelity",
    "process_fidelity_bounds",
    "average_fidelity",
    "state_fidelity_from_counts",
    "ideal_probabilities",
    "simulate_truth_table",
    "read_truth_table_csv",
    "fidelity_report",
]
