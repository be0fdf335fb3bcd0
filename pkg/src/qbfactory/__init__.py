"""Bernoulli factories driven by quantum coins.

Exact arithmetic in the amplitude field, state-vector simulation with
post-selection, synthesis of states from amplitude expressions, coin
feasibility checks, classical protocols and gate-fidelity estimates.
"""

from .errors import (
    AttemptCapExceeded,
    CapacityError,
    ConfigError,
    DataError,
    DegenerateInputError,
    DimensionError,
    EvaluationError,
    ExprSyntaxError,
    FieldDomainError,
    PostSelectionError,
    QbfError,
    SingularityError,
    SynthesisError,
    UnknownSymbolError,
)
from .field import FieldElement, Poly, RationalFn, field_eval
from .state import Operator, StateVector, apply_operator, make_quoin, postselect, tensor
from .expr import parse_expression, to_field, to_string
from .construct import (
    CircuitPlan,
    add_states,
    apply_basic_general,
    build_example_coin,
    compile_plan,
    execute_plan,
    invert_state,
    multiply_states,
    synthesize_multi,
    synthesize_single,
)
from .coin import CoinFunction, cbf_check, coin_from_state, extend_common_zeros, spb_check
from .classical import (
    CoinStream,
    advantage_compare,
    classical_fct_cost,
    doubling_cost_estimate,
    g_protocol1,
    g_protocol2,
    g_protocol3,
    quantum_cost_report,
)
from .fidelity import TruthTable, classical_fidelity, fidelity_report, process_fidelity_bounds
from .ledger import ConsumptionLedger
from .sweep import RunConfig, emit_report, run_cost, run_sweep

__version__ = "0.1.0"
