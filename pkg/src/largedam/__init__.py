"""Threshold queue with compound Poisson input: exact, asymptotic and simulated behavior."""

from __future__ import annotations

__version__ = "0.1.0"

from .asymptotics import (
    AsymptoticP1P2,
    HeavyTrafficParams,
    RootResult,
    asymp_p1_p2,
    asymp_q_profile,
    heavy_traffic_p1_p2,
    regime_of,
    solve_phi,
    solve_tau,
    takacs_limit,
)
from .busy_period import (
    ArrivalCountCoeffs,
    BusyPeriodTable,
    arrival_count_coeffs,
    busy_period_table,
    nu1_of_zeta,
    solve_takacs_recurrence,
    zeta1_distribution,
)
from .config import ConfigError, RunConfig, load_config
from .errors import (
    DegenerateModel,
    DomainError,
    ModelError,
    NoRoot,
    NumericalError,
    NumericalFailure,
    RegimeError,
    SearchError,
    TruncationError,
)
from .model import (
    BatchDistribution,
    ConstantCost,
    DamModel,
    Deterministic,
    Erlang,
    Exponential,
    HyperExponential,
    LinearCost,
    TableCost,
    load_factors,
)
from .objective import (
    ControlProblem,
    ControlSolution,
    ObjectiveValue,
    cost_limit_eta,
    cost_limit_psi,
    exact_objective,
    limiting_objective,
    objective_lower,
    objective_upper,
    objective_zero,
    optimize_control,
    sweep,
    sweep_j2,
)
from .simulator import SimConfig, SimEstimate, simulate
from .stationary import StationaryResult, stationary
