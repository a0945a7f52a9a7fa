"""Lavrentiev regularization for monotone operator equations on a quadrature grid."""

__version__ = "0.1.0"

from .grid import Grid, GridFunction, constant, heaviside, inner, make_uniform_grid, norm, sample, zeros
from .linops import (
    LinearMonotoneOperator,
    cesaro_operator,
    classify_posedness,
    estimate_resolvent_norm,
    fractional_power_apply,
    multiplication_operator,
    resolvent_solve,
    skew_example,
    volterra_operator,
)
from .lavrentiev import (
    LinearProblem,
    ParameterRule,
    apriori_alpha,
    bias_linear,
    make_noisy_data,
    noise_propagation_gap,
    regularize_linear,
    saturation_probe,
    total_error,
)
from .srcfit import DistanceCurve, DecayModel, distance_function, fit_decay, verify_cesaro_witness
from .nonlinear import (
    MonotoneMap,
    NonlinearProblem,
    bias_nonlinear,
    bias_transfer_check,
    conditional_stability_rate,
    exp_link_map,
    power_link_map,
    solve_lavrentiev_nonlinear,
)
from .analysis import RateTable, compare_bound, fit_log_rate, fit_power_rate, rate_table

__all__ = [name for name in dir() if not name.startswith("_")]
