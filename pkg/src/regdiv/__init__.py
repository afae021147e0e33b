"""Optimal dividend and financing thresholds for regime-switching diffusions."""

__version__ = "0.1.0"

from .model import (RegimeModel, DriftSpec, VolSpec, ValidationReport,
                    ConfigError, NumericalError, build_model, validate_model,
                    value_upper_bound, default_x_max, load_config)
from .funcspace import (RegimeFunction, ClassReport, sup_norm_distance,
                        check_class_D, eval_with_derivative, uniform_grid,
                        constant_function)
from .odesolver import (ReturnSolution, tail_value, solve_return_function,
                        threshold_slope)
from .threshold import ThresholdResult, find_threshold, optimal_return
from .fixedpoint import (ValueSolution, contraction_modulus, apply_P,
                         solve_value_function, hjb_residual)
from .simulator import (StrategySpec, SimEstimate, DominanceReport,
                        simulate_return, simulate_path_ledger,
                        compare_strategies)
