"""Euler-type simulation and pricing for the rough Heston model."""
from .grid import IncrementStream, TimeGrid, make_uniform_grid, sample_increments
from .kernels import (ExponentiallyDamped, FractionalPowerLaw, Kernel, KernelWeights, LogKernel,
                      ProductKernel, SumKernel, exact_linear_drift_convolution,
                      precompute_weights, verify_regularity)
from .model import EXPERIMENT_PARAMS, ModelParams, PathFault
from .monte_carlo import McConfig, McEstimate, SimulationFault, convergence_table, price
from .payoffs import AsianCall, EuropeanCall, LookbackCall, VarianceCall, VarianceSwap
from .reference import (char_fn_logS, char_fn_X, expected_integrated_variance,
                        fourier_call_price)
from .scheme_v import VPath, simulate_v_path
from .scheme_x import XPath, quadratic_variation_check, simulate_x_path

__version__ = "0.1.0"
