"""Slotted-time simulation and Lyapunov-style online control for
energy-harvesting multi-hop wireless networks with imperfect batteries."""

from .analysis import (ComparisonRow, GapBound, compare_algorithms, gap_bound,
                       gap_grid_oracle, make_controller, minimize_gap)
from .baselines import EsaController, EsaParams, GreedyController, esa_params, esa_step, greedy_step
from .config import ConfigError, SimConfig, load_config, paper_config_path
from .controller import (LinkWeights, ProposedController, SolverError, admit_data,
                         allocate_power, allocate_with_prices, compute_weights, schedule, step)
from .model import (AlgorithmParams, EnvSample, InvariantViolation, Log1pUtility,
                    NetState, NetworkSpec, ParamWindow, SlotDecision, SystemParams,
                    UtilitySpec, ValidationReport, algorithm_params, compute_transfers,
                    param_window, theta_for, update_queues, validate_system)
from .ratepower import (PropertyReport, RatePowerModel, check_properties, rate,
                        sensitivity_constants)
from .simulator import EnsembleSummary, EnvProcess, RunTrace, run, run_ensemble

__version__ = "0.1.0"
