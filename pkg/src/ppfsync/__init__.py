"""Leader-follower synchronization with prescribed performance funnels and
neuro-adaptive distributed control."""
from .approximator import AdaptiveNetwork, BasisKind, BasisSpec, basis_eval, grid_rbf, predict
from .controller import agent_step, control_law, global_error, local_error, sync_error
from .engine import (NonFiniteError, SimLog, chattering_metric, compare_report, envelope_audit, rk4_step,
                     run_pair, run_scenario, write_outputs)
from .graph import (BoundInputs, Digraph, GainReport, GraphError, from_edges, gain_check, laplacian,
                    lemma1_pq, m_matrix_certificate, pinned_laplacian)
from .plants import LeaderKind, LeaderSpec, PlantSuite, get_suite, register_suite
from .ppf import PerformanceFunction, TransformConfig, Variant, check_envelope, rho, transform
from .scenario import ConfigError, ScenarioConfig, load_config, load_text, preset_names

__version__ = "0.1.0"

__all__ = [
    "AdaptiveNetwork", "BasisKind", "BasisSpec", "BoundInputs", "ConfigError", "Digraph", "GainReport",
    "GraphError", "LeaderKind", "LeaderSpec", "NonFiniteError", "PerformanceFunction", "PlantSuite",
    "ScenarioConfig", "SimLog", "TransformConfig", "Variant", "agent_step", "basis_eval", "chattering_metric",
    "check_envelope", "compare_report", "control_law", "envelope_audit", "from_edges", "gain_check",
    "get_suite", "global_error", "grid_rbf", "laplacian", "lemma1_pq", "load_config", "load_text",
    "local_error", "m_matrix_certificate", "pinned_laplacian", "predict", "preset_names", "register_suite",
    "rho", "rk4_step", "run_pair", "run_scenario", "sync_error", "transform", "write_outputs",
]
