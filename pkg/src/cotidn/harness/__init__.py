from .config import ActivationConfig, ExperimentConfig, HttpConfig, ScenarioTemplate
from .plots import CSV_HEADER, emit_plot_data, read_sweep_csv, sweep_csv, sweep_svg
from .runner import RunRecord, build_scenario, classify_intent, run_single
from .sweep import SweepResult, SweepRow, run_sweep
from .training import compare_activation, ensure_policy, train_activation_cmd, train_policy

__all__ = [
    "CSV_HEADER",
    "ActivationConfig",
    "ExperimentConfig",
    "HttpConfig",
    "RunRecord",
    "ScenarioTemplate",
    "SweepResult",
    "SweepRow",
    "build_scenario",
    "classify_intent",
    "compare_activation",
    "emit_plot_data",
    "ensure_policy",
    "read_sweep_csv",
    "run_single",
    "run_sweep",
    "sweep_csv",
    "sweep_svg",
    "train_activation_cmd",
    "train_policy",
]
