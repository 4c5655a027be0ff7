"""Wake-up-radio UAV clustering MAC schemes: closed-form model, simulator,
and the harness that cross-validates the two."""

from .analytic import (AlphaSolution, SchemeMetrics, ServiceProfile,
                       evaluate_scheme, scm_gamma, solve_alpha)
from .config import (ConfigError, MacScheme, PowerTable, ProtocolConfig,
                     TimingTable, default_config, derive_power,
                     derive_timing, dumps_config, load_config, loads_config)
from .metrics import (ComparisonReport, QueueStats, RoundStats, Tolerances,
                      compare, estimate_queue_stats, estimate_round_stats)
from .protocol import run_queue_mode, run_round_mode

__version__ = "0.1.0"

__all__ = [
    "AlphaSolution", "SchemeMetrics", "ServiceProfile", "evaluate_scheme",
    "scm_gamma", "solve_alpha",
    "ConfigError", "MacScheme", "PowerTable", "ProtocolConfig", "TimingTable",
    "default_config", "derive_power", "derive_timing", "dumps_config",
    "load_config", "loads_config",
    "ComparisonReport", "QueueStats", "RoundStats", "Tolerances", "compare",
    "estimate_queue_stats", "estimate_round_stats",
    "run_queue_mode", "run_round_mode",
    "__version__",
]
