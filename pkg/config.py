# config.py
# © 2025 Colt McVey
# Central configuration for the gossip dual-averaging simulator.

APP_NAME = "gossipda"
APP_DESCRIPTION = "Distributed dual averaging with gossip-based mini-batch gradient averaging"
APP_VERSION = "1.0.0"
APP_COPYRIGHT = "© 2025 Colt McVey"

# Column order of every per-round CSV written by the runner.
CSV_COLUMNS = [
    "run_id", "n", "b", "mu", "k", "round", "samples_seen",
    "regret_total", "regret_per_sample", "delta_t", "gap_est", "runtime_units",
]

CSV_FLOAT_FORMAT = "%.12g"

# Regret ratios between network sizes compare regret per data point.
RATIO_COLUMN = "regret_per_sample"

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

# Numerical tolerances shared across modules.
STOCHASTIC_TOL = 1e-12
FEASIBILITY_TOL = 1e-9
DENSE_EIGEN_LIMIT = 256
MAX_GRAPH_RETRIES = 100
