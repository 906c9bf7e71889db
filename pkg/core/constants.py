"""
Domain constants and small helpers.

Weather variable names, season geometry, categorical group names,
and the training defaults used by the two network architectures.
"""
import math

# Weather variables in canonical row order
WEATHER_VARIABLES = ("ADNI", "AP", "ARH", "MDNI", "MaxSur", "MinSur", "AvgSur")

# Growing season: April 1st to October 31st
SEASON_DAYS = 214
DAYS_PER_PERIOD = 4
N_PERIODS = 53
N_WEATHER_FEATURES = len(WEATHER_VARIABLES) * N_PERIODS  # 371

# Tail-window policies for 214 -> 53 downsampling
TAIL_MERGE = "merge"
TAIL_TRUNCATE = "truncate"
TAIL_POLICIES = (TAIL_MERGE, TAIL_TRUNCATE)

# Categorical feature groups, in column order
LOCATION_GROUP = "location"
MG_GROUP = "MG"
YEAR_GROUP = "year"
GENOTYPE_GROUP = "genotype"
CATEGORICAL_GROUPS = (LOCATION_GROUP, MG_GROUP, YEAR_GROUP, GENOTYPE_GROUP)

GENOTYPE_ENCODINGS = ("id", "cluster")

# Records CSV contract
RECORD_COLUMNS = ("location_id", "year", "genotype_id", "maturity_group", "state", "yield")
OPTIONAL_RECORD_COLUMNS = ("genotype_cluster",)
WEATHER_COLUMNS = ("location_id", "year", "variable", "day", "value")

# Yield range sanity bounds (bushels per acre)
YIELD_MIN = 0.0
YEAR_MIN = 1900
YEAR_MAX = 2100

# Split ratios (train / validation / test)
DEFAULT_SPLIT_RATIOS = (0.8, 0.1, 0.1)

# Optimizer schedule
BASE_LEARNING_RATE = 0.0004
LR_DECAY_RATE = 0.96
LR_DECAY_STEPS = 2500
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# Full-scale training budget
FULL_SCALE_ITERATIONS = 800_000
FULL_SCALE_BATCH_SIZE = 48

# Dropout ratios per architecture, by placement
CNN_DNN_DROPOUT = {"after_cnn_dense": 0.5, "after_others_dense": 0.7, "final": 0.2}
CNN_LSTM_DNN_DROPOUT = {
    "after_cnn": 0.5,
    "at_lstm": 0.5,
    "after_others_dense": 0.7,
    "final": 0.2,
}
LSTM_UNITS = 128

# Baselines
LASSO_ALPHA = 0.0001

# Genotype selection
TOP_K_GENOTYPES = 10

# Analysis
IMPORTANCE_REPETITIONS = 5

THREADS_ENV_VAR = "YIELDCAST_THREADS"


def period_to_week(period: int) -> int:
    """
    Convert a 1-based 4-day period index to its approximate season week.

    Args:
        period: Period index (1-53)

    Returns:
        Approximate week number, ceil(period * 4 / 7)

    Example:
        >>> period_to_week(29)
        17
        >>> period_to_week(25)
        15
    """
    if not 1 <= period <= N_PERIODS:
        raise ValueError(f"Period must be 1-{N_PERIODS}, got {period}")
    return math.ceil(period * DAYS_PER_PERIOD / 7)


def weather_index(variable: str) -> int:
    """Row index of a weather variable in the canonical order."""
    try:
        return WEATHER_VARIABLES.index(variable)
    except ValueError:
        raise ValueError(
            f"Unknown weather variable: {variable}. Expected one of {WEATHER_VARIABLES}"
        ) from None
