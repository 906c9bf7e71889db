"""
Weather downsampling: 214 daily values -> 53 four-day period means.

Days 1-208 form 52 four-day windows. The remaining 6 days are either
merged into a final 6-day window ("merge") or the season is cut to
212 days so every window has 4 days ("truncate").
"""
import numpy as np

from core.constants import (
    DAYS_PER_PERIOD,
    N_PERIODS,
    SEASON_DAYS,
    TAIL_MERGE,
    TAIL_POLICIES,
    TAIL_TRUNCATE,
)
from core.errors import ShapeError

_FULL_WINDOWS = (SEASON_DAYS - 6) // DAYS_PER_PERIOD  # 52


def window_lengths(tail: str = TAIL_MERGE) -> np.ndarray:
    """
    Number of days averaged into each of the 53 periods.

    Args:
        tail: Tail policy ("merge" or "truncate")

    Returns:
        Integer array of length 53
    """
    _check_tail(tail)
    lengths = np.full(N_PERIODS, DAYS_PER_PERIOD, dtype=np.int64)
    if tail == TAIL_MERGE:
        lengths[-1] = SEASON_DAYS - _FULL_WINDOWS * DAYS_PER_PERIOD
    return lengths


def downsample_weather(series: np.ndarray, tail: str = TAIL_MERGE) -> np.ndarray:
    """
    Average daily values into 53 periods along the last axis.

    Works on a single 214-vector or on any stack of them, e.g. a
    (7, 214) WeatherSeries matrix or an (n, 7, 214) batch.

    Args:
        series: Array whose last axis has length 214
        tail: Tail policy ("merge" or "truncate")

    Returns:
        Array with the last axis reduced to 53

    Raises:
        ShapeError: If the last axis is not 214 long

    Example:
        >>> days = np.zeros(214); days[:8] = np.arange(1, 9)
        >>> downsample_weather(days)[:2]
        array([2.5, 6.5])
    """
    _check_tail(tail)
    values = np.asarray(series, dtype=np.float64)
    if values.ndim == 0 or values.shape[-1] != SEASON_DAYS:
        raise ShapeError("downsample_weather", (SEASON_DAYS,), values.shape)

    lead = values.shape[:-1]
    if tail == TAIL_TRUNCATE:
        usable = values[..., : N_PERIODS * DAYS_PER_PERIOD]
        return usable.reshape(*lead, N_PERIODS, DAYS_PER_PERIOD).mean(axis=-1)

    split = _FULL_WINDOWS * DAYS_PER_PERIOD
    head = values[..., :split].reshape(*lead, _FULL_WINDOWS, DAYS_PER_PERIOD).mean(axis=-1)
    tail_mean = values[..., split:].mean(axis=-1, keepdims=True)
    return np.concatenate([head, tail_mean], axis=-1)


def _check_tail(tail: str):
    if tail not in TAIL_POLICIES:
        raise ValueError(f"Unknown tail policy: {tail}. Expected one of {TAIL_POLICIES}")
