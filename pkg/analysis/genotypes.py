"""
Genotype-by-environment selection.

Scores every genotype of the vocabulary under one location-year's
weather with a model trained without the maturity-group feature, keeps
the top k, and compares their mean predicted yield with the yields
actually observed there.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.constants import GENOTYPE_GROUP, TOP_K_GENOTYPES
from core.models import JoinedDataset, PerformanceRecord
from core.persistence import atomic_write_text
from features.matrix import build_scenario_matrix, normalize_matrix
from networks.base import YieldPredictor

logger = logging.getLogger(__name__)

RANKING_COLUMNS = ["location_id", "year", "rank", "genotype_id", "predicted_yield"]
GAP_COLUMNS = ["state", "year", "mean_gap"]


@dataclass(frozen=True)
class GenotypeRanking:
    """
    Top genotypes for one location-year.

    Attributes:
        location_id: Scenario location
        year: Scenario year
        state: State or province of the location
        ranked: (genotype_id, predicted yield), best first
        observed: Yields recorded at this location-year
    """
    location_id: str
    year: int
    state: str
    ranked: Tuple[Tuple[str, float], ...]
    observed: Tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return len(self.ranked)

    @property
    def genotypes(self) -> Tuple[str, ...]:
        return tuple(g for g, _ in self.ranked)

    @property
    def top_mean(self) -> float:
        """Mean predicted yield of the kept genotypes."""
        return float(np.mean([v for _, v in self.ranked]))

    @property
    def observed_mean(self) -> Optional[float]:
        return float(np.mean(self.observed)) if self.observed else None

    @property
    def gap(self) -> Optional[float]:
        """Top-k predicted mean minus observed mean."""
        observed = self.observed_mean
        return None if observed is None else self.top_mean - observed


def rank_predictions(genotypes: Sequence[str], predictions: np.ndarray,
                     k: int) -> Tuple[Tuple[str, float], ...]:
    """
    Top k by predicted yield; equal predictions keep vocabulary order.

    Example:
        >>> rank_predictions(["A", "B", "C"], np.array([50.0, 60.0, 40.0]), 2)
        (('B', 60.0), ('A', 50.0))
    """
    if not 1 <= k <= len(genotypes):
        raise ValueError(f"k must be 1-{len(genotypes)}, got {k}")
    order = np.argsort(-np.asarray(predictions, dtype=np.float64), kind="stable")[:k]
    return tuple((genotypes[i], float(predictions[i])) for i in order)


def select_top_genotypes(model: YieldPredictor, dataset: JoinedDataset, location_id: str,
                         year: int, k: int = TOP_K_GENOTYPES,
                         observed: Optional[Sequence[PerformanceRecord]] = None) -> GenotypeRanking:
    """
    Rank the whole genotype vocabulary at one location-year.

    Args:
        model: Predictor trained without MG, on genotype IDs
        dataset: Source of the weather series and observed yields
        location_id: Scenario location
        year: Scenario year
        k: Genotypes to keep
        observed: Records at this location-year (default: filtered from dataset)

    Returns:
        GenotypeRanking of length k

    Raises:
        DatasetError: No weather for (location_id, year)
        ValueError: k outside 1..vocabulary size, or a model that encodes MG
    """
    series = dataset.weather_for(location_id, year)
    vocabulary = model.schema.vocabulary(GENOTYPE_GROUP)
    if not 1 <= k <= len(vocabulary):
        raise ValueError(f"k must be 1-{len(vocabulary)} (genotype vocabulary size), got {k}")

    here = observed if observed is not None else [
        r for r in dataset.records if r.location_id == location_id and r.year == year]
    state = here[0].state if here else _location_state(dataset.records, location_id)
    scenario = build_scenario_matrix(model.schema, series, state=state)
    if model.normalizer is not None:
        scenario = normalize_matrix(scenario, model.normalizer)
    predictions = model.predict(scenario)
    ranking = GenotypeRanking(
        location_id=location_id,
        year=year,
        state=state,
        ranked=rank_predictions(vocabulary, predictions, k),
        observed=tuple(r.yield_value for r in here),
    )
    logger.debug("%s/%d: top-%d mean %.2f over %d genotypes",
                 location_id, year, k, ranking.top_mean, len(vocabulary))
    return ranking


def select_all(model: YieldPredictor, dataset: JoinedDataset,
               k: int = TOP_K_GENOTYPES) -> List[GenotypeRanking]:
    """Rankings for every observed location-year, sorted by (location, year)."""
    by_key: Dict[Tuple[str, int], List[PerformanceRecord]] = {}
    for r in dataset.records:
        by_key.setdefault(r.weather_key, []).append(r)
    rankings = [select_top_genotypes(model, dataset, loc, year, k, by_key[(loc, year)])
                for loc, year in sorted(by_key)]
    logger.info("Ranked %d location-years with %s", len(rankings), model.label)
    return rankings


def genotype_gap_report(rankings: Iterable[GenotypeRanking],
                        records: Optional[Iterable[PerformanceRecord]] = None) -> pd.DataFrame:
    """
    Mean yield gap per state and year.

    For each location-year the gap is the top-k predicted mean minus the
    mean of all observed yields there; gaps are then averaged over the
    locations of each state and year.

    Args:
        rankings: One ranking per location-year
        records: Observed records; when given, they replace each
            ranking's stored observations

    Returns:
        DataFrame with columns state, year, mean_gap sorted by state, year
    """
    observed: Dict[Tuple[str, int], List[float]] = {}
    if records is not None:
        for r in records:
            observed.setdefault((r.location_id, r.year), []).append(r.yield_value)

    rows = []
    for ranking in rankings:
        values = observed.get((ranking.location_id, ranking.year), ()) if records is not None \
            else ranking.observed
        if not values:
            logger.warning("No observed yields at %s/%d; left out of the gap report",
                           ranking.location_id, ranking.year)
            continue
        rows.append({"state": ranking.state, "year": ranking.year,
                     "gap": ranking.top_mean - float(np.mean(values))})
    if not rows:
        return pd.DataFrame(columns=GAP_COLUMNS)
    frame = pd.DataFrame(rows)
    table = frame.groupby(["state", "year"], sort=True)["gap"].mean().reset_index()
    return table.rename(columns={"gap": "mean_gap"})[GAP_COLUMNS]


def write_rankings_csv(rankings: Iterable[GenotypeRanking], path: Union[str, Path]) -> Path:
    """Write `location_id,year,rank,genotype_id,predicted_yield`."""
    frame = pd.DataFrame(
        [{"location_id": r.location_id, "year": r.year, "rank": rank,
          "genotype_id": genotype, "predicted_yield": value}
         for r in rankings for rank, (genotype, value) in enumerate(r.ranked, start=1)],
        columns=RANKING_COLUMNS,
    )
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.4f",
                                                lineterminator="\n"))


def write_gap_csv(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write `state,year,mean_gap`."""
    return atomic_write_text(path, table.to_csv(index=False, float_format="%.4f",
                                                lineterminator="\n"))


def _location_state(records: Sequence[PerformanceRecord], location_id: str) -> str:
    for r in records:
        if r.location_id == location_id:
            return r.state
    return ""
