"""
Shared fixtures: small synthetic datasets and a ground-truth predictor.
"""
from typing import Optional

import numpy as np
import pytest

from core.constants import N_PERIODS, WEATHER_VARIABLES
from core.errors import ShapeError
from dataset.synthetic import (
    CATEGORICAL_TERM,
    WEATHER_TERM,
    SignalTerm,
    SyntheticConfig,
    generate_synthetic,
)
from features.matrix import FeatureMatrix, FeatureSchema, PreprocessOptions, prepare_features
from features.normalize import Normalizer


class LinearPredictor:
    """Predicts values @ coefficients + intercept on a fixed layout."""

    def __init__(self, schema: FeatureSchema, normalizer: Optional[Normalizer],
                 coefficients: np.ndarray, intercept: float, label: str = "oracle"):
        self.schema = schema
        self.normalizer = normalizer
        self.coefficients = np.asarray(coefficients, dtype=np.float64)
        self.intercept = float(intercept)
        self.label = label

    def predict(self, matrix: FeatureMatrix) -> np.ndarray:
        if matrix.values.shape[1] != self.coefficients.size:
            raise ShapeError(self.label, self.coefficients.size, matrix.values.shape[1])
        return matrix.values @ self.coefficients + self.intercept


def oracle_predictor(dataset, prepared, label: str = "oracle") -> LinearPredictor:
    """
    Exact noise-free yield function of a synthetic dataset, expressed on
    the normalized feature columns.

    Supports per-period weather terms (unsquared) and categorical terms.
    """
    truth = dataset.metadata["ground_truth"]
    schema = prepared.schema
    normalizer = prepared.normalizer
    coefficients = np.zeros(schema.n_columns)
    intercept = truth["intercept"]
    for data in truth["terms"]:
        term = SignalTerm.from_dict(data)
        if term.kind == WEATHER_TERM:
            assert term.period is not None and not term.square
            column = schema.weather_column(term.name, term.period)
            k = column - schema.n_others
            coefficients[column] = term.coefficient * normalizer.std[k]
            intercept += term.coefficient * normalizer.mean[k]
        else:
            start, _ = schema.column_groups[term.name]
            effects = truth["effects"][term.name]
            for offset, category in enumerate(schema.vocabulary(term.name)):
                coefficients[start + offset] = effects[category]
    return LinearPredictor(schema, normalizer, coefficients, intercept, label)


@pytest.fixture
def small_config():
    """5 locations x 3 years x 10 genotypes, 2 MGs, full cross (150 records)."""
    return SyntheticConfig(n_locations=5, n_years=3, n_genotypes=10, n_maturity_groups=2,
                           n_states=2, noise=0.0)


@pytest.fixture
def small_dataset(small_config):
    return generate_synthetic(small_config, seed=7)


@pytest.fixture
def small_prepared(small_dataset):
    return prepare_features(small_dataset, PreprocessOptions(), seed=0)


@pytest.fixture
def planted_dataset():
    """Yield depends only on AP at period 29 and on the location."""
    config = SyntheticConfig(
        n_locations=8, n_years=4, n_genotypes=10, n_maturity_groups=2, n_states=3,
        noise=0.0, intercept=60.0,
        signal=(
            SignalTerm(WEATHER_TERM, "AP", coefficient=3.0, period=29),
            SignalTerm(CATEGORICAL_TERM, "location", coefficient=4.0),
        ),
    )
    return generate_synthetic(config, seed=11)


@pytest.fixture
def planted_prepared(planted_dataset):
    return prepare_features(planted_dataset, PreprocessOptions(), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def weather_block(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random (n, 371) standardized weather rows."""
    return rng.standard_normal((n, len(WEATHER_VARIABLES) * N_PERIODS))
