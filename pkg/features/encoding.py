"""
One-hot encoding of categorical columns against frozen vocabularies.
"""
from typing import Optional, Sequence

import numpy as np

from core.errors import DatasetError


def one_hot_encode(column: Sequence[Optional[str]], vocabulary: Sequence[str],
                   name: str = "column") -> np.ndarray:
    """
    Encode categorical values as binary indicator columns.

    Args:
        column: Categorical value per row
        vocabulary: Ordered categories; output column k is vocabulary[k]
        name: Column name used in error messages

    Returns:
        (len(column), len(vocabulary)) float64 matrix with exactly one 1 per row

    Raises:
        DatasetError: If a value is not in the vocabulary

    Example:
        >>> one_hot_encode(["b"], ["a", "b", "c"])
        array([[0., 1., 0.]])
    """
    index = {category: k for k, category in enumerate(vocabulary)}
    if len(index) != len(vocabulary):
        raise DatasetError(f"Vocabulary for {name} contains duplicates")
    codes = np.empty(len(column), dtype=np.int64)
    for i, value in enumerate(column):
        try:
            codes[i] = index[value]
        except KeyError:
            raise DatasetError(
                f"Value {value!r} in column {name} (row {i + 1}) is not in the vocabulary"
            ) from None
    encoded = np.zeros((len(column), len(vocabulary)), dtype=np.float64)
    encoded[np.arange(len(column)), codes] = 1.0
    return encoded
