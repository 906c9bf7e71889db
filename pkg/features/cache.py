"""
Feature cache: a PreparedFeatures bundle stored as a versioned artifact.

The header carries the column manifest, row keys, states and the
content hash; the arrays carry the normalized matrix, targets, split
indices and normalizer statistics.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np

from core.errors import ManifestMismatchError
from core.persistence import ArtifactFile
from features.matrix import FeatureMatrix, FeatureSchema, PreparedFeatures
from features.normalize import Normalizer
from features.split import SplitIndices

logger = logging.getLogger(__name__)

CACHE_KIND = "features"


class FeatureCache:
    """Reads and writes feature caches."""

    @staticmethod
    def save(prepared: PreparedFeatures, path: Union[str, Path]) -> Path:
        """
        Save prepared features.

        Args:
            prepared: Bundle to store
            path: Destination (.msgpack)

        Returns:
            Path written
        """
        matrix = prepared.matrix
        header = {
            "schema": matrix.schema.to_dict(),
            "manifest_hash": matrix.schema.manifest_hash(),
            "content_hash": matrix.content_hash(),
            "row_keys": [list(key) for key in matrix.row_keys],
            "states": list(matrix.states),
            "split_seed": prepared.split.seed,
            "normalizer_warnings": list(prepared.normalizer.warnings),
        }
        arrays = {
            "values": matrix.values,
            "targets": matrix.targets,
            "train": prepared.split.train,
            "validation": prepared.split.validation,
            "test": prepared.split.test,
            "mean": prepared.normalizer.mean,
            "std": prepared.normalizer.std,
        }
        written = ArtifactFile.save(path, CACHE_KIND, header, arrays)
        logger.info("Saved feature cache %s (%d rows, hash %s)",
                    written, matrix.n_rows, header["content_hash"][:12])
        return written

    @staticmethod
    def load(path: Union[str, Path]) -> PreparedFeatures:
        """
        Load prepared features and verify the stored content hash.

        Raises:
            IOError: If the file is missing
            ValueError: Wrong format or version
            ManifestMismatchError: Stored hash does not match the stored data
        """
        header, arrays = ArtifactFile.load(path, CACHE_KIND)
        matrix = FeatureMatrix(
            values=arrays["values"],
            targets=arrays["targets"],
            row_keys=tuple((k[0], int(k[1]), k[2]) for k in header["row_keys"]),
            states=tuple(header["states"]),
            schema=FeatureSchema.from_dict(header["schema"]),
        )
        if matrix.content_hash() != header["content_hash"]:
            raise ManifestMismatchError(
                f"Feature cache {path} is corrupt: content hash does not match its data"
            )
        return PreparedFeatures(
            matrix=matrix,
            split=SplitIndices(
                train=arrays["train"].astype(np.int64),
                validation=arrays["validation"].astype(np.int64),
                test=arrays["test"].astype(np.int64),
                seed=int(header["split_seed"]),
            ),
            normalizer=Normalizer(
                mean=arrays["mean"],
                std=arrays["std"],
                warnings=tuple(header.get("normalizer_warnings", ())),
            ),
        )
