"""
Binary artifact I/O.

File format (all artifacts):
- MessagePack map: format tag, version, JSON-compatible header, raw arrays
- Arrays are stored as little-endian bytes with dtype and shape, so
  parameters and feature matrices round-trip bit-exactly
- Writes are atomic (temp file in the target directory + rename)
"""
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import msgpack
import numpy as np

from core.models import JoinedDataset

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1.0.0"

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """
    Write bytes to path atomically.

    Args:
        path: Destination file path
        data: File contents

    Returns:
        Resolved destination path

    Raises:
        IOError: If the write fails
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise IOError(f"Failed to write {path}: {e}") from e
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write UTF-8 text atomically (newlines kept as given)."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path: PathLike, payload: Any) -> Path:
    """Write a JSON document atomically with stable key order."""
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _encode_array(array: np.ndarray) -> Dict[str, Any]:
    array = np.ascontiguousarray(array)
    dtype = array.dtype.newbyteorder("<") if array.dtype.byteorder == ">" else array.dtype
    return {
        "dtype": dtype.str,
        "shape": list(array.shape),
        "data": array.astype(dtype, copy=False).tobytes(),
    }


def _decode_array(entry: Dict[str, Any]) -> np.ndarray:
    array = np.frombuffer(entry["data"], dtype=np.dtype(entry["dtype"]))
    return array.reshape(entry["shape"]).copy()


class ArtifactFile:
    """
    Versioned container for a header dict plus named numpy arrays.

    Used for feature caches (kind "features") and network checkpoints
    (kind "checkpoint").
    """

    @staticmethod
    def save(path: PathLike, kind: str, header: Dict[str, Any],
             arrays: Dict[str, np.ndarray]) -> Path:
        """
        Save an artifact.

        Args:
            path: Destination file path
            kind: Format tag checked on load
            header: JSON-compatible metadata
            arrays: Named arrays stored bit-exactly

        Returns:
            Path written

        Raises:
            IOError: If serialization or writing fails
        """
        try:
            document = {
                "format": kind,
                "version": FORMAT_VERSION,
                "header": header,
                "arrays": {name: _encode_array(a) for name, a in arrays.items()},
            }
            packed = msgpack.packb(document, use_bin_type=True)
        except (TypeError, ValueError) as e:
            raise IOError(f"Failed to serialize {kind} artifact for {path}: {e}") from e
        written = atomic_write_bytes(path, packed)
        logger.debug("Saved %s artifact %s (%d bytes)", kind, written, len(packed))
        return written

    @staticmethod
    def load(path: PathLike, kind: str) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
        """
        Load an artifact.

        Args:
            path: Source file path
            kind: Expected format tag

        Returns:
            (header, arrays)

        Raises:
            IOError: If the file is missing or unreadable
            ValueError: If the format tag or major version differs
        """
        path = Path(path)
        if not path.exists():
            raise IOError(f"Artifact not found: {path}")
        try:
            with open(path, "rb") as f:
                document = msgpack.unpackb(f.read(), raw=False)
        except (msgpack.exceptions.ExtraData, msgpack.exceptions.UnpackException, ValueError) as e:
            raise ValueError(f"Invalid artifact file {path}: {e}") from e

        if document.get("format") != kind:
            raise ValueError(f"{path} is a {document.get('format')!r} artifact, expected {kind!r}")
        version = document.get("version", "unknown")
        if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
            raise ValueError(f"Incompatible artifact version: {version}. Expected 1.x")

        arrays = {name: _decode_array(e) for name, e in document["arrays"].items()}
        return document["header"], arrays


class DatasetFile:
    """Handles the ingested-dataset cache written by the ingest command."""

    @staticmethod
    def save(dataset: JoinedDataset, path: PathLike) -> Path:
        """Save a joined dataset (records, weather, schema, report)."""
        try:
            packed = msgpack.packb(dataset.to_dict(), use_bin_type=True)
        except (TypeError, ValueError) as e:
            raise IOError(f"Failed to serialize dataset for {path}: {e}") from e
        return atomic_write_bytes(path, packed)

    @staticmethod
    def load(path: PathLike) -> JoinedDataset:
        """
        Load a joined dataset.

        Raises:
            IOError: If the file is missing
            ValueError: If the file format is invalid
        """
        path = Path(path)
        if not path.exists():
            raise IOError(f"Dataset cache not found: {path}")
        with open(path, "rb") as f:
            try:
                data = msgpack.unpackb(f.read(), raw=False)
            except (msgpack.exceptions.ExtraData, ValueError) as e:
                raise ValueError(f"Invalid dataset cache {path}: {e}") from e
        if not str(data.get("version", "")).startswith("1."):
            raise ValueError(f"Incompatible dataset cache version: {data.get('version')}")
        return JoinedDataset.from_dict(data)
