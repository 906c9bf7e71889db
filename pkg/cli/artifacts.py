"""
File layout of a run directory.
"""
from pathlib import Path
from typing import Union


class RunArtifacts:
    """Paths every command reads from or writes to under one output directory."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    @property
    def dataset(self) -> Path:
        return self.directory / "dataset.msgpack"

    @property
    def validation_report(self) -> Path:
        return self.directory / "validation.jsonl"

    @property
    def summary(self) -> Path:
        return self.directory / "summary.json"

    @property
    def records_csv(self) -> Path:
        return self.directory / "records.csv"

    @property
    def weather_csv(self) -> Path:
        return self.directory / "weather.csv"

    def features(self, exclude_mg: bool = False) -> Path:
        return self.directory / ("features_nomg.msgpack" if exclude_mg else "features.msgpack")

    def checkpoint(self, label: str) -> Path:
        return self.directory / "checkpoints" / f"{label}.ckpt"

    def history(self, label: str) -> Path:
        return self.directory / f"history_{label}.csv"

    @property
    def weights(self) -> Path:
        return self.directory / "gem_weights.json"

    @property
    def lasso(self) -> Path:
        return self.directory / "lasso.json"

    @property
    def metrics(self) -> Path:
        return self.directory / "metrics.csv"

    @property
    def improvement(self) -> Path:
        return self.directory / "improvement.csv"

    def regions(self, label: str) -> Path:
        return self.directory / f"regions_{label}.csv"

    @property
    def importance(self) -> Path:
        return self.directory / "importance.csv"

    @property
    def importance_periods(self) -> Path:
        return self.directory / "importance_periods.csv"

    @property
    def rankings(self) -> Path:
        return self.directory / "rankings.csv"

    @property
    def genotype_gaps(self) -> Path:
        return self.directory / "genotype_gaps.csv"

    @staticmethod
    def require(path: Path, produced_by: str) -> Path:
        """
        Fail unless an upstream artifact exists.

        Raises:
            IOError: Naming the missing file and the command that writes it
        """
        if not path.exists():
            raise IOError(f"Missing {path.name} ({path}); run `yieldcast {produced_by}` first")
        return path
