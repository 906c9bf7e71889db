"""
Pipeline commands.

Each command reads the artifacts its upstream commands wrote into the
run directory, writes its own atomically, and returns a one-line
summary for the console.
"""
import argparse
import logging
from abc import ABC, abstractmethod
from typing import Dict, List

from core.config import RunConfig, deep_merge, thread_limit
from core.persistence import DatasetFile, atomic_write_json
from dataset.loaders import (
    load_performance_records,
    load_weather,
    write_records_csv,
    write_weather_csv,
)
from dataset.synthetic import SyntheticConfig, generate_synthetic
from dataset.validation import join_and_validate, summarize, write_report_jsonl
from ensemble.gem import EnsembleModel, fit_ensemble, load_weights_json, write_weights_json
from baselines.lasso import LassoPredictor
from evaluation.metrics import (
    evaluate_predictions,
    relative_improvement,
    write_improvement_csv,
    write_metrics_csv,
)
from evaluation.regions import aggregate_by_region, write_region_csv
from analysis.genotypes import genotype_gap_report, select_all, write_gap_csv, write_rankings_csv
from analysis.importance import (
    per_period_importance,
    permutation_importance,
    write_importance_csv,
    write_period_csv,
)
from cli.artifacts import RunArtifacts
from features.cache import FeatureCache
from features.matrix import PreparedFeatures, PreprocessOptions, prepare_features
from networks.base import ArchitectureConfig
from networks.registry import get_registry
from networks.trainer import CheckpointFile, TrainConfig, TrainedModel, train, write_history_csv

logger = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")
NOMG_SUFFIX = "-nomg"


class Command(ABC):
    """Base class for pipeline commands."""

    name: str = ""
    help: str = ""

    def add_arguments(self, parser: argparse.ArgumentParser):
        """Register command-specific flags."""

    @abstractmethod
    def execute(self, args: argparse.Namespace, config: RunConfig) -> str:
        """
        Run the command.

        Args:
            args: Parsed command line
            config: Run config with flag overrides applied

        Returns:
            One-line summary
        """
        raise NotImplementedError()


def _load_features(artifacts: RunArtifacts, exclude_mg: bool = False) -> PreparedFeatures:
    path = RunArtifacts.require(artifacts.features(exclude_mg), "preprocess")
    return FeatureCache.load(path)


def _load_model(artifacts: RunArtifacts, label: str, prepared: PreparedFeatures) -> TrainedModel:
    arch = label[:-len(NOMG_SUFFIX)] if label.endswith(NOMG_SUFFIX) else label
    path = RunArtifacts.require(artifacts.checkpoint(label), f"train --arch {arch}")
    return CheckpointFile.load(path, expected_hash=prepared.content_hash())


def _load_ensemble(artifacts: RunArtifacts, prepared: PreparedFeatures) -> EnsembleModel:
    weights = load_weights_json(RunArtifacts.require(artifacts.weights, "ensemble"))
    members = [_load_model(artifacts, label, prepared) for label in weights.labels]
    return EnsembleModel(members, weights)


def architecture_config(config: RunConfig, arch_id: str) -> ArchitectureConfig:
    """Architecture defaults overlaid with the run config's section for it."""
    registry = get_registry()
    name = registry.get_metadata(arch_id).name
    merged = deep_merge(registry.default_config(arch_id).to_dict(),
                        config.architectures.get(name, {}))
    merged["seed"] = config.stage_seed("init")
    return ArchitectureConfig.from_dict(merged)


def train_config(config: RunConfig) -> TrainConfig:
    """Training section with the derived training seed."""
    try:
        return TrainConfig.from_dict({**config.training, "seed": config.stage_seed("train")})
    except TypeError as e:
        raise ValueError(f"Invalid keys in config section 'training': {e}") from e


class IngestCommand(Command):
    """Load (or generate) the dataset, validate it, and cache it."""

    name = "ingest"
    help = "load records and weather, validate, and cache the joined dataset"

    def execute(self, args, config):
        artifacts = RunArtifacts(config.output_dir)
        if config.is_synthetic:
            synthetic = SyntheticConfig.from_dict(config.synthetic)
            dataset = generate_synthetic(synthetic, config.stage_seed("synthetic"))
            write_records_csv(dataset.records, artifacts.records_csv)
            write_weather_csv(dataset.weather, artifacts.weather_csv)
            source = "synthetic"
        else:
            records = load_performance_records(config.data.records)
            weather = load_weather(config.data.weather)
            dataset = join_and_validate(records, weather, strict=config.data.strict)
            source = config.data.records

        DatasetFile.save(dataset, artifacts.dataset)
        write_report_jsonl(dataset.report, artifacts.validation_report)
        atomic_write_json(artifacts.summary, summarize(dataset))
        return (f"[INGEST] {len(dataset)} records, {len(dataset.weather)} weather series, "
                f"{len(dataset.report)} issues ({source})")


class PreprocessCommand(Command):
    """Encode, split and normalize; writes the full and the no-MG caches."""

    name = "preprocess"
    help = "build normalized feature caches (with and without the MG feature)"

    def execute(self, args, config):
        artifacts = RunArtifacts(config.output_dir)
        dataset = DatasetFile.load(RunArtifacts.require(artifacts.dataset, "ingest"))
        settings = config.preprocess
        seed = config.stage_seed("split")

        full = prepare_features(
            dataset,
            PreprocessOptions(include_mg=True, genotype_encoding=settings.genotype_encoding,
                              weather_tail=settings.weather_tail),
            seed=seed, ratios=settings.split_ratios)
        # scenario rows for genotype selection need genotype IDs and no MG
        nomg = prepare_features(
            dataset,
            PreprocessOptions(include_mg=False, genotype_encoding="id",
                              weather_tail=settings.weather_tail),
            seed=seed, ratios=settings.split_ratios)
        FeatureCache.save(full, artifacts.features())
        FeatureCache.save(nomg, artifacts.features(exclude_mg=True))
        sizes = full.split.sizes
        return (f"[PREPROCESS] {full.matrix.n_rows} rows x {full.schema.n_columns} columns "
                f"(no-MG {nomg.schema.n_columns}), split {sizes[0]}/{sizes[1]}/{sizes[2]}")


class TrainCommand(Command):
    """Train one architecture and keep its best validation checkpoint."""

    name = "train"
    help = "train one network architecture"

    def add_arguments(self, parser):
        parser.add_argument("--arch", required=True,
                            choices=get_registry().names(),
                            help="architecture to train")
        parser.add_argument("--exclude-mg", action="store_true",
                            help="train on the no-MG features (genotype selection model)")

    def execute(self, args, config):
        artifacts = RunArtifacts(config.output_dir)
        prepared = _load_features(artifacts, args.exclude_mg)
        registry = get_registry()
        arch_id = registry.resolve(args.arch)
        label = registry.get_metadata(arch_id).name + (NOMG_SUFFIX if args.exclude_mg else "")

        train_rows = prepared.train
        if args.exclude_mg and config.analysis.selection_use_all_rows:
            train_rows = prepared.matrix
        network = registry.create(arch_id, architecture_config(config, arch_id),
                                  prepared.schema.n_others)
        model = train(network, train_rows, prepared.validation, train_config(config),
                      normalizer=prepared.normalizer, feature_hash=prepared.content_hash(),
                      label=label)

        CheckpointFile.save(model, artifacts.checkpoint(label))
        write_history_csv(model.history, artifacts.history(label))
        best = next(h for h in model.history if h.step == model.best_step)
        return (f"[TRAIN] {label}: {model.train_config.iterations} steps, "
                f"best val RMSE {best.val_rmse:.4f} at step {model.best_step}")


class EnsembleCommand(Command):
    """Fit GEM weights over the trained networks on the validation split."""

    name = "ensemble"
    help = "fit GEM ensemble weights on the validation split"

    def execute(self, args, config):
        artifacts = RunArtifacts(config.output_dir)
        prepared = _load_features(artifacts)
        members = [_load_model(artifacts, label, prepared) for label in config.ensemble.models]
        ensemble = fit_ensemble(members, prepared.validation, tol=config.ensemble.tol,
                                max_iter=config.ensemble.max_iter)
        write_weights_json(ensemble.weights, artifacts.weights)
        shares = " ".join(f"{k}={v:.4f}" for k, v in ensemble.weights.as_dict().items())
        return f"[ENSEMBLE] gem: {shares} (val MSE {ensemble.weights.objective:.4f})"


class EvaluateCommand(Command):
    """Metrics, improvement and region reports for every model."""

    name = "evaluate"
    help = "fit the LASSO baseline and report metrics for every model and split"

    def execute(self, args, config):
        artifacts = RunArtifacts(config.output_dir)
        prepared = _load_features(artifacts)
        ensemble = _load_ensemble(artifacts, prepared)

        settings = config.baselines
        lasso = LassoPredictor.fit(prepared.train, settings.lasso_alpha, prepared.normalizer,
                                   tol=settings.lasso_tol, max_iter=settings.lasso_max_iter)
        lasso.save(artifacts.lasso)

        predictors = list(ensemble.members) + [ensemble, lasso]
        rows = []
        for split in SPLITS:
            part = prepared.part(split)
            for predictor in predictors:
                rows.append(evaluate_predictions(predictor.label, split, part.targets,
                                                 predictor.predict(part)))
        write_metrics_csv(rows, artifacts.metrics)

        by_key = {(r.model, r.split): r for r in rows}
        improvements = [
            relative_improvement(by_key[(ensemble.label, split)], by_key[(p.label, split)])
            for split in SPLITS for p in predictors if p is not ensemble
        ]
        write_improvement_csv(improvements, artifacts.improvement)

        test = prepared.test
        for predictor in predictors:
            report = aggregate_by_region(test.states, test.locations, test.targets,
                                         predictor.predict(test))
            write_region_csv(report, artifacts.regions(predictor.label))

        gem = by_key[(ensemble.label, "test")]
        return (f"[EVALUATE] {len(predictors)} models; gem test RMSE {gem.rmse:.4f}, "
                f"MAE {gem.mae:.4f}, r {gem.r if gem.r is None else round(gem.r, 4)}")


class ImportanceCommand(Command):
    """Grouped and per-period permutation importance on the test split."""

    name = "importance"
    help = "permutation feature importance on the test split"

    def _model(self, artifacts: RunArtifacts, config: RunConfig, prepared: PreparedFeatures):
        choice = config.analysis.model
        if choice == "gem":
            if artifacts.weights.exists():
                return _load_ensemble(artifacts, prepared)
            choice = config.ensemble.models[0]
            logger.warning("No GEM weights in %s; scoring importance on %s",
                           artifacts.directory, choice)
        return _load_model(artifacts, choice, prepared)

    def execute(self, args, config):
        artifacts = RunArtifacts(config.output_dir)
        prepared = _load_features(artifacts)
        model = self._model(artifacts, config, prepared)
        settings = config.analysis
        seed = config.stage_seed("importance")
        workers = thread_limit()

        test = prepared.test
        report = permutation_importance(model, test, repetitions=settings.repetitions,
                                        seed=seed, workers=workers)
        periods = [per_period_importance(model, test, variable, seed=seed, workers=workers)
                   for variable in settings.period_variables]
        write_importance_csv(report, artifacts.importance)
        write_period_csv(periods, artifacts.importance_periods)

        top = ", ".join(f"{g.group} (+{g.rmse_change:.4f})" for g in report.ranked()[:2])
        return f"[IMPORTANCE] {model.label}: r0 {report.baseline_rmse:.4f}, top groups {top}"


class SelectGenotypesCommand(Command):
    """Rank every genotype at every observed location-year."""

    name = "select-genotypes"
    help = "rank genotypes per location-year with the no-MG model"

    def add_arguments(self, parser):
        parser.add_argument("--k", type=int, default=None,
                            help="genotypes kept per location-year (default: analysis.top_k)")

    def execute(self, args, config):
        artifacts = RunArtifacts(config.output_dir)
        dataset = DatasetFile.load(RunArtifacts.require(artifacts.dataset, "ingest"))
        prepared = _load_features(artifacts, exclude_mg=True)
        label = get_registry().get_metadata(
            get_registry().resolve(config.analysis.selection_model)).name + NOMG_SUFFIX
        model = _load_model(artifacts, label, prepared)
        k = args.k if args.k is not None else config.analysis.top_k

        rankings = select_all(model, dataset, k)
        gaps = genotype_gap_report(rankings)
        write_rankings_csv(rankings, artifacts.rankings)
        write_gap_csv(gaps, artifacts.genotype_gaps)
        mean_gap = float(gaps["mean_gap"].mean()) if len(gaps) else float("nan")
        return (f"[SELECT] {label}: top-{k} of {len(model.schema.vocabulary('genotype'))} "
                f"genotypes at {len(rankings)} location-years, mean gap {mean_gap:.2f}")


COMMANDS: List[Command] = [
    IngestCommand(),
    PreprocessCommand(),
    TrainCommand(),
    EnsembleCommand(),
    EvaluateCommand(),
    ImportanceCommand(),
    SelectGenotypesCommand(),
]


def command_map() -> Dict[str, Command]:
    return {c.name: c for c in COMMANDS}
