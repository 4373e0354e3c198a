"""Orchestration of the six dataset experiment.

Outputs below the experiment directory::

    corpus/{train,test}/     procedural real pairs
    labels/{trig,wgan}/      synthetic label masks with sidecars
    synthetic/{trig,wgan}/   translated synthetic pairs
    manifests/               one manifest per dataset variant
    models/                  translator, WGAN and segmenter checkpoints
    logs/                    training logs as CSV
    reports/                 metric table, gap report and CSV
"""

from pathlib import Path
from typing import Annotated, Optional

import pandas as pd
from loguru import logger
from pydantic import Field

from defectsynth.data_model import (
    BaseComponent,
    DatasetManifest,
    ExperimentConfig,
    ManifestEntry,
    MaskBuf,
    MetricRow,
    PairSample,
    Provenance,
)
from defectsynth.exceptions import StageFailedError
from defectsynth.labelgen.trig import TrigLabelGenerator
from defectsynth.labelgen.wgan import WganModel, sample_labels, train_wgan
from defectsynth.metrics import (
    COLUMN_WIDTH,
    LABEL_WIDTH,
    evaluate_set,
    metrics_frame,
    report_table,
)
from defectsynth.pipeline.dataset import (
    DatasetSources,
    assemble_dataset,
    gen_corpus,
    store_labels,
    store_pairs,
    translate_labels,
)
from defectsynth.pipeline.manifest import write_manifest
from defectsynth.pipeline.stages import Stage, StageGraph
from defectsynth.plot_manager import PlotManager
from defectsynth.plots import add_metric_rows_to_plot, add_training_log_to_plot
from defectsynth.rng import SeededRng
from defectsynth.segnet import predict_many, train_segmenter
from defectsynth.translate.pix2pix import Pix2PixTranslator, TranslatorModel, train_translator

# Child stream of the master seed consumed by each stage.
STAGE_STREAMS = {
    "corpus": 0,
    "translator": 1,
    "trig_labels": 2,
    "wgan": 3,
    "wgan_labels": 4,
    "synthetic_trig": 5,
    "synthetic_wgan": 6,
    "dataset": 7,
    "segmenter": 8,
}


class ExperimentContext:
    """Mutable state shared by the stages of one run."""

    def __init__(self, config: ExperimentConfig, out_dir: Path):
        self.config = config
        self.out_dir = out_dir
        self.master = SeededRng(config.seed)
        self.train_pairs: list[PairSample] = []
        self.test_pairs: list[PairSample] = []
        self.real_entries: list[ManifestEntry] = []
        self.translator: TranslatorModel | None = None
        self.trig_masks: list[MaskBuf] = []
        self.wgan: WganModel | None = None
        self.wgan_masks: list[MaskBuf] = []
        self.synthetic: dict[Provenance, list[ManifestEntry]] = {}
        self.manifests: dict[int, DatasetManifest] = {}
        self.rows: dict[str, MetricRow] = {}
        self.logs: dict[str, pd.DataFrame] = {}

    def stream(self, stage: str) -> SeededRng:
        return self.master.derive(STAGE_STREAMS[stage])

    def path(self, *parts: str) -> Path:
        return self.out_dir.joinpath(*parts)

    def save_log(self, name: str, log: pd.DataFrame):
        self.logs[name] = log
        path = self.path("logs", f"{name}.csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        log.to_csv(path, index=False)


class ExperimentReport(BaseComponent):
    """Interface for the outcome of `run_experiment`."""

    table: Annotated[str, Field(..., description="Fixed width metric table.")]
    gaps: Annotated[str, Field(..., description="IoU gaps between dataset variants.")]
    rows: Annotated[dict[str, MetricRow], Field(..., description="Metrics per dataset.")]
    manifests: Annotated[dict[int, DatasetManifest], Field(default_factory=dict)]
    logs: Annotated[dict[str, pd.DataFrame], Field(default_factory=dict)]
    report_dir: Annotated[Optional[Path], Field(None)]


def dataset_label(variant: int) -> str:
    return f"Dataset {variant}"


def gap_report(rows: dict[str, MetricRow]) -> str:
    """IoU gap of every dataset against dataset 1 and of dataset 3 against dataset 2."""
    lines = []
    baseline = rows.get(dataset_label(1))
    if baseline is not None:
        lines.append(f"IoU gap against {dataset_label(1)} ({baseline.iou:.6f})")
        for label, row in rows.items():
            if label != dataset_label(1):
                lines.append(f"{label:<{LABEL_WIDTH}}{row.iou - baseline.iou:>+{COLUMN_WIDTH}.6f}")
    second, third = rows.get(dataset_label(2)), rows.get(dataset_label(3))
    if second is not None and third is not None:
        lines.append(
            f"IoU {dataset_label(3)} - {dataset_label(2)}: {third.iou - second.iou:+.6f}"
        )
    return "\n".join(lines) + "\n" if lines else ""


def stage_corpus(ctx: ExperimentContext):
    cfg, rng = ctx.config, ctx.stream("corpus")
    size = cfg.scale.image_size
    ctx.train_pairs = gen_corpus(
        cfg.scale.real_count, size, rng.derive(0), cfg.labelgen, cfg.render, prefix="real"
    )
    ctx.test_pairs = gen_corpus(
        cfg.scale.test_count, size, rng.derive(1), cfg.labelgen, cfg.render, prefix="test"
    )
    ctx.real_entries = store_pairs(
        ctx.train_pairs, ctx.path("corpus", "train"), ctx.out_dir, seed=rng.seed
    )
    store_pairs(ctx.test_pairs, ctx.path("corpus", "test"), ctx.out_dir, seed=rng.seed)


def stage_translator(ctx: ExperimentContext):
    ctx.translator, log = train_translator(
        ctx.train_pairs, ctx.config.translator, ctx.stream("translator")
    )
    ctx.translator.save(ctx.path("models", "translator.ckpt"))
    ctx.save_log("translator", log)


def stage_trig_labels(ctx: ExperimentContext):
    rng = ctx.stream("trig_labels")
    records = TrigLabelGenerator(ctx.config.labelgen).records(
        ctx.config.scale.synthetic_count, rng
    )
    ctx.trig_masks = [record.mask for record in records]
    store_labels(
        ctx.trig_masks,
        ctx.path("labels", "trig"),
        Provenance.SYNTHETIC_TRIG,
        prefix="trig",
        seed=rng.seed,
        records=records,
    )


def stage_wgan(ctx: ExperimentContext):
    masks = [pair.mask for pair in ctx.train_pairs] + ctx.trig_masks
    ctx.wgan, log = train_wgan(masks, ctx.config.wgan, ctx.stream("wgan"))
    ctx.wgan.save(ctx.path("models", "wgan.ckpt"))
    ctx.save_log("wgan", log)


def stage_wgan_labels(ctx: ExperimentContext):
    rng = ctx.stream("wgan_labels")
    ctx.wgan_masks = sample_labels(ctx.wgan, ctx.config.scale.synthetic_count, rng)
    store_labels(
        ctx.wgan_masks, ctx.path("labels", "wgan"), Provenance.SYNTHETIC_WGAN, "wgan", rng.seed
    )


def _synthetic_stage(provenance: Provenance, prefix: str):
    def run(ctx: ExperimentContext):
        rng = ctx.stream(f"synthetic_{prefix}")
        masks = ctx.trig_masks if provenance == Provenance.SYNTHETIC_TRIG else ctx.wgan_masks
        pairs = translate_labels(masks, Pix2PixTranslator(ctx.translator), rng, provenance, prefix)
        ctx.synthetic[provenance] = store_pairs(
            pairs, ctx.path("synthetic", prefix), ctx.out_dir, seed=rng.seed
        )

    return run


def _dataset_stage(variant: int):
    def run(ctx: ExperimentContext):
        sources = DatasetSources(
            real=ctx.real_entries,
            trig=ctx.synthetic.get(Provenance.SYNTHETIC_TRIG),
            wgan=ctx.synthetic.get(Provenance.SYNTHETIC_WGAN),
        )
        manifest = assemble_dataset(
            variant, sources, ctx.config, ctx.stream("dataset").derive(variant)
        )
        write_manifest(manifest, ctx.path("manifests", f"dataset_{variant}.json"))
        ctx.manifests[variant] = manifest

    return run


def _segmenter_stage(variant: int):
    def run(ctx: ExperimentContext):
        cfg = ctx.config
        model, log = train_segmenter(
            ctx.manifests[variant],
            cfg.segmenter,
            ctx.stream("segmenter").derive(variant),
            ctx.out_dir,
        )
        model.save(ctx.path("models", f"segnet_{variant}.ckpt"))
        ctx.save_log(f"segnet_{variant}", log)
        preds = predict_many(model, [pair.image for pair in ctx.test_pairs])
        ctx.rows[dataset_label(variant)] = evaluate_set(
            preds, [pair.mask for pair in ctx.test_pairs], cfg.eval_mode
        )
        logger.info(
            f"{dataset_label(variant)}: test IoU {ctx.rows[dataset_label(variant)].iou:.6f}"
        )

    return run


def stage_report(ctx: ExperimentContext):
    rows = {label: ctx.rows[label] for label in sorted(ctx.rows)}
    report_dir = ctx.path("reports")
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "report.txt").write_text(
        f"Aggregation: {ctx.config.eval_mode}\n{report_table(rows)}\n{gap_report(rows)}"
    )
    metrics_frame(rows).to_csv(report_dir / "report.csv", index=False)


def build_stage_graph(variants: list[int]) -> StageGraph:
    """Stage graph of the experiment pruned to what `variants` need."""
    graph = StageGraph()
    graph.add_stage(Stage(name="corpus", run=stage_corpus))
    graph.add_stage(Stage(name="translator", run=stage_translator, requires=["corpus"]))
    graph.add_stage(Stage(name="trig_labels", run=stage_trig_labels))
    graph.add_stage(Stage(name="wgan", run=stage_wgan, requires=["corpus", "trig_labels"]))
    graph.add_stage(Stage(name="wgan_labels", run=stage_wgan_labels, requires=["wgan"]))
    graph.add_stage(
        Stage(
            name="synthetic_trig",
            run=_synthetic_stage(Provenance.SYNTHETIC_TRIG, "trig"),
            requires=["translator", "trig_labels"],
        )
    )
    graph.add_stage(
        Stage(
            name="synthetic_wgan",
            run=_synthetic_stage(Provenance.SYNTHETIC_WGAN, "wgan"),
            requires=["translator", "wgan_labels"],
        )
    )
    synthetic = {
        3: "synthetic_trig",
        4: "synthetic_trig",
        5: "synthetic_wgan",
        6: "synthetic_wgan",
    }
    for variant in range(1, 7):
        requires = ["corpus"] + ([synthetic[variant]] if variant in synthetic else [])
        graph.add_stage(
            Stage(name=f"dataset_{variant}", run=_dataset_stage(variant), requires=requires)
        )
        graph.add_stage(
            Stage(
                name=f"segmenter_{variant}",
                run=_segmenter_stage(variant),
                requires=[f"dataset_{variant}"],
            )
        )
    targets = [f"segmenter_{variant}" for variant in variants]
    pruned = graph.required_for(targets)
    pruned.add_stage(Stage(name="report", run=stage_report, requires=targets))
    return pruned


def write_training_plots(logs: dict[str, pd.DataFrame], directory: Path | str):
    """Writes one HTML line chart per training log."""
    directory = Path(directory)
    for name, log in logs.items():
        x_column = "step" if "step" in log.columns else "epoch"
        plot_manager = PlotManager(title=name, xaxis=x_column)
        add_training_log_to_plot(log, plot_manager, x_column=x_column)
        plot_manager.write_html(directory / f"{name}.html")


def write_metric_plot(rows: dict[str, MetricRow], path: Path | str, metric: str = "iou"):
    """Writes one marker per dataset for `metric`."""
    plot_manager = PlotManager(title=f"Test set {metric}", xaxis="dataset")
    add_metric_rows_to_plot(rows, plot_manager, metric=metric)
    plot_manager.write_html(path)


def run_experiment(
    cfg: ExperimentConfig, out_dir: Path | str, plots: bool = False
) -> ExperimentReport:
    """Runs every stage the requested dataset variants need.

    Parameters
    ----------

    cfg: ExperimentConfig
        Experiment configuration, `cfg.variants` selects the datasets.
    out_dir: Path | str
        Experiment directory, created if missing.
    plots: bool
        Also write training curves and the test set IoU per dataset as HTML
        into ``reports/plots``.

    Returns
    -------

    ExperimentReport
        Metric table, gap report, manifests and training logs.

    Raises
    ------

    StageFailedError
        If a stage raises, carrying the stage name and master seed.

    Examples
    --------

    >>> cfg = ExperimentConfig.desk(variants=[1, 3])
    >>> report = run_experiment(cfg, "runs/desk")
    >>> print(report.table)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(cfg.model_dump_json(indent=2))
    ctx = ExperimentContext(cfg, out_dir)
    stages = build_stage_graph(cfg.variants).ordered()
    logger.info(f"Running {len(stages)} stages with seed {cfg.seed} into {out_dir}")
    for stage in stages:
        logger.info(f"Stage {stage.name}")
        try:
            stage.run(ctx)
        except Exception as err:
            msg = f"Stage {stage.name} failed with seed {cfg.seed}: {err}"
            raise StageFailedError(msg, stage=stage.name, seed=cfg.seed) from err
    rows = {label: ctx.rows[label] for label in sorted(ctx.rows)}
    if plots:
        write_training_plots(ctx.logs, ctx.path("reports", "plots"))
        write_metric_plot(rows, ctx.path("reports", "plots", "metrics.html"))
    return ExperimentReport(
        table=report_table(rows),
        gaps=gap_report(rows),
        rows=rows,
        manifests=ctx.manifests,
        logs=ctx.logs,
        report_dir=ctx.path("reports"),
    )
