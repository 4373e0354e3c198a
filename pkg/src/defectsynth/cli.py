"""Command line interface.

Every verb shares the global flags ``--seed``, ``--config`` (JSON
`ExperimentConfig`), ``--out`` and ``--verbose``, given before or after the
verb. Exit codes are 0 on success, 2 for configuration errors, 3 for data
errors and 4 for training divergence.
"""

import argparse
import sys
from pathlib import Path

from loguru import logger
from pydantic import ValidationError

from defectsynth.augment.policy import augment_pairs
from defectsynth.constants import (
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_OK,
    EXIT_TRAINING_DIVERGENCE,
)
from defectsynth.data_model import AugmentPolicy, ExperimentConfig, Provenance
from defectsynth.exceptions import (
    CheckpointFormatError,
    DimensionMismatchError,
    GenerationFailedError,
    InsufficientDataError,
    InvalidInputError,
    ManifestResolutionError,
    MissingModelError,
    NonBinaryMaskError,
    ShapeMismatchError,
    StageFailedError,
    TrainingDivergenceError,
)
from defectsynth.labelgen.trig import TrigLabelGenerator
from defectsynth.labelgen.wgan import WganModel, sample_labels, train_wgan
from defectsynth.metrics import evaluate_set, metrics_frame, report_table
from defectsynth.pipeline.dataset import (
    DatasetSources,
    assemble_dataset,
    gen_corpus,
    load_labels,
    store_labels,
    translate_labels,
)
from defectsynth.pipeline.experiment import run_experiment
from defectsynth.pipeline.manifest import entry_for, read_manifest, write_manifest
from defectsynth.plots import overlay_prediction
from defectsynth.rng import SeededRng
from defectsynth.segnet import SegModel, predict_many, train_segmenter
from defectsynth.translate.ingest import (
    IMAGE_SUFFIX,
    MASK_SUFFIX,
    ingest_external,
    load_pairs,
    write_pair,
)
from defectsynth.translate.pix2pix import Pix2PixTranslator, TranslatorModel, train_translator
from defectsynth.translate.procedural import ProceduralRenderer
from defectsynth.utils.image_io import read_image, read_mask, write_image, write_mask
from defectsynth.version import VERSION, version_summary

CONFIG_ERRORS = (ValidationError, InvalidInputError, FileNotFoundError)
DATA_ERRORS = (
    CheckpointFormatError,
    DimensionMismatchError,
    GenerationFailedError,
    InsufficientDataError,
    ManifestResolutionError,
    MissingModelError,
    NonBinaryMaskError,
    ShapeMismatchError,
)
LABEL_PREFIX = {Provenance.SYNTHETIC_TRIG: "trig", Provenance.SYNTHETIC_WGAN: "wgan"}


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Experiment configuration from ``--config`` with ``--seed`` applied on top."""
    if args.config is None:
        cfg = ExperimentConfig.desk()
    else:
        cfg = ExperimentConfig.model_validate_json(Path(args.config).read_text())
    if args.seed is not None:
        cfg = ExperimentConfig.model_validate({**cfg.model_dump(), "seed": args.seed})
    return cfg


def _write_log(log, path: str | None):
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        log.to_csv(path, index=False)


def _prepare_parent(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_gen_corpus(args, cfg: ExperimentConfig):
    n = cfg.scale.real_count if args.n is None else args.n
    rng = SeededRng(cfg.seed)
    pairs = gen_corpus(n, cfg.scale.image_size, rng, cfg.labelgen, cfg.render, args.prefix)
    for pair in pairs:
        write_pair(pair, args.out, seed=rng.seed, generator=cfg.render.model_dump())


def cmd_gen_labels(args, cfg: ExperimentConfig):
    n = cfg.scale.synthetic_count if args.n is None else args.n
    rng = SeededRng(cfg.seed)
    if args.mode == "trig":
        records = TrigLabelGenerator(cfg.labelgen).records(n, rng)
        masks = [record.mask for record in records]
        store_labels(masks, args.out, Provenance.SYNTHETIC_TRIG, "trig", rng.seed, records)
        return
    if args.model is None:
        msg = "gen-labels --mode wgan needs --model"
        raise InvalidInputError(msg)
    masks = sample_labels(WganModel.load(args.model), n, rng)
    store_labels(masks, args.out, Provenance.SYNTHETIC_WGAN, "wgan", rng.seed)


def cmd_train_wgan(args, cfg: ExperimentConfig):
    _, masks, _ = load_labels(args.masks)
    model, log = train_wgan(masks, cfg.wgan, SeededRng(cfg.seed))
    model.save(_prepare_parent(Path(args.out)))
    _write_log(log, args.log)


def cmd_train_translator(args, cfg: ExperimentConfig):
    model, log = train_translator(load_pairs(args.pairs), cfg.translator, SeededRng(cfg.seed))
    model.save(_prepare_parent(Path(args.out)))
    _write_log(log, args.log)


def _translate_dir(args, cfg: ExperimentConfig, translator):
    _, masks, provenance = load_labels(args.labels)
    if provenance not in LABEL_PREFIX:
        msg = f"{args.labels} holds {provenance.value} labels, expected synthetic ones"
        raise InvalidInputError(msg)
    rng = SeededRng(cfg.seed)
    pairs = translate_labels(masks, translator, rng, provenance, LABEL_PREFIX[provenance])
    for pair in pairs:
        write_pair(pair, args.out, seed=rng.seed)


def cmd_render(args, cfg: ExperimentConfig):
    _translate_dir(args, cfg, ProceduralRenderer(cfg.render))


def cmd_translate(args, cfg: ExperimentConfig):
    _translate_dir(args, cfg, Pix2PixTranslator(TranslatorModel.load(args.model)))


def cmd_ingest(args, cfg: ExperimentConfig):
    pairs, report = ingest_external(args.pairs)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    for pair in pairs:
        write_pair(pair, args.out)
    (Path(args.out) / "ingest_report.json").write_text(report.model_dump_json(indent=2))


def cmd_augment(args, cfg: ExperimentConfig):
    policy = (
        cfg.augment
        if args.policy is None
        else AugmentPolicy.model_validate_json(Path(args.policy).read_text())
    )
    pairs = load_pairs(args.in_dir)
    augmented = augment_pairs(pairs, policy, SeededRng(cfg.seed))
    for pair in augmented:
        write_pair(pair, args.out, seed=cfg.seed, generator=policy.model_dump())


def cmd_assemble(args, cfg: ExperimentConfig):
    root = Path(args.root).resolve()

    def entries(directory: str | None):
        if directory is None:
            return None
        directory = Path(directory).resolve()
        return [entry_for(pair, directory, root) for pair in load_pairs(directory)]

    sources = DatasetSources(
        real=entries(args.real), trig=entries(args.trig), wgan=entries(args.wgan)
    )
    manifest = assemble_dataset(args.variant, sources, cfg, SeededRng(cfg.seed))
    write_manifest(manifest, args.out)


def cmd_train_segnet(args, cfg: ExperimentConfig):
    manifest = read_manifest(args.manifest)
    model, log = train_segmenter(manifest, cfg.segmenter, SeededRng(cfg.seed), args.root)
    model.save(_prepare_parent(Path(args.out)))
    _write_log(log, args.log)


def cmd_predict(args, cfg: ExperimentConfig):
    model = SegModel.load(args.model)
    paths = sorted(Path(args.images).glob(f"*{IMAGE_SUFFIX}"))
    if not paths:
        msg = f"No *{IMAGE_SUFFIX} images in {args.images}"
        raise InsufficientDataError(msg)
    images = [read_image(path) for path in paths]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path, image, mask in zip(paths, images, predict_many(model, images, args.threshold)):
        pair_id = path.name[: -len(IMAGE_SUFFIX)]
        write_mask(mask, out / f"{pair_id}{MASK_SUFFIX}")
        if args.overlay:
            write_image(overlay_prediction(image, mask), out / f"{pair_id}_overlay.png")
    logger.info(f"Predicted {len(paths)} masks into {out}")


def cmd_evaluate(args, cfg: ExperimentConfig):
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    ids = sorted(path.name[: -len(MASK_SUFFIX)] for path in gt_dir.glob(f"*{MASK_SUFFIX}"))
    missing = [pair_id for pair_id in ids if not (pred_dir / f"{pair_id}{MASK_SUFFIX}").exists()]
    if not ids or missing:
        msg = f"{len(missing)} of {len(ids)} ground truth masks have no prediction in {pred_dir}"
        raise ManifestResolutionError(msg)
    preds = [read_mask(pred_dir / f"{pair_id}{MASK_SUFFIX}") for pair_id in ids]
    gts = [read_mask(gt_dir / f"{pair_id}{MASK_SUFFIX}") for pair_id in ids]
    rows = {args.label: evaluate_set(preds, gts, args.mode)}
    out = _prepare_parent(Path(args.out))
    out.write_text(report_table(rows))
    metrics_frame(rows).to_csv(out.with_suffix(".csv"), index=False)
    print(report_table(rows), end="")


def cmd_run_experiment(args, cfg: ExperimentConfig):
    if args.variants:
        cfg = ExperimentConfig.model_validate({**cfg.model_dump(), "variants": args.variants})
    report = run_experiment(cfg, args.out, plots=args.plots)
    print(report.table, end="")
    print(report.gaps, end="")


def global_flags(with_defaults: bool) -> argparse.ArgumentParser:
    """Flags accepted before and after the verb.

    After the verb they default to `argparse.SUPPRESS` so an omitted flag keeps
    the value given before the verb.
    """

    def default(value):
        return value if with_defaults else argparse.SUPPRESS

    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--seed", type=int, default=default(None), help="Master seed override.")
    flags.add_argument("--config", default=default(None), help="ExperimentConfig JSON file.")
    flags.add_argument(
        "--out", default=default("out"), help="Output file or directory of the verb."
    )
    flags.add_argument(
        "--verbose", action="store_true", default=default(False), help="Log per step values."
    )
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="defectsynth",
        description="Synthetic surface defect data for segmentation.",
        parents=[global_flags(with_defaults=True)],
    )
    parser.add_argument("--version", action="version", version=f"defectsynth {VERSION}")
    subparsers = parser.add_subparsers(dest="verb", required=True)
    verb_flags = global_flags(with_defaults=False)

    def add_verb(name: str, help: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(name, help=help, parents=[verb_flags])

    sub = add_verb("gen-corpus", "Procedural stand-in for the real corpus.")
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--prefix", default="real")
    sub.set_defaults(func=cmd_gen_corpus)

    sub = add_verb("gen-labels", "Synthetic label masks with sidecars.")
    sub.add_argument("--mode", choices=["trig", "wgan"], required=True)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--model", default=None, help="WGAN checkpoint for --mode wgan.")
    sub.set_defaults(func=cmd_gen_labels)

    sub = add_verb("train-wgan", "Train the WGAN label generator.")
    sub.add_argument("--masks", required=True, help="Directory of *_mask.png with sidecars.")
    sub.add_argument("--log", default=None, help="CSV training log.")
    sub.set_defaults(func=cmd_train_wgan)

    sub = add_verb("train-translator", "Train the label to image translator.")
    sub.add_argument("--pairs", required=True)
    sub.add_argument("--log", default=None)
    sub.set_defaults(func=cmd_train_translator)

    sub = add_verb("render", "Render labels with the procedural renderer.")
    sub.add_argument("--labels", required=True)
    sub.set_defaults(func=cmd_render)

    sub = add_verb("translate", "Translate labels with a trained translator.")
    sub.add_argument("--labels", required=True)
    sub.add_argument("--model", required=True)
    sub.set_defaults(func=cmd_translate)

    sub = add_verb("ingest", "Validate and import an external pair directory.")
    sub.add_argument("--pairs", required=True)
    sub.set_defaults(func=cmd_ingest)

    sub = add_verb("augment", "Materialize augmented copies of pairs.")
    sub.add_argument("--in", dest="in_dir", required=True)
    sub.add_argument("--policy", default=None, help="AugmentPolicy JSON file.")
    sub.set_defaults(func=cmd_augment)

    sub = add_verb("assemble", "Write the manifest of one dataset variant.")
    sub.add_argument("--variant", type=int, required=True)
    sub.add_argument("--real", required=True)
    sub.add_argument("--trig", default=None)
    sub.add_argument("--wgan", default=None)
    sub.add_argument("--root", default=".", help="Manifest paths are relative to it.")
    sub.set_defaults(func=cmd_assemble)

    sub = add_verb("train-segnet", "Train a segmenter on a manifest.")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--root", default=".")
    sub.add_argument("--log", default=None)
    sub.set_defaults(func=cmd_train_segnet)

    sub = add_verb("predict", "Predict masks for *_img.png images.")
    sub.add_argument("--model", required=True)
    sub.add_argument("--images", required=True)
    sub.add_argument("--threshold", type=float, default=None)
    sub.add_argument("--overlay", action="store_true", help="Also write red overlays.")
    sub.set_defaults(func=cmd_predict)

    sub = add_verb("evaluate", "Metric table of predicted against true masks.")
    sub.add_argument("--pred", required=True)
    sub.add_argument("--gt", required=True)
    sub.add_argument("--mode", choices=["micro", "macro"], default="micro")
    sub.add_argument("--label", default="Result")
    sub.set_defaults(func=cmd_evaluate)

    sub = add_verb("run-experiment", "Run the six dataset experiment.")
    sub.add_argument("--variants", type=int, nargs="*", default=None)
    sub.add_argument("--plots", action="store_true", help="Write training curves as HTML.")
    sub.set_defaults(func=cmd_run_experiment)

    sub = add_verb("info", "Print versions of the numeric stack.")
    sub.set_defaults(func=lambda args, cfg: print(version_summary()))
    return parser


def exit_code(err: Exception) -> int | None:
    """Exit code of a failure, None for unexpected errors."""
    if isinstance(err, StageFailedError) and err.__cause__ is not None:
        err = err.__cause__
    if isinstance(err, TrainingDivergenceError):
        return EXIT_TRAINING_DIVERGENCE
    if isinstance(err, DATA_ERRORS):
        return EXIT_DATA_ERROR
    if isinstance(err, CONFIG_ERRORS):
        return EXIT_CONFIG_ERROR
    return None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if args.verbose else "INFO")
    try:
        cfg = load_config(args)
        args.func(args, cfg)
    except Exception as err:
        code = exit_code(err)
        if code is None:
            raise
        logger.error(f"{type(err).__name__}: {err}")
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
