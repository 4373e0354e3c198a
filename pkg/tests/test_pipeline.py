import json

import pytest

from defectsynth import (
    DatasetManifest,
    DatasetSources,
    LabelGenConfig,
    ManifestEntry,
    MetricRow,
    ProceduralRenderer,
    Provenance,
    RenderStyle,
    SeededRng,
    Stage,
    StageGraph,
    TrigLabelGenerator,
    assemble_dataset,
    gen_corpus,
    read_manifest,
    resolve_manifest,
    run_experiment,
    write_manifest,
)
from defectsynth.exceptions import (
    DimensionMismatchError,
    InsufficientDataError,
    InvalidInputError,
    ManifestResolutionError,
    MissingModelError,
    StageFailedError,
)
from defectsynth.pipeline.dataset import (
    load_labels,
    store_labels,
    store_pairs,
    translate_labels,
)
from defectsynth.pipeline.experiment import build_stage_graph, gap_report

from tests.conftest import make_tiny_config

GRAPH_CASES = [
    ([1], ["corpus", "dataset_1", "segmenter_1", "report"]),
    (
        [3],
        [
            "corpus",
            "translator",
            "trig_labels",
            "synthetic_trig",
            "dataset_3",
            "segmenter_3",
            "report",
        ],
    ),
    (
        [5],
        [
            "corpus",
            "translator",
            "trig_labels",
            "wgan",
            "wgan_labels",
            "synthetic_wgan",
            "dataset_5",
            "segmenter_5",
            "report",
        ],
    ),
]


def _entries(prefix: str, n: int, provenance: Provenance) -> list[ManifestEntry]:
    return [
        ManifestEntry(
            id=f"{prefix}_{i}",
            image=f"{prefix}/{i}_img.png",
            mask=f"{prefix}/{i}_mask.png",
            provenance=provenance,
        )
        for i in range(n)
    ]


def _row(iou: float) -> MetricRow:
    return MetricRow(ppv=iou, tpr=iou, iou=iou, acc=iou, mcc=iou, f1=iou, f2=iou)


@pytest.fixture
def sources():
    yield DatasetSources(
        real=_entries("real", 6, Provenance.REAL),
        trig=_entries("trig", 5, Provenance.SYNTHETIC_TRIG),
    )


@pytest.fixture
def small_scale_config():
    yield make_tiny_config(
        scale={"image_size": 16, "real_count": 3, "synthetic_count": 2, "test_count": 1}
    )


def test_gen_corpus():
    pairs = gen_corpus(3, 16, SeededRng(0))
    assert [p.id for p in pairs] == ["real_00000", "real_00001", "real_00002"]
    assert all(p.provenance == Provenance.REAL for p in pairs)
    assert all(p.mask.foreground_count() > 0 for p in pairs)
    shorter = gen_corpus(2, 16, SeededRng(0))
    assert [p.image for p in shorter] == [p.image for p in pairs[:2]]
    assert gen_corpus(1, 16, SeededRng(0), prefix="test")[0].id == "test_00000"


def test_gen_corpus_errors():
    with pytest.raises(InvalidInputError):
        gen_corpus(0, 16, SeededRng(0))
    with pytest.raises(DimensionMismatchError):
        gen_corpus(1, 16, SeededRng(0), labelgen=LabelGenConfig(width=8, height=8))


def test_store_and_load_labels(tmp_path):
    rng = SeededRng(1)
    records = TrigLabelGenerator(LabelGenConfig(width=16, height=16)).records(3, rng)
    masks = [record.mask for record in records]
    ids = store_labels(
        masks, tmp_path, Provenance.SYNTHETIC_TRIG, "trig", seed=rng.seed, records=records
    )
    assert ids == ["trig_00000", "trig_00001", "trig_00002"]
    loaded_ids, loaded, provenance = load_labels(tmp_path)
    assert loaded_ids == ids and loaded == masks
    assert provenance == Provenance.SYNTHETIC_TRIG
    sidecar = json.loads((tmp_path / "trig_00001.json").read_text())
    assert sidecar["seed"] == rng.seed
    assert len(sidecar["curves"]) == len(records[1].curves)


def test_load_labels_errors(tmp_path):
    with pytest.raises(ManifestResolutionError):
        load_labels(tmp_path)
    masks = gen_corpus(1, 16, SeededRng(0))
    store_labels([masks[0].mask], tmp_path / "mixed", Provenance.SYNTHETIC_TRIG, "trig")
    store_labels([masks[0].mask], tmp_path / "mixed", Provenance.SYNTHETIC_WGAN, "wgan")
    with pytest.raises(ManifestResolutionError):
        load_labels(tmp_path / "mixed")
    store_labels([masks[0].mask], tmp_path / "bare", Provenance.SYNTHETIC_WGAN, "wgan")
    (tmp_path / "bare" / "wgan_00000.json").unlink()
    with pytest.raises(ManifestResolutionError):
        load_labels(tmp_path / "bare")


def test_translate_labels():
    masks = [p.mask for p in gen_corpus(2, 16, SeededRng(0))]
    renderer, rng = ProceduralRenderer(RenderStyle()), SeededRng(4)
    pairs = translate_labels(masks, renderer, rng, Provenance.SYNTHETIC_WGAN, "wgan")
    assert [p.id for p in pairs] == ["wgan_00000", "wgan_00001"]
    assert all(p.provenance == Provenance.SYNTHETIC_WGAN for p in pairs)
    assert [p.image for p in pairs] == renderer.translate_many(masks, rng)


def test_manifest_files(tmp_path):
    pairs = gen_corpus(2, 16, SeededRng(0))
    entries = store_pairs(pairs, tmp_path / "corpus" / "train", tmp_path, seed=5)
    assert entries[0].image == "corpus/train/real_00000_img.png"
    manifest = DatasetManifest(variant=1, entries=entries, seed=5)
    write_manifest(manifest, tmp_path / "manifests" / "dataset_1.json")
    assert read_manifest(tmp_path / "manifests" / "dataset_1.json") == manifest
    resolved = resolve_manifest(manifest, tmp_path)
    assert [p.mask for p in resolved] == [p.mask for p in pairs]
    (tmp_path / "corpus" / "train" / "real_00001_mask.png").unlink()
    with pytest.raises(ManifestResolutionError):
        resolve_manifest(manifest, tmp_path)


def test_assemble_real_variants(sources, small_scale_config):
    first = assemble_dataset(1, sources, small_scale_config, SeededRng(0))
    assert first.counts == (3, 0) and first.online_da is None
    ids = [e.id for e in first.entries]
    assert ids == sorted(ids, key=lambda i: int(i.split("_")[1]))
    second = assemble_dataset(2, sources, small_scale_config, SeededRng(0))
    assert second.online_da == small_scale_config.augment
    assert second.entries == first.entries


def test_assemble_synthetic_variants(sources, small_scale_config):
    manifest = assemble_dataset(4, sources, small_scale_config, SeededRng(1))
    assert manifest.counts == (3, 2)
    assert manifest.online_da is not None
    assert {e.provenance for e in manifest.entries[3:]} == {Provenance.SYNTHETIC_TRIG}
    assert assemble_dataset(4, sources, small_scale_config, SeededRng(1)) == manifest


def test_assemble_errors(sources, small_scale_config):
    with pytest.raises(MissingModelError):
        assemble_dataset(5, sources, small_scale_config, SeededRng(0))
    with pytest.raises(InvalidInputError):
        assemble_dataset(7, sources, small_scale_config, SeededRng(0))
    few = DatasetSources(real=_entries("real", 2, Provenance.REAL))
    with pytest.raises(InsufficientDataError):
        assemble_dataset(1, few, small_scale_config, SeededRng(0))


def test_stage_graph():
    graph = StageGraph()
    graph.add_stage(Stage(name="b", run=print))
    graph.add_stage(Stage(name="a", run=print))
    graph.add_stage(Stage(name="c", run=print, requires=["b"]))
    assert [s.name for s in graph.ordered()] == ["a", "b", "c"]
    assert sorted(graph.required_for(["c"]).names()) == ["b", "c"]
    with pytest.raises(InvalidInputError):
        graph.add_stage(Stage(name="a", run=print))
    with pytest.raises(InvalidInputError):
        graph.add_stage(Stage(name="d", run=print, requires=["missing"]))
    with pytest.raises(InvalidInputError):
        graph.get_stage("missing")


@pytest.mark.parametrize("variants, expected", GRAPH_CASES)
def test_stage_graph_pruning(variants, expected):
    assert [s.name for s in build_stage_graph(variants).ordered()] == expected


def test_gap_report():
    rows = {"Dataset 1": _row(0.5), "Dataset 2": _row(0.6), "Dataset 3": _row(0.55)}
    assert gap_report(rows).splitlines() == [
        "IoU gap against Dataset 1 (0.500000)",
        "Dataset 2  +0.100000",
        "Dataset 3  +0.050000",
        "IoU Dataset 3 - Dataset 2: -0.050000",
    ]
    assert gap_report({}) == ""


def _outputs(directory):
    return {
        path.relative_to(directory).as_posix(): path.read_bytes()
        for path in sorted(directory.rglob("*"))
        if path.is_file() and path.suffix in {".txt", ".csv", ".json"}
    }


def test_tiny_experiment(tmp_path, tiny_config):
    report = run_experiment(tiny_config, tmp_path / "first")
    assert list(report.rows) == ["Dataset 1", "Dataset 3", "Dataset 5"]
    assert report.table.splitlines()[1].startswith("Dataset 1")
    assert sorted(report.manifests) == [1, 3, 5]
    assert report.manifests[5].counts == (4, 4)
    first = tmp_path / "first"
    for name in ["config.json", "reports/report.txt", "reports/report.csv"]:
        assert (first / name).exists()
    for name in ["translator.ckpt", "wgan.ckpt", "segnet_1.ckpt", "segnet_5.ckpt"]:
        assert (first / "models" / name).exists()
    assert sorted(report.logs) == ["segnet_1", "segnet_3", "segnet_5", "translator", "wgan"]

    test_ids = {p.name.split("_img")[0] for p in (first / "corpus" / "test").glob("*_img.png")}
    train_ids = {e.id for m in report.manifests.values() for e in m.entries}
    assert len(test_ids) == 3 and not test_ids & train_ids

    run_experiment(tiny_config, tmp_path / "second")
    assert _outputs(first) == _outputs(tmp_path / "second")


def test_failed_stage_is_named(tmp_path):
    config = make_tiny_config(
        wgan={"mask_size": 16, "latent_dim": 4, "batch_size": 64, "base_channels": 2},
        variants=[5],
    )
    with pytest.raises(StageFailedError) as info:
        run_experiment(config, tmp_path)
    assert info.value.stage == "wgan"
    assert info.value.seed == config.seed
    assert isinstance(info.value.__cause__, InsufficientDataError)


def test_experiment_plots(tmp_path):
    run_experiment(make_tiny_config(variants=[1]), tmp_path, plots=True)
    plots = tmp_path / "reports" / "plots"
    assert sorted(p.name for p in plots.glob("*.html")) == ["metrics.html", "segnet_1.html"]
    assert "Dataset 1" in (plots / "metrics.html").read_text()
