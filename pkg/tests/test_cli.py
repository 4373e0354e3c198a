import pytest

from defectsynth.cli import build_parser, exit_code, main
from defectsynth.exceptions import (
    InsufficientDataError,
    StageFailedError,
    TrainingDivergenceError,
)

from tests.conftest import make_tiny_config

EXIT_CASES = [
    (TrainingDivergenceError("loss became nan", step=3), 4),
    (InsufficientDataError("too few"), 3),
    (FileNotFoundError("config.json"), 2),
    (RuntimeError("unexpected"), None),
]


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(make_tiny_config(variants=[1]).model_dump_json())
    yield str(path)


def test_gen_labels_trig(tmp_path, config_path):
    out = tmp_path / "labels"
    assert main(["--config", config_path, "--out", str(out), "gen-labels", "--mode", "trig"]) == 0
    assert len(list(out.glob("trig_*_mask.png"))) == 4
    assert len(list(out.glob("trig_*.json"))) == 4


def test_label_model_round_trip(tmp_path, config_path):
    labels, wgan_labels = tmp_path / "labels", tmp_path / "wgan_labels"
    model, pairs = tmp_path / "models" / "wgan.ckpt", tmp_path / "rendered"
    common = ["--config", config_path]
    assert main([*common, "--out", str(labels), "gen-labels", "--mode", "trig"]) == 0
    assert main([*common, "--out", str(model), "train-wgan", "--masks", str(labels)]) == 0
    assert (
        main(
            [
                *common,
                "--out",
                str(wgan_labels),
                "gen-labels",
                "--mode",
                "wgan",
                "--n",
                "2",
                "--model",
                str(model),
            ]
        )
        == 0
    )
    assert len(list(wgan_labels.glob("wgan_*_mask.png"))) == 2
    assert main([*common, "--out", str(pairs), "render", "--labels", str(labels)]) == 0
    assert len(list(pairs.glob("trig_*_img.png"))) == 4


def test_wgan_labels_need_a_model(tmp_path, config_path):
    args = ["--config", config_path, "--out", str(tmp_path), "gen-labels", "--mode", "wgan"]
    assert main(args) == 2


def test_bad_config(tmp_path):
    assert main(["--config", str(tmp_path / "missing.json"), "gen-corpus"]) == 2
    (tmp_path / "bad.json").write_text('{"scale": {"image_size": 12}}')
    assert main(["--config", str(tmp_path / "bad.json"), "gen-corpus"]) == 2


def test_segmentation_workflow(tmp_path, config_path, capsys):
    """Corpus, manifest, training, prediction and evaluation through the CLI."""
    corpus, test = tmp_path / "corpus", tmp_path / "test"
    manifest, model = tmp_path / "dataset_1.json", tmp_path / "segnet.ckpt"
    preds, report = tmp_path / "preds", tmp_path / "report.txt"
    common = ["--config", config_path]

    assert main([*common, "--out", str(corpus), "gen-corpus"]) == 0
    test_args = ["--seed", "1", "--out", str(test), "gen-corpus", "--n", "3", "--prefix", "test"]
    assert main([*common, *test_args]) == 0
    assemble_args = ["assemble", "--variant", "1", "--real", str(corpus), "--root", str(tmp_path)]
    assert main([*common, "--out", str(manifest), *assemble_args]) == 0
    train_args = ["train-segnet", "--manifest", str(manifest), "--root", str(tmp_path)]
    log_args = ["--log", str(tmp_path / "segnet.csv")]
    assert main([*common, "--out", str(model), *train_args, *log_args]) == 0
    predict_args = ["predict", "--model", str(model), "--images", str(test), "--overlay"]
    assert main([*common, "--out", str(preds), *predict_args]) == 0
    assert len(list(preds.glob("test_*_mask.png"))) == 3
    assert len(list(preds.glob("test_*_overlay.png"))) == 3
    capsys.readouterr()
    evaluate_args = ["evaluate", "--pred", str(preds), "--gt", str(test)]
    assert main([*common, "--out", str(report), *evaluate_args]) == 0
    assert capsys.readouterr().out == report.read_text()
    assert report.read_text().splitlines()[1].startswith("Result")
    assert report.with_suffix(".csv").exists()

    (preds / "test_00000_mask.png").unlink()
    assert main([*common, "--out", str(report), *evaluate_args]) == 3


@pytest.mark.parametrize("err, expected", EXIT_CASES)
def test_exit_code(err, expected):
    assert exit_code(err) == expected


def test_exit_code_unwraps_stage_failures():
    try:
        try:
            raise TrainingDivergenceError("loss became inf")
        except TrainingDivergenceError as cause:
            raise StageFailedError("wgan failed", stage="wgan", seed=0) from cause
    except StageFailedError as err:
        assert exit_code(err) == 4
    assert exit_code(StageFailedError("report failed", stage="report", seed=0)) is None


def test_info(capsys):
    assert main(["info"]) == 0
    assert "defectsynth version" in capsys.readouterr().out


def test_global_flags_after_the_verb(tmp_path, config_path):
    labels, model = tmp_path / "labels", tmp_path / "wgan.ckpt"
    gen_args = ["gen-labels", "--mode", "trig", "--config", config_path, "--out", str(labels)]
    assert main(gen_args) == 0
    train_args = ["train-wgan", "--masks", str(labels), "--out", str(model), "--seed", "3"]
    assert main(["--config", config_path, *train_args]) == 0
    assert model.exists()


def test_verb_keeps_flags_given_before_it():
    args = build_parser().parse_args(["--seed", "5", "--out", "x", "--verbose", "info"])
    assert (args.seed, args.out, args.verbose) == (5, "x", True)
    args = build_parser().parse_args(["--seed", "5", "info", "--seed", "6"])
    assert (args.seed, args.out, args.verbose) == (6, "out", False)
