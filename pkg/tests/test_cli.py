import hashlib
import json
import subprocess
import sys

import pytest

from utrnet.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


def _tree(directory):
    return {
        p.relative_to(directory).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(directory.rglob("*"))
        if p.is_file()
    }


def test_generate_twice_is_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["generate", "--n", "4", "--seed", "7", "--out", str(tmp_path / name)]) == EXIT_OK
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    assert (tmp_path / "a" / "effective.cfg").exists()


def test_eval_perfect_predictions(tmp_path, capsys):
    main(["generate", "--n", "3", "--seed", "1", "--out", str(tmp_path / "d")])
    labels = (tmp_path / "d" / "labels.tsv").read_text(encoding="utf-8")
    (tmp_path / "pred.tsv").write_text(labels, encoding="utf-8")
    capsys.readouterr()
    assert main(["eval", "--data", str(tmp_path / "d"), "--predictions", str(tmp_path / "pred.tsv")]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "accuracy\t1.0"
    assert out[0] == "char\thits\ttotal\taccuracy"


def test_eval_missing_prediction_is_data_error(tmp_path, capsys):
    main(["generate", "--n", "2", "--seed", "1", "--out", str(tmp_path / "d")])
    (tmp_path / "pred.tsv").write_text("images/000000.png\tab\n", encoding="utf-8")
    code = main(["eval", "--data", str(tmp_path / "d"), "--predictions", str(tmp_path / "pred.tsv")])
    assert code == EXIT_DATA
    assert capsys.readouterr().err.startswith("E_DATA: predictions missing for 1 images")


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["generate"],
        ["generate", "--n", "0", "--out", "x"],
        ["train", "--data", "d", "--out", "o", "--backbone", "vgg"],
        ["generate", "--n", "1", "--out", "x", "--threads", "0"],
    ],
)
def test_usage_errors(argv, tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "E_USAGE" in err


def test_missing_dataset_is_data_error(tmp_path, capsys):
    code = main(["train", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "o")])
    assert code == EXIT_DATA
    assert "labels.tsv" in capsys.readouterr().err


def test_corrupt_checkpoint_is_data_error(tmp_path, capsys):
    main(["generate", "--n", "1", "--out", str(tmp_path / "d")])
    (tmp_path / "x.ckpt").write_bytes(b"not a checkpoint")
    code = main(["predict", "--checkpoint", str(tmp_path / "x.ckpt"), "--images", str(tmp_path / "d")])
    assert code == EXIT_DATA


def test_short_train_then_predict_and_eval(tmp_path, capsys):
    data = tmp_path / "d"
    main(["generate", "--n", "4", "--seed", "2", "--out", str(data)])
    out = tmp_path / "run"
    argv = ["train", "--data", str(data), "--out", str(out), "--backbone", "lowres-baseline",
            "--max-iter", "2", "--batch-size", "2", "--eval-every", "1"]
    assert main(argv) == EXIT_OK
    assert len((out / "train.log").read_text(encoding="utf-8").splitlines()) == 2
    assert "[train]" in (out / "effective.cfg").read_text(encoding="utf-8")
    capsys.readouterr()
    assert main(["predict", "--checkpoint", str(out / "best.ckpt"), "--images", str(data)]) == EXIT_OK
    rows = capsys.readouterr().out.splitlines()
    assert [r.split("\t")[0] for r in rows] == [f"images/00000{i}.png" for i in range(4)]
    assert main(["eval", "--data", str(data), "--checkpoint", str(out / "best.ckpt"), "--beam", "3"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1].startswith("accuracy\t")


def test_console_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "utrnet.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "experiment-dots" in proc.stdout


@pytest.mark.slow
def test_predict_with_overfit_checkpoint_emits_ground_truth(overfit_unet, capsys):
    labels = (overfit_unet.data_dir / "labels.tsv").read_text(encoding="utf-8").splitlines()
    rel, truth = labels[0].split("\t")
    code = main(["predict", "--checkpoint", str(overfit_unet.out_dir / "best.ckpt"),
                 "--images", str(overfit_unet.data_dir / rel)])
    assert code == EXIT_OK
    assert capsys.readouterr().out == f"{rel.split('/')[-1]}\t{truth}\n"


def test_experiment_dots_small_run_archives_reports(tmp_path, capsys):
    out = tmp_path / "dots"
    argv = ["experiment-dots", "--out", str(out), "--seeds", "0", "--n-train", "4", "--n-test", "2",
            "--max-iter", "2", "--batch-size", "2"]
    assert main(argv) == EXIT_OK
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert [r["backbone"] for r in report["results"]] == ["unet", "lowres-baseline"]
    assert set(report["groups"]) == {"dot", "unique"}
    assert report["settings"]["max_words"] == 1
    assert capsys.readouterr().out.splitlines()[-1].startswith("dot_wins\t")
