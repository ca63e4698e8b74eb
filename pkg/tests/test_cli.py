import json
import subprocess
import sys

import numpy as np
import pytest

from bmaoma import io
from bmaoma.cli import main
from bmaoma.laplace import (block_eigenvalues, hessian_blocks, log_evidence,
                            posterior_weights)
from bmaoma.map_trainer import neg_log_posterior_grad, train_map


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    summary = json.loads(out) if code == 0 else None
    return code, summary, err


@pytest.fixture
def data(tmp_path):
    rng = np.random.default_rng(7)
    y = rng.integers(0, 3, size=120)
    X = np.eye(3)[y] @ rng.normal(size=(3, 4)) * 2 + rng.normal(size=(120, 4))
    io.write_fmat(X, tmp_path / "x.fmat")
    io.write_lbl(y, 3, tmp_path / "y.lbl")
    return tmp_path


def test_missing_alpha_is_usage_error(data, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train-map", "--features", str(data / "x.fmat"),
              "--labels", str(data / "y.lbl"), "--out", str(data / "h.fmat")])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_zero_epochs_is_usage_error(data):
    with pytest.raises(SystemExit) as exc:
        main(["train-map", "--features", str(data / "x.fmat"), "--labels",
              str(data / "y.lbl"), "--alpha", "1", "--epochs", "0",
              "--out", str(data / "h.fmat")])
    assert exc.value.code == 2


def test_train_head_passes_tolerance_on_reload(data, capsys):
    code, summary, _ = run(capsys, "train-map", "--features", data / "x.fmat",
                           "--labels", data / "y.lbl", "--alpha", 1,
                           "--out", data / "h.fmat")
    assert code == 0 and summary["converged"]
    head = io.read_head(data / "h.fmat")
    X, (y, _) = io.read_fmat(data / "x.fmat"), io.read_lbl(data / "y.lbl")
    assert np.max(np.abs(neg_log_posterior_grad(head, X, y))) <= 1e-4


def test_evidence_matches_library(data, capsys):
    run(capsys, "train-map", "--features", data / "x.fmat", "--labels",
        data / "y.lbl", "--alpha", 1, "--out", data / "h.fmat")
    code, summary, _ = run(capsys, "evidence", "--features", data / "x.fmat",
                           "--labels", data / "y.lbl", "--head", data / "h.fmat",
                           "--out", data / "ev.json")
    assert code == 0
    X, (y, _) = io.read_fmat(data / "x.fmat"), io.read_lbl(data / "y.lbl")
    head = train_map(X, y, 1.0)
    rec = log_evidence(X, y, head, block_eigenvalues(hessian_blocks(X, head)))
    assert io.read_evidence(data / "ev.json").total == rec.total
    assert summary["model_id"] == "h"


def test_subsample_clamp_warns(data, capsys):
    run(capsys, "train-map", "--features", data / "x.fmat", "--labels",
        data / "y.lbl", "--alpha", 1, "--out", data / "h.fmat")
    code, summary, err = run(capsys, "evidence", "--features", data / "x.fmat",
                             "--labels", data / "y.lbl", "--head", data / "h.fmat",
                             "--subsample", 10000, "--out", data / "ev.json")
    assert code == 0 and summary["subsample"] == 120
    assert "clamped" in err


def test_corrupt_head_exit_3(data, capsys):
    run(capsys, "train-map", "--features", data / "x.fmat", "--labels",
        data / "y.lbl", "--alpha", 1, "--out", data / "h.fmat")
    raw = (data / "h.fmat").read_bytes()
    (data / "h.fmat").write_bytes(b"JUNK" + raw[4:])
    code, _, err = run(capsys, "evidence", "--features", data / "x.fmat",
                       "--labels", data / "y.lbl", "--head", data / "h.fmat",
                       "--out", data / "ev.json")
    assert code == 3 and "magic" in err


def test_bma_weights_single_and_identical(data, capsys):
    rec = {"log_lik_map": -40.0, "prior_quad": 1.0, "log_det_term": 2.0,
           "n_train": 50, "alpha": 1.0}
    (data / "a.json").write_text(json.dumps(rec))
    code, summary, _ = run(capsys, "bma-weights", "--evidence", data / "a.json",
                           "--out", data / "w.json")
    assert code == 0 and summary["weights"] == [1.0]
    code, summary, _ = run(capsys, "bma-weights", "--evidence", data / "a.json",
                           data / "a.json", "--out", data / "w.json")
    assert summary["weights"] == [0.5, 0.5]


def test_mcc_on_five_classes_exit_2(tmp_path, capsys):
    io.write_fmat(np.full((3, 5), 0.2), tmp_path / "p.fmat")
    io.write_lbl([0, 3, 4], 5, tmp_path / "y.lbl")
    code, _, _ = run(capsys, "eval", "--pred", tmp_path / "p.fmat", "--labels",
                     tmp_path / "y.lbl", "--metric", "mcc")
    assert code == 2


def test_weighted_mode_without_weights_exit_2(tmp_path, capsys):
    io.write_fmat(np.full((3, 2), 0.5), tmp_path / "p.fmat")
    code, _, _ = run(capsys, "predict", "--mode", "bma", "--probs",
                     tmp_path / "p.fmat", "--out", tmp_path / "o.fmat")
    assert code == 2


def test_avg_warns_about_weights(tmp_path, capsys):
    io.write_fmat(np.array([[1.0, 0.0]]), tmp_path / "a.fmat")
    io.write_fmat(np.array([[0.0, 1.0]]), tmp_path / "b.fmat")
    io.write_weights([1.0, 0.0], tmp_path / "w.json")
    code, summary, err = run(capsys, "predict", "--mode", "avg", "--probs",
                             tmp_path / "a.fmat", tmp_path / "b.fmat",
                             "--weights", tmp_path / "w.json",
                             "--out", tmp_path / "o.fmat")
    assert code == 0 and "ignores --weights" in err
    assert io.read_fmat(tmp_path / "o.fmat").tolist() == [[0.5, 0.5]]


def test_nonstochastic_probs_exit_3(tmp_path, capsys):
    io.write_fmat(np.array([[0.9, 0.9]]), tmp_path / "a.fmat")
    code, _, _ = run(capsys, "oma-fit", "--probs", tmp_path / "a.fmat",
                     "--out", tmp_path / "b.json")
    assert code == 3


def test_missing_input_exit_3(tmp_path, capsys):
    code, _, err = run(capsys, "probs", "--features", tmp_path / "none.fmat",
                       "--head", tmp_path / "h.fmat", "--out", tmp_path / "p.fmat")
    assert code == 3 and "none.fmat" in err


def _pipeline(d, capsys):
    """Train, score and ensemble the fixture; return the artifact paths."""
    run(capsys, "make-fixture", "--out", d)
    ids = ["informative", "noise_0", "noise_1"]
    outputs = []
    for mid in ids:
        head, ev = d / f"{mid}.head.fmat", d / f"{mid}.ev.json"
        assert run(capsys, "train-map", "--features", d / f"{mid}_train.fmat",
                   "--labels", d / "train.lbl", "--alpha", 1, "--seed", 0,
                   "--out", head)[0] == 0
        assert run(capsys, "evidence", "--features", d / f"{mid}_train.fmat",
                   "--labels", d / "train.lbl", "--head", head, "--id", mid,
                   "--out", ev)[0] == 0
        for split in ("train", "val"):
            assert run(capsys, "probs", "--features", d / f"{mid}_{split}.fmat",
                       "--head", head, "--out", d / f"{mid}_{split}.probs.fmat")[0] == 0
        outputs += [head, head.with_suffix(".json"), ev]
    evs = [d / f"{m}.ev.json" for m in ids]
    val = [d / f"{m}_val.probs.fmat" for m in ids]
    train = [d / f"{m}_train.probs.fmat" for m in ids]
    steps = [
        ("bma-weights", "--evidence", *evs, "--out", d / "bma.json"),
        ("zeroshot-prior", "--probs", *train, "--labels", d / "train.lbl",
         "--out", d / "w0.json"),
        ("oma-fit", "--probs", *val, "--prior-weights", d / "bma.json",
         "--lambda", 0.1, "--lr", 0.1, "--epochs", 100, "--out", d / "oma.json"),
        ("predict", "--mode", "bma", "--probs", *val, "--weights", d / "bma.json",
         "--out", d / "bma_val.fmat"),
        ("eval", "--probs", *val, "--labels", d / "val.lbl", "--mode", "bma",
         "--weights", d / "bma.json", "--out", d / "report.json"),
        ("hessian-dump", "--features", d / "informative_train.fmat", "--head",
         d / "informative.head.fmat", "--classes", 3, "--dims", 4,
         "--out", d / "h.csv"),
    ]
    for step in steps:
        code, _, err = run(capsys, *step)
        assert code == 0, err
    outputs += [d / "bma.json", d / "w0.json", d / "oma.json", d / "bma_val.fmat",
                d / "report.json", d / "h.csv", *val, *train]
    return outputs


def test_full_pipeline_is_byte_reproducible(tmp_path, capsys):
    first = _pipeline(tmp_path / "a", capsys)
    second = _pipeline(tmp_path / "b", capsys)
    for p, q in zip(first, second):
        assert p.read_bytes() == q.read_bytes(), p.name

    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["mode"] == "bma"
    assert [m["id"] for m in report["members"]] == ["informative", "noise_0", "noise_1"]
    records = [io.read_evidence(tmp_path / "a" / f"{m}.ev.json")
               for m in ("informative", "noise_0", "noise_1")]
    np.testing.assert_array_equal(io.read_weights(tmp_path / "a" / "bma.json"),
                                  posterior_weights(records))
    for name in ("bma.json", "w0.json", "oma.json"):
        assert abs(io.read_weights(tmp_path / "a" / name).sum() - 1.0) <= 1e-9


def test_console_entry_point(tmp_path):
    io.write_fmat(np.full((2, 2), 0.5), tmp_path / "p.fmat")
    io.write_lbl([0, 1], 2, tmp_path / "y.lbl")
    proc = subprocess.run([sys.executable, "-m", "bmaoma", "eval", "--pred",
                           str(tmp_path / "p.fmat"), "--labels",
                           str(tmp_path / "y.lbl"), "--threads", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout) == {"command": "eval", "metric": "accuracy",
                                       "value": 0.5}
