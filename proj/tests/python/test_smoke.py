import math

import pytest

import shloss


def test_losses():
    assert shloss.bce(0.9, True) == pytest.approx(0.1053605156578263, rel=1e-14)
    assert shloss.ce([0.5, 0.5]) == pytest.approx(1.3862943611198906, rel=1e-14)
    assert shloss.sh([0.9], 2.4) == pytest.approx(0.043900214857427626, rel=1e-13)
    assert shloss.sh_focal([0.5, 0.9], 2.4, 2.0) == pytest.approx(0.072641833456901913, rel=1e-13)
    assert shloss.cb_weight(100, 0.99) == pytest.approx(0.015773675300856054, rel=1e-13)
    assert shloss.focal([0.3, 0.8], 0.0) == pytest.approx(shloss.ce([0.3, 0.8]), abs=1e-12)


def test_loss_and_grad():
    loss, grad = shloss.loss_and_grad([0.0], [1])
    assert loss == pytest.approx(math.log(2.0))
    assert grad == pytest.approx([-0.5])
    with pytest.raises(shloss.InvalidArgument):
        shloss.loss_and_grad([0.0, 1.0], [1])
    with pytest.raises(shloss.InvalidArgument):
        shloss.loss_and_grad([0.0], [1], family="hinge")


def test_segmentation_and_beta():
    segs = shloss.segment_all([100, 10, 9, 8], 0.5)
    assert [(s[0], s[1]) for s in segs] == [(1, 1), (2, 4)]
    assert shloss.segment_tail([100, 10, 9, 8], 0.5) == 1
    worked = [(1, 1, 0.0, 1.0), (2, 3, 0.0, 1.0), (4, 4, 0.0, 1.0)]
    assert shloss.beta_sh([2, 3, 4], worked, [10, 20, 40], 0) == 2.4


def test_cleaner_and_metrics():
    kept = shloss.clean_codes({"42789": 0.64, "4263": 0.50, "42822": 0.72, "3659": 0.44})
    assert kept == {"42789", "42822"}
    assert shloss.cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(math.sqrt(0.5))
    assert shloss.micro_f1(2, 1, 1) == pytest.approx(2 / 3)


def test_pipeline(tmp_path):
    data = tmp_path / "data.jsonl"
    shloss.synth(str(data), seed=2, classes=10, samples=400, ratio=20.0, dim=8, noise=0.3)
    overrides = {
        "dataset": str(data),
        "out": str(tmp_path / "out"),
        "min_count": "1",
        "split": "60:20:20",
        "max_steps": "50",
    }
    outcome = shloss.run_pipeline(overrides=overrides)
    assert [name for name, _ in outcome] == ["ingest", "clean", "threshold", "segment", "split", "train", "eval"]
    assert not any(skipped for _, skipped in outcome)
    assert all(skipped for _, skipped in shloss.run_pipeline(overrides=overrides))
    assert (tmp_path / "out" / "eval" / "comparison.txt").is_file()

    table = shloss.compare_losses(overrides=overrides)
    assert list(table) == ["BCE", "SH_FOCAL"]
    assert 0.0 <= table["BCE"]["Total"] <= 1.0
    with pytest.raises(shloss.StageError):
        shloss.compare_losses(overrides=overrides, families=["FOCAL"])


def test_missing_prerequisite(tmp_path):
    data = tmp_path / "data.jsonl"
    shloss.synth(str(data), seed=1, classes=6, samples=120, dim=4)
    overrides = {"dataset": str(data), "out": str(tmp_path / "out"), "min_count": "1"}
    with pytest.raises(shloss.StageError, match="missing prerequisite"):
        shloss.run_pipeline(overrides=overrides, stages="train")
