import math
from pathlib import Path

import numpy as np
import pytest

import mortensen
from mortensen import audit

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_domain_queries():
    ball = mortensen.Domain.ball([0.0, 0.0], 1.0)
    assert ball.dim == 2
    assert ball.project([2.0, 0.0]) == pytest.approx([1.0, 0.0])
    assert ball.dist([2.0, 0.0]) == pytest.approx(1.0)
    assert ball.contains([0.0, 0.0])
    assert ball.outward_normal([0.0, 1.0]) == pytest.approx([0.0, 1.0])
    with pytest.raises(ValueError):
        ball.outward_normal([0.0, 0.0])
    with pytest.raises(ValueError):
        mortensen.Domain.interval(1.0, 0.0)
    with pytest.raises(ValueError):
        ball.project([1.0])


def test_config_validation(tmp_path):
    for cfg in sorted(CONFIGS.glob("*.toml")):
        mortensen.validate_config(cfg)
    bad = tmp_path / "bad.toml"
    bad.write_text(CONFIGS.joinpath("bench_1d_attract.toml").read_text().replace("values = [10.0, 100.0, 1000.0, 10000.0]", "values = []"))
    with pytest.raises(ValueError):
        mortensen.validate_config(bad)


def test_kalman_run_is_audited(tmp_path):
    report = mortensen.run_scenario(CONFIGS / "bench_kalman_scalar.toml", tmp_path)
    assert report["kind"] == "kalman-xcheck"
    assert all(c["pass"] for c in report["checks"]), report["checks"]
    assert report["metrics"]["dp_sup_error"] <= 5e-2
    assert mortensen.verify_manifest(tmp_path) == []
    assert all(ok for *_, ok in audit.audit(tmp_path))


def test_value_field_roundtrip(tmp_path):
    report = mortensen.run_scenario(CONFIGS / "bench_kalman_scalar.toml", tmp_path, seed=3, kind="twin")
    assert report["seed"] == 3
    field = mortensen.read_vfld(tmp_path / "value.vfld")
    assert field.values.shape == (len(field.times), len(field.axes[0]))
    assert np.isfinite(field.values).all()
    assert math.isclose(field.times[-1], 1.0)
    written = mortensen.emit_plotdata(tmp_path)
    assert any(p.endswith("plot_observer_vs_truth.csv") for p in map(str, written))
    assert all(ok for *_, ok in audit.audit(tmp_path))


def test_tampered_artifact_is_detected(tmp_path):
    mortensen.run_scenario(CONFIGS / "bench_kalman_scalar.toml", tmp_path, kind="simulate")
    with open(tmp_path / "truth.csv", "a") as f:
        f.write("\n")
    assert mortensen.verify_manifest(tmp_path) == ["truth.csv"]
