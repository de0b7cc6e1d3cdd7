import json

import numpy as np
import pytest

from graphdrift.errors import InvalidConfigError
from graphdrift.experiment import (Experiment, ExperimentSpec, list_presets, load_collections,
                                   load_spec, run_experiment)

SMALL = {
    "id": "tiny",
    "dataset": {"kind": "synthetic", "seed": 0,
                "spec": {"num_classes": 4, "vertices_range": [3, 5], "coordinate_noise": 0.05,
                         "class_separation": 1.0, "graphs_per_class": 40}},
    "nominal_classes": ["A", "B"], "non_nominal_classes": ["C", "D"],
    "M": 3, "n": 5, "arl0_target": 50, "replicates": 3, "seed": 11,
    "tc_size": 40, "tp_size": 60, "kcentres_repeats": 4, "calibration_sims": 20_000,
}


def small(**kw):
    return ExperimentSpec.from_dict({**SMALL, **kw})


def test_presets_load_and_encode_class_splits():
    names = list_presets()
    assert {"L-D2", "L-D5", "L-O", "L-S", "MUT", "AIDS"} <= set(names)
    for n in names:
        load_spec(n)
    s = load_spec("L-O")
    assert s.nominal_classes == ("A", "E", "F", "H") and s.non_nominal_classes == ("F", "H", "I", "K")
    assert load_spec("L-D2", replicates=7).replicates == 7


@pytest.mark.parametrize("bad", [{"nominal_classes": []}, {"replicates": 0},
                                 {"detector": "other"}, {"unknown_field": 1},
                                 {"dataset": {"kind": "web"}}, {"cost_model": {"node_insert": -1}}])
def test_spec_validation(bad):
    with pytest.raises((InvalidConfigError, ValueError)):
        ExperimentSpec.from_dict({**SMALL, **bad})


def test_missing_preset_classes_and_data(monkeypatch):
    with pytest.raises(InvalidConfigError):
        load_spec("nope")
    with pytest.raises(InvalidConfigError):
        load_collections(small(nominal_classes=["Z"]))
    monkeypatch.delenv("GRAPHDRIFT_DATA", raising=False)
    with pytest.raises(InvalidConfigError):
        load_collections(load_spec("L-D2"))


def test_single_prototype_detector_is_main_with_m1():
    s = small(detector="M1")
    assert s.normalized() == small(M=1, n=25)


def test_run_writes_artifacts_and_is_deterministic(tmp_path):
    spec = small()
    _, summ = run_experiment(spec, tmp_path / "a")
    run_experiment(spec, tmp_path / "b", threads=2)
    for f in ("metrics.csv", "summary.json", "trace_0.svg", "thresholds_3_50.json"):
        assert (tmp_path / "a" / f).exists()
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "trace_0.svg").read_bytes() == (tmp_path / "b" / "trace_0.svg").read_bytes()
    assert len(a.decode().splitlines()) == 4
    m = json.loads((tmp_path / "a" / "summary.json").read_text())["metrics"]
    assert {"dcr", "dcr_ci", "arl0", "arl0_ci", "dod", "dod_ci", "fa1000", "fa1000_std"} <= set(m)


def test_threshold_cache_is_reused(tmp_path):
    spec = small(replicates=2)
    run_experiment(spec, tmp_path)
    f = tmp_path / "thresholds_3_50.json"
    stamp = f.stat().st_mtime_ns
    run_experiment(spec, tmp_path)
    assert f.stat().st_mtime_ns == stamp


def test_m1_config_bit_identical(tmp_path):
    run_experiment(small(detector="M1", replicates=2), tmp_path / "m1")
    run_experiment(small(M=1, n=25, replicates=2), tmp_path / "main")
    assert (tmp_path / "m1" / "metrics.csv").read_bytes() == \
        (tmp_path / "main" / "metrics.csv").read_bytes()


@pytest.mark.parametrize("det", ["density", "spectral_gap"])
def test_scalar_detectors_run(det, tmp_path):
    res, summ = run_experiment(small(detector=det, replicates=2), tmp_path)
    assert summ["experiment"]["n"] == 1
    assert len(res) == 2


def test_null_experiment_runs():
    res, summ = run_experiment(small(non_nominal_classes=["A", "B"], replicates=2))
    assert summ["replicates"] == 2


def test_well_separated_change_is_detected():
    res, summ = run_experiment(small(replicates=3))
    assert summ["metrics"]["dcr"] == 1.0
