import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentlab.analysis import (MetricsReport, accuracy_known,
                                compute_metrics_report, confidence_histogram,
                                confusion_views, load_report_table, nmi,
                                project_2d, sweep_curves)
from intentlab.corpus import OPEN_LABEL
from intentlab.detect import DetectionResult


# accuracy


def test_accuracy_known_counts_open_as_error():
    assert accuracy_known(["a", "b", OPEN_LABEL], ["a", "b", "b"]) == pytest.approx(2 / 3)
    assert accuracy_known(["a"], ["a"]) == 1.0


def test_accuracy_known_input_errors():
    with pytest.raises(ValueError):
        accuracy_known(["a"], [])
    with pytest.raises(ValueError):
        accuracy_known([], [])


# NMI


def test_nmi_identical_labelings():
    assert nmi([0, 1, 2, 0], [0, 1, 2, 0]) == 1.0


def test_nmi_same_partition_different_names():
    assert nmi([0, 0, 1], ["x", "x", "y"]) == pytest.approx(1.0)


def test_nmi_hand_computed_value():
    # joint {(0,0): 2, (1,1): 1, (2,1): 1}: MI = ln 2, H = 1.5 ln 2 and ln 2,
    # so NMI = 1 / sqrt(1.5)
    assert nmi([0, 0, 1, 2], [0, 0, 1, 1]) == pytest.approx(0.816496580927726, abs=1e-12)


def test_nmi_independent_labelings():
    a = [0, 1] * 50
    b = [0] * 50 + [1] * 50
    assert nmi(a, b) == pytest.approx(0.0, abs=1e-12)


def test_nmi_degenerate_conventions():
    assert nmi(["k"] * 4, ["m"] * 4) == 1.0
    assert nmi(["k"] * 4, [0, 0, 1, 1]) == 0.0
    assert nmi([0, 0, 1, 1], ["k"] * 4) == 0.0


def test_nmi_input_errors():
    with pytest.raises(ValueError):
        nmi([0], [0, 1])
    with pytest.raises(ValueError):
        nmi([], [])


@settings(deadline=None, max_examples=60)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=30), st.randoms())
def test_nmi_symmetric_relabel_invariant_and_bounded(a, rnd):
    b = [rnd.randint(0, 3) for _ in a]
    value = nmi(a, b)
    assert 0.0 <= value <= 1.0
    assert nmi(b, a) == pytest.approx(value, abs=1e-12)
    # renaming clusters never changes the score
    names = "pqrst"
    assert nmi([names[x] for x in a], b) == pytest.approx(value, abs=1e-12)


# confusion


def test_confusion_views_hand_case():
    views = confusion_views(["a", "b", "a"], ["a", "a", "b"])
    assert views["labels"] == ["a", "b"]
    assert views["matrix"] == [[1, 1], [1, 0]]
    assert views["per_class"] == {"a": {"correct": 1, "false": 1},
                                  "b": {"correct": 0, "false": 1}}


def test_confusion_views_includes_prediction_only_labels():
    views = confusion_views([OPEN_LABEL, "a"], ["a", "a"])
    assert OPEN_LABEL in views["labels"]
    assert views["per_class"]["a"] == {"correct": 1, "false": 1}


def test_confusion_views_errors():
    with pytest.raises(ValueError):
        confusion_views(["a"], [])
    with pytest.raises(ValueError):
        confusion_views([], [])


# confidence histogram


def test_confidence_histogram_bins_by_population():
    result = DetectionResult(("a", "b", OPEN_LABEL, OPEN_LABEL),
                             np.array([0.05, 0.55, 0.95, 0.45]), "softmax-max")
    hist = confidence_histogram(result, [True, True, False, False], bins=10)
    assert len(hist["edges"]) == 11
    assert hist["known"] == [1, 0, 0, 0, 0, 1, 0, 0, 0, 0]
    assert hist["open"] == [0, 0, 0, 0, 1, 0, 0, 0, 0, 1]
    assert hist["semantics"] == "softmax-max"


def test_confidence_histogram_score_one_lands_in_last_bin():
    result = DetectionResult(("a",), np.array([1.0]), "boundary-margin")
    hist = confidence_histogram(result, [True], bins=4)
    assert hist["known"] == [0, 0, 0, 1]


def test_confidence_histogram_errors():
    result = DetectionResult(("a",), np.array([0.5]), "softmax-max")
    with pytest.raises(ValueError):
        confidence_histogram(result, [True], bins=1)
    with pytest.raises(ValueError):
        confidence_histogram(result, [True, False])


# 2-D projection


def test_project_2d_components_are_orthonormal():
    x = np.random.default_rng(0).normal(size=(40, 6))
    out = project_2d(x)
    comps = np.asarray(out["components"])
    np.testing.assert_allclose(comps @ comps.T, np.eye(2), atol=1e-10)
    assert out["explained"][0] >= out["explained"][1] > 0


def test_project_2d_recovers_rank_two_data():
    rng = np.random.default_rng(1)
    coords = rng.normal(size=(30, 2)) * [5.0, 2.0]
    basis = np.linalg.qr(rng.normal(size=(6, 2)))[0].T
    x = coords @ basis
    out = project_2d(x)
    points = np.asarray(out["points"])
    comps = np.asarray(out["components"])
    np.testing.assert_allclose(points @ comps, x - x.mean(axis=0), atol=1e-8)


def test_project_2d_sign_convention():
    x = np.random.default_rng(2).normal(size=(25, 4))
    comps = np.asarray(project_2d(x)["components"])
    for row in comps:
        assert row[np.argmax(np.abs(row))] > 0


def test_project_2d_projects_centers_alongside_points():
    x = np.random.default_rng(3).normal(size=(20, 5))
    out = project_2d(x, centers=x[:3])
    np.testing.assert_allclose(out["centers"], out["points"][:3], atol=1e-12)


def test_project_2d_input_errors():
    with pytest.raises(ValueError):
        project_2d(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        project_2d(np.zeros((4, 1)))
    with pytest.raises(ValueError):
        project_2d(np.zeros(4))
    with pytest.raises(ValueError):
        project_2d(np.ones((5, 3)))  # zero variance


# sweep curves


def _rec(dataset, kir, lr, **metrics):
    return {"dataset": dataset, "kir": kir, "lr": lr, "metrics": metrics}


def test_sweep_curves_sorts_points_and_series():
    out = sweep_curves([
        _rec("zeta", 0.75, 1.0, acc=90.0),
        _rec("zeta", 0.25, 1.0, acc=80.0),
        _rec("zeta", 0.5, 0.5, acc=84.0),
        _rec("zeta", 0.25, 0.5, acc=70.0),
        _rec("alpha", 0.5, 1.0, acc=99.0, nmi=50.0),
    ])
    keys = [(s["dataset"], s["metric"]) for s in out["series"]]
    assert keys == [("alpha", "acc"), ("alpha", "nmi"), ("zeta", "acc")]
    zeta = out["series"][2]
    assert [(p["kir"], p["lr"]) for p in zeta["points"]] == [
        (0.25, 0.5), (0.25, 1.0), (0.5, 0.5), (0.75, 1.0)]
    assert zeta["values"] == [70.0, 80.0, 84.0, 90.0]


def test_sweep_curves_values_pass_through_untouched():
    out = sweep_curves([_rec("d", 0.25, 1.0, acc=89.65)])
    assert out["series"][0]["values"] == [89.65]


def test_sweep_curves_duplicate_key_rejected():
    with pytest.raises(ValueError, match="duplicate sweep key"):
        sweep_curves([_rec("d", 0.25, 1.0, acc=1.0), _rec("d", 0.25, 1.0, acc=2.0)])


def test_sweep_curves_empty_rejected():
    with pytest.raises(ValueError):
        sweep_curves([])


def test_load_report_table_roundtrip(tmp_path):
    path = tmp_path / "table.tsv"
    path.write_text("dataset\tkir\tlr\tacc\tnmi\n"
                    "banking\t0.25\t1.0\t81.43\t79.61\n"
                    "banking\t0.5\t1.0\t86.29\t83.9\n", encoding="utf-8")
    records = load_report_table(path)
    assert records == [
        {"dataset": "banking", "kir": 0.25, "lr": 1.0,
         "metrics": {"acc": 81.43, "nmi": 79.61}},
        {"dataset": "banking", "kir": 0.5, "lr": 1.0,
         "metrics": {"acc": 86.29, "nmi": 83.9}}]
    series = sweep_curves(records)["series"]
    assert series[0]["values"] == [81.43, 86.29]


def test_load_report_table_header_errors(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("kir\tlr\tacc\n0.25\t1.0\t80\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_report_table(bad)
    bad.write_text("dataset\tkir\tlr\nd\t0.25\t1.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="no metric columns"):
        load_report_table(bad)


# metrics report


def test_compute_metrics_report_hand_case():
    detected = ["a", OPEN_LABEL, OPEN_LABEL, OPEN_LABEL]
    golds = ["a", "a", OPEN_LABEL, OPEN_LABEL]
    report = compute_metrics_report(detected, golds,
                                    ["cluster:0", "cluster:1"], ["g1", "g2"])
    assert report.known_acc == pytest.approx(0.5)
    assert report.open_nmi == pytest.approx(1.0)
    assert report.per_class["a"] == {"correct": 1, "false": 1}
    assert OPEN_LABEL in report.confusion["labels"]


def test_compute_metrics_report_degenerate_populations():
    all_open = compute_metrics_report([OPEN_LABEL], [OPEN_LABEL], ["c"], ["g"])
    assert all_open.known_acc == 0.0
    no_open = compute_metrics_report(["a"], ["a"], [], [])
    assert no_open.open_nmi == 0.0


def test_metrics_report_serializes_byte_identically():
    kwargs = dict(detected_labels=["a", "b"], gold_labels=["a", "b"],
                  open_group_pred=[], open_group_gold=[])
    r1 = compute_metrics_report(**kwargs, context={"b": 1, "a": 2})
    r2 = compute_metrics_report(**kwargs, context={"a": 2, "b": 1})
    assert r1.to_json() == r2.to_json()
    assert json.loads(r1.to_json())["format"] == "intentlab-metrics"


def test_metrics_report_roundtrip_and_format_guard():
    report = compute_metrics_report(["a"], ["a"], [], [], context={"run": "r1"})
    back = MetricsReport.from_jsonable(json.loads(report.to_json()))
    assert back == report
    with pytest.raises(ValueError):
        MetricsReport.from_jsonable({"format": "other"})


def test_protocol_note_travels_with_the_report():
    report = compute_metrics_report(["a"], ["a"], [], [])
    payload = json.loads(report.to_json())
    assert "known_acc" in payload["protocol"]
    assert OPEN_LABEL in payload["protocol"]
