"""Metric tests. AUC is verified two independent ways: the rank-based
statistic inside the library against a brute-force pairwise count and the
trapezoidal area of the swept curve computed here."""
import math
import random

import numpy as np
import pytest

from dermpipe.metrics import ConfusionMatrix, confusion_at_threshold, roc_auc, sens_spec_acc


def brute_force_auc(scored, positive_class):
    """Oracle: count every (positive, negative) pair directly."""
    pos = [s for s, l in scored if l == positive_class]
    neg = [s for s, l in scored if l != positive_class]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def trapezoid_area(points):
    """Oracle: explicit trapezoid rule over the swept curve."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y1 + y0) / 2.0
    return area


def random_scored(rng, n, with_ties=False):
    scored = []
    labels = ["neg", "pos"]
    while True:
        scored = []
        for _ in range(n):
            score = rng.random()
            if with_ties:
                score = round(score, 1)
            scored.append((score, labels[rng.random() < 0.4]))
        present = {l for _, l in scored}
        if len(present) == 2:
            return scored


# --------------------------------------------------------------------------
# confusion_at_threshold
# --------------------------------------------------------------------------

def test_perfectly_scored_data():
    scored = [(0.9, "pos"), (0.8, "pos"), (0.2, "neg"), (0.1, "neg")]
    cm = confusion_at_threshold(scored, 0.5, "pos")
    assert (cm.fp, cm.fn) == (0, 0)
    assert (cm.tp, cm.tn) == (2, 2)


def test_threshold_zero_predicts_everything_positive():
    scored = [(0.9, "pos"), (0.1, "neg"), (0.0, "neg")]
    cm = confusion_at_threshold(scored, 0.0, "pos")
    assert (cm.tn, cm.fn) == (0, 0)
    assert (cm.tp, cm.fp) == (1, 2)


def test_hand_enumerated_four_samples():
    scored = [(0.9, "pos"), (0.4, "pos"), (0.5, "neg"), (0.1, "neg")]
    cm = confusion_at_threshold(scored, 0.5, "pos")
    assert (cm.tp, cm.fn, cm.fp, cm.tn) == (1, 1, 1, 1)


def test_tie_with_threshold_counts_positive():
    cm = confusion_at_threshold([(0.5, "pos"), (0.5, "neg")], 0.5, "pos")
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (1, 1, 0, 0)


def test_counts_partition_the_samples():
    rng = random.Random(0)
    scored = random_scored(rng, 57)
    cm = confusion_at_threshold(scored, 0.37, "pos")
    assert cm.total == 57


def test_empty_scoring_rejected():
    with pytest.raises(ValueError):
        confusion_at_threshold([], 0.5, "pos")


# --------------------------------------------------------------------------
# sens_spec_acc
# --------------------------------------------------------------------------

def test_sens_spec_acc_worked_example():
    sens, spec, acc = sens_spec_acc(ConfusionMatrix(tp=3, fn=1, tn=8, fp=2))
    assert sens == pytest.approx(0.75)
    assert spec == pytest.approx(0.8)
    assert acc == pytest.approx(11 / 14)


def test_all_correct():
    assert sens_spec_acc(ConfusionMatrix(tp=5, fn=0, tn=5, fp=0)) == (1.0, 1.0, 1.0)


def test_predict_all_positive():
    # sensitivity 1, specificity 0, accuracy = prevalence
    sens, spec, acc = sens_spec_acc(ConfusionMatrix(tp=3, fn=0, tn=0, fp=7))
    assert (sens, spec) == (1.0, 0.0)
    assert acc == pytest.approx(0.3)


def test_degenerate_denominators_are_none_not_zero():
    sens, spec, acc = sens_spec_acc(ConfusionMatrix(tp=0, fn=0, tn=3, fp=1))
    assert sens is None
    assert spec == pytest.approx(0.75)
    sens, spec, acc = sens_spec_acc(ConfusionMatrix(tp=2, fn=1, tn=0, fp=0))
    assert spec is None
    assert sens == pytest.approx(2 / 3)


# --------------------------------------------------------------------------
# roc_auc
# --------------------------------------------------------------------------

def test_perfect_separation_auc_one():
    scored = [(0.9, "pos"), (0.8, "pos"), (0.3, "neg"), (0.1, "neg")]
    assert roc_auc(scored, "pos").auc == 1.0


def test_all_identical_scores_auc_half():
    scored = [(0.5, "pos"), (0.5, "neg"), (0.5, "pos"), (0.5, "neg")]
    assert roc_auc(scored, "pos").auc == pytest.approx(0.5)


def test_hand_case_auc_three_quarters():
    # pairs: (.9,.5)+ (.9,.1)+ (.4,.5)- (.4,.1)+ => 3/4
    scored = [(0.9, "pos"), (0.4, "pos"), (0.5, "neg"), (0.1, "neg")]
    assert roc_auc(scored, "pos").auc == pytest.approx(0.75)


def test_single_class_rejected():
    with pytest.raises(ValueError):
        roc_auc([(0.5, "pos"), (0.6, "pos")], "pos")


def test_curve_endpoints_and_monotone_fpr():
    rng = random.Random(1)
    for trial in range(25):
        scored = random_scored(rng, 40, with_ties=trial % 2 == 0)
        curve = roc_auc(scored, "pos")
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)
        fprs = [p[0] for p in curve.points]
        tprs = [p[1] for p in curve.points]
        assert fprs == sorted(fprs)
        assert tprs == sorted(tprs)


def test_auc_matches_brute_force_pair_count():
    rng = random.Random(2)
    for trial in range(30):
        scored = random_scored(rng, 25, with_ties=trial % 3 == 0)
        curve = roc_auc(scored, "pos")
        assert curve.auc == pytest.approx(brute_force_auc(scored, "pos"), abs=1e-12)


def test_auc_equals_trapezoid_area_of_curve():
    rng = random.Random(3)
    for trial in range(200):
        scored = random_scored(rng, 30, with_ties=trial % 2 == 0)
        curve = roc_auc(scored, "pos")
        assert abs(curve.auc - trapezoid_area(curve.points)) < 1e-9


def test_auc_invariant_under_monotone_transforms():
    rng = random.Random(4)
    transforms = [
        lambda x: 3.0 * x + 1.0,
        lambda x: x ** 3,
        lambda x: math.exp(x),
        lambda x: math.atan(x),
    ]
    for trial in range(40):
        scored = random_scored(rng, 30, with_ties=True)
        base = roc_auc(scored, "pos").auc
        fn = transforms[trial % len(transforms)]
        mapped = [(fn(s), l) for s, l in scored]
        assert roc_auc(mapped, "pos").auc == pytest.approx(base, abs=1e-12)


def test_auc_label_swap_antisymmetry():
    rng = random.Random(5)
    for _ in range(20):
        scored = random_scored(rng, 30, with_ties=True)
        auc_pos = roc_auc(scored, "pos").auc
        auc_neg = roc_auc(scored, "neg").auc
        assert auc_pos + auc_neg == pytest.approx(1.0, abs=1e-12)


def test_threshold_monotonicity():
    rng = random.Random(6)
    scored = random_scored(rng, 60, with_ties=True)
    prev_tp = prev_tn = None
    for threshold in sorted({s for s, _ in scored} | {0.0, 1.0}):
        cm = confusion_at_threshold(scored, threshold, "pos")
        if prev_tp is not None:
            assert cm.tp <= prev_tp  # raising the threshold never adds positives
            assert cm.tn >= prev_tn
        prev_tp, prev_tn = cm.tp, cm.tn
