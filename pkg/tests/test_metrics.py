from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, strategies as st

from repforge.core import TimeSegment
from repforge.consistency import segment_iou
from repforge.metrics import EvalPair, Normalization, earliest_segment_rule, evaluate


SEG = TimeSegment(2.0, 6.0)


def pair(pred, true, pred_seg=SEG, true_seg=SEG, mismatched=False):
    return EvalPair(
        predicted_count=pred,
        true_count=true,
        true_segment=true_seg,
        predicted_segment=pred_seg,
        mismatched=mismatched,
    )


def test_perfect_prediction() -> None:
    report = evaluate([pair(4, 4)])
    assert report.mae == 0.0
    assert report.oboe == 0.0
    assert report.obze == 0.0
    assert report.rmse == 0.0
    assert report.iou == 1.0
    assert report.n == 1


def test_single_row_arithmetic() -> None:
    report = evaluate([pair(5, 4)])
    assert report.mae == pytest.approx(0.25)
    assert report.oboe == 0.0
    assert report.obze == 1.0
    assert report.rmse == pytest.approx(0.25)


def test_two_row_arithmetic() -> None:
    report = evaluate([pair(7, 4), pair(4, 4)])
    assert report.mae == pytest.approx(0.375)
    assert report.oboe == 0.5
    assert report.obze == 0.5


def test_absolute_mode() -> None:
    report = evaluate([pair(7, 4)], Normalization.ABSOLUTE)
    assert report.mae == 3.0
    assert report.rmse == 3.0
    assert report.normalization is Normalization.ABSOLUTE


def test_missing_predicted_segment_scores_zero_iou() -> None:
    report = evaluate([pair(4, 4, pred_seg=None)])
    assert report.iou == 0.0


def test_mismatched_rows_need_absolute_mode() -> None:
    rows = [EvalPair(predicted_count=0, true_count=0, mismatched=True)]
    with pytest.raises(ValueError):
        evaluate(rows, Normalization.BY_TRUTH)
    report = evaluate(rows, Normalization.ABSOLUTE)
    assert report.obze == 0.0

    fired = [EvalPair(predicted_count=3, true_count=0, mismatched=True)]
    assert evaluate(fired, Normalization.ABSOLUTE).obze == 1.0


def test_eval_pair_invariants() -> None:
    with pytest.raises(ValueError):
        EvalPair(predicted_count=-1, true_count=4, true_segment=SEG)
    with pytest.raises(ValueError):
        EvalPair(predicted_count=1, true_count=1, true_segment=SEG)


def test_empty_input_rejected() -> None:
    with pytest.raises(ValueError):
        evaluate([])


def _brute_force(pairs, normalization):
    n = len(pairs)
    abs_errs, sq_errs, ious = [], [], []
    oboe = obze = 0
    for p in pairs:
        d = p.predicted_count - p.true_count
        e = abs(d) / p.true_count if normalization is Normalization.BY_TRUTH else abs(d)
        abs_errs.append(e)
        sq_errs.append(e * e)
        if abs(d) > 1:
            oboe += 1
        if d != 0:
            obze += 1
        if p.true_segment is not None:
            ious.append(
                segment_iou(p.predicted_segment, p.true_segment)
                if p.predicted_segment is not None
                else 0.0
            )
    return (
        math.fsum(abs_errs) / n,
        oboe / n,
        obze / n,
        math.sqrt(math.fsum(sq_errs) / n),
        math.fsum(ious) / len(ious) if ious else 0.0,
    )


def _random_pairs(rng, n):
    out = []
    for _ in range(n):
        true = rng.randint(2, 30)
        pred = max(0, true + rng.randint(-5, 5))
        s = rng.uniform(0, 8)
        true_seg = TimeSegment(s, min(10, s + rng.uniform(0.1, 2)))
        if rng.random() < 0.2:
            pred_seg = None
        else:
            ps = rng.uniform(0, 8)
            pred_seg = TimeSegment(ps, min(10, ps + rng.uniform(0.1, 2)))
        out.append(pair(pred, true, pred_seg, true_seg))
    return out


def test_matches_bruteforce_oracle() -> None:
    rng = random.Random(1234)
    for _ in range(50):
        pairs = _random_pairs(rng, rng.randint(1, 40))
        mode = Normalization.BY_TRUTH if rng.random() < 0.5 else Normalization.ABSOLUTE
        report = evaluate(pairs, mode)
        mae, oboe, obze, rmse, iou = _brute_force(pairs, mode)
        assert report.mae == pytest.approx(mae, abs=1e-12)
        assert report.oboe == pytest.approx(oboe, abs=1e-12)
        assert report.obze == pytest.approx(obze, abs=1e-12)
        assert report.rmse == pytest.approx(rmse, abs=1e-12)
        assert report.iou == pytest.approx(iou, abs=1e-12)


def test_permutation_invariance_exact() -> None:
    rng = random.Random(7)
    pairs = _random_pairs(rng, 25)
    report = evaluate(pairs)
    shuffled = list(pairs)
    rng.shuffle(shuffled)
    other = evaluate(shuffled)
    assert (report.mae, report.oboe, report.obze, report.rmse, report.iou) == (
        other.mae, other.oboe, other.obze, other.rmse, other.iou
    )


@given(st.integers(2, 30), st.integers(0, 40), st.integers(1, 5))
def test_by_truth_scale_invariance(true, pred, k) -> None:
    base = evaluate([pair(pred, true)])
    scaled = evaluate([pair(pred * k, true * k)])
    assert scaled.mae == pytest.approx(base.mae)
    assert scaled.rmse == pytest.approx(base.rmse)


def test_report_bounds_property() -> None:
    rng = random.Random(99)
    for _ in range(25):
        report = evaluate(_random_pairs(rng, rng.randint(1, 30)))
        assert 0.0 <= report.oboe <= report.obze <= 1.0
        assert 0.0 <= report.iou <= 1.0


def test_earliest_segment_rule() -> None:
    assert earliest_segment_rule([TimeSegment(3, 5), TimeSegment(1, 2)]) == TimeSegment(1, 2)
    assert earliest_segment_rule([TimeSegment(1, 4), TimeSegment(1, 2)]) == TimeSegment(1, 2)
    only = TimeSegment(0.5, 2.5)
    assert earliest_segment_rule([only]) == only
    with pytest.raises(ValueError):
        earliest_segment_rule([])
