from __future__ import annotations

import numpy as np
import pytest

from repforge.consistency import segment_iou
from repforge.periodicity import (
    DegenerateSequenceError,
    FeatureSequence,
    candidate_filter,
    count_and_localize,
    estimate_period,
    periodicity_profile,
    self_similarity,
)
from repforge.synthgen import SynthSpec, generate, generate_noise


def test_feature_sequence_validation() -> None:
    with pytest.raises(ValueError):
        FeatureSequence(np.zeros((3, 2)), fps=10)
    with pytest.raises(ValueError):
        FeatureSequence(np.zeros((10,)), fps=10)
    with pytest.raises(ValueError):
        FeatureSequence(np.full((8, 2), np.nan), fps=10)


def test_self_similarity_rows_are_stochastic() -> None:
    seq, _ = generate(SynthSpec(count=5, period=12, onset=20, total_frames=120, seed=1))
    tsm = self_similarity(seq)
    assert tsm.shape == (120, 120)
    assert np.allclose(tsm.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(tsm >= 0)


def test_self_similarity_affine_invariance() -> None:
    seq, _ = generate(SynthSpec(count=4, period=15, onset=10, total_frames=100, dim=6, seed=2))
    scaled = FeatureSequence(seq.frames * 3.7 + 11.0, seq.fps)
    assert np.allclose(self_similarity(seq), self_similarity(scaled), atol=1e-6)


def test_self_similarity_degenerate_input() -> None:
    with pytest.raises(DegenerateSequenceError):
        self_similarity(FeatureSequence(np.ones((20, 4)), fps=10))


def test_self_similarity_constant_plus_noise_near_uniform() -> None:
    rng = np.random.default_rng(3)
    frames = 1.0 + rng.normal(0, 0.01, size=(50, 4))
    tsm = self_similarity(FeatureSequence(frames, fps=10))
    off_diag = tsm[~np.eye(50, dtype=bool)]
    assert off_diag.std() / off_diag.mean() < 1.0


def test_estimate_period_pure_cosine() -> None:
    row = np.cos(2 * np.pi * np.arange(200) / 20)
    period, score = estimate_period(row)
    assert abs(period - 20) <= 0.5
    assert score > 0.9


def test_estimate_period_white_noise_scores_low() -> None:
    low = sum(
        estimate_period(np.random.default_rng(seed).normal(size=200))[1] < 0.3
        for seed in range(1000)
    )
    assert low >= 990


def test_estimate_period_zero_row() -> None:
    assert estimate_period(np.zeros(64)) == (0.0, 0.0)


def test_estimate_period_time_reversal_symmetric() -> None:
    rng = np.random.default_rng(9)
    row = np.cos(2 * np.pi * np.arange(160) / 16) + 0.3 * rng.normal(size=160)
    forward, _ = estimate_period(row)
    backward, _ = estimate_period(row[::-1])
    assert forward == pytest.approx(backward, abs=1e-9)


def test_estimate_period_band_limits() -> None:
    row = np.cos(2 * np.pi * np.arange(100) / 4)
    period, _ = estimate_period(row, min_period=2, max_period=50)
    assert 2 <= period <= 50


def test_periodicity_profile_periods_below_band_cap() -> None:
    seq, _ = generate(SynthSpec(count=8, period=20, onset=30, total_frames=320, seed=4))
    periods, scores = periodicity_profile(seq)
    assert np.all(periods <= 320 / 2)
    assert np.all((scores >= 0) & (scores <= 1))


def test_count_and_localize_spec_example() -> None:
    seq, truth = generate(
        SynthSpec(count=10, period=20, onset=40, total_frames=300, dim=8, seed=7)
    )
    result = count_and_localize(seq)
    assert abs(result.count - 10) <= 1
    assert result.segment is not None
    assert segment_iou(result.segment, truth.segment) >= 0.7


def test_count_and_localize_noise_mostly_zero() -> None:
    fired = sum(
        count_and_localize(generate_noise(seed=seed)).count != 0 for seed in range(40)
    )
    assert fired <= 2


def test_count_and_localize_degenerate_propagates() -> None:
    with pytest.raises(DegenerateSequenceError):
        count_and_localize(FeatureSequence(np.zeros((40, 3)), fps=10))


def test_count_zero_means_no_segment() -> None:
    result = count_and_localize(generate_noise(seed=1))
    if result.count == 0:
        assert result.segment is None
    else:
        assert result.segment is not None


def test_candidate_filter_threshold_semantics() -> None:
    seq, _ = generate(SynthSpec(count=12, period=20, onset=20, total_frames=300, seed=5))
    assert candidate_filter(seq, threshold=0.25)
    # inclusive comparison at the exact mean score
    _, scores = periodicity_profile(seq)
    assert candidate_filter(seq, threshold=float(scores.mean()))
    assert candidate_filter(seq, threshold=0.0)
    assert not candidate_filter(generate_noise(seed=2), threshold=0.25)


def test_counter_handles_jitter_and_noise() -> None:
    spec = SynthSpec(
        count=8, period=18, jitter=0.05, onset=60, noise_snr_db=12.0,
        dim=10, total_frames=320, seed=21,
    )
    seq, truth = generate(spec)
    result = count_and_localize(seq)
    assert abs(result.count - truth.count) <= 1
    assert segment_iou(result.segment, truth.segment) >= 0.7
