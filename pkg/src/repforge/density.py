"""Per-frame density targets and the associated training-loss arithmetic.

A ground-truth density carries one unit impulse at the temporal mid-point of
each repetition period and zeros elsewhere, so the vector sums exactly to the
repetition count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeSegment, round_half_away


@dataclass
class DensityVector:
    """Non-negative per-frame density, one entry per frame."""

    values: np.ndarray
    fps: float

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("density must be a non-empty 1-d vector")
        if np.any(self.values < 0):
            raise ValueError("density entries must be >= 0")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class LossWeights:
    """Scalars of the combined training loss: (l1 + l2 + l3 + w*l4) / norm."""

    contrastive_weight: float = 10.0
    normalizer: float = 4.0
    density_scale: float = 100.0

    def __post_init__(self) -> None:
        for name in ("contrastive_weight", "normalizer", "density_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def build_density(
    segment: TimeSegment,
    count: int,
    num_frames: int,
    fps: float,
    smoothing_sigma: float | None = None,
) -> DensityVector:
    """Impulse-train density for ``count`` uniform periods over ``segment``.

    Period ``i`` covers an equal share of the segment and contributes a unit
    impulse at the frame nearest its mid-point; colliding impulses accumulate,
    so the result always sums to ``count`` exactly.  ``smoothing_sigma``
    (frames) optionally spreads each impulse into a Gaussian bump, rescaled so
    the sum is preserved.
    """
    if count < 1:
        raise ValueError(
            "count must be >= 1; use build_zero_target for the mismatched-text target"
        )
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    clip_end = num_frames / fps
    if segment.start < 0 or segment.end > clip_end or segment.start >= segment.end:
        raise ValueError(
            f"segment [{segment.start}, {segment.end}] outside clip [0, {clip_end:g}]"
        )

    values = np.zeros(num_frames, dtype=np.float64)
    period = (segment.end - segment.start) / count
    for i in range(count):
        midpoint = segment.start + (i + 0.5) * period
        index = min(max(round_half_away(midpoint * fps), 0), num_frames - 1)
        values[index] += 1.0

    if smoothing_sigma is not None and smoothing_sigma > 0:
        radius = max(1, int(np.ceil(4 * smoothing_sigma)))
        x = np.arange(-radius, radius + 1, dtype=np.float64)
        kernel = np.exp(-0.5 * (x / smoothing_sigma) ** 2)
        values = np.convolve(values, kernel, mode="same")
        values *= count / values.sum()

    return DensityVector(values, fps)


def build_zero_target(num_frames: int, fps: float = 1.0) -> DensityVector:
    """All-zero density: the target under mismatched text conditioning."""
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    return DensityVector(np.zeros(num_frames, dtype=np.float64), fps)


def count_from_density(density: DensityVector) -> int:
    """Whole-clip count: the rounded sum of the per-frame densities."""
    return round_half_away(float(density.values.sum()))


def merge_active_runs(active: np.ndarray, gap: float) -> list[tuple[int, int]]:
    """Group sorted active frame indices into ``[start, end)`` runs.

    Runs separated by at most ``gap`` inactive frames are merged.
    """
    runs: list[tuple[int, int]] = []
    start = prev = int(active[0])
    for index in active[1:]:
        index = int(index)
        if index - prev - 1 > gap:
            runs.append((start, prev + 1))
            start = index
        prev = index
    runs.append((start, prev + 1))
    return runs


def segment_from_density(
    density: DensityVector,
    threshold: float = 0.005,
    gap: float | None = None,
) -> TimeSegment | None:
    """Earliest active run of the density, as a time segment.

    Frames with value above ``threshold`` are active; active runs separated by
    at most ``gap`` inactive frames are merged.  When ``gap`` is omitted it is
    estimated as 1.5x the median spacing between active frames (15 frames when
    no estimate is possible).  Returns ``None`` for a fully inactive vector.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if gap is not None and gap < 0:
        raise ValueError(f"gap must be >= 0, got {gap}")

    active = np.flatnonzero(density.values > threshold)
    if active.size == 0:
        return None
    if gap is None:
        diffs = np.diff(active)
        gap = 1.5 * float(np.median(diffs)) if diffs.size else 15.0

    first, last_exclusive = merge_active_runs(active, gap)[0]
    return TimeSegment(first / density.fps, last_exclusive / density.fps)


def scaled_mse(pred: DensityVector, target: DensityVector, scale: float = 100.0) -> float:
    """MSE between densities after scaling both by ``scale``."""
    if len(pred) != len(target):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(target)}")
    diff = scale * pred.values - scale * target.values
    return float(np.mean(diff * diff))


def combined_loss(
    l_class_agnostic: float,
    l_class_aware: float,
    l_mismatch: float,
    l_contrastive: float,
    weights: LossWeights | None = None,
) -> float:
    """Weighted sum of the three counting losses and the contrastive loss."""
    w = weights or LossWeights()
    return (
        l_class_agnostic + l_class_aware + l_mismatch + w.contrastive_weight * l_contrastive
    ) / w.normalizer
