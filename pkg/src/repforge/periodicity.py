"""Classical repetition counting over feature sequences.

A temporal self-similarity matrix is built from per-dimension z-normalized
features.  Per-frame periodicity is then read off the matrix diagonal: frame
i repeats with period q when its similarity row carries peaks at lags that
are multiples of q.  Only part of a sequence may repeat, so counting is
restricted to the earliest run of frames whose periodicity score clears a
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeSegment, round_half_away
from .density import merge_active_runs

# Bridges short score dropouts inside a repetition run without fusing
# separate bursts.
DEFAULT_RUN_GAP = 25.0

# Spacing of the candidate-period grid (frames).  Repetition cycles rarely
# have integer frame lengths, so combs are evaluated at fractional lags.
_PERIOD_STEP = 0.25

# A comb's t-statistic saturates the [0, 1] score at roughly 4 sigma.
_SCORE_SCALE = 4.0

# Keep the chosen period at the smallest candidate within this factor of the
# best comb response; guards against period doubling.
_SUBHARMONIC_TOLERANCE = 0.93

# Frames must also match their nearest cycle (lag +-period); the score is
# damped when that evidence is below this many sigmas.  Kills the one-sided
# response of frames that merely see a distant repetition inside their window.
_NEAREST_CYCLE_SIGMA = 2.0

# Block edges must sit on frames showing true cyclic alternation: similarity
# one cycle away minus similarity half a cycle away, as a share of the
# self-peak's prominence.  Skirts of the self-peak decay monotonically and
# fail this; genuine cycles alternate valley/peak.
_ALTERNATION_FLOOR = 0.4

# Edge extension only crosses frames whose one-cycle return recovers almost
# the full self-similarity; frames watching a repetition from outside peak
# well below this.
_EXTENSION_RETURN = 0.93


class DegenerateSequenceError(ValueError):
    """All frames identical: self-similarity is undefined."""


@dataclass
class FeatureSequence:
    """T x D real-valued embedding sequence at a fixed frame rate."""

    frames: np.ndarray
    fps: float

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError("frames must be a 2-d (T, D) array")
        t, d = self.frames.shape
        if t < 4:
            raise ValueError(f"need at least 4 frames, got {t}")
        if d < 1:
            raise ValueError("need at least 1 feature dimension")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("features must be finite")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


@dataclass(frozen=True)
class PeriodicityResult:
    per_frame_period: np.ndarray
    per_frame_score: np.ndarray
    count: int
    segment: TimeSegment | None
    mean_score: float


def self_similarity(seq: FeatureSequence, temperature: float | None = None) -> np.ndarray:
    """Row-stochastic T x T similarity matrix of the frame features.

    Features are z-normalized per dimension, then entry (i, j) is the softmax
    over j of the negative squared distance between frames i and j divided by
    ``temperature``.  The default temperature is the median pairwise squared
    distance.
    """
    frames = seq.frames
    std = frames.std(axis=0)
    if np.all(std < 1e-12):
        raise DegenerateSequenceError("all frames are identical")
    safe_std = np.where(std < 1e-12, 1.0, std)
    z = (frames - frames.mean(axis=0)) / safe_std

    sq_norms = np.sum(z * z, axis=1)
    d2 = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (z @ z.T)
    np.maximum(d2, 0.0, out=d2)

    if temperature is None:
        off_diag = d2[~np.eye(len(d2), dtype=bool)]
        temperature = float(np.median(off_diag))
        if temperature <= 0:
            temperature = float(off_diag.mean())
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")

    logits = -d2 / temperature
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    return weights


def estimate_period(
    row: np.ndarray,
    min_period: float = 2.0,
    max_period: float | None = None,
) -> tuple[float, float]:
    """Dominant period (frames) of a 1-d signal, with a confidence score.

    The mean-removed signal is Fourier-analyzed over the band of periods in
    [min_period, max_period] (default T/2).  The score is the peak bin's share
    of the band power; the period is refined below bin resolution by parabolic
    interpolation around the peak.  Degenerate rows yield (0, 0).
    """
    row = np.asarray(row, dtype=np.float64)
    t = row.size
    if max_period is None:
        max_period = t / 2.0
    if t < 2 * min_period:
        return (0.0, 0.0)

    spectrum = np.abs(np.fft.rfft(row - row.mean())) ** 2
    k_lo = max(1, int(np.ceil(t / max_period)))
    k_hi = min(spectrum.size - 1, int(np.floor(t / min_period)))
    if k_hi < k_lo:
        return (0.0, 0.0)

    band = spectrum[k_lo : k_hi + 1]
    total = float(band.sum())
    if total <= 0 or not np.isfinite(total):
        return (0.0, 0.0)

    k = k_lo + int(np.argmax(band))
    score = min(1.0, float(spectrum[k]) / total)

    k_refined = float(k)
    if 1 <= k - 1 and k + 1 < spectrum.size:
        left, center, right = spectrum[k - 1], spectrum[k], spectrum[k + 1]
        denom = left - 2.0 * center + right
        if denom < 0:
            delta = 0.5 * (left - right) / denom
            k_refined = k + float(np.clip(delta, -0.5, 0.5))

    period = t / k_refined
    period = float(np.clip(period, min_period, max_period))
    return (period, score)


def _lag_profiles(tsm: np.ndarray, half_width: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal-aligned similarity profiles.

    Returns (profiles, valid) of shape (T, 2*half_width + 1) where column
    ``half_width + delta`` holds ``tsm[i, i + delta]``; out-of-range lags are
    zero with valid = False.
    """
    t = tsm.shape[0]
    width = 2 * half_width + 1
    padded = np.zeros((t, t + 2 * half_width))
    mask = np.zeros((t, t + 2 * half_width), dtype=bool)
    padded[:, half_width : half_width + t] = tsm
    mask[:, half_width : half_width + t] = True
    cols = np.arange(width)[None, :] + np.arange(t)[:, None]
    rows = np.arange(t)[:, None]
    return padded[rows, cols], mask[rows, cols]


def _departure_radius(profiles: np.ndarray, valid: np.ndarray, half_width: int) -> np.ndarray:
    """Lag at which each frame's similarity first genuinely departs.

    Genuine cycles must depart from the frame and come back, so candidate
    periods below this radius would sample the self-peak's own skirt and are
    inadmissible.  A side departs at its first clear valley: a local minimum
    of the smoothed profile in the lower half of the peak's prominence, or
    the first drop near baseline, whichever comes first.
    """
    with_nan = np.where(valid, profiles, np.nan)
    baseline = np.nanmedian(with_nan, axis=1)
    prominence = profiles[:, half_width] - baseline
    low_level = (baseline + 0.25 * prominence)[:, None]
    half_level = (baseline + 0.5 * prominence)[:, None]

    # smooth along the lag axis so single noisy dips inside the self-peak's
    # plateau do not fake an early departure
    kernel = np.ones(5) / 5.0
    padded = np.pad(profiles, ((0, 0), (2, 2)), mode="edge")
    smoothed = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, padded)

    interior = smoothed[:, 1:-1]
    is_valley = (
        (interior <= smoothed[:, :-2])
        & (interior <= smoothed[:, 2:])
        & (interior <= half_level)
    )
    valley = np.zeros_like(smoothed, dtype=bool)
    valley[:, 1:-1] = is_valley
    departed = valley | (smoothed <= low_level) | ~valid

    right = departed[:, half_width + 1 :]
    left = departed[:, :half_width][:, ::-1]

    def first_true(rows: np.ndarray) -> np.ndarray:
        any_true = rows.any(axis=1)
        idx = rows.argmax(axis=1).astype(np.float64) + 1.0
        return np.where(any_true, idx, rows.shape[1] + 1.0)

    return np.maximum(first_true(right), first_true(left))


def _comb_response(
    profiles: np.ndarray,
    valid: np.ndarray,
    half_width: int,
    periods: np.ndarray,
    min_admissible: np.ndarray,
) -> np.ndarray:
    """t-statistic of comb lags vs. the remaining window, per frame and period.

    For each candidate period q, the comb samples the profile at lags that are
    multiples of q (linearly interpolated); the statistic compares their mean
    against the rest of the window.  Smooth aperiodic structure contributes
    equally to both sides and cancels.  Periods below a frame's admissible
    minimum are skipped.
    """
    t = profiles.shape[0]
    center = half_width

    masked = np.where(valid, profiles, 0.0)
    total_sum = masked.sum(axis=1)
    total_sq = (masked * masked).sum(axis=1)
    total_n = valid.sum(axis=1).astype(np.float64)
    center_val = profiles[:, center]

    def t_statistic(comb_sum, comb_sq, comb_n):
        rest_n = total_n - comb_n - 1.0
        usable = (comb_n >= 2) & (rest_n >= 8)
        safe_comb_n = np.maximum(comb_n, 1.0)
        safe_rest_n = np.maximum(rest_n, 1.0)
        mean_comb = comb_sum / safe_comb_n
        rest_sum = total_sum - comb_sum - center_val
        rest_sq = total_sq - comb_sq - center_val * center_val
        mean_rest = rest_sum / safe_rest_n
        var_rest = np.maximum(rest_sq / safe_rest_n - mean_rest * mean_rest, 1e-30)
        se = np.sqrt(var_rest * (1.0 / safe_comb_n + 1.0 / safe_rest_n))
        tstat = (mean_comb - mean_rest) / se
        # genuine cycle matches are big in absolute terms; capping by the
        # effect size stops dense small-period combs from turning a tiny
        # fluctuation into a significant-looking response
        effect = (mean_comb - mean_rest) / np.sqrt(var_rest)
        return np.where(usable, np.minimum(tstat, 3.0 * effect), 0.0)

    tstats = np.zeros((t, periods.size))
    for qi, q in enumerate(periods):
        comb_sum = np.zeros(t)
        comb_sq = np.zeros(t)
        comb_n = np.zeros(t)
        ring1 = None
        max_m = int(np.floor(half_width / q))
        for m in range(1, max_m + 1):
            for offset in (center + m * q, center - m * q):
                lo = int(np.floor(offset))
                frac = offset - lo
                if lo < 0 or lo + 1 > 2 * half_width:
                    continue
                hi = min(lo + 1, 2 * half_width)
                ok = valid[:, lo] & valid[:, hi]
                val = profiles[:, lo] * (1 - frac) + profiles[:, hi] * frac
                comb_sum += np.where(ok, val, 0.0)
                comb_sq += np.where(ok, val * val, 0.0)
                comb_n += ok
            if m == 1:
                # nearest-ring evidence alone carries two-cycle repetitions,
                # but only beyond the self-peak's own shoulder
                ring1 = np.where(q >= min_admissible, t_statistic(comb_sum, comb_sq, comb_n), 0.0)
        full = t_statistic(comb_sum, comb_sq, comb_n)
        tstats[:, qi] = np.maximum(full, ring1) if ring1 is not None else full
    return tstats


def _median_filter(values: np.ndarray, width: int = 5) -> np.ndarray:
    pad = width // 2
    padded = np.pad(values, pad, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, width)
    return np.median(windows, axis=1)


def _interp_at(profiles: np.ndarray, valid: np.ndarray, offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame linear interpolation of the lag profile at real offsets."""
    width = profiles.shape[1]
    clipped = np.clip(offsets, 0, width - 1 - 1e-9)
    lo = np.floor(clipped).astype(int)
    hi = np.minimum(lo + 1, width - 1)
    frac = clipped - lo
    rows = np.arange(profiles.shape[0])
    values = profiles[rows, lo] * (1 - frac) + profiles[rows, hi] * frac
    ok = valid[rows, lo] & valid[rows, hi] & (offsets >= 0) & (offsets <= width - 1)
    return values, ok


def _nearest_cycle_sigma(
    profiles: np.ndarray,
    valid: np.ndarray,
    half_width: int,
    periods: np.ndarray,
    min_admissible: np.ndarray,
) -> np.ndarray:
    """How strongly each frame matches its own adjacent cycles, in sigmas.

    The similarity at lag +-period is compared against the window baseline;
    the better side wins, so segment-edge frames keep their one good side.
    Periods inside the self-peak's shoulder carry no evidence.
    """
    masked = np.where(valid, profiles, 0.0)
    n = np.maximum(valid.sum(axis=1).astype(np.float64), 2.0)
    mean = masked.sum(axis=1) / n
    var = np.maximum((masked * masked).sum(axis=1) / n - mean * mean, 1e-30)
    std = np.sqrt(var)

    center = float(half_width)
    right, ok_r = _interp_at(profiles, valid, center + periods)
    left, ok_l = _interp_at(profiles, valid, center - periods)
    z_right = np.where(ok_r, (right - mean) / std, -np.inf)
    z_left = np.where(ok_l, (left - mean) / std, -np.inf)
    z = np.maximum(z_right, z_left)
    usable = np.isfinite(z) & (periods > 0) & (periods >= min_admissible)
    return np.where(usable, z, 0.0)


def _raw_periodicity(
    seq: FeatureSequence,
    min_period: float,
    max_period: float,
    temperature: float | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    t = seq.num_frames
    tsm = self_similarity(seq, temperature)
    half_width = min(t - 1, int(np.ceil(2 * max_period)))
    profiles, valid = _lag_profiles(tsm, half_width)

    grid = np.arange(min_period, max_period + 1e-9, _PERIOD_STEP)
    radius = _departure_radius(profiles, valid, half_width)
    tstats = _comb_response(profiles, valid, half_width, grid, radius)

    rows = np.arange(t)
    chosen_idx = tstats.argmax(axis=1)
    # period-doubling guard: a divisor of the winner that responds almost as
    # strongly is the true fundamental
    for divisor in (3, 2):
        target = grid[chosen_idx] / divisor
        cand_idx = np.clip(
            np.round((target - grid[0]) / _PERIOD_STEP).astype(int), 0, grid.size - 1
        )
        best_probe = cand_idx.copy()
        for nudge in (-1, 1):
            probe = np.clip(cand_idx + nudge, 0, grid.size - 1)
            best_probe = np.where(
                tstats[rows, probe] > tstats[rows, best_probe], probe, best_probe
            )
        take = (
            (tstats[rows, best_probe] >= _SUBHARMONIC_TOLERANCE * tstats[rows, chosen_idx])
            & (best_probe < chosen_idx)
        )
        chosen_idx = np.where(take, best_probe, chosen_idx)
    chosen_t = tstats[rows, chosen_idx]

    periods = grid[chosen_idx]
    # sub-grid refinement on the response curve
    inner = (chosen_idx >= 1) & (chosen_idx <= grid.size - 2)
    li = np.clip(chosen_idx - 1, 0, grid.size - 1)
    ri = np.clip(chosen_idx + 1, 0, grid.size - 1)
    left_t, right_t = tstats[rows, li], tstats[rows, ri]
    denom = left_t - 2.0 * chosen_t + right_t
    shift = np.where(
        inner & (denom < 0), 0.5 * (left_t - right_t) / np.where(denom < 0, denom, 1.0), 0.0
    )
    periods = periods + np.clip(shift, -0.5, 0.5) * _PERIOD_STEP
    periods = np.where(chosen_t > 0, periods, 0.0)
    scores = 1.0 - np.exp(-np.maximum(chosen_t, 0.0) / _SCORE_SCALE)

    cycle_sigma = _nearest_cycle_sigma(profiles, valid, half_width, periods, radius)
    scores *= np.clip(cycle_sigma / _NEAREST_CYCLE_SIGMA, 0.0, 1.0)

    # a frame truly inside a repetition alternates: high similarity one cycle
    # away, low half a cycle away.  Frames merely near a repetition ride the
    # self-peak's monotone skirt and fail this.
    with_nan = np.where(valid, profiles, np.nan)
    baseline = np.nanmedian(with_nan, axis=1)
    prominence = np.maximum(profiles[:, half_width] - baseline, 1e-12)
    right, ok_r = _interp_at(profiles, valid, half_width + periods)
    left, ok_l = _interp_at(profiles, valid, half_width - periods)
    right_half, ok_rh = _interp_at(profiles, valid, half_width + periods / 2)
    left_half, ok_lh = _interp_at(profiles, valid, half_width - periods / 2)
    alt_right = np.where(ok_r & ok_rh, (right - right_half) / prominence, -np.inf)
    alt_left = np.where(ok_l & ok_lh, (left - left_half) / prominence, -np.inf)
    alternation = np.maximum(alt_right, alt_left)
    anchored = np.isfinite(alternation) & (periods > 0) & (alternation >= _ALTERNATION_FLOOR)

    best_return = np.maximum(np.where(ok_r, right, -np.inf), np.where(ok_l, left, -np.inf))
    return_fraction = np.where(
        np.isfinite(best_return), (best_return - baseline) / prominence, 0.0
    )
    return periods, scores, anchored, return_fraction


def periodicity_profile(
    seq: FeatureSequence,
    min_period: float = 2.0,
    max_period: float | None = None,
    temperature: float | None = None,
    smooth: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (period, score) arrays for the whole sequence.

    Each frame is judged from the window of its similarity row centered on
    the diagonal (half-width twice the longest candidate period).  The score
    maps the comb t-statistic into [0, 1]; the period is the smallest
    candidate whose comb response is within tolerance of the best, which
    suppresses period doubling.
    """
    t = seq.num_frames
    if max_period is None:
        max_period = max(4.0, t / 8.0)
    if not 0 < min_period < max_period:
        raise ValueError(f"need 0 < min_period < max_period, got [{min_period}, {max_period}]")

    periods, scores, _, _ = _raw_periodicity(seq, min_period, max_period, temperature)
    if smooth:
        scores = _median_filter(scores)
        periods = _median_filter(periods)
    return periods, scores


def _consensus_candidates(positive: np.ndarray) -> list[float]:
    """Period-cluster medians from geometric binning, largest bins first.

    Fixed-ratio bins keep a small genuine cluster separate from a broad smear
    of junk estimates, which chain-style clustering would swallow.
    """
    logs = np.log(positive)
    bins = np.floor((logs - logs.min()) / np.log(1.2)).astype(int)
    sized = []
    for b in np.unique(bins):
        members = positive[bins == b]
        sized.append((members.size, float(np.median(members))))
    sized.sort(key=lambda item: -item[0])
    return [median for _, median in sized[:6]]


def _blocks_for_consensus(
    run: np.ndarray, consensus: float
) -> list[tuple[int, int, float]]:
    """Plausible blocks of frames tracking ``consensus``, as local slices."""
    # frames whose estimate is a harmonic of the consensus are still cycles,
    # just locally misread; genuinely alien periods break the block
    ratio = np.where(run > 0, run / consensus, np.inf)
    harmonic = (
        (np.abs(ratio - 1.0) <= 0.2)
        | (np.abs(ratio - 2.0) <= 0.16)
        | (np.abs(ratio - 3.0) <= 0.24)
        | (np.abs(ratio - 0.5) <= 0.04)
    )
    compatible = np.flatnonzero(harmonic)
    if not compatible.size:
        return []
    bridge = max(3.0, 0.3 * consensus)

    out = []
    for start, stop in merge_active_runs(compatible, bridge):
        block = run[start:stop]
        strict_mask = (block > 0) & (np.abs(block - consensus) <= 0.2 * consensus)
        strict_idx = np.flatnonzero(strict_mask)
        if not strict_idx.size:
            continue
        # anchor the edges where consensus-tracking frames are locally dense;
        # sparse lucky matches fraying off the block ends are leakage
        half = max(3, int(round(consensus / 2)))
        densities = []
        for i in strict_idx:
            lo, hi = max(0, i - half), min(block.size, i + half + 1)
            densities.append(strict_mask[lo:hi].mean())
        dense = strict_idx[np.asarray(densities) >= 0.5]
        if not dense.size:
            continue
        start, stop = start + int(dense[0]), start + int(dense[-1]) + 1
        block = run[start:stop]
        strict = block[(block > 0) & (np.abs(block - consensus) <= 0.2 * consensus)]
        # most of a genuine block tracks the consensus period; loose clusters
        # of accidental matches do not reach this coverage
        if strict.size < 0.5 * (stop - start):
            continue
        block_median = float(np.median(strict))
        if (stop - start) < 1.3 * block_median:
            continue
        spread = float(np.median(np.abs(strict - block_median)))
        if spread > 0.15 * block_median:
            continue
        out.append((start, stop, block_median))
    return out


def _coherent_blocks(
    raw_periods: np.ndarray, first: int, last_exclusive: int
) -> list[tuple[int, int, float]]:
    """Period-coherent blocks inside a run.

    A block is a stretch of frames whose raw period estimates agree on one
    consensus period, allowing short incompatible patches.  Each period
    cluster present in the run proposes its own consensus, so junk estimates
    around a genuine repetition cannot mask it.
    """
    run = raw_periods[first:last_exclusive]
    positive = run[run > 0]
    if not positive.size:
        return []
    blocks: list[tuple[int, int, float]] = []
    for consensus in _consensus_candidates(positive):
        blocks.extend(
            (first + start, first + stop, median)
            for start, stop, median in _blocks_for_consensus(run, consensus)
        )
    return blocks


def _refit_edges(
    first: int, last_exclusive: int, period: float, anchored: np.ndarray
) -> tuple[int, int]:
    """Drop whole edge cycles whose frames rarely return to full
    self-similarity one cycle away, judged against the neighbouring cycle.

    Frames just outside a repetition can mirror its period through the
    similarity columns, but their own cycle-return evidence is much thinner
    than that of the true first cycle; a sharp contrast marks leakage.
    """
    step = max(4, int(round(period)))
    for _ in range(3):
        if last_exclusive - first < 2 * step:
            break
        if anchored[first : first + step].mean() < 0.5:
            first += step
        else:
            break
    for _ in range(3):
        if last_exclusive - first < 2 * step:
            break
        if anchored[last_exclusive - step : last_exclusive].mean() < 0.5:
            last_exclusive -= step
        else:
            break
    return first, last_exclusive


def _extend_edges(
    first: int,
    last_exclusive: int,
    period: float,
    raw_periods: np.ndarray,
    anchored: np.ndarray,
    return_fraction: np.ndarray,
) -> tuple[int, int]:
    """Grow the block over adjacent frames that still clearly track the cycle.

    Frames at the segment tail often drop below the score threshold (their
    forward evidence is gone) while their period stays sound and their
    one-cycle return is near-perfect; they belong to the repetition and must
    be counted.  Up to a few locally misread frames may be skipped when a
    tracking frame lies just beyond them.
    """

    def tracks(index: int) -> bool:
        p = raw_periods[index]
        if p <= 0 or return_fraction[index] < _EXTENSION_RETURN:
            return False
        if abs(p - period) <= 0.2 * period:
            return bool(anchored[index])
        # a doubled estimate is still the same cycle; alternation is
        # meaningless at that reading, so the near-perfect return suffices
        return abs(p - 2 * period) <= 0.16 * (2 * period)

    def grow(edge: int, direction: int, limit: int) -> int:
        grown = 0
        while grown < limit:
            probe = edge + direction
            skipped = 0
            while (
                0 <= probe < raw_periods.size and skipped <= 3 and not tracks(probe)
            ):
                probe += direction
                skipped += 1
            if not (0 <= probe < raw_periods.size) or not tracks(probe):
                break
            step = abs(probe - edge)
            if grown + step > limit:
                break
            edge = probe
            grown += step
        return edge

    limit = int(np.ceil(period))
    new_first = grow(first, -1, limit)
    new_last = grow(last_exclusive - 1, +1, limit) + 1
    return new_first, new_last


def count_and_localize(
    seq: FeatureSequence,
    score_threshold: float = 0.3,
    gap: float = DEFAULT_RUN_GAP,
    min_period: float = 2.0,
    max_period: float | None = None,
    temperature: float | None = None,
) -> PeriodicityResult:
    """Count repetitions in the earliest periodic run of the sequence.

    Frames whose periodicity score reaches ``score_threshold`` are periodic
    and merge into runs; the earliest run containing a period-coherent block
    of at least one and a half cycles is the repetition segment, and the
    count is the rounded sum of per-frame cycle rates (1/period) across it.
    """
    t = seq.num_frames
    if max_period is None:
        max_period = max(4.0, t / 8.0)
    if not 0 < min_period < max_period:
        raise ValueError(f"need 0 < min_period < max_period, got [{min_period}, {max_period}]")

    raw_periods, raw_scores, anchored, return_fraction = _raw_periodicity(
        seq, min_period, max_period, temperature
    )
    scores = _median_filter(raw_scores)
    periods = _median_filter(raw_periods)
    mean_score = float(scores.mean())

    active = np.flatnonzero(scores >= score_threshold)
    if active.size == 0:
        return PeriodicityResult(periods, scores, 0, None, mean_score)

    blocks: list[tuple[int, int, float]] = []
    for run_first, run_last in merge_active_runs(active, gap):
        blocks.extend(_coherent_blocks(raw_periods, run_first, run_last))
    if not blocks:
        return PeriodicityResult(periods, scores, 0, None, mean_score)

    # earliest of the serious contenders: stray mini-blocks ahead of a long
    # repetition must not pre-empt it
    longest = max(stop - start for start, stop, _ in blocks)
    contenders = [b for b in blocks if b[1] - b[0] >= 0.5 * longest]
    first, last_exclusive, median_period = min(
        contenders, key=lambda b: (b[0], -(b[1] - b[0]))
    )
    first, last_exclusive = _refit_edges(first, last_exclusive, median_period, anchored)
    first, last_exclusive = _extend_edges(
        first, last_exclusive, median_period, raw_periods, anchored, return_fraction
    )
    # clamp interior outliers to the block consensus before summing rates:
    # a handful of aliased frames must not shift the count
    block_periods = periods[first:last_exclusive].copy()
    off = (block_periods <= 0) | (np.abs(block_periods - median_period) > 0.2 * median_period)
    block_periods[off] = median_period
    rate_sum = float(np.sum(1.0 / block_periods))
    count = round_half_away(rate_sum)
    if count < 1:
        return PeriodicityResult(periods, scores, 0, None, mean_score)

    segment = TimeSegment(first / seq.fps, last_exclusive / seq.fps)
    return PeriodicityResult(periods, scores, count, segment, mean_score)


def candidate_filter(seq: FeatureSequence, threshold: float = 0.25) -> bool:
    """Stage-1 gate: keep a clip whose mean periodicity score clears the bar."""
    _, scores = periodicity_profile(seq)
    return float(scores.mean()) >= threshold
