"""Per-subject parameter search for the filter-bank detector.

The grid is exhaustive over (bandwidth base, gain base, harmonic weight,
window length); per-target bandwidths and gains expand each base through
the monotone f_k / f_min ramp, so higher (weaker-response) targets always
receive at least the gain and bandwidth of lower ones. A free per-target
product would explode combinatorially and make exhaustive search
impossible; the ramp keeps grids small enough to enumerate exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .baselines import PsdaConfig, cca_detect_trial, psda_detect_trial, reference_set
from .decision import Detected, WindowPick, resolve_picks
from .filterbank import FilterBank, seeded_bank
from .metrics import TrialOutcome, aggregate_report
from .signals import (
    PreprocessConfig,
    SampledSignal,
    WindowPlan,
    bandpass,
    magnitude_spectrum,
    normalize,
    sliding_windows,
)


@dataclass(frozen=True)
class LabeledTrial:
    signal: SampledSignal
    stimulus_frequency: float


@dataclass(frozen=True)
class TrainingGrid:
    """Candidate parameter values; every set must be non-empty and positive.

    ``bandwidths`` and ``gains`` are base values for the lowest target;
    the seeding ramp derives the per-target candidates from them.
    """

    bandwidths: tuple[float, ...] = (0.2, 0.4, 0.6, 1.0)
    gains: tuple[float, ...] = (1.0, 1.5, 2.0, 3.0)
    harmonic_weights: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)
    window_seconds: tuple[float, ...] = (2.0, 3.0, 4.0, 5.0, 6.0)

    def __post_init__(self):
        for name in ("bandwidths", "gains", "harmonic_weights", "window_seconds"):
            values = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, values)
            if not values:
                raise ValueError(f"empty candidate set: {name}")
            if name != "harmonic_weights" and any(v <= 0 for v in values):
                raise ValueError(f"{name} candidates must be positive")
            if name == "harmonic_weights" and any(v < 0 for v in values):
                raise ValueError("harmonic_weights candidates must be >= 0")

    @property
    def size(self) -> int:
        return (len(self.bandwidths) * len(self.gains)
                * len(self.harmonic_weights) * len(self.window_seconds))


@dataclass(frozen=True)
class GridPoint:
    bandwidth: float
    gain: float
    harmonic_weight: float
    window_seconds: float
    train_accuracy: float
    train_itr: Optional[float]
    feasible: bool = True


@dataclass(frozen=True)
class TrainingResult:
    bank: FilterBank
    plan: WindowPlan
    best: GridPoint
    trace: tuple[GridPoint, ...]


def _simulate(picks_per_trial, trials, targets_arr):
    outcomes = []
    for picks, trial in zip(picks_per_trial, trials):
        stream = (WindowPick(float(targets_arr[k]), t) for k, t in picks)
        outcomes.append(
            TrialOutcome(trial.stimulus_frequency,
                         resolve_picks(stream, trial.signal.duration))
        )
    return outcomes


def train_filter_bank(
    trials: Sequence[LabeledTrial],
    targets: Sequence[float],
    grid: TrainingGrid,
    config: PreprocessConfig,
    step_seconds: float = 1.0,
) -> TrainingResult:
    """Exhaustive search maximizing training accuracy.

    Ties break toward higher training ITR, then the shorter window, then
    the lexicographically smallest (bandwidth, gain, harmonic weight).
    Grid points whose bank would be degenerate for this target set (for
    example a bandwidth so wide that one target falls into a neighbour's
    half-peak region) are recorded infeasible and skipped.
    """
    targets = tuple(sorted(float(t) for t in targets))
    if len(targets) < 2:
        raise ValueError("training needs at least two targets")
    for target in targets:
        if not any(
            math.isclose(tr.stimulus_frequency, target, rel_tol=0, abs_tol=1e-9)
            for tr in trials
        ):
            raise ValueError(f"missing target coverage: no training trial at {target} Hz")

    rates = {tr.signal.sampling_rate for tr in trials}
    if len(rates) > 1:
        raise ValueError(f"training trials mix sampling rates: {sorted(rates)}")

    targets_arr = np.asarray(targets)
    # window-independent preprocessing, done once per trial
    prepared = [
        normalize(bandpass(tr.signal.channel(config.channel), config.band_low, config.band_high))
        for tr in trials
    ]

    trace: list[GridPoint] = []
    best_key = None
    best_point: Optional[GridPoint] = None

    for window_sec in sorted(grid.window_seconds):
        plan = WindowPlan(window_sec, step_seconds)
        spectra = []  # per trial: (end_times, magnitude matrix bins x windows)
        bin_freqs = None
        for sig in prepared:
            with warnings.catch_warnings():
                # too-short trials are a scored-as-timeout case here, not a
                # user-facing diagnostic
                warnings.simplefilter("ignore")
                windows = sliding_windows(sig, plan)
            mags, times = [], []
            for end_time, window in windows:
                spec = magnitude_spectrum(window, config)
                bin_freqs = spec.bin_frequencies
                mags.append(spec.magnitudes)
                times.append(end_time)
            spectra.append((times, np.asarray(mags).T if mags else None))
        if bin_freqs is None:
            # every trial is shorter than this window: all picks are empty,
            # so every combo scores accuracy 0 with an absent ITR
            for bandwidth, gain in product(sorted(grid.bandwidths), sorted(grid.gains)):
                for wh in sorted(grid.harmonic_weights):
                    point = GridPoint(bandwidth, gain, wh, window_sec, 0.0, None)
                    trace.append(point)
                    key = (0.0, math.inf, window_sec, bandwidth, gain, wh)
                    if best_key is None or key < best_key:
                        best_key, best_point = key, point
            continue

        for bandwidth, gain in product(sorted(grid.bandwidths), sorted(grid.gains)):
            try:
                bank = seeded_bank(targets, bandwidth, gain, harmonic_weight=0.0)
            except ValueError:
                for wh in sorted(grid.harmonic_weights):
                    trace.append(GridPoint(bandwidth, gain, wh, window_sec,
                                           0.0, None, feasible=False))
                continue
            fund = np.stack([f.response(bin_freqs) for f in bank.fundamentals])
            harm = np.stack([f.response(bin_freqs) for f in bank.harmonics])
            fund_scores = [
                (times, fund @ mag_matrix if mag_matrix is not None else None)
                for times, mag_matrix in spectra
            ]
            harm_scores = [
                harm @ mag_matrix if mag_matrix is not None else None
                for _, mag_matrix in spectra
            ]
            for wh in sorted(grid.harmonic_weights):
                picks_per_trial = []
                for (times, fs_), hs_ in zip(fund_scores, harm_scores):
                    if fs_ is None:
                        picks_per_trial.append([])
                        continue
                    total = fs_ + wh * hs_
                    picks_per_trial.append(
                        [(int(np.argmax(total[:, i])), t) for i, t in enumerate(times)]
                    )
                outcomes = _simulate(picks_per_trial, trials, targets_arr)
                report = aggregate_report("train", outcomes, n_commands=len(targets))
                acc = report.accuracy_fraction
                itr_val = report.itr_bits_per_minute
                point = GridPoint(bandwidth, gain, wh, window_sec, acc, itr_val)
                trace.append(point)
                key = (
                    -acc,
                    -(itr_val if itr_val is not None else -math.inf),
                    window_sec,
                    bandwidth,
                    gain,
                    wh,
                )
                if best_key is None or key < best_key:
                    best_key, best_point = key, point
    if best_point is None:
        raise ValueError("no feasible grid point: every window exceeded the trial length "
                         "or every bank was degenerate")
    bank = seeded_bank(targets, best_point.bandwidth, best_point.gain,
                       best_point.harmonic_weight)
    plan = WindowPlan(best_point.window_seconds, step_seconds)
    return TrainingResult(bank=bank, plan=plan, best=best_point, trace=tuple(trace))


def train_baseline_window(
    trials: Sequence[LabeledTrial],
    targets: Sequence[float],
    method: str,
    window_candidates: Sequence[float],
    config: PreprocessConfig,
    step_seconds: float = 1.0,
    harmonic_count: int = 2,
    channels: Optional[Sequence[str]] = None,
) -> tuple[WindowPlan, tuple[GridPoint, ...]]:
    """Pick the window length that maximizes a baseline's training accuracy
    (ties: higher ITR, then shorter window)."""
    if method not in ("psda", "cca"):
        raise ValueError(f"unknown baseline {method!r}")
    if not window_candidates:
        raise ValueError("empty candidate set: window_seconds")
    targets = tuple(sorted(float(t) for t in targets))
    psda_cfg = PsdaConfig.for_targets(targets) if method == "psda" else None
    trace = []
    best_key, best_plan = None, None
    for window_sec in sorted(float(w) for w in window_candidates):
        plan = WindowPlan(window_sec, step_seconds)
        outcomes = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for tr in trials:
                if method == "psda":
                    result = psda_detect_trial(tr.signal, psda_cfg, plan, config)
                else:
                    rate = tr.signal.sampling_rate
                    refs = reference_set(targets, plan, rate, harmonic_count)
                    result = cca_detect_trial(tr.signal, refs, plan, config, channels=channels)
                outcomes.append(TrialOutcome(tr.stimulus_frequency, result))
        report = aggregate_report("train", outcomes, n_commands=len(targets))
        point = GridPoint(0.0, 0.0, 0.0, window_sec,
                          report.accuracy_fraction, report.itr_bits_per_minute)
        trace.append(point)
        key = (
            -point.train_accuracy,
            -(point.train_itr if point.train_itr is not None else -math.inf),
            window_sec,
        )
        if best_key is None or key < best_key:
            best_key, best_plan = key, plan
    return best_plan, tuple(trace)
