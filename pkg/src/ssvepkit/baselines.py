"""Comparison detectors: spectral peak matching (PSDA) and canonical
correlation against sinusoidal references (CCA).

Both run under the same preprocessing, windowing and 3-of-4 decision
protocol as the filter-bank detector so the reported detection times are
comparable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .decision import DetectionResult, WindowPick, resolve_picks
from .signals import (
    PreprocessConfig,
    SampledSignal,
    Spectrum,
    WindowPlan,
    bandpass,
    magnitude_spectrum,
    normalize,
    sliding_windows,
)

RIDGE_EPSILON = 1e-8


def default_match_tolerance(targets: Sequence[float]) -> float:
    """Largest safe peak-matching slack: under half the smallest nonzero
    gap among fundamentals and second harmonics, capped at 0.25 Hz."""
    points = sorted(set([float(t) for t in targets] + [2.0 * t for t in targets]))
    gaps = [b - a for a, b in zip(points, points[1:]) if b - a > 0]
    if not gaps:
        return 0.25
    return min(0.25, 0.45 * min(gaps))


@dataclass(frozen=True)
class PsdaConfig:
    targets: tuple[float, ...]
    match_tolerance: float

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(sorted(float(t) for t in self.targets)))
        if not self.match_tolerance > 0:
            raise ValueError("match_tolerance must be positive")
        points = sorted(set(list(self.targets) + [2 * t for t in self.targets]))
        gaps = [b - a for a, b in zip(points, points[1:]) if b - a > 0]
        if gaps and self.match_tolerance >= min(gaps) / 2:
            raise ValueError(
                f"match_tolerance {self.match_tolerance} ambiguous: must stay below half "
                f"the smallest target/harmonic gap ({min(gaps) / 2})"
            )

    @classmethod
    def for_targets(cls, targets: Sequence[float]) -> "PsdaConfig":
        return cls(tuple(targets), default_match_tolerance(targets))


def psda_pick(spectrum: Spectrum, config: PsdaConfig, end_time: float = 0.0) -> WindowPick:
    """Vote from the global spectral peak.

    A peak within tolerance of a fundamental wins directly; failing that,
    one within tolerance of a second harmonic maps back to its
    fundamental; otherwise the nearest fundamental takes the vote so the
    shared decision protocol always has input.
    """
    if spectrum.magnitudes.size == 0:
        raise ValueError("cannot run peak detection on an empty spectrum")
    peak = spectrum.peak_frequency()
    for candidates in (config.targets, tuple(2 * t for t in config.targets)):
        hits = [
            (abs(peak - c), t)
            for t, c in zip(config.targets, candidates)
            if abs(peak - c) <= config.match_tolerance
        ]
        if hits:
            return WindowPick(frequency=min(hits)[1], end_time=end_time)
    nearest = min(config.targets, key=lambda t: (abs(peak - t), t))
    return WindowPick(frequency=nearest, end_time=end_time)


@dataclass(frozen=True)
class ReferenceSet:
    """Per-target sinusoidal reference matrices (sin/cos at each harmonic),
    mean-removed over the window.

    Entries normally carry 2 x harmonic_count rows; with cross-target
    exclusion active, a harmonic pair that lands exactly on another
    target's fundamental is omitted, otherwise that other target can
    never win the correlation vote (its whole signal subspace lives
    inside this entry too, which then also fits noise with its spare
    rows).
    """

    entries: dict[float, np.ndarray] = field(default_factory=dict)
    harmonic_count: int = 2

    def targets(self) -> tuple[float, ...]:
        return tuple(sorted(self.entries))


def build_references(
    target: float,
    plan: WindowPlan,
    sampling_rate: float,
    harmonic_count: int = 2,
) -> np.ndarray:
    """Rows sin(2 pi h f t), cos(2 pi h f t) for h = 1..harmonic_count over
    the window's sample instants, each row mean-removed."""
    if harmonic_count < 1:
        raise ValueError("harmonic_count must be >= 1")
    if target * harmonic_count >= sampling_rate / 2:
        raise ValueError(
            f"harmonic {harmonic_count} of {target} Hz exceeds Nyquist ({sampling_rate / 2} Hz)"
        )
    n = plan.window_samples(sampling_rate)
    t = np.arange(n) / sampling_rate
    rows = []
    for h in range(1, harmonic_count + 1):
        phase = 2 * np.pi * h * target * t
        rows.append(np.sin(phase))
        rows.append(np.cos(phase))
    ref = np.asarray(rows)
    return ref - ref.mean(axis=1, keepdims=True)


def reference_set(
    targets: Sequence[float],
    plan: WindowPlan,
    sampling_rate: float,
    harmonic_count: int = 2,
    exclude_cross_target: bool = True,
) -> ReferenceSet:
    """References for every target, excluding cross-target harmonic rows.

    When a harmonic of one target coincides with another target's
    fundamental (for example 2 x 14 Hz in a {8, 14, 28} Hz set), keeping
    that row makes the classes non-identifiable, so it is dropped unless
    ``exclude_cross_target`` is disabled.
    """
    targets = [float(t) for t in targets]
    entries = {}
    for t in targets:
        full = build_references(t, plan, sampling_rate, harmonic_count)
        keep = []
        for h in range(1, harmonic_count + 1):
            collides = h > 1 and any(
                other != t and math.isclose(h * t, other, rel_tol=1e-12, abs_tol=1e-9)
                for other in targets
            )
            if not (exclude_cross_target and collides):
                keep.extend((2 * (h - 1), 2 * (h - 1) + 1))
        entries[t] = full[keep]
    return ReferenceSet(entries=entries, harmonic_count=harmonic_count)


@dataclass(frozen=True)
class CcaSolution:
    """Largest canonical correlation plus the optimizing weight vectors."""

    rho: float
    weights_x: np.ndarray
    weights_y: np.ndarray

    def __post_init__(self):
        if not -1e-9 <= self.rho <= 1 + 1e-9:
            raise ValueError(f"canonical correlation {self.rho} outside [0, 1]")


def _inv_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = linalg.eigh(cov)
    vals = np.clip(vals, np.finfo(float).tiny, None)
    return (vecs / np.sqrt(vals)) @ vecs.T


def cca_max_correlation(X: np.ndarray, Y: np.ndarray) -> CcaSolution:
    """Largest canonical correlation between the row spaces of X and Y.

    Covariances are centered and ridge-stabilized with
    ``RIDGE_EPSILON * mean(diag)`` so near-singular many-channel windows
    stay solvable; on well-conditioned input the ridge perturbs rho by
    far less than 1e-6. Solved as the spectral norm of the whitened
    cross-covariance.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if not (np.isfinite(X).all() and np.isfinite(Y).all()):
        raise ValueError("non-finite values in CCA input")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"sample counts differ: {X.shape[1]} vs {Y.shape[1]}")
    n = X.shape[1]
    if n <= X.shape[0] + Y.shape[0]:
        raise ValueError(
            f"underdetermined: {n} samples for {X.shape[0]} + {Y.shape[0]} variates"
        )
    Xc = X - X.mean(axis=1, keepdims=True)
    Yc = Y - Y.mean(axis=1, keepdims=True)
    cxx = Xc @ Xc.T / (n - 1)
    cyy = Yc @ Yc.T / (n - 1)
    cxy = Xc @ Yc.T / (n - 1)
    cxx += RIDGE_EPSILON * np.trace(cxx) / cxx.shape[0] * np.eye(cxx.shape[0])
    cyy += RIDGE_EPSILON * np.trace(cyy) / cyy.shape[0] * np.eye(cyy.shape[0])
    ix = _inv_sqrt(cxx)
    iy = _inv_sqrt(cyy)
    u, s, vt = linalg.svd(ix @ cxy @ iy)
    rho = min(float(s[0]), 1.0)
    return CcaSolution(rho=rho, weights_x=ix @ u[:, 0], weights_y=iy @ vt[0])


def cca_pick(window: SampledSignal, references: ReferenceSet, end_time: float = 0.0) -> WindowPick:
    """Vote for the target whose reference set correlates best; ties go to
    the lowest frequency."""
    if not references.entries:
        raise ValueError("reference set is empty")
    best_f, best_rho = None, -math.inf
    for target in references.targets():
        rho = cca_max_correlation(window.samples, references.entries[target]).rho
        if rho > best_rho:
            best_f, best_rho = target, rho
    return WindowPick(frequency=best_f, end_time=end_time)


def psda_detect_trial(
    signal: SampledSignal,
    config: PsdaConfig,
    plan: WindowPlan,
    pre: PreprocessConfig,
    deadline: Optional[float] = None,
) -> DetectionResult:
    """PSDA under the shared protocol: peak picking on the band-restricted
    spectrum of each window."""
    if deadline is None:
        deadline = signal.duration
    chan = signal.channel(pre.channel)
    prepared = normalize(bandpass(chan, pre.band_low, pre.band_high))
    windows = sliding_windows(prepared, plan)

    def picks():
        for end_time, window in windows:
            spectrum = magnitude_spectrum(window, pre).restricted(pre.band_low, pre.band_high)
            yield psda_pick(spectrum, config, end_time)

    return resolve_picks(picks(), deadline)


def cca_detect_trial(
    signal: SampledSignal,
    references: ReferenceSet,
    plan: WindowPlan,
    pre: PreprocessConfig,
    deadline: Optional[float] = None,
    channels: Optional[Sequence[str]] = None,
) -> DetectionResult:
    """CCA under the shared protocol, using every configured channel."""
    if deadline is None:
        deadline = signal.duration
    multi = signal.select(channels) if channels else signal
    prepared = normalize(bandpass(multi, pre.band_low, pre.band_high))
    windows = sliding_windows(prepared, plan)

    def picks():
        for end_time, window in windows:
            yield cca_pick(window, references, end_time)

    return resolve_picks(picks(), deadline)
