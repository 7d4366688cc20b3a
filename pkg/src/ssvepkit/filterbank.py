"""Triangular filter-bank detector.

Each target frequency gets a triangular spectral filter at its
fundamental and another at its second harmonic; class scores are the
filter-weighted sums of the magnitude spectrum, with the harmonic sum
scaled by a trainable weight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

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


@dataclass(frozen=True)
class TriangularFilter:
    """Triangle rising from zero at center - bandwidth/2 to gain/2 at the
    center, falling back to zero at center + bandwidth/2.

    The peak value is gain/2, exactly as the piecewise form reads: at the
    center both linear pieces evaluate to (bandwidth/2)/bandwidth * gain.
    """

    center: float
    bandwidth: float
    gain: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        if not self.center - self.bandwidth / 2 > 0:
            raise ValueError("filter support must stay above 0 Hz")

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.bandwidth / 2, self.center + self.bandwidth / 2)

    def response(self, f):
        f = np.asarray(f, dtype=float)
        lo, hi = self.support
        rising = (f - lo) / self.bandwidth * self.gain
        falling = (hi - f) / self.bandwidth * self.gain
        out = np.where(
            (f >= lo) & (f <= self.center),
            rising,
            np.where((f > self.center) & (f <= hi), falling, 0.0),
        )
        return float(out) if out.ndim == 0 else out


def filter_response(filt: TriangularFilter, f):
    return filt.response(f)


@dataclass(frozen=True)
class FilterBank:
    """K triangular fundamentals, K second-harmonic triangles, one
    harmonic weight. This is the trained detector model."""

    targets: tuple[float, ...]
    fundamentals: tuple[TriangularFilter, ...]
    harmonics: tuple[TriangularFilter, ...]
    harmonic_weight: float

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        object.__setattr__(self, "fundamentals", tuple(self.fundamentals))
        object.__setattr__(self, "harmonics", tuple(self.harmonics))
        k = len(self.targets)
        if k < 2:
            raise ValueError("a filter bank needs at least two targets")
        if any(b >= a for a, b in zip(self.targets[1:], self.targets)):
            raise ValueError("targets must be strictly ascending")
        if len(self.fundamentals) != k or len(self.harmonics) != k:
            raise ValueError("need one fundamental and one harmonic filter per target")
        if self.harmonic_weight < 0:
            raise ValueError("harmonic_weight must be >= 0")
        for t, fund, harm in zip(self.targets, self.fundamentals, self.harmonics):
            if not math.isclose(fund.center, t, rel_tol=0, abs_tol=1e-9):
                raise ValueError(f"fundamental for {t} Hz is centered at {fund.center} Hz")
            if not math.isclose(harm.center, 2 * t, rel_tol=0, abs_tol=1e-9):
                raise ValueError(f"harmonic for {t} Hz is centered at {harm.center} Hz")
        # supports may overlap, but no target may sit inside another
        # fundamental's half-peak region (response >= half its maximum)
        for j, tj in enumerate(self.targets):
            for k_, filt in enumerate(self.fundamentals):
                if j != k_ and abs(tj - filt.center) <= filt.bandwidth / 4:
                    raise ValueError(
                        f"target {tj} Hz lies inside the half-peak region of the "
                        f"{filt.center} Hz fundamental (bandwidth {filt.bandwidth})"
                    )

    @property
    def size(self) -> int:
        return len(self.targets)

    def spectral_support(self) -> tuple[float, float]:
        los = [f.support[0] for f in self.fundamentals + self.harmonics]
        his = [f.support[1] for f in self.fundamentals + self.harmonics]
        return min(los), max(his)


def seeded_bank(
    targets: Sequence[float],
    bandwidth: float = 0.6,
    gain: float = 1.0,
    harmonic_weight: float = 0.5,
    gain_ramp_exponent: float = 0.5,
) -> FilterBank:
    """Bank seeded so gains are non-decreasing in target frequency.

    SSVEP responses weaken as the stimulus frequency rises, so gains
    scale by (f_k / f_min) ** gain_ramp_exponent; ``gain`` applies to the
    lowest target. Bandwidth stays flat across targets: widening the
    high-frequency triangles inflates how much of a *lower* target's
    second harmonic they capture (2 x 14 Hz sits exactly on a 28 Hz
    fundamental), and a steep gain ramp does the same, so the default
    ramp is deliberately gentle.
    """
    targets = tuple(sorted(float(t) for t in targets))
    ramp = [(t / targets[0]) ** gain_ramp_exponent for t in targets]
    fundamentals = tuple(
        TriangularFilter(center=t, bandwidth=bandwidth, gain=gain * r)
        for t, r in zip(targets, ramp)
    )
    harmonics = tuple(
        TriangularFilter(center=2 * t, bandwidth=bandwidth, gain=gain * r)
        for t, r in zip(targets, ramp)
    )
    return FilterBank(targets, fundamentals, harmonics, harmonic_weight)


@dataclass(frozen=True)
class ClassScores:
    """Per-target score values for one analysis window."""

    targets: tuple[float, ...]
    values: tuple[float, ...]
    end_time: float

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.targets) != len(self.values):
            raise ValueError("one score per target required")
        if any(v < 0 for v in self.values):
            raise ValueError("scores are sums of non-negative terms; got a negative value")

    @classmethod
    def from_mapping(cls, scores: Mapping[float, float], end_time: float = 0.0) -> "ClassScores":
        items = sorted(scores.items())
        return cls(tuple(f for f, _ in items), tuple(v for _, v in items), end_time)

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.targets, self.values))


def class_scores(spectrum: Spectrum, bank: FilterBank, end_time: float = 0.0) -> ClassScores:
    """Score every target: sum of magnitude x fundamental response plus
    harmonic_weight x sum of magnitude x harmonic response."""
    lo, hi = bank.spectral_support()
    f = spectrum.bin_frequencies
    if f.size == 0 or f[0] > lo or f[-1] < hi:
        raise ValueError(
            f"insufficient spectral coverage: bank needs [{lo:.3f}, {hi:.3f}] Hz, "
            f"spectrum covers [{f[0] if f.size else math.nan:.3f}, "
            f"{f[-1] if f.size else math.nan:.3f}] Hz"
        )
    mags = spectrum.magnitudes
    values = [
        float(mags @ fund.response(f) + bank.harmonic_weight * (mags @ harm.response(f)))
        for fund, harm in zip(bank.fundamentals, bank.harmonics)
    ]
    return ClassScores(bank.targets, tuple(values), end_time)


def pick_frequency(scores: ClassScores) -> WindowPick:
    """Target with the maximal class value; ties go to the lowest frequency."""
    if not scores.targets:
        raise ValueError("cannot pick from empty scores")
    order = np.argsort(scores.targets)
    best_f, best_v = None, -math.inf
    for i in order:
        if scores.values[i] > best_v:
            best_f, best_v = scores.targets[i], scores.values[i]
    return WindowPick(frequency=best_f, end_time=scores.end_time)


def detect_trial(
    signal: SampledSignal,
    bank: FilterBank,
    plan: WindowPlan,
    config: PreprocessConfig,
    deadline: Optional[float] = None,
) -> DetectionResult:
    """Full per-trial pipeline: band-pass, normalize, slide windows,
    score each window's spectrum and fold picks through the 3-of-4 rule.
    """
    if deadline is None:
        deadline = signal.duration
    chan = signal.channel(config.channel)
    prepared = normalize(bandpass(chan, config.band_low, config.band_high))
    windows = sliding_windows(prepared, plan)

    def picks():
        for end_time, window in windows:
            spectrum = magnitude_spectrum(window, config)
            yield pick_frequency(class_scores(spectrum, bank, end_time))

    return resolve_picks(picks(), deadline)


def save_bank_config(bank: FilterBank, plan: WindowPlan, path) -> None:
    """Write the trained model as plain ``key = value`` text.

    Floats are written with full repr precision so a read-back model is
    lossless.
    """
    lines = [
        "method = bifb",
        "targets = " + ", ".join(repr(t) for t in bank.targets),
        "bandwidths = " + ", ".join(repr(f.bandwidth) for f in bank.fundamentals),
        "gains = " + ", ".join(repr(f.gain) for f in bank.fundamentals),
        f"harmonic_weight = {bank.harmonic_weight!r}",
        f"window_seconds = {plan.window_seconds!r}",
        f"step_seconds = {plan.step_seconds!r}",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_keyvalue(path) -> dict[str, str]:
    entries: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed model line: {raw.rstrip()}")
            entries[key.strip()] = value.strip()
    return entries


def load_bank_config(path) -> tuple[FilterBank, WindowPlan]:
    entries = parse_keyvalue(path)
    if entries.get("method", "bifb") != "bifb":
        raise ValueError(f"model at {path} is not a filter-bank model")
    targets = [float(v) for v in entries["targets"].split(",")]
    bandwidths = [float(v) for v in entries["bandwidths"].split(",")]
    gains = [float(v) for v in entries["gains"].split(",")]
    if not (len(targets) == len(bandwidths) == len(gains)):
        raise ValueError("targets, bandwidths and gains must have equal length")
    fundamentals = tuple(
        TriangularFilter(t, bw, g) for t, bw, g in zip(targets, bandwidths, gains)
    )
    harmonics = tuple(
        TriangularFilter(2 * t, bw, g) for t, bw, g in zip(targets, bandwidths, gains)
    )
    bank = FilterBank(tuple(targets), fundamentals, harmonics,
                      float(entries["harmonic_weight"]))
    plan = WindowPlan(float(entries["window_seconds"]), float(entries["step_seconds"]))
    return bank, plan
