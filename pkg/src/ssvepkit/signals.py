"""Deterministic EEG preprocessing: band-pass filtering, normalization,
sliding windows and Hamming-tapered magnitude spectra.

Everything here is a pure function of immutable inputs; values can be
shared across threads freely.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as sps
from scipy.fft import next_fast_len


@dataclass(frozen=True)
class SampledSignal:
    """Multichannel time series with a fixed sampling rate.

    ``samples`` has shape (n_channels, n_samples); all channels share the
    sample count by construction. Amplitudes are unit-agnostic once
    normalized.
    """

    channels: tuple[str, ...]
    samples: np.ndarray
    sampling_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2:
            raise ValueError("samples must be a (channels, samples) array")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channels", tuple(self.channels))
        if len(self.channels) != samples.shape[0]:
            raise ValueError(
                f"{len(self.channels)} channel labels for {samples.shape[0]} sample rows"
            )
        if not self.sampling_rate > 0:
            raise ValueError("sampling_rate must be positive")
        if samples.shape[1] < 1:
            raise ValueError("signal must contain at least one sample")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate

    def channel(self, label: str) -> "SampledSignal":
        """Single-channel view of this signal."""
        if label not in self.channels:
            raise ValueError(f"channel {label!r} not in {self.channels}")
        idx = self.channels.index(label)
        return SampledSignal((label,), self.samples[idx : idx + 1], self.sampling_rate)

    def select(self, labels) -> "SampledSignal":
        idx = [self.channels.index(lbl) for lbl in labels]
        return SampledSignal(tuple(labels), self.samples[idx], self.sampling_rate)


@dataclass(frozen=True)
class Spectrum:
    """Magnitude spectrum on a uniform, ascending frequency grid."""

    bin_frequencies: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.bin_frequencies, dtype=float)
        m = np.asarray(self.magnitudes, dtype=float)
        object.__setattr__(self, "bin_frequencies", f)
        object.__setattr__(self, "magnitudes", m)
        if f.shape != m.shape or f.ndim != 1:
            raise ValueError("bin_frequencies and magnitudes must be equal-length 1-d arrays")
        if f.size > 1:
            d = np.diff(f)
            if not np.all(d > 0):
                raise ValueError("bin_frequencies must be strictly ascending")
            if not np.allclose(d, d[0], rtol=1e-6, atol=1e-12):
                raise ValueError("bin_frequencies must be uniformly spaced")
        if m.size and m.min() < 0:
            raise ValueError("magnitudes must be non-negative")

    @property
    def bin_spacing(self) -> float:
        if self.bin_frequencies.size < 2:
            return 0.0
        return float(self.bin_frequencies[1] - self.bin_frequencies[0])

    def restricted(self, low: float, high: float) -> "Spectrum":
        """Sub-spectrum with bin frequencies inside [low, high]."""
        mask = (self.bin_frequencies >= low) & (self.bin_frequencies <= high)
        return Spectrum(self.bin_frequencies[mask], self.magnitudes[mask])

    def peak_frequency(self) -> float:
        if self.magnitudes.size == 0:
            raise ValueError("empty spectrum has no peak")
        return float(self.bin_frequencies[int(np.argmax(self.magnitudes))])


@dataclass(frozen=True)
class WindowPlan:
    """Sliding analysis window: length and displacement in seconds."""

    window_seconds: float
    step_seconds: float

    def __post_init__(self):
        if not self.step_seconds > 0:
            raise ValueError("step_seconds must be positive")
        if self.window_seconds < self.step_seconds:
            raise ValueError("window_seconds must be >= step_seconds")

    def window_samples(self, sampling_rate: float) -> int:
        # rounding rule: round-half-even, shared by every consumer
        return int(round(self.window_seconds * sampling_rate))

    def step_samples(self, sampling_rate: float) -> int:
        return max(1, int(round(self.step_seconds * sampling_rate)))


DEFAULT_PLAN = WindowPlan(window_seconds=4.0, step_seconds=1.0)


@dataclass(frozen=True)
class PreprocessConfig:
    """Band limits, spectral resolution and analysis channel."""

    band_low: float = 5.0
    band_high: float = 35.0
    fft_resolution: float = 0.05
    channel: str = "Oz"

    def __post_init__(self):
        if not 0 < self.band_low < self.band_high:
            raise ValueError("require 0 < band_low < band_high")
        if not self.fft_resolution > 0:
            raise ValueError("fft_resolution must be positive")


def hamming_taper(n: int) -> np.ndarray:
    """Symmetric Hamming window: 0.54 - 0.46 cos(2 pi k / (n - 1))."""
    return np.hamming(n)


def design_bandpass(sampling_rate: float, band_low: float, band_high: float) -> np.ndarray:
    """Windowed-sinc FIR band-pass taps (linear phase, odd length)."""
    if not 0 < band_low < band_high < sampling_rate / 2:
        raise ValueError(
            f"band limits ({band_low}, {band_high}) must satisfy 0 < low < high < Nyquist "
            f"({sampling_rate / 2})"
        )
    numtaps = int(round(2.0 * sampling_rate / band_low)) | 1
    return sps.firwin(numtaps, [band_low, band_high], pass_zero=False,
                      window="hamming", fs=sampling_rate)


def bandpass(signal: SampledSignal, band_low: float, band_high: float) -> SampledSignal:
    """Zero-phase band-pass: forward-backward FIR, output length preserved.

    Two-pass attenuation is >= 40 dB one octave outside the band; rejects
    signals shorter than the filter impulse response.
    """
    taps = design_bandpass(signal.sampling_rate, band_low, band_high)
    if signal.n_samples <= taps.size:
        raise ValueError(
            f"signal too short for band-pass filter ({signal.n_samples} samples, "
            f"{taps.size} taps)"
        )
    padlen = min(3 * taps.size, signal.n_samples - 1)
    filtered = sps.filtfilt(taps, [1.0], signal.samples, axis=1, padlen=padlen)
    return replace(signal, samples=filtered)


def normalize(signal: SampledSignal) -> SampledSignal:
    """Per-channel z-score over the whole signal (sample std, ddof=1).

    Zero-variance channels map to all-zero: recorded EEG can contain dead
    channels and they must not poison downstream scores.
    """
    x = signal.samples
    centered = x - x.mean(axis=1, keepdims=True)
    std = centered.std(axis=1, ddof=1, keepdims=True) if x.shape[1] > 1 else np.zeros((x.shape[0], 1))
    out = np.divide(centered, std, out=np.zeros_like(centered), where=std > 0)
    return replace(signal, samples=out)


def sliding_windows(signal: SampledSignal, plan: WindowPlan) -> list[tuple[float, SampledSignal]]:
    """Contiguous full windows as (end_time_seconds, window) pairs.

    The first window ends at ``window_seconds``; partial trailing windows
    are dropped, never padded. A signal shorter than one window yields an
    empty list and a diagnostic warning.
    """
    fs = signal.sampling_rate
    win_n = plan.window_samples(fs)
    step_n = plan.step_samples(fs)
    if win_n > signal.n_samples:
        warnings.warn(
            f"signal shorter than one window ({signal.n_samples} < {win_n} samples); "
            "no windows produced",
            stacklevel=2,
        )
        return []
    out = []
    for start in range(0, signal.n_samples - win_n + 1, step_n):
        end = start + win_n
        window = SampledSignal(signal.channels, signal.samples[:, start:end], fs)
        out.append((end / fs, window))
    return out


def magnitude_spectrum(window: SampledSignal, config: PreprocessConfig) -> Spectrum:
    """Hamming-tapered, zero-padded magnitude spectrum of one channel.

    The taper has exactly the window length; zero padding brings the bin
    spacing down to at most ``config.fft_resolution`` so narrow triangular
    filters and off-grid stimulus frequencies are sampled faithfully.
    Magnitudes are scaled so a unit-amplitude sinusoid peaks near 1.
    """
    if window.n_channels != 1:
        raise ValueError("magnitude_spectrum expects a single channel; select one first")
    fs = window.sampling_rate
    x = window.samples[0]
    taper = hamming_taper(x.size)
    nfft = next_fast_len(max(x.size, int(math.ceil(fs / config.fft_resolution))))
    mags = np.abs(np.fft.rfft(x * taper, nfft)) * (2.0 / taper.sum())
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    return Spectrum(freqs, mags)
