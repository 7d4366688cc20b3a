"""Canonical dataset format, the synthetic-signal generator, and report
and plot emission.

A dataset is a YAML manifest plus one CSV per trial (header row of
channel labels, one sample per row). All writers emit byte-identical
output for identical inputs: no timestamps, fixed float formatting.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np
import yaml

from .filterbank import FilterBank
from .metrics import SubjectReport
from .signals import SampledSignal, Spectrum

MANIFEST_NAME = "manifest.yaml"


@dataclass(frozen=True)
class TrialRecord:
    file: str
    stimulus_frequency: float
    duration: float


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    trials: tuple[TrialRecord, ...]


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    sampling_rate: float
    channels: tuple[str, ...]
    targets: tuple[float, ...]
    subjects: tuple[SubjectRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        object.__setattr__(self, "subjects", tuple(self.subjects))
        if not self.subjects:
            raise ValueError("manifest has no subjects")
        if not self.sampling_rate > 0:
            raise ValueError("sampling_rate must be positive")
        for subject in self.subjects:
            for trial in subject.trials:
                if not any(
                    math.isclose(trial.stimulus_frequency, t, rel_tol=0, abs_tol=1e-9)
                    for t in self.targets
                ):
                    raise ValueError(
                        f"trial {trial.file}: stimulus {trial.stimulus_frequency} Hz "
                        f"not in target set {self.targets}"
                    )

    @property
    def trial_count(self) -> int:
        return sum(len(s.trials) for s in self.subjects)


@dataclass(frozen=True)
class LoadedTrial:
    subject: str
    record: TrialRecord
    signal: SampledSignal


@dataclass(frozen=True)
class Dataset:
    manifest: DatasetManifest
    trials: tuple[LoadedTrial, ...]

    def by_subject(self) -> dict[str, list[LoadedTrial]]:
        out: dict[str, list[LoadedTrial]] = {s.id: [] for s in self.manifest.subjects}
        for trial in self.trials:
            out[trial.subject].append(trial)
        return out


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "dataset": manifest.name,
        "sampling_rate": float(manifest.sampling_rate),
        "channels": list(manifest.channels),
        "targets": [float(t) for t in manifest.targets],
        "subjects": [
            {
                "id": s.id,
                "trials": [
                    {
                        "file": t.file,
                        "stimulus_frequency": float(t.stimulus_frequency),
                        "duration": float(t.duration),
                    }
                    for t in s.trials
                ],
            }
            for s in manifest.subjects
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"manifest {path} is not a mapping")
    try:
        subjects = tuple(
            SubjectRecord(
                id=str(s["id"]),
                trials=tuple(
                    TrialRecord(
                        file=str(t["file"]),
                        stimulus_frequency=float(t["stimulus_frequency"]),
                        duration=float(t["duration"]),
                    )
                    for t in s["trials"]
                ),
            )
            for s in doc.get("subjects", [])
        )
        return DatasetManifest(
            name=str(doc["dataset"]),
            sampling_rate=float(doc["sampling_rate"]),
            channels=tuple(str(c) for c in doc["channels"]),
            targets=tuple(float(t) for t in doc["targets"]),
            subjects=subjects,
        )
    except KeyError as exc:
        raise ValueError(f"manifest {path} missing required key: {exc}") from exc


def write_trial_csv(signal: SampledSignal, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        signal.samples.T,
        delimiter=",",
        header=",".join(signal.channels),
        comments="",
        fmt="%.17g",
    )


def read_trial_csv(path, sampling_rate: float) -> SampledSignal:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        channels = tuple(header.split(","))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return SampledSignal(channels, data.T, sampling_rate)


def load_dataset(manifest_path) -> Dataset:
    """Materialize every trial named by a manifest, validating as we go.

    Each failure mode gets its own diagnostic naming the offending trial:
    missing file, row-count mismatch with the declared duration, or an
    off-target stimulus label (raised by the manifest itself).
    """
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    root = manifest_path.parent
    loaded = []
    for subject in manifest.subjects:
        for record in subject.trials:
            trial_path = root / record.file
            if not trial_path.exists():
                raise FileNotFoundError(f"trial {record.file}: file not found under {root}")
            signal = read_trial_csv(trial_path, manifest.sampling_rate)
            expected_rows = int(round(record.duration * manifest.sampling_rate))
            if signal.n_samples != expected_rows:
                raise ValueError(
                    f"trial {record.file}: {signal.n_samples} rows but duration "
                    f"{record.duration}s at {manifest.sampling_rate} Hz needs {expected_rows}"
                )
            if signal.channels != manifest.channels:
                raise ValueError(
                    f"trial {record.file}: channel header {signal.channels} does not "
                    f"match manifest channels {manifest.channels}"
                )
            loaded.append(LoadedTrial(subject.id, record, signal))
    return Dataset(manifest=manifest, trials=tuple(loaded))


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one deterministic synthetic SSVEP trial.

    The response amplitude scales as (stimulus / reference_frequency) **
    -attenuation_exponent, mimicking the weakening of SSVEP responses at
    higher stimulus rates. Phases and noise come from one seeded
    generator; equal specs produce bit-identical samples.
    """

    stimulus: float
    duration: float
    sampling_rate: float
    harmonic_amplitudes: tuple[float, ...] = (1.0, 0.5)
    attenuation_exponent: float = 0.0
    reference_frequency: Optional[float] = None
    noise_std: float = 0.0
    noise_model: str = "white"
    seed: int = 0
    channels: tuple[str, ...] = ("Oz",)

    def __post_init__(self):
        object.__setattr__(
            self, "harmonic_amplitudes", tuple(float(a) for a in self.harmonic_amplitudes)
        )
        object.__setattr__(self, "channels", tuple(self.channels))
        if any(a < 0 for a in self.harmonic_amplitudes):
            raise ValueError("harmonic amplitudes must be >= 0")
        if not (self.duration > 0 and self.sampling_rate > 0):
            raise ValueError("duration and sampling_rate must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.noise_model not in ("white", "pink"):
            raise ValueError("noise_model must be 'white' or 'pink'")

    @property
    def amplitude_scale(self) -> float:
        ref = self.reference_frequency if self.reference_frequency else self.stimulus
        return (self.stimulus / ref) ** (-self.attenuation_exponent)


def _pink_noise(rng: np.random.Generator, shape: tuple[int, int], std: float) -> np.ndarray:
    white = rng.normal(0.0, 1.0, shape)
    spec = np.fft.rfft(white, axis=1)
    f = np.fft.rfftfreq(shape[1])
    weights = np.zeros_like(f)
    weights[1:] = 1.0 / np.sqrt(f[1:])
    shaped = np.fft.irfft(spec * weights, n=shape[1], axis=1)
    scale = shaped.std(axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    return shaped / scale * std


def synth_trial(spec: SynthSpec) -> SampledSignal:
    """Sum of seeded-phase harmonics plus seeded noise on every channel.

    The sinusoidal part is coherent across channels (one phase draw per
    harmonic); noise is drawn independently per channel. Phases are drawn
    before noise, so a zero-noise spec shares its sinusoid with the noisy
    variant at the same seed.
    """
    n_harm = len(spec.harmonic_amplitudes)
    if n_harm and spec.stimulus * n_harm >= spec.sampling_rate / 2:
        raise ValueError(
            f"harmonic {n_harm} of {spec.stimulus} Hz exceeds Nyquist "
            f"({spec.sampling_rate / 2} Hz)"
        )
    n = int(round(spec.duration * spec.sampling_rate))
    t = np.arange(n) / spec.sampling_rate
    rng = np.random.default_rng(spec.seed)
    phases = rng.uniform(0.0, 2 * np.pi, n_harm)
    wave = np.zeros(n)
    for h, (amp, phi) in enumerate(zip(spec.harmonic_amplitudes, phases), start=1):
        wave += amp * spec.amplitude_scale * np.sin(2 * np.pi * h * spec.stimulus * t + phi)
    samples = np.tile(wave, (len(spec.channels), 1))
    if spec.noise_std > 0:
        if spec.noise_model == "white":
            samples = samples + rng.normal(0.0, spec.noise_std, samples.shape)
        else:
            samples = samples + _pink_noise(rng, samples.shape, spec.noise_std)
    return SampledSignal(spec.channels, samples, spec.sampling_rate)


def noise_std_for_snr(harmonic_amplitudes: Sequence[float], snr_db: float) -> float:
    """Noise sigma so the weakest harmonic still has the requested SNR.

    Per-harmonic SNR is 10 log10((a_h^2 / 2) / sigma^2); sizing sigma by
    the smallest amplitude makes the bound hold for every harmonic.
    """
    amps = [a for a in harmonic_amplitudes if a > 0]
    if not amps:
        return 1.0
    return min(amps) / math.sqrt(2.0 * 10.0 ** (snr_db / 10.0))


def corpus_specs(
    targets: Sequence[float],
    trials_per_target: int,
    *,
    duration: float,
    sampling_rate: float,
    harmonic_amplitudes: Sequence[float] = (1.0, 0.5),
    attenuation_exponent: float = 0.0,
    snr_db: Optional[float] = 10.0,
    noise_only: bool = False,
    seed: int = 0,
    channels: Sequence[str] = ("Oz",),
) -> list[SynthSpec]:
    """Deterministic labeled corpus: trials_per_target specs per target.

    Per-trial seeds derive from (seed, trial index) so single trials can
    be regenerated without the whole corpus.
    """
    targets = sorted(float(t) for t in targets)
    f_ref = targets[0]
    specs = []
    index = 0
    for target in targets:
        scale = (target / f_ref) ** (-attenuation_exponent)
        scaled = [a * scale for a in harmonic_amplitudes]
        if noise_only:
            amps: tuple[float, ...] = tuple(0.0 for _ in harmonic_amplitudes)
            sigma = 1.0
        else:
            amps = tuple(harmonic_amplitudes)
            sigma = noise_std_for_snr(scaled, snr_db) if snr_db is not None else 0.0
        for _ in range(trials_per_target):
            specs.append(
                SynthSpec(
                    stimulus=target,
                    duration=duration,
                    sampling_rate=sampling_rate,
                    harmonic_amplitudes=amps,
                    attenuation_exponent=attenuation_exponent,
                    reference_frequency=f_ref,
                    noise_std=sigma,
                    seed=seed * 1_000_003 + index,
                    channels=tuple(channels),
                )
            )
            index += 1
    return specs


def write_synthetic_dataset(
    out_dir,
    name: str,
    specs: Sequence[SynthSpec],
    subjects: int = 1,
    force: bool = False,
) -> Path:
    """Write manifest plus trial CSVs; round-robin trials over subjects.

    Refuses to clobber an existing non-empty directory unless forced.
    """
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"output directory {out} is not empty (use force)")
    out.mkdir(parents=True, exist_ok=True)
    if not specs:
        raise ValueError("no trial specs supplied")
    rate = specs[0].sampling_rate
    channels = specs[0].channels
    targets = sorted({s.stimulus for s in specs})
    per_subject: dict[str, list[TrialRecord]] = {
        f"S{idx + 1:02d}": [] for idx in range(subjects)
    }
    for i, spec in enumerate(specs):
        subject_id = f"S{i % subjects + 1:02d}"
        rel = f"{subject_id}/trial_{len(per_subject[subject_id]):03d}.csv"
        write_trial_csv(synth_trial(spec), out / rel)
        per_subject[subject_id].append(
            TrialRecord(file=rel, stimulus_frequency=spec.stimulus, duration=spec.duration)
        )
    manifest = DatasetManifest(
        name=name,
        sampling_rate=rate,
        channels=channels,
        targets=tuple(targets),
        subjects=tuple(
            SubjectRecord(id=sid, trials=tuple(trials))
            for sid, trials in per_subject.items()
        ),
    )
    save_manifest(manifest, out / MANIFEST_NAME)
    return out / MANIFEST_NAME


def _format_cell(value: Optional[float], digits: int = 1) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def report_rows(reports: Sequence[SubjectReport]) -> list[list[str]]:
    rows = []
    for r in reports:
        rows.append(
            [
                r.subject,
                str(r.trial_count),
                r.method,
                _format_cell(r.mdt_seconds),
                _format_cell(100.0 * r.accuracy_fraction),
                _format_cell(r.itr_bits_per_minute),
            ]
        )
    return rows


REPORT_HEADER = ["subject", "trials", "method", "mdt_seconds", "accuracy_percent",
                 "itr_bits_per_minute"]


def export_report(reports: Sequence[SubjectReport], path, fmt: str = "csv") -> Path:
    """Write the comparison table as CSV or a fixed-width text table."""
    if not reports:
        raise ValueError("no reports to export")
    if fmt not in ("csv", "text"):
        raise ValueError(f"unknown report format {fmt!r}")
    rows = report_rows(reports)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        lines = [",".join(REPORT_HEADER)] + [",".join(row) for row in rows]
    else:
        widths = [
            max(len(h), *(len(row[i]) for row in rows))
            for i, h in enumerate(REPORT_HEADER)
        ]
        def pad(cells):
            return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        lines = [pad(REPORT_HEADER), pad(["-" * w for w in widths])]
        lines += [pad(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


SVG_WIDTH, SVG_HEIGHT = 880, 480
SVG_MARGIN = 60


def _svg_points(xs, ys, x0, x1, y1) -> str:
    span_x = (x1 - x0) or 1.0
    span_y = y1 or 1.0
    w = SVG_WIDTH - 2 * SVG_MARGIN
    h = SVG_HEIGHT - 2 * SVG_MARGIN
    pts = []
    for x, y in zip(xs, ys):
        px = SVG_MARGIN + (x - x0) / span_x * w
        py = SVG_HEIGHT - SVG_MARGIN - y / span_y * h
        pts.append(f"{px:.2f},{py:.2f}")
    return " ".join(pts)


def plot_spectrum(spectrum: Spectrum, path, bank: Optional[FilterBank] = None,
                  title: str = "magnitude spectrum") -> Path:
    """Line plot of the spectrum, optionally overlaying every triangular
    filter of a bank (fundamentals and harmonics). Pure-text SVG, fully
    deterministic, no external plotting dependency.
    """
    freqs = spectrum.bin_frequencies
    mags = spectrum.magnitudes
    peaks = []
    if bank is not None:
        peaks = [f.gain / 2 for f in bank.fundamentals + bank.harmonics]
    y_max = float(max([mags.max() if mags.size else 0.0] + peaks)) or 1.0
    if freqs.size:
        x0, x1 = float(freqs[0]), float(freqs[-1])
    elif bank is not None:
        x0, x1 = 0.0, 1.0
    else:
        x0, x1 = 0.0, 1.0
    if bank is not None:
        lo, hi = bank.spectral_support()
        x0, x1 = min(x0, lo), max(x1, hi)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<title>{escape(title)}</title>',
        f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<line class="axis" x1="{SVG_MARGIN}" y1="{SVG_HEIGHT - SVG_MARGIN}" '
        f'x2="{SVG_WIDTH - SVG_MARGIN}" y2="{SVG_HEIGHT - SVG_MARGIN}" stroke="black"/>',
        f'<line class="axis" x1="{SVG_MARGIN}" y1="{SVG_MARGIN}" '
        f'x2="{SVG_MARGIN}" y2="{SVG_HEIGHT - SVG_MARGIN}" stroke="black"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        px = SVG_MARGIN + (SVG_WIDTH - 2 * SVG_MARGIN) * i / 4
        parts.append(
            f'<text class="tick" x="{px:.2f}" y="{SVG_HEIGHT - SVG_MARGIN + 20}" '
            f'text-anchor="middle" font-size="12">{fx:.2f}</text>'
        )
    if freqs.size:
        parts.append(
            f'<polyline class="spectrum" fill="none" stroke="steelblue" stroke-width="1" '
            f'points="{_svg_points(freqs, mags, x0, x1, y_max)}"/>'
        )
    if bank is not None:
        for kind, filters in (("fundamental", bank.fundamentals), ("harmonic", bank.harmonics)):
            for filt in filters:
                lo, hi = filt.support
                pts = _svg_points([lo, filt.center, hi], [0.0, filt.gain / 2, 0.0], x0, x1, y_max)
                parts.append(
                    f'<polyline class="filter {kind}" fill="none" stroke="darkorange" '
                    f'stroke-width="1" points="{pts}"/>'
                )
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
