"""Glue between datasets, detectors and reports: one uniform evaluation
protocol for all three methods."""
from __future__ import annotations

from typing import Callable, Optional, Sequence

from .baselines import (
    PsdaConfig,
    ReferenceSet,
    cca_detect_trial,
    psda_detect_trial,
    reference_set,
)
from .data_io import Dataset
from .decision import DetectionResult
from .filterbank import FilterBank, detect_trial
from .metrics import SubjectReport, TrialOutcome, aggregate_report
from .signals import PreprocessConfig, SampledSignal, WindowPlan

TrialRunner = Callable[[SampledSignal, float], DetectionResult]

METHODS = ("bifb", "psda", "cca")


def make_runner(
    method: str,
    *,
    targets: Sequence[float],
    plan: WindowPlan,
    pre: PreprocessConfig,
    bank: Optional[FilterBank] = None,
    sampling_rate: Optional[float] = None,
    channels: Optional[Sequence[str]] = None,
    harmonic_count: int = 2,
    match_tolerance: Optional[float] = None,
) -> TrialRunner:
    """Bind one detection method to its configuration.

    The returned callable maps (signal, deadline) to a detection result,
    so evaluation code never branches on the method again.
    """
    if method == "bifb":
        if bank is None:
            raise ValueError("bifb requires a trained filter bank")
        return lambda signal, deadline: detect_trial(signal, bank, plan, pre, deadline)
    if method == "psda":
        if match_tolerance is None:
            cfg = PsdaConfig.for_targets(targets)
        else:
            cfg = PsdaConfig(tuple(targets), match_tolerance)
        return lambda signal, deadline: psda_detect_trial(signal, cfg, plan, pre, deadline)
    if method == "cca":
        if sampling_rate is None:
            raise ValueError("cca requires the sampling rate to build references")
        refs: ReferenceSet = reference_set(targets, plan, sampling_rate, harmonic_count)
        return lambda signal, deadline: cca_detect_trial(
            signal, refs, plan, pre, deadline, channels=channels
        )
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def evaluate_dataset(dataset: Dataset, runner: TrialRunner) -> dict[str, list[TrialOutcome]]:
    """Run one detector over every trial, grouped by subject.

    Each trial's deadline is its own recorded duration.
    """
    outcomes: dict[str, list[TrialOutcome]] = {}
    for trial in dataset.trials:
        result = runner(trial.signal, trial.record.duration)
        outcomes.setdefault(trial.subject, []).append(
            TrialOutcome(true_frequency=trial.record.stimulus_frequency, result=result)
        )
    return outcomes


def subject_reports(
    outcomes_by_subject: dict[str, list[TrialOutcome]],
    n_commands: int,
    method: str,
) -> list[SubjectReport]:
    return [
        aggregate_report(subject, outcomes, n_commands, method=method.upper())
        for subject, outcomes in sorted(outcomes_by_subject.items())
    ]
