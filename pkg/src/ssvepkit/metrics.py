"""Accuracy, mean detection time and information transfer rate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .decision import Detected, DetectionResult


@dataclass(frozen=True)
class TrialOutcome:
    """Ground-truth stimulus plus what the detector reported."""

    true_frequency: float
    result: DetectionResult

    @property
    def detected(self) -> bool:
        return isinstance(self.result, Detected)

    @property
    def correct(self) -> bool:
        return self.detected and math.isclose(
            self.result.frequency, self.true_frequency, rel_tol=0, abs_tol=1e-9
        )


@dataclass(frozen=True)
class SubjectReport:
    """One row of the per-subject comparison table."""

    subject: str
    trial_count: int
    method: str
    mdt_seconds: Optional[float]
    accuracy_fraction: float
    commands_per_minute: Optional[float]
    itr_bits_per_minute: Optional[float]
    command_count: int


def accuracy(outcomes: Sequence[TrialOutcome]) -> float:
    """Correct detections over all trials; a timeout counts as incorrect."""
    if not outcomes:
        raise ValueError("accuracy of an empty outcome list is undefined")
    return sum(o.correct for o in outcomes) / len(outcomes)


def mean_detection_time(outcomes: Sequence[TrialOutcome]) -> Optional[float]:
    """Mean time of every fired detection, correct or not.

    Timeouts issue no command so they are excluded; with no detections at
    all the value is absent (None). Counting wrong detections keeps the
    commands-per-minute rate honest: a wrong command still takes time.
    """
    times = [o.result.detection_time for o in outcomes if o.detected]
    if not times:
        return None
    return sum(times) / len(times)


def itr(n_commands: int, p: float, commands_per_minute: float) -> Optional[float]:
    """Bits per minute for N equiprobable commands at accuracy p and rate s.

    Below-chance accuracy (p < 1/N) carries no usable rate and is reported
    absent (None), rendered "-" in tables. At exactly chance the rate is 0.
    """
    if n_commands < 2:
        raise ValueError("ITR needs at least two commands")
    if not 0 <= p <= 1:
        raise ValueError("accuracy must lie in [0, 1]")
    if not commands_per_minute > 0:
        raise ValueError("command rate must be positive")
    if p < 1.0 / n_commands:
        return None
    bits = math.log2(n_commands)
    if p > 0:
        bits += p * math.log2(p)
    if p < 1:
        bits += (1 - p) * math.log2((1 - p) / (n_commands - 1))
    return commands_per_minute * bits


def aggregate_report(
    subject: str,
    outcomes: Sequence[TrialOutcome],
    n_commands: int,
    method: str = "",
) -> SubjectReport:
    """Fold trial outcomes into accuracy, MDT, command rate and ITR.

    The command rate is 60 / MDT; an absent MDT propagates to absent rate
    and ITR.
    """
    if not outcomes:
        raise ValueError("cannot aggregate an empty outcome list")
    acc = accuracy(outcomes)
    mdt = mean_detection_time(outcomes)
    rate = 60.0 / mdt if mdt else None
    rate_bits = itr(n_commands, acc, rate) if rate else None
    return SubjectReport(
        subject=subject,
        trial_count=len(outcomes),
        method=method,
        mdt_seconds=mdt,
        accuracy_fraction=acc,
        commands_per_minute=rate,
        itr_bits_per_minute=rate_bits,
        command_count=n_commands,
    )
