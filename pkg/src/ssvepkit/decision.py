"""Temporal decision rule shared by all detectors.

A stimulus frequency counts as detected once it wins at least three of
the last four sliding-window votes; a trial with no such run before its
deadline is an unsuccessful detection.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Union


@dataclass(frozen=True)
class WindowPick:
    """One window's vote: the winning frequency and the window end time."""

    frequency: float
    end_time: float


@dataclass(frozen=True)
class Pending:
    pass


@dataclass(frozen=True)
class Detected:
    frequency: float
    detection_time: float


@dataclass(frozen=True)
class TimedOut:
    pass


DetectionResult = Union[Detected, TimedOut]

REQUIRED_COUNT = 3
HORIZON = 4


@dataclass
class DecisionState:
    """Rolling buffer of the most recent window picks.

    Mutable and single-owner: one instance per trial, never shared.
    """

    deadline: float
    history: list[WindowPick] = field(default_factory=list)
    required_count: int = REQUIRED_COUNT
    horizon: int = HORIZON

    def update(self, pick: WindowPick) -> Union[Pending, Detected, TimedOut]:
        """Fold one pick into the state and report the trial status.

        The rule is evaluable from the third pick onward: three matching
        votes among three picks already satisfy "three of the last four".
        """
        if self.history and pick.end_time <= self.history[-1].end_time:
            raise ValueError(
                f"out-of-order pick at t={pick.end_time} after t={self.history[-1].end_time}"
            )
        self.history.append(pick)
        if len(self.history) > self.horizon:
            del self.history[0]
        if len(self.history) >= self.required_count:
            freq, count = Counter(p.frequency for p in self.history).most_common(1)[0]
            if count >= self.required_count:
                return Detected(frequency=freq, detection_time=pick.end_time)
        if pick.end_time >= self.deadline:
            return TimedOut()
        return Pending()


def resolve_picks(picks: Iterable[WindowPick], deadline: float) -> DetectionResult:
    """Run the decision rule over a pick stream until it settles.

    Exhausting the stream without a detection is a timeout: the selection
    criterion was not satisfied within the given time period.
    """
    state = DecisionState(deadline=deadline)
    for pick in picks:
        status = state.update(pick)
        if not isinstance(status, Pending):
            return status
    return TimedOut()
