"""Step actuator-effectiveness faults and a delayed, otherwise perfect, FDI oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError

# sample times are built as k * period; events compare with this slack so that
# an event at 201.0 s fires on the sample stored as 200.99999999999997
TIME_EPS = 1e-9

HEALTHY = (1.0, 1.0)


@dataclass(frozen=True)
class FaultEvent:
    time: float
    effectiveness: tuple

    def __post_init__(self):
        eff = tuple(float(e) for e in self.effectiveness)
        object.__setattr__(self, "effectiveness", eff)
        if not self.time >= 0:
            raise InvalidInputError(f"FaultEvent.time must be >= 0, got {self.time}")
        if len(eff) != 2 or not all(0.0 <= e <= 1.0 for e in eff):
            raise InvalidInputError(f"FaultEvent.effectiveness must be two values in [0, 1], got {eff}")


@dataclass(frozen=True)
class EffectivenessEstimate:
    estimate: tuple
    valid_from: float


@dataclass(frozen=True)
class FdiConfig:
    detection_delay: float = 1.0

    def __post_init__(self):
        if not self.detection_delay >= 0:
            raise InvalidInputError(f"detection_delay must be >= 0, got {self.detection_delay}")


def check_schedule(schedule):
    times = [ev.time for ev in schedule]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise InvalidInputError(f"fault schedule must be strictly increasing in time, got {times}")
    return tuple(schedule)


def _active(schedule, t):
    current = None
    for ev in schedule:
        if t + TIME_EPS >= ev.time:
            current = ev
        else:
            break
    return current


def true_effectiveness(schedule, t):
    ev = _active(schedule, t)
    return HEALTHY if ev is None else ev.effectiveness


def apply_fault(u_commanded, effectiveness):
    return np.asarray(u_commanded, dtype=float) * np.asarray(effectiveness, dtype=float)


def fdi_estimate(schedule, t, config=FdiConfig()):
    """What the diagnosis layer reports at time ``t``: the truth ``detection_delay`` seconds ago."""
    ev = _active(schedule, t - config.detection_delay)
    if ev is None:
        return EffectivenessEstimate(HEALTHY, 0.0)
    return EffectivenessEstimate(ev.effectiveness, ev.time + config.detection_delay)
