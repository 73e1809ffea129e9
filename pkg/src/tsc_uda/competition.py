"""Teacher-priority threshold schedule and the per-sample pseudo-label competition."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class Winner(str, enum.Enum):
    TEACHER = "teacher"
    STUDENT = "student"


class Reason(str, enum.Enum):
    TEACHER_OVER_THRESHOLD = "teacher-over-threshold"
    TEACHER_HIGHER_CONFIDENCE = "teacher-higher-confidence"
    STUDENT_WINS = "student-wins"


# integer codes used by the vectorized path, in Reason declaration order
REASONS = tuple(Reason)


@dataclass(frozen=True)
class Schedule:
    delta: float = 10.0
    total_steps: int = 3000

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"schedule delta must be > 0, got {self.delta}")
        if int(self.total_steps) < 1:
            raise ValueError(f"schedule total_steps must be >= 1, got {self.total_steps}")


def threshold(step: int, sched: Schedule) -> float:
    """Sigmoid of ``delta * step / total_steps``: 0.5 at the start, rising towards 1."""
    if not 0 <= step <= sched.total_steps:
        raise ValueError(f"step {step} outside [0, {sched.total_steps}]")
    p = step / sched.total_steps
    return 1.0 / (1.0 + math.exp(-sched.delta * p))


class CompetitionDecision(NamedTuple):
    sample_index: int
    winner: Winner
    reason: Reason
    chosen_label: int
    teacher_conf: float
    student_conf: float
    threshold: float


def compete_arrays(y1, p1, y2, p2, tp: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rule; returns (chosen labels, reason codes indexing ``REASONS``).

    The teacher keeps the sample when its confidence is strictly above the
    threshold or strictly above the student's.  The threshold branch is
    checked first, so it is the recorded reason whenever both hold.
    """
    p1, p2 = np.asarray(p1, dtype=np.float64), np.asarray(p2, dtype=np.float64)
    y1, y2 = np.asarray(y1), np.asarray(y2)
    if not (p1.shape == p2.shape == y1.shape == y2.shape):
        raise ValueError(f"teacher/student lengths differ: {p1.shape} vs {p2.shape}")
    over = p1 > tp
    higher = ~over & (p1 > p2)
    reason = np.full(p1.shape, 2, dtype=np.int64)
    reason[higher] = 1
    reason[over] = 0
    chosen = np.where(reason < 2, y1, y2)
    return chosen, reason


def compete(teacher: Sequence, student: Sequence, tp: float) -> list[CompetitionDecision]:
    """One decision per sample from teacher/student ``(label, confidence)`` pairs."""
    if len(teacher) != len(student):
        raise ValueError(f"teacher/student lengths differ: {len(teacher)} vs {len(student)}")
    if not teacher:
        return []
    y1, p1 = map(np.asarray, zip(*teacher))
    y2, p2 = map(np.asarray, zip(*student))
    chosen, reason = compete_arrays(y1, p1, y2, p2, tp)
    out = []
    for j, (lab, code) in enumerate(zip(chosen, reason)):
        r = REASONS[code]
        winner = Winner.STUDENT if r is Reason.STUDENT_WINS else Winner.TEACHER
        out.append(CompetitionDecision(j, winner, r, int(lab), float(p1[j]), float(p2[j]), float(tp)))
    return out


def reason_fractions(reason_codes: np.ndarray) -> dict[Reason, float]:
    n = len(reason_codes)
    counts = np.bincount(np.asarray(reason_codes, dtype=np.int64), minlength=len(REASONS))
    return {r: (counts[i] / n if n else float("nan")) for i, r in enumerate(REASONS)}
