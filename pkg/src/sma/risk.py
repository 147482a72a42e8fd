"""Ordinal risk assessment: combine an impact rating with detector accuracy.

The combination function is a 3x3 lookup table over impact and a banded
probability axis. Note the polarity: the probability is the detector's
success rate, so LOW accuracy lands in the HIGH-risk band. The default
table is the ordinal maximum of impact and band, which is monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


class RiskLevel(IntEnum):
    LOW = 0
    MODERATE = 1
    HIGH = 2

    @classmethod
    def parse(cls, text) -> "RiskLevel":
        if isinstance(text, RiskLevel):
            return text
        if isinstance(text, int):
            return cls(text)
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown risk level {text!r}; expected low/moderate/high") from None

    def __str__(self) -> str:
        return self.name.lower()


DEFAULT_THRESHOLDS = (0.7, 0.9)

# default cell = max(impact, band): rows = impact, cols = band index
DEFAULT_TABLE = tuple(
    tuple(RiskLevel(max(impact, band)) for band in range(3)) for impact in range(3)
)


@dataclass(frozen=True)
class RiskMatrix:
    table: tuple[tuple[RiskLevel, ...], ...] = DEFAULT_TABLE
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        table = tuple(tuple(RiskLevel(v) for v in row) for row in self.table)
        object.__setattr__(self, "table", table)
        if len(table) != 3 or any(len(row) != 3 for row in table):
            raise ValueError("risk table must be 3x3")
        t1, t2 = self.thresholds
        if not (0 < t1 < t2 < 1):
            raise ValueError(f"thresholds must satisfy 0 < t1 < t2 < 1, got {self.thresholds}")
        for i in range(3):
            for j in range(3):
                if i + 1 < 3 and table[i + 1][j] < table[i][j]:
                    raise ValueError(f"table not monotone in impact at column {j}")
                if j + 1 < 3 and table[i][j + 1] < table[i][j]:
                    raise ValueError(f"table not monotone in band at row {i}")

    @classmethod
    def from_dict(cls, d: dict) -> "RiskMatrix":
        table = d.get("table")
        thresholds = d.get("thresholds", DEFAULT_THRESHOLDS)
        if table is None:
            return cls(thresholds=tuple(thresholds))
        return cls(
            table=tuple(tuple(RiskLevel.parse(v) for v in row) for row in table),
            thresholds=tuple(thresholds),
        )


def band(prob: float, matrix: RiskMatrix = RiskMatrix()) -> int:
    """Probability band index: 2 below t1, 1 in [t1, t2), 0 at or above t2."""
    if not 0 <= prob <= 1:
        raise ValueError(f"probability {prob} outside [0, 1]")
    t1, t2 = matrix.thresholds
    if prob < t1:
        return 2
    if prob < t2:
        return 1
    return 0


def assess(impact, prob: float, matrix: RiskMatrix = RiskMatrix()) -> RiskLevel:
    """Risk level for an impact rating and a detector success probability."""
    level = RiskLevel.parse(impact)
    return matrix.table[int(level)][band(prob, matrix)]
