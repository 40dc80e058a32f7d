"""Median and 16/84 percentile summaries used by every table in the package."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

LOWER_PCT, UPPER_PCT = 16.0, 84.0


@dataclass(frozen=True)
class SummaryRow:
    median: float
    plus_err: float
    minus_err: float
    ci68: tuple[float, float]

    @classmethod
    def from_values(cls, values) -> "SummaryRow":
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise ValueError("cannot summarize an empty sample")
        lo, med, hi = np.percentile(values, [LOWER_PCT, 50.0, UPPER_PCT])
        return cls(float(med), float(hi - med), float(med - lo), (float(lo), float(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci68"] = list(self.ci68)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SummaryRow":
        return cls(d["median"], d["plus_err"], d["minus_err"], tuple(d["ci68"]))

    def __str__(self):
        lo, hi = self.ci68
        return f"{self.median:.1f} +{self.plus_err:.1f}/-{self.minus_err:.1f} [{lo:.1f}, {hi:.1f}]"


def summarize_params(columns: dict) -> dict[str, SummaryRow]:
    return {name: SummaryRow.from_values(v) for name, v in columns.items()}
