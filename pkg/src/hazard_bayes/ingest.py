"""Reading and writing innings files, plus career-record arithmetic.

File format: UTF-8 CSV with rows ``player,score`` and an optional third
``innings`` column holding an innings number.  A header row is optional,
lines starting with ``#`` are comments, and a trailing ``*`` on the score
marks a not-out.  Rows with a non-batting token (DNB, TDNB, absent, sub) are
skipped.  Rows appear in chronological order per player.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .model import InningsRecord

NON_BATTING = frozenset({"dnb", "tdnb", "absent", "sub", "-"})
_SCORE_RE = re.compile(r"^(\d+)(\*?)$")
_HEADER_NAMES = {"player", "name"}


class MalformedInningsError(ValueError):
    def __init__(self, errors: Sequence["RowError"]):
        self.errors = list(errors)
        lines = "; ".join(f"line {e.line}: {e.message}" for e in self.errors[:10])
        more = f" (+{len(self.errors) - 10} more)" if len(self.errors) > 10 else ""
        super().__init__(f"{len(self.errors)} malformed row(s): {lines}{more}")


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class IngestResult:
    players: dict[str, list[InningsRecord]]
    rows_in: int = 0
    rows_parsed: int = 0
    rows_skipped: int = 0
    errors: list[RowError] = field(default_factory=list)

    @property
    def rows_errored(self) -> int:
        return len(self.errors)


def parse_score(token: str) -> InningsRecord:
    """``"45*"`` -> 45 not out, ``"0"`` -> a duck."""
    m = _SCORE_RE.match(token.strip())
    if not m:
        raise ValueError(f"malformed score token {token!r}")
    return InningsRecord(int(m.group(1)), m.group(2) == "*")


def parse_innings_file(content: str, strict: bool = True) -> IngestResult:
    """Parse innings CSV text into per-player record lists.

    With ``strict`` (the default) any malformed row raises
    :class:`MalformedInningsError`; otherwise row errors are collected on the
    result and the remaining rows are kept.
    """
    result = IngestResult(players={})
    seen: set[tuple[str, int]] = set()
    first_data = True
    for lineno, row in _rows(content):
        if first_data:
            first_data = False
            if row and row[0].strip().lower() in _HEADER_NAMES:
                continue
        result.rows_in += 1
        if len(row) < 2 or len(row) > 3:
            result.errors.append(RowError(lineno, f"expected 2 or 3 fields, got {len(row)}"))
            continue
        player, token = row[0].strip(), row[1].strip()
        if not player:
            result.errors.append(RowError(lineno, "empty player name"))
            continue
        if token.lower() in NON_BATTING:
            result.rows_skipped += 1
            continue
        try:
            rec = parse_score(token)
        except ValueError as exc:
            result.errors.append(RowError(lineno, str(exc)))
            continue
        if len(row) == 3 and row[2].strip():
            try:
                idx = int(row[2])
            except ValueError:
                result.errors.append(RowError(lineno, f"malformed innings index {row[2]!r}"))
                continue
            if (player, idx) in seen:
                result.errors.append(RowError(lineno, f"duplicate innings {idx} for {player}"))
                continue
            seen.add((player, idx))
        result.players.setdefault(player, []).append(rec)
        result.rows_parsed += 1
    if strict and result.errors:
        raise MalformedInningsError(result.errors)
    return result


def _rows(content: str):
    reader = csv.reader(io.StringIO(content.lstrip("\ufeff")))
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        yield reader.line_num, row


def serialize_innings(players: Mapping[str, Iterable[InningsRecord]], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(["player", "score"])
    for name, records in players.items():
        for rec in records:
            w.writerow([name, str(rec)])
    return buf.getvalue()


@dataclass(frozen=True)
class CareerRecord:
    innings: int
    not_outs: int
    runs: int
    high_score: InningsRecord
    hundreds: int
    fifties: int
    matches: int | None = None
    strike_rate: float | None = None

    def __post_init__(self):
        if self.innings < self.not_outs:
            raise ValueError("innings must be at least not_outs")

    @property
    def dismissals(self) -> int:
        return self.innings - self.not_outs

    @property
    def average(self) -> float | None:
        """Runs per dismissal; ``None`` when the batsman was never dismissed."""
        return self.runs / self.dismissals if self.dismissals else None

    @property
    def average_2dp(self) -> str | None:
        """Average truncated (not rounded) to two decimals, as scorecards print it."""
        if not self.dismissals:
            return None
        hundredths = self.runs * 100 // self.dismissals
        return f"{hundredths // 100}.{hundredths % 100:02d}"

    def __add__(self, other: "CareerRecord") -> "CareerRecord":
        hs = max(self.high_score, other.high_score, key=lambda r: (r.score, r.not_out))
        return CareerRecord(
            self.innings + other.innings, self.not_outs + other.not_outs, self.runs + other.runs,
            hs, self.hundreds + other.hundreds, self.fifties + other.fifties)


def career_summary(records: Sequence[InningsRecord]) -> CareerRecord:
    if not records:
        raise ValueError("no innings to summarize")
    scores = [r.score for r in records]
    high = max(records, key=lambda r: (r.score, r.not_out))
    return CareerRecord(
        innings=len(records),
        not_outs=sum(r.not_out for r in records),
        runs=sum(scores),
        high_score=high,
        hundreds=sum(s >= 100 for s in scores),
        fifties=sum(50 <= s < 100 for s in scores),
    )
