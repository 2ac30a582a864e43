"""Deterministic ranking and top-k% selection."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, NamedTuple

__all__ = [
    "DEFAULT_THRESHOLDS",
    "RankedEntry",
    "RankedList",
    "ThresholdSelection",
    "cutoff_count",
    "format_score",
    "rank",
    "read_ranking_csv",
    "select_top",
    "write_ranking_csv",
]

DEFAULT_THRESHOLDS = tuple(range(5, 55, 5))


class RankedEntry(NamedTuple):
    module: str
    score: float
    rank: int


class RankedList:
    """Modules by descending score; ties broken by ascending name."""

    def __init__(self, entries: Iterable[RankedEntry]):
        self.entries = tuple(entries)

    def __iter__(self) -> Iterator[RankedEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __repr__(self) -> str:
        return f"RankedList({[e.module for e in self.entries]})"

    @property
    def modules(self) -> list[str]:
        return [e.module for e in self.entries]


@dataclass(frozen=True)
class ThresholdSelection:
    k_percent: float
    selected: frozenset
    cutoff_count: int


def rank(scores: Mapping[str, float]) -> RankedList:
    if not scores:
        raise ValueError("cannot rank an empty score set")
    order = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return RankedList(RankedEntry(name, float(score), i)
                      for i, (name, score) in enumerate(order, start=1))


def _exact(value) -> Fraction:
    if isinstance(value, float):
        # decimal reading so that 12.5 and 0.1-style inputs are taken at face value
        return Fraction(repr(value))
    return Fraction(value)


def cutoff_count(n: int, k_percent) -> int:
    """max(1, round_half_up(n * k / 100)); 0 for an empty list."""
    k = _exact(k_percent)
    if not 0 < k <= 100:
        raise ValueError(f"k_percent must lie in (0, 100], got {k_percent}")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if n == 0:
        return 0
    raw = Fraction(n) * k / 100
    return max(1, int(raw + Fraction(1, 2)))


def select_top(ranked: RankedList, k_percent) -> ThresholdSelection:
    count = cutoff_count(len(ranked), k_percent)
    return ThresholdSelection(float(k_percent), frozenset(e.module for e in ranked.entries[:count]), count)


def format_score(score: float) -> str:
    return f"{score:.10g}"


def write_ranking_csv(ranked: RankedList, header_comment: str | None = None,
                      selection: ThresholdSelection | None = None) -> str:
    """CSV text ``module,score,rank`` (plus ``selected`` when a selection is given)."""
    buf = io.StringIO()
    if header_comment:
        for line in header_comment.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    columns = ["module", "score", "rank"] + (["selected"] if selection is not None else [])
    writer.writerow(columns)
    for entry in ranked:
        row = [entry.module, format_score(entry.score), entry.rank]
        if selection is not None:
            row.append(1 if entry.module in selection.selected else 0)
        writer.writerow(row)
    return buf.getvalue()


def read_ranking_csv(text: str) -> dict[str, float]:
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"module", "score"} <= set(reader.fieldnames):
        raise ValueError("ranking CSV needs 'module' and 'score' columns")
    scores = {}
    for lineno, row in enumerate(reader, start=2):
        name = row["module"]
        if name in scores:
            raise ValueError(f"row {lineno}: duplicate module {name!r}")
        try:
            scores[name] = float(row["score"])
        except (TypeError, ValueError):
            raise ValueError(f"row {lineno}: bad score {row['score']!r}") from None
    return scores
