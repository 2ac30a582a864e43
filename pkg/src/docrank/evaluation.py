"""Threshold evaluation against ground-truth labels and the bootstrap protocol.

Indicators at a threshold, with x predicted-important modules of which y
are truly important, k truly important modules and n labeled modules:

* precision = TP / (TP + FP)
* recall = TP / (TP + FN)
* F1 = 2 * precision * recall / (precision + recall)
* ER = (y/k - x/n) / (y/k), the inspection effort saved relative to a
  random model reaching the same recall.

ER is undefined when y == 0 and is reported as NaN (``null`` in JSON).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .ranking import rank, select_top

__all__ = [
    "INDICATORS",
    "RNG_DESCRIPTION",
    "BootstrapResult",
    "ConfusionMatrix",
    "IndicatorRecord",
    "LabelSet",
    "bootstrap_split",
    "confusion",
    "indicator_fractions",
    "indicators",
    "read_labels",
    "run_bootstrap",
]

INDICATORS = ("precision", "recall", "f1", "er")

RNG_DESCRIPTION = {
    "name": "numpy.random.Generator(PCG64)",
    "draw": "Generator.integers(0, n, size=n) over labeled modules in ascending name order",
    "seed_rule": "seed = run_index; if the test split is empty, seed += runs and redraw",
}

_TRUE_LABELS = {"important", "1", "true", "yes"}
_FALSE_LABELS = {"non_important", "0", "false", "no", "unimportant", "non-important"}


class LabelSet(Mapping):
    """module -> True (important) / False (non-important)."""

    def __init__(self, labels: Mapping[str, bool]):
        self._labels = {name: bool(flag) for name, flag in labels.items()}

    def __getitem__(self, key):
        return self._labels[key]

    def __iter__(self):
        return iter(self._labels)

    def __len__(self):
        return len(self._labels)

    def __repr__(self) -> str:
        return f"LabelSet(n_total={self.n_total}, k_true={self.k_true})"

    @property
    def n_total(self) -> int:
        return len(self._labels)

    @property
    def k_true(self) -> int:
        return sum(self._labels.values())

    @property
    def important(self) -> frozenset:
        return frozenset(name for name, flag in self._labels.items() if flag)

    def subset(self, names: Iterable[str]) -> LabelSet:
        return LabelSet({name: self._labels[name] for name in names})


def read_labels(text: str) -> LabelSet:
    """Parse ``module,label`` CSV; labels ``important``/``non_important`` or 1/0."""
    lines = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    reader = csv.reader(lines)
    labels = {}
    for lineno, row in enumerate(reader, start=1):
        if len(row) != 2:
            raise ValueError(f"labels row {lineno}: expected 2 columns, got {len(row)}")
        name, raw = row[0].strip(), row[1].strip().lower()
        if lineno == 1 and (name, raw) == ("module", "label"):
            continue
        if raw in _TRUE_LABELS:
            flag = True
        elif raw in _FALSE_LABELS:
            flag = False
        else:
            raise ValueError(f"labels row {lineno}: unknown label {row[1]!r}")
        if name in labels:
            raise ValueError(f"labels row {lineno}: duplicate module {name!r}")
        labels[name] = flag
    result = LabelSet(labels)
    if result.k_true < 1:
        raise ValueError("labels must mark at least one module as important")
    return result


def write_labels(labels: Mapping[str, bool]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["module", "label"])
    for name in sorted(labels):
        writer.writerow([name, "important" if labels[name] else "non_important"])
    return buf.getvalue()


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def x(self) -> int:
        """Modules predicted important."""
        return self.tp + self.fp

    @property
    def y(self) -> int:
        """Truly important modules among the predicted ones."""
        return self.tp

    @property
    def n_total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predicted: Iterable[str], labels: LabelSet) -> ConfusionMatrix:
    predicted = set(predicted)
    unknown = sorted(predicted - set(labels))
    if unknown:
        raise KeyError(f"predicted modules without labels: {', '.join(unknown)}")
    tp = sum(1 for name in predicted if labels[name])
    fp = len(predicted) - tp
    fn = labels.k_true - tp
    tn = labels.n_total - tp - fp - fn
    return ConfusionMatrix(tp, fp, tn, fn)


def indicator_fractions(cm: ConfusionMatrix, labels: LabelSet | None = None) -> dict[str, Fraction | None]:
    """Exact indicator values; ``None`` where a value is undefined."""
    k = cm.tp + cm.fn if labels is None else labels.k_true
    n = cm.n_total if labels is None else labels.n_total
    x, y = cm.x, cm.y
    precision = Fraction(cm.tp, x) if x else Fraction(0)
    recall = Fraction(cm.tp, k) if k else None
    if recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = Fraction(0)
    else:
        f1 = 2 * precision * recall / (precision + recall)
    if k and y and n:
        found = Fraction(y, k)
        er = (found - Fraction(x, n)) / found
    else:
        er = None
    return {"precision": precision, "recall": recall, "f1": f1, "er": er}


@dataclass(frozen=True)
class IndicatorRecord:
    precision: float
    recall: float
    f1: float
    er: float
    k_percent: float | None = None
    approach: str | None = None

    def as_dict(self) -> dict:
        return {name: _jsonable(getattr(self, name)) for name in INDICATORS}


def _jsonable(value: float):
    return None if value is None or math.isnan(value) else value


def indicators(cm: ConfusionMatrix, labels: LabelSet | None = None,
               k_percent: float | None = None, approach: str | None = None) -> IndicatorRecord:
    exact = indicator_fractions(cm, labels)
    values = {name: math.nan if v is None else float(v) for name, v in exact.items()}
    return IndicatorRecord(k_percent=k_percent, approach=approach, **values)


def evaluate_scores(scores: Mapping[str, float], labels: LabelSet, thresholds: Sequence[float],
                    approach: str | None = None) -> list[IndicatorRecord]:
    """Rank the labeled modules by score and evaluate each top-k% cut."""
    missing = sorted(set(labels) - set(scores))
    if missing:
        raise KeyError(f"labeled modules without scores: {', '.join(missing)}")
    ranked = rank({name: scores[name] for name in labels})
    records = []
    for k in thresholds:
        selection = select_top(ranked, k)
        records.append(indicators(confusion(selection.selected, labels), labels, k, approach))
    return records


def bootstrap_split(n_total: int, run_index: int, runs: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-sample bootstrap split for one run.

    The training part is ``n_total`` indices drawn with replacement; the test
    part is the sorted set of indices never drawn.
    """
    if n_total < 2:
        raise ValueError(f"bootstrap needs at least 2 instances, got {n_total}")
    if run_index < 0:
        raise ValueError(f"run_index must be non-negative, got {run_index}")
    seed = run_index
    while True:
        rng = np.random.Generator(np.random.PCG64(seed))
        train = rng.integers(0, n_total, size=n_total)
        mask = np.ones(n_total, dtype=bool)
        mask[train] = False
        test = np.flatnonzero(mask)
        if len(test):
            return train, test
        seed += max(runs, 1)


ScoreSource = Mapping[str, float] | Callable[[list[str]], Mapping[str, float]]


@dataclass
class BootstrapResult:
    approach: str
    thresholds: list[float]
    runs: int
    # per_run[i][j] is run i at thresholds[j]
    per_run: list[list[IndicatorRecord]] = field(default_factory=list)
    test_sizes: list[int] = field(default_factory=list)

    def values(self, threshold: float, indicator: str) -> np.ndarray:
        j = self.thresholds.index(threshold)
        return np.array([getattr(run[j], indicator) for run in self.per_run])

    def mean(self, threshold: float) -> dict[str, float]:
        means = {}
        for name in INDICATORS:
            vals = self.values(threshold, name)
            vals = vals[~np.isnan(vals)]
            means[name] = float(np.mean(vals)) if len(vals) else math.nan
        return means

    def excluded(self, threshold: float, indicator: str = "er") -> int:
        return int(np.isnan(self.values(threshold, indicator)).sum())


def run_bootstrap(approach: ScoreSource, labels: LabelSet, thresholds: Sequence[float],
                  runs: int = 100, name: str = "pagerank") -> BootstrapResult:
    """Repeated out-of-sample evaluation.

    ``approach`` is either a precomputed score mapping (restricted to each
    test split) or a callable receiving the test modules and returning
    their scores.  The training part of each split is not used by
    unsupervised approaches but is drawn anyway so that all approaches
    share identical test sets per run.
    """
    thresholds = [float(k) for k in thresholds]
    if not thresholds:
        raise ValueError("threshold list is empty")
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    instances = sorted(labels)
    if callable(approach):
        score_fn = approach
    else:
        missing = sorted(set(instances) - set(approach))
        if missing:
            raise KeyError(f"labeled modules without scores: {', '.join(missing)}")
        score_fn = lambda names: {n: approach[n] for n in names}  # noqa: E731

    result = BootstrapResult(name, thresholds, runs)
    for run_index in range(runs):
        _, test = bootstrap_split(len(instances), run_index, runs)
        test_names = [instances[i] for i in test]
        test_labels = labels.subset(test_names)
        scores = score_fn(test_names)
        ranked = rank({n: scores[n] for n in test_names})
        records = []
        for k in thresholds:
            selection = select_top(ranked, k)
            cm = confusion(selection.selected, test_labels)
            records.append(indicators(cm, test_labels, k, name))
        result.per_run.append(records)
        result.test_sizes.append(len(test_names))
    return result
