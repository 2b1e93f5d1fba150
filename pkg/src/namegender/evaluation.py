"""Train/test splitting, scoring, and metric aggregation.

Scoring uses female as the positive class. Accuracy counts undecided
(ambiguous or unknown) predictions as incorrect in its denominator;
precision excludes them; recall counts an undecided prediction against the
inferrer when the observed gender is female. The gender bias error is
(FF - FM) / (FF + FM + TF + TM), scaled to a percentage, so a negative
value means female names are disproportionately mislabeled male.

Per-dataset metrics aggregate across test sets as a size-weighted average;
cells without a defined value (zero denominators, or inferrers that must
not be scored on their own training data) are NA and drop out of the
average together with their sizes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import FrequencyTable, TableParseError
from .inferrers import Inferrer
from .mle import GenderLabel, Prediction


class SplitDegenerateError(ValueError):
    """The requested split leaves train or test empty."""


@dataclass(frozen=True)
class LabeledTestSet:
    """Unique names with a single observed gender each."""

    id: str
    names: tuple[tuple[str, GenderLabel], ...]

    def __post_init__(self) -> None:
        seen = set()
        for name, observed in self.names:
            if observed not in (GenderLabel.FEMALE, GenderLabel.MALE):
                raise ValueError(f"{name!r}: observed gender must be female or male")
            if name in seen:
                raise ValueError(f"duplicate test name {name!r}")
            seen.add(name)

    @property
    def size(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class SplitResult:
    train: FrequencyTable
    test: LabeledTestSet
    ties: tuple[str, ...]


def split_dataset(table: FrequencyTable, test_fraction: float, seed: int) -> SplitResult:
    """Partition unique names into train/test uniformly at random.

    Ground truth for a test name is its majority gender by counts; names
    with exactly tied counts are excluded from the test set and reported in
    `ties`. The same seed always produces the same split.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction {test_fraction} outside (0, 1)")
    names = sorted(table.entries)
    n = len(names)
    k = round(n * test_fraction)
    if k == 0 or k == n:
        raise SplitDegenerateError(f"fraction {test_fraction} of {n} names leaves an empty side")
    rng = random.Random(seed)
    rng.shuffle(names)
    test_names, train_names = names[:k], names[k:]

    ties = []
    pairs = []
    for name in sorted(test_names):
        gc = table.entries[name]
        if gc.female == gc.male:
            ties.append(name)
        elif gc.female > gc.male:
            pairs.append((name, GenderLabel.FEMALE))
        else:
            pairs.append((name, GenderLabel.MALE))
    if not pairs:
        raise SplitDegenerateError("every sampled test name has tied counts")

    train = FrequencyTable(
        {name: table.entries[name] for name in sorted(train_names)},
        table.name_type,
        f"{table.source_id}-train",
    )
    test = LabeledTestSet(table.source_id, tuple(pairs))
    return SplitResult(train=train, test=test, ties=tuple(ties))


@dataclass(frozen=True)
class ConfusionCounts:
    """Outcome tallies under the female-positive convention.

    Undecided predictions are split by observed gender because recall
    charges undecided-on-female against the inferrer.
    """

    true_female: int = 0
    true_male: int = 0
    false_female: int = 0
    false_male: int = 0
    undecided_female: int = 0
    undecided_male: int = 0

    @property
    def undecided(self) -> int:
        return self.undecided_female + self.undecided_male

    @property
    def total(self) -> int:
        return (
            self.true_female
            + self.true_male
            + self.false_female
            + self.false_male
            + self.undecided
        )


def score(testset: LabeledTestSet, predictions: Sequence[Prediction]) -> ConfusionCounts:
    """Tally predictions against observed genders.

    false_female = predicted female, observed male; false_male symmetric.
    """
    if len(predictions) != testset.size:
        raise ValueError(f"{len(predictions)} predictions for {testset.size} test names")
    tf = tm = ff = fm = uf = um = 0
    for (_, observed), pred in zip(testset.names, predictions):
        if pred.label is GenderLabel.FEMALE:
            if observed is GenderLabel.FEMALE:
                tf += 1
            else:
                ff += 1
        elif pred.label is GenderLabel.MALE:
            if observed is GenderLabel.MALE:
                tm += 1
            else:
                fm += 1
        elif observed is GenderLabel.FEMALE:
            uf += 1
        else:
            um += 1
    return ConfusionCounts(tf, tm, ff, fm, uf, um)


@dataclass(frozen=True)
class MetricValues:
    """Percentages; None marks a metric whose denominator was zero."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    gbe: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "gbe": self.gbe,
        }


def metrics(counts: ConfusionCounts) -> MetricValues:
    """Compute all five metrics from one confusion tally."""
    total = counts.total
    if total == 0:
        raise ValueError("empty confusion counts")
    tf, tm = counts.true_female, counts.true_male
    ff, fm = counts.false_female, counts.false_male

    accuracy = 100.0 * (tf + tm) / total
    precision = 100.0 * tf / (tf + ff) if tf + ff > 0 else None
    recall_den = tf + fm + counts.undecided_female
    recall = 100.0 * tf / recall_den if recall_den > 0 else None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = None
    decided = tf + tm + ff + fm
    gbe = 100.0 * (ff - fm) / decided if decided > 0 else None
    return MetricValues(accuracy, precision, recall, f1, gbe)


def aggregate(per_dataset: Iterable[tuple[float | None, int]]) -> float | None:
    """Size-weighted average over (value, size) pairs, skipping NA values."""
    num = 0.0
    den = 0
    for value, size in per_dataset:
        if value is None:
            continue
        num += value * size
        den += size
    return num / den if den else None


@dataclass(frozen=True)
class ReportRow:
    inferrer_id: str
    dataset_id: str
    size: int
    counts: ConfusionCounts | None
    values: MetricValues | None
    skipped: bool = False


_METRIC_KEYS = ("accuracy", "precision", "recall", "f1", "gbe")


@dataclass
class MetricsReport:
    """Per-dataset rows plus one size-weighted aggregate row per inferrer."""

    rows: list[ReportRow]
    notes: list[str] = field(default_factory=list)

    def inferrer_ids(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row.inferrer_id not in seen:
                seen.append(row.inferrer_id)
        return seen

    def aggregate_for(self, inferrer_id: str) -> tuple[MetricValues, int]:
        """Aggregate metrics and the total size they cover."""
        rows = [r for r in self.rows if r.inferrer_id == inferrer_id and not r.skipped]
        values = {}
        for key in _METRIC_KEYS:
            values[key] = aggregate((getattr(r.values, key), r.size) for r in rows)
        return MetricValues(**values), sum(r.size for r in rows)

    @staticmethod
    def _fmt(value: float | None) -> str:
        return "NA" if value is None else f"{value:.2f}"

    def to_tsv(self) -> str:
        lines = ["inferrer\tdataset\tsize\taccuracy\tprecision\trecall\tf1\tgbe"]
        for inferrer_id in self.inferrer_ids():
            for row in self.rows:
                if row.inferrer_id != inferrer_id:
                    continue
                cells = [row.inferrer_id, row.dataset_id, str(row.size)]
                if row.values is None:
                    cells += ["NA"] * 5
                else:
                    cells += [self._fmt(getattr(row.values, key)) for key in _METRIC_KEYS]
                lines.append("\t".join(cells))
            agg, covered = self.aggregate_for(inferrer_id)
            cells = [inferrer_id, "ALL", str(covered)]
            cells += [self._fmt(getattr(agg, key)) for key in _METRIC_KEYS]
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        """Aligned table: Accuracy, Precision, Recall, F1, GBE."""
        header = ["Inferrer", "Dataset", "Size", "Accuracy", "Precision", "Recall", "F1", "GBE"]
        body: list[list[str]] = []
        for inferrer_id in self.inferrer_ids():
            for row in self.rows:
                if row.inferrer_id != inferrer_id:
                    continue
                cells = [row.inferrer_id, row.dataset_id, str(row.size)]
                if row.values is None:
                    cells += ["NA"] * 5
                else:
                    cells += [self._fmt(getattr(row.values, key)) for key in _METRIC_KEYS]
                body.append(cells)
            agg, covered = self.aggregate_for(inferrer_id)
            body.append(
                [inferrer_id, "ALL", str(covered)]
                + [self._fmt(getattr(agg, key)) for key in _METRIC_KEYS]
            )
        widths = [max(len(header[i]), *(len(r[i]) for r in body)) for i in range(len(header))]
        out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
        for cells in body:
            out.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(cells)))
        for note in self.notes:
            out.append(f"note: {note}")
        return "\n".join(out) + "\n"

    def to_records(self) -> list[dict[str, object]]:
        """Machine-readable records, one per inferrer x dataset plus aggregates."""
        records: list[dict[str, object]] = []
        for inferrer_id in self.inferrer_ids():
            for row in self.rows:
                if row.inferrer_id != inferrer_id:
                    continue
                record: dict[str, object] = {
                    "inferrer": row.inferrer_id,
                    "dataset": row.dataset_id,
                    "size": row.size,
                    "skipped": row.skipped,
                }
                values = row.values.as_dict() if row.values else dict.fromkeys(_METRIC_KEYS)
                record.update(values)
                records.append(record)
            agg, covered = self.aggregate_for(inferrer_id)
            record = {"inferrer": inferrer_id, "dataset": "ALL", "size": covered, "skipped": False}
            record.update(agg.as_dict())
            records.append(record)
        return records


def evaluate_run(
    testsets: Sequence[LabeledTestSet],
    inferrers: Sequence[Inferrer],
    skip: Mapping[str, set[str]] | None = None,
) -> MetricsReport:
    """Score every inferrer on every test set.

    skip maps an inferrer id to dataset ids it must not be scored on
    (typically its own training data); those cells are NA. Rows are ordered
    by (inferrer id, dataset id).
    """
    skip = skip or {}
    rows = []
    for inferrer in sorted(inferrers, key=lambda inf: inf.id):
        excluded = skip.get(inferrer.id, set())
        for ts in sorted(testsets, key=lambda t: t.id):
            if ts.id in excluded:
                rows.append(ReportRow(inferrer.id, ts.id, ts.size, None, None, skipped=True))
                continue
            predictions = inferrer.infer_batch([name for name, _ in ts.names])
            counts = score(ts, predictions)
            rows.append(ReportRow(inferrer.id, ts.id, ts.size, counts, metrics(counts)))
    return MetricsReport(rows)


# --- test-set serialization --------------------------------------------------
#
#   # testset=<id>
#   anna<TAB>female


def write_testset(testset: LabeledTestSet, path: str | Path) -> None:
    lines = [f"# testset={testset.id}"]
    for name, observed in testset.names:
        lines.append(f"{name}\t{observed.value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_testset(path: str | Path) -> LabeledTestSet:
    path = Path(path)
    pairs = []
    with path.open(encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("# testset="):
            raise TableParseError(path, 1, "missing testset header")
        set_id = first[len("# testset=") :]
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise TableParseError(path, line_no, "expected name<TAB>gender")
            name, raw_label = parts
            try:
                label = GenderLabel(raw_label)
            except ValueError:
                raise TableParseError(path, line_no, f"bad gender {raw_label!r}") from None
            pairs.append((name, label))
    return LabeledTestSet(set_id, tuple(pairs))
