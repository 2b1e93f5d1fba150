"""Corpus ingestion and name-frequency tables.

Reads labeled name corpora (generic CSV files and SSA-style yearly files),
applies the cleaning rules, and accumulates per-name female/male occurrence
counts into a FrequencyTable. Also provides table merging, dataset
statistics, cross-dataset uniqueness/overlap analyses, and a lossless
tab-separated serialization.

Cleaning rules applied by normalize_name, in order:
  1. whitespace is trimmed and interior runs collapsed to single spaces,
     then the name is lower-cased;
  2. names containing digits are rejected (InvalidCharacters);
  3. names with fewer than two letters are rejected (TooShort);
  4. personal titles are rejected (IsTitle; checked before the vowel rule
     because common titles such as "mr" contain no vowel);
  5. names without a vowel are rejected (NoVowel); the vowel check runs on
     a diacritic-folded copy so that accented vowels count, but the name
     itself keeps its non-ASCII characters.
"""

from __future__ import annotations

import csv
import logging
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

logger = logging.getLogger(__name__)

VOWELS = frozenset("aeiou")

DEFAULT_TITLES = frozenset({"mr", "mrs", "ms", "dr", "prof", "rev", "hon", "sr", "jr"})

# Gender-tag aliases, case-insensitive. Anything unmapped drops the record.
DEFAULT_GENDER_ALIASES: Mapping[str, str] = {
    "f": "female",
    "female": "female",
    "w": "female",
    "m": "male",
    "male": "male",
}


class NameType(Enum):
    FIRST = "first"
    FULL = "full"


class Rejection(Enum):
    """Why normalize_name refused a raw name."""

    TOO_SHORT = "too_short"
    NO_VOWEL = "no_vowel"
    IS_TITLE = "is_title"
    INVALID_CHARACTERS = "invalid_characters"


class EmptyCorpusError(ValueError):
    """Ingestion retained zero records."""


class TableParseError(ValueError):
    """A table file could not be parsed."""

    def __init__(self, path: str | Path, line_no: int, message: str) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


@dataclass(frozen=True)
class RawRecord:
    """One labeled occurrence as read from a corpus file."""

    name: str
    gender_tag: str
    count: int = 1
    year: int | None = None


@dataclass(frozen=True)
class GenderCounts:
    """Female/male occurrence tallies for one normalized name."""

    female: int
    male: int

    @property
    def total(self) -> int:
        return self.female + self.male

    @property
    def is_ambiguous(self) -> bool:
        return self.female >= 1 and self.male >= 1


@dataclass
class FrequencyTable:
    """Normalized name -> GenderCounts, plus corpus metadata.

    A completed table is treated as immutable and is safe for unrestricted
    concurrent reads.
    """

    entries: dict[str, GenderCounts]
    name_type: NameType
    source_id: str

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries


@dataclass
class IngestReport:
    """What ingestion kept, dropped, and why."""

    source: str
    total_rows: int = 0
    retained: int = 0
    rejections: dict[Rejection, int] = field(default_factory=dict)
    unmappable_gender: int = 0
    malformed: list[tuple[int, str]] = field(default_factory=list)
    missing_years: list[int] = field(default_factory=list)

    def dropped_total(self) -> int:
        return (
            sum(self.rejections.values())
            + self.unmappable_gender
            + len(self.malformed)
        )

    def _tally(self, reason: Rejection) -> None:
        self.rejections[reason] = self.rejections.get(reason, 0) + 1


@dataclass(frozen=True)
class DatasetStats:
    total_names: int
    unique_names: int
    unique_first: int
    unique_last: int
    ambiguous: int


@dataclass(frozen=True)
class AmbiguityHistogram:
    """Binned distribution of p(female) over a table's ambiguous names."""

    bin_edges: tuple[float, ...]
    percentages: tuple[float, ...]
    p25: float
    p50: float
    p75: float
    count: int


def normalize_name(raw: str, titles: frozenset[str] | set[str] = DEFAULT_TITLES) -> str | Rejection:
    """Clean one raw name, returning the normalized form or a Rejection.

    Idempotent on accepted names: normalize_name(x) == x for any x it
    returns.
    """
    name = " ".join(raw.split()).lower()
    if any(ch.isdigit() for ch in name):
        return Rejection.INVALID_CHARACTERS
    if sum(1 for ch in name if ch.isalpha()) < 2:
        return Rejection.TOO_SHORT
    if name.rstrip(".") in titles:
        return Rejection.IS_TITLE
    folded = unicodedata.normalize("NFKD", name)
    if not any(ch in VOWELS for ch in folded):
        return Rejection.NO_VOWEL
    return name


def split_full_name(full: str) -> tuple[str, str]:
    """Split a full name into (first token, last token).

    Middle tokens are dropped; single-token input yields an empty last name.
    """
    tokens = full.split()
    if not tokens:
        raise ValueError("cannot split an empty full name")
    first = tokens[0]
    last = tokens[-1] if len(tokens) > 1 else ""
    return first, last


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for a labeled CSV corpus (header row required)."""

    name_column: str
    gender_column: str
    count_column: str | None = None


def _accumulate(
    counts: defaultdict[str, list[int]],
    record: RawRecord,
    report: IngestReport,
    aliases: Mapping[str, str],
    titles: frozenset[str] | set[str],
) -> None:
    """Normalize one record and fold it into the running counts."""
    gender = aliases.get(record.gender_tag.strip().lower())
    if gender is None:
        report.unmappable_gender += 1
        return
    name = normalize_name(record.name, titles)
    if isinstance(name, Rejection):
        report._tally(name)
        return
    slot = counts[name]
    if gender == "female":
        slot[0] += record.count
    else:
        slot[1] += record.count
    report.retained += 1


def _freeze(counts: Mapping[str, list[int]]) -> dict[str, GenderCounts]:
    return {name: GenderCounts(f, m) for name, (f, m) in counts.items()}


def ingest_labeled_csv(
    path: str | Path,
    schema: CsvSchema,
    *,
    name_type: NameType = NameType.FIRST,
    source_id: str | None = None,
    aliases: Mapping[str, str] = DEFAULT_GENDER_ALIASES,
    titles: frozenset[str] | set[str] = DEFAULT_TITLES,
) -> tuple[FrequencyTable, IngestReport]:
    """Build a frequency table from a labeled CSV file.

    Malformed rows are skipped and recorded with their line number; the run
    continues. Raises EmptyCorpusError if nothing survives cleaning.
    """
    path = Path(path)
    source = source_id if source_id is not None else path.stem
    report = IngestReport(source=source)
    counts: defaultdict[str, list[int]] = defaultdict(lambda: [0, 0])

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyCorpusError(f"{path}: file is empty") from None
        positions = {}
        for column in (schema.name_column, schema.gender_column, schema.count_column):
            if column is None:
                continue
            if column not in header:
                raise ValueError(f"{path}: column {column!r} not in header {header}")
            positions[column] = header.index(column)

        for row in reader:
            report.total_rows += 1
            line_no = reader.line_num
            try:
                name = row[positions[schema.name_column]]
                gender_tag = row[positions[schema.gender_column]]
            except IndexError:
                report.malformed.append((line_no, "row has too few fields"))
                continue
            count = 1
            if schema.count_column is not None:
                raw_count = row[positions[schema.count_column]] if positions[schema.count_column] < len(row) else ""
                try:
                    count = int(raw_count)
                except ValueError:
                    report.malformed.append((line_no, f"bad count {raw_count!r}"))
                    continue
                if count < 1:
                    report.malformed.append((line_no, f"count {count} < 1"))
                    continue
            if not gender_tag.strip():
                report.unmappable_gender += 1
                continue
            record = RawRecord(name=name, gender_tag=gender_tag, count=count)
            _accumulate(counts, record, report, aliases, titles)

    if not counts:
        detail = ""
        if report.malformed:
            line_no, message = report.malformed[0]
            detail = f" (first bad line {line_no}: {message})"
        raise EmptyCorpusError(f"{path}: no records retained after cleaning{detail}")
    return FrequencyTable(_freeze(counts), name_type, source), report


def ingest_ssa_years(
    directory: str | Path,
    years: Sequence[int],
    *,
    source_id: str | None = None,
    aliases: Mapping[str, str] = DEFAULT_GENDER_ALIASES,
    titles: frozenset[str] | set[str] = DEFAULT_TITLES,
) -> tuple[FrequencyTable, IngestReport]:
    """Sum per-name counts over yobYYYY.txt files for the given years.

    Each file holds headerless `Name,G,Count` rows with G in {F, M}.
    Missing year files are reported and skipped.
    """
    years = list(years)
    if not years:
        raise ValueError("year range is empty")
    directory = Path(directory)
    source = source_id if source_id is not None else f"ssa{min(years)}-{max(years)}"
    report = IngestReport(source=source)
    counts: defaultdict[str, list[int]] = defaultdict(lambda: [0, 0])

    for year in years:
        path = directory / f"yob{year}.txt"
        if not path.exists():
            report.missing_years.append(year)
            logger.warning("missing SSA year file: %s", path)
            continue
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                report.total_rows += 1
                parts = line.split(",")
                if len(parts) != 3:
                    report.malformed.append((line_no, f"{path.name}: expected 3 fields"))
                    continue
                name, tag, raw_count = parts
                try:
                    count = int(raw_count)
                except ValueError:
                    report.malformed.append((line_no, f"{path.name}: bad count {raw_count!r}"))
                    continue
                if count < 1:
                    report.malformed.append((line_no, f"{path.name}: count {count} < 1"))
                    continue
                record = RawRecord(name=name, gender_tag=tag, count=count, year=year)
                _accumulate(counts, record, report, aliases, titles)

    if not counts:
        raise EmptyCorpusError(f"{directory}: no records retained for years {years[0]}-{years[-1]}")
    return FrequencyTable(_freeze(counts), NameType.FIRST, source), report


def merge_tables(tables: Sequence[FrequencyTable]) -> FrequencyTable:
    """Merge first-name tables by component-wise count addition."""
    if not tables:
        raise ValueError("nothing to merge")
    for table in tables:
        if table.name_type is not NameType.FIRST:
            raise ValueError(
                f"merge requires first-name tables; {table.source_id!r} is {table.name_type.value}"
            )
    counts: defaultdict[str, list[int]] = defaultdict(lambda: [0, 0])
    for table in tables:
        for name, gc in table.entries.items():
            slot = counts[name]
            slot[0] += gc.female
            slot[1] += gc.male
    source = "+".join(t.source_id for t in tables)
    return FrequencyTable(_freeze(counts), NameType.FIRST, source)


def to_first_names(table: FrequencyTable) -> FrequencyTable:
    """Reduce a full-name table to a first-name table.

    First tokens that do not pass normalize_name on their own (e.g. a
    single-letter first name inside a valid full name) are dropped and
    logged.
    """
    if table.name_type is NameType.FIRST:
        return table
    counts: defaultdict[str, list[int]] = defaultdict(lambda: [0, 0])
    dropped = 0
    for full, gc in table.entries.items():
        first, _ = split_full_name(full)
        cleaned = normalize_name(first)
        if isinstance(cleaned, Rejection):
            dropped += 1
            continue
        slot = counts[cleaned]
        slot[0] += gc.female
        slot[1] += gc.male
    if dropped:
        logger.info("to_first_names: dropped %d first tokens failing cleaning", dropped)
    return FrequencyTable(_freeze(counts), NameType.FIRST, table.source_id)


def dataset_stats(table: FrequencyTable) -> DatasetStats:
    """Summary statistics for one table."""
    if not table.entries:
        raise ValueError("table is empty")
    total = sum(gc.total for gc in table.entries.values())
    unique = len(table.entries)
    if table.name_type is NameType.FIRST:
        unique_first, unique_last = unique, 0
    else:
        firsts = set()
        lasts = set()
        for name in table.entries:
            first, last = split_full_name(name)
            firsts.add(first)
            if last:
                lasts.add(last)
        unique_first, unique_last = len(firsts), len(lasts)
    ambiguous = sum(1 for gc in table.entries.values() if gc.is_ambiguous)
    return DatasetStats(
        total_names=total,
        unique_names=unique,
        unique_first=unique_first,
        unique_last=unique_last,
        ambiguous=ambiguous,
    )


def cross_dataset_uniqueness(tables: Sequence[FrequencyTable]) -> list[tuple[int, float]]:
    """Per table: how many of its names appear in no other table, and the
    percentage of its unique names that represents."""
    if len(tables) < 2:
        raise ValueError("need at least two tables")
    keysets = [set(t.entries) for t in tables]
    results = []
    for i, keys in enumerate(keysets):
        others: set[str] = set()
        for j, other in enumerate(keysets):
            if j != i:
                others |= other
        unique = len(keys - others)
        pct = 100.0 * unique / len(keys) if keys else 0.0
        results.append((unique, pct))
    return results


def pairwise_overlap(tables: Sequence[FrequencyTable]) -> list[list[tuple[int, float]]]:
    """Matrix of (overlap count, percentage of the row dataset's names).

    Diagonal cells carry the dataset's own size at 100%.
    """
    if len(tables) < 2:
        raise ValueError("need at least two tables")
    keysets = [set(t.entries) for t in tables]
    matrix = []
    for i, keys_i in enumerate(keysets):
        row = []
        for j, keys_j in enumerate(keysets):
            if i == j:
                row.append((len(keys_i), 100.0))
                continue
            overlap = len(keys_i & keys_j)
            pct = 100.0 * overlap / len(keys_i) if keys_i else 0.0
            row.append((overlap, pct))
        matrix.append(row)
    return matrix


def _percentile(sorted_values: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile of pre-sorted values, q in [0, 1]."""
    if not sorted_values:
        raise ValueError("no values")
    h = (len(sorted_values) - 1) * q
    lo = int(h)
    hi = min(lo + 1, len(sorted_values) - 1)
    frac = h - lo
    return sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac


def ambiguity_histogram(table: FrequencyTable, bin_count: int) -> AmbiguityHistogram:
    """Histogram of p(female) over the table's ambiguous names.

    Bins partition [0, 1] with equal width; per-bin percentages sum to 100.
    """
    if bin_count < 2:
        raise ValueError("bin_count must be >= 2")
    values = sorted(
        gc.female / gc.total for gc in table.entries.values() if gc.is_ambiguous
    )
    if not values:
        raise ValueError(f"{table.source_id}: no ambiguous names")
    bins = [0] * bin_count
    for v in values:
        bins[min(int(v * bin_count), bin_count - 1)] += 1
    total = len(values)
    edges = tuple(i / bin_count for i in range(bin_count + 1))
    percentages = tuple(100.0 * b / total for b in bins)
    return AmbiguityHistogram(
        bin_edges=edges,
        percentages=percentages,
        p25=_percentile(values, 0.25),
        p50=_percentile(values, 0.50),
        p75=_percentile(values, 0.75),
        count=total,
    )


# --- serialization -----------------------------------------------------------
#
# Table file layout (lossless round trip):
#   # name_type=first<TAB>source_id=ssa1937-1999[<TAB>key=value ...]
#   aaron<TAB>12<TAB>3514
# Names are sorted so identical tables serialize to identical bytes.


def write_table(
    table: FrequencyTable,
    path: str | Path,
    extra_header: Mapping[str, str] | None = None,
) -> None:
    path = Path(path)
    fields = {"name_type": table.name_type.value, "source_id": table.source_id}
    if extra_header:
        fields.update(extra_header)
    for key, value in fields.items():
        if "\t" in value or "\n" in value:
            raise ValueError(f"header field {key}={value!r} contains tab or newline")
    header = "# " + "\t".join(f"{k}={v}" for k, v in fields.items())
    lines = [header]
    for name in sorted(table.entries):
        gc = table.entries[name]
        lines.append(f"{name}\t{gc.female}\t{gc.male}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table_with_header(path: str | Path) -> tuple[FrequencyTable, dict[str, str]]:
    """Read a table file, returning the table and any extra header fields."""
    path = Path(path)
    entries: dict[str, GenderCounts] = {}
    with path.open(encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise TableParseError(path, 1, "missing header line")
        fields: dict[str, str] = {}
        for item in first[2:].rstrip("\n").split("\t"):
            key, sep, value = item.partition("=")
            if not sep:
                raise TableParseError(path, 1, f"bad header field {item!r}")
            fields[key] = value
        try:
            name_type = NameType(fields.pop("name_type"))
            source_id = fields.pop("source_id")
        except (KeyError, ValueError) as exc:
            raise TableParseError(path, 1, f"bad or missing header field: {exc}") from None
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TableParseError(path, line_no, "expected name<TAB>female<TAB>male")
            name, raw_f, raw_m = parts
            try:
                female, male = int(raw_f), int(raw_m)
            except ValueError:
                raise TableParseError(path, line_no, "counts must be integers") from None
            if female < 0 or male < 0 or female + male < 1:
                raise TableParseError(path, line_no, f"bad counts ({female}, {male})")
            if name in entries:
                raise TableParseError(path, line_no, f"duplicate name {name!r}")
            entries[name] = GenderCounts(female, male)
    return FrequencyTable(entries, name_type, source_id), fields


def read_table(path: str | Path) -> FrequencyTable:
    return read_table_with_header(path)[0]
