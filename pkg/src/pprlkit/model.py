"""Domain types, canonical serialization, and dataset I/O.

A dataset is an ordered, immutable collection of person records. Records are
exchanged as CSV with the fixed header
``row_id,first_name,middle_initial,last_name,yob,sex,meshblock,sa3``
(UTF-8, LF line endings, empty middle_initial meaning absent).

Field values are joined for hashing with the ASCII unit separator 0x1F,
which is forbidden inside values; that guarantees the concatenation is
injective over distinct attribute tuples.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

FIELD_SEP = "\x1f"
FIELD_SEP_BYTE = b"\x1f"

CSV_HEADER = [
    "row_id",
    "first_name",
    "middle_initial",
    "last_name",
    "yob",
    "sex",
    "meshblock",
    "sa3",
]

YOB_MIN = 1916
YOB_MAX = 2016

SEXES = ("M", "F")

SA3_DIGITS = 3


class DataError(ValueError):
    """Raised for malformed rows, duplicate ids, or invariant violations."""


def sa3_from_meshblock(meshblock: str, digits: int = SA3_DIGITS) -> str:
    """Coarse geography code: the leading digits of the meshblock code."""
    if len(meshblock) < digits:
        raise DataError(f"meshblock {meshblock!r} shorter than {digits} digits")
    return meshblock[:digits]


def _check_name(value: str, field: str) -> str:
    if not value:
        raise DataError(f"{field} must be non-empty")
    if value != value.strip().lower():
        raise DataError(f"{field} must be lowercase with no surrounding whitespace: {value!r}")
    if FIELD_SEP in value:
        raise DataError(f"{field} may not contain the 0x1F separator")
    return value


@dataclass(frozen=True)
class PersonRecord:
    """One synthetic individual."""

    row_id: int
    first_name: str
    middle_initial: str | None
    last_name: str
    yob: int
    sex: str
    meshblock: str
    sa3: str

    def validate(self, yob_range: tuple[int, int] = (YOB_MIN, YOB_MAX)) -> "PersonRecord":
        if self.row_id < 0:
            raise DataError(f"row_id must be non-negative, got {self.row_id}")
        _check_name(self.first_name, "first_name")
        _check_name(self.last_name, "last_name")
        if self.middle_initial is not None:
            if len(self.middle_initial) != 1 or not self.middle_initial.islower():
                raise DataError(
                    f"middle_initial must be one lowercase letter, got {self.middle_initial!r}"
                )
        lo, hi = yob_range
        if not lo <= self.yob <= hi:
            raise DataError(f"yob {self.yob} outside [{lo}, {hi}]")
        if self.sex not in SEXES:
            raise DataError(f"sex must be one of {SEXES}, got {self.sex!r}")
        if not self.meshblock or FIELD_SEP in self.meshblock:
            raise DataError("meshblock must be non-empty and separator-free")
        if self.sa3 != sa3_from_meshblock(self.meshblock, len(self.sa3)):
            raise DataError(
                f"sa3 {self.sa3!r} is not derived from meshblock {self.meshblock!r}"
            )
        return self

    def with_fields(self, **changes) -> "PersonRecord":
        return replace(self, **changes)


@dataclass(frozen=True)
class Dataset:
    """Ordered records plus a provenance label such as ``original`` or
    ``distorted:meshblockChange``."""

    records: tuple[PersonRecord, ...]
    provenance: str = "original"

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PersonRecord]:
        return iter(self.records)

    def row_ids(self) -> frozenset[int]:
        return frozenset(r.row_id for r in self.records)

    def by_row_id(self) -> dict[int, PersonRecord]:
        return {r.row_id: r for r in self.records}

    @staticmethod
    def from_records(records: Iterable[PersonRecord], provenance: str = "original") -> "Dataset":
        recs = tuple(records)
        seen: set[int] = set()
        for r in recs:
            if r.row_id in seen:
                raise DataError(f"duplicate row_id {r.row_id}")
            seen.add(r.row_id)
        return Dataset(recs, provenance)


@dataclass(frozen=True)
class FrequencyTable:
    """Values with non-negative counts; sampling mass is count/total."""

    entries: tuple[tuple[str, int], ...]
    total: int

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[str, int]]) -> "FrequencyTable":
        entries = tuple((str(v), int(c)) for v, c in pairs)
        seen: set[str] = set()
        for value, count in entries:
            if count < 0:
                raise DataError(f"negative count for {value!r}")
            if value in seen:
                raise DataError(f"duplicate value {value!r} in frequency table")
            seen.add(value)
        total = sum(c for _, c in entries)
        return FrequencyTable(entries, total)

    def values(self) -> list[str]:
        return [v for v, _ in self.entries]

    def counts(self) -> dict[str, int]:
        return dict(self.entries)

    def mass(self, value: str) -> float:
        return self.counts()[value] / self.total

    def sampler(self):
        """A draw(rng) callable using cumulative-weight bisection."""
        import bisect

        values = [v for v, _ in self.entries]
        cum: list[int] = []
        running = 0
        for _, c in self.entries:
            running += c
            cum.append(running)
        if running <= 0:
            raise DataError("cannot sample from an empty frequency table")

        def draw(rng) -> str:
            return values[bisect.bisect_right(cum, int(rng.random() * running))]

        return draw


# ---------------------------------------------------------------------------
# Canonical field encoding
# ---------------------------------------------------------------------------


def encode_fields(values: Sequence[str]) -> bytes:
    """Join attribute values with 0x1F and encode to UTF-8.

    Injective over distinct value tuples of the same arity because the
    separator cannot occur in any value (and every attribute subset has at
    least one selector, so arity is fixed per use). Absent optional
    attributes are encoded as the empty string, which no real value can be.
    """
    if not values:
        raise DataError("cannot encode an empty field list")
    for v in values:
        if FIELD_SEP in v:
            raise DataError(f"field value {v!r} contains the reserved separator")
    return FIELD_SEP.join(values).encode("utf-8")


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def _record_from_row(row: list[str], lineno: int, yob_range: tuple[int, int]) -> PersonRecord:
    if len(row) != len(CSV_HEADER):
        raise DataError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
    raw = dict(zip(CSV_HEADER, row))
    try:
        row_id = int(raw["row_id"])
    except ValueError:
        raise DataError(f"line {lineno}: field row_id is not an integer: {raw['row_id']!r}")
    try:
        yob = int(raw["yob"])
    except ValueError:
        raise DataError(f"line {lineno}: field yob is not an integer: {raw['yob']!r}")
    record = PersonRecord(
        row_id=row_id,
        first_name=raw["first_name"],
        middle_initial=raw["middle_initial"] or None,
        last_name=raw["last_name"],
        yob=yob,
        sex=raw["sex"],
        meshblock=raw["meshblock"],
        sa3=raw["sa3"],
    )
    try:
        record.validate(yob_range)
    except DataError as exc:
        raise DataError(f"line {lineno}: {exc}") from exc
    return record


def load_dataset(
    path: str,
    provenance: str = "original",
    yob_range: tuple[int, int] = (YOB_MIN, YOB_MAX),
) -> Dataset:
    """Parse a dataset CSV, enforcing the schema and record invariants.

    Errors name the offending line and field; duplicate row_ids are
    rejected.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _load_from_stream(fh, provenance, yob_range)


def _load_from_stream(fh, provenance, yob_range) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("line 1: missing header")
    if header != CSV_HEADER:
        raise DataError(f"line 1: header {header!r} does not match {CSV_HEADER!r}")
    records: list[PersonRecord] = []
    seen: set[int] = set()
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        record = _record_from_row(row, lineno, yob_range)
        if record.row_id in seen:
            raise DataError(f"line {lineno}: duplicate row_id {record.row_id}")
        seen.add(record.row_id)
        records.append(record)
    return Dataset(tuple(records), provenance)


def loads_dataset(text: str, provenance: str = "original") -> Dataset:
    return _load_from_stream(io.StringIO(text), provenance, (YOB_MIN, YOB_MAX))


def write_dataset(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_dataset(dataset))


def dumps_dataset(dataset: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in dataset:
        writer.writerow(
            [
                r.row_id,
                r.first_name,
                r.middle_initial or "",
                r.last_name,
                r.yob,
                r.sex,
                r.meshblock,
                r.sa3,
            ]
        )
    return out.getvalue()


def load_frequency_table(path: str) -> FrequencyTable:
    """Read a ``value,count`` CSV (header required)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["value", "count"]:
            raise DataError(f"frequency table header must be value,count, got {header!r}")
        pairs = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"line {lineno}: expected value,count")
            try:
                pairs.append((row[0], int(row[1])))
            except ValueError:
                raise DataError(f"line {lineno}: field count is not an integer: {row[1]!r}")
    return FrequencyTable.from_pairs(pairs)


def write_frequency_table(table: FrequencyTable, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["value", "count"])
        for value, count in table.entries:
            writer.writerow([value, count])


def load_first_name_tables(path: str) -> dict[tuple[int, str], FrequencyTable]:
    """Read a ``yob,sex,value,count`` CSV into per-(yob, sex) tables."""
    groups: dict[tuple[int, str], list[tuple[str, int]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["yob", "sex", "value", "count"]:
            raise DataError(
                f"first-name table header must be yob,sex,value,count, got {header!r}"
            )
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"line {lineno}: expected yob,sex,value,count")
            try:
                yob = int(row[0])
                count = int(row[3])
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}")
            groups.setdefault((yob, row[1]), []).append((row[2], count))
    return {key: FrequencyTable.from_pairs(pairs) for key, pairs in groups.items()}


def write_first_name_tables(
    tables: dict[tuple[int, str], FrequencyTable], path: str
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["yob", "sex", "value", "count"])
        for (yob, sex) in sorted(tables):
            for value, count in tables[(yob, sex)].entries:
                writer.writerow([yob, sex, value, count])
