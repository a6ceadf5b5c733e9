"""HMAC linkage identifiers over attribute subsets and the inverted index.

A linkage key spec names an ordered list of attribute selectors; the digest
for a record is the HMAC tag of the canonically serialized selected values.
Records are linked by exact digest equality, so an inverted index from tag
to row ids gives O(1) expected lookup and the whole-population linking pass
is linear in the number of records.

Uniqueness of the digests is the load-bearing property: any repeated tag is
both a linking ambiguity and a privacy foothold, so the module audits it
under two definitions and can prune non-unique postings or drop weak specs
entirely.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .hashcore import HmacKey, hmac_tag
from .model import Dataset, PersonRecord, encode_fields

TAG_BYTES = 32

_SNAPSHOT_MAGIC = b"PPRLIDX1"


class SpecError(ValueError):
    """Raised for selectors referencing unknown fields or bad spec sets."""


# ---------------------------------------------------------------------------
# Attribute selectors
# ---------------------------------------------------------------------------

_FIELDS = ("first_name", "middle_initial", "last_name", "yob", "sex", "meshblock", "sa3")


def _field_value(record: PersonRecord, field: str) -> str | None:
    if field not in _FIELDS:
        raise SpecError(f"unknown record field {field!r}")
    value = getattr(record, field)
    if value is None:
        return None
    return str(value)


@dataclass(frozen=True)
class FullField:
    field: str

    def select(self, record: PersonRecord) -> tuple[str, ...] | None:
        value = _field_value(record, self.field)
        return None if value is None else (value,)


@dataclass(frozen=True)
class Initial:
    field: str

    def select(self, record: PersonRecord) -> tuple[str, ...] | None:
        value = _field_value(record, self.field)
        return None if value is None else (value[:1],)


@dataclass(frozen=True)
class Bigram2:
    """The first two letters of the field (the whole value if shorter)."""

    field: str

    def select(self, record: PersonRecord) -> tuple[str, ...] | None:
        value = _field_value(record, self.field)
        return None if value is None else (value[:2],)


@dataclass(frozen=True)
class Transposed:
    """An order-canonicalized pair of name fields.

    Both sides of a link derive digests with the same function, so catching
    swapped first/last names inside one partition requires the pair to be
    serialized in a canonical order rather than record order. The two values
    are emitted descending, e.g. (anna, smith) -> ("smith", "anna"), which
    equals the plain-field digest of the record with the names exchanged.
    """

    field_a: str
    field_b: str

    def select(self, record: PersonRecord) -> tuple[str, ...] | None:
        a = _field_value(record, self.field_a)
        b = _field_value(record, self.field_b)
        if a is None or b is None:
            return None
        return (a, b) if a >= b else (b, a)


Selector = Union[FullField, Initial, Bigram2, Transposed]


@dataclass(frozen=True)
class LinkageKeySpec:
    name: str
    selectors: tuple[Selector, ...]

    def __post_init__(self) -> None:
        if not self.selectors:
            raise SpecError(f"spec {self.name!r} has no selectors")

    def select(self, record: PersonRecord) -> tuple[str, ...] | None:
        """Selected values in order, or None when an attribute is absent.

        A record missing an attribute contributes no digest for the spec;
        a sentinel tag would gather every such record into one giant
        posting list.
        """
        out: list[str] = []
        for selector in self.selectors:
            part = selector.select(record)
            if part is None:
                return None
            out.extend(part)
        return tuple(out)


def canonical_serialize(record: PersonRecord, spec: LinkageKeySpec) -> bytes | None:
    """Separator-joined byte encoding of the spec's selected values."""
    values = spec.select(record)
    return None if values is None else encode_fields(values)


def check_spec_set(specs: Sequence[LinkageKeySpec]) -> None:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise SpecError("spec names must be unique within a spec set")


def default_spec_suite() -> list[LinkageKeySpec]:
    """The eleven-identifier hierarchy used by the evaluation runs.

    Ordered from most to least specific; the order is the first-unique
    hierarchy. The set is configuration, not doctrine: deployments should
    derive their own from the attributes and distortions they expect.
    """
    F, L, M = "first_name", "last_name", "middle_initial"
    return [
        LinkageKeySpec(
            "ForenameSurnameYoBSexSA3",
            (FullField(F), FullField(L), FullField("yob"), FullField("sex"), FullField("sa3")),
        ),
        LinkageKeySpec(
            "ForenameInitialSurnameInitialYoBSexMeshblock",
            (Initial(F), Initial(L), FullField("yob"), FullField("sex"), FullField("meshblock")),
        ),
        LinkageKeySpec(
            "ForenameSurnameYoBMeshblock",
            (FullField(F), FullField(L), FullField("yob"), FullField("meshblock")),
        ),
        LinkageKeySpec(
            "SurnameForenameYoBSexMeshblockTrans",
            (Transposed(F, L), FullField("yob"), FullField("sex"), FullField("meshblock")),
        ),
        LinkageKeySpec(
            "ForenameSurnameYoBSexMeshblock",
            (FullField(F), FullField(L), FullField("yob"), FullField("sex"), FullField("meshblock")),
        ),
        LinkageKeySpec(
            "ForenameSurnameYoBSex",
            (FullField(F), FullField(L), FullField("yob"), FullField("sex")),
        ),
        LinkageKeySpec(
            "ForenameBiSurnameBiYoBSexMeshblock",
            (Bigram2(F), Bigram2(L), FullField("yob"), FullField("sex"), FullField("meshblock")),
        ),
        LinkageKeySpec(
            "ForenameSurnameSexMeshblock",
            (FullField(F), FullField(L), FullField("sex"), FullField("meshblock")),
        ),
        LinkageKeySpec(
            "SurnameInitialYoBSexMeshblock",
            (Initial(L), FullField("yob"), FullField("sex"), FullField("meshblock")),
        ),
        LinkageKeySpec(
            "ForenameInitialYoBSexMeshblock",
            (Initial(F), FullField("yob"), FullField("sex"), FullField("meshblock")),
        ),
        LinkageKeySpec(
            "MiddleNameSurnameYoBSexMeshblock",
            (FullField(M), FullField(L), FullField("yob"), FullField("sex"), FullField("meshblock")),
        ),
    ]


# ---------------------------------------------------------------------------
# Digest derivation and the inverted index
# ---------------------------------------------------------------------------


def derive_digests(
    record: PersonRecord, specs: Sequence[LinkageKeySpec], key: HmacKey
) -> dict[str, bytes]:
    """One 32-byte tag per applicable spec; absent-attribute specs omitted."""
    digests: dict[str, bytes] = {}
    for spec in specs:
        message = canonical_serialize(record, spec)
        if message is not None:
            digests[spec.name] = hmac_tag(key, message)
    return digests


@dataclass(frozen=True)
class LinkIndex:
    """Per-spec inverted maps from digest tag to the posting list of row ids."""

    partitions: dict[str, dict[bytes, list[int]]]
    spec_order: tuple[str, ...]
    indexed_records: int

    def posting(self, spec_name: str, tag: bytes) -> list[int]:
        return self.partitions[spec_name].get(tag, [])


def build_index(
    dataset: Dataset, specs: Sequence[LinkageKeySpec], key: HmacKey
) -> LinkIndex:
    check_spec_set(specs)
    # Hot path: resolve selectors and key bytes once, then stream records.
    partitions: dict[str, dict[bytes, list[int]]] = {spec.name: {} for spec in specs}
    spec_pairs = [(spec, partitions[spec.name]) for spec in specs]
    import hmac as _hmac_mod

    key_bytes = key.key_bytes
    digest = _hmac_mod.digest
    for record in dataset.records:
        row_id = record.row_id
        for spec, partition in spec_pairs:
            values = spec.select(record)
            if values is None:
                continue
            tag = digest(key_bytes, encode_fields(values), "sha256")
            posting = partition.get(tag)
            if posting is None:
                partition[tag] = [row_id]
            else:
                posting.append(row_id)
    return LinkIndex(partitions, tuple(s.name for s in specs), len(dataset))


# ---------------------------------------------------------------------------
# Uniqueness audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpecUniqueness:
    spec_name: str
    total_tags: int
    unique_tags: int
    contributing_records: int
    unique_records: int
    duplicate_group_count: int
    largest_group_size: int

    @property
    def percent_unique_tags(self) -> float:
        """Tag-level: share of distinct tag values carrying exactly one row."""
        if self.total_tags == 0:
            return 100.0
        return 100.0 * self.unique_tags / self.total_tags

    @property
    def percent_unique_records(self) -> float:
        """Record-level: share of contributing records whose tag is unshared."""
        if self.contributing_records == 0:
            return 100.0
        return 100.0 * self.unique_records / self.contributing_records


@dataclass(frozen=True)
class UniquenessReport:
    per_spec: tuple[SpecUniqueness, ...]
    dataset_size: int

    def by_name(self) -> dict[str, SpecUniqueness]:
        return {u.spec_name: u for u in self.per_spec}


def uniqueness_report(index: LinkIndex, dataset_size: int) -> UniquenessReport:
    """Audit each partition under both uniqueness definitions.

    Reports never pair a tag with attribute plaintext; only spec names and
    aggregate counts appear.
    """
    rows = []
    for spec_name in index.spec_order:
        partition = index.partitions[spec_name]
        total_tags = len(partition)
        unique_tags = 0
        contributing = 0
        dup_groups = 0
        largest = 0
        for posting in partition.values():
            size = len(posting)
            contributing += size
            if size == 1:
                unique_tags += 1
            else:
                dup_groups += 1
            if size > largest:
                largest = size
        rows.append(
            SpecUniqueness(
                spec_name=spec_name,
                total_tags=total_tags,
                unique_tags=unique_tags,
                contributing_records=contributing,
                unique_records=unique_tags,  # singleton postings == unshared records
                duplicate_group_count=dup_groups,
                largest_group_size=largest,
            )
        )
    return UniquenessReport(tuple(rows), dataset_size)


# ---------------------------------------------------------------------------
# Pruning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DropPostings:
    """Remove every posting list longer than one."""


@dataclass(frozen=True)
class DropSpec:
    """Remove whole partitions below a record-level uniqueness threshold."""

    threshold_percent: float


PrunePolicy = Union[DropPostings, DropSpec]


@dataclass(frozen=True)
class PruneStats:
    postings_dropped: int
    records_dropped: int
    specs_dropped: tuple[str, ...]


def prune_nonunique(index: LinkIndex, policy: PrunePolicy) -> tuple[LinkIndex, PruneStats]:
    if isinstance(policy, DropPostings):
        partitions: dict[str, dict[bytes, list[int]]] = {}
        postings_dropped = 0
        records_dropped = 0
        for name, partition in index.partitions.items():
            kept = {}
            for tag, posting in partition.items():
                if len(posting) == 1:
                    kept[tag] = list(posting)
                else:
                    postings_dropped += 1
                    records_dropped += len(posting)
            partitions[name] = kept
        return (
            LinkIndex(partitions, index.spec_order, index.indexed_records),
            PruneStats(postings_dropped, records_dropped, ()),
        )
    if isinstance(policy, DropSpec):
        report = uniqueness_report(index, index.indexed_records).by_name()
        dropped = tuple(
            name
            for name in index.spec_order
            if report[name].percent_unique_records < policy.threshold_percent
        )
        partitions = {
            name: {tag: list(p) for tag, p in partition.items()}
            for name, partition in index.partitions.items()
            if name not in dropped
        }
        order = tuple(n for n in index.spec_order if n not in dropped)
        return (
            LinkIndex(partitions, order, index.indexed_records),
            PruneStats(0, 0, dropped),
        )
    raise SpecError(f"unknown prune policy {policy!r}")


# ---------------------------------------------------------------------------
# Snapshot I/O
# ---------------------------------------------------------------------------


def save_index(index: LinkIndex, path: str) -> None:
    """Binary snapshot: versioned header, per-partition sorted (tag, postings)."""
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(struct.pack("<IQ", len(index.spec_order), index.indexed_records))
        for name in index.spec_order:
            raw_name = name.encode("utf-8")
            partition = index.partitions[name]
            fh.write(struct.pack("<H", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<Q", len(partition)))
            for tag in sorted(partition):
                posting = partition[tag]
                fh.write(tag)
                fh.write(struct.pack("<I", len(posting)))
                fh.write(struct.pack(f"<{len(posting)}Q", *posting))


def load_index(path: str) -> LinkIndex:
    with open(path, "rb") as fh:
        magic = fh.read(len(_SNAPSHOT_MAGIC))
        if magic != _SNAPSHOT_MAGIC:
            raise SpecError(f"not an index snapshot: bad magic {magic!r}")
        n_specs, indexed_records = struct.unpack("<IQ", fh.read(12))
        partitions: dict[str, dict[bytes, list[int]]] = {}
        order = []
        for _ in range(n_specs):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (n_tags,) = struct.unpack("<Q", fh.read(8))
            partition: dict[bytes, list[int]] = {}
            for _ in range(n_tags):
                tag = fh.read(TAG_BYTES)
                (count,) = struct.unpack("<I", fh.read(4))
                partition[tag] = list(struct.unpack(f"<{count}Q", fh.read(8 * count)))
            partitions[name] = partition
            order.append(name)
    return LinkIndex(partitions, tuple(order), indexed_records)


def export_index_csv(index: LinkIndex, path: str) -> None:
    """Debug export of raw tags; gate behind an explicit flag when wiring up.

    The file pairs tags with row ids (not attribute plaintext) but still
    reveals posting structure, hence the sensitivity marker.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# sensitive: raw linkage tags, do not distribute\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["spec", "tag_hex", "row_id"])
        for name in index.spec_order:
            partition = index.partitions[name]
            for tag in sorted(partition):
                for row_id in partition[tag]:
                    writer.writerow([name, tag.hex(), row_id])


def iter_all_tags(index: LinkIndex) -> Iterable[tuple[str, bytes, list[int]]]:
    for name in index.spec_order:
        for tag, posting in index.partitions[name].items():
            yield name, tag, posting
