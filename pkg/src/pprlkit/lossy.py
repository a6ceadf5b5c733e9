"""Lossy name encodings: truncated-HMAC buckets and frequency smoothing.

A bucket table maps every name to one of n buckets, destroying exact-name
information while keeping elimination power. Two constructions:

* truncated HMAC: the first 8 tag bytes as an unsigned integer, reduced
  mod n_buckets. Deterministic and keyless to reverse in bulk, which is
  exactly why the frequency analysis here can find the dominant name's
  bucket by mass alone.
* frequency smoothing: names assigned greedily (heaviest first, into the
  currently lightest bucket) to flatten the bucket-mass distribution. The
  table itself becomes the secret; mass cannot be flattened below the
  heaviest single name, since one name cannot be split across buckets.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass

from .hashcore import HmacKey, hmac_tag
from .model import FrequencyTable

TRUNCATED_HMAC = "truncated_hmac"
FREQUENCY_SMOOTHED = "frequency_smoothed"

# 64-bit truncation mod non-power-of-two bucket counts carries a modulo
# bias below 2^-50 for every bucket count used here; ignored.
_TRUNC_BYTES = 8


class BucketError(ValueError):
    pass


@dataclass(frozen=True)
class BucketTable:
    mapping: dict[str, int]
    n_buckets: int
    construction: str

    def bucket_of(self, name: str) -> int:
        try:
            return self.mapping[name]
        except KeyError:
            raise BucketError(f"name {name!r} not present in bucket table")

    def members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for name, bucket in self.mapping.items():
            out.setdefault(bucket, []).append(name)
        for names in out.values():
            names.sort()
        return out


def truncated_hmac_bucket(name: str, key: HmacKey, n_buckets: int) -> int:
    """Bucket id from the truncated tag; requires at least two buckets."""
    if n_buckets < 2:
        raise BucketError("n_buckets must be >= 2 for a lossy encoding")
    value = int.from_bytes(hmac_tag(key, name.encode())[:_TRUNC_BYTES], "big")
    return value % n_buckets


def build_hmac_table(names, key: HmacKey, n_buckets: int) -> BucketTable:
    mapping = {name: truncated_hmac_bucket(name, key, n_buckets) for name in names}
    return BucketTable(mapping, n_buckets, TRUNCATED_HMAC)


@dataclass(frozen=True)
class BucketAnalysis:
    """Bucket masses (descending) and where a probe name's bucket ranks."""

    masses: tuple[tuple[int, int], ...]  # (bucket_id, mass), heaviest first
    distinct_names: dict[int, int]
    probe_name: str
    probe_bucket: int
    probe_rank: int  # 1-based; ties share the better rank

    def rows(self) -> list[tuple[int, int, int, int]]:
        return [
            (bucket, mass, self.distinct_names.get(bucket, 0), rank)
            for rank, (bucket, mass) in enumerate(self.masses, 1)
        ]


def bucket_frequency_analysis(
    table: BucketTable, freq: FrequencyTable, probe_name: str
) -> BucketAnalysis:
    """Mass of each bucket under ``freq`` and the probe's bucket rank.

    This is the attacker's view: bucket ids and a public name-frequency
    list, no key or table contents needed.
    """
    counts = freq.counts()
    if probe_name not in counts or probe_name not in table.mapping:
        raise BucketError(f"probe name {probe_name!r} absent from table or frequencies")
    masses: dict[int, int] = {}
    distinct: dict[int, int] = {}
    for name, count in counts.items():
        if name not in table.mapping:
            raise BucketError(f"frequency table name {name!r} is unmapped")
        bucket = table.mapping[name]
        masses[bucket] = masses.get(bucket, 0) + count
        distinct[bucket] = distinct.get(bucket, 0) + 1
    ordered = sorted(masses.items(), key=lambda kv: (-kv[1], kv[0]))
    probe_bucket = table.mapping[probe_name]
    probe_mass = masses[probe_bucket]
    rank = 1 + sum(1 for _, mass in ordered if mass > probe_mass)
    return BucketAnalysis(
        masses=tuple(ordered),
        distinct_names=distinct,
        probe_name=probe_name,
        probe_bucket=probe_bucket,
        probe_rank=rank,
    )


@dataclass(frozen=True)
class SmoothingStats:
    n_buckets: int
    max_mass: int
    min_mass: int
    max_min_ratio: float
    distinct_names_per_bucket: tuple[int, ...]


def build_smoothed_table(freq: FrequencyTable, n_buckets: int) -> tuple[BucketTable, SmoothingStats]:
    """Greedy equal-mass assignment: heaviest name into the lightest bucket.

    Sorted by descending count (ties by name) for determinism. The returned
    stats expose the smoothing floor: one dominant name forces its bucket
    to at least its own mass, and matching that mass elsewhere piles many
    rare names into single buckets.
    """
    names = sorted(freq.entries, key=lambda vc: (-vc[1], vc[0]))
    if n_buckets < 1 or n_buckets > len(names):
        raise BucketError(f"n_buckets must be in [1, {len(names)}]")
    heap = [(0, bucket_id, 0) for bucket_id in range(n_buckets)]  # (mass, id, count)
    mapping: dict[str, int] = {}
    for name, count in names:
        mass, bucket_id, n_names = heapq.heappop(heap)
        mapping[name] = bucket_id
        heapq.heappush(heap, (mass + count, bucket_id, n_names + 1))
    by_bucket = sorted(heap, key=lambda entry: entry[1])
    masses = [mass for mass, _, _ in by_bucket]
    distinct = tuple(n for _, _, n in by_bucket)
    min_mass = min(masses)
    max_mass = max(masses)
    stats = SmoothingStats(
        n_buckets=n_buckets,
        max_mass=max_mass,
        min_mass=min_mass,
        max_min_ratio=max_mass / min_mass if min_mass else float("inf"),
        distinct_names_per_bucket=distinct,
    )
    return BucketTable(mapping, n_buckets, FREQUENCY_SMOOTHED), stats


def mean_candidate_set_size(table: BucketTable, freq: FrequencyTable) -> float:
    """Expected number of candidate names behind a random record's bucket.

    Mass-weighted: a record is in a bucket with probability proportional to
    the bucket's mass, and its candidate set is that bucket's name list.
    """
    counts = freq.counts()
    mass: dict[int, int] = {}
    distinct: dict[int, int] = {}
    for name, count in counts.items():
        bucket = table.mapping[name]
        mass[bucket] = mass.get(bucket, 0) + count
        distinct[bucket] = distinct.get(bucket, 0) + 1
    total = sum(mass.values())
    if total == 0:
        return 0.0
    return sum(m * distinct[bucket] for bucket, m in mass.items()) / total


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_bucket_table_csv(table: BucketTable, path: str) -> None:
    # The table IS the secret in smoothed mode; mark it and store it with
    # the same care as key material. At-rest encryption is deployment scope.
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# sensitive: name-to-bucket correspondence, keep secret\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "bucket_id"])
        for name in sorted(table.mapping):
            writer.writerow([name, table.mapping[name]])


def load_bucket_table_csv(path: str, construction: str = TRUNCATED_HMAC) -> BucketTable:
    mapping: dict[str, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != ["name", "bucket_id"]:
        raise BucketError(f"bucket table header must be name,bucket_id, got {header!r}")
    for row in reader:
        if not row:
            continue
        mapping[row[0]] = int(row[1])
    if not mapping:
        raise BucketError("empty bucket table")
    return BucketTable(mapping, max(mapping.values()) + 1, construction)


def write_analysis_csv(analysis: BucketAnalysis, path: str, header_line: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header_line:
            fh.write(header_line.rstrip("\n") + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bucket_id", "mass", "distinct_names", "rank"])
        for bucket, mass, names, rank in analysis.rows():
            writer.writerow([bucket, mass, names, rank])
