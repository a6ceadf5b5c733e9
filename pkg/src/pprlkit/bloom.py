"""Bloom filters and the similarity over-estimation experiment suite.

Bloom filters are set-membership structures; record-linkage literature
repurposes them as similarity sketches by inserting name bi-grams and
comparing filters with a dice coefficient over set bits. The experiments
here measure what that repurposing costs:

* ``uniformity_experiment`` builds many filters from random 2-byte values
  and reports the per-bit set frequency; a skewed histogram means unequal
  bit weights under the dice comparison.
* ``overestimation_experiment`` cross-compares every name pair, scoring
  both the filters and the plaintext bi-gram sets, and accumulates how
  often and by how much the filter score exceeds the honest one.
* ``parameter_sweep`` repeats that over (size, hash count) grids.

Filters are tiny, so the scalar `BloomFilter` keeps its bits in a plain
int. The experiment paths vectorize the same arithmetic with numpy; tests
cross-check the two against each other.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .hashcore import (
    PLAIN,
    DoubleHashParams,
    UniversalHashParams,
    bigrams,
    derive_rng,
    derive_seed,
    double_hash_indices,
    universal_family,
    universal_hash,
)

UNIVERSAL = "universal"
DOUBLE = "double"

Family = Union[tuple[UniversalHashParams, ...], DoubleHashParams]


class FamilyMismatchError(ValueError):
    """Raised when comparing filters built from different hash families."""


def make_family(
    kind: str,
    m: int,
    k: int,
    seed: int = 0,
    hash_pair: str = "sha1_md5",
    enhancement: str = PLAIN,
) -> Family:
    """Build a hash family for (kind, m, k); universal members are drawn
    from the seed's labelled stream."""
    if kind == UNIVERSAL:
        return universal_family(m, k, derive_rng(seed, "universal-family", m, k))
    if kind == DOUBLE:
        return DoubleHashParams(m=m, k=k, enhancement=enhancement, hash_pair=hash_pair)
    raise ValueError(f"unknown family kind {kind!r}")


def family_shape(family: Family) -> tuple[int, int]:
    """(m, k) of a family, validating internal consistency."""
    if isinstance(family, DoubleHashParams):
        return family.m, family.k
    if not family:
        raise FamilyMismatchError("universal family must have at least one member")
    sizes = {p.L for p in family}
    if len(sizes) != 1:
        raise FamilyMismatchError(f"universal family members disagree on m: {sizes}")
    return sizes.pop(), len(family)


def family_indices(family: Family, element: bytes) -> list[int]:
    """The k bit positions for an element under the family."""
    if isinstance(family, DoubleHashParams):
        return double_hash_indices(family, element)
    x = int.from_bytes(element, "big")
    return [universal_hash(p, x) for p in family]


class BloomFilter:
    """Fixed-length bit array addressed by a hash family."""

    __slots__ = ("family", "m", "k", "bits", "inserted_count")

    def __init__(self, family: Family) -> None:
        self.family = family
        self.m, self.k = family_shape(family)
        self.bits = 0
        self.inserted_count = 0

    def insert(self, element: bytes) -> "BloomFilter":
        for idx in family_indices(self.family, element):
            self.bits |= 1 << idx
        self.inserted_count += 1
        return self

    def contains(self, element: bytes) -> bool:
        return all(self.bits >> idx & 1 for idx in family_indices(self.family, element))

    def popcount(self) -> int:
        return self.bits.bit_count()

    def bit_list(self) -> list[int]:
        return [(self.bits >> i) & 1 for i in range(self.m)]


def bloom_insert(filt: BloomFilter, element: bytes) -> BloomFilter:
    return filt.insert(element)


def bloom_dice(a: BloomFilter, b: BloomFilter) -> float:
    """2*popcount(a AND b) / (popcount(a) + popcount(b)); 0.0 for two empties."""
    if a.family != b.family:
        raise FamilyMismatchError("filters built from different families are incomparable")
    pa, pb = a.popcount(), b.popcount()
    if pa + pb == 0:
        return 0.0
    return 2.0 * (a.bits & b.bits).bit_count() / (pa + pb)


def filter_from_name(name: str, family: Family) -> BloomFilter:
    """Filter holding the bi-grams of the padded name."""
    filt = BloomFilter(family)
    for gram in sorted(bigrams(name)):
        filt.insert(gram.encode())
    return filt


# ---------------------------------------------------------------------------
# Welford / parallel variance accumulation
# ---------------------------------------------------------------------------


class VarianceAccumulator:
    """Running mean/variance; single-value updates or associative merges.

    Merging uses the parallel combination rule, so sharded accumulators
    reduce to the same result (to float rounding) in any order.
    """

    __slots__ = ("count", "mean", "m2")

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def merge(self, count: int, mean: float, m2: float) -> None:
        if count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = count, mean, m2
            return
        delta = mean - self.mean
        total = self.count + count
        self.m2 += m2 + delta * delta * self.count * count / total
        self.mean += delta * count / total
        self.count = total

    def merge_array(self, values: np.ndarray) -> None:
        n = int(values.size)
        if n == 0:
            return
        mean = float(values.mean())
        self.merge(n, mean, float(((values - mean) ** 2).sum()))

    def variance(self) -> float:
        return self.m2 / self.count if self.count else 0.0

    def stddev(self) -> float:
        return math.sqrt(self.variance())


# ---------------------------------------------------------------------------
# Uniformity experiment
# ---------------------------------------------------------------------------

_TWO_BYTE_DOMAIN = 1 << 16


@dataclass(frozen=True)
class UniformityResult:
    bit_counts: tuple[int, ...]
    stddev: float
    n_filters: int
    inserts_per_filter: int

    def histogram_rows(self) -> list[tuple[int, int]]:
        return list(enumerate(self.bit_counts))


def _domain_index_map(family: Family) -> np.ndarray:
    """(65536, k) table of bit positions for every possible 2-byte element."""
    m, k = family_shape(family)
    table = np.empty((_TWO_BYTE_DOMAIN, k), dtype=np.int64)
    if isinstance(family, DoubleHashParams):
        for v in range(_TWO_BYTE_DOMAIN):
            table[v] = double_hash_indices(family, v.to_bytes(2, "big"))
    else:
        for i, params in enumerate(family):
            col = [universal_hash(params, v) for v in range(_TWO_BYTE_DOMAIN)]
            table[:, i] = col
    return table


def _element_matrix(n_filters: int, inserts_per_filter: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(seed, "uniformity-elements"))
    return rng.integers(0, _TWO_BYTE_DOMAIN, size=(n_filters, inserts_per_filter), dtype=np.uint16)


def uniformity_experiment(
    family: Family,
    n_filters: int,
    inserts_per_filter: int,
    seed: int = 0,
    vectorized: bool = True,
) -> UniformityResult:
    """Per-bit set frequency over many filters of random 2-byte elements.

    The reported stddev is the population standard deviation of the per-bit
    counts: sampling noise alone for a uniform family, sampling noise plus
    structural skew otherwise.
    """
    m, k = family_shape(family)
    if n_filters == 0:
        return UniformityResult(tuple([0] * m), 0.0, 0, inserts_per_filter)
    elements = _element_matrix(n_filters, inserts_per_filter, seed)
    if not vectorized:
        counts = np.zeros(m, dtype=np.int64)
        for row in elements:
            filt = BloomFilter(family)
            for v in row:
                filt.insert(int(v).to_bytes(2, "big"))
            bits = filt.bits
            while bits:
                low = bits & -bits
                counts[low.bit_length() - 1] += 1
                bits ^= low
        return UniformityResult(tuple(int(c) for c in counts), float(counts.std()), n_filters, inserts_per_filter)
    index_map = _domain_index_map(family)
    positions = index_map[elements.astype(np.int64)].reshape(n_filters, -1)
    bit_matrix = np.zeros((n_filters, m), dtype=bool)
    rows = np.repeat(np.arange(n_filters), positions.shape[1])
    bit_matrix[rows, positions.ravel()] = True
    counts = bit_matrix.sum(axis=0, dtype=np.int64)
    return UniformityResult(
        tuple(int(c) for c in counts), float(counts.std()), n_filters, inserts_per_filter
    )


# ---------------------------------------------------------------------------
# Over-estimation experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OverestimationStats:
    family_kind: str
    m: int
    k: int
    total_comparisons: int
    equal_count: int
    bloom_greater_count: int
    ngram_greater_count: int
    mean_diff_when_greater: float
    stddev_diff_when_greater: float
    extreme_examples: tuple[tuple[float, str, str], ...]

    @property
    def equal_fraction(self) -> float:
        return self.equal_count / self.total_comparisons if self.total_comparisons else 0.0

    @property
    def bloom_greater_fraction(self) -> float:
        return self.bloom_greater_count / self.total_comparisons if self.total_comparisons else 0.0


def _pack_bitsets(index_sets: list[list[int]], n_bits: int) -> np.ndarray:
    words = (n_bits + 63) // 64
    packed = np.zeros((len(index_sets), words), dtype=np.uint64)
    for row, indices in enumerate(index_sets):
        for idx in indices:
            packed[row, idx >> 6] |= np.uint64(1 << (idx & 63))
    return packed


def _popcount_rows(arr: np.ndarray) -> np.ndarray:
    return np.bitwise_count(arr).sum(axis=1, dtype=np.int64)


def overestimation_experiment(
    names: Sequence[str],
    family: Family,
    extreme_keep: int = 20,
) -> OverestimationStats:
    """Cross-compare all unordered name pairs: filter dice vs plaintext dice.

    Equality and ordering of the two scores are decided in exact integer
    arithmetic (cross-multiplied rationals). The mean/stddev of the
    difference, over the pairs where the filter is greater, accumulate via
    Welford-style merges, one merge per comparison block, so shard layout
    cannot change the result. The extreme list keeps the highest filter
    scores among pairs sharing zero bi-grams.
    """
    if len(set(names)) != len(names):
        raise ValueError("names for cross comparison must be deduplicated")
    m, k = family_shape(family)
    n = len(names)
    gram_sets = [sorted(bigrams(name)) for name in names]
    vocab = sorted({g for grams in gram_sets for g in grams})
    vocab_index = {g: i for i, g in enumerate(vocab)}

    index_cache: dict[str, list[int]] = {}
    bloom_sets: list[list[int]] = []
    plain_sets: list[list[int]] = []
    for grams in gram_sets:
        positions: set[int] = set()
        for gram in grams:
            cached = index_cache.get(gram)
            if cached is None:
                cached = family_indices(family, gram.encode())
                index_cache[gram] = cached
            positions.update(cached)
        bloom_sets.append(sorted(positions))
        plain_sets.append([vocab_index[g] for g in grams])

    bloom_bits = _pack_bitsets(bloom_sets, m)
    plain_bits = _pack_bitsets(plain_sets, len(vocab))
    bloom_pop = _popcount_rows(bloom_bits)
    plain_pop = _popcount_rows(plain_bits)

    total = equal = greater = ngram_greater = 0
    acc = VarianceAccumulator()
    extremes: list[tuple[float, int, int]] = []  # min-heap of (score, i, j)
    for i in range(n - 1):
        ib = _popcount_rows(bloom_bits[i] & bloom_bits[i + 1 :])
        ip = _popcount_rows(plain_bits[i] & plain_bits[i + 1 :])
        bloom_denom = bloom_pop[i] + bloom_pop[i + 1 :]
        plain_denom = plain_pop[i] + plain_pop[i + 1 :]
        # 2*ib/bloom_denom vs 2*ip/plain_denom, compared exactly.
        lhs = ib * plain_denom
        rhs = ip * bloom_denom
        block = lhs.size
        total += block
        eq_mask = lhs == rhs
        gt_mask = lhs > rhs
        n_eq = int(eq_mask.sum())
        n_gt = int(gt_mask.sum())
        equal += n_eq
        greater += n_gt
        ngram_greater += block - n_eq - n_gt
        if n_gt:
            diffs = 2.0 * (
                ib[gt_mask] / bloom_denom[gt_mask] - ip[gt_mask] / plain_denom[gt_mask]
            )
            acc.merge_array(diffs)
        zero_mask = ip == 0
        if zero_mask.any():
            scores = 2.0 * ib[zero_mask] / bloom_denom[zero_mask]
            partners = np.nonzero(zero_mask)[0] + i + 1
            floor = extremes[0][0] if len(extremes) >= extreme_keep else -1.0
            for score, j in zip(scores, partners):
                score = float(score)
                if score <= floor and len(extremes) >= extreme_keep:
                    continue
                heapq.heappush(extremes, (score, i, int(j)))
                if len(extremes) > extreme_keep:
                    heapq.heappop(extremes)
                    floor = extremes[0][0]
    extreme_rows = tuple(
        (score, names[i], names[j]) for score, i, j in sorted(extremes, reverse=True)
    )
    return OverestimationStats(
        family_kind=DOUBLE if isinstance(family, DoubleHashParams) else UNIVERSAL,
        m=m,
        k=k,
        total_comparisons=total,
        equal_count=equal,
        bloom_greater_count=greater,
        ngram_greater_count=ngram_greater,
        mean_diff_when_greater=acc.mean,
        stddev_diff_when_greater=acc.stddev(),
        extreme_examples=extreme_rows,
    )


# ---------------------------------------------------------------------------
# Parameter sweep
# ---------------------------------------------------------------------------


def parameter_sweep(
    names: Sequence[str],
    sizes: Sequence[int],
    ks: Sequence[int],
    kinds: Sequence[str] = (UNIVERSAL, DOUBLE),
    seed: int = 0,
    hash_pair: str = "sha1_md5",
    enhancement: str = PLAIN,
) -> list[OverestimationStats]:
    """Over-estimation stats for every (kind, m, k) combination requested."""
    if len(names) < 2:
        raise ValueError("sweep needs at least two names")
    rows = []
    for kind in kinds:
        for m in sizes:
            for k in ks:
                family = make_family(kind, m, k, seed=seed, hash_pair=hash_pair, enhancement=enhancement)
                rows.append(overestimation_experiment(names, family))
    return rows


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def write_sweep_csv(rows: Sequence[OverestimationStats], path: str, header_line: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header_line:
            fh.write(header_line.rstrip("\n") + "\n")
        fh.write("family,m,k,total,equal_pct,bloom_greater_pct,mean_diff,std_diff\n")
        for row in rows:
            fh.write(
                f"{row.family_kind},{row.m},{row.k},{row.total_comparisons},"
                f"{100.0 * row.equal_fraction:.4f},{100.0 * row.bloom_greater_fraction:.4f},"
                f"{row.mean_diff_when_greater:.6f},{row.stddev_diff_when_greater:.6f}\n"
            )


def write_histogram_csv(result: UniformityResult, path: str, header_line: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header_line:
            fh.write(header_line.rstrip("\n") + "\n")
        fh.write("bit_index,count\n")
        for bit_index, count in result.histogram_rows():
            fh.write(f"{bit_index},{count}\n")
