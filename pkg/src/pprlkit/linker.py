"""Linking strategies over the inverted index, plus the bi-gram matcher.

Two deterministic strategies consume the per-spec posting lists:

* first-unique walks the spec hierarchy in order and stops at the first
  posting list of size one; anything else (empty lists, or only ambiguous
  lists) is a no-match, and matched records are never removed.
* voting unions the posting lists of every spec, counts row-id frequency,
  and takes the maximum; ties are broken uniformly at random from a seeded
  per-query stream, and only an all-empty query is a no-match.

The bi-gram matcher is the quadratic comparison baseline: names are
compared per field as HMAC'd bi-gram sets within geography blocks, scored
with the dice coefficient or q-gram similarity.
"""

from __future__ import annotations

import hmac as _hmac_mod
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .hashcore import HmacKey, bigram_counts, bigrams, derive_rng, hmac_tag
from .linkkeys import LinkageKeySpec, LinkIndex
from .model import Dataset, PersonRecord, encode_fields

# Per-spec evidence outcomes.
UNIQUE = "unique"
MULTIPLE = "multiple"
NONE = "none"
SKIPPED = "skipped"

FIRST_UNIQUE = "first_unique"
VOTING = "voting"
BIGRAM_DICE = "bigram_dice"
BIGRAM_QGRAM = "bigram_qgram"

DEFAULT_BIGRAM_THRESHOLD = 0.8


@dataclass(frozen=True, slots=True)
class MatchDecision:
    query_row_id: int
    matched_row_id: int | None
    method: str
    evidence: tuple[tuple[str, str, int], ...] = ()  # (spec, outcome, posting size)
    score: float | None = None

    def queries_issued(self) -> int:
        return sum(1 for _, outcome, _ in self.evidence if outcome != SKIPPED)


# ---------------------------------------------------------------------------
# Set similarities
# ---------------------------------------------------------------------------


def dice_sets(a, b) -> float:
    """2|a∩b| / (|a|+|b|); 0.0 when both sets are empty."""
    if not a and not b:
        return 0.0
    return 2.0 * len(set(a) & set(b)) / (len(a) + len(b))


def qgram_similarity(a: Mapping, b: Mapping) -> float:
    """Similarity from the q-gram distance between two gram multisets.

    distance = sum over grams of |count_a - count_b|; the maximum possible
    distance is the sum of the two multiset cardinalities, and similarity is
    (max - distance) / max, or 0.0 when both multisets are empty.
    """
    size_a = sum(a.values())
    size_b = sum(b.values())
    max_distance = size_a + size_b
    if max_distance == 0:
        return 0.0
    distance = 0
    for gram, count in a.items():
        distance += abs(count - b.get(gram, 0))
    for gram, count in b.items():
        if gram not in a:
            distance += count
    return (max_distance - distance) / max_distance


# ---------------------------------------------------------------------------
# Deterministic strategies
# ---------------------------------------------------------------------------


def _spec_postings(query, index, specs, key_bytes):
    """Yield (spec_name, posting or None-for-skipped) in hierarchy order."""
    digest = _hmac_mod.digest
    for spec in specs:
        values = spec.select(query)
        if values is None:
            yield spec.name, None
            continue
        tag = digest(key_bytes, encode_fields(values), "sha256")
        yield spec.name, index.partitions[spec.name].get(tag, [])


def link_first_unique(
    query: PersonRecord,
    index: LinkIndex,
    specs: Sequence[LinkageKeySpec],
    key: HmacKey,
) -> MatchDecision:
    """Stop at the first singleton posting; never settle for an ambiguous one."""
    evidence: list[tuple[str, str, int]] = []
    for spec_name, posting in _spec_postings(query, index, specs, key.key_bytes):
        if posting is None:
            evidence.append((spec_name, SKIPPED, 0))
            continue
        size = len(posting)
        if size == 1:
            evidence.append((spec_name, UNIQUE, 1))
            return MatchDecision(query.row_id, posting[0], FIRST_UNIQUE, tuple(evidence))
        evidence.append((spec_name, NONE if size == 0 else MULTIPLE, size))
    return MatchDecision(query.row_id, None, FIRST_UNIQUE, tuple(evidence))


def link_voting(
    query: PersonRecord,
    index: LinkIndex,
    specs: Sequence[LinkageKeySpec],
    key: HmacKey,
    tiebreak_seed: int = 0,
) -> MatchDecision:
    """Most-voted row id across all spec postings wins; seeded random tiebreak."""
    evidence: list[tuple[str, str, int]] = []
    votes: Counter = Counter()
    for spec_name, posting in _spec_postings(query, index, specs, key.key_bytes):
        if posting is None:
            evidence.append((spec_name, SKIPPED, 0))
            continue
        size = len(posting)
        if size == 0:
            evidence.append((spec_name, NONE, 0))
        else:
            evidence.append((spec_name, UNIQUE if size == 1 else MULTIPLE, size))
            votes.update(posting)
    if not votes:
        return MatchDecision(query.row_id, None, VOTING, tuple(evidence))
    top = max(votes.values())
    tied = [row_id for row_id, n in votes.items() if n == top]
    if len(tied) == 1:
        winner = tied[0]
    else:
        rng = derive_rng(tiebreak_seed, "tiebreak", query.row_id)
        winner = rng.choice(sorted(tied))
    return MatchDecision(query.row_id, winner, VOTING, tuple(evidence))


def link_dataset(
    queries: Dataset,
    index: LinkIndex,
    specs: Sequence[LinkageKeySpec],
    key: HmacKey,
    method: str = FIRST_UNIQUE,
    tiebreak_seed: int = 0,
    threads: int = 1,
) -> list[MatchDecision]:
    """Link every query record; decisions come back in query order.

    Queries are independent, so the pass may fan out over record chunks;
    the chunked merge keeps results identical for any thread count.
    """
    if method == FIRST_UNIQUE:
        def run(record):
            return link_first_unique(record, index, specs, key)
    elif method == VOTING:
        def run(record):
            return link_voting(record, index, specs, key, tiebreak_seed)
    else:
        raise ValueError(f"unknown deterministic method {method!r}")

    records = queries.records
    if threads <= 1 or len(records) < 2048:
        return [run(r) for r in records]
    chunk_size = max(1, len(records) // (threads * 4))
    chunks = [records[i : i + chunk_size] for i in range(0, len(records), chunk_size)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda chunk: [run(r) for r in chunk], chunks)
        out: list[MatchDecision] = []
        for part in parts:
            out.extend(part)
    return out


# ---------------------------------------------------------------------------
# Blocking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    blocking_key: str
    row_ids: tuple[int, ...]


@dataclass(frozen=True)
class ByMeshblockPrefix:
    prefix_len: int


@dataclass(frozen=True)
class BySA3:
    pass


BlockingStrategy = Union[ByMeshblockPrefix, BySA3]


def block_dataset(dataset: Dataset, strategy: BlockingStrategy) -> list[Block]:
    """Partition records by geography; every record lands in exactly one block."""
    groups: dict[str, list[int]] = {}
    if isinstance(strategy, ByMeshblockPrefix):
        for r in dataset:
            groups.setdefault(r.meshblock[: strategy.prefix_len], []).append(r.row_id)
    elif isinstance(strategy, BySA3):
        for r in dataset:
            groups.setdefault(r.sa3, []).append(r.row_id)
    else:
        raise ValueError(f"unknown blocking strategy {strategy!r}")
    return [Block(key, tuple(rows)) for key, rows in sorted(groups.items())]


# ---------------------------------------------------------------------------
# Bi-gram matching within a block
# ---------------------------------------------------------------------------


class BigramBlockLinker:
    """Cross-compares queries against one block on HMAC'd name bi-grams.

    Each name field is reduced to the HMAC tags of its bi-grams once per
    block member; a query is compared against every member (the quadratic
    cost deterministic linking avoids), per-field similarities are averaged,
    and the best member at or above the threshold wins, ties going to the
    lowest row id. ``comparisons`` counts scored pairs.
    """

    def __init__(
        self,
        block: Block,
        records_by_id: Mapping[int, PersonRecord],
        key: HmacKey,
        scoring: str = BIGRAM_DICE,
        threshold: float = DEFAULT_BIGRAM_THRESHOLD,
        try_transposed: bool = False,
    ) -> None:
        if scoring not in (BIGRAM_DICE, BIGRAM_QGRAM):
            raise ValueError(f"unknown scoring {scoring!r}")
        self.block = block
        self.key = key
        self.scoring = scoring
        self.threshold = threshold
        self.try_transposed = try_transposed
        self.comparisons = 0
        self._members = [
            (row_id, self._encode(records_by_id[row_id].first_name),
             self._encode(records_by_id[row_id].last_name))
            for row_id in sorted(block.row_ids)
        ]

    def _encode(self, name: str):
        if self.scoring == BIGRAM_DICE:
            return frozenset(hmac_tag(self.key, g.encode()) for g in bigrams(name))
        counts = bigram_counts(name)
        return {hmac_tag(self.key, g.encode()): n for g, n in counts.items()}

    def _similarity(self, a, b) -> float:
        if self.scoring == BIGRAM_DICE:
            if not a and not b:
                return 0.0
            return 2.0 * len(a & b) / (len(a) + len(b))
        return qgram_similarity(a, b)

    def link(self, query: PersonRecord) -> MatchDecision:
        q_first = self._encode(query.first_name)
        q_last = self._encode(query.last_name)
        passes = [(q_first, q_last)]
        if self.try_transposed:
            passes.append((q_last, q_first))
        best_row: int | None = None
        best_score = -1.0
        for row_id, m_first, m_last in self._members:
            for p_first, p_last in passes:
                self.comparisons += 1
                score = (self._similarity(p_first, m_first) + self._similarity(p_last, m_last)) / 2.0
                if score > best_score:
                    best_score = score
                    best_row = row_id
        if best_row is None or best_score < self.threshold:
            return MatchDecision(query.row_id, None, self.scoring, score=max(best_score, 0.0))
        return MatchDecision(query.row_id, best_row, self.scoring, score=best_score)


def link_bigram(
    query: PersonRecord,
    block: Block,
    records_by_id: Mapping[int, PersonRecord],
    key: HmacKey,
    scoring: str = BIGRAM_DICE,
    threshold: float = DEFAULT_BIGRAM_THRESHOLD,
) -> MatchDecision:
    """One-shot form of :class:`BigramBlockLinker` for single queries."""
    return BigramBlockLinker(block, records_by_id, key, scoring, threshold).link(query)


def blocking_key_for(record: PersonRecord, strategy: BlockingStrategy) -> str:
    if isinstance(strategy, ByMeshblockPrefix):
        return record.meshblock[: strategy.prefix_len]
    if isinstance(strategy, BySA3):
        return record.sa3
    raise ValueError(f"unknown blocking strategy {strategy!r}")
