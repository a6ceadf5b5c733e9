"""Synthetic population generation, distortion, and shuffling.

The generator draws each record's attributes from configured frequency
tables: surnames proportional to their table mass, first names from the
(year-of-birth, sex) table with nearest-year fallback, the middle initial
from the table twenty years earlier, and meshblocks from the population
distribution. Distorted duplicate datasets perturb one attribute per record
(gender swap, letter transposition, meshblock redraw, and so on) while
preserving the row_id set exactly, so row_id equality is ground truth for
linkage evaluation.

Every operation is a pure function of (inputs, seed); each (dataset,
distortion) pair gets its own labelled RNG stream.
"""

from __future__ import annotations

import bisect
import string
from dataclasses import dataclass, field
from enum import Enum
from random import Random

from .hashcore import derive_rng
from .model import DataError, Dataset, FrequencyTable, PersonRecord, sa3_from_meshblock

DEFAULT_YOB_RANGE = (1916, 2016)
DEFAULT_MIDDLE_OFFSET = 20
DEFAULT_MIDDLE_RATE = 0.9


class ConfigError(ValueError):
    """Raised for unusable generator configuration."""


@dataclass(frozen=True)
class GeneratorConfig:
    population_size: int
    seed: int
    last_name_table: FrequencyTable
    first_name_tables: dict[tuple[int, str], FrequencyTable]
    meshblock_table: FrequencyTable
    yob_range: tuple[int, int] = DEFAULT_YOB_RANGE
    middle_name_yob_offset: int = DEFAULT_MIDDLE_OFFSET
    middle_initial_rate: float = DEFAULT_MIDDLE_RATE
    sa3_digits: int = 3

    def validate(self) -> "GeneratorConfig":
        if self.population_size < 0:
            raise ConfigError("population_size must be non-negative")
        if not self.last_name_table.entries or self.last_name_table.total <= 0:
            raise ConfigError("last_name_table is empty")
        if not self.first_name_tables:
            raise ConfigError("no first-name tables configured")
        for key, table in self.first_name_tables.items():
            if not table.entries or table.total <= 0:
                raise ConfigError(f"first-name table {key} is empty")
        if not self.meshblock_table.entries or self.meshblock_table.total <= 0:
            raise ConfigError("meshblock_table is empty")
        lo, hi = self.yob_range
        if lo > hi:
            raise ConfigError(f"degenerate yob_range {self.yob_range}")
        if not 0.0 <= self.middle_initial_rate <= 1.0:
            raise ConfigError("middle_initial_rate must be in [0, 1]")
        return self


class DistortionKind(Enum):
    """The supported single-attribute distortions; values are report labels."""

    EXACT = "exact"
    CHANGE_GENDER = "changeGender"
    CHANGE_MIDDLE_INITIAL = "changeInitial"
    CHANGE_YOB = "changeYOB"
    FIRST_LAST_TRANSPOSE = "firstLastTranspose"
    MESHBLOCK_CHANGE = "meshblockChange"
    REMOVE_ADD_MIDDLE_INITIAL = "removeAddInitial"
    LAST_NAME_2LETTER_TRANSPOSE = "lastName2LetterTranspose"
    FIRST_NAME_2LETTER_TRANSPOSE = "firstName2LetterTranspose"


#: The eight distortions evaluated by the linkage benchmark tables.
BENCHMARK_DISTORTIONS = (
    DistortionKind.CHANGE_MIDDLE_INITIAL,
    DistortionKind.FIRST_LAST_TRANSPOSE,
    DistortionKind.EXACT,
    DistortionKind.LAST_NAME_2LETTER_TRANSPOSE,
    DistortionKind.REMOVE_ADD_MIDDLE_INITIAL,
    DistortionKind.FIRST_NAME_2LETTER_TRANSPOSE,
    DistortionKind.MESHBLOCK_CHANGE,
    DistortionKind.CHANGE_GENDER,
)


@dataclass(frozen=True)
class DistortionSpec:
    kind: DistortionKind
    probability: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ConfigError(f"probability {self.probability} outside [0, 1]")


@dataclass
class DistortionStats:
    """Bookkeeping for one distortion pass."""

    kind: DistortionKind
    selected: int = 0
    changed: int = 0
    skipped_short_name: int = 0
    extra: dict = field(default_factory=dict)


def _draw(table: FrequencyTable, rng: Random, _cache={}) -> str:
    # Keyed by id with an identity check; bounded so throwaway tables in
    # long-lived processes cannot accumulate.
    key = id(table)
    cached = _cache.get(key)
    if cached is None or cached[0] is not table:
        values = [v for v, _ in table.entries]
        cum: list[int] = []
        running = 0
        for _, c in table.entries:
            running += c
            cum.append(running)
        cached = (table, values, cum, running)
        if len(_cache) > 512:
            _cache.clear()
        _cache[key] = cached
    _, values, cum, running = cached
    return values[bisect.bisect_right(cum, int(rng.random() * running))]


def _nearest_table(
    tables: dict[tuple[int, str], FrequencyTable], yob: int, sex: str
) -> FrequencyTable:
    # Fall back to the closest available year for the sex, mirroring how
    # sparse public birth-name releases are applied.
    exact = tables.get((yob, sex))
    if exact is not None:
        return exact
    candidates = [y for (y, s) in tables if s == sex]
    if not candidates:
        raise ConfigError(f"no first-name tables for sex {sex!r}")
    nearest = min(candidates, key=lambda y: (abs(y - yob), y))
    return tables[(nearest, sex)]


def generate(config: GeneratorConfig) -> Dataset:
    """Generate the synthetic population; reproducible from config.seed."""
    config.validate()
    rng = derive_rng(config.seed, "generate")
    lo, hi = config.yob_range
    records = []
    for row_id in range(config.population_size):
        sex = "M" if rng.random() < 0.5 else "F"
        yob = rng.randint(lo, hi)
        first = _draw(_nearest_table(config.first_name_tables, yob, sex), rng)
        middle = None
        if rng.random() < config.middle_initial_rate:
            middle_name = _draw(
                _nearest_table(
                    config.first_name_tables, yob - config.middle_name_yob_offset, sex
                ),
                rng,
            )
            middle = middle_name[0]
        last = _draw(config.last_name_table, rng)
        meshblock = _draw(config.meshblock_table, rng)
        records.append(
            PersonRecord(
                row_id=row_id,
                first_name=first,
                middle_initial=middle,
                last_name=last,
                yob=yob,
                sex=sex,
                meshblock=meshblock,
                sa3=sa3_from_meshblock(meshblock, config.sa3_digits),
            )
        )
    return Dataset(tuple(records), provenance="original")


# ---------------------------------------------------------------------------
# Distortions
# ---------------------------------------------------------------------------


def _transpose_inner(name: str, rng: Random) -> str | None:
    """Swap one adjacent inner-letter pair, never touching the first or last
    character. Returns None when no swap can change the name (too short, or
    all candidate pairs are equal letters)."""
    if len(name) < 4:
        return None
    candidates = [i for i in range(1, len(name) - 2) if name[i] != name[i + 1]]
    if not candidates:
        return None
    i = rng.choice(candidates)
    return name[:i] + name[i + 1] + name[i] + name[i + 2 :]


def _distort_record(
    record: PersonRecord,
    kind: DistortionKind,
    rng: Random,
    stats: DistortionStats,
    meshblock_table: FrequencyTable | None,
    yob_range: tuple[int, int],
    sa3_digits: int,
) -> PersonRecord:
    letters = string.ascii_lowercase
    if kind is DistortionKind.EXACT:
        return record
    if kind is DistortionKind.CHANGE_GENDER:
        return record.with_fields(sex="F" if record.sex == "M" else "M")
    if kind is DistortionKind.CHANGE_MIDDLE_INITIAL:
        if record.middle_initial is None:
            # Unstated case: adding one unifies with remove/add semantics.
            return record.with_fields(middle_initial=rng.choice(letters))
        others = letters.replace(record.middle_initial, "")
        return record.with_fields(middle_initial=rng.choice(others))
    if kind is DistortionKind.CHANGE_YOB:
        lo, hi = yob_range
        return record.with_fields(yob=rng.randint(lo, hi))
    if kind is DistortionKind.FIRST_LAST_TRANSPOSE:
        return record.with_fields(first_name=record.last_name, last_name=record.first_name)
    if kind is DistortionKind.MESHBLOCK_CHANGE:
        if meshblock_table is None:
            raise ConfigError("meshblock distortion requires the generation meshblock table")
        meshblock = _draw(meshblock_table, rng)
        return record.with_fields(meshblock=meshblock, sa3=sa3_from_meshblock(meshblock, sa3_digits))
    if kind is DistortionKind.REMOVE_ADD_MIDDLE_INITIAL:
        if record.middle_initial is None:
            return record.with_fields(middle_initial=rng.choice(letters))
        return record.with_fields(middle_initial=None)
    if kind is DistortionKind.LAST_NAME_2LETTER_TRANSPOSE:
        swapped = _transpose_inner(record.last_name, rng)
        if swapped is None:
            stats.skipped_short_name += 1
            return record
        return record.with_fields(last_name=swapped)
    if kind is DistortionKind.FIRST_NAME_2LETTER_TRANSPOSE:
        swapped = _transpose_inner(record.first_name, rng)
        if swapped is None:
            stats.skipped_short_name += 1
            return record
        return record.with_fields(first_name=swapped)
    raise ConfigError(f"unknown distortion kind {kind!r}")


def distort_with_stats(
    dataset: Dataset,
    spec: DistortionSpec,
    seed: int,
    meshblock_table: FrequencyTable | None = None,
    yob_range: tuple[int, int] = DEFAULT_YOB_RANGE,
    sa3_digits: int = 3,
) -> tuple[Dataset, DistortionStats]:
    """Apply ``spec`` to each record independently with its probability.

    Row ids are preserved; no records are inserted or deleted.
    """
    if len(dataset) == 0:
        raise DataError("cannot distort an empty dataset")
    rng = derive_rng(seed, "distort", dataset.provenance, spec.kind.value)
    stats = DistortionStats(kind=spec.kind)
    out = []
    for record in dataset:
        if spec.probability >= 1.0 or rng.random() < spec.probability:
            stats.selected += 1
            new = _distort_record(
                record, spec.kind, rng, stats, meshblock_table, yob_range, sa3_digits
            )
            if new is not record:
                stats.changed += 1
            out.append(new)
        else:
            out.append(record)
    return Dataset(tuple(out), provenance=f"distorted:{spec.kind.value}"), stats


def distort(
    dataset: Dataset,
    spec: DistortionSpec,
    seed: int,
    meshblock_table: FrequencyTable | None = None,
    yob_range: tuple[int, int] = DEFAULT_YOB_RANGE,
    sa3_digits: int = 3,
) -> Dataset:
    distorted, _ = distort_with_stats(
        dataset, spec, seed, meshblock_table, yob_range, sa3_digits
    )
    return distorted


def shuffle(dataset: Dataset, seed: int) -> Dataset:
    """Permute record order reproducibly; the record multiset is unchanged."""
    rng = derive_rng(seed, "shuffle")
    records = list(dataset.records)
    rng.shuffle(records)
    return Dataset(tuple(records), provenance=dataset.provenance)
