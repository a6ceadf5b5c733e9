"""Bundled stand-in frequency distributions and synthetic name pools.

Real name and geography frequency lists are not redistributable, so the
package ships deterministic synthetic substitutes with the statistical
shape the experiments need: a Zipf surname table with "smith" dominant,
per-(year, sex) first-name tables with partial cross-sex name sharing, and
a population-weighted meshblock table whose codes embed their SA3 prefix.

Builders are pure functions of fixed seeds. The CSV copies under
``pprlkit/data/`` are generated from these builders and verified against
them in the test suite; either form can be used.
"""

from __future__ import annotations

from importlib import resources

from .hashcore import derive_rng
from .model import FrequencyTable, load_first_name_tables, load_frequency_table

# Fixed seeds: the bundled tables are constants, not per-run artifacts.
_SURNAME_SEED = 0x5EED_5ABB
_FIRSTNAME_SEED = 0x5EED_F1A5
_MESHBLOCK_SEED = 0x5EED_3E0C
_POOL_SEED = 0x5EED_D1C7

SURNAME_TABLE_SIZE = 5000
SMITH_WEIGHT_PPM = 50_000  # 5.0% of total surname mass
SURNAME_ZIPF_S = 0.5

FIRST_NAMES_PER_TABLE = 60
FIRST_NAME_ZIPF_S = 1.15
BUNDLED_YOBS = tuple(range(1916, 2017, 5))
# Ranks (1-based) that hold names shared by both sexes within a year. The
# shared mass is what lets a sex-flipped record collide with a real record
# of the opposite sex, which drives the gender-swap precision drop.
UNISEX_RANKS = (1,) + tuple(range(5, 22))

MESHBLOCK_COUNT = 40_000
SA3_CODES = tuple(str(code) for code in range(101, 451))  # 350 areas

_VOWELS = ("a", "e", "i", "o", "u", "ai", "ee", "ie", "oo", "ou", "ea", "ay")
_ONSETS = (
    "b", "br", "c", "ch", "cl", "cr", "d", "dr", "f", "fl", "fr", "g", "gr",
    "h", "j", "k", "l", "m", "mc", "n", "p", "pr", "r", "s", "sh", "sl",
    "st", "t", "th", "tr", "v", "w", "wh", "z",
)
_CODAS = (
    "", "", "b", "ck", "d", "g", "l", "ll", "m", "n", "nd", "ng", "nn",
    "r", "rd", "rn", "rt", "s", "ss", "t", "tt", "x",
)
_FEMALE_ENDINGS = ("a", "ia", "ina", "elle", "ette", "ey", "ie", "y", "ara", "ine")
_MALE_ENDINGS = ("", "o", "er", "an", "en", "on", "us", "in", "ard", "ton")


def _syllable(rng) -> str:
    return rng.choice(_ONSETS) + rng.choice(_VOWELS) + rng.choice(_CODAS)


def _surname(rng) -> str:
    # Length mix tuned so padded names average about nine bi-grams, matching
    # ordinary surname lists.
    n_syllables = rng.choices((1, 2, 3, 4), weights=(20, 58, 19, 3))[0]
    if n_syllables == 1:
        return rng.choice(_ONSETS) + rng.choice(_VOWELS) + rng.choice(_CODAS[2:])
    return "".join(_syllable(rng) for _ in range(n_syllables))


def surname_pool(n: int, seed: int = _POOL_SEED) -> list[str]:
    """``n`` distinct plausible lowercase surnames, reproducible from seed.

    Used for the dictionary-attack corpus and the Bloom comparison samples.
    """
    rng = derive_rng(seed, "surname-pool")
    seen: set[str] = set()
    pool: list[str] = []
    while len(pool) < n:
        name = _surname(rng)
        if 3 <= len(name) <= 14 and name not in seen:
            seen.add(name)
            pool.append(name)
    return pool


def _zipf_weights(n: int, s: float, scale: int = 1_000_000) -> list[int]:
    raw = [i ** -s for i in range(1, n + 1)]
    total = sum(raw)
    return [max(1, round(scale * w / total)) for w in raw]


def build_surname_table(
    n_names: int = SURNAME_TABLE_SIZE,
    smith_ppm: int = SMITH_WEIGHT_PPM,
    zipf_s: float = SURNAME_ZIPF_S,
) -> FrequencyTable:
    """Zipf-weighted surname table with "smith" holding the dominant mass."""
    tail_names = [name for name in surname_pool(n_names + 1, _SURNAME_SEED) if name != "smith"]
    tail_names = tail_names[: n_names - 1]
    tail_weights = _zipf_weights(n_names - 1, zipf_s, scale=1_000_000 - smith_ppm)
    pairs = [("smith", smith_ppm)]
    pairs.extend(zip(tail_names, tail_weights))
    return FrequencyTable.from_pairs(pairs)


def _first_name(rng, sex: str) -> str:
    stem = rng.choice(_ONSETS) + rng.choice(_VOWELS)
    if rng.random() < 0.55:
        stem += rng.choice(("l", "m", "n", "r", "s", "t", "v", "d")) + rng.choice(_VOWELS)
    ending = rng.choice(_FEMALE_ENDINGS if sex == "F" else _MALE_ENDINGS)
    name = stem + ending
    return name


def _unisex_name(rng) -> str:
    return rng.choice(_ONSETS) + rng.choice(_VOWELS) + rng.choice(
        ("l", "m", "n", "r", "s")
    ) + rng.choice(("ey", "ie", "an", "in", "o", "y"))


def _name_pool(rng, sex: str, n: int) -> list[str]:
    seen: set[str] = set()
    pool: list[str] = []
    while len(pool) < n:
        name = _unisex_name(rng) if sex == "U" else _first_name(rng, sex)
        if 3 <= len(name) <= 12 and name not in seen:
            seen.add(name)
            pool.append(name)
    return pool


def build_first_name_tables(
    yobs: tuple[int, ...] = BUNDLED_YOBS,
    names_per_table: int = FIRST_NAMES_PER_TABLE,
    zipf_s: float = FIRST_NAME_ZIPF_S,
) -> dict[tuple[int, str], FrequencyTable]:
    """Per-(yob, sex) first-name tables with slow drift across years.

    Each year's list takes a sliding window over a master pool per sex, so
    adjacent years share most names while distant years differ, and the
    ranks in ``UNISEX_RANKS`` hold names common to both sexes of that year.
    """
    rng = derive_rng(_FIRSTNAME_SEED, "pools")
    n_sexed = names_per_table - len(UNISEX_RANKS)
    step = 10
    pool_len = n_sexed + step * (len(yobs) - 1)
    unisex_step = 4
    unisex_len = len(UNISEX_RANKS) + unisex_step * (len(yobs) - 1)
    pools = {
        "F": _name_pool(rng, "F", pool_len),
        "M": _name_pool(rng, "M", pool_len),
        "U": _name_pool(rng, "U", unisex_len),
    }
    weights = _zipf_weights(names_per_table, zipf_s)
    unisex_rank_set = set(UNISEX_RANKS)
    tables: dict[tuple[int, str], FrequencyTable] = {}
    for t, yob in enumerate(yobs):
        shared = pools["U"][t * unisex_step : t * unisex_step + len(UNISEX_RANKS)]
        for sex in ("M", "F"):
            window = pools[sex][t * step : t * step + n_sexed]
            order_rng = derive_rng(_FIRSTNAME_SEED, "order", yob, sex)
            window = window[:]
            order_rng.shuffle(window)
            shared_iter = iter(shared)
            sexed_iter = iter(window)
            names = [
                next(shared_iter) if rank in unisex_rank_set else next(sexed_iter)
                for rank in range(1, names_per_table + 1)
            ]
            tables[(yob, sex)] = FrequencyTable.from_pairs(zip(names, weights))
    return tables


def build_meshblock_table(
    n_meshblocks: int = MESHBLOCK_COUNT,
    sa3_codes: tuple[str, ...] = SA3_CODES,
) -> FrequencyTable:
    """Population-weighted meshblock codes; the SA3 is the leading 3 digits."""
    rng = derive_rng(_MESHBLOCK_SEED, "meshblocks")
    pairs = []
    seen: set[str] = set()
    while len(pairs) < n_meshblocks:
        code = rng.choice(sa3_codes) + "".join(str(rng.randrange(10)) for _ in range(8))
        if code in seen:
            continue
        seen.add(code)
        pairs.append((code, rng.randint(30, 130)))
    pairs.sort()
    return FrequencyTable.from_pairs(pairs)


# ---------------------------------------------------------------------------
# Bundled CSV copies
# ---------------------------------------------------------------------------


def _data_path(filename: str):
    return resources.files("pprlkit").joinpath("data", filename)


def bundled_surnames() -> FrequencyTable:
    with resources.as_file(_data_path("surnames.csv")) as path:
        return load_frequency_table(str(path))


def bundled_first_names() -> dict[tuple[int, str], FrequencyTable]:
    with resources.as_file(_data_path("first_names.csv")) as path:
        return load_first_name_tables(str(path))


def bundled_meshblocks() -> FrequencyTable:
    with resources.as_file(_data_path("meshblocks.csv")) as path:
        return load_frequency_table(str(path))
