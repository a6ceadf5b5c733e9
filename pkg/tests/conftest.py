from __future__ import annotations

import pytest

from pprlkit import tables
from pprlkit.model import FrequencyTable


@pytest.fixture(scope="session")
def bundled_surnames():
    return tables.bundled_surnames()


@pytest.fixture(scope="session")
def bundled_first_names():
    return tables.bundled_first_names()


@pytest.fixture(scope="session")
def bundled_meshblocks():
    return tables.bundled_meshblocks()


@pytest.fixture(scope="session")
def tiny_tables():
    """Small hand-built tables for fast generator tests."""
    surnames = FrequencyTable.from_pairs(
        [("smith", 40), ("jones", 25), ("brown", 20), ("wilson", 15)]
    )
    first_names = {
        (1950, "M"): FrequencyTable.from_pairs([("david", 5), ("peter", 3), ("colin", 2)]),
        (1950, "F"): FrequencyTable.from_pairs([("susan", 5), ("karen", 3), ("moira", 2)]),
        (1990, "M"): FrequencyTable.from_pairs([("jacob", 5), ("liam", 3), ("noah", 2)]),
        (1990, "F"): FrequencyTable.from_pairs([("emily", 5), ("chloe", 3), ("paige", 2)]),
    }
    meshblocks = FrequencyTable.from_pairs(
        [(f"{sa3}{suffix:08d}", 10) for sa3 in (101, 102, 205) for suffix in range(40)]
    )
    return surnames, first_names, meshblocks
