from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pprlkit import model
from pprlkit.model import (
    DataError,
    Dataset,
    FrequencyTable,
    PersonRecord,
    dumps_dataset,
    encode_fields,
    loads_dataset,
    sa3_from_meshblock,
)

HEADER = "row_id,first_name,middle_initial,last_name,yob,sex,meshblock,sa3\n"


def make_record(**overrides) -> PersonRecord:
    base = dict(
        row_id=1,
        first_name="anna",
        middle_initial="b",
        last_name="smith",
        yob=1980,
        sex="F",
        meshblock="20660940000",
        sa3="206",
    )
    base.update(overrides)
    return PersonRecord(**base)


def test_load_empty_file_with_header():
    assert len(loads_dataset(HEADER)) == 0


def test_load_single_row_field_mapping():
    dataset = loads_dataset(HEADER + "1,anna,b,smith,1980,F,20660940000,206\n")
    assert dataset.records[0] == make_record()


def test_load_absent_middle_initial():
    dataset = loads_dataset(HEADER + "1,anna,,smith,1980,F,20660940000,206\n")
    assert dataset.records[0].middle_initial is None


def test_duplicate_row_id_rejected():
    text = HEADER + "7,anna,,smith,1980,F,20660940000,206\n7,bob,,jones,1981,M,20660940000,206\n"
    with pytest.raises(DataError, match="line 3.*duplicate row_id 7"):
        loads_dataset(text)


def test_malformed_row_names_line_and_field():
    with pytest.raises(DataError, match="line 2.*yob"):
        loads_dataset(HEADER + "1,anna,b,smith,notayear,F,20660940000,206\n")
    with pytest.raises(DataError, match="line 2.*row_id"):
        loads_dataset(HEADER + "x,anna,b,smith,1980,F,20660940000,206\n")
    with pytest.raises(DataError, match="line 2.*8 fields"):
        loads_dataset(HEADER + "1,anna,b\n")


def test_bad_header_rejected():
    with pytest.raises(DataError, match="line 1"):
        loads_dataset("a,b,c\n1,2,3\n")
    with pytest.raises(DataError, match="line 1"):
        loads_dataset("")


def test_round_trip_byte_identical(tmp_path):
    text = (
        HEADER
        + "0,anna,b,smith,1980,F,20660940000,206\n"
        + "1,bob,,jones,1955,M,10112345678,101\n"
    )
    path = tmp_path / "ds.csv"
    path.write_text(text, encoding="utf-8")
    dataset = model.load_dataset(str(path))
    assert dumps_dataset(dataset) == text
    out = tmp_path / "copy.csv"
    model.write_dataset(dataset, str(out))
    assert out.read_text(encoding="utf-8") == text


def test_record_validation_errors():
    with pytest.raises(DataError, match="first_name"):
        make_record(first_name="Anna").validate()
    with pytest.raises(DataError, match="yob"):
        make_record(yob=1890).validate()
    with pytest.raises(DataError, match="sex"):
        make_record(sex="X").validate()
    with pytest.raises(DataError, match="middle_initial"):
        make_record(middle_initial="bb").validate()
    with pytest.raises(DataError, match="sa3"):
        make_record(sa3="999").validate()
    make_record().validate()


def test_dataset_rejects_duplicate_ids_on_construction():
    with pytest.raises(DataError):
        Dataset.from_records([make_record(), make_record()])


# ---------------------------------------------------------------------------
# Canonical encoding
# ---------------------------------------------------------------------------


def test_encode_fields_example():
    assert encode_fields(("anna", "smith", "1980", "F")) == b"anna\x1fsmith\x1f1980\x1fF"


def test_encode_fields_deterministic():
    values = ("anna", "smith", "1980", "F")
    assert encode_fields(values) == encode_fields(values)


def test_encode_fields_separator_gives_injectivity():
    assert encode_fields(("ab", "c")) != encode_fields(("a", "bc"))


def test_encode_fields_rejects_separator_in_value():
    with pytest.raises(DataError):
        encode_fields(("an\x1fna",))


@given(
    st.integers(min_value=1, max_value=5).flatmap(
        lambda n: st.tuples(
            st.lists(st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", max_size=8),
                     min_size=n, max_size=n),
            st.lists(st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", max_size=8),
                     min_size=n, max_size=n),
        )
    )
)
def test_encode_fields_injective_per_arity(pair):
    a, b = pair
    if encode_fields(a) == encode_fields(b):
        assert list(a) == list(b)


def test_encode_fields_rejects_empty_list():
    with pytest.raises(DataError):
        encode_fields(())


def test_sa3_derivation_deterministic():
    assert sa3_from_meshblock("20660940000") == "206"
    assert sa3_from_meshblock("20660940000") == sa3_from_meshblock("20661111111")
    assert sa3_from_meshblock("20660940000", digits=4) == "2066"
    with pytest.raises(DataError):
        sa3_from_meshblock("20")


# ---------------------------------------------------------------------------
# Frequency tables
# ---------------------------------------------------------------------------


def test_frequency_table_invariants():
    table = FrequencyTable.from_pairs([("a", 2), ("b", 3)])
    assert table.total == 5
    assert table.mass("a") == 0.4
    with pytest.raises(DataError):
        FrequencyTable.from_pairs([("a", 1), ("a", 2)])
    with pytest.raises(DataError):
        FrequencyTable.from_pairs([("a", -1)])


def test_frequency_table_sampler_respects_support():
    table = FrequencyTable.from_pairs([("only", 10)])
    draw = table.sampler()
    import random

    rng = random.Random(0)
    assert {draw(rng) for _ in range(50)} == {"only"}
    with pytest.raises(DataError):
        FrequencyTable.from_pairs([("a", 0)]).sampler()


def test_frequency_table_csv_round_trip(tmp_path):
    table = FrequencyTable.from_pairs([("smith", 3), ("jones", 1)])
    path = tmp_path / "freq.csv"
    model.write_frequency_table(table, str(path))
    assert model.load_frequency_table(str(path)) == table
    path.write_text("wrong,header\n")
    with pytest.raises(DataError):
        model.load_frequency_table(str(path))


def test_first_name_tables_csv_round_trip(tmp_path):
    tables = {
        (1950, "M"): FrequencyTable.from_pairs([("david", 2)]),
        (1955, "F"): FrequencyTable.from_pairs([("susan", 3), ("moira", 1)]),
    }
    path = tmp_path / "fn.csv"
    model.write_first_name_tables(tables, str(path))
    assert model.load_first_name_tables(str(path)) == tables
