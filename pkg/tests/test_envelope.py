from __future__ import annotations

import math
import random

import pytest

from pprlkit.envelope import (
    SHARE_PRIME,
    EnvelopeError,
    envelope_decrypt,
    envelope_encrypt,
    generate_keypair,
    pipeline_demo,
    read_linkage_file,
    read_shares_file,
    recombine,
    record_fields,
    record_from_fields,
    split_key,
    write_linkage_file,
    write_shares_file,
)
from pprlkit.hashcore import derive_rng
from pprlkit.model import PersonRecord
from pprlkit.synthgen import GeneratorConfig, generate


@pytest.fixture(scope="module")
def keypair():
    return generate_keypair(derive_rng(1, "kp"))


def test_round_trip(keypair):
    fields = [b"anna", b"", b"smith", b"1980"]
    blob = envelope_encrypt(keypair.public_key, fields, derive_rng(2, "e"))
    assert envelope_decrypt(keypair.private_key, blob) == fields


def test_empty_field_list_round_trips(keypair):
    blob = envelope_encrypt(keypair.public_key, [], derive_rng(2, "e"))
    assert envelope_decrypt(keypair.private_key, blob) == []


def test_two_encryptions_differ(keypair):
    rng = derive_rng(3, "e")
    first = envelope_encrypt(keypair.public_key, [b"anna"], rng)
    second = envelope_encrypt(keypair.public_key, [b"anna"], rng)
    assert first != second
    # and with OS randomness too
    assert envelope_encrypt(keypair.public_key, [b"anna"]) != envelope_encrypt(
        keypair.public_key, [b"anna"]
    )


def test_tampered_blob_rejected(keypair):
    blob = bytearray(envelope_encrypt(keypair.public_key, [b"anna"], derive_rng(4, "e")))
    blob[-1] ^= 0x01
    with pytest.raises(EnvelopeError):
        envelope_decrypt(keypair.private_key, bytes(blob))
    with pytest.raises(EnvelopeError):
        envelope_decrypt(keypair.private_key, b"short")


def test_wrong_key_rejected(keypair):
    other = generate_keypair(derive_rng(5, "kp2"))
    blob = envelope_encrypt(keypair.public_key, [b"anna"], derive_rng(6, "e"))
    with pytest.raises(EnvelopeError):
        envelope_decrypt(other.private_key, blob)


def test_keypair_repr_hides_private_half(keypair):
    assert keypair.private_key.hex() not in repr(keypair)


# ---------------------------------------------------------------------------
# Secret sharing
# ---------------------------------------------------------------------------


def _lagrange_zero_oracle(points: list[tuple[int, int]]) -> int:
    """Independent Lagrange interpolation at x=0 over the share field."""
    total = 0
    for i, (x_i, y_i) in enumerate(points):
        term = y_i
        for j, (x_j, _) in enumerate(points):
            if i == j:
                continue
            term = term * (-x_j) * pow(x_i - x_j, -1, SHARE_PRIME) % SHARE_PRIME
        total = (total + term) % SHARE_PRIME
    return total


def test_single_share_trivial_wrap():
    secret = bytes(range(32))
    shares = split_key(secret, 1, 1, derive_rng(7, "s"))
    assert recombine(shares.shares) == secret
    # threshold 1: the share value IS the secret, limb by limb
    _, raw = shares.shares[0]
    assert int.from_bytes(raw[3:35], "big") == int.from_bytes(secret[:31], "big")


def test_two_of_three_matches_lagrange_oracle():
    secret = bytes(range(32))
    shares = split_key(secret, 2, 3, derive_rng(8, "s"))
    subset = [shares.shares[0], shares.shares[2]]  # indices 1 and 3
    assert recombine(subset) == secret
    # oracle check on the first limb
    points = [(x, int.from_bytes(raw[3:35], "big")) for x, raw in subset]
    first_limb = _lagrange_zero_oracle(points)
    assert first_limb == int.from_bytes(secret[:31], "big")


def test_below_threshold_fails():
    secret = bytes(range(32))
    shares = split_key(secret, 2, 3, derive_rng(9, "s"))
    with pytest.raises(EnvelopeError, match="insufficient"):
        recombine([shares.shares[0]])
    with pytest.raises(EnvelopeError):
        recombine([])


def test_share_round_trips_all_small_schemes():
    rng = derive_rng(10, "s")
    cases = 0
    for total in range(1, 6):
        for threshold in range(1, total + 1):
            for _ in range(40):
                secret = rng.randbytes(32)
                shares = split_key(secret, threshold, total, rng)
                subset = rng.sample(list(shares.shares), threshold)
                assert recombine(subset) == secret
                assert recombine(list(shares.shares)) == secret
                cases += 1
    assert cases == 15 * 40


def test_share_parameter_validation():
    with pytest.raises(EnvelopeError):
        split_key(b"x" * 32, 3, 2)
    with pytest.raises(EnvelopeError):
        split_key(b"x" * 32, 0, 2)
    with pytest.raises(EnvelopeError):
        split_key(b"", 1, 1)


def test_conflicting_and_inconsistent_shares_rejected():
    secret = bytes(32)
    shares = split_key(secret, 2, 3, derive_rng(11, "s"))
    index, raw = shares.shares[0]
    with pytest.raises(EnvelopeError, match="conflicting"):
        recombine([(index, raw), (index, raw[:-1] + b"\x00"), shares.shares[1]])
    other = split_key(b"\xff" * 16, 2, 3, derive_rng(12, "s"))
    with pytest.raises(EnvelopeError, match="disagree"):
        recombine([shares.shares[0], other.shares[1]])


def test_share_values_look_uniform():
    # Distribution check at desk scale: first byte of the first limb over
    # many splits of one fixed secret behaves like uniform bytes
    # (chi-squared over 256 cells, dof=255).
    rng = derive_rng(13, "s")
    secret = bytes(range(32))
    counts = [0] * 256
    n = 4096
    for _ in range(n):
        shares = split_key(secret, 2, 2, rng)
        counts[shares.shares[0][1][3]] += 1
    expected = n / 256
    chi2 = sum((c - expected) ** 2 / expected for c in counts)
    assert chi2 < 255 + 5 * math.sqrt(2 * 255)


def test_shares_file_round_trip(tmp_path):
    shares = split_key(bytes(range(32)), 2, 3, derive_rng(14, "s"))
    path = tmp_path / "shares.txt"
    write_shares_file(shares, str(path))
    loaded = read_shares_file(str(path))
    assert loaded == list(shares.shares)
    assert recombine(loaded[:2]) == bytes(range(32))
    path.write_text("1:zz\n")
    with pytest.raises(EnvelopeError):
        read_shares_file(str(path))


# ---------------------------------------------------------------------------
# Linkage file and record payloads
# ---------------------------------------------------------------------------


def test_linkage_file_round_trip():
    blobs = [b"alpha", b"", b"gamma" * 100]
    data = write_linkage_file(blobs)
    assert read_linkage_file(data) == blobs
    with pytest.raises(EnvelopeError):
        read_linkage_file(b"BADMAGIC" + data)
    with pytest.raises(EnvelopeError):
        read_linkage_file(data[:-3])


def test_record_fields_round_trip():
    record = PersonRecord(5, "anna", None, "smith", 1980, "F", "20660940000", "206")
    assert record_from_fields(5, record_fields(record)) == record
    with_middle = PersonRecord(6, "bob", "j", "jones", 1955, "M", "10100000000", "101")
    assert record_from_fields(6, record_fields(with_middle)) == with_middle
    with pytest.raises(EnvelopeError):
        record_from_fields(1, [b"too", b"few"])


# ---------------------------------------------------------------------------
# Pipeline demonstration
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def pipeline_result(tiny_tables, keypair):
    surnames, first_names, meshblocks = tiny_tables
    dataset = generate(
        GeneratorConfig(
            population_size=250, seed=31,
            last_name_table=surnames, first_name_tables=first_names,
            meshblock_table=meshblocks,
        )
    )
    return dataset, pipeline_demo(dataset, keypair, seed=77)


def test_pipeline_links_perfectly(pipeline_result):
    _, result = pipeline_result
    assert result.eval_result.precision == 1.0
    assert result.eval_result.recall == 1.0


def test_pipeline_output_shuffled_but_reproducible(pipeline_result, tiny_tables, keypair):
    dataset, result = pipeline_result
    decision_order = [d.query_row_id for d in result.decisions]
    output_order = [row_id for row_id, _ in result.output_rows]
    assert sorted(decision_order) == sorted(output_order)
    assert decision_order != output_order
    again = pipeline_demo(dataset, keypair, seed=77)
    assert again.output_rows == result.output_rows
    assert again.analysis_handles == result.analysis_handles


def test_pipeline_file_contains_no_plaintext_names(pipeline_result):
    dataset, result = pipeline_result
    blob = result.encrypted_file
    seen = set()
    for record in dataset:
        for name in (record.first_name, record.last_name):
            if len(name) >= 4 and name not in seen:
                seen.add(name)
                assert name.encode() not in blob
