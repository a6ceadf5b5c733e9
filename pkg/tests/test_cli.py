from __future__ import annotations

import os

import pytest

from pprlkit.cli import main
from pprlkit.hashcore import HmacKey
from pprlkit.linkkeys import load_index
from pprlkit.model import load_dataset


def run(*argv):
    return main(list(argv))


def read(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    code = run(
        "generate", "--size", "400", "--seed", "5", "--out", str(out),
        "--distortions", "exact,changeGender",
    )
    assert code == 0
    return out


def test_generate_outputs(generated):
    dataset = load_dataset(str(generated / "original.csv"))
    assert len(dataset) == 400
    distorted = load_dataset(str(generated / "distorted_changeGender.csv"))
    assert distorted.row_ids() == dataset.row_ids()
    stats = read(str(generated / "distortion_stats.csv"))
    assert stats.startswith("# config_digest=")
    assert "changeGender,400,400,0" in stats


def test_generate_header_carries_seed_and_version(generated):
    header = read(str(generated / "distortion_stats.csv")).splitlines()[0]
    assert "seed=5" in header and "version=" in header


def test_derive_and_snapshot(generated, tmp_path):
    out = tmp_path / "derive"
    code = run(
        "derive", "--dataset", str(generated / "original.csv"),
        "--seed", "5", "--out", str(out), "--export-tags",
    )
    assert code == 0
    index = load_index(str(out / "index.snapshot"))
    assert index.indexed_records == 400
    uniq = read(str(out / "uniqueness.csv"))
    assert "ForenameSurnameYoBSex" in uniq
    tags = read(str(out / "tags_sensitive.csv"))
    assert tags.startswith("# sensitive")


def test_link_exact_copy_and_determinism(generated, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        code = run(
            "link", "--original", str(generated / "original.csv"),
            "--queries", str(generated / "distorted_exact.csv"),
            "--seed", "5", "--out", str(out), "--distortion", "exact",
            "--threads", "1",
        )
        assert code == 0
    eval_a = read(str(out_a / "evaluation.csv"))
    assert eval_a == read(str(out_b / "evaluation.csv"))
    assert "exact,first_unique,1.0000,1.0000,1.0000,400,0" in eval_a
    assert "exact,voting,1.0000,1.0000,1.0000,400,0" in eval_a
    assert read(str(out_a / "decisions_voting.csv")) == read(str(out_b / "decisions_voting.csv"))


def test_link_key_mismatch_diagnostic(generated, tmp_path, capsys):
    derive_out = tmp_path / "derive"
    assert run("derive", "--dataset", str(generated / "original.csv"),
               "--seed", "5", "--out", str(derive_out)) == 0
    key_path = tmp_path / "other.key"
    assert run("keygen", "--key-file", str(key_path), "--key-id", "other") == 0
    # snapshot built under the seed-derived key; queries tagged with a fresh
    # random key: zero tags can match and the CLI must say why
    out = tmp_path / "mismatch"
    code = run(
        "link", "--index", str(derive_out / "index.snapshot"),
        "--queries", str(generated / "distorted_exact.csv"),
        "--seed", "5", "--out", str(out), "--key-file", str(key_path),
    )
    assert code == 2
    assert "key mismatch suspected" in capsys.readouterr().err


def test_link_against_snapshot_with_matching_key(generated, tmp_path):
    derive_out = tmp_path / "derive"
    assert run("derive", "--dataset", str(generated / "original.csv"),
               "--seed", "5", "--out", str(derive_out)) == 0
    out = tmp_path / "linked"
    code = run(
        "link", "--index", str(derive_out / "index.snapshot"),
        "--queries", str(generated / "distorted_exact.csv"),
        "--seed", "5", "--out", str(out), "--distortion", "exact",
    )
    assert code == 0
    assert "exact,voting,1.0000,1.0000" in read(str(out / "evaluation.csv"))


def test_no_key_material_in_outputs(generated, tmp_path):
    out = tmp_path / "scan"
    code = run(
        "link", "--original", str(generated / "original.csv"),
        "--queries", str(generated / "distorted_exact.csv"),
        "--seed", "5", "--out", str(out), "--distortion", "exact",
    )
    assert code == 0
    key_hex = HmacKey.from_seed(5, "run").key_bytes.hex()
    for name in os.listdir(out):
        text = read(str(out / name))
        assert key_hex not in text
        assert key_hex[:16] not in text


def test_lossy_command(tmp_path, capsys):
    out = tmp_path / "lossy"
    assert run("lossy", "--seed", "3", "--out", str(out), "--buckets", "10,50") == 0
    printed = capsys.readouterr().out
    assert "'smith' bucket rank 1" in printed
    assert (out / "buckets_10_sensitive.csv").exists()
    assert (out / "bucket_analysis_50.csv").exists()


def test_envelope_command(tmp_path, capsys):
    out = tmp_path / "env"
    assert run("envelope", "--seed", "3", "--size", "150", "--out", str(out)) == 0
    printed = capsys.readouterr().out
    assert "precision=1.000 recall=1.000" in printed
    assert (out / "linkage_file.bin").exists()
    shares = read(str(out / "private_key_shares.txt"))
    assert len(shares.splitlines()) == 3


def test_perf_command(tmp_path):
    out = tmp_path / "perf"
    assert run("perf", "--seed", "3", "--out", str(out), "--sizes", "200,400") == 0
    lines = read(str(out / "perf.csv")).splitlines()
    assert lines[1] == "n_records,n_queries,wall_ms,qps,threads"
    assert len(lines) == 4


def test_bloom_command_smoke(tmp_path):
    out = tmp_path / "bloom"
    assert run("bloom", "--seed", "3", "--scale", "smoke", "--out", str(out)) == 0
    for name in ("uniformity_universal.csv", "uniformity_double.csv",
                 "overestimation.csv", "sweep_sizes.csv", "sweep_ks.csv"):
        assert (out / name).exists(), name
    sweep = read(str(out / "sweep_sizes.csv")).splitlines()
    assert len(sweep) == 2 + 10 * 2  # header lines + 10 sizes x 2 families


def test_attack_command_smoke(tmp_path, capsys):
    out = tmp_path / "attack"
    assert run("attack", "--seed", "3", "--scale", "smoke", "--out", str(out)) == 0
    printed = capsys.readouterr().out
    assert "attack: dictionary" in printed
    assert "rank1_correct: True" in printed
    assert (out / "attack_dictionary.csv").exists()
    assert (out / "attack_frequency.csv").exists()
    assert (out / "attack_bucket_chain.csv").exists()


def test_attack_command_redacts(tmp_path):
    out = tmp_path / "attack_redacted"
    assert run("attack", "--seed", "3", "--scale", "smoke", "--out", str(out),
               "--redact") == 0
    text = read(str(out / "attack_frequency.csv"))
    assert "smith" not in text


def test_config_file_defaults(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("seed=11\nsizes=150\n")
    out = tmp_path / "perf"
    assert run("perf", "--config", str(config), "--out", str(out)) == 0
    header = read(str(out / "perf.csv")).splitlines()[0]
    assert "seed=11" in header
    lines = read(str(out / "perf.csv")).splitlines()
    assert len(lines) == 3  # header + columns + one row


def test_unknown_distortion_label_fails(tmp_path):
    code = run("generate", "--size", "10", "--out", str(tmp_path / "x"),
               "--distortions", "teleportation")
    assert code == 2


def test_repro_smoke(tmp_path, capsys):
    out = tmp_path / "repro"
    assert run("repro", "--seed", "4", "--scale", "smoke", "--out", str(out)) == 0
    printed = capsys.readouterr().out
    assert "[repro] generate" in printed
    assert (out / "datasets" / "original.csv").exists()
    assert (out / "derive" / "uniqueness.csv").exists()
    assert (out / "link" / "exact" / "evaluation.csv").exists()
    assert (out / "bloom" / "sweep_ks.csv").exists()
    assert (out / "attack" / "attack_dictionary.csv").exists()
