"""Command-line entry point for reproducible experiment runs.

One subcommand per experiment family (generate, derive, link, bloom,
attack, lossy, envelope, perf) plus ``repro``, which chains
generate -> derive -> link -> bloom -> attack at the desk scale preset.

Every run flows all randomness from one master seed through labelled
derivation, and every output CSV starts with a comment line carrying the
config digest, the seed, and the tool version, so identical (config, seed)
runs produce byte-identical files. No key material is ever written to a
report; keys live only in explicit key files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
from dataclasses import dataclass

from . import __version__
from . import attacks as attacks_mod
from . import bloom as bloom_mod
from . import envelope as envelope_mod
from . import evalbench, linkkeys, lossy, synthgen, tables
from .hashcore import HmacKey, derive_rng, derive_seed, hmac_tag, read_key_file, write_key_file
from .linker import FIRST_UNIQUE, VOTING, link_dataset
from .model import (
    Dataset,
    load_dataset,
    load_first_name_tables,
    load_frequency_table,
    write_dataset,
)

BUNDLED = "bundled"


@dataclass(frozen=True)
class ScalePreset:
    name: str
    population: int
    overestimation_sample: int
    sweep_sample: int
    uniformity_filters: int
    dictionary_size: int
    dictionary_targets: int
    frequency_draws: int


SMOKE = ScalePreset(
    name="smoke",
    population=800,
    overestimation_sample=250,
    sweep_sample=150,
    uniformity_filters=4_000,
    dictionary_size=20_000,
    dictionary_targets=100,
    frequency_draws=5_000,
)

DESK = ScalePreset(
    name="desk",
    population=20_000,
    overestimation_sample=2_000,
    sweep_sample=1_000,
    uniformity_filters=100_000,
    dictionary_size=400_000,
    dictionary_targets=1_000,
    frequency_draws=100_000,
)

PAPER = ScalePreset(
    name="paper",
    population=2_900_000,
    overestimation_sample=384_370,
    sweep_sample=10_000,
    uniformity_filters=500_000,
    dictionary_size=400_000,
    dictionary_targets=1_000,
    frequency_draws=2_900_000,
)

PRESETS = {p.name: p for p in (SMOKE, DESK, PAPER)}


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _config_digest(args: argparse.Namespace) -> str:
    # Output location and the config-file path are not experiment inputs.
    skip = ("func", "out", "config")
    relevant = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return hashlib.sha256(repr(relevant).encode()).hexdigest()[:16]


def _header(args: argparse.Namespace) -> str:
    return f"# config_digest={_config_digest(args)} seed={args.seed} version={__version__}"


def _outdir(args: argparse.Namespace) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _open_csv(args, name: str):
    path = os.path.join(_outdir(args), name)
    fh = open(path, "w", encoding="utf-8", newline="\n")
    fh.write(_header(args) + "\n")
    return fh, path


def _load_tables(args):
    surnames = (
        tables.bundled_surnames()
        if args.surnames == BUNDLED
        else load_frequency_table(args.surnames)
    )
    first_names = (
        tables.bundled_first_names()
        if args.first_names == BUNDLED
        else load_first_name_tables(args.first_names)
    )
    meshblocks = (
        tables.bundled_meshblocks()
        if args.meshblocks == BUNDLED
        else load_frequency_table(args.meshblocks)
    )
    return surnames, first_names, meshblocks


def _run_key(args) -> HmacKey:
    if getattr(args, "key_file", None):
        keys = read_key_file(args.key_file)
        if not keys:
            raise CliError(f"no keys in {args.key_file}")
        return keys[0]
    # Experiment-grade reproducible key; see hashcore.HmacKey.from_seed.
    return HmacKey.from_seed(args.seed, "run")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed for the run")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--scale", choices=sorted(PRESETS), default="desk")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--config", default=None, help="flat key=value config file")


def _read_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    surnames, first_names, meshblocks = _load_tables(args)
    preset = PRESETS[args.scale]
    size = args.size if args.size is not None else preset.population
    config = synthgen.GeneratorConfig(
        population_size=size,
        seed=args.seed,
        last_name_table=surnames,
        first_name_tables=first_names,
        meshblock_table=meshblocks,
    )
    dataset = synthgen.generate(config)
    outdir = _outdir(args)
    write_dataset(dataset, os.path.join(outdir, "original.csv"))
    kinds = _parse_distortions(args.distortions)
    fh, _ = _open_csv(args, "distortion_stats.csv")
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["distortion", "selected", "changed", "skipped_short_name"])
        for kind in kinds:
            spec = synthgen.DistortionSpec(kind, probability=args.probability)
            distorted, stats = synthgen.distort_with_stats(
                dataset, spec, args.seed, meshblock_table=meshblocks
            )
            linking_copy = synthgen.shuffle(distorted, derive_seed(args.seed, "shuffle", kind.value))
            write_dataset(linking_copy, os.path.join(outdir, f"distorted_{kind.value}.csv"))
            writer.writerow([kind.value, stats.selected, stats.changed, stats.skipped_short_name])
    print(f"generated {size} records and {len(kinds)} linking copies in {outdir}")
    return 0


def _parse_distortions(raw: str) -> list[synthgen.DistortionKind]:
    if raw == "none":
        return []
    if raw == "all":
        return list(synthgen.BENCHMARK_DISTORTIONS)
    by_label = {k.value: k for k in synthgen.DistortionKind}
    kinds = []
    for label in raw.split(","):
        label = label.strip()
        if label not in by_label:
            raise CliError(f"unknown distortion {label!r}; known: {sorted(by_label)}")
        kinds.append(by_label[label])
    return kinds


# ---------------------------------------------------------------------------
# derive
# ---------------------------------------------------------------------------


def cmd_derive(args) -> int:
    dataset = load_dataset(args.dataset)
    specs = linkkeys.default_spec_suite()
    key = _run_key(args)
    index = linkkeys.build_index(dataset, specs, key)
    outdir = _outdir(args)
    snapshot = os.path.join(outdir, "index.snapshot")
    linkkeys.save_index(index, snapshot)
    report = linkkeys.uniqueness_report(index, len(dataset))
    fh, path = _open_csv(args, "uniqueness.csv")
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["spec", "percent_unique_tags", "percent_unique_records",
             "duplicate_groups", "largest_group", "total_tags", "contributing_records"]
        )
        for row in report.per_spec:
            writer.writerow(
                [row.spec_name, f"{row.percent_unique_tags:.3f}",
                 f"{row.percent_unique_records:.3f}", row.duplicate_group_count,
                 row.largest_group_size, row.total_tags, row.contributing_records]
            )
    if args.export_tags:
        linkkeys.export_index_csv(index, os.path.join(outdir, "tags_sensitive.csv"))
    print(f"index over {len(dataset)} records -> {snapshot}; uniqueness -> {path}")
    return 0


# ---------------------------------------------------------------------------
# link
# ---------------------------------------------------------------------------


def cmd_link(args) -> int:
    queries = load_dataset(args.queries, provenance="queries")
    specs = linkkeys.default_spec_suite()
    key = _run_key(args)
    if args.index:
        # Linking against a snapshot built earlier, possibly under another key.
        index = linkkeys.load_index(args.index)
        truth_row_ids = queries.row_ids()
    else:
        if not args.original:
            raise CliError("link needs --original (or a prebuilt --index)")
        original = load_dataset(args.original)
        index = linkkeys.build_index(original, specs, key)
        truth_row_ids = original.row_ids()
    methods = [FIRST_UNIQUE, VOTING] if args.method == "both" else [args.method]
    outdir = _outdir(args)
    eval_fh, eval_path = _open_csv(args, "evaluation.csv")
    with eval_fh:
        eval_writer = csv.writer(eval_fh, lineterminator="\n")
        eval_writer.writerow(
            ["distortion", "method", "precision", "recall", "recall_strict",
             "n_queries", "n_no_match"]
        )
        for method in methods:
            decisions = link_dataset(
                queries, index, specs, key, method=method,
                tiebreak_seed=derive_seed(args.seed, "tiebreak", method),
                threads=args.threads,
            )
            if len(queries) and not any(
                outcome in ("unique", "multiple")
                for decision in decisions
                for _, outcome, _ in decision.evidence
            ):
                print(
                    "error: zero tags matched between the query digests and the index; "
                    "key mismatch suspected (was the index built with a different key?)",
                    file=sys.stderr,
                )
                return 2
            with open(os.path.join(outdir, f"decisions_{method}.csv"), "w",
                      encoding="utf-8", newline="\n") as fh:
                fh.write(_header(args) + "\n")
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["query_row_id", "matched_row_id", "method", "score_or_evidence"])
                for d in decisions:
                    evidence = ";".join(f"{spec}:{outcome}:{size}" for spec, outcome, size in d.evidence)
                    writer.writerow(
                        [d.query_row_id,
                         "" if d.matched_row_id is None else d.matched_row_id,
                         d.method, evidence]
                    )
            result = evalbench.evaluate(decisions, args.distortion, method, truth_row_ids)
            eval_writer.writerow(
                [result.distortion, result.method, f"{result.precision:.4f}",
                 f"{result.recall:.4f}", f"{result.recall_strict:.4f}",
                 result.n_queries, result.no_match]
            )
    print(f"evaluation -> {eval_path}")
    return 0


# ---------------------------------------------------------------------------
# bloom
# ---------------------------------------------------------------------------


def cmd_bloom(args) -> int:
    preset = PRESETS[args.scale]
    names = tables.surname_pool(preset.overestimation_sample)
    sweep_names = names[: preset.sweep_sample]
    outdir = _outdir(args)
    header = _header(args)

    for kind in (bloom_mod.UNIVERSAL, bloom_mod.DOUBLE):
        family = bloom_mod.make_family(kind, 101, 3, seed=args.seed)
        result = bloom_mod.uniformity_experiment(
            family, preset.uniformity_filters, 5, seed=args.seed
        )
        bloom_mod.write_histogram_csv(
            result, os.path.join(outdir, f"uniformity_{kind}.csv"), header
        )
        print(f"uniformity[{kind}] m=101 k=3 stddev={result.stddev:.1f}")

    headline = []
    for m in (100, 101):
        family = bloom_mod.make_family(bloom_mod.DOUBLE, m, 3, seed=args.seed)
        stats = bloom_mod.overestimation_experiment(names, family)
        headline.append(stats)
        print(
            f"overestimation[double] m={m} k=3: greater={stats.bloom_greater_fraction:.3f} "
            f"mean_diff={stats.mean_diff_when_greater:.3f}"
        )
    family = bloom_mod.make_family(bloom_mod.UNIVERSAL, 101, 3, seed=args.seed)
    headline.append(bloom_mod.overestimation_experiment(names, family))
    bloom_mod.write_sweep_csv(headline, os.path.join(outdir, "overestimation.csv"), header)

    size_rows = bloom_mod.parameter_sweep(
        sweep_names, sizes=list(range(100, 1001, 100)), ks=[3], seed=args.seed
    )
    bloom_mod.write_sweep_csv(size_rows, os.path.join(outdir, "sweep_sizes.csv"), header)
    k_rows = bloom_mod.parameter_sweep(
        sweep_names, sizes=[1000], ks=list(range(3, 31, 3)), seed=args.seed
    )
    bloom_mod.write_sweep_csv(k_rows, os.path.join(outdir, "sweep_ks.csv"), header)
    counterexamples = sum(r.ngram_greater_count for r in size_rows + k_rows + headline)
    if counterexamples:
        print(f"warning: {counterexamples} pairs scored the plain bi-grams above the filter")
    print(f"bloom experiment CSVs -> {outdir}")
    return 0


# ---------------------------------------------------------------------------
# attack
# ---------------------------------------------------------------------------


def cmd_attack(args) -> int:
    preset = PRESETS[args.scale]
    outdir = _outdir(args)
    header = _header(args)
    surnames = tables.bundled_surnames()

    # Dictionary attack on plain SHA-256 name hashes.
    dictionary = tables.surname_pool(preset.dictionary_size)
    rng = derive_rng(args.seed, "attack-targets")
    target_names = rng.sample(dictionary, preset.dictionary_targets)

    def encoder(name: str) -> bytes:
        return hashlib.sha256(name.encode()).digest()

    dict_report = attacks_mod.dictionary_attack(
        [encoder(n) for n in target_names], dictionary, encoder
    )
    attacks_mod.write_report_csv(
        dict_report, os.path.join(outdir, "attack_dictionary.csv"), args.redact, header
    )
    print(attacks_mod.report_summary(dict_report, args.redact))

    # Frequency attack on keyed deterministic surname tags; no key supplied.
    key = HmacKey.from_seed(derive_seed(args.seed, "attack-frequency"), "freq")
    draw = surnames.sampler()
    draw_rng = derive_rng(args.seed, "attack-draws")
    tags = [hmac_tag(key, draw(draw_rng).encode()) for _ in range(preset.frequency_draws)]
    freq_report = attacks_mod.frequency_attack(
        tags, surnames, top_k=5, verify_encoder=lambda name: hmac_tag(key, name.encode())
    )
    attacks_mod.write_report_csv(
        freq_report, os.path.join(outdir, "attack_frequency.csv"), args.redact, header
    )
    print(attacks_mod.report_summary(freq_report, args.redact))

    # Bucket reversal chain over a hidden 50-bucket table.
    bucket_key = HmacKey.from_seed(derive_seed(args.seed, "attack-buckets"), "bucket")
    table = lossy.build_hmac_table(surnames.values(), bucket_key, 50)
    top_names = [name for name, _ in sorted(surnames.entries, key=lambda vc: -vc[1])[:10]]
    chain_report = attacks_mod.bucket_reversal_chain(table, top_names, surnames)
    attacks_mod.write_report_csv(
        chain_report, os.path.join(outdir, "attack_bucket_chain.csv"), args.redact, header
    )
    print(attacks_mod.report_summary(chain_report, args.redact))
    return 0


# ---------------------------------------------------------------------------
# lossy
# ---------------------------------------------------------------------------


def cmd_lossy(args) -> int:
    outdir = _outdir(args)
    header = _header(args)
    surnames = tables.bundled_surnames()
    key = HmacKey.from_seed(derive_seed(args.seed, "lossy"), "bucket")
    dominant = max(surnames.entries, key=lambda vc: vc[1])[0]
    for n_buckets in _parse_int_list(args.buckets):
        table = lossy.build_hmac_table(surnames.values(), key, n_buckets)
        analysis = lossy.bucket_frequency_analysis(table, surnames, dominant)
        lossy.write_bucket_table_csv(
            table, os.path.join(outdir, f"buckets_{n_buckets}_sensitive.csv")
        )
        lossy.write_analysis_csv(
            analysis, os.path.join(outdir, f"bucket_analysis_{n_buckets}.csv"), header
        )
        print(
            f"buckets={n_buckets}: '{dominant}' bucket rank {analysis.probe_rank} "
            f"(mass {analysis.masses[0][1]} max)"
        )
        smoothed, stats = lossy.build_smoothed_table(surnames, n_buckets)
        lossy.write_bucket_table_csv(
            smoothed, os.path.join(outdir, f"smoothed_{n_buckets}_sensitive.csv")
        )
        print(
            f"  smoothed: max/min mass ratio {stats.max_min_ratio:.2f}, "
            f"largest bucket holds {max(stats.distinct_names_per_bucket)} names"
        )
    return 0


def _parse_int_list(raw: str) -> list[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


# ---------------------------------------------------------------------------
# envelope
# ---------------------------------------------------------------------------


def cmd_envelope(args) -> int:
    surnames, first_names, meshblocks = _load_tables(args)
    config = synthgen.GeneratorConfig(
        population_size=args.size,
        seed=args.seed,
        last_name_table=surnames,
        first_name_tables=first_names,
        meshblock_table=meshblocks,
    )
    dataset = synthgen.generate(config)
    keypair = envelope_mod.generate_keypair(derive_rng(args.seed, "envelope-keypair"))
    result = envelope_mod.pipeline_demo(dataset, keypair, args.seed)
    outdir = _outdir(args)
    with open(os.path.join(outdir, "linkage_file.bin"), "wb") as fh:
        fh.write(result.encrypted_file)
    shares = envelope_mod.split_key(
        keypair.private_key, args.share_threshold, args.share_total,
        derive_rng(args.seed, "envelope-shares"),
    )
    envelope_mod.write_shares_file(shares, os.path.join(outdir, "private_key_shares.txt"))
    with open(os.path.join(outdir, "public_key.txt"), "w", encoding="utf-8") as fh:
        fh.write(keypair.public_key.hex() + "\n")
    fh2, path = _open_csv(args, "linked_output.csv")
    with fh2:
        writer = csv.writer(fh2, lineterminator="\n")
        writer.writerow(["query_row_id", "matched_row_id"])
        for query_row_id, matched in result.output_rows:
            writer.writerow([query_row_id, "" if matched is None else matched])
    ev = result.eval_result
    print(
        f"pipeline over {args.size} records: precision={ev.precision:.3f} "
        f"recall={ev.recall:.3f}; artifacts -> {outdir}"
    )
    return 0


# ---------------------------------------------------------------------------
# perf
# ---------------------------------------------------------------------------


def cmd_perf(args) -> int:
    fh, path = _open_csv(args, "perf.csv")
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n_records", "n_queries", "wall_ms", "qps", "threads"])
        for n in _parse_int_list(args.sizes):
            result = evalbench.perf_benchmark(
                n, strategy=args.strategy, seed=args.seed, threads=args.threads
            )
            writer.writerow(
                [result.n_records, result.n_queries_issued,
                 f"{result.wall_seconds * 1000:.1f}",
                 f"{result.queries_per_second:.0f}", result.threads]
            )
            print(
                f"n={n}: {result.n_queries_issued} queries in "
                f"{result.wall_seconds:.2f}s ({result.queries_per_second:.0f} q/s)"
            )
    print(f"perf -> {path}")
    return 0


# ---------------------------------------------------------------------------
# repro
# ---------------------------------------------------------------------------


def cmd_repro(args) -> int:
    base = _outdir(args)
    preset = PRESETS[args.scale]
    argv_common = ["--seed", str(args.seed), "--scale", args.scale, "--threads", str(args.threads)]
    steps = [
        (["generate", "--out", os.path.join(base, "datasets"),
          "--size", str(preset.population), "--distortions", "all"], "generate"),
        (["derive", "--out", os.path.join(base, "derive"),
          "--dataset", os.path.join(base, "datasets", "original.csv")], "derive"),
    ]
    for kind in synthgen.BENCHMARK_DISTORTIONS:
        steps.append(
            (["link", "--out", os.path.join(base, "link", kind.value),
              "--original", os.path.join(base, "datasets", "original.csv"),
              "--queries", os.path.join(base, "datasets", f"distorted_{kind.value}.csv"),
              "--method", "both", "--distortion", kind.value], f"link:{kind.value}")
        )
    steps.append((["bloom", "--out", os.path.join(base, "bloom")], "bloom"))
    steps.append((["attack", "--out", os.path.join(base, "attack")], "attack"))
    for argv, label in steps:
        print(f"[repro] {label}")
        code = main(argv + argv_common)
        if code != 0:
            print(f"repro step {label} failed with exit code {code}", file=sys.stderr)
            return code
    print(f"repro bundle -> {base}")
    return 0


# ---------------------------------------------------------------------------
# keygen helper (explicit, so keys never silently appear in outputs)
# ---------------------------------------------------------------------------


def cmd_keygen(args) -> int:
    write_key_file(args.key_file, [HmacKey.generate(args.key_id)])
    print(f"wrote new key '{args.key_id}' to {args.key_file}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="pprlkit",
        description="Privacy-preserving record linkage experiments over synthetic data.",
    )
    subactions = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    class _Sub:
        @staticmethod
        def add_parser(name, **kwargs):
            registry[name] = subactions.add_parser(name, **kwargs)
            return registry[name]

    sub = _Sub()

    p = sub.add_parser("generate", help="synthesize a population and distorted copies")
    _add_common(p)
    p.add_argument("--size", type=int, default=None, help="records (default: preset)")
    p.add_argument("--surnames", default=BUNDLED)
    p.add_argument("--first-names", dest="first_names", default=BUNDLED)
    p.add_argument("--meshblocks", default=BUNDLED)
    p.add_argument("--distortions", default="all", help="all, none, or comma list of labels")
    p.add_argument("--probability", type=float, default=1.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("derive", help="build the link index and audit uniqueness")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--key-file", dest="key_file", default=None)
    p.add_argument("--export-tags", dest="export_tags", action="store_true",
                   help="also write the sensitive per-tag CSV")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("link", help="link a query dataset against an original")
    _add_common(p)
    p.add_argument("--original", default=None)
    p.add_argument("--index", default=None, help="prebuilt index snapshot to link against")
    p.add_argument("--queries", required=True)
    p.add_argument("--method", choices=[FIRST_UNIQUE, VOTING, "both"], default="both")
    p.add_argument("--distortion", default="unknown", help="label for the evaluation row")
    p.add_argument("--key-file", dest="key_file", default=None)
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("bloom", help="uniformity, over-estimation, and sweeps")
    _add_common(p)
    p.set_defaults(func=cmd_bloom)

    p = sub.add_parser("attack", help="dictionary, frequency, and bucket-chain attacks")
    _add_common(p)
    p.add_argument("--redact", action="store_true",
                   help="replace recovered plaintext with hashes in reports")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("lossy", help="bucket tables and frequency analyses")
    _add_common(p)
    p.add_argument("--buckets", default="10,50,100,500")
    p.set_defaults(func=cmd_lossy)

    p = sub.add_parser("envelope", help="encrypt -> link -> shuffle pipeline demo")
    _add_common(p)
    p.add_argument("--size", type=int, default=2000)
    p.add_argument("--surnames", default=BUNDLED)
    p.add_argument("--first-names", dest="first_names", default=BUNDLED)
    p.add_argument("--meshblocks", default=BUNDLED)
    p.add_argument("--share-threshold", dest="share_threshold", type=int, default=2)
    p.add_argument("--share-total", dest="share_total", type=int, default=3)
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("perf", help="linking performance benchmark")
    _add_common(p)
    p.add_argument("--sizes", default="1000,10000")
    p.add_argument("--strategy", choices=[FIRST_UNIQUE, VOTING], default=FIRST_UNIQUE)
    p.set_defaults(func=cmd_perf)

    p = sub.add_parser("repro", help="chain generate/derive/link/bloom/attack")
    _add_common(p)
    p.add_argument("--redact", action="store_true")
    p.set_defaults(func=cmd_repro)

    p = sub.add_parser("keygen", help="write a fresh HMAC key file")
    p.add_argument("--key-file", dest="key_file", required=True)
    p.add_argument("--key-id", dest="key_id", default="default")
    p.set_defaults(func=cmd_keygen)

    return parser, registry


def main(argv: list[str] | None = None) -> int:
    parser, registry = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        # A --config file provides subcommand defaults; explicit flags still
        # win because argparse applies them after set_defaults.
        if "--config" in argv and argv and argv[0] in registry:
            config_path = argv[argv.index("--config") + 1]
            config = _read_config_file(config_path)
            subparser = registry[argv[0]]
            actions = {action.dest: action for action in subparser._actions}
            unknown = set(config) - set(actions)
            if unknown:
                raise CliError(f"unknown config keys for {argv[0]}: {sorted(unknown)}")
            defaults = {
                dest: (actions[dest].type(raw) if actions[dest].type else raw)
                for dest, raw in config.items()
            }
            subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
