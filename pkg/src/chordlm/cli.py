"""Batch front-end for the corpus-to-prediction pipeline.

Subcommands::

    ingest      MIDI files -> slice-stream interchange files + ingest log
    encode      slice streams -> encoded corpus, vocabulary, dataset stats
    folds       stratified fold plan from the experiment seed
    train       long-term tries, one snapshot per fold
    eval        per-composition records (and optional per-token traces)
    report      summary and regression reports
    experiment  folds + train + eval + report in one pass

All randomness (fold assignment, bootstrap resampling) flows from the
single seed in the experiment config, and report headers embed the
resolved configuration, so identical config and inputs reproduce every
output byte for byte.

Exit codes: 0 success, 1 input error, 2 config error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import encoder, evalkit, ingest, keyscape, ppm

__all__ = ["ExperimentConfig", "load_config", "main"]

OUTPUT_ROOT_ENV = "CHORDLM_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


class InputError(Exception):
    """Unusable input files or directories."""


class ConfigError(Exception):
    """Unusable experiment configuration."""


class InvariantError(Exception):
    """An internal consistency check failed."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    corpus: dict[str, str] = field(default_factory=dict)  # dataset -> path
    profile: str = "albrecht_shanahan"
    profile_file: str | None = None
    weighting: str = "duration"
    window: int = 16
    overflow: str = encoder.OVERFLOW_SMALLEST
    include_percussion: bool = False
    models: tuple[str, ...] = ("ltm+", "stm", "both+")
    order_policy: str | int = ppm.ORDER_UNBOUNDED
    bias: float = 2.0
    update_exclusion: bool = False
    folds: int = 4
    seed: int = 1
    replicates: int = 1000
    level: float = 0.95
    enter_p: float = 0.05
    remove_p: float = 0.10
    output: str = "out"
    traces: bool = False

    def model_config(self, mode: str) -> ppm.ModelConfig:
        return ppm.ModelConfig(
            mode=mode,
            order_policy=self.order_policy,
            bias=self.bias,
            update_exclusion=self.update_exclusion,
        )

    def header_lines(self) -> list[str]:
        """Comment lines embedding the resolved configuration."""
        return [
            f"# seed = {self.seed}",
            f"# folds = {self.folds}",
            f"# models = {','.join(self.models)}",
            f"# escape = C",
            f"# order_policy = {self.order_policy}",
            f"# bias = {self.bias!r}",
            f"# update_exclusion = {'on' if self.update_exclusion else 'off'}",
            f"# key_profile = {self.profile}",
            f"# key_weighting = {self.weighting}",
            f"# key_window = {self.window}",
            f"# encoder_overflow = {self.overflow}",
            f"# bootstrap = bca, replicates={self.replicates}, level={self.level!r}",
            f"# stepwise = p-enter<{self.enter_p!r}, p-remove>{self.remove_p!r}",
            "# improbable = bottom 10% of observed types by zeroth-order probability",
        ]


def _parse_order_policy(text: str) -> str | int:
    text = text.strip().lower()
    if text in (ppm.ORDER_UNBOUNDED, "unbounded", "*"):
        return ppm.ORDER_UNBOUNDED
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"order_policy must be '{ppm.ORDER_UNBOUNDED}' or an integer, got {text!r}")


def _parse_bool(text: str, option: str) -> bool:
    value = text.strip().lower()
    if value in ("on", "true", "yes", "1", "include"):
        return True
    if value in ("off", "false", "no", "0", "exclude"):
        return False
    raise ConfigError(f"{option}: cannot read boolean from {text!r}")


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an INI file plus flag overrides."""
    config = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        try:
            if parser.has_section("corpus"):
                config.corpus = dict(parser.items("corpus"))
            if parser.has_section("keys"):
                section = parser["keys"]
                config.profile = section.get("profile", config.profile)
                config.profile_file = section.get("profile_file", None) or None
                config.weighting = section.get("weighting", config.weighting)
                config.window = section.getint("window", config.window)
            if parser.has_section("encoder"):
                section = parser["encoder"]
                config.overflow = section.get("overflow", config.overflow)
                if "percussion" in section:
                    config.include_percussion = _parse_bool(
                        section["percussion"], "percussion"
                    )
            if parser.has_section("models"):
                section = parser["models"]
                if "run" in section:
                    config.models = tuple(
                        m.strip() for m in section["run"].split(",") if m.strip()
                    )
                if "order_policy" in section:
                    config.order_policy = _parse_order_policy(section["order_policy"])
                config.bias = section.getfloat("bias", config.bias)
                if "update_exclusion" in section:
                    config.update_exclusion = _parse_bool(
                        section["update_exclusion"], "update_exclusion"
                    )
            if parser.has_section("evaluation"):
                section = parser["evaluation"]
                config.folds = section.getint("folds", config.folds)
                config.replicates = section.getint("replicates", config.replicates)
                config.level = section.getfloat("level", config.level)
                config.enter_p = section.getfloat("enter_p", config.enter_p)
                config.remove_p = section.getfloat("remove_p", config.remove_p)
            if parser.has_section("experiment"):
                section = parser["experiment"]
                config.seed = section.getint("seed", config.seed)
                config.output = section.get("output", config.output)
                if "traces" in section:
                    config.traces = _parse_bool(section["traces"], "traces")
        except ValueError as exc:
            raise ConfigError(f"bad value in config file {path}: {exc}") from exc

    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, value)

    env_root = os.environ.get(OUTPUT_ROOT_ENV)
    if env_root and config.output == "out":
        config.output = env_root

    _validate_config(config)
    return config


def _validate_config(config: ExperimentConfig) -> None:
    if config.weighting not in ("duration", "count"):
        raise ConfigError(f"weighting must be duration|count, got {config.weighting!r}")
    if config.overflow not in (encoder.OVERFLOW_SMALLEST, encoder.OVERFLOW_FREQUENT):
        raise ConfigError(f"unknown encoder overflow rule {config.overflow!r}")
    for mode in config.models:
        if mode not in (ppm.MODE_LTM, ppm.MODE_LTM_PLUS, ppm.MODE_STM, ppm.MODE_BOTH_PLUS):
            raise ConfigError(f"unknown model mode {mode!r}")
    if not config.models:
        raise ConfigError("no model configurations requested")
    if config.folds < 2:
        raise ConfigError("folds must be >= 2")
    if config.window <= 0:
        raise ConfigError("key window must be positive")
    if not 0 < config.level < 1:
        raise ConfigError("confidence level must lie in (0, 1)")
    if config.replicates < 1:
        raise ConfigError("bootstrap replicates must be >= 1")


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


def _out(config: ExperimentConfig) -> Path:
    return Path(config.output)


def _streams_dir(config: ExperimentConfig) -> Path:
    return _out(config) / "streams"


def _paths(config: ExperimentConfig) -> dict[str, Path]:
    out = _out(config)
    return {
        "tokens": out / "corpus.tokens",
        "vocab": out / "corpus.vocab",
        "datasets": out / "datasets.csv",
        "folds": out / "folds.csv",
        "tries": out / "tries",
        "results": out / "results.csv",
        "summary": out / "summary.csv",
        "regression": out / "regression.txt",
        "traces": out / "traces",
        "ingest_log": out / "ingest.log",
    }


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


def _midi_files(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(path.rglob("*.mid")))
            files.extend(sorted(path.rglob("*.midi")))
        elif path.is_file():
            files.append(path)
        else:
            raise InputError(f"no such file or directory: {path}")
    return sorted(set(files))


def cmd_ingest(paths: list[str], dataset: str | None, config: ExperimentConfig) -> int:
    """Parse MIDI files into one interchange file per composition.

    With no explicit paths, every dataset/path pair from the config's
    corpus table is ingested in turn.
    """
    if not paths:
        if not config.corpus:
            raise InputError(
                "no input paths given and the config has no [corpus] section"
            )
        code = EXIT_OK
        for corpus_dataset in sorted(config.corpus):
            code = max(
                code,
                _ingest_one(
                    [config.corpus[corpus_dataset]], corpus_dataset, config
                ),
            )
        return code
    if dataset is None:
        raise ConfigError("--dataset is required when paths are given")
    return _ingest_one(paths, dataset, config)


def _ingest_one(paths: list[str], dataset: str, config: ExperimentConfig) -> int:
    files = _midi_files(paths)
    if not files:
        raise InputError("no input MIDI files found")
    target = _streams_dir(config) / dataset
    target.mkdir(parents=True, exist_ok=True)
    log_lines: list[str] = []
    ok = 0
    failed = 0
    for path in files:
        warnings: list[str] = []
        try:
            events = ingest.parse_midi(
                path.read_bytes(),
                include_percussion=config.include_percussion,
                warnings=warnings,
            )
        except (ingest.MidiParseError, OSError) as exc:
            failed += 1
            log_lines.append(f"ERROR {path}: {exc}")
            continue
        if not events:
            failed += 1
            log_lines.append(f"ERROR {path}: no note events")
            continue
        # Composition ids land in comma/tab-delimited files.
        composition_id = path.stem.replace(",", "_").replace("\t", "_")
        stream = ingest.SliceStream.from_events(composition_id, dataset, events)
        out_path = target / f"{composition_id}.slices"
        out_path.write_text(ingest.write_interchange(stream))
        ok += 1
        for warning in warnings:
            log_lines.append(f"WARN {path}: {warning}")
        log_lines.append(f"OK {path}: {len(events)} events, {len(stream.slices)} slices")
    log_path = _paths(config)["ingest_log"]
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "a") as handle:
        handle.write("\n".join(log_lines) + "\n")
    warn_count = sum(1 for line in log_lines if line.startswith("WARN"))
    print(f"ingest: {ok} parsed, {failed} failed, {warn_count} warnings -> {target}")
    if ok == 0:
        raise InputError("all input files failed to parse")
    return EXIT_OK


# ---------------------------------------------------------------------------
# encode
# ---------------------------------------------------------------------------


def _load_streams(config: ExperimentConfig) -> list[ingest.SliceStream]:
    streams_dir = _streams_dir(config)
    if not streams_dir.is_dir():
        raise InputError(f"no slice streams found under {streams_dir}; run ingest first")
    streams = []
    for path in sorted(streams_dir.rglob("*.slices")):
        streams.append(ingest.read_interchange(path.read_text()))
    if not streams:
        raise InputError(f"no .slices files under {streams_dir}")
    return streams


def cmd_encode(config: ExperimentConfig, key_trace: bool = False) -> int:
    """Encode slice streams into chord tokens and build the vocabulary."""
    profile = keyscape.get_profile(config.profile, config.profile_file)
    streams = _load_streams(config)
    paths = _paths(config)

    token_lists: list[list[encoder.ChordType]] = []
    for stream in streams:
        keys = keyscape.key_track(
            stream, profile, width=config.window, weighting=config.weighting
        )
        tokens = [
            encoder.encode_slice(slc, key, overflow=config.overflow)
            for slc, key in zip(stream.slices, keys)
        ]
        token_lists.append(tokens)
        if key_trace:
            trace_dir = _out(config) / "keys"
            trace_dir.mkdir(parents=True, exist_ok=True)
            (trace_dir / f"{stream.composition_id}.csv").write_text(
                keyscape.key_trace_csv(stream, keys)
            )

    vocab = encoder.build_vocabulary(token_lists)
    encoded = [
        encoder.EncodedStream(
            composition_id=stream.composition_id,
            dataset_id=stream.dataset_id,
            tokens=tuple(vocab.encode(t) for t in tokens),
        )
        for stream, tokens in zip(streams, token_lists)
    ]

    paths["tokens"].parent.mkdir(parents=True, exist_ok=True)
    paths["tokens"].write_text(encoder.write_encoded_corpus(encoded))
    paths["vocab"].write_text(encoder.write_vocabulary(vocab))
    paths["datasets"].write_text(_dataset_stats_csv(encoded))
    print(
        f"encode: {len(encoded)} compositions, "
        f"{sum(len(s.tokens) for s in encoded)} tokens, {len(vocab)} types"
    )
    return EXIT_OK


def _dataset_stats_csv(encoded: list[encoder.EncodedStream]) -> str:
    """Per-dataset piece/token/type accounting."""
    by_dataset: dict[str, list[encoder.EncodedStream]] = {}
    for stream in encoded:
        by_dataset.setdefault(stream.dataset_id, []).append(stream)
    lines = ["dataset,pieces,tokens,types"]
    total_pieces = total_tokens = 0
    all_types: set[int] = set()
    for dataset_id in sorted(by_dataset):
        members = by_dataset[dataset_id]
        types: set[int] = set()
        tokens = 0
        for stream in members:
            types.update(stream.tokens)
            tokens += len(stream.tokens)
        lines.append(f"{dataset_id},{len(members)},{tokens},{len(types)}")
        total_pieces += len(members)
        total_tokens += tokens
        all_types.update(types)
    lines.append(f"total,{total_pieces},{total_tokens},{len(all_types)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# folds / train / eval / report
# ---------------------------------------------------------------------------


def _load_encoded(config: ExperimentConfig) -> tuple[list[encoder.EncodedStream], encoder.Vocabulary]:
    paths = _paths(config)
    if not paths["tokens"].is_file() or not paths["vocab"].is_file():
        raise InputError("encoded corpus not found; run encode first")
    streams = encoder.read_encoded_corpus(paths["tokens"].read_text())
    vocab = encoder.read_vocabulary(paths["vocab"].read_text())
    return streams, vocab


def cmd_folds(config: ExperimentConfig) -> int:
    streams, _ = _load_encoded(config)
    warnings: list[str] = []
    plan = evalkit.make_folds(
        [(s.composition_id, s.dataset_id) for s in streams],
        k=config.folds,
        seed=config.seed,
        warnings=warnings,
    )
    dataset_of = {s.composition_id: s.dataset_id for s in streams}
    lines = ["composition,dataset,fold"]
    for composition_id in sorted(plan.assignment):
        lines.append(
            f"{composition_id},{dataset_of[composition_id]},{plan.assignment[composition_id]}"
        )
    paths = _paths(config)
    paths["folds"].write_text("\n".join(lines) + "\n")
    for warning in warnings:
        print(f"folds: warning: {warning}")
    print(f"folds: {len(plan.assignment)} compositions over {config.folds} folds")
    return EXIT_OK


def _load_folds(config: ExperimentConfig) -> evalkit.FoldPlan:
    path = _paths(config)["folds"]
    if not path.is_file():
        raise InputError("fold plan not found; run folds first")
    assignment: dict[str, int] = {}
    lines = path.read_text().splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        composition_id, _, fold = line.rsplit(",", 2)
        assignment[composition_id] = int(fold)
    if assignment and max(assignment.values()) >= config.folds:
        raise InputError(
            f"fold plan at {path} uses more folds than configured ({config.folds})"
        )
    return evalkit.FoldPlan(k=config.folds, assignment=assignment)


def _train_fold(
    streams: list[encoder.EncodedStream],
    vocab: encoder.Vocabulary,
    plan: evalkit.FoldPlan,
    fold: int,
    config: ExperimentConfig,
) -> ppm.ContextTrie:
    train_ids = set(plan.train_set(fold))
    max_depth = (
        None
        if config.order_policy == ppm.ORDER_UNBOUNDED
        else int(config.order_policy) + 1
    )
    trie = ppm.ContextTrie(len(vocab), max_depth=max_depth)
    for stream in sorted(streams, key=lambda s: s.composition_id):
        if stream.composition_id in train_ids:
            trie.train_increment(stream.tokens)
    return trie


def cmd_train(config: ExperimentConfig, only_fold: int | None = None) -> int:
    streams, vocab = _load_encoded(config)
    plan = _load_folds(config)
    paths = _paths(config)
    paths["tries"].mkdir(parents=True, exist_ok=True)
    folds = [only_fold] if only_fold is not None else list(range(config.folds))
    for fold in folds:
        trie = _train_fold(streams, vocab, plan, fold, config)
        (paths["tries"] / f"fold{fold}.trie").write_text(ppm.write_trie(trie))
        print(f"train: fold {fold}: {trie.total_symbols} symbols")
    return EXIT_OK


def _needs_base_trie(mode: str) -> bool:
    return mode in (ppm.MODE_LTM, ppm.MODE_LTM_PLUS, ppm.MODE_BOTH_PLUS)


def cmd_eval(config: ExperimentConfig, regenerate: bool = True) -> int:
    """Run every requested model over every fold's test compositions."""
    streams, vocab = _load_encoded(config)
    plan = _load_folds(config)
    paths = _paths(config)
    by_id = {s.composition_id: s for s in streams}

    corpus_probs = evalkit.zeroth_order_distribution(vocab.counts)
    bottom_ids = evalkit.bottom_decile_ids(corpus_probs)
    monophonic_ids = vocab.monophonic_ids()

    rows: list[tuple] = []
    trace_lines: dict[str, list[str]] = {
        mode: ["composition,index,token_id,p,neg_log2_p"] for mode in config.models
    }
    for fold in range(config.folds):
        base_trie: ppm.ContextTrie | None = None
        if any(_needs_base_trie(mode) for mode in config.models):
            snapshot = paths["tries"] / f"fold{fold}.trie"
            if snapshot.is_file():
                base_trie = ppm.read_trie(snapshot.read_text())
            elif regenerate:
                base_trie = _train_fold(streams, vocab, plan, fold, config)
            else:
                raise InputError(f"missing trie snapshot {snapshot}; run train first")
        for composition_id in plan.test_set(fold):
            stream = by_id.get(composition_id)
            if stream is None:
                raise InvariantError(
                    f"fold plan names unknown composition {composition_id!r}"
                )
            predictors = evalkit.compute_predictors(
                stream.tokens, bottom_ids, monophonic_ids
            )
            for mode in config.models:
                probabilities = ppm.run_sequence(
                    stream.tokens,
                    config.model_config(mode),
                    base_trie=base_trie if _needs_base_trie(mode) else None,
                    alphabet_size=len(vocab),
                )
                h_m = evalkit.cross_entropy(probabilities)
                rows.append(
                    (
                        mode,
                        composition_id,
                        stream.dataset_id,
                        fold,
                        h_m,
                        predictors,
                    )
                )
                if config.traces:
                    for index, (token, p) in enumerate(
                        zip(stream.tokens, probabilities)
                    ):
                        trace_lines[mode].append(
                            f"{composition_id},{index},{token},"
                            f"{float(p)!r},{float(-np.log2(p))!r}"
                        )

    rows.sort(key=lambda r: (r[0], r[1]))
    lines = [
        "model,composition,dataset,fold,h_m,n_tokens,n_types,improbable,"
        "monophonic,repetition"
    ]
    for mode, composition_id, dataset_id, fold, h_m, predictors in rows:
        lines.append(
            f"{mode},{composition_id},{dataset_id},{fold},{h_m!r},"
            f"{predictors.n_tokens},{predictors.n_types},"
            f"{predictors.improbable!r},{predictors.monophonic!r},"
            f"{predictors.repetition!r}"
        )
    paths["results"].write_text("\n".join(lines) + "\n")
    if config.traces:
        paths["traces"].mkdir(parents=True, exist_ok=True)
        for mode in config.models:
            (paths["traces"] / f"{mode.replace('+', 'plus')}.csv").write_text(
                "\n".join(trace_lines[mode]) + "\n"
            )
    print(f"eval: {len(rows)} (composition, model) records")
    return EXIT_OK


def _read_results(config: ExperimentConfig) -> dict[str, list[evalkit.EvalRecord]]:
    path = _paths(config)["results"]
    if not path.is_file():
        raise InputError("results not found; run eval first")
    by_model: dict[str, list[evalkit.EvalRecord]] = {}
    lines = path.read_text().splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        fields = line.split(",")
        mode, composition_id, dataset_id = fields[0], fields[1], fields[2]
        h_m = float(fields[4])
        predictors = evalkit.Predictors(
            n_tokens=int(fields[5]),
            n_types=int(fields[6]),
            improbable=float(fields[7]),
            monophonic=float(fields[8]),
            repetition=float(fields[9]),
        )
        by_model.setdefault(mode, []).append(
            evalkit.EvalRecord(
                composition_id=composition_id,
                dataset_id=dataset_id,
                h_m=h_m,
                predictors=predictors,
            )
        )
    return by_model


CORPUS_NOTE = (
    "# note = mean cross-entropy is corpus-dependent: absolute values are "
    "not comparable to figures published for other corpora, only "
    "directionally within one corpus"
)


def cmd_report(config: ExperimentConfig) -> int:
    by_model = _read_results(config)
    paths = _paths(config)

    lines = list(config.header_lines())
    lines.append(CORPUS_NOTE)
    lines.append("model,n,mean_h,ci_low,ci_high")
    for mode in config.models:
        records = by_model.get(mode, [])
        if not records:
            continue
        values = np.array([r.h_m for r in records])
        low, high = evalkit.bootstrap_ci(
            values, replicates=config.replicates, level=config.level, seed=config.seed
        )
        lines.append(f"{mode},{len(records)},{float(values.mean())!r},{low!r},{high!r}")
    paths["summary"].write_text("\n".join(lines) + "\n")

    report_lines = list(config.header_lines())
    report_lines.append(CORPUS_NOTE.lstrip("# "))
    for mode in config.models:
        records = by_model.get(mode, [])
        report_lines.append("")
        report_lines.append(f"model {mode}")
        if len(records) < 10:
            report_lines.append(
                f"  (skipped: {len(records)} compositions < 10 required)"
            )
            continue
        result = evalkit.stepwise_regression(
            records, enter_p=config.enter_p, remove_p=config.remove_p
        )
        report_lines.append(f"  criterion: {result.criterion}")
        report_lines.append("  predictor    beta        R2")
        if not result.selected:
            report_lines.append("  (no predictor entered)")
        for name, r2 in zip(result.selected, result.r_squared_path):
            report_lines.append(
                f"  {name:<12} {result.betas[name]:+.4f}     {r2:.4f}"
            )
        for warning in result.warnings:
            report_lines.append(f"  warning: {warning}")
    paths["regression"].write_text("\n".join(report_lines) + "\n")
    print(f"report: {paths['summary']} and {paths['regression']}")
    return EXIT_OK


def cmd_experiment(config: ExperimentConfig) -> int:
    """Fold, train, evaluate and report in one deterministic pass."""
    cmd_folds(config)
    cmd_train(config)
    cmd_eval(config)
    cmd_report(config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chordlm",
        description="Chord-onset language modeling over symbolic corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="experiment config file (INI)")
        p.add_argument("--output", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="root seed (overrides config)")

    p_ingest = sub.add_parser("ingest", help="parse MIDI into slice streams")
    add_common(p_ingest)
    p_ingest.add_argument(
        "--dataset", help="dataset label (required when paths are given)"
    )
    p_ingest.add_argument("--include-percussion", action="store_true")
    p_ingest.add_argument(
        "paths",
        nargs="*",
        help="MIDI files or directories; omit to ingest the config's corpus table",
    )

    p_encode = sub.add_parser("encode", help="encode slice streams into tokens")
    add_common(p_encode)
    p_encode.add_argument("--key-trace", action="store_true", help="emit per-onset key CSVs")

    for name, help_text in (
        ("folds", "write the stratified fold plan"),
        ("report", "write summary and regression reports"),
        ("experiment", "folds + train + eval + report"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)

    p_train = sub.add_parser("train", help="train long-term tries per fold")
    add_common(p_train)
    p_train.add_argument("--fold", type=int, help="train only this fold")

    p_eval = sub.add_parser("eval", help="evaluate models over the folds")
    add_common(p_eval)
    p_eval.add_argument("--traces", action="store_true", help="write per-token traces")
    p_eval.add_argument(
        "--no-regenerate",
        action="store_true",
        help="fail instead of retraining when a trie snapshot is missing",
    )

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        overrides: dict = {}
        if getattr(args, "output", None):
            overrides["output"] = args.output
        if getattr(args, "seed", None) is not None:
            overrides["seed"] = args.seed
        if getattr(args, "include_percussion", False):
            overrides["include_percussion"] = True
        if getattr(args, "traces", False):
            overrides["traces"] = True
        config = load_config(getattr(args, "config", None), overrides)

        if args.command == "ingest":
            return cmd_ingest(args.paths, args.dataset, config)
        if args.command == "encode":
            return cmd_encode(config, key_trace=args.key_trace)
        if args.command == "folds":
            return cmd_folds(config)
        if args.command == "train":
            return cmd_train(config, only_fold=args.fold)
        if args.command == "eval":
            return cmd_eval(config, regenerate=not args.no_regenerate)
        if args.command == "report":
            return cmd_report(config)
        if args.command == "experiment":
            return cmd_experiment(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
