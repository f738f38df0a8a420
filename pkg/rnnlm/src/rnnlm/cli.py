"""Command-line front-end: train a model on a fold plan, export traces.

``rnnlm train`` reads the encoded corpus, vocabulary sidecar and fold
plan, holds out the lowest-indexed training fold for validation, trains
with early stopping, and saves the best snapshot plus a training-log
CSV. ``rnnlm trace`` runs a saved model over a test fold and writes the
per-token probability trace.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import read_folds, read_tokens, read_vocab_size, write_trace
from .network import RnnConfig, predict_sequence
from .train import train

CONFIG_KEYS = (
    "cell",
    "units",
    "embedding",
    "batch",
    "max_len",
    "max_epochs",
    "patience",
    "clip",
    "learning_rate",
)


def save_model(path: Path, params, config: RnnConfig, vocab_size: int) -> None:
    meta = {key: getattr(config, key) for key in CONFIG_KEYS}
    meta["vocab_size"] = vocab_size
    np.savez(path, __meta__=json.dumps(meta), **params)


def load_model(path: Path):
    archive = np.load(path, allow_pickle=False)
    meta = json.loads(str(archive["__meta__"]))
    vocab_size = meta.pop("vocab_size")
    config = RnnConfig(**meta)
    params = {k: archive[k] for k in archive.files if k != "__meta__"}
    return params, config, vocab_size


def _split_folds(entries, assignment, test_fold):
    folds = sorted(set(assignment.values()))
    if test_fold not in folds:
        raise SystemExit(f"fold {test_fold} not present in the fold plan")
    training_folds = [f for f in folds if f != test_fold]
    validation_fold = min(training_folds)
    train_seqs, val_seqs, test_entries = [], [], []
    for entry in entries:
        fold = assignment.get(entry.composition_id)
        if fold is None:
            raise SystemExit(f"composition {entry.composition_id!r} missing from fold plan")
        if fold == test_fold:
            test_entries.append(entry)
        elif fold == validation_fold:
            val_seqs.append(list(entry.tokens))
        else:
            train_seqs.append(list(entry.tokens))
    return train_seqs, val_seqs, test_entries, validation_fold


def cmd_train(args) -> int:
    entries = read_tokens(args.tokens)
    vocab_size = read_vocab_size(args.vocab)
    assignment = read_folds(args.folds)
    config = RnnConfig(
        cell=args.cell,
        units=args.units,
        embedding=args.embedding,
        batch=args.batch,
        max_len=args.max_len,
        max_epochs=args.epochs,
        patience=args.patience,
        clip=args.clip,
        learning_rate=args.learning_rate,
    )
    train_seqs, val_seqs, _, validation_fold = _split_folds(
        entries, assignment, args.fold
    )
    if not train_seqs:
        raise SystemExit("no training compositions outside the test and validation folds")
    print(
        f"train: fold {args.fold} held out, fold {validation_fold} validates, "
        f"{len(train_seqs)} training compositions, vocab {vocab_size}, "
        f"cell {config.cell}, lr {config.learning_rate}, "
        f"adam ({config.adam_beta1}, {config.adam_beta2})"
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_lines = ["epoch,train_ce,val_ce"]

    def log_hook(epoch, train_ce, val_ce):
        log_lines.append(f"{epoch},{train_ce!r},{val_ce!r}")
        print(f"epoch {epoch}: train {train_ce:.4f} val {val_ce:.4f}")

    state = train(
        train_seqs, val_seqs, config, vocab_size, seed=args.seed, log_hook=log_hook
    )
    model_path = out_dir / f"model_fold{args.fold}.npz"
    save_model(model_path, state.params, config, vocab_size)
    (out_dir / f"training_log_fold{args.fold}.csv").write_text(
        "\n".join(log_lines) + "\n"
    )
    print(
        f"train: best epoch {state.best_epoch} "
        f"(val {state.best_val_ce:.4f} bits/token) -> {model_path}"
    )
    return 0


def cmd_trace(args) -> int:
    params, config, vocab_size = load_model(Path(args.model))
    sidecar_size = read_vocab_size(args.vocab)
    if sidecar_size != vocab_size:
        raise SystemExit(
            f"vocabulary mismatch: model has {vocab_size} types, "
            f"sidecar has {sidecar_size}"
        )
    entries = read_tokens(args.tokens)
    assignment = read_folds(args.folds)
    _, _, test_entries, _ = _split_folds(entries, assignment, args.fold)
    rows = []
    for entry in sorted(test_entries, key=lambda e: e.composition_id):
        probabilities = predict_sequence(
            params, config, entry.tokens, carry_state=args.carry_state
        )
        for index, (token, p) in enumerate(zip(entry.tokens, probabilities)):
            rows.append((entry.composition_id, index, token, p))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(write_trace(rows))
    print(f"trace: {len(rows)} rows over {len(test_entries)} compositions -> {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnnlm", description="Recurrent chord language model."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--tokens", required=True, help="encoded corpus file")
        p.add_argument("--vocab", required=True, help="vocabulary sidecar")
        p.add_argument("--folds", required=True, help="fold plan CSV")
        p.add_argument("--fold", type=int, required=True, help="held-out test fold")

    p_train = sub.add_parser("train", help="train one fold's model")
    add_data_args(p_train)
    p_train.add_argument("--seed", type=int, required=True)
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--cell", choices=["lstm", "gru"], default="lstm")
    p_train.add_argument("--units", type=int, default=128)
    p_train.add_argument("--embedding", type=int, default=64)
    p_train.add_argument("--batch", type=int, default=4)
    p_train.add_argument("--max-len", type=int, default=300, dest="max_len")
    p_train.add_argument("--epochs", type=int, default=200)
    p_train.add_argument("--patience", type=int, default=10)
    p_train.add_argument("--clip", type=float, default=1.0)
    p_train.add_argument("--lr", type=float, default=1e-3, dest="learning_rate")

    p_trace = sub.add_parser("trace", help="export a test fold's trace CSV")
    add_data_args(p_trace)
    p_trace.add_argument("--model", required=True, help="saved model .npz")
    p_trace.add_argument("--out", required=True, help="trace CSV path")
    p_trace.add_argument(
        "--carry-state",
        action="store_true",
        dest="carry_state",
        help="carry hidden state across long-sequence segments",
    )

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "train":
        return cmd_train(args)
    if args.command == "trace":
        return cmd_trace(args)
    raise SystemExit(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
