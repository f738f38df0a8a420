"""Readers for the corpus pipeline's file formats and the trace writer.

These parse the documented external formats directly; the two packages
share files, not code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class CorpusEntry:
    composition_id: str
    dataset_id: str
    tokens: tuple[int, ...]


def read_tokens(path: str | Path) -> list[CorpusEntry]:
    """Encoded-corpus file: ``tokens<TAB>comp<TAB>dataset<TAB>id id ...``."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if fields[0] != "tokens" or len(fields) != 4:
            raise ValueError(f"{path}:{lineno}: malformed token record")
        tokens = tuple(int(t) for t in fields[3].split()) if fields[3] else ()
        entries.append(CorpusEntry(fields[1], fields[2], tokens))
    if not entries:
        raise ValueError(f"{path}: no token records")
    return entries


def read_vocab_size(path: str | Path) -> int:
    """Vocabulary sidecar: ``vocab<TAB>id<TAB>S/I<TAB>count`` with dense ids."""
    size = 0
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if fields[0] != "vocab" or len(fields) != 4:
            raise ValueError(f"{path}:{lineno}: malformed vocabulary record")
        if int(fields[1]) != size:
            raise ValueError(f"{path}:{lineno}: vocabulary ids must be dense from 0")
        size += 1
    if size == 0:
        raise ValueError(f"{path}: empty vocabulary")
    return size


def read_folds(path: str | Path) -> dict[str, int]:
    """Fold plan CSV: ``composition,dataset,fold`` with a header line."""
    assignment: dict[str, int] = {}
    lines = Path(path).read_text().splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        composition_id, _, fold = line.rsplit(",", 2)
        assignment[composition_id] = int(fold)
    if not assignment:
        raise ValueError(f"{path}: no fold assignments")
    return assignment


def write_trace(rows) -> str:
    """Per-token probability trace CSV, one row per predicted token.

    ``rows`` yields (composition_id, index, token_id, probability).
    The schema matches the finite-context trace files so downstream
    cross-entropy is model-agnostic.
    """
    lines = ["composition,index,token_id,p,neg_log2_p"]
    for composition_id, index, token_id, p in rows:
        lines.append(
            f"{composition_id},{index},{token_id},{float(p)!r},"
            f"{float(-math.log2(p))!r}"
        )
    return "\n".join(lines) + "\n"
