"""Chord-type encoding of onset slices.

Each slice becomes an ordered pair (S, I): S holds up to three
deduplicated interval classes above the bass (semitones mod 12, sorted
ascending, undefined slots trailing), and I is the chromatic scale
degree of the bass relative to the local tonic (0 = tonic,
7 = dominant). Interval class 0 (octave doubling of the bass) is kept
only when it is the sole class; slices with more than three distinct
classes keep the three smallest by default.

The textual form of a chord type is ``"4.7._/0"``: S slots joined by
dots with ``_`` for undefined, then ``/`` and the bass degree.

Encoded-corpus file format (line-delimited, tab-separated)::

    tokens<TAB>composition_id<TAB>dataset_id<TAB>id id id ...

Vocabulary sidecar format::

    vocab<TAB>id<TAB>S/I text<TAB>count
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from collections import Counter

from .ingest import Slice
from .keyscape import KeyEstimate

__all__ = [
    "ChordType",
    "Vocabulary",
    "EncodedStream",
    "encode_slice",
    "reduce_interval_classes",
    "enumerate_s_domain",
    "build_vocabulary",
    "chord_type_text",
    "parse_chord_type_text",
    "write_encoded_corpus",
    "read_encoded_corpus",
    "write_vocabulary",
    "read_vocabulary",
]

S_SLOTS = 3
MONOPHONIC_S: tuple[int | None, ...] = (None, None, None)

# How slices with more than three distinct interval classes are reduced.
OVERFLOW_SMALLEST = "smallest"  # keep the three smallest classes
OVERFLOW_FREQUENT = "frequent"  # keep the three most frequent in the slice


@dataclass(frozen=True)
class ChordType:
    """One chord token: interval-class tuple S plus bass scale degree I."""

    s: tuple[int | None, int | None, int | None]
    i: int

    def __post_init__(self):
        if len(self.s) != S_SLOTS:
            raise ValueError(f"S must have {S_SLOTS} slots, got {len(self.s)}")
        defined = [v for v in self.s if v is not None]
        if any(v is not None for v in self.s[len(defined):]):
            raise ValueError(f"undefined slots must trail: {self.s}")
        if len(set(defined)) != len(defined):
            raise ValueError(f"duplicate interval classes: {self.s}")
        if defined != sorted(defined):
            raise ValueError(f"interval classes must be ascending: {self.s}")
        if any(not 0 <= v <= 11 for v in defined):
            raise ValueError(f"interval classes must be 0-11: {self.s}")
        if 0 in defined and len(defined) > 1:
            raise ValueError("class 0 is only admitted alone")
        if not 0 <= self.i <= 11:
            raise ValueError(f"bass degree must be 0-11, got {self.i}")

    @property
    def monophonic(self) -> bool:
        return self.s == MONOPHONIC_S

    def sort_key(self) -> tuple:
        return tuple(12 if v is None else v for v in self.s) + (self.i,)


def reduce_interval_classes(
    classes, counts: Counter | None = None, overflow: str = OVERFLOW_SMALLEST
) -> tuple[int | None, int | None, int | None]:
    """Canonicalize a collection of interval classes into an S tuple.

    Deduplicates, drops class 0 unless it is the only class, resolves
    more than three survivors per the overflow rule, sorts ascending and
    pads with undefined slots.
    """
    distinct = set(classes)
    if not all(0 <= c <= 11 for c in distinct):
        raise ValueError(f"interval classes must be 0-11: {sorted(distinct)}")
    if len(distinct) > 1:
        distinct.discard(0)
    if len(distinct) > S_SLOTS:
        if overflow == OVERFLOW_SMALLEST:
            kept = sorted(distinct)[:S_SLOTS]
        elif overflow == OVERFLOW_FREQUENT:
            if counts is None:
                raise ValueError("overflow='frequent' needs per-class counts")
            # Most frequent first; ties prefer the smaller class.
            kept = sorted(distinct, key=lambda c: (-counts[c], c))[:S_SLOTS]
        else:
            raise ValueError(f"unknown overflow rule {overflow!r}")
    else:
        kept = sorted(distinct)
    kept = sorted(kept)
    padded = list(kept) + [None] * (S_SLOTS - len(kept))
    return (padded[0], padded[1], padded[2])


def encode_slice(
    slc: Slice, key: KeyEstimate, overflow: str = OVERFLOW_SMALLEST
) -> ChordType:
    """Encode one slice against its local key estimate."""
    bass = slc.bass
    intervals = [(p - bass) % 12 for p in slc.pitches if p != bass]
    s = reduce_interval_classes(intervals, counts=Counter(intervals), overflow=overflow)
    i = (bass % 12 - key.tonic) % 12
    return ChordType(s=s, i=i)


def enumerate_s_domain() -> frozenset[tuple[int | None, int | None, int | None]]:
    """All canonical S values: the empty tuple, the sole-class-0 singleton,
    and every ascending subset of classes 1-11 of size one to three."""
    domain = {MONOPHONIC_S, (0, None, None)}
    for size in (1, 2, 3):
        for combo in combinations(range(1, 12), size):
            padded = list(combo) + [None] * (S_SLOTS - size)
            domain.add((padded[0], padded[1], padded[2]))
    return frozenset(domain)


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------


class Vocabulary:
    """Bijection between chord types and dense integer ids, with counts.

    Ids are assigned in canonical sort order of the chord types so the
    mapping is independent of corpus file ordering.
    """

    def __init__(self, types: list[ChordType], counts: list[int]):
        if len(types) != len(counts):
            raise ValueError("types and counts must align")
        if sorted(types, key=ChordType.sort_key) != types:
            raise ValueError("types must be in canonical sort order")
        self._types = list(types)
        self._counts = list(counts)
        self._ids = {t: i for i, t in enumerate(types)}
        if len(self._ids) != len(types):
            raise ValueError("duplicate chord types")

    def __len__(self) -> int:
        return len(self._types)

    def __contains__(self, chord_type: ChordType) -> bool:
        return chord_type in self._ids

    def encode(self, chord_type: ChordType) -> int:
        return self._ids[chord_type]

    def decode(self, token_id: int) -> ChordType:
        return self._types[token_id]

    def count(self, token_id: int) -> int:
        return self._counts[token_id]

    @property
    def counts(self) -> list[int]:
        return list(self._counts)

    def monophonic_ids(self) -> frozenset[int]:
        return frozenset(
            i for i, t in enumerate(self._types) if t.monophonic
        )


def build_vocabulary(corpus: list[list[ChordType]]) -> Vocabulary:
    """Collect the distinct chord types of a corpus with their frequencies."""
    if not corpus:
        raise ValueError("corpus must be nonempty")
    counter: Counter[ChordType] = Counter()
    for tokens in corpus:
        counter.update(tokens)
    types = sorted(counter, key=ChordType.sort_key)
    return Vocabulary(types, [counter[t] for t in types])


@dataclass(frozen=True)
class EncodedStream:
    """A composition as a token-id sequence over a fixed vocabulary."""

    composition_id: str
    dataset_id: str
    tokens: tuple[int, ...]


# ---------------------------------------------------------------------------
# Textual forms and file IO
# ---------------------------------------------------------------------------


def chord_type_text(chord_type: ChordType) -> str:
    s_text = ".".join("_" if v is None else str(v) for v in chord_type.s)
    return f"{s_text}/{chord_type.i}"


def parse_chord_type_text(text: str) -> ChordType:
    s_text, _, i_text = text.partition("/")
    if not i_text:
        raise ValueError(f"malformed chord type text {text!r}")
    slots = s_text.split(".")
    if len(slots) != S_SLOTS:
        raise ValueError(f"malformed S in {text!r}")
    s = tuple(None if v == "_" else int(v) for v in slots)
    return ChordType(s=(s[0], s[1], s[2]), i=int(i_text))


def write_vocabulary(vocab: Vocabulary) -> str:
    lines = []
    for token_id in range(len(vocab)):
        lines.append(
            f"vocab\t{token_id}\t{chord_type_text(vocab.decode(token_id))}"
            f"\t{vocab.count(token_id)}"
        )
    return "\n".join(lines) + "\n"


def read_vocabulary(text: str) -> Vocabulary:
    types: list[ChordType] = []
    counts: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if fields[0] != "vocab" or len(fields) != 4:
            raise ValueError(f"line {lineno}: malformed vocabulary record")
        if int(fields[1]) != len(types):
            raise ValueError(f"line {lineno}: ids must be contiguous from 0")
        types.append(parse_chord_type_text(fields[2]))
        counts.append(int(fields[3]))
    return Vocabulary(types, counts)


def write_encoded_corpus(streams: list[EncodedStream]) -> str:
    lines = []
    for stream in streams:
        token_text = " ".join(str(t) for t in stream.tokens)
        lines.append(
            f"tokens\t{stream.composition_id}\t{stream.dataset_id}\t{token_text}"
        )
    return "\n".join(lines) + "\n"


def read_encoded_corpus(text: str) -> list[EncodedStream]:
    streams = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if fields[0] != "tokens" or len(fields) != 4:
            raise ValueError(f"line {lineno}: malformed token record")
        tokens = tuple(int(t) for t in fields[3].split()) if fields[3] else ()
        streams.append(
            EncodedStream(
                composition_id=fields[1], dataset_id=fields[2], tokens=tokens
            )
        )
    return streams
