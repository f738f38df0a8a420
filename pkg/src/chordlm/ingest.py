"""Standard MIDI File ingestion and full expansion into onset slices.

A composition enters the pipeline as raw SMF bytes (format 0 or 1) and
leaves as a :class:`SliceStream`: the original note events plus one
:class:`Slice` per unique onset time, where every note sounds in every
slice whose onset falls inside the note's half-open sounding interval.

All score times are exact rationals (quarter-note units), never floats,
so slice boundaries are deterministic.

Interchange file format (line-delimited, tab-separated, one file per
composition)::

    stream<TAB>composition_id<TAB>dataset_id
    note<TAB>onset_num/onset_den<TAB>dur_num/dur_den<TAB>pitch<TAB>track
    ...
    slice<TAB>composition_id<TAB>onset_num/onset_den<TAB>p1,p2,...
    ...

Note records appear before slice records; notes are sorted by
(onset, duration, pitch, track), slices by onset; pitch lists are
ascending.
Fractions are always written with an explicit denominator. The field
order is fixed so golden files are byte-stable.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "NoteEvent",
    "Slice",
    "SliceStream",
    "MidiParseError",
    "parse_midi",
    "full_expand",
    "read_interchange",
    "write_interchange",
]

PERCUSSION_CHANNEL = 9  # MIDI channel 10 (0-based index)


class MidiParseError(ValueError):
    """Raised for malformed SMF input; the message names the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, order=True)
class NoteEvent:
    """One pitched event in score time (quarter-note units)."""

    onset: Fraction
    duration: Fraction
    pitch: int
    track: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"note duration must be > 0, got {self.duration}")
        if self.onset < 0:
            raise ValueError(f"note onset must be >= 0, got {self.onset}")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch must be a MIDI number 0-127, got {self.pitch}")

    @property
    def end(self) -> Fraction:
        return self.onset + self.duration


@dataclass(frozen=True)
class Slice:
    """The set of sounding pitches at one unique onset time."""

    onset: Fraction
    pitches: tuple[int, ...]

    def __post_init__(self):
        if not self.pitches:
            raise ValueError("slice must contain at least one pitch")
        if list(self.pitches) != sorted(set(self.pitches)):
            raise ValueError("slice pitches must be sorted and deduplicated")

    @property
    def bass(self) -> int:
        return self.pitches[0]


@dataclass(frozen=True)
class SliceStream:
    """A composition's note events and their full expansion.

    The events double as the support data for windowed pitch-class
    histograms; slices alone cannot reconstruct them because note ends
    need not coincide with onsets.
    """

    composition_id: str
    dataset_id: str
    events: tuple[NoteEvent, ...]
    slices: tuple[Slice, ...] = field(default=())

    @classmethod
    def from_events(
        cls, composition_id: str, dataset_id: str, events: list[NoteEvent]
    ) -> "SliceStream":
        events = sorted(events)
        return cls(composition_id, dataset_id, tuple(events), tuple(full_expand(events)))


# ---------------------------------------------------------------------------
# SMF parsing
# ---------------------------------------------------------------------------


def _read_u32(data: bytes, pos: int) -> int:
    if pos + 4 > len(data):
        raise MidiParseError("truncated file: expected 4 bytes", pos)
    return int.from_bytes(data[pos : pos + 4], "big")


def _read_u16(data: bytes, pos: int) -> int:
    if pos + 2 > len(data):
        raise MidiParseError("truncated file: expected 2 bytes", pos)
    return int.from_bytes(data[pos : pos + 2], "big")


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    """Read an SMF variable-length quantity; returns (value, next_pos)."""
    value = 0
    for i in range(4):
        if pos >= len(data):
            raise MidiParseError("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity longer than 4 bytes", pos)


def parse_midi(
    data: bytes,
    *,
    include_percussion: bool = False,
    warnings: list[str] | None = None,
) -> list[NoteEvent]:
    """Parse SMF bytes (format 0 or 1) into note events.

    Every note-on with a matched note-off becomes one event; ticks are
    converted to rational quarter-notes via the header division.
    Overlapping same-pitch note-ons are matched first-in-first-out per
    (track, channel, pitch). Channel-10 percussion is dropped unless
    ``include_percussion`` is set. Recoverable oddities (unterminated or
    zero-length notes, orphan note-offs) are appended to ``warnings``
    when a list is supplied.
    """
    if warnings is None:
        warnings = []
    if len(data) < 14:
        raise MidiParseError("file shorter than an SMF header", 0)
    if data[0:4] != b"MThd":
        raise MidiParseError("missing MThd chunk", 0)
    header_len = _read_u32(data, 4)
    if header_len < 6:
        raise MidiParseError(f"MThd length {header_len} < 6", 4)
    fmt = _read_u16(data, 8)
    ntrks = _read_u16(data, 10)
    division = _read_u16(data, 12)
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiParseError("division must be positive", 12)

    events: list[NoteEvent] = []
    pos = 8 + header_len
    track_index = 0
    while track_index < ntrks:
        if pos >= len(data):
            raise MidiParseError(
                f"expected {ntrks} track chunks, found {track_index}", pos
            )
        chunk_type = data[pos : pos + 4]
        if len(chunk_type) < 4:
            raise MidiParseError("truncated chunk header", pos)
        chunk_len = _read_u32(data, pos + 4)
        chunk_start = pos + 8
        chunk_end = chunk_start + chunk_len
        if chunk_end > len(data):
            raise MidiParseError(
                f"chunk length {chunk_len} overruns end of file", pos + 4
            )
        if chunk_type != b"MTrk":
            # Unknown chunk types are skipped per the SMF spec.
            pos = chunk_end
            continue
        _parse_track(
            data,
            chunk_start,
            chunk_end,
            track_index,
            division,
            include_percussion,
            events,
            warnings,
        )
        pos = chunk_end
        track_index += 1

    events.sort()
    return events


def _parse_track(
    data: bytes,
    start: int,
    end: int,
    track: int,
    division: int,
    include_percussion: bool,
    events: list[NoteEvent],
    warnings: list[str],
) -> None:
    pos = start
    tick = 0
    running_status: int | None = None
    # FIFO queues of open note-on ticks, keyed by (channel, pitch).
    open_notes: dict[tuple[int, int], list[int]] = {}

    def emit(channel: int, pitch: int, on_tick: int, off_tick: int) -> None:
        if not include_percussion and channel == PERCUSSION_CHANNEL:
            return
        if off_tick <= on_tick:
            warnings.append(
                f"track {track}: zero-duration note pitch {pitch} "
                f"at tick {on_tick} dropped"
            )
            return
        events.append(
            NoteEvent(
                onset=Fraction(on_tick, division),
                duration=Fraction(off_tick - on_tick, division),
                pitch=pitch,
                track=track,
            )
        )

    while pos < end:
        delta, pos = _read_varint(data, pos)
        tick += delta
        if pos >= end:
            raise MidiParseError("track data ends after a delta time", pos)
        byte = data[pos]
        if byte & 0x80:
            status = byte
            pos += 1
            if status < 0xF0:
                running_status = status
        else:
            if running_status is None:
                raise MidiParseError(
                    f"data byte 0x{byte:02x} with no running status", pos
                )
            status = running_status

        kind = status & 0xF0
        channel = status & 0x0F
        if kind in (0x80, 0x90, 0xA0, 0xB0, 0xE0):
            if pos + 2 > end:
                raise MidiParseError("truncated channel event", pos)
            d1, d2 = data[pos], data[pos + 1]
            pos += 2
            if kind == 0x90 and d2 > 0:
                open_notes.setdefault((channel, d1), []).append(tick)
            elif kind == 0x80 or (kind == 0x90 and d2 == 0):
                queue = open_notes.get((channel, d1))
                if queue:
                    emit(channel, d1, queue.pop(0), tick)
                else:
                    warnings.append(
                        f"track {track}: note-off pitch {d1} at tick {tick} "
                        "without a matching note-on"
                    )
        elif kind in (0xC0, 0xD0):
            if pos + 1 > end:
                raise MidiParseError("truncated channel event", pos)
            pos += 1
        elif status in (0xF0, 0xF7):
            running_status = None
            length, pos = _read_varint(data, pos)
            pos += length
            if pos > end:
                raise MidiParseError("sysex event overruns track", pos)
        elif status == 0xFF:
            if pos >= end:
                raise MidiParseError("truncated meta event", pos)
            pos += 1  # meta type byte
            length, pos = _read_varint(data, pos)
            pos += length
            if pos > end:
                raise MidiParseError("meta event overruns track", pos)
        else:
            raise MidiParseError(f"unexpected status byte 0x{status:02x}", pos - 1)

    for (channel, pitch), ticks in sorted(open_notes.items()):
        for on_tick in ticks:
            warnings.append(
                f"track {track}: note-on pitch {pitch} at tick {on_tick} "
                "had no note-off; closed at end of track"
            )
            emit(channel, pitch, on_tick, tick)


# ---------------------------------------------------------------------------
# Full expansion
# ---------------------------------------------------------------------------


def full_expand(events: list[NoteEvent]) -> list[Slice]:
    """Expand note events into one slice per unique onset time.

    A note with interval [onset, onset + duration) sounds in every slice
    whose onset lies inside that interval; identical MIDI numbers
    collapse within a slice.
    """
    if not events:
        return []
    ordered = sorted(events, key=lambda e: e.onset)
    onsets = sorted({e.onset for e in events})
    # min-heap of (end, pitch) for notes currently sounding
    active: list[tuple[Fraction, int]] = []
    slices: list[Slice] = []
    i = 0
    for onset in onsets:
        while i < len(ordered) and ordered[i].onset == onset:
            heapq.heappush(active, (ordered[i].end, ordered[i].pitch))
            i += 1
        while active and active[0][0] <= onset:
            heapq.heappop(active)
        pitches = sorted({pitch for _, pitch in active})
        slices.append(Slice(onset=onset, pitches=tuple(pitches)))
    return slices


# ---------------------------------------------------------------------------
# Interchange serialization
# ---------------------------------------------------------------------------


def _frac_text(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _parse_frac(text: str, where: str) -> Fraction:
    num, _, den = text.partition("/")
    if not den:
        raise ValueError(f"{where}: malformed rational {text!r}")
    return Fraction(int(num), int(den))


def write_interchange(stream: SliceStream) -> str:
    """Serialize a stream to the interchange text form."""
    lines = [f"stream\t{stream.composition_id}\t{stream.dataset_id}"]
    for event in stream.events:
        lines.append(
            "note\t{}\t{}\t{}\t{}".format(
                _frac_text(event.onset),
                _frac_text(event.duration),
                event.pitch,
                event.track,
            )
        )
    for slc in stream.slices:
        lines.append(
            "slice\t{}\t{}\t{}".format(
                stream.composition_id,
                _frac_text(slc.onset),
                ",".join(str(p) for p in slc.pitches),
            )
        )
    return "\n".join(lines) + "\n"


def read_interchange(text: str) -> SliceStream:
    """Parse interchange text back into a SliceStream."""
    composition_id = dataset_id = None
    events: list[NoteEvent] = []
    slices: list[Slice] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        kind = fields[0]
        if kind == "stream":
            if len(fields) != 3:
                raise ValueError(f"line {lineno}: stream record needs 3 fields")
            composition_id, dataset_id = fields[1], fields[2]
        elif kind == "note":
            if len(fields) != 5:
                raise ValueError(f"line {lineno}: note record needs 5 fields")
            events.append(
                NoteEvent(
                    onset=_parse_frac(fields[1], f"line {lineno}"),
                    duration=_parse_frac(fields[2], f"line {lineno}"),
                    pitch=int(fields[3]),
                    track=int(fields[4]),
                )
            )
        elif kind == "slice":
            if len(fields) != 4:
                raise ValueError(f"line {lineno}: slice record needs 4 fields")
            if composition_id is not None and fields[1] != composition_id:
                raise ValueError(
                    f"line {lineno}: slice belongs to {fields[1]!r}, "
                    f"stream is {composition_id!r}"
                )
            slices.append(
                Slice(
                    onset=_parse_frac(fields[2], f"line {lineno}"),
                    pitches=tuple(int(p) for p in fields[3].split(",")),
                )
            )
        else:
            raise ValueError(f"line {lineno}: unknown record kind {kind!r}")
    if composition_id is None or dataset_id is None:
        raise ValueError("interchange text has no stream header record")
    return SliceStream(
        composition_id=composition_id,
        dataset_id=dataset_id,
        events=tuple(events),
        slices=tuple(slices),
    )
