"""MIDI parsing and full-expansion tests."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chordlm.ingest import (
    MidiParseError,
    NoteEvent,
    Slice,
    SliceStream,
    full_expand,
    parse_midi,
    read_interchange,
    write_interchange,
)

from fixtures import bach_fragment_events, bach_fragment_midi_tracks
from midi_dump_oracle import dump_note_multiset
from smf_writer import build_smf


def brute_force_expand(events):
    """Oracle: test every note's sounding interval at each distinct onset."""
    onsets = sorted({e.onset for e in events})
    result = []
    for onset in onsets:
        sounding = sorted(
            {e.pitch for e in events if e.onset <= onset < e.onset + e.duration}
        )
        result.append((onset, tuple(sounding)))
    return result


def note(onset, duration, pitch, track=0):
    return NoteEvent(
        onset=Fraction(onset), duration=Fraction(duration), pitch=pitch, track=track
    )


class TestParseMidi:
    def test_single_note(self):
        data = build_smf([[(0, 480, 60, 0)]], division=480)
        events = parse_midi(data)
        assert events == [note(0, 1, 60)]

    def test_empty_track_list(self):
        data = build_smf([], division=480)
        assert parse_midi(data) == []

    def test_tick_to_quarter_conversion(self):
        data = build_smf([[(120, 360, 72, 0)]], division=480)
        (event,) = parse_midi(data)
        assert event.onset == Fraction(1, 4)
        assert event.duration == Fraction(3, 4)

    def test_three_voices_match_independent_dump(self):
        tracks = bach_fragment_midi_tracks()[:3]
        data = build_smf(tracks, division=480)
        events = parse_midi(data)
        ours = sorted((e.onset, e.duration, e.pitch) for e in events)
        assert ours == dump_note_multiset(data)

    def test_overlapping_same_pitch_fifo(self):
        # Two overlapping middle Cs: the first off closes the first on,
        # so both notes keep their written one-quarter length.
        tracks = [[(0, 480, 60, 0), (240, 480, 60, 0)]]
        data = build_smf(tracks, division=480)
        events = sorted(parse_midi(data))
        assert [(e.onset, e.duration) for e in events] == [
            (Fraction(0), Fraction(1)),
            (Fraction(1, 2), Fraction(1)),
        ]

    def test_unterminated_note_closed_at_track_end(self):
        # note-on with no note-off; another note defines the track length.
        on_only = bytes([0x90, 60, 64])
        track = (
            b"\x00" + on_only
            + b"\x00" + bytes([0x90, 64, 64])
            + bytes([0x83, 0x60]) + bytes([0x80, 64, 0])  # delta 480
            + b"\x00" + bytes([0xFF, 0x2F, 0x00])
        )
        data = (
            b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
            + (1).to_bytes(2, "big") + (480).to_bytes(2, "big")
            + b"MTrk" + len(track).to_bytes(4, "big") + track
        )
        warnings: list[str] = []
        events = parse_midi(data, warnings=warnings)
        assert sorted(e.pitch for e in events) == [60, 64]
        assert any("no note-off" in w for w in warnings)

    def test_zero_duration_note_dropped_with_warning(self):
        data = build_smf([[(0, 0, 60, 0), (0, 480, 64, 0)]], division=480)
        warnings: list[str] = []
        events = parse_midi(data, warnings=warnings)
        assert [e.pitch for e in events] == [64]
        assert any("zero-duration" in w for w in warnings)

    def test_percussion_channel_excluded_by_default(self):
        data = build_smf([[(0, 480, 36, 9), (0, 480, 60, 0)]], division=480)
        assert [e.pitch for e in parse_midi(data)] == [60]
        included = parse_midi(data, include_percussion=True)
        assert sorted(e.pitch for e in included) == [36, 60]

    def test_bad_header_names_offset(self):
        with pytest.raises(MidiParseError, match="byte offset 0"):
            parse_midi(b"XXXX" + bytes(20))

    def test_overrunning_chunk_names_offset(self):
        good = build_smf([[(0, 480, 60, 0)]], division=480)
        truncated = good[:-4]
        with pytest.raises(MidiParseError, match="byte offset"):
            parse_midi(truncated)

    def test_smpte_division_rejected(self):
        data = bytearray(build_smf([[(0, 480, 60, 0)]], division=480))
        data[12] = 0xE7  # negative SMPTE code
        with pytest.raises(MidiParseError, match="SMPTE"):
            parse_midi(bytes(data))

    def test_format_two_rejected(self):
        data = bytearray(build_smf([[(0, 480, 60, 0)]], division=480))
        data[9] = 2
        with pytest.raises(MidiParseError, match="format 2"):
            parse_midi(bytes(data))

    def test_running_status(self):
        # Two note-ons sharing one status byte, later closed.
        track = (
            b"\x00" + bytes([0x90, 60, 64])
            + b"\x00" + bytes([64, 64])  # running status note-on
            + bytes([0x83, 0x60]) + bytes([60, 0])  # running status off (vel 0)
            + b"\x00" + bytes([64, 0])
            + b"\x00" + bytes([0xFF, 0x2F, 0x00])
        )
        data = (
            b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
            + (1).to_bytes(2, "big") + (480).to_bytes(2, "big")
            + b"MTrk" + len(track).to_bytes(4, "big") + track
        )
        events = parse_midi(data)
        assert sorted((e.pitch, e.duration) for e in events) == [
            (60, Fraction(1)),
            (64, Fraction(1)),
        ]


event_sets = st.lists(
    st.tuples(
        st.integers(min_value=0, max_value=40),  # onset in eighths
        st.integers(min_value=1, max_value=16),  # duration in eighths
        st.integers(min_value=30, max_value=90),  # pitch
    ),
    min_size=1,
    max_size=20,
)


class TestFullExpand:
    def test_sustained_note_duplicated(self):
        events = [note(0, 2, 60), note(1, 1, 64)]
        slices = full_expand(events)
        assert [(s.onset, s.pitches) for s in slices] == [
            (Fraction(0), (60,)),
            (Fraction(1), (60, 64)),
        ]

    def test_empty_input(self):
        assert full_expand([]) == []

    def test_bach_fragment_has_nine_onsets(self):
        slices = full_expand(bach_fragment_events())
        assert len(slices) == 9

    def test_bach_fragment_first_slice(self):
        slices = full_expand(bach_fragment_events())
        assert slices[0].pitches == (43, 59, 62, 67)
        assert slices[0].bass == 43

    def test_identical_pitches_collapse(self):
        events = [note(0, 1, 60, track=0), note(0, 1, 60, track=1)]
        (slc,) = full_expand(events)
        assert slc.pitches == (60,)

    @settings(max_examples=300, deadline=None)
    @given(event_sets)
    def test_matches_brute_force_oracle(self, raw):
        events = [
            note(Fraction(onset, 2), Fraction(duration, 2), pitch)
            for onset, duration, pitch in raw
        ]
        slices = full_expand(events)
        assert [(s.onset, s.pitches) for s in slices] == brute_force_expand(events)

    @settings(max_examples=100, deadline=None)
    @given(event_sets)
    def test_slice_count_equals_distinct_onsets(self, raw):
        events = [
            note(Fraction(onset, 2), Fraction(duration, 2), pitch)
            for onset, duration, pitch in raw
        ]
        slices = full_expand(events)
        assert len(slices) == len({e.onset for e in events})
        onsets = [s.onset for s in slices]
        assert onsets == sorted(onsets)
        assert all(
            a < b for a, b in zip(onsets, onsets[1:])
        ), "onsets must strictly increase"

    @settings(max_examples=100, deadline=None)
    @given(event_sets)
    def test_every_sounding_event_is_present(self, raw):
        events = [
            note(Fraction(onset, 2), Fraction(duration, 2), pitch)
            for onset, duration, pitch in raw
        ]
        for slc in full_expand(events):
            for event in events:
                if event.onset <= slc.onset < event.end:
                    assert event.pitch in slc.pitches


class TestInterchange:
    def test_round_trip_identity(self):
        stream = SliceStream.from_events(
            "frag", "chorale", bach_fragment_events()
        )
        assert read_interchange(write_interchange(stream)) == stream

    @settings(max_examples=100, deadline=None)
    @given(event_sets)
    def test_round_trip_random(self, raw):
        events = [
            note(Fraction(onset, 2), Fraction(duration, 2), pitch)
            for onset, duration, pitch in raw
        ]
        stream = SliceStream.from_events("x", "d", events)
        assert read_interchange(write_interchange(stream)) == stream

    def test_slice_record_field_order(self):
        stream = SliceStream.from_events("comp1", "ds", [note(0, 1, 60)])
        text = write_interchange(stream)
        assert "slice\tcomp1\t0/1\t60" in text.splitlines()

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            NoteEvent(onset=Fraction(0), duration=Fraction(0), pitch=60)
        with pytest.raises(ValueError):
            Slice(onset=Fraction(0), pitches=())
        with pytest.raises(ValueError):
            Slice(onset=Fraction(0), pitches=(64, 60))
