"""Shared musical fixtures: the chorale-opening fragment and a
synthetic chorale-like corpus generator.

The fragment is the four-voice opening of "Aus meines Herzens Grunde"
(pickup plus the first two full measures, 3/4, G major), with the
tenor's passing eighth-note pairs in both full measures. Its full
expansion has exactly 9 unique onsets and its first harmony has the
tonic in the bass.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from chordlm.ingest import NoteEvent, SliceStream

Q = Fraction(1)  # quarter note
E = Fraction(1, 2)  # eighth note

# (onset, duration, pitch, track): track 0 soprano .. track 3 bass
BACH_FRAGMENT_NOTES = [
    # pickup beat
    (0, Q, 67, 0), (0, Q, 62, 1), (0, Q, 59, 2), (0, Q, 43, 3),
    # m. 1
    (1, Q, 67, 0), (1, Q, 62, 1), (1, Q, 59, 2), (1, Q, 55, 3),
    (2, Q, 67, 0), (2, Q, 64, 1), (2, E, 60, 2), (Fraction(5, 2), E, 59, 2), (2, Q, 52, 3),
    (3, Q, 69, 0), (3, Q, 62, 1), (3, Q, 57, 2), (3, Q, 54, 3),
    # m. 2
    (4, Q, 71, 0), (4, Q, 62, 1), (4, Q, 55, 2), (4, Q, 55, 3),
    (5, Q, 71, 0), (5, Q, 62, 1), (5, E, 55, 2), (Fraction(11, 2), E, 54, 2), (5, Q, 50, 3),
    (6, Q, 72, 0), (6, Q, 60, 1), (6, Q, 55, 2), (6, Q, 52, 3),
]


def bach_fragment_events() -> list[NoteEvent]:
    return [
        NoteEvent(onset=Fraction(onset), duration=Fraction(duration), pitch=pitch, track=track)
        for onset, duration, pitch, track in BACH_FRAGMENT_NOTES
    ]


def bach_fragment_stream() -> SliceStream:
    return SliceStream.from_events("bach_fragment", "chorale", bach_fragment_events())


def bach_fragment_midi_tracks(division: int = 480):
    """The fragment as four SMF tracks of (onset, dur, pitch, channel) ticks."""
    tracks: list[list[tuple[int, int, int, int]]] = [[], [], [], []]
    for onset, duration, pitch, track in BACH_FRAGMENT_NOTES:
        tracks[track].append(
            (
                int(Fraction(onset) * division),
                int(Fraction(duration) * division),
                pitch,
                0,
            )
        )
    return tracks


# ---------------------------------------------------------------------------
# Synthetic chorale-like corpus
# ---------------------------------------------------------------------------

# Four-voice templates (soprano, alto, tenor, bass) for diatonic degrees
# of a major key, as semitone offsets from the tonic's MIDI root.
_CHORD_TEMPLATES = {
    "I": (12, 7, 4, 0),
    "I6": (12, 7, 0, 4),
    "ii": (14, 9, 5, 2),
    "IV": (12, 9, 5, -7),
    "V": (14, 11, 7, -5),
    "V6": (14, 7, 2, -1),
    "V7": (17, 11, 5, -5),
    "vi": (16, 12, 9, -3),
}

_TRANSITIONS = {
    "I": ["IV", "V", "vi", "ii", "I6", "V7"],
    "I6": ["IV", "ii", "V"],
    "ii": ["V", "V7", "V6"],
    "IV": ["V", "V7", "I", "ii"],
    "V": ["I", "vi", "I6"],
    "V6": ["I", "I6"],
    "V7": ["I", "vi"],
    "vi": ["IV", "ii", "I6"],
}


def synthetic_corpus_tracks(
    pieces: int = 24,
    seed: int = 0,
    min_len: int = 24,
    max_len: int = 48,
    division: int = 480,
):
    """Generate SMF track lists for a corpus of chorale-like pieces.

    All pieces share one chord grammar (with per-piece transposition),
    so cross-piece statistics dominate within-piece novelty.
    """
    rng = np.random.default_rng(seed)
    corpus = []
    for _ in range(pieces):
        root = 55 + int(rng.integers(-3, 4))  # tonic root near G3
        length = int(rng.integers(min_len, max_len + 1))
        state = "I"
        tracks: list[list[tuple[int, int, int, int]]] = [[], [], [], []]
        tick = 0
        for step in range(length):
            template = _CHORD_TEMPLATES[state]
            for voice, offset in enumerate(template):
                tracks[voice].append((tick, division, root + offset, 0))
            tick += division
            state = _TRANSITIONS[state][int(rng.integers(0, len(_TRANSITIONS[state])))]
        # Cadence: close on the tonic.
        for voice, offset in enumerate(_CHORD_TEMPLATES["I"]):
            tracks[voice].append((tick, 2 * division, root + offset, 0))
        corpus.append(tracks)
    return corpus


def write_synthetic_corpus(directory, pieces=24, seed=0, division=480):
    """Write the synthetic corpus as .mid files; returns the file list."""
    from smf_writer import build_smf

    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for index, tracks in enumerate(
        synthetic_corpus_tracks(pieces=pieces, seed=seed, division=division)
    ):
        path = directory / f"piece{index:03d}.mid"
        path.write_bytes(build_smf(tracks, division=division, fmt=1))
        paths.append(path)
    return paths
