"""Local key estimation by pitch-class profile correlation.

The tonal context of each chord onset is estimated from a moving window
of 16 quarter-note beats centered on the onset: the duration-weighted
pitch-class histogram of the window is correlated against all 24
rotations (12 tonics x 2 modes) of a key profile, and the best
correlation wins. Windows with a degenerate (zero-variance) histogram
carry no key signal; callers fall back to the previous onset's key and,
at the first onset, to the whole-piece histogram.

Profile weights ship in an editable data file (``data/key_profiles.txt``)
so alternative weight sets can be swapped in without code changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .ingest import SliceStream

__all__ = [
    "KeyProfile",
    "KeyEstimate",
    "UndefinedCorrelationError",
    "NoKeySignal",
    "load_profiles",
    "get_profile",
    "pearson",
    "window_histogram",
    "whole_piece_histogram",
    "score_all_keys",
    "best_key",
    "estimate_key",
    "key_track",
]

MAJOR = "major"
MINOR = "minor"


class UndefinedCorrelationError(ValueError):
    """Correlation against a zero-variance vector is undefined."""


class NoKeySignal(ValueError):
    """The window histogram carries no key information."""


@dataclass(frozen=True)
class KeyProfile:
    name: str
    major: tuple[float, ...]
    minor: tuple[float, ...]

    def __post_init__(self):
        for mode, weights in ((MAJOR, self.major), (MINOR, self.minor)):
            if len(weights) != 12:
                raise ValueError(f"{self.name} {mode}: need 12 weights")
            if len(set(weights)) < 2:
                raise ValueError(f"{self.name} {mode}: weights have zero variance")

    def weights(self, tonic: int, mode: str) -> tuple[float, ...]:
        """Profile rotated so index p holds the weight of pitch class p."""
        base = self.major if mode == MAJOR else self.minor
        return tuple(base[(p - tonic) % 12] for p in range(12))


@dataclass(frozen=True)
class KeyEstimate:
    tonic: int
    mode: str
    score: float


def load_profiles(path: str | Path | None = None) -> dict[str, KeyProfile]:
    """Load the profile table from ``path`` or the packaged default file."""
    if path is None:
        text = (
            resources.files("chordlm").joinpath("data/key_profiles.txt").read_text()
        )
    else:
        text = Path(path).read_text()
    profiles: dict[str, KeyProfile] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 25:
            raise ValueError(
                f"profile line {lineno}: expected name + 24 weights, "
                f"got {len(fields)} fields"
            )
        name = fields[0]
        values = [float(v) for v in fields[1:]]
        profiles[name] = KeyProfile(
            name=name, major=tuple(values[:12]), minor=tuple(values[12:])
        )
    if not profiles:
        raise ValueError("profile file contains no records")
    return profiles


def get_profile(name: str, path: str | Path | None = None) -> KeyProfile:
    profiles = load_profiles(path)
    if name not in profiles:
        known = ", ".join(sorted(profiles))
        raise KeyError(f"unknown key profile {name!r}; available: {known}")
    return profiles[name]


def pearson(a, b) -> float:
    """Product-moment correlation of two equal-length vectors."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("zero-variance input")
    return float((dx * dy).sum()) / (sx * sy)


# ---------------------------------------------------------------------------
# Histograms
# ---------------------------------------------------------------------------


def window_histogram(
    stream: SliceStream,
    center: Fraction,
    width: Fraction | int = 16,
    weighting: str = "duration",
) -> np.ndarray:
    """Pitch-class histogram of the window [center - w/2, center + w/2).

    With duration weighting each overlapping event contributes exactly
    its overlap with the window; with count weighting it contributes 1.
    The window is implicitly truncated at the composition boundaries
    because no events exist outside them.
    """
    if weighting not in ("duration", "count"):
        raise ValueError(f"unknown weighting {weighting!r}")
    half = Fraction(width) / 2
    lo = center - half
    hi = center + half
    bins = [Fraction(0)] * 12
    for event in stream.events:
        overlap = min(event.end, hi) - max(event.onset, lo)
        if overlap > 0:
            bins[event.pitch % 12] += overlap if weighting == "duration" else 1
    return np.array([float(v) for v in bins], dtype=np.float64)


def whole_piece_histogram(
    stream: SliceStream, weighting: str = "duration"
) -> np.ndarray:
    """Pitch-class histogram over the entire composition."""
    bins = [Fraction(0)] * 12
    for event in stream.events:
        bins[event.pitch % 12] += event.duration if weighting == "duration" else 1
    return np.array([float(v) for v in bins], dtype=np.float64)


# ---------------------------------------------------------------------------
# Key scoring
# ---------------------------------------------------------------------------


def score_all_keys(
    histogram: np.ndarray, profile: KeyProfile
) -> list[tuple[int, str, float]]:
    """Correlation of the histogram against all 24 candidate keys."""
    return [
        (tonic, mode, pearson(histogram, profile.weights(tonic, mode)))
        for mode in (MAJOR, MINOR)
        for tonic in range(12)
    ]


def best_key(histogram: np.ndarray, profile: KeyProfile) -> KeyEstimate:
    """Argmax over the 24 candidates; ties prefer lower tonic, major first."""
    if len(set(np.asarray(histogram).tolist())) < 2:
        raise NoKeySignal("histogram has zero variance")
    best: tuple[float, int, int] | None = None  # (-score, tonic, mode_rank)
    best_estimate: KeyEstimate | None = None
    for tonic, mode, score in score_all_keys(histogram, profile):
        rank = (-score, tonic, 0 if mode == MAJOR else 1)
        if best is None or rank < best:
            best = rank
            best_estimate = KeyEstimate(tonic=tonic, mode=mode, score=score)
    assert best_estimate is not None
    return best_estimate


def estimate_key(
    stream: SliceStream,
    center: Fraction,
    profile: KeyProfile,
    width: Fraction | int = 16,
    weighting: str = "duration",
) -> KeyEstimate:
    """Estimate the local key at one onset.

    Raises :class:`NoKeySignal` when the window histogram has zero
    variance; the per-composition fallback chain lives in
    :func:`key_track`.
    """
    histogram = window_histogram(stream, center, width=width, weighting=weighting)
    return best_key(histogram, profile)


def key_track(
    stream: SliceStream,
    profile: KeyProfile,
    width: Fraction | int = 16,
    weighting: str = "duration",
) -> list[KeyEstimate]:
    """Per-onset key estimates for every slice, with degenerate-window fallback.

    A window without key signal reuses the previous onset's key; at the
    first onset it falls back to the whole-piece histogram, and if even
    that is degenerate, to the most common pitch class read as a major
    tonic with score 0.
    """
    estimates: list[KeyEstimate] = []
    previous: KeyEstimate | None = None

    for slc in stream.slices:
        histogram = window_histogram(
            stream, slc.onset, width=width, weighting=weighting
        )
        try:
            estimate = best_key(histogram, profile)
        except NoKeySignal:
            if previous is not None:
                estimate = previous
            else:
                try:
                    estimate = best_key(
                        whole_piece_histogram(stream, weighting=weighting), profile
                    )
                except NoKeySignal:
                    counts = [0] * 12
                    for event in stream.events:
                        counts[event.pitch % 12] += 1
                    tonic = max(range(12), key=lambda p: (counts[p], -p))
                    estimate = KeyEstimate(tonic=tonic, mode=MAJOR, score=0.0)
        estimates.append(estimate)
        previous = estimate
    return estimates


def _format_score(score: float) -> str:
    return f"{score:.6f}" if math.isfinite(score) else "nan"


def key_trace_csv(stream: SliceStream, estimates: list[KeyEstimate]) -> str:
    """Debug CSV of the per-onset key track: onset, tonic, mode, r."""
    lines = ["onset,tonic,mode,r"]
    for slc, est in zip(stream.slices, estimates):
        lines.append(
            f"{slc.onset.numerator}/{slc.onset.denominator},"
            f"{est.tonic},{est.mode},{_format_score(est.score)}"
        )
    return "\n".join(lines) + "\n"
