"""Acceptance suite: every exit criterion at its stated tolerance.

Each test is one criterion; the conftest hook prints one PASS/FAIL line
per criterion. The full-corpus directional check needs the public Bach
chorale MIDI set (point CHORDLM_BACH_DIR at it); without the corpus
that check is skipped and the synthetic-corpus directional check still
exercises the complete pipeline.
"""

import itertools
import math
import os
import time
from bisect import bisect_left
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from chordlm import cli
from chordlm.encoder import encode_slice, enumerate_s_domain
from chordlm.evalkit import (
    bootstrap_ci,
    bottom_decile_ids,
    compute_predictors,
    cross_entropy,
    stepwise_regression,
    zeroth_order_distribution,
)
from chordlm.ingest import NoteEvent, Slice, full_expand
from chordlm.keyscape import KeyEstimate
from chordlm.ppm import ContextTrie, ModelConfig, predict

from fixtures import bach_fragment_events, write_synthetic_corpus
from ppm_reference import reference_predict
from stat_oracles import normal_equations_ols, reference_bca
from test_evalkit import _random_records

BACH_DIR = os.environ.get("CHORDLM_BACH_DIR", "data/bach_chorales")


def test_domain_enumeration_233():
    start = time.perf_counter()
    domain = enumerate_s_domain()
    elapsed = time.perf_counter() - start
    assert len(domain) == 233
    assert elapsed < 1.0


def test_encoder_reductions_and_properties():
    # The two worked reductions.
    slc = Slice(onset=Fraction(0), pitches=(60, 64, 67, 72))  # {4, 7, 0}
    key = KeyEstimate(tonic=0, mode="major", score=1.0)
    assert encode_slice(slc, key).s == (4, 7, None)
    slc = Slice(onset=Fraction(0), pitches=(60, 64, 70, 76))  # {4, 10, 4}
    assert encode_slice(slc, key).s == (4, 10, None)
    slc = Slice(onset=Fraction(0), pitches=(60, 64, 70, 82))  # {4, 10, 10}
    assert encode_slice(slc, key).s == (4, 10, None)

    # Property suite on 10,000 random slices.
    rng = np.random.default_rng(233)
    for _ in range(10_000):
        size = int(rng.integers(1, 7))
        pitches = sorted(set(int(p) for p in rng.integers(24, 97, size=size)))
        tonic = int(rng.integers(0, 12))
        key = KeyEstimate(tonic=tonic, mode="major", score=0.5)
        slc = Slice(onset=Fraction(0), pitches=tuple(pitches))
        base = encode_slice(slc, key)

        # Permutation invariance: slice construction canonicalizes any order.
        shuffled = list(pitches)
        rng.shuffle(shuffled)
        assert (
            encode_slice(Slice(onset=Fraction(0), pitches=tuple(sorted(set(shuffled)))), key)
            == base
        )

        # Octave invariance of an upper voice.
        if len(pitches) >= 2:
            index = int(rng.integers(1, len(pitches)))
            moved = list(pitches)
            candidate = moved[index] + (12 if rng.random() < 0.5 else -12)
            if candidate <= slc.bass or candidate > 127:
                candidate = moved[index] + 12
            if candidate <= 127:
                moved[index] = candidate
                moved_slice = Slice(
                    onset=Fraction(0), pitches=tuple(sorted(set(moved)))
                )
                assert encode_slice(moved_slice, key) == base

        # Transposition covariance of slice plus tonic.
        shift = int(rng.integers(-11, 12))
        transposed = [p + shift for p in pitches]
        if min(transposed) >= 0 and max(transposed) <= 127:
            moved_key = KeyEstimate(
                tonic=(tonic + shift) % 12, mode="major", score=0.5
            )
            assert (
                encode_slice(
                    Slice(onset=Fraction(0), pitches=tuple(transposed)), moved_key
                )
                == base
            )


def test_full_expansion_oracle_and_bach_fragment():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        count = int(rng.integers(1, 21))
        events = [
            NoteEvent(
                onset=Fraction(int(rng.integers(0, 40)), 2),
                duration=Fraction(int(rng.integers(1, 17)), 2),
                pitch=int(rng.integers(30, 90)),
            )
            for _ in range(count)
        ]
        slices = full_expand(events)
        onsets = sorted({e.onset for e in events})
        assert [s.onset for s in slices] == onsets
        for slc in slices:
            sounding = sorted(
                {e.pitch for e in events if e.onset <= slc.onset < e.end}
            )
            assert list(slc.pitches) == sounding

    slices = full_expand(bach_fragment_events())
    assert len(slices) == 9
    # The fragment reads in G major and opens with the tonic in the bass.
    first = encode_slice(slices[0], KeyEstimate(tonic=7, mode="major", score=1.0))
    assert first.i == 0


def test_ppm_exhaustive_and_random_against_oracle():
    config = ModelConfig(mode="ltm", order_policy="ppm*")

    # Exhaustive: every sequence of length <= 8 over a 3-symbol
    # alphabet, checked at every prefix context.
    worst = 0.0
    for length in range(1, 9):
        for sequence in itertools.product(range(3), repeat=length):
            trie = ContextTrie(3)
            trie.train_increment(list(sequence))
            for cut in range(length + 1):
                context = list(sequence[:cut])
                got = predict(trie, context, config)
                want = np.array(reference_predict([sequence], context, 3, "ppm*"))
                worst = max(worst, float(np.max(np.abs(got - want))))
                assert abs(got.sum() - 1.0) < 1e-9
    assert worst < 1e-9

    # 500 random cases over alphabets <= 5 and training length <= 12.
    rng = np.random.default_rng(512)
    for _ in range(500):
        alphabet = int(rng.integers(2, 6))
        sequences = [
            rng.integers(0, alphabet, size=rng.integers(1, 13)).tolist()
            for _ in range(rng.integers(1, 3))
        ]
        trie = ContextTrie(alphabet)
        for seq in sequences:
            trie.train_increment(seq)
        context = rng.integers(0, alphabet, size=rng.integers(0, 5)).tolist()
        policy = ("ppm*", 0, 1, 2)[int(rng.integers(0, 4))]
        got = predict(trie, context, ModelConfig(mode="ltm", order_policy=policy))
        want = np.array(reference_predict(sequences, context, alphabet, policy))
        assert float(np.max(np.abs(got - want))) < 1e-9
        assert abs(got.sum() - 1.0) < 1e-9


def test_cross_entropy_identities():
    for v in (2, 8, 256):
        assert cross_entropy([1.0 / v] * 5) == float(math.log2(v))
    assert cross_entropy([0.5, 0.25, 0.125]) == 2.0


def test_bca_bootstrap_against_independent_routine():
    assert bootstrap_ci([4.2] * 10, seed=1) == (4.2, 4.2)
    for case in range(20):
        rng = np.random.default_rng(3000 + case)
        n = int(rng.integers(12, 45))
        values = rng.lognormal(mean=1.0, sigma=0.4, size=n)
        seed = 9000 + case
        low, high = bootstrap_ci(values, replicates=1000, seed=seed)
        ref_low, ref_high, boots = reference_bca(
            values, replicates=1000, level=0.95, seed=seed
        )
        for mine, theirs in ((low, ref_low), (high, ref_high)):
            assert abs(bisect_left(boots, mine) - bisect_left(boots, theirs)) <= 1


def test_regression_against_normal_equations_oracle():
    # Noise-free single-predictor recovery.
    records = _random_records(17, signal=lambda nt, ty, im, mo, re, rng: 2.0 * nt)
    result = stepwise_regression(records)
    assert result.selected == ("n_tokens",)
    assert abs(result.betas["n_tokens"] - 1.0) < 1e-8
    assert abs(result.r_squared - 1.0) < 1e-8

    # Multi-predictor coefficients against the normal equations.
    records = _random_records(
        23,
        n=50,
        signal=lambda nt, ty, im, mo, re, rng: 3.0
        + 0.02 * nt
        - 0.03 * ty
        + 1.5 * im
        + float(rng.normal(0, 0.05)),
    )
    result = stepwise_regression(records)
    assert result.selected
    y = np.array([r.h_m for r in records])
    y = (y - y.mean()) / y.std(ddof=1)
    columns = []
    for name in result.selected:
        column = np.array([float(getattr(r.predictors, name)) for r in records])
        columns.append((column - column.mean()) / column.std(ddof=1))
    betas, _, r_squared = normal_equations_ols(np.column_stack(columns), y)
    for j, name in enumerate(result.selected):
        assert abs(result.betas[name] - betas[j]) < 1e-8
    assert abs(result.r_squared - r_squared) < 1e-8

    # Predictor definitions against brute-force recounts, 100 streams.
    rng = np.random.default_rng(77)
    for _ in range(100):
        v = int(rng.integers(4, 40))
        tokens = rng.integers(0, v, size=int(rng.integers(2, 120))).tolist()
        probs = zeroth_order_distribution(
            np.bincount(rng.integers(0, v, size=300), minlength=v) + 1
        )
        bottom = bottom_decile_ids(probs)
        mono = frozenset(int(x) for x in rng.choice(v, size=2, replace=False))
        predictors = compute_predictors(tokens, bottom, mono)
        assert predictors.n_tokens == len(tokens)
        assert predictors.n_types == len(set(tokens))
        n_bottom = math.ceil(0.10 * v)
        ranked = set(sorted(range(v), key=lambda i: (probs[i], i))[:n_bottom])
        assert bottom == ranked
        assert predictors.improbable == sum(1 for t in tokens if t in ranked) / len(tokens)
        assert predictors.monophonic == sum(1 for t in tokens if t in mono) / len(tokens)
        repeats = sum(1 for i in range(1, len(tokens)) if tokens[i] == tokens[i - 1])
        assert predictors.repetition == repeats / (len(tokens) - 1)


def _run_pipeline(midi_dir: Path, out: Path, config_path: Path, models: str, seed: int):
    config_path.write_text(
        f"""
[models]
run = {models}

[evaluation]
folds = 4
replicates = 500

[experiment]
seed = {seed}
output = {out}
"""
    )
    assert cli.main(["ingest", "--dataset", "corpus", "--output", str(out), str(midi_dir)]) == 0
    assert cli.main(["encode", "--output", str(out)]) == 0
    assert cli.main(["experiment", "--config", str(config_path)]) == 0


def _summary_means(out: Path) -> dict[str, float]:
    means = {}
    for line in (out / "summary.csv").read_text().splitlines():
        if line.startswith("#") or line.startswith("model,") or not line.strip():
            continue
        fields = line.split(",")
        means[fields[0]] = float(fields[2])
    return means


def test_synthetic_directional_check_and_corpus_note(tmp_path):
    """End-to-end pipeline on a synthetic corpus: the cold-start model
    must trail the corpus-trained one, and the report carries the
    corpus-dependence note."""
    midi_dir = tmp_path / "midi"
    write_synthetic_corpus(midi_dir, pieces=32, seed=20)
    out = tmp_path / "out"
    start = time.perf_counter()
    _run_pipeline(midi_dir, out, tmp_path / "exp.ini", "ltm+,stm,both+", seed=7)
    elapsed = time.perf_counter() - start
    means = _summary_means(out)
    assert means["stm"] > means["ltm+"], means
    assert "directionally" in (out / "summary.csv").read_text()
    assert elapsed < 600


def test_determinism_byte_identical_reports(tmp_path):
    midi_dir = tmp_path / "midi"
    write_synthetic_corpus(midi_dir, pieces=16, seed=4)
    out = tmp_path / "out"
    config_path = tmp_path / "exp.ini"
    _run_pipeline(midi_dir, out, config_path, "ltm+,stm", seed=13)
    names = ["folds.csv", "results.csv", "summary.csv", "regression.txt"]
    first = {name: (out / name).read_bytes() for name in names}
    assert cli.main(["experiment", "--config", str(config_path)]) == 0
    for name in names:
        assert (out / name).read_bytes() == first[name], name


@pytest.mark.skipif(
    not Path(BACH_DIR).is_dir(),
    reason=f"Bach chorale MIDI corpus not found at {BACH_DIR!r} "
    "(set CHORDLM_BACH_DIR); skipping the full-corpus directional check",
)
def test_desk_scale_bach_directional_check(tmp_path):
    """Full pipeline over the public Bach chorale set in under ten
    minutes, with the cold-start model trailing and token/type counts
    within 15% of the published accounting (35,237 / 786)."""
    out = tmp_path / "out"
    start = time.perf_counter()
    _run_pipeline(Path(BACH_DIR), out, tmp_path / "exp.ini", "ltm+,stm,both+", seed=1)
    elapsed = time.perf_counter() - start
    assert elapsed < 600, f"pipeline took {elapsed:.0f}s"

    means = _summary_means(out)
    assert means["stm"] > means["ltm+"]

    stats = {
        line.split(",")[0]: line.split(",")
        for line in (out / "datasets.csv").read_text().splitlines()[1:]
    }
    tokens = int(stats["total"][2])
    types = int(stats["total"][3])
    print(f"\nBach corpus accounting: {tokens} tokens / {types} types "
          f"(reference 35237 / 786)")
    assert abs(tokens - 35237) <= 0.15 * 35237
    assert abs(types - 786) <= 0.15 * 786
