"""Chord-onset language modeling for symbolic tonal corpora.

The pipeline runs MIDI ingestion and full expansion (:mod:`.ingest`),
windowed key estimation (:mod:`.keyscape`), interval-class chord
encoding (:mod:`.encoder`), variable-order context modeling
(:mod:`.ppm`), and a cross-entropy evaluation harness with stratified
cross-validation, BCa bootstrap intervals and stepwise regression
(:mod:`.evalkit`), wired together by the :mod:`.cli` front-end.
"""

__version__ = "0.1.0"
