"""Recurrent chord language model.

A two-layer recurrent network (LSTM or GRU cells) with a learned input
embedding and skip connections from the input to the second layer and
to the output. It consumes the encoded-corpus, vocabulary and fold-plan
files produced by the corpus pipeline and emits per-token probability
traces in the same CSV schema the evaluation harness reads, so
cross-entropy is computed model-agnostically downstream.

Everything is plain numpy in double precision with hand-derived
backpropagation through time; gradients are verified against central
finite differences in the test suite.
"""

__version__ = "0.1.0"
