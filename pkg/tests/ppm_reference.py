"""Definition-based reference implementation of interpolated prediction
with escape method C, written without a trie.

N-gram counts come from brute-force contiguous-substring tabulation
over a list of sequences, and the blended distribution is computed by
direct recursion over context orders. Used as the oracle for the trie
implementation on small alphabets.
"""

from __future__ import annotations

import math


def gram_counts(sequences):
    """Counts of every contiguous substring of every sequence."""
    counts: dict[tuple, int] = {}
    for seq in sequences:
        seq = tuple(seq)
        for start in range(len(seq)):
            for end in range(start + 1, len(seq) + 1):
                gram = seq[start:end]
                counts[gram] = counts.get(gram, 0) + 1
    return counts


def continuations(counts, context, alphabet_size):
    context = tuple(context)
    return {
        symbol: counts[context + (symbol,)]
        for symbol in range(alphabet_size)
        if context + (symbol,) in counts
    }


def reference_predict(sequences, context, alphabet_size, order_policy="ppm*"):
    """Blended next-symbol distribution, straight from the definition."""
    counts = gram_counts(sequences)
    context = tuple(context)

    matched_orders = []
    for k in range(len(context) + 1):
        suffix = context[len(context) - k :]
        if continuations(counts, suffix, alphabet_size):
            matched_orders.append(k)
        else:
            break

    if not matched_orders:
        return [1.0 / alphabet_size] * alphabet_size

    if order_policy == "ppm*":
        start = None
        for k in matched_orders:
            suffix = context[len(context) - k :]
            if len(continuations(counts, suffix, alphabet_size)) == 1:
                start = k
                break
        if start is None:
            start = matched_orders[-1]
    else:
        start = min(int(order_policy), matched_orders[-1])

    def order_distribution(k):
        if k == -1:
            return [1.0 / alphabet_size] * alphabet_size
        suffix = context[len(context) - k :]
        conts = continuations(counts, suffix, alphabet_size)
        n = sum(conts.values())
        t = len(conts)
        lower = order_distribution(k - 1)
        return [
            conts.get(symbol, 0) / (n + t) + (t / (n + t)) * lower[symbol]
            for symbol in range(alphabet_size)
        ]

    return order_distribution(start)


def reference_combine(p, q, bias):
    """Entropy-weighted geometric mean, evaluated directly."""
    v = len(p)
    norm = math.log2(v)
    h_p = -sum(x * math.log2(x) for x in p) / norm
    h_q = -sum(x * math.log2(x) for x in q) / norm
    w_p = h_p**-bias
    w_q = h_q**-bias
    w = w_p / (w_p + w_q)
    raw = [pi**w * qi ** (1.0 - w) for pi, qi in zip(p, q)]
    total = sum(raw)
    return [r / total for r in raw]


def reference_run_sequence(
    test, mode, train_sequences, alphabet_size, order_policy="ppm*", bias=2.0
):
    """Per-token probabilities under the online-update schedule.

    The already-predicted prefix of the test sequence joins the counted
    material before the next prediction, exactly once per position.
    """
    test = tuple(test)
    probabilities = []
    for index in range(len(test)):
        prefix = test[:index]
        context = prefix
        if mode == "stm":
            dist = reference_predict([prefix], context, alphabet_size, order_policy)
        elif mode == "ltm+":
            dist = reference_predict(
                list(train_sequences) + [prefix], context, alphabet_size, order_policy
            )
        elif mode == "ltm":
            dist = reference_predict(
                list(train_sequences), context, alphabet_size, order_policy
            )
        elif mode == "both+":
            ltm_dist = reference_predict(
                list(train_sequences) + [prefix], context, alphabet_size, order_policy
            )
            stm_dist = reference_predict([prefix], context, alphabet_size, order_policy)
            dist = reference_combine(ltm_dist, stm_dist, bias)
        else:
            raise ValueError(mode)
        probabilities.append(dist[test[index]])
    return probabilities
