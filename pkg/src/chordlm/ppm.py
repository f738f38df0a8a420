"""Variable-order context modeling with unbounded contexts and escape
method C.

Counts live in a forward trie whose node at path g holds the number of
times the n-gram g was observed; training a position counts every
suffix of its context plus the continuation, so matched contexts are
suffix-closed. Prediction blends maximum-likelihood estimates at every
matched order down to order -1 (uniform over the closed alphabet):
at each order the escape mass t/(n + t) (t distinct continuations,
n total continuations) weights the next-shorter order's estimate, which
keeps every distribution strictly positive and summing to one.

The starting order is chosen either by the unbounded-context heuristic
(shortest deterministic matched context if any, else the longest match)
or by a fixed order bound.

Three evaluation modes are provided: ``ltm+`` (a trained base model
updated online through the test sequence), ``stm`` (empty per
composition, trained incrementally), and ``both+`` (their per-token
weighted geometric combination); ``ltm`` (no online updates) exists for
comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelConfig",
    "ContextTrie",
    "UnknownSymbolError",
    "predict",
    "combine_geometric",
    "run_sequence",
    "write_trie",
    "read_trie",
    "MODE_LTM",
    "MODE_LTM_PLUS",
    "MODE_STM",
    "MODE_BOTH_PLUS",
    "ORDER_UNBOUNDED",
]

MODE_LTM = "ltm"
MODE_LTM_PLUS = "ltm+"
MODE_STM = "stm"
MODE_BOTH_PLUS = "both+"
ORDER_UNBOUNDED = "ppm*"

_TRIE_MAGIC = "chordlm-trie"
_TRIE_VERSION = 1


class UnknownSymbolError(ValueError):
    """A token id outside the closed vocabulary."""


@dataclass(frozen=True)
class ModelConfig:
    """Resolved model configuration; every field lands in report headers."""

    mode: str = MODE_BOTH_PLUS
    escape: str = "C"
    order_policy: str | int = ORDER_UNBOUNDED
    bias: float = 2.0
    update_exclusion: bool = False

    def __post_init__(self):
        if self.mode not in (MODE_LTM, MODE_LTM_PLUS, MODE_STM, MODE_BOTH_PLUS):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.escape != "C":
            raise ValueError(f"only escape method C is implemented, got {self.escape!r}")
        if isinstance(self.order_policy, str):
            if self.order_policy != ORDER_UNBOUNDED:
                raise ValueError(f"unknown order policy {self.order_policy!r}")
        elif self.order_policy < 0:
            raise ValueError("fixed order bound must be >= 0")
        if self.bias <= 0:
            raise ValueError("combination bias must be > 0")

    def label(self) -> str:
        return self.mode


class _Node:
    __slots__ = ("children", "count")

    def __init__(self):
        self.children: dict[int, _Node] = {}
        self.count = 0


class ContextTrie:
    """N-gram counts over a closed alphabet of dense token ids."""

    def __init__(self, alphabet_size: int, max_depth: int | None = None):
        if alphabet_size < 1:
            raise ValueError("alphabet size must be >= 1")
        if max_depth is not None and max_depth < 1:
            raise ValueError("max stored depth must be >= 1")
        self.alphabet_size = alphabet_size
        self.max_depth = max_depth
        self.root = _Node()

    @property
    def total_symbols(self) -> int:
        return self.root.count

    def train_increment(self, sequence, journal: list | None = None) -> "ContextTrie":
        """Count every suffix n-gram of the sequence.

        At each position, each suffix of the preceding context gains a
        count for the continuation. A journal, when supplied, records
        enough to undo the insertion with :meth:`undo`.
        """
        chain: list[_Node] = [self.root]
        for symbol in sequence:
            chain = self.extend(chain, symbol, journal)
        return self

    def extend(
        self, chain: list[_Node], symbol: int, journal: list | None = None
    ) -> list[_Node]:
        """Count one position given the active suffix chain; returns the
        chain for the extended history ([root] + updated children)."""
        if not 0 <= symbol < self.alphabet_size:
            raise UnknownSymbolError(
                f"token id {symbol} outside closed vocabulary of "
                f"size {self.alphabet_size}"
            )
        self.root.count += 1
        if journal is not None:
            journal.append((None, None))
        new_chain = [self.root]
        for node in chain:
            child = node.children.get(symbol)
            if child is None:
                child = _Node()
                node.children[symbol] = child
            child.count += 1
            if journal is not None:
                journal.append((node, symbol))
            new_chain.append(child)
        if self.max_depth is not None and len(new_chain) > self.max_depth:
            del new_chain[self.max_depth:]
        return new_chain

    def undo(self, journal: list) -> None:
        """Reverse a journal of insertions (most recent first)."""
        for parent, symbol in reversed(journal):
            if parent is None:
                self.root.count -= 1
                continue
            child = parent.children[symbol]
            child.count -= 1
            if child.count == 0:
                del parent.children[symbol]
        journal.clear()

    def advance(self, chain: list[_Node], symbol: int) -> list[_Node]:
        """Extend the suffix chain without updating any counts."""
        new_chain = [self.root]
        for node in chain:
            child = node.children.get(symbol)
            if child is None:
                break
            new_chain.append(child)
        if self.max_depth is not None and len(new_chain) > self.max_depth:
            del new_chain[self.max_depth:]
        return new_chain

    def node(self, context) -> _Node | None:
        node = self.root
        for symbol in context:
            node = node.children.get(symbol)
            if node is None:
                return None
        return node

    def continuations(self, context) -> dict[int, int]:
        """Counts of symbols observed after the exact context."""
        node = self.node(context)
        if node is None:
            return {}
        return {symbol: child.count for symbol, child in node.children.items()}

    def matched_chain(self, context) -> list[_Node]:
        """Nodes for every matched context suffix, shortest first.

        Entry k is the node of the last-k-symbols suffix; matched
        suffixes are contiguous because counting is suffix-closed.
        """
        chain = [self.root]
        context = list(context)
        for k in range(1, len(context) + 1):
            node = self.node(context[-k:])
            if node is None:
                break
            chain.append(node)
        return chain


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def _select_start_order(chain: list[_Node], config: ModelConfig) -> int:
    """Index into the chain of the order prediction starts from.

    Only chain entries with at least one counted continuation are
    predictive. The unbounded policy takes the shortest deterministic
    context (exactly one distinct continuation) when one exists,
    otherwise the longest matched context; a fixed bound caps the order.
    """
    predictive = len(chain)
    while predictive > 0 and not chain[predictive - 1].children:
        predictive -= 1
    if predictive == 0:
        return -1
    if config.order_policy == ORDER_UNBOUNDED:
        for k in range(predictive):
            if len(chain[k].children) == 1:
                return k
        return predictive - 1
    return min(int(config.order_policy), predictive - 1)


def _blend_from_chain(
    chain: list[_Node], start_order: int, alphabet_size: int
) -> np.ndarray:
    dist = np.full(alphabet_size, 1.0 / alphabet_size)
    for k in range(start_order + 1):
        node = chain[k]
        counts = node.children
        n = sum(child.count for child in counts.values())
        t = len(counts)
        if t == 0:
            continue
        denom = n + t
        dist *= t / denom
        for symbol, child in counts.items():
            dist[symbol] += child.count / denom
    return dist


def predict(trie: ContextTrie, context, config: ModelConfig) -> np.ndarray:
    """Distribution over the next symbol after the context.

    Strictly positive, sums to one; an untrained trie yields the
    uniform order minus-one distribution.
    """
    for symbol in context:
        if not 0 <= symbol < trie.alphabet_size:
            raise UnknownSymbolError(f"context token id {symbol} out of range")
    chain = trie.matched_chain(context)
    start = _select_start_order(chain, config)
    return _blend_from_chain(chain, start, trie.alphabet_size)


def combine_geometric(p: np.ndarray, q: np.ndarray, bias: float) -> np.ndarray:
    """Weighted geometric mean of two distributions.

    Weights are proportional to each distribution's normalized entropy
    raised to the power -bias, so the more confident distribution
    dominates as the bias grows; bias 0 gives the plain geometric mean.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions must share one alphabet")
    if np.any(p <= 0) or np.any(q <= 0):
        raise ValueError("distributions must be strictly positive")
    v = p.size
    if v == 1:
        return np.array([1.0])
    log_v = math.log2(v)
    entropy_p = float(-(p * np.log2(p)).sum()) / log_v
    entropy_q = float(-(q * np.log2(q)).sum()) / log_v
    weight_p = entropy_p ** -bias
    weight_q = entropy_q ** -bias
    total = weight_p + weight_q
    if not math.isfinite(total) or total <= 0:
        # A vanishing entropy overflows the power; the sharper side wins.
        w = 1.0 if entropy_p < entropy_q else 0.0
    else:
        w = weight_p / total
    combined = np.exp(w * np.log(p) + (1.0 - w) * np.log(q))
    return combined / combined.sum()


# ---------------------------------------------------------------------------
# Sequence evaluation
# ---------------------------------------------------------------------------


@dataclass
class _OnlineModel:
    """One trie being read (and possibly written) through a test sequence."""

    trie: ContextTrie
    updates: bool
    chain: list = field(default_factory=list)
    journal: list | None = None

    def __post_init__(self):
        self.chain = [self.trie.root]

    def predict_next(self, config: ModelConfig) -> np.ndarray:
        start = _select_start_order(self.chain, config)
        return _blend_from_chain(self.chain, start, self.trie.alphabet_size)

    def consume(self, symbol: int, config: ModelConfig) -> None:
        if self.updates:
            if config.update_exclusion:
                self.chain = _extend_with_exclusion(
                    self.trie, self.chain, symbol, self.journal
                )
            else:
                self.chain = self.trie.extend(self.chain, symbol, self.journal)
        else:
            self.chain = self.trie.advance(self.chain, symbol)


def _extend_with_exclusion(
    trie: ContextTrie, chain: list, symbol: int, journal: list | None
) -> list:
    """Count from the longest context down, stopping one past the first
    context that had already seen the symbol."""
    if not 0 <= symbol < trie.alphabet_size:
        raise UnknownSymbolError(f"token id {symbol} out of range")
    trie.root.count += 1
    if journal is not None:
        journal.append((None, None))
    updated: dict[int, _Node] = {}
    for depth in range(len(chain) - 1, -1, -1):
        node = chain[depth]
        child = node.children.get(symbol)
        seen_before = child is not None and child.count > 0
        if child is None:
            child = _Node()
            node.children[symbol] = child
        child.count += 1
        if journal is not None:
            journal.append((node, symbol))
        updated[depth] = child
        if seen_before:
            break
    new_chain = [trie.root]
    for depth in range(len(chain)):
        child = updated.get(depth) or chain[depth].children.get(symbol)
        if child is None:
            break
        new_chain.append(child)
    if trie.max_depth is not None and len(new_chain) > trie.max_depth:
        del new_chain[trie.max_depth:]
    return new_chain


def run_sequence(
    test,
    config: ModelConfig,
    base_trie: ContextTrie | None = None,
    alphabet_size: int | None = None,
    keep_updates: bool = False,
) -> np.ndarray:
    """Per-token probabilities p(e_i | e_1..e_{i-1}) over a test sequence.

    The short-term trie starts empty for the sequence; online updates
    to a long-term base are private to this call unless ``keep_updates``
    is set. Both sub-models of ``both+`` consume each token only after
    the combined prediction is emitted.
    """
    if base_trie is not None:
        alphabet_size = base_trie.alphabet_size
    if alphabet_size is None:
        raise ValueError("need a base trie or an explicit alphabet size")

    models: list[_OnlineModel] = []
    if config.mode in (MODE_LTM, MODE_LTM_PLUS, MODE_BOTH_PLUS):
        if base_trie is None:
            raise ValueError(f"mode {config.mode} requires a trained base trie")
        updates = config.mode != MODE_LTM
        journal = [] if (updates and not keep_updates) else None
        models.append(_OnlineModel(trie=base_trie, updates=updates, journal=journal))
    if config.mode in (MODE_STM, MODE_BOTH_PLUS):
        stm_trie = ContextTrie(alphabet_size, max_depth=_stored_depth(config))
        models.append(_OnlineModel(trie=stm_trie, updates=True))

    probabilities = np.empty(len(test), dtype=np.float64)
    try:
        for index, symbol in enumerate(test):
            if not 0 <= symbol < alphabet_size:
                raise UnknownSymbolError(f"test token id {symbol} out of range")
            dists = [model.predict_next(config) for model in models]
            if len(dists) == 2:
                dist = combine_geometric(dists[0], dists[1], config.bias)
            else:
                dist = dists[0]
            probabilities[index] = dist[symbol]
            for model in models:
                model.consume(symbol, config)
    finally:
        for model in models:
            if model.journal is not None:
                model.trie.undo(model.journal)
    return probabilities


def _stored_depth(config: ModelConfig) -> int | None:
    if config.order_policy == ORDER_UNBOUNDED:
        return None
    return int(config.order_policy) + 1


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


def write_trie(trie: ContextTrie) -> str:
    """Versioned text snapshot: preorder traversal, children by symbol."""
    depth_text = "-" if trie.max_depth is None else str(trie.max_depth)
    lines = [
        f"{_TRIE_MAGIC}\t{_TRIE_VERSION}\t{trie.alphabet_size}"
        f"\t{trie.root.count}\t{depth_text}"
    ]

    def walk(node: _Node, depth: int) -> None:
        for symbol in sorted(node.children):
            child = node.children[symbol]
            lines.append(f"{depth}\t{symbol}\t{child.count}")
            walk(child, depth + 1)

    walk(trie.root, 1)
    return "\n".join(lines) + "\n"


def read_trie(text: str) -> ContextTrie:
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty trie snapshot")
    header = lines[0].split("\t")
    if len(header) != 5 or header[0] != _TRIE_MAGIC:
        raise ValueError("not a trie snapshot")
    if int(header[1]) != _TRIE_VERSION:
        raise ValueError(f"unsupported trie snapshot version {header[1]}")
    trie = ContextTrie(
        alphabet_size=int(header[2]),
        max_depth=None if header[4] == "-" else int(header[4]),
    )
    trie.root.count = int(header[3])
    stack = [trie.root]
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValueError(f"line {lineno}: malformed trie record")
        depth, symbol, count = int(fields[0]), int(fields[1]), int(fields[2])
        if not 1 <= depth <= len(stack):
            raise ValueError(f"line {lineno}: depth {depth} breaks preorder")
        del stack[depth:]
        node = _Node()
        node.count = count
        stack[-1].children[symbol] = node
        stack.append(node)
    return trie
