"""Training loop: Adam with value clipping, early stopping on held-out
cross-entropy, best-snapshot selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import START, RnnConfig, forward, init_params, loss_and_grads

LN2 = math.log(2.0)


@dataclass
class TrainState:
    """Outcome of a training run; params hold the best-validation snapshot."""

    epoch: int
    best_epoch: int
    best_val_ce: float
    params: dict[str, np.ndarray]
    log: list[tuple[int, float, float]] = field(default_factory=list)


def split_segments(sequences, max_len: int):
    """Cut sequences into consecutive segments of at most max_len tokens.

    Hidden state is not carried across segments; each segment restarts
    from the dummy start symbol.
    """
    segments = []
    for seq in sequences:
        seq = list(seq)
        for start in range(0, len(seq), max_len):
            piece = seq[start : start + max_len]
            if piece:
                segments.append(piece)
    return segments


def _make_batch(segments):
    longest = max(len(s) for s in segments)
    batch = len(segments)
    inputs = np.full((batch, longest), START, dtype=np.int64)
    targets = np.zeros((batch, longest), dtype=np.int64)
    mask = np.zeros((batch, longest))
    for row, segment in enumerate(segments):
        inputs[row, 0] = START
        inputs[row, 1 : len(segment)] = segment[:-1]
        targets[row, : len(segment)] = segment
        mask[row, : len(segment)] = 1.0
    return inputs, targets, mask


def _dataset_ce_nats(params, config, segments):
    """Masked mean cross-entropy of a segment list, in nats."""
    total = 0.0
    count = 0
    for start in range(0, len(segments), config.batch):
        chunk = segments[start : start + config.batch]
        inputs, targets, mask = _make_batch(chunk)
        probabilities = forward(params, config, inputs)
        picked = np.take_along_axis(probabilities, targets[:, :, None], axis=2)[:, :, 0]
        total += float(-(np.log(np.maximum(picked, 1e-300)) * mask).sum())
        count += int(mask.sum())
    return total / count


class _Adam:
    def __init__(self, params, config: RnnConfig):
        self.lr = config.learning_rate
        self.beta1 = config.adam_beta1
        self.beta2 = config.adam_beta2
        self.eps = 1e-8
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for name, grad in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad**2
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(
    train_sequences,
    validation_sequences,
    config: RnnConfig,
    vocab_size: int,
    seed: int,
    validation_fn=None,
    log_hook=None,
) -> TrainState:
    """Train on token sequences with early stopping.

    Gradient values (not norms) are clipped at +-config.clip before the
    Adam update. Validation cross-entropy is evaluated after every
    epoch; when it fails to improve for ``patience`` epochs, training
    stops and the best-epoch snapshot is returned. With no validation
    data (and no ``validation_fn``) the loop runs all epochs and keeps
    the final parameters. ``validation_fn(params, epoch) -> bits`` can
    replace the held-out evaluation.
    """
    rng = np.random.default_rng(seed)
    params = init_params(config, vocab_size, rng)
    optimizer = _Adam(params, config)

    train_segments = split_segments(train_sequences, config.max_len)
    if not train_segments:
        raise ValueError("no training tokens")
    validation_segments = split_segments(validation_sequences or [], config.max_len)
    has_validation = validation_fn is not None or bool(validation_segments)

    best_epoch = 0
    best_val = math.inf
    best_params = {k: v.copy() for k, v in params.items()}
    log: list[tuple[int, float, float]] = []

    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_segments))
        nats_sum = 0.0
        token_count = 0
        for start in range(0, len(order), config.batch):
            chunk = [train_segments[i] for i in order[start : start + config.batch]]
            inputs, targets, mask = _make_batch(chunk)
            loss, grads = loss_and_grads(params, config, inputs, targets, mask)
            if not math.isfinite(loss):
                raise FloatingPointError(
                    f"training diverged at epoch {epoch}: loss {loss}"
                )
            nats_sum += loss * mask.sum()
            token_count += int(mask.sum())
            for grad in grads.values():
                np.clip(grad, -config.clip, config.clip, out=grad)
            optimizer.step(params, grads)

        train_ce = nats_sum / token_count / LN2
        if validation_fn is not None:
            val_ce = float(validation_fn(params, epoch))
        elif validation_segments:
            val_ce = _dataset_ce_nats(params, config, validation_segments) / LN2
        else:
            val_ce = math.nan
        log.append((epoch, train_ce, val_ce))
        if log_hook is not None:
            log_hook(epoch, train_ce, val_ce)

        if has_validation:
            if not math.isfinite(val_ce):
                raise FloatingPointError(
                    f"validation diverged at epoch {epoch}: {val_ce}"
                )
            if val_ce < best_val:
                best_val = val_ce
                best_epoch = epoch
                best_params = {k: v.copy() for k, v in params.items()}
            elif epoch - best_epoch >= config.patience:
                break
        else:
            best_epoch = epoch
            best_val = train_ce
            best_params = {k: v.copy() for k, v in params.items()}

    return TrainState(
        epoch=epoch,
        best_epoch=best_epoch,
        best_val_ce=best_val,
        params=best_params,
        log=log,
    )
