"""Network definition: forward pass, loss, and analytic gradients.

Architecture, for a vocabulary of V chord types:

* embedding matrix over V + 1 rows (row V is the sequence-start dummy);
* recurrent layer 1 over the embedded input;
* recurrent layer 2 over [embedding, h1] (input skip connection);
* softmax output over [embedding, h2] (input skip connection).

Input at step i is the embedding of token i-1 (the dummy at i = 1);
output row i is p(e_i | e_1..e_{i-1}). All math is float64; gradients
are derived by hand and checked against finite differences in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

START = -1  # sentinel resolved to the embedding's last row

LSTM = "lstm"
GRU = "gru"


@dataclass(frozen=True)
class RnnConfig:
    cell: str = LSTM
    layers: int = 2
    units: int = 128
    embedding: int = 64
    batch: int = 4
    max_len: int = 300
    max_epochs: int = 200
    patience: int = 10
    clip: float = 1.0
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999

    def __post_init__(self):
        if self.cell not in (LSTM, GRU):
            raise ValueError(f"cell must be {LSTM!r} or {GRU!r}, got {self.cell!r}")
        if self.layers != 2:
            raise ValueError("the architecture is fixed at two recurrent layers")
        for name in ("units", "embedding", "batch", "max_len", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.clip <= 0 or self.learning_rate <= 0:
            raise ValueError("clip and learning_rate must be positive")


def init_params(config: RnnConfig, vocab_size: int, rng) -> dict[str, np.ndarray]:
    """Seeded small-scale initialization of every trainable array."""
    h = config.units
    d = config.embedding
    gates = 4 if config.cell == LSTM else 3

    def mat(rows, cols):
        scale = 1.0 / np.sqrt(cols)
        return rng.uniform(-scale, scale, size=(rows, cols))

    params = {
        "embed": rng.normal(0.0, 0.1, size=(vocab_size + 1, d)),
        "l0.Wx": mat(gates * h, d),
        "l0.Wh": mat(gates * h, h),
        "l0.b": np.zeros(gates * h),
        "l1.Wx": mat(gates * h, d + h),
        "l1.Wh": mat(gates * h, h),
        "l1.b": np.zeros(gates * h),
        "out.W": mat(vocab_size, d + h),
        "out.b": np.zeros(vocab_size),
    }
    if config.cell == LSTM:
        # Unit forget-gate bias: the usual stable starting point.
        for layer in ("l0", "l1"):
            params[f"{layer}.b"][h : 2 * h] = 1.0
    return {name: value.astype(np.float64) for name, value in params.items()}


def _sigmoid(x):
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    ex = np.exp(x[~positive])
    out[~positive] = ex / (1.0 + ex)
    return out


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def _lstm_step(x, h_prev, c_prev, Wx, Wh, b, units):
    z = x @ Wx.T + h_prev @ Wh.T + b
    i = _sigmoid(z[:, :units])
    f = _sigmoid(z[:, units : 2 * units])
    g = np.tanh(z[:, 2 * units : 3 * units])
    o = _sigmoid(z[:, 3 * units :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, (x, h_prev, c_prev, i, f, g, o, tanh_c)


def _lstm_backward(dh, dc, cache, Wx, Wh, grads, prefix, units):
    x, h_prev, c_prev, i, f, g, o, tanh_c = cache
    do = dh * tanh_c
    dc = dc + dh * o * (1.0 - tanh_c**2)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    dz = np.concatenate(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g**2),
            do * o * (1.0 - o),
        ],
        axis=1,
    )
    grads[f"{prefix}.Wx"] += dz.T @ x
    grads[f"{prefix}.Wh"] += dz.T @ h_prev
    grads[f"{prefix}.b"] += dz.sum(axis=0)
    dx = dz @ Wx
    dh_prev = dz @ Wh
    dc_prev = dc * f
    return dx, dh_prev, dc_prev


def _gru_step(x, h_prev, Wx, Wh, b, units):
    zx = x @ Wx.T + b
    zh = h_prev @ Wh.T
    r = _sigmoid(zx[:, :units] + zh[:, :units])
    z = _sigmoid(zx[:, units : 2 * units] + zh[:, units : 2 * units])
    rh = r * h_prev
    n_pre = zx[:, 2 * units :] + rh @ Wh[2 * units :].T
    n = np.tanh(n_pre)
    h = (1.0 - z) * h_prev + z * n
    return h, (x, h_prev, r, z, n, rh)


def _gru_backward(dh, cache, Wx, Wh, grads, prefix, units):
    x, h_prev, r, z, n, rh = cache
    dz_gate = dh * (n - h_prev)
    dn = dh * z
    dh_prev = dh * (1.0 - z)
    dzn = dn * (1.0 - n**2)
    # n_pre = Wn x + Un (r h_prev) + bn
    drh = dzn @ Wh[2 * units :]
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r
    dzr = dr * r * (1.0 - r)
    dzz = dz_gate * z * (1.0 - z)
    dz_all = np.concatenate([dzr, dzz, dzn], axis=1)
    grads[f"{prefix}.Wx"] += dz_all.T @ x
    grads[f"{prefix}.b"] += dz_all.sum(axis=0)
    grads[f"{prefix}.Wh"][:units] += dzr.T @ h_prev
    grads[f"{prefix}.Wh"][units : 2 * units] += dzz.T @ h_prev
    grads[f"{prefix}.Wh"][2 * units :] += dzn.T @ rh
    dx = dz_all @ Wx
    dh_prev = dh_prev + dzr @ Wh[:units] + dzz @ Wh[units : 2 * units]
    return dx, dh_prev


def forward(
    params,
    config: RnnConfig,
    inputs,
    with_cache: bool = False,
    state=None,
    return_state: bool = False,
):
    """Probability rows for a batch of input token matrices.

    ``inputs`` is (B, T) of token ids with START for the dummy symbol;
    returns probabilities of shape (B, T, V) and, optionally, the
    caches needed for the backward pass. ``state`` seeds the recurrent
    layers (as returned by a previous call with ``return_state``);
    zeros otherwise.
    """
    inputs = np.asarray(inputs)
    batch, steps = inputs.shape
    units = config.units
    vocab_plus = params["embed"].shape[0]
    rows = np.where(inputs == START, vocab_plus - 1, inputs)
    if np.any(rows < 0) or np.any(rows >= vocab_plus):
        raise ValueError("token id outside the embedding table")

    embedded = params["embed"][rows]  # (B, T, D)
    if state is None:
        h = [np.zeros((batch, units)), np.zeros((batch, units))]
        c = [np.zeros((batch, units)), np.zeros((batch, units))]
    else:
        h = [state[0][0].copy(), state[0][1].copy()]
        c = [state[1][0].copy(), state[1][1].copy()]
    caches = []
    outputs = np.empty((batch, steps, params["out.W"].shape[0]))
    out_inputs = np.empty((batch, steps, params["out.W"].shape[1]))

    for t in range(steps):
        x0 = embedded[:, t]
        if config.cell == LSTM:
            h0, c0, cache0 = _lstm_step(
                x0, h[0], c[0], params["l0.Wx"], params["l0.Wh"], params["l0.b"], units
            )
        else:
            h0, cache0 = _gru_step(
                x0, h[0], params["l0.Wx"], params["l0.Wh"], params["l0.b"], units
            )
            c0 = c[0]
        x1 = np.concatenate([x0, h0], axis=1)  # input skip into layer 2
        if config.cell == LSTM:
            h1, c1, cache1 = _lstm_step(
                x1, h[1], c[1], params["l1.Wx"], params["l1.Wh"], params["l1.b"], units
            )
        else:
            h1, cache1 = _gru_step(
                x1, h[1], params["l1.Wx"], params["l1.Wh"], params["l1.b"], units
            )
            c1 = c[1]
        h, c = [h0, h1], [c0, c1]
        out_in = np.concatenate([x0, h1], axis=1)  # input skip into output
        out_inputs[:, t] = out_in
        outputs[:, t] = out_in @ params["out.W"].T + params["out.b"]
        if with_cache:
            caches.append((cache0, cache1))

    probabilities = _softmax(outputs)
    if with_cache:
        return probabilities, (rows, out_inputs, caches)
    if return_state:
        return probabilities, (h, c)
    return probabilities


def loss_and_grads(params, config: RnnConfig, inputs, targets, mask):
    """Masked mean cross-entropy (nats) and gradients for every parameter.

    ``targets`` is (B, T); ``mask`` is (B, T) with 1.0 at positions that
    contribute to the loss (the dummy start symbol is input-only, so no
    position predicts it).
    """
    inputs = np.asarray(inputs)
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=np.float64)
    batch, steps = inputs.shape
    units = config.units
    d = config.embedding

    probabilities, (rows, out_inputs, caches) = forward(
        params, config, inputs, with_cache=True
    )
    count = mask.sum()
    if count == 0:
        raise ValueError("mask excludes every position")
    safe_targets = np.where(mask > 0, targets, 0).astype(int)
    picked = np.take_along_axis(
        probabilities, safe_targets[:, :, None], axis=2
    )[:, :, 0]
    loss = float(-(np.log(np.maximum(picked, 1e-300)) * mask).sum() / count)
    if not np.isfinite(loss):
        raise FloatingPointError("loss diverged to a non-finite value")

    grads = {name: np.zeros_like(value) for name, value in params.items()}
    dlogits = probabilities.copy()
    np.put_along_axis(
        dlogits,
        safe_targets[:, :, None],
        np.take_along_axis(dlogits, safe_targets[:, :, None], axis=2) - 1.0,
        axis=2,
    )
    dlogits *= (mask / count)[:, :, None]

    dh_next = [np.zeros((batch, units)), np.zeros((batch, units))]
    dc_next = [np.zeros((batch, units)), np.zeros((batch, units))]
    dembed_rows = np.zeros((batch, steps, d))

    for t in range(steps - 1, -1, -1):
        dl = dlogits[:, t]
        grads["out.W"] += dl.T @ out_inputs[:, t]
        grads["out.b"] += dl.sum(axis=0)
        dout_in = dl @ params["out.W"]
        dx0 = dout_in[:, :d].copy()
        dh1 = dout_in[:, d:] + dh_next[1]

        cache0, cache1 = caches[t]
        if config.cell == LSTM:
            dx1, dh_prev1, dc_prev1 = _lstm_backward(
                dh1, dc_next[1], cache1, params["l1.Wx"], params["l1.Wh"],
                grads, "l1", units,
            )
            dc_next[1] = dc_prev1
        else:
            dx1, dh_prev1 = _gru_backward(
                dh1, cache1, params["l1.Wx"], params["l1.Wh"], grads, "l1", units
            )
        dh_next[1] = dh_prev1
        dx0 += dx1[:, :d]
        dh0 = dx1[:, d:] + dh_next[0]

        if config.cell == LSTM:
            dx, dh_prev0, dc_prev0 = _lstm_backward(
                dh0, dc_next[0], cache0, params["l0.Wx"], params["l0.Wh"],
                grads, "l0", units,
            )
            dc_next[0] = dc_prev0
        else:
            dx, dh_prev0 = _gru_backward(
                dh0, cache0, params["l0.Wx"], params["l0.Wh"], grads, "l0", units
            )
        dh_next[0] = dh_prev0
        dembed_rows[:, t] = dx0 + dx

    np.add.at(grads["embed"], rows.reshape(-1), dembed_rows.reshape(-1, d))
    return loss, grads


def predict_sequence(
    params, config: RnnConfig, tokens, carry_state: bool = False
) -> np.ndarray:
    """p(e_i | e_1..e_{i-1}) for one token sequence.

    Sequences longer than the configured cap are split into consecutive
    segments. By default each segment restarts from the dummy start
    symbol with fresh hidden state; with ``carry_state`` the recurrent
    state and the previous token flow across the split, which is
    step-for-step identical to an unsegmented run.
    """
    tokens = list(tokens)
    probabilities = np.empty(len(tokens))
    position = 0
    state = None
    for start in range(0, len(tokens), config.max_len):
        segment = tokens[start : start + config.max_len]
        if carry_state and start > 0:
            first_input = tokens[start - 1]
        else:
            first_input = START
            state = None
        inputs = np.array([[first_input] + segment[:-1]])
        probs, state = forward(params, config, inputs, state=state, return_state=True)
        probs = probs[0]
        for i, token in enumerate(segment):
            probabilities[position] = probs[i, token]
            position += 1
    return probabilities
