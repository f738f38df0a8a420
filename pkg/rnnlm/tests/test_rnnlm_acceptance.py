"""Acceptance criteria for the recurrent model package."""

import numpy as np
import pytest

from rnnlm.network import GRU, LSTM, RnnConfig, init_params, loss_and_grads
from rnnlm.train import train


def guarded_relative_error(analytic, numeric, floor=1e-6):
    """Relative error with a denominator floor.

    Central differences at h = 1e-5 in float64 carry ~1e-11 absolute
    noise, so entries whose true gradient sits at that scale have no
    meaningful relative error; the floor turns the check into an
    absolute one (agreement within floor * tolerance) for them.
    """
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


@pytest.mark.parametrize("cell", [LSTM, GRU])
def test_gradient_check_against_central_differences(cell):
    """Analytic gradients match central finite differences to < 1e-4
    relative error on a tiny net, for every parameter entry."""
    config = RnnConfig(cell=cell, units=8, embedding=5, batch=2)
    rng = np.random.default_rng(1)
    params = init_params(config, vocab_size=3, rng=rng)
    # Perturb away from the symmetric init so gates are in general position.
    for value in params.values():
        value += rng.normal(0, 0.05, size=value.shape)
    inputs = np.array([[-1, 0, 2, 1], [-1, 2, 2, 0]])
    targets = np.array([[0, 2, 1, 1], [2, 2, 0, 0]])
    mask = np.array([[1.0, 1, 1, 1], [1, 1, 1, 0]])

    _, grads = loss_and_grads(params, config, inputs, targets, mask)
    h = 1e-5
    worst = 0.0
    for name, value in params.items():
        flat = value.reshape(-1)
        grad_flat = grads[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            loss_plus, _ = loss_and_grads(params, config, inputs, targets, mask)
            flat[idx] = orig - h
            loss_minus, _ = loss_and_grads(params, config, inputs, targets, mask)
            flat[idx] = orig
            numeric = (loss_plus - loss_minus) / (2 * h)
            worst = max(worst, guarded_relative_error(grad_flat[idx], numeric))
    assert worst < 1e-4, f"max relative gradient error {worst:.2e}"


@pytest.mark.parametrize("cell", [LSTM, GRU])
def test_memorizes_fifty_token_toy_sequence(cell):
    """Training cross-entropy falls below 0.1 bits/token within 200
    epochs on a 50-token sequence with no validation stop."""
    rng = np.random.default_rng(0)
    toy = rng.integers(0, 5, size=50).tolist()
    config = RnnConfig(
        cell=cell, units=32, embedding=16, max_epochs=200, learning_rate=1e-2
    )
    state = train([toy], [], config, vocab_size=5, seed=1)
    final_train_ce = state.log[-1][1]
    assert final_train_ce < 0.1, f"{cell} reached only {final_train_ce:.3f} bits"
    assert state.epoch <= 200


def test_early_stopping_returns_argmin_on_synthetic_curve():
    curve = [9.0, 4.0, 7.0, 3.5, 8.0] + [8.0] * 40
    snapshots = {}

    def validation_fn(params, epoch):
        snapshots[epoch] = {k: v.copy() for k, v in params.items()}
        return curve[epoch - 1]

    config = RnnConfig(units=4, embedding=3, max_epochs=60, patience=10)
    state = train(
        [[0, 1, 0, 1, 1]], [], config, vocab_size=2, seed=3,
        validation_fn=validation_fn,
    )
    assert state.best_epoch == 4
    assert state.epoch == 14
    for name, value in state.params.items():
        np.testing.assert_array_equal(value, snapshots[4][name])
