"""Analytic gradients of the full contrastive objective against central
finite differences on a reduced double-precision model."""

import numpy as np
import pytest

from scraps.model.config import ModelConfig
from scraps.model.encoder import pad_mels, pad_phonemes
from scraps.model.layers import dropout_bwd, dropout_fwd
from scraps.model.params import init_params
from scraps.training import Batch, batch_loss_and_grads

REDUCED = dict(
    vocab_size=7,
    n_layers=1,
    n_heads=1,
    d_model=8,
    dropout=0.0,  # deterministic loss for finite differencing
    d_embed=4,
    max_phonemes=16,
    max_frames=16,
    n_mels=6,
    dtype="float64",
)


def reduced_batch(config, seed=0):
    rng = np.random.default_rng(seed)
    seqs = [np.array([3, 4, 5, 6]), np.array([4, 3, 5]), np.array([6, 5])]
    mels = [
        rng.standard_normal((7, config.n_mels)),
        rng.standard_normal((5, config.n_mels)),
        rng.standard_normal((6, config.n_mels)),
    ]
    ids, plen = pad_phonemes(seqs, config)
    mel, mlen = pad_mels(mels, config)
    return Batch(ids, plen, mel, mlen, np.arange(len(seqs)))


def check_all_parameters(config, h=1e-5, tol=1e-4, sample=None, seed=0, refine=False):
    """Compare every (or a sampled subset of) parameter gradient against
    central differences. With refine=True, an entry failing at h is
    re-measured at h/10: a ReLU kink inside the difference window shrinks
    away, a genuine backprop bug does not."""
    params = init_params(config, np.random.default_rng(seed))
    batch = reduced_batch(config, seed)
    _, grads = batch_loss_and_grads(params, config, batch, None, train=False)

    def loss_only():
        value, _ = batch_loss_and_grads(params, config, batch, None, train=False)
        return value

    def fd(flat, i, step):
        orig = flat[i]
        flat[i] = orig + step
        up = loss_only()
        flat[i] = orig - step
        down = loss_only()
        flat[i] = orig
        return (up - down) / (2.0 * step)

    worst = 0.0
    worst_at = ""
    for name in sorted(params):
        flat = params[name].reshape(-1)
        gflat = grads[name].reshape(-1)
        assert gflat.shape == flat.shape
        if sample is None:
            indices = range(flat.size)
        else:
            indices = np.random.default_rng(1).choice(
                flat.size, size=min(sample, flat.size), replace=False
            )
        for i in indices:
            numeric = fd(flat, i, h)
            rel = abs(gflat[i] - numeric) / max(1e-6, abs(gflat[i]), abs(numeric))
            if refine and rel >= tol:
                numeric = fd(flat, i, h / 10.0)
                rel = abs(gflat[i] - numeric) / max(1e-6, abs(gflat[i]), abs(numeric))
            if rel > worst:
                worst, worst_at = rel, f"{name}[{i}]"
    assert worst < tol, f"worst relative error {worst:.2e} at {worst_at}"
    return worst


def test_every_parameter_gradient_reduced_model():
    worst = check_all_parameters(ModelConfig(**REDUCED))
    assert worst < 1e-4


@pytest.mark.parametrize(
    "overrides",
    [
        {"use_integrator": False},
        {"share_integrator": False},
        {"normalize_embeddings": True},
        {"n_layers": 2, "n_heads": 2},
    ],
)
def test_variant_gradients_sampled(overrides):
    config = ModelConfig(**{**REDUCED, **overrides})
    check_all_parameters(config, sample=10, refine=True)


def test_dropout_forward_and_backward():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 40))
    y, mask = dropout_fwd(x, 0.3, np.random.default_rng(4), train=True)
    # kept entries scaled by 1/(1-p), dropped entries zero
    kept = mask > 0
    np.testing.assert_allclose(y[kept], x[kept] / 0.7, atol=1e-12)
    assert (y[~kept] == 0).all()
    assert 0.55 < kept.mean() < 0.85
    dy = rng.standard_normal(x.shape)
    np.testing.assert_allclose(dropout_bwd(dy, mask), dy * mask, atol=1e-12)


def test_dropout_identity_in_eval():
    x = np.ones((4, 4))
    y, mask = dropout_fwd(x, 0.5, None, train=False)
    assert mask is None and y is x
