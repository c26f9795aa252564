import numpy as np
import pytest

from scraps.errors import CheckpointError, TrainingDivergedError
from scraps.model.config import ModelConfig
from scraps.model.encoder import encode_phonemes
from scraps.training import (
    TrainConfig,
    _build_batch,
    desk_model_config,
    epoch_seed,
    fit,
    init_state,
    load_checkpoint,
    make_batches,
    save_checkpoint,
    train_step,
)
from scraps.vocab import PhonemeSequence


def small_train_config(corpus, tmp_path, **overrides):
    model = ModelConfig(
        vocab_size=corpus.vocab.size,
        n_layers=1,
        n_heads=2,
        d_model=16,
        dropout=0.1,
        d_embed=12,
        max_phonemes=16,
        max_frames=32,
        n_mels=8,
    )
    base = dict(
        model=model,
        checkpoint_dir=str(tmp_path / "ckpt"),
        batch_size=8,
        max_steps=20,
        eval_every=10,
        seed=3,
        lr=1e-3,
    )
    base.update(overrides)
    return TrainConfig(**base)


class TestMakeBatches:
    def test_batch_count(self, tiny_corpus, tiny_model_config):
        batches = list(make_batches(tiny_corpus, tiny_model_config, 32, epoch_seed(0, 0)))
        assert len(batches) == len(tiny_corpus) // 32

    def test_same_seed_same_order(self, tiny_corpus, tiny_model_config):
        a = list(make_batches(tiny_corpus, tiny_model_config, 16, 42))
        b = list(make_batches(tiny_corpus, tiny_model_config, 16, 42))
        for x, y in zip(a, b):
            assert (x.indices == y.indices).all()
            assert (x.ids == y.ids).all()

    def test_epoch_is_a_partial_permutation(self, tiny_corpus, tiny_model_config):
        batches = list(make_batches(tiny_corpus, tiny_model_config, 16, 7))
        seen = np.concatenate([b.indices for b in batches])
        assert len(set(seen.tolist())) == len(seen)
        assert set(seen.tolist()) <= set(range(len(tiny_corpus)))

    def test_matched_pairs_share_index(self, tiny_corpus, tiny_model_config):
        batch = next(make_batches(tiny_corpus, tiny_model_config, 8, 1))
        for row, idx in enumerate(batch.indices):
            seq = tiny_corpus.phonemes[idx]
            assert batch.ids[row, 1 : 1 + len(seq)].tolist() == seq.tolist()
            frames = tiny_corpus.mels[idx].shape[0]
            assert batch.mel_lengths[row] == frames

    def test_too_small_corpus_rejected(self, tiny_corpus, tiny_model_config):
        with pytest.raises(ValueError, match="fewer"):
            list(make_batches(tiny_corpus, tiny_model_config, len(tiny_corpus) + 1, 0))


class TestTrainStep:
    def test_first_step_loss_near_log_batch(self, tiny_corpus, tmp_path):
        config = small_train_config(tiny_corpus, tmp_path)
        state = init_state(config)
        batch = _build_batch(tiny_corpus, np.arange(8), config.model)
        loss = train_step(state, batch)
        assert abs(loss - np.log(8)) < 0.5
        assert state.step == 1

    def test_identical_state_and_batch_give_identical_result(self, tiny_corpus, tmp_path):
        config = small_train_config(tiny_corpus, tmp_path)
        batch = _build_batch(tiny_corpus, np.arange(8), config.model)
        runs = []
        for _ in range(2):
            state = init_state(config)
            loss = train_step(state, batch)
            runs.append((loss, {k: v.copy() for k, v in state.params.items()}))
        assert runs[0][0] == runs[1][0]
        for k in runs[0][1]:
            assert (runs[0][1][k] == runs[1][1][k]).all()

    def test_overfits_fixed_eight_pair_batch(self, tiny_corpus, tmp_path):
        config = small_train_config(tiny_corpus, tmp_path, lr=3e-3, max_steps=200)
        state = init_state(config)
        batch = _build_batch(tiny_corpus, np.arange(8), config.model)
        loss = np.inf
        for _ in range(200):
            loss = train_step(state, batch)
        assert loss < 0.05

    def test_shared_integrator_stays_shared_after_updates(self, tiny_corpus, tmp_path):
        config = small_train_config(tiny_corpus, tmp_path)
        state = init_state(config)
        batch = _build_batch(tiny_corpus, np.arange(8), config.model)
        for _ in range(3):
            train_step(state, batch)
        # one parameter set serves both encoders, so equality is structural
        assert "integ.lstm.Wx" in state.params
        assert not any(k.startswith("phon_integ") for k in state.params)

    def test_nonfinite_loss_raises(self, tiny_corpus, tmp_path):
        config = small_train_config(tiny_corpus, tmp_path)
        state = init_state(config)
        state.params["phon.embed"][:] = np.inf
        batch = _build_batch(tiny_corpus, np.arange(8), config.model)
        with pytest.raises(TrainingDivergedError):
            train_step(state, batch)


class TestFit:
    def test_eval_cadence(self, tiny_corpus, tiny_dev_corpus, tmp_path):
        config = small_train_config(
            tiny_corpus, tmp_path, max_steps=100, eval_every=25
        )
        _, history = fit(config, train_corpus=tiny_corpus, dev_corpus=tiny_dev_corpus)
        assert len(history["evals"]) == 4
        assert [e["step"] for e in history["evals"]] == [25, 50, 75, 100]
        metrics = (tmp_path / "ckpt" / "metrics.jsonl").read_text().splitlines()
        assert len(metrics) == 4

    def test_loss_trend_decreases(self, tiny_corpus, tiny_dev_corpus, tmp_path):
        config = small_train_config(tiny_corpus, tmp_path, max_steps=120, eval_every=60)
        _, history = fit(config, train_corpus=tiny_corpus, dev_corpus=tiny_dev_corpus)
        losses = history["losses"]
        assert np.mean(losses[-20:]) < np.mean(losses[:20])

    def test_resume_matches_uninterrupted_run(self, tiny_corpus, tiny_dev_corpus, tmp_path):
        full_cfg = small_train_config(
            tiny_corpus, tmp_path / "full", max_steps=40, eval_every=20
        )
        _, full_hist = fit(full_cfg, train_corpus=tiny_corpus, dev_corpus=tiny_dev_corpus)

        half_cfg = small_train_config(
            tiny_corpus, tmp_path / "half", max_steps=20, eval_every=20
        )
        _, _ = fit(half_cfg, train_corpus=tiny_corpus, dev_corpus=tiny_dev_corpus)
        resume_cfg = small_train_config(
            tiny_corpus, tmp_path / "half", max_steps=40, eval_every=20
        )
        _, resumed_hist = fit(
            resume_cfg,
            resume_from=tmp_path / "half" / "ckpt" / "step_0000020.sckp",
            train_corpus=tiny_corpus,
            dev_corpus=tiny_dev_corpus,
        )
        full_tail = np.array(full_hist["losses"][20:])
        resumed = np.array(resumed_hist["losses"])
        assert resumed.shape == full_tail.shape
        np.testing.assert_allclose(resumed, full_tail, atol=1e-6)

    def test_two_runs_same_dir_are_byte_identical(
        self, tiny_corpus, tiny_dev_corpus, tmp_path
    ):
        config = small_train_config(tiny_corpus, tmp_path, max_steps=15, eval_every=5)
        fit(config, train_corpus=tiny_corpus, dev_corpus=tiny_dev_corpus)
        first = (tmp_path / "ckpt" / "final.sckp").read_bytes()
        fit(config, train_corpus=tiny_corpus, dev_corpus=tiny_dev_corpus)
        second = (tmp_path / "ckpt" / "final.sckp").read_bytes()
        assert first == second


class TestCheckpointState:
    def test_roundtrip_restores_everything(self, tiny_corpus, tiny_dev_corpus, tmp_path):
        config = small_train_config(tiny_corpus, tmp_path, max_steps=12, eval_every=6)
        state, _ = fit(config, train_corpus=tiny_corpus, dev_corpus=tiny_dev_corpus)
        path = tmp_path / "snap.sckp"
        save_checkpoint(state, path)
        loaded = load_checkpoint(path)
        assert loaded.step == state.step
        assert loaded.config == config
        for k in state.params:
            assert (loaded.params[k] == state.params[k]).all()
            assert (loaded.adam_m[k] == state.adam_m[k]).all()
            assert (loaded.adam_v[k] == state.adam_v[k]).all()
        assert loaded.rng.bit_generator.state == state.rng.bit_generator.state
        # identical encodes on a probe batch
        probe = [PhonemeSequence([3, 4, 5])]
        a = encode_phonemes(probe, state.params, config.model).rows
        b = encode_phonemes(probe, loaded.params, loaded.config.model).rows
        assert (a == b).all()

    def test_ablation_flags_roundtrip(self, tiny_corpus, tmp_path):
        config = small_train_config(tiny_corpus, tmp_path)
        config = TrainConfig.from_dict(
            {**config.to_dict(),
             "model": {**config.model.to_dict(),
                       "share_integrator": False, "use_integrator": False}}
        )
        state = init_state(config)
        save_checkpoint(state, tmp_path / "ab.sckp")
        loaded = load_checkpoint(tmp_path / "ab.sckp")
        assert loaded.config.model.share_integrator is False
        assert loaded.config.model.use_integrator is False

    def test_not_a_checkpoint_rejected(self, tmp_path):
        from scraps.checkpoint import write_container

        write_container(tmp_path / "x.sckp", {"kind": "backbone"}, {})
        with pytest.raises(CheckpointError, match="checkpoint"):
            load_checkpoint(tmp_path / "x.sckp")


def test_train_config_validation():
    model = desk_model_config()
    with pytest.raises(ValueError):
        TrainConfig(model=model, batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(model=model, lr=0.0)
    with pytest.raises(ValueError):
        TrainConfig(model=model, max_steps=0)
