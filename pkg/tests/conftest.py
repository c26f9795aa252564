import numpy as np
import pytest

from scraps.corpus import SynthConfig, load_corpus, synth_corpus
from scraps.model.config import ModelConfig
from scraps.model.params import init_params


@pytest.fixture(scope="session")
def tiny_model_config():
    return ModelConfig(
        vocab_size=13,
        n_layers=1,
        n_heads=2,
        d_model=16,
        dropout=0.1,
        d_embed=12,
        max_phonemes=16,
        max_frames=32,
        n_mels=8,
    )


@pytest.fixture(scope="session")
def tiny_params(tiny_model_config):
    return init_params(tiny_model_config, np.random.default_rng(11))


@pytest.fixture(scope="session")
def tiny_corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_corpus")
    config = SynthConfig(
        vocab_size=10,
        n_utterances=96,
        seq_len_range=(3, 8),
        frames_per_phoneme_range=(2, 3),
        noise_sigma=0.3,
        speaker_bias_sigma=0.1,
        seed=123,
        n_mels=8,
    )
    synth_corpus(config, out, dev_count=16)
    return out


@pytest.fixture(scope="session")
def tiny_corpus(tiny_corpus_dir):
    return load_corpus(tiny_corpus_dir / "manifest_train.jsonl")


@pytest.fixture(scope="session")
def tiny_dev_corpus(tiny_corpus_dir, tiny_corpus):
    return load_corpus(tiny_corpus_dir / "manifest_dev.jsonl", vocab=tiny_corpus.vocab)
