import numpy as np
import pytest

from lexsem.model import ModelConfig, init_params


def tiny_config(**overrides) -> ModelConfig:
    fields = dict(
        task="multilabel",
        num_labels=3,
        embed_dim=3,
        chunk_size=4,
        chunk_hidden=2,
        doc_hidden=2,
        attention_dim=2,
        dropout=0.0,
    )
    fields.update(overrides)
    return ModelConfig(**fields)


def params_as_lists(params) -> dict:
    return {name: t.data.tolist() for name, t in params.items()}


def random_chunks(rng: np.random.Generator, k: int, dim: int, max_rows: int = 4):
    return [rng.normal(size=(int(rng.integers(1, max_rows + 1)), dim)) for _ in range(k)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model(rng):
    config = tiny_config()
    params = init_params(config, seed=7)
    # move off the zero-bias init so gradients are generic
    for t in params.values():
        t.data = rng.normal(size=t.data.shape) * 0.4
    return config, params
