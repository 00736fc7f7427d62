import numpy as np
import pytest

from cvkit import dataset as ds
from cvkit import mlp, pipeline, stellar
from cvkit.fock import FockCutoff

DESK_SEED = 20250810
DESK_COUNT = 2000
DESK_EPOCHS = 300
TRAIN_SEED = 7


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: desk-scale runs (dataset generation, training)")


@pytest.fixture(scope="session")
def cutoff9() -> FockCutoff:
    return FockCutoff(9)


@pytest.fixture(scope="session")
def desk_records():
    """2,000 generated, labeled, binned states (shared by the desk-scale
    acceptance criteria)."""
    return pipeline.generate_dataset(DESK_COUNT, stellar.GenerationRanges(),
                                     FockCutoff(9), seed=DESK_SEED)


@pytest.fixture(scope="session")
def desk_training(desk_records):
    """A 300-epoch training run on the desk dataset."""
    pairs = ds.training_pairs(desk_records)
    config = mlp.TrainConfig(epochs=DESK_EPOCHS, batch_size=64,
                             learning_rate=1e-3, dropout_rate=0.2,
                             seed=TRAIN_SEED)
    model = mlp.init_model(TRAIN_SEED)
    return mlp.train(model, pairs, config)
