import numpy as np
import pytest

from trusslat.datagen import DatagenConfig, generate_dataset
from trusslat.fe import homogenize_stiffness
from trusslat.graph import radius_for_density, reflect_to_cell
from trusslat.vae import ArchitectureConfig, LatentLayout, TrainConfig, train


@pytest.fixture(scope="session")
def small_records():
    """300 labeled structures, shared across fast tests."""
    records = generate_dataset(DatagenConfig(n_library=60, n_dataset=300, rng_seed=404))
    for rec in records:
        cell = radius_for_density(reflect_to_cell(rec.graph), 0.15)
        rec.properties = homogenize_stiffness(cell).components
    return records


TINY_LAYOUT = LatentLayout(8, 6, 2)
TINY_ARCH = ArchitectureConfig((64,), (32,), (64,), (32,), (32,))
TINY_TRAIN = TrainConfig(
    epochs=40, batch_size=64, rng_seed=11, beta_cycle=20, beta_onset=10, beta_slope=0.2
)


@pytest.fixture(scope="session")
def tiny_model(small_records):
    """A quickly trained model; accuracy is modest but behavior is exercised."""
    model, history = train(
        small_records, TINY_TRAIN, layout=TINY_LAYOUT, arch=TINY_ARCH
    )
    return model, history
