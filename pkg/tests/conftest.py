import numpy as np
import pytest

from xanes_unmix import (
    Dictionary,
    EnergyGrid,
    ImageGeometry,
    SceneSpec,
    build_scene,
    default_states,
)


@pytest.fixture(scope="session")
def small_grid():
    return EnergyGrid(np.linspace(0.0, 39.0, 40))


@pytest.fixture(scope="session")
def tiny_scene():
    """Noiseless 12x12 two-state scene with per-pixel scaling."""
    spec = SceneSpec(
        geometry=ImageGeometry(12, 12),
        states=default_states(2),
        label_source="disks",
        scaling_range=(0.8, 1.2),
        sigma=0.0,
        seed=3,
    )
    return build_scene(spec)


@pytest.fixture(scope="session")
def random_dictionary():
    rng = np.random.default_rng(7)
    grid = EnergyGrid(np.arange(6, dtype=float))
    return Dictionary(grid, rng.normal(size=(6, 2)))
