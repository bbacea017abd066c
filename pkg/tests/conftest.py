import numpy as np
import pytest

from feelsplit.data import Dataset, GlobalDataSpec
from feelsplit.energy import FleetConfig
from feelsplit.learning import TrainingConfig
from feelsplit.selection import SelectionConfig
from feelsplit.simulation import RunConfig


def random_dataset(rng, n, dim=8, classes=3):
    """Features on a coarse grid so identical and disjoint token sets both occur."""
    feats = rng.choice([0.0, 0.2, 0.7, 1.0], size=(n, dim))
    return Dataset(feats, rng.integers(0, classes, size=n))


@pytest.fixture
def small_cfg():
    return RunConfig(
        device_count=4,
        rounds=3,
        trials=2,
        subdatasets_per_device=2,
        master_seed=7,
        data=GlobalDataSpec(class_count=3, feature_dim=6, total_train_samples=120, noniid_shards_per_device=2),
        training=TrainingConfig(learning_rate=0.1, loss_kind="cross_entropy", epochs=1, batch_size=8),
        selection=SelectionConfig(participants_per_round=2, deadline=30.0),
        fleet=FleetConfig(initial_energy=(100.0, 101.0)),
    )


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
