import pytest

from risched_trainer.scenario import TrainScenario
from risched_trainer.train import train_ris_gnn, train_scheduling_gnn


def toy_scenario(**overrides) -> TrainScenario:
    kw = dict(M=2, N=8, K=4, D_theta=3, D_beta=1, seed=0)
    kw.update(overrides)
    return TrainScenario(**kw)


@pytest.fixture(scope="session")
def trained_sched():
    """Official toy-scale scheduling run: 50 epochs x 1e4 samples."""
    sc = toy_scenario()
    return sc, train_scheduling_gnn(sc, epochs=50, lr=1e-3, samples_per_epoch=10_000,
                                    batch_size=500, hidden=64, seed=1)


@pytest.fixture(scope="session")
def trained_ris():
    sc = toy_scenario()
    return sc, train_ris_gnn(sc, epochs=25, lr=1e-3, samples_per_epoch=6_000,
                             batch_size=500, hidden=64, seed=2)
