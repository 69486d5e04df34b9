import numpy as np
import pytest

import graphdoor as gd
from graphdoor.core import compute_stats, feature_range
from graphdoor.nn import init_model, train
from graphdoor.poison import InjectionStrategy, PoisonPlan, build_poisoned_dataset, select_hosts


def random_graph(rng, n, d, p=0.4, num_classes=3):
    iu, ju = np.triu_indices(n, 1)
    mask = rng.random(len(iu)) < p
    edges = tuple(zip(iu[mask].tolist(), ju[mask].tolist()))
    return gd.Graph(n, edges, rng.standard_normal((n, d)), int(rng.integers(num_classes)))


@pytest.fixture(scope="session")
def small_ds():
    return gd.generate_synthetic(3, 60, 20, 3, 1.5, seed=5)


@pytest.fixture(scope="session")
def small_split(small_ds):
    return gd.split(small_ds, gd.SplitSpec(0.8, seed=1))


@pytest.fixture(scope="session")
def small_triggers(small_ds):
    stats = compute_stats(small_ds)
    lo, hi = feature_range(small_ds)
    spec = gd.TriggerSpec(0.4, 0.8, x_min=lo, x_max=hi, seed=3)
    return gd.generate_trigger_family(spec, stats, [0, 1, 2])


@pytest.fixture(scope="session")
def small_poisoned(small_split, small_triggers):
    train_set, _ = small_split
    hosts = select_hosts(train_set, small_triggers, 0.1, seed=9)
    plan = PoisonPlan(
        tuple(small_triggers), 0.1, 1, InjectionStrategy.RANDOM,
        tuple(tuple(h) for h in hosts), seed=11,
    )
    return build_poisoned_dataset(train_set, plan)


@pytest.fixture(scope="session")
def tiny_model(small_split):
    train_set, _ = small_split
    cfg = gd.ModelConfig("gin", 2, 32, 3, seed=2)
    return train(init_model(cfg, 3), train_set, gd.TrainConfig(epochs=15, seed=4))


@pytest.fixture(scope="session")
def tiny_backdoored(small_poisoned):
    cfg = gd.ModelConfig("gin", 2, 32, 3, seed=2)
    return train(
        init_model(cfg, 3), small_poisoned, gd.TrainConfig(epochs=40, seed=6)
    )
