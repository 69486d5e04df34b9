"""Regenerate frozen test fixtures. Run from the repo root:

    python3 tests/data/make_goldens.py
"""

import json
from pathlib import Path

import graphdoor as gd
from graphdoor.core import DatasetStats
from graphdoor.triggers import generate_trigger_family, trigger_to_dict

HERE = Path(__file__).parent


def trigger_golden():
    stats = DatasetStats(10, 32.63, 20.0, 3, 4, (3, 3, 2, 2))
    spec = gd.TriggerSpec(0.2, 0.8, x_min=0.0, x_max=1.0, seed=2024)
    trigs = generate_trigger_family(spec, stats, [0, 1, 2])
    doc = [
        {"num_nodes": t.num_nodes, "edges": [list(e) for e in t.graph.edges]}
        for t in trigs
    ]
    (HERE / "trigger_golden.json").write_text(json.dumps(doc, indent=1))


def defense_curve_golden():
    from graphdoor.core import compute_stats, feature_range
    from graphdoor.defenses import (
        PruneConfig,
        SmoothingConfig,
        curve_to_csv,
        fp_curve,
        rs_curve,
    )
    from graphdoor.evaluate import build_poisoned_tests
    from graphdoor.nn import init_model, train
    from graphdoor.poison import (
        InjectionStrategy,
        PoisonPlan,
        build_poisoned_dataset,
        select_hosts,
    )

    ds = gd.generate_synthetic(3, 60, 20, 3, 1.5, seed=5)
    train_set, test_set = gd.split(ds, gd.SplitSpec(0.8, seed=1))
    stats = compute_stats(ds)
    lo, hi = feature_range(ds)
    spec = gd.TriggerSpec(0.4, 0.8, x_min=lo, x_max=hi, seed=3)
    trigs = gd.generate_trigger_family(spec, stats, [0, 1, 2])
    hosts = select_hosts(train_set, trigs, 0.1, seed=9)
    plan = PoisonPlan(
        tuple(trigs), 0.1, 1, InjectionStrategy.RANDOM,
        tuple(tuple(h) for h in hosts), seed=11,
    )
    poisoned = build_poisoned_dataset(train_set, plan)
    cfg = gd.ModelConfig("gin", 2, 32, 3, seed=2)
    bd = train(init_model(cfg, 3), poisoned, gd.TrainConfig(epochs=40, seed=6))
    ptests = build_poisoned_tests(test_set, trigs, 1, InjectionStrategy.RANDOM, 7)
    rs_rows = rs_curve(bd, test_set, ptests, [0.0, 0.5, 1.0], SmoothingConfig(20, 0.0, 31))
    (HERE / "rs_curve_golden.csv").write_text(curve_to_csv(rs_rows, "sigma"))
    prune_cfg = PruneConfig(finetune=gd.TrainConfig(epochs=2, learning_rate=1e-4, seed=37))
    fp_rows = fp_curve(bd, train_set, test_set, ptests, [0.0, 0.25, 0.5], prune_cfg)
    (HERE / "fp_curve_golden.csv").write_text(curve_to_csv(fp_rows, "prune_ratio"))


if __name__ == "__main__":
    trigger_golden()
    defense_curve_golden()
    print("goldens written to", HERE)
