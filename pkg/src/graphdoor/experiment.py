"""Experiment configuration and the end-to-end attack pipeline.

The pipeline follows one fixed order: load data, split, train the clean
model, generate triggers, poison, train the backdoored model, evaluate,
then optional defenses and sweeps. Everything derives from one master seed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import time
from pathlib import Path

from . import __version__
from .core import FeatureKind, GraphdoorError, compute_stats, feature_range
from .defenses import (
    PruneConfig,
    SmoothingConfig,
    curve_to_csv,
    fp_curve,
    rs_curve,
)
from .evaluate import (
    AttackReport,
    SweepCell,
    SweepGrid,
    build_poisoned_tests,
    full_attack_eval,
    save_report,
)
from .nn import (
    ModelConfig,
    TrainConfig,
    dataset_hash,
    init_model,
    save_model,
    train,
)
from .poison import (
    InjectionStrategy,
    PoisonPlan,
    build_poisoned_dataset,
    build_replaced_dataset,
    save_plan,
    select_hosts,
)
from .rng import substream
from .triggers import TriggerSpec, generate_trigger_family, save_triggers
from .tu_io import SplitSpec, generate_synthetic, parse_tu, split

SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "out_dir": "runs/experiment",
    "threads": 1,
    "dataset": {
        "kind": "synthetic",
        "classes": 4,
        "per_class": 300,
        "nodes_mean": 30,
        "feature_dim": 3,
        "class_sep": 1.5,
        "degree_features": False,
    },
    "split": {"train_fraction": 0.8, "stratified": True},
    "model": {"arch": "gcn", "num_layers": 3, "hidden_dim": 64},
    "train": {
        "epochs": 100,
        "learning_rate": 1e-3,
        "batch_size": 32,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "weight_decay": 0.0,
    },
    "attack": {
        "n_targets": 3,
        "target_classes": None,  # default: first n_targets classes
        "poisoning_ratio": 0.05,
        "strategy": "random",
        "k": 1,
        "mechanism": "injection",
        "exclude_target_class": False,
        "trigger": {
            # null means the size/density rule is resolved from dataset stats:
            # size 0.20 when n_avg < 150 else 0.10; density 0.8 for intrinsic
            # features, 0.2 for degree features
            "size_fraction": None,
            "edge_density": None,
        },
    },
    "defenses": None,
    "sweep": None,
}

SWEEP_PARAMETERS = (
    "poisoning_ratio",
    "trigger_size",
    "edge_density",
    "k",
    "n_targets",
    "strategy",
    "trigger_size_x_edge_density",
)


class ConfigError(GraphdoorError):
    pass


class PipelineError(GraphdoorError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def load_config(path) -> dict:
    with open(path) as fh:
        user = json.load(fh)
    return _merge(DEFAULT_CONFIG, user)


def validate_config(cfg: dict) -> list[str]:
    """Full validation without execution; empty list means runnable."""
    diags: list[str] = []
    if cfg.get("schema_version") != SCHEMA_VERSION:
        diags.append(f"schema_version: expected {SCHEMA_VERSION}, got {cfg.get('schema_version')}")
    ds = cfg.get("dataset", {})
    kind = ds.get("kind")
    n_classes = None
    if kind == "synthetic":
        if ds.get("classes", 0) < 2:
            diags.append("dataset.classes: need at least 2 classes")
        n_classes = ds.get("classes")
    elif kind == "tu":
        path = ds.get("path")
        if not path:
            diags.append("dataset.path: required for kind 'tu'")
        elif not list(Path(path).glob("*_A.txt")):
            diags.append(f"dataset.path: no *_A.txt found in {path}")
    else:
        diags.append(f"dataset.kind: must be 'synthetic' or 'tu', got {kind!r}")
    sp = cfg.get("split", {})
    if not (0.0 < sp.get("train_fraction", 0.8) < 1.0):
        diags.append("split.train_fraction: must be in (0, 1)")
    model = cfg.get("model", {})
    if model.get("arch") not in ("gcn", "gin", "sage"):
        diags.append(f"model.arch: must be gcn/gin/sage, got {model.get('arch')!r}")
    atk = cfg.get("attack", {})
    m = atk.get("n_targets", 0)
    if m < 1:
        diags.append("attack.n_targets: must be >= 1")
    targets = atk.get("target_classes")
    if targets is not None:
        if len(set(targets)) != len(targets):
            diags.append("attack.target_classes: must be distinct")
        if n_classes is not None and any(t >= n_classes for t in targets):
            diags.append("attack.target_classes: class index out of range")
    if n_classes is not None and m > n_classes:
        diags.append("attack.n_targets: exceeds number of classes")
    r = atk.get("poisoning_ratio", 0.0)
    if not (0.0 < r < 1.0):
        diags.append("attack.poisoning_ratio: must be in (0, 1)")
    elif n_classes is not None and m:
        # pigeonhole on balanced classes: every class not in the target set is
        # drawn on by all m targets, a target class by the other m - 1
        demand = (m - 1 if m >= n_classes else m) * r
        if demand > 1.0:
            diags.append(
                f"attack.poisoning_ratio: oversubscribed, {m} targets x r={r} "
                f"need {demand:.2f} of each class"
            )
    if atk.get("strategy") not in [s.value for s in InjectionStrategy]:
        diags.append(f"attack.strategy: unknown strategy {atk.get('strategy')!r}")
    if atk.get("k", 0) < 1:
        diags.append("attack.k: must be >= 1")
    if atk.get("mechanism") not in ("injection", "replacement"):
        diags.append(f"attack.mechanism: must be injection or replacement")
    trig = atk.get("trigger", {})
    if trig.get("size_fraction") is not None and trig["size_fraction"] <= 0:
        diags.append("attack.trigger.size_fraction: must be positive")
    if trig.get("edge_density") is not None and not (0 < trig["edge_density"] <= 1):
        diags.append("attack.trigger.edge_density: must be in (0, 1]")
    sweep = cfg.get("sweep")
    if sweep is not None:
        if sweep.get("parameter") not in SWEEP_PARAMETERS:
            diags.append(f"sweep.parameter: must be one of {SWEEP_PARAMETERS}")
        if not sweep.get("values"):
            diags.append("sweep.values: must be a nonempty list")
    return diags


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, default=str).encode()
    ).hexdigest()


def _derived_seed(master: int, name: str) -> int:
    return int(substream(master, name).integers(2**62))


def load_dataset(cfg: dict):
    ds_cfg = cfg["dataset"]
    if ds_cfg["kind"] == "tu":
        ds = parse_tu(ds_cfg["path"])
    else:
        ds = generate_synthetic(
            ds_cfg["classes"],
            ds_cfg["per_class"],
            ds_cfg["nodes_mean"],
            ds_cfg["feature_dim"],
            ds_cfg["class_sep"],
            _derived_seed(cfg["seed"], "dataset"),
        )
    if ds_cfg.get("degree_features") and ds.feature_kind is not FeatureKind.DEGREE:
        from .core import relabel_to_degree_features

        ds = relabel_to_degree_features(ds)
    return ds


def resolve_trigger_spec(cfg: dict, ds) -> TriggerSpec:
    stats = compute_stats(ds)
    trig_cfg = cfg["attack"]["trigger"]
    size = trig_cfg.get("size_fraction")
    if size is None:
        size = 0.20 if stats.avg_nodes < 150 else 0.10
    density = trig_cfg.get("edge_density")
    degree = ds.feature_kind is FeatureKind.DEGREE
    if density is None:
        density = 0.2 if degree else 0.8
    if degree:
        return TriggerSpec(size, density, "degree", seed=_derived_seed(cfg["seed"], "triggers"))
    lo, hi = feature_range(ds)
    return TriggerSpec(
        size, density, "uniform", x_min=lo, x_max=hi,
        seed=_derived_seed(cfg["seed"], "triggers"),
    )


def _model_config(cfg: dict, num_classes: int) -> ModelConfig:
    m = cfg["model"]
    return ModelConfig(
        arch=m["arch"],
        num_layers=m["num_layers"],
        hidden_dim=m["hidden_dim"],
        num_classes=num_classes,
        seed=_derived_seed(cfg["seed"], "model-init"),
    )


def _train_config(cfg: dict, stage: str) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        epochs=t["epochs"],
        learning_rate=t["learning_rate"],
        beta1=t["beta1"],
        beta2=t["beta2"],
        eps=t["eps"],
        batch_size=t["batch_size"],
        weight_decay=t["weight_decay"],
        seed=_derived_seed(cfg["seed"], stage),
    )


def run_attack(cfg: dict, train_set, test_set, clean_model, cell_seed: int | None = None):
    """Poison, train the backdoored model, evaluate. Returns
    (triggers, plan, backdoored_model, report)."""
    seed = cfg["seed"] if cell_seed is None else cell_seed
    atk = cfg["attack"]
    targets = atk["target_classes"]
    if targets is None:
        targets = list(range(atk["n_targets"]))
    spec = resolve_trigger_spec(cfg, train_set)
    triggers = generate_trigger_family(
        spec, compute_stats(train_set), targets, train_set.feature_kind
    )
    strategy = InjectionStrategy(atk["strategy"])
    hosts = select_hosts(
        train_set, triggers, atk["poisoning_ratio"], _derived_seed(seed, "hosts")
    )
    plan = PoisonPlan(
        triggers=tuple(triggers),
        poisoning_ratio=atk["poisoning_ratio"],
        k=atk["k"],
        strategy=strategy,
        host_indices=tuple(tuple(h) for h in hosts),
        seed=_derived_seed(seed, "poison"),
    )
    if atk["mechanism"] == "replacement":
        poisoned = build_replaced_dataset(train_set, plan)
    else:
        poisoned = build_poisoned_dataset(train_set, plan)
    model_cfg = _model_config(cfg, train_set.num_classes)
    bd_model = train(
        init_model(model_cfg, train_set.feature_dim),
        poisoned,
        _train_config(cfg, f"train-backdoor-{seed}"),
    )
    report = full_attack_eval(
        clean_model,
        bd_model,
        test_set,
        triggers,
        atk["k"],
        strategy,
        _derived_seed(seed, "test-poison"),
        atk["mechanism"],
        atk["exclude_target_class"],
        config_hash(cfg),
    )
    return triggers, plan, bd_model, report


def run_sweep(cfg: dict, train_set, test_set, clean_model) -> SweepGrid:
    """Retrain and evaluate per swept value; failed cells are recorded."""
    sweep = cfg["sweep"]
    param = sweep["parameter"]
    grid = SweepGrid(parameter=param)
    for value in sweep["values"]:
        cell_cfg = copy.deepcopy(cfg)
        if param == "poisoning_ratio":
            cell_cfg["attack"]["poisoning_ratio"] = value
        elif param == "trigger_size":
            cell_cfg["attack"]["trigger"]["size_fraction"] = value
        elif param == "edge_density":
            cell_cfg["attack"]["trigger"]["edge_density"] = value
        elif param == "k":
            cell_cfg["attack"]["k"] = value
        elif param == "n_targets":
            cell_cfg["attack"]["n_targets"] = value
            cell_cfg["attack"]["target_classes"] = None
        elif param == "strategy":
            cell_cfg["attack"]["strategy"] = value
        elif param == "trigger_size_x_edge_density":
            cell_cfg["attack"]["trigger"]["size_fraction"] = value[0]
            cell_cfg["attack"]["trigger"]["edge_density"] = value[1]
        cell_seed = _derived_seed(cfg["seed"], f"sweep-{param}-{value}")
        try:
            _, _, _, report = run_attack(
                cell_cfg, train_set, test_set, clean_model, cell_seed
            )
            grid.cells.append(SweepCell(value=value, status="ok", report=report))
        except GraphdoorError as exc:
            grid.cells.append(SweepCell(value=value, status="failed", error=str(exc)))
    return grid


def run(cfg: dict, out_dir=None) -> dict:
    """Execute the full pipeline and write all artifacts. Returns a summary."""
    diags = validate_config(cfg)
    if diags:
        raise ConfigError("; ".join(diags))
    out = Path(out_dir if out_dir is not None else cfg["out_dir"])
    (out / "models").mkdir(parents=True, exist_ok=True)
    (out / "plans").mkdir(exist_ok=True)
    (out / "reports").mkdir(exist_ok=True)

    timings: dict[str, float] = {}

    def timed(stage, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except ConfigError:
            raise
        except GraphdoorError as exc:
            raise PipelineError(stage, str(exc)) from exc
        timings[stage] = time.perf_counter() - t0
        return result

    dataset = timed("dataset", lambda: load_dataset(cfg))
    split_spec = SplitSpec(
        cfg["split"]["train_fraction"],
        _derived_seed(cfg["seed"], "split"),
        cfg["split"]["stratified"],
    )
    train_set, test_set = timed("split", lambda: split(dataset, split_spec))

    model_cfg = _model_config(cfg, dataset.num_classes)
    clean_model = timed(
        "train-clean",
        lambda: train(
            init_model(model_cfg, dataset.feature_dim),
            train_set,
            _train_config(cfg, "train-clean"),
        ),
    )
    save_model(clean_model, out / "models" / "clean_model.json")

    triggers, plan, bd_model, report = timed(
        "attack", lambda: run_attack(cfg, train_set, test_set, clean_model)
    )
    save_model(bd_model, out / "models" / "backdoored_model.json")
    save_triggers(triggers, out / "plans" / "triggers.json")
    save_plan(plan, out / "plans" / "poison_plan.json")
    save_report(report, out / "reports" / "report.json", out / "reports" / "report.csv")

    defenses = cfg.get("defenses") or {}
    atk = cfg["attack"]
    strategy = InjectionStrategy(atk["strategy"])
    if defenses:
        poisoned_tests = build_poisoned_tests(
            test_set,
            triggers,
            atk["k"],
            strategy,
            _derived_seed(cfg["seed"], "test-poison"),
            atk["mechanism"],
            atk["exclude_target_class"],
        )
    if defenses.get("randomized_smoothing"):
        rs_cfg = defenses["randomized_smoothing"]
        smoothing = SmoothingConfig(
            n_samples=rs_cfg.get("n_samples", 100),
            sigma=0.0,
            seed=_derived_seed(cfg["seed"], "rs"),
        )
        rows = timed(
            "defense-rs",
            lambda: rs_curve(bd_model, test_set, poisoned_tests, rs_cfg["sigmas"], smoothing),
        )
        (out / "reports" / "rs_curve.csv").write_text(curve_to_csv(rows, "sigma"))
    if defenses.get("fine_pruning"):
        fp_cfg = defenses["fine_pruning"]
        clean_fraction = fp_cfg.get("clean_fraction", 0.05)
        n_sub = max(1, int(round(clean_fraction * len(train_set))))
        sub_rng = substream(cfg["seed"], "fp-subset")
        sub_idx = sorted(sub_rng.choice(len(train_set), size=n_sub, replace=False).tolist())
        clean_subset = train_set.replace_graphs(train_set.graphs[i] for i in sub_idx)
        prune_cfg = PruneConfig(
            clean_fraction=clean_fraction,
            finetune=TrainConfig(
                epochs=fp_cfg.get("finetune_epochs", 20),
                learning_rate=cfg["train"]["learning_rate"] / 10.0,
                batch_size=cfg["train"]["batch_size"],
                seed=_derived_seed(cfg["seed"], "fp-finetune"),
            ),
            seed=_derived_seed(cfg["seed"], "fp"),
        )
        rows = timed(
            "defense-fp",
            lambda: fp_curve(
                bd_model, clean_subset, test_set, poisoned_tests,
                fp_cfg["prune_ratios"], prune_cfg,
            ),
        )
        (out / "reports" / "fp_curve.csv").write_text(curve_to_csv(rows, "prune_ratio"))

    if cfg.get("sweep"):
        grid = timed("sweep", lambda: run_sweep(cfg, train_set, test_set, clean_model))
        param = cfg["sweep"]["parameter"]
        (out / "reports" / f"sweep_{param}.csv").write_text(grid.to_csv())
        with open(out / "reports" / f"sweep_{param}.json", "w") as fh:
            json.dump(grid.to_dict(), fh, indent=1, sort_keys=True)

    manifest = {
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "resolved_config": cfg,
        "config_hash": config_hash(cfg),
        "timings": timings,
        "hashes": {
            "dataset": dataset_hash(dataset),
            "train_set": dataset_hash(train_set),
            "test_set": dataset_hash(test_set),
            "poisoned_train": dataset_hash(
                build_poisoned_dataset(train_set, plan).dataset
                if atk["mechanism"] == "injection"
                else build_replaced_dataset(train_set, plan).dataset
            ),
        },
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return {"report": report, "out_dir": str(out), "manifest": manifest}
