"""Randomized smoothing and fine-pruning defenses for trained models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Graph, GraphDataset
from .nn import TrainConfig, TrainedModel, activations, predict, train
from .rng import substream


@dataclass(frozen=True)
class SmoothingConfig:
    n_samples: int = 100
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class PruneConfig:
    prune_ratio: float = 0.0
    clean_fraction: float = 0.05
    finetune: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=20, learning_rate=1e-4))
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.prune_ratio <= 1.0):
            raise ValueError("prune_ratio must be in [0, 1]")


def majority_vote(votes) -> int:
    """Most frequent class; ties broken by lowest class index."""
    votes = np.asarray(votes, dtype=np.int64)
    counts = np.bincount(votes)
    return int(np.argmax(counts))


def smooth_votes(
    model: TrainedModel, g: Graph, cfg: SmoothingConfig, graph_index: int = 0
) -> np.ndarray:
    """Per-class vote histogram over n_samples feature-noise copies."""
    counts = np.zeros(model.config.num_classes, dtype=np.int64)
    for i in range(cfg.n_samples):
        if cfg.sigma == 0.0:
            noisy = g
        else:
            rng = substream(cfg.seed, "rs", graph_index, i)
            feats = g.features + rng.normal(0.0, cfg.sigma, size=g.features.shape)
            noisy = Graph(g.num_nodes, g.edges, feats, g.label)
        counts[predict(model, noisy)] += 1
    return counts


def smooth_predict(
    model: TrainedModel, g: Graph, cfg: SmoothingConfig, graph_index: int = 0
) -> int:
    """Majority class over the noisy copies; sigma=0 reduces to predict()."""
    counts = smooth_votes(model, g, cfg, graph_index)
    return int(np.argmax(counts))


def _smoothed_accuracy(model, ds: GraphDataset, cfg, hit_label=None) -> float:
    hits = 0
    for idx, g in enumerate(ds):
        pred = smooth_predict(model, g, cfg, idx)
        target = g.label if hit_label is None else hit_label
        hits += pred == target
    return hits / len(ds)


def rs_curve(
    model: TrainedModel,
    clean_test: GraphDataset,
    poisoned_tests: dict[int, GraphDataset],
    sigmas: list[float],
    cfg: SmoothingConfig,
) -> list[dict]:
    """Smoothed CA and per-target ASR for each noise level."""
    rows = []
    for sigma in sigmas:
        scfg = SmoothingConfig(cfg.n_samples, sigma, cfg.seed)
        row = {"sigma": sigma, "ca": _smoothed_accuracy(model, clean_test, scfg)}
        for target, pds in sorted(poisoned_tests.items()):
            row[f"asr_{target}"] = _smoothed_accuracy(model, pds, scfg, hit_label=target)
        rows.append(row)
    return rows


def _last_layer_unit_params(config, layer: int) -> tuple[list[str], list[str]]:
    """Parameter names carrying a hidden unit's incoming columns / bias."""
    if config.arch == "gin":
        return [f"layer{layer}.W2"], [f"layer{layer}.b2"]
    if config.arch == "sage":
        return [f"layer{layer}.W_self", f"layer{layer}.W_nbr"], [f"layer{layer}.b"]
    return [f"layer{layer}.W"], [f"layer{layer}.b"]


def prune_order(model: TrainedModel, clean_subset: GraphDataset) -> np.ndarray:
    """Last-hidden-layer units sorted by ascending mean activation
    (stable, so ties resolve to the lowest unit index)."""
    layer = model.config.num_layers - 1
    acc = np.zeros(model.config.hidden_dim)
    for g in clean_subset:
        acc += activations(model, g, layer)
    acc /= max(len(clean_subset), 1)
    return np.argsort(acc, kind="stable")


def prune_units(model: TrainedModel, units) -> TrainedModel:
    """Zero the weights into and out of the given last-hidden-layer units."""
    pruned = model.copy()
    layer = model.config.num_layers - 1
    w_names, b_names = _last_layer_unit_params(model.config, layer)
    for u in units:
        for name in w_names:
            pruned.params[name][:, u] = 0.0
        for name in b_names:
            pruned.params[name][u] = 0.0
        pruned.params["head.W"][u, :] = 0.0
    pruned.provenance = dict(model.provenance)
    pruned.provenance["pruned_units"] = sorted(int(u) for u in units)
    return pruned


def fine_prune(
    model: TrainedModel, clean_subset: GraphDataset, cfg: PruneConfig
) -> TrainedModel:
    """Fine-tune on clean data, then zero the lowest-activation hidden units."""
    tuned = model
    if cfg.finetune.epochs > 0:
        tuned = train(model, clean_subset, cfg.finetune)
    n_prune = int(round(cfg.prune_ratio * model.config.hidden_dim))
    if n_prune == 0:
        return tuned.copy()
    if n_prune == model.config.hidden_dim:
        import warnings

        warnings.warn("prune_ratio=1 zeroes every hidden unit", stacklevel=2)
    order = prune_order(tuned, clean_subset)
    return prune_units(tuned, order[:n_prune])


def fp_curve(
    model: TrainedModel,
    clean_subset: GraphDataset,
    clean_test: GraphDataset,
    poisoned_tests: dict[int, GraphDataset],
    prune_ratios: list[float],
    cfg: PruneConfig,
) -> list[dict]:
    """CA and per-target ASR per prune ratio; fine-tuning runs once."""
    from .evaluate import attack_success_rate, clean_accuracy

    tuned = model
    if cfg.finetune.epochs > 0:
        tuned = train(model, clean_subset, cfg.finetune)
    order = prune_order(tuned, clean_subset)
    rows = []
    for ratio in prune_ratios:
        n_prune = int(round(ratio * model.config.hidden_dim))
        pruned = prune_units(tuned, order[:n_prune]) if n_prune else tuned
        row = {"prune_ratio": ratio, "ca": clean_accuracy(pruned, clean_test)}
        for target, pds in sorted(poisoned_tests.items()):
            row[f"asr_{target}"] = attack_success_rate(pruned, pds, target)
        rows.append(row)
    return rows


def curve_to_csv(rows: list[dict], knob: str) -> str:
    """Render a defense curve as aligned CSV with a (defense-knob, CA, ASRs) header."""
    if not rows:
        return ""
    asr_keys = [k for k in rows[0] if k.startswith("asr_")]
    header = [knob, "ca"] + asr_keys
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{row[k]:.6f}" if isinstance(row[k], float) else str(row[k]) for k in header))
    return "\n".join(lines) + "\n"
