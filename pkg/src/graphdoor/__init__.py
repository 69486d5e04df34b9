"""graphdoor: multi-target subgraph-injection backdoor attacks on graph
classifiers, with randomized-smoothing and fine-pruning defenses."""

__version__ = "0.1.0"

from .core import (
    DatasetStats,
    FeatureKind,
    Graph,
    GraphDataset,
    compute_stats,
    degree,
    graphs_equal,
    relabel_to_degree_features,
)
from .triggers import Trigger, TriggerSpec, generate_trigger, generate_trigger_family
from .poison import InjectionStrategy, PoisonPlan, PoisonedDataset, inject, replace_attack
from .nn import ModelConfig, TrainConfig, TrainedModel, forward, predict, train
from .defenses import PruneConfig, SmoothingConfig, fine_prune, smooth_predict
from .evaluate import AttackReport, attack_success_rate, clean_accuracy, full_attack_eval
from .tu_io import SplitSpec, generate_synthetic, parse_tu, split, write_tu

__all__ = [
    "DatasetStats",
    "FeatureKind",
    "Graph",
    "GraphDataset",
    "compute_stats",
    "degree",
    "graphs_equal",
    "relabel_to_degree_features",
    "Trigger",
    "TriggerSpec",
    "generate_trigger",
    "generate_trigger_family",
    "InjectionStrategy",
    "PoisonPlan",
    "PoisonedDataset",
    "inject",
    "replace_attack",
    "ModelConfig",
    "TrainConfig",
    "TrainedModel",
    "forward",
    "predict",
    "train",
    "PruneConfig",
    "SmoothingConfig",
    "fine_prune",
    "smooth_predict",
    "AttackReport",
    "attack_success_rate",
    "clean_accuracy",
    "full_attack_eval",
    "SplitSpec",
    "generate_synthetic",
    "parse_tu",
    "split",
    "write_tu",
]
