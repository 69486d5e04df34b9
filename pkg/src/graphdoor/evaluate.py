"""Attack metrics (per-target ASR, CA, CAD) and parameter sweeps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .core import EmptyDatasetError, GraphDataset
from .nn import TrainedModel, predict_dataset
from .poison import InjectionStrategy, poison_test_set
from .triggers import Trigger


@dataclass
class AttackReport:
    asr: dict[int, float]  # target class -> ASR
    ca: float
    clean_model_ca: float
    mechanism: str = "injection"
    config_hash: str = ""
    runtime: float | None = None
    clean_predictions: list[int] = field(default_factory=list)
    poisoned_predictions: dict[int, list[int]] = field(default_factory=dict)

    @property
    def cad(self) -> float:
        return self.clean_model_ca - self.ca

    @property
    def mean_asr(self) -> float:
        return sum(self.asr.values()) / len(self.asr)

    def to_dict(self, include_runtime: bool = False) -> dict:
        # runtime is excluded by default so reports are replay-identical;
        # timings live in the run manifest instead
        doc = {
            "mechanism": self.mechanism,
            "asr": {str(t): v for t, v in sorted(self.asr.items())},
            "mean_asr": self.mean_asr,
            "ca": self.ca,
            "clean_model_ca": self.clean_model_ca,
            "cad": self.cad,
            "config_hash": self.config_hash,
            "clean_predictions": self.clean_predictions,
            "poisoned_predictions": {
                str(t): v for t, v in sorted(self.poisoned_predictions.items())
            },
        }
        if include_runtime:
            doc["runtime"] = self.runtime
        return doc

    def to_csv(self) -> str:
        targets = sorted(self.asr)
        header = ["mechanism"] + [f"asr_{t}" for t in targets] + ["mean_asr", "ca", "cad"]
        row = [self.mechanism] + [f"{self.asr[t]:.6f}" for t in targets]
        row += [f"{self.mean_asr:.6f}", f"{self.ca:.6f}", f"{self.cad:.6f}"]
        return ",".join(header) + "\n" + ",".join(row) + "\n"


def attack_success_rate(model: TrainedModel, poisoned_test: GraphDataset, target: int) -> float:
    """Fraction of trigger-carrying test graphs predicted as the target class."""
    if len(poisoned_test) == 0:
        raise EmptyDatasetError("empty poisoned test set")
    preds = predict_dataset(model, poisoned_test)
    return sum(p == target for p in preds) / len(preds)


def clean_accuracy(model: TrainedModel, test: GraphDataset) -> float:
    if len(test) == 0:
        raise EmptyDatasetError("empty test set")
    preds = predict_dataset(model, test)
    return sum(p == g.label for p, g in zip(preds, test)) / len(preds)


def build_poisoned_tests(
    test: GraphDataset,
    triggers: list[Trigger],
    k: int,
    strategy: InjectionStrategy,
    seed: int,
    mechanism: str = "injection",
    exclude_target_class: bool = False,
) -> dict[int, GraphDataset]:
    return {
        trig.target_class: poison_test_set(
            test, trig, k, strategy, seed, mechanism, exclude_target_class
        )
        for trig in triggers
    }


def full_attack_eval(
    clean_model: TrainedModel,
    backdoored_model: TrainedModel,
    test: GraphDataset,
    triggers: list[Trigger],
    k: int,
    strategy: InjectionStrategy,
    seed: int,
    mechanism: str = "injection",
    exclude_target_class: bool = False,
    config_hash: str = "",
) -> AttackReport:
    """Table-shaped report: m ASRs, CA of the backdoored model, CAD."""
    poisoned_tests = build_poisoned_tests(
        test, triggers, k, strategy, seed, mechanism, exclude_target_class
    )
    clean_preds = predict_dataset(backdoored_model, test)
    ca = sum(p == g.label for p, g in zip(clean_preds, test)) / len(test)
    clean_model_preds = predict_dataset(clean_model, test)
    clean_model_ca = sum(p == g.label for p, g in zip(clean_model_preds, test)) / len(test)
    asr = {}
    poisoned_predictions = {}
    for target, pds in sorted(poisoned_tests.items()):
        preds = predict_dataset(backdoored_model, pds)
        poisoned_predictions[target] = preds
        asr[target] = sum(p == target for p in preds) / len(preds)
    return AttackReport(
        asr=asr,
        ca=ca,
        clean_model_ca=clean_model_ca,
        mechanism=mechanism,
        config_hash=config_hash,
        clean_predictions=clean_preds,
        poisoned_predictions=poisoned_predictions,
    )


@dataclass
class SweepCell:
    value: object
    status: str  # "ok" | "failed"
    report: AttackReport | None = None
    error: str = ""


@dataclass
class SweepGrid:
    parameter: str
    cells: list[SweepCell] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "cells": [
                {
                    "value": c.value,
                    "status": c.status,
                    "error": c.error,
                    "report": c.report.to_dict() if c.report else None,
                }
                for c in self.cells
            ],
        }

    def to_csv(self) -> str:
        lines = []
        header_done = False
        for c in self.cells:
            if c.status != "ok":
                lines.append(f"{c.value},failed,{c.error}")
                continue
            targets = sorted(c.report.asr)
            if not header_done:
                lines.insert(
                    0,
                    ",".join(
                        [self.parameter, "status"]
                        + [f"asr_{t}" for t in targets]
                        + ["mean_asr", "ca", "cad"]
                    ),
                )
                header_done = True
            row = [str(c.value), "ok"]
            row += [f"{c.report.asr[t]:.6f}" for t in targets]
            row += [
                f"{c.report.mean_asr:.6f}",
                f"{c.report.ca:.6f}",
                f"{c.report.cad:.6f}",
            ]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def save_report(report: AttackReport, json_path, csv_path=None) -> None:
    with open(json_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
    if csv_path is not None:
        with open(csv_path, "w") as fh:
            fh.write(report.to_csv())
