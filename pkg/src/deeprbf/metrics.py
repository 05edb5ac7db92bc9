"""Regression and congestion-classification metrics, and model evaluation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .data import NormStats, Supervised
from .errors import ConfigError, DimensionError
from .network import RbfNetwork, network_hash, predict
from .traffic import DEFAULT_THRESHOLDS, DensityProfile, Level, classify_densities

TASKS = ("regression", "congestion_classification")


def mae(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape != a.shape:
        raise DimensionError(f"length mismatch: {p.shape[0]} predictions, {a.shape[0]} actuals")
    if p.size == 0:
        raise DimensionError("mae of empty sequences")
    return float(np.mean(np.abs(p - a)))


class ClassificationMetrics(NamedTuple):
    accuracy: float
    precision: float
    recall: float
    f1: float


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def f1_score(precision, recall):
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def classification_metrics(predicted_labels, true_labels, positive_class=None) -> ClassificationMetrics:
    """Accuracy plus precision/recall/F1 from confusion counts.

    With ``positive_class`` the scores are one-vs-rest for that class;
    otherwise precision and recall are macro-averaged over every label seen
    in either sequence, and F1 is the harmonic mean of those two averages.
    An empty denominator scores 0.
    """
    p = np.asarray(predicted_labels)
    t = np.asarray(true_labels)
    if p.shape != t.shape or p.ndim != 1:
        raise DimensionError("predicted and true labels must be equal-length 1-D sequences")
    if p.size == 0:
        raise DimensionError("no labels")
    accuracy = float(np.mean(p == t))

    def pr(cls):
        tp = int(np.sum((p == cls) & (t == cls)))
        fp = int(np.sum((p == cls) & (t != cls)))
        fn = int(np.sum((p != cls) & (t == cls)))
        return _ratio(tp, tp + fp), _ratio(tp, tp + fn)

    if positive_class is not None:
        precision, recall = pr(positive_class)
    else:
        scores = [pr(c) for c in np.unique(np.concatenate([p, t]))]
        precision = float(np.mean([s[0] for s in scores]))
        recall = float(np.mean([s[1] for s in scores]))
    return ClassificationMetrics(accuracy, float(precision), float(recall), f1_score(precision, recall))


@dataclass
class EvaluationReport:
    task: str
    sample_count: int
    model_id: str
    mae: Optional[float] = None
    accuracy: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    seed: Optional[int] = None
    config_hash: Optional[str] = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def metric_items(self):
        names = ("mae",) if self.task == "regression" else ("accuracy", "precision", "recall", "f1")
        return [(n, getattr(self, n)) for n in names]


def reports_to_json(reports) -> str:
    return json.dumps({"reports": [r.to_dict() for r in reports]}, indent=1, sort_keys=True) + "\n"


def reports_from_json(text) -> list[EvaluationReport]:
    return [EvaluationReport.from_dict(d) for d in json.loads(text)["reports"]]


def reports_to_markdown(reports) -> str:
    lines = ["| model | task | metric | value | samples |", "|---|---|---|---|---|"]
    for r in reports:
        for name, value in r.metric_items():
            lines.append(f"| {r.model_id} | {r.task} | {name} | {value:.6g} | {r.sample_count} |")
    meta = sorted({(r.seed, r.config_hash) for r in reports}, key=str)
    lines.append("")
    for seed, h in meta:
        lines.append(f"seed: {seed}, config hash: {h}")
    return "\n".join(lines) + "\n"


def constant_predictor(input_dim, value, output_dim=1) -> RbfNetwork:
    """A network with no hidden layers that outputs ``value`` for every input."""
    return RbfNetwork(
        input_dim, (), np.zeros((output_dim, input_dim)), np.full(output_dim, float(value)), "linear"
    )


def predicted_flows(net: RbfNetwork, data: Supervised, target_stats: NormStats) -> np.ndarray:
    if data.X.shape[1] != net.input_dim:
        raise DimensionError(f"test features have {data.X.shape[1]} columns, model expects {net.input_dim}")
    return np.maximum(target_stats.inverse(predict(net, data.X))[:, 0], 0.0)


def congestion_labels(flows, data: Supervised, profile, thresholds):
    """``(predicted, true)`` levels; predicted density is predicted flow over the last observed speed."""
    speed = np.maximum(data.aux["last_speed"], 1e-9)
    predicted = classify_densities(flows / speed, profile, thresholds)
    true = classify_densities(data.aux["target_density"], profile, thresholds)
    return predicted, true


def evaluate(
    net: RbfNetwork,
    data: Supervised,
    task: str,
    target_stats: NormStats,
    profile: DensityProfile = DensityProfile(),
    thresholds=DEFAULT_THRESHOLDS,
    model_id: Optional[str] = None,
    seed=None,
    config_hash=None,
    provenance=None,
) -> EvaluationReport:
    """Score ``net`` on a normalized test set.

    ``regression`` reports MAE on denormalized flow (veh/h).
    ``congestion_classification`` maps actual and predicted flows to
    Free/Moderate/Congested through the density ratio and reports accuracy
    and macro precision/recall/F1.
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    if len(data) == 0:
        raise DimensionError("empty test set")
    flows = predicted_flows(net, data, target_stats)
    report = EvaluationReport(
        task=task,
        sample_count=len(data),
        model_id=model_id or network_hash(net),
        seed=seed,
        config_hash=config_hash,
        provenance=dict(provenance or {}),
    )
    if task == "regression":
        report.mae = mae(flows, data.aux["target_flow"])
    else:
        predicted, true = congestion_labels(flows, data, profile, thresholds)
        m = classification_metrics(predicted, true)
        report.accuracy, report.precision, report.recall, report.f1 = m
        report.provenance["classes"] = [lv.name.lower() for lv in Level]
    return report
