"""Gradient-boosted decision trees with logistic loss and Newton steps.

Each boosting round fits one regression tree to the first- and
second-order derivatives of the logistic loss (g = p - y, h = p(1 - p)),
using exact greedy split search over sorted feature values:

    gain = 1/2 [ G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda)
                 - (G_L+G_R)^2/(H_L+H_R+lambda) ] - gamma
    leaf weight = -G / (H + lambda)

Training is deterministic: no subsampling by default, ties on gain broken
by lowest feature index then lowest threshold, thresholds at midpoints of
adjacent distinct values. Node cover is the hessian sum, so
cover(parent) = cover(left) + cover(right) holds exactly.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    CorruptModel, DimensionMismatch, SchemaMismatch, SingleClass, VersionMismatch,
)
from .schema import FEATURE_NAMES, FeatureVector

_MODEL_VERSION = 1
# Clip keeps |margin| <= 30 while guaranteeing probabilities stay strictly
# inside (1e-13, 1 - 1e-13): exp(-29.5) ~ 1.5e-13.
_MARGIN_CLIP = 29.5
_PRIOR_EPS = 1e-6


@dataclass
class TreeNode:
    """Internal node (feature_index set) or leaf (feature_index None)."""

    cover: float
    feature_index: int | None = None
    threshold: float = 0.0
    default_left: bool = True
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"weight": self.weight, "cover": self.cover}
        return {
            "feature_index": self.feature_index,
            "threshold": self.threshold,
            "default_left": self.default_left,
            "cover": self.cover,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "weight" in d:
            return cls(cover=float(d["cover"]), weight=float(d["weight"]))
        return cls(
            cover=float(d["cover"]),
            feature_index=int(d["feature_index"]),
            threshold=float(d["threshold"]),
            default_left=bool(d["default_left"]),
            left=cls.from_dict(d["left"]),
            right=cls.from_dict(d["right"]),
        )


@dataclass
class TrainConfig:
    num_rounds: int = 200
    max_depth: int = 4
    min_child_weight: float = 1.0
    lambda_: float = 1.0
    gamma: float = 0.0
    learning_rate: float = 0.1
    early_stopping_rounds: int = 20
    seed: int = 42
    row_subsample: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TreeEnsemble:
    """Additive tree model plus the metadata the rest of the system needs.

    The learning rate is folded into stored leaf weights, so a margin is
    simply base_score plus the reached leaves' weights. feature_medians are
    the training medians, used for imputation and ablation masking.
    """

    trees: list[TreeNode]
    base_score: float
    learning_rate: float
    feature_names: list[str]
    feature_medians: list[float]
    provenance: dict = field(default_factory=dict)

    def median_of(self, name: str) -> float:
        return self.feature_medians[self.feature_names.index(name)]

    def content_hash(self) -> str:
        return hashlib.sha256(_canonical_payload(self).encode("utf-8")).hexdigest()


def sigmoid(margin: np.ndarray | float) -> np.ndarray | float:
    clipped = np.clip(margin, -_MARGIN_CLIP, _MARGIN_CLIP)
    return 1.0 / (1.0 + np.exp(-clipped))


def logistic_gradients(margins: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of logistic loss w.r.t. the margin."""
    p = sigmoid(margins)
    return p - labels, p * (1.0 - p)


def logistic_loss(margins: np.ndarray, labels: np.ndarray) -> float:
    p = np.clip(sigmoid(margins), 1e-15, 1.0 - 1e-15)
    return float(-(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)).mean())


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

def _leaf(g_sum: float, h_sum: float, lam: float, rate: float) -> TreeNode:
    return TreeNode(cover=h_sum, weight=rate * (-g_sum / (h_sum + lam)))


def _best_split(x_col: np.ndarray, g: np.ndarray, h: np.ndarray,
                cfg: TrainConfig) -> tuple[float, float, float, float] | None:
    """Best (gain, threshold, G_left, H_left) for one feature, or None."""
    order = np.argsort(x_col, kind="stable")
    xs = x_col[order]
    gl = np.cumsum(g[order])[:-1]
    hl = np.cumsum(h[order])[:-1]
    g_tot, h_tot = gl[-1] + g[order][-1], hl[-1] + h[order][-1]
    gr = g_tot - gl
    hr = h_tot - hl

    lam = cfg.lambda_
    parent = g_tot * g_tot / (h_tot + lam)
    gains = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - cfg.gamma
    valid = (xs[1:] != xs[:-1]) & (hl >= cfg.min_child_weight) & (hr >= cfg.min_child_weight)
    if not valid.any():
        return None
    gains = np.where(valid, gains, -np.inf)
    i = int(np.argmax(gains))    # first max: lowest threshold wins ties
    if not gains[i] > 0.0:
        return None
    threshold = (xs[i] + xs[i + 1]) / 2.0
    return float(gains[i]), threshold, float(gl[i]), float(hl[i])


def _build_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, medians: np.ndarray,
                cfg: TrainConfig, leaf_assignments: list[tuple[np.ndarray, float]]) -> TreeNode:
    def build(idx: np.ndarray, depth: int) -> TreeNode:
        g_sum = float(g[idx].sum())
        h_sum = float(h[idx].sum())
        if depth >= cfg.max_depth or idx.size < 2:
            node = _leaf(g_sum, h_sum, cfg.lambda_, cfg.learning_rate)
            leaf_assignments.append((idx, node.weight))
            return node

        best = None
        for f in range(X.shape[1]):
            cand = _best_split(X[idx, f], g[idx], h[idx], cfg)
            if cand is not None and (best is None or cand[0] > best[1][0]):
                best = (f, cand)
        if best is None:
            node = _leaf(g_sum, h_sum, cfg.lambda_, cfg.learning_rate)
            leaf_assignments.append((idx, node.weight))
            return node

        f, (_, threshold, _, _) = best
        mask = X[idx, f] < threshold
        node = TreeNode(
            cover=h_sum,
            feature_index=f,
            threshold=threshold,
            default_left=bool(medians[f] < threshold),
        )
        node.left = build(idx[mask], depth + 1)
        node.right = build(idx[~mask], depth + 1)
        return node

    return build(np.arange(X.shape[0]), 0)


def train(features: np.ndarray, labels: np.ndarray,
          validation: tuple[np.ndarray, np.ndarray] | None = None,
          cfg: TrainConfig | None = None,
          feature_names: Sequence[str] = FEATURE_NAMES,
          provenance: dict | None = None) -> TreeEnsemble:
    """Fit a boosted ensemble on an N x M feature matrix.

    Missing entries (NaN) are imputed with column medians before fitting;
    the medians are stored on the model for serving-time imputation.
    Early stopping monitors validation log-loss and keeps the best round.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"features {X.shape} incompatible with labels {y.shape}")
    if X.shape[1] != len(feature_names):
        raise DimensionMismatch(
            f"{X.shape[1]} columns but {len(feature_names)} feature names")
    if X.shape[0] < 2 or len(np.unique(y)) < 2:
        raise SingleClass("training requires >= 2 rows with both classes present")

    medians = np.nanmedian(X, axis=0)
    if np.isnan(medians).any():
        raise DimensionMismatch("a feature column is entirely NaN; cannot impute")
    X = np.where(np.isnan(X), medians, X)

    prior = min(max(float(y.mean()), _PRIOR_EPS), 1.0 - _PRIOR_EPS)
    base_score = math.log(prior / (1.0 - prior))
    margins = np.full(X.shape[0], base_score)

    val = None
    if validation is not None:
        Xv = np.asarray(validation[0], dtype=np.float64)
        Xv = np.where(np.isnan(Xv), medians, Xv)
        yv = np.asarray(validation[1], dtype=np.float64)
        val = (Xv, yv, np.full(Xv.shape[0], base_score))

    rng = np.random.default_rng(cfg.seed)
    trees: list[TreeNode] = []
    best_loss = np.inf
    best_round = -1

    for round_idx in range(cfg.num_rounds):
        g, h = logistic_gradients(margins, y)
        if cfg.row_subsample < 1.0:
            keep = rng.random(X.shape[0]) < cfg.row_subsample
            g = np.where(keep, g, 0.0)
            h = np.where(keep, h, 0.0)

        leaf_assignments: list[tuple[np.ndarray, float]] = []
        tree = _build_tree(X, g, h, medians, cfg, leaf_assignments)
        trees.append(tree)
        for idx, weight in leaf_assignments:
            margins[idx] += weight
        if tree.is_leaf:
            # No split improves the objective; further rounds cannot progress.
            break

        if val is not None:
            Xv, yv, val_margins = val
            for i in range(Xv.shape[0]):
                val_margins[i] += _traverse(tree, Xv[i])
            loss = logistic_loss(val_margins, yv)
            if loss < best_loss - 1e-12:
                best_loss = loss
                best_round = round_idx
            elif round_idx - best_round >= cfg.early_stopping_rounds:
                trees = trees[:best_round + 1]
                break

    return TreeEnsemble(
        trees=trees,
        base_score=base_score,
        learning_rate=cfg.learning_rate,
        feature_names=list(feature_names),
        feature_medians=[float(m) for m in medians],
        provenance=dict(provenance or {}, train_config=cfg.to_dict()),
    )


# --------------------------------------------------------------------------
# Prediction
# --------------------------------------------------------------------------

def _traverse(node: TreeNode, row: np.ndarray) -> float:
    while not node.is_leaf:
        v = row[node.feature_index]
        if np.isnan(v):
            node = node.left if node.default_left else node.right
        else:
            node = node.left if v < node.threshold else node.right
    return node.weight


def _vector_to_row(model: TreeEnsemble, x: FeatureVector | Mapping) -> np.ndarray:
    values = x.as_dict() if isinstance(x, FeatureVector) else x
    try:
        row = [values[name] for name in model.feature_names]
    except KeyError as exc:
        raise SchemaMismatch(f"input lacks model feature {exc}") from exc
    return np.array([np.nan if v is None else float(v) for v in row], dtype=np.float64)


def predict_margin(model: TreeEnsemble, x: FeatureVector | Mapping | np.ndarray) -> float:
    """base_score plus the reached leaf weight of every tree."""
    row = x if isinstance(x, np.ndarray) else _vector_to_row(model, x)
    if row.shape != (len(model.feature_names),):
        raise DimensionMismatch(f"expected {len(model.feature_names)} values, got {row.shape}")
    return model.base_score + sum(_traverse(t, row) for t in model.trees)


def predict_proba(model: TreeEnsemble, x: FeatureVector | Mapping | np.ndarray) -> float:
    return float(sigmoid(predict_margin(model, x)))


def predict_margin_matrix(model: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.full(X.shape[0], model.base_score)
    for i in range(X.shape[0]):
        for t in model.trees:
            out[i] += _traverse(t, X[i])
    return out


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def _payload(model: TreeEnsemble) -> dict:
    return {
        "version": _MODEL_VERSION,
        "feature_names": model.feature_names,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "feature_medians": model.feature_medians,
        "trees": [t.to_dict() for t in model.trees],
        "provenance": model.provenance,
    }


def _canonical_payload(model: TreeEnsemble) -> str:
    return json.dumps(_payload(model), sort_keys=True, separators=(",", ":"))


def save(model: TreeEnsemble, path: str | Path) -> str:
    """Write the versioned JSON model file; returns its content hash."""
    payload = _payload(model)
    digest = hashlib.sha256(
        json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()
    payload["content_hash"] = digest
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True), "utf-8")
    return digest


def load(path: str | Path) -> TreeEnsemble:
    try:
        payload = json.loads(Path(path).read_text("utf-8"))
    except (ValueError, OSError) as exc:
        raise CorruptModel(f"unreadable model file: {exc}") from exc
    if not isinstance(payload, dict) or "content_hash" not in payload:
        raise CorruptModel("model file lacks a content hash")
    stated = payload.pop("content_hash")
    actual = hashlib.sha256(
        json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()
    if stated != actual:
        raise CorruptModel("model file content hash mismatch")
    if payload.get("version") != _MODEL_VERSION:
        raise VersionMismatch(f"model version {payload.get('version')!r} unsupported")
    unknown = set(payload["feature_names"]) - set(FEATURE_NAMES)
    if unknown:
        raise SchemaMismatch(f"model declares unknown features: {sorted(unknown)}")
    return TreeEnsemble(
        trees=[TreeNode.from_dict(t) for t in payload["trees"]],
        base_score=float(payload["base_score"]),
        learning_rate=float(payload["learning_rate"]),
        feature_names=list(payload["feature_names"]),
        feature_medians=[float(m) for m in payload["feature_medians"]],
        provenance=payload.get("provenance", {}),
    )
