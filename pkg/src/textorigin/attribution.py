"""Exact per-feature attributions for tree-ensemble predictions.

``tree_shap`` computes Shapley values of the cover-weighted conditional-
expectation game in polynomial time, by a recursion over decision paths
that maintains weights for every feature-subset size (extending the path
at each split, unwinding when a feature repeats). ``brute_force_shap``
computes the same values by enumerating feature subsets directly and is
kept solely as an independent check.

Attributions are in margin (log-odds) units, where additivity is exact:
base_value + sum(phi) equals the prediction margin.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .boostedtree import TreeEnsemble, TreeNode, predict_margin, _vector_to_row
from .errors import EmptyDataset, InconsistentCover, TooManyFeatures, UnknownFeature
from .schema import FEATURE_INDEX, FeatureVector

_COVER_RTOL = 1e-6


@dataclass
class Attribution:
    feature_names: list[str]
    phi: np.ndarray
    base_value: float
    margin: float
    feature_values: np.ndarray

    def by_name(self) -> dict[str, float]:
        return {n: float(p) for n, p in zip(self.feature_names, self.phi)}

    def value_of(self, name: str) -> float:
        return float(self.feature_values[self.feature_names.index(name)])


@dataclass
class EvidenceItem:
    feature: str
    value: float
    phi: float


@dataclass
class GlobalImportance:
    feature_names: list[str]
    mean_abs_phi: np.ndarray
    sample_count: int


@dataclass
class DependenceSeries:
    feature: str
    pairs: list[tuple[float, float]]    # (feature value, phi) per sample


# --------------------------------------------------------------------------
# Fast path: subset-weight recursion along decision paths
# --------------------------------------------------------------------------

class _PathElement:
    __slots__ = ("d", "z", "o", "w")

    def __init__(self, d: int, z: float, o: float, w: float):
        self.d = d      # feature index; -1 for the root sentinel
        self.z = z      # fraction of cover-weighted paths that continue here
        self.o = o      # 1.0 when x satisfies every split on this feature
        self.w = w      # weight share per subset size


def _extend(path: list[_PathElement], pz: float, po: float, pi: int) -> None:
    l = len(path)
    path.append(_PathElement(pi, pz, po, 1.0 if l == 0 else 0.0))
    for i in range(l - 1, -1, -1):
        path[i + 1].w += po * path[i].w * (i + 1) / (l + 1)
        path[i].w = pz * path[i].w * (l - i) / (l + 1)


def _unwind(path: list[_PathElement], k: int) -> None:
    d = len(path) - 1
    o, z = path[k].o, path[k].z
    n = path[d].w
    for i in range(d - 1, -1, -1):
        if o != 0.0:
            tmp = path[i].w
            path[i].w = n * (d + 1) / ((i + 1) * o)
            n = tmp - path[i].w * z * (d - i) / (d + 1)
        else:
            path[i].w = path[i].w * (d + 1) / (z * (d - i))
    for i in range(k, d):
        path[i].d = path[i + 1].d
        path[i].z = path[i + 1].z
        path[i].o = path[i + 1].o
    path.pop()


def _unwound_sum(path: list[_PathElement], k: int) -> float:
    d = len(path) - 1
    o, z = path[k].o, path[k].z
    n = path[d].w
    total = 0.0
    if o != 0.0:
        for i in range(d - 1, -1, -1):
            tmp = n / ((i + 1) * o)
            total += tmp
            n = path[i].w - tmp * z * (d - i)
    else:
        for i in range(d - 1, -1, -1):
            total += path[i].w / (z * (d - i))
    return total * (d + 1)


def _goes_left(node: TreeNode, row: np.ndarray) -> bool:
    v = row[node.feature_index]
    if math.isnan(v):
        return node.default_left
    return v < node.threshold


def _shap_recurse(node: TreeNode, row: np.ndarray, phi: np.ndarray,
                  parent_path: list[_PathElement], pz: float, po: float, pi: int) -> None:
    path = [_PathElement(e.d, e.z, e.o, e.w) for e in parent_path]
    _extend(path, pz, po, pi)

    if node.is_leaf:
        for i in range(1, len(path)):
            w = _unwound_sum(path, i)
            el = path[i]
            phi[el.d] += w * (el.o - el.z) * node.weight
        return

    hot, cold = (node.left, node.right) if _goes_left(node, row) else (node.right, node.left)
    iz, io = 1.0, 1.0
    k = next((j for j, e in enumerate(path) if e.d == node.feature_index), None)
    if k is not None:
        iz, io = path[k].z, path[k].o
        _unwind(path, k)
    _shap_recurse(hot, row, phi, path, iz * hot.cover / node.cover, io, node.feature_index)
    _shap_recurse(cold, row, phi, path, iz * cold.cover / node.cover, 0.0, node.feature_index)


def _validate_covers(node: TreeNode) -> None:
    if node.is_leaf:
        return
    child_sum = node.left.cover + node.right.cover
    if abs(node.cover - child_sum) > _COVER_RTOL * max(1.0, abs(node.cover)):
        raise InconsistentCover(
            f"node cover {node.cover} != children sum {child_sum}")
    if node.cover <= 0.0:
        raise InconsistentCover("non-positive cover on an internal node")
    _validate_covers(node.left)
    _validate_covers(node.right)


def _tree_expectation(node: TreeNode) -> float:
    """Cover-weighted mean leaf value: the tree's output with no features known."""
    if node.is_leaf:
        return node.weight
    return (_tree_expectation(node.left) * node.left.cover
            + _tree_expectation(node.right) * node.right.cover) / node.cover


def tree_shap(model: TreeEnsemble, x: FeatureVector | Mapping | np.ndarray) -> Attribution:
    """Exact Shapley attribution of a single prediction, summed over trees.

    base_value is the ensemble's cover-weighted expected margin;
    base_value + sum(phi) equals predict_margin(model, x) within 1e-6.
    """
    row = x if isinstance(x, np.ndarray) else _vector_to_row(model, x)
    phi = np.zeros(len(model.feature_names))
    base = model.base_score
    for tree in model.trees:
        _validate_covers(tree)
        base += _tree_expectation(tree)
        if not tree.is_leaf:
            _shap_recurse(tree, row, phi, [], 1.0, 1.0, -1)
    return Attribution(
        feature_names=list(model.feature_names),
        phi=phi,
        base_value=base,
        margin=predict_margin(model, row),
        feature_values=row,
    )


# --------------------------------------------------------------------------
# Oracle: direct subset enumeration
# --------------------------------------------------------------------------

def _walk_conditional(node: TreeNode, row: np.ndarray, known: frozenset[int]) -> float:
    """Expected leaf value when only the ``known`` features take x's values.

    Unknown features branch proportionally to child cover.
    """
    if node.is_leaf:
        return node.weight
    if node.feature_index in known:
        child = node.left if _goes_left(node, row) else node.right
        return _walk_conditional(child, row, known)
    return (_walk_conditional(node.left, row, known) * node.left.cover
            + _walk_conditional(node.right, row, known) * node.right.cover) / node.cover


def _used_features(node: TreeNode, out: set[int]) -> None:
    if not node.is_leaf:
        out.add(node.feature_index)
        _used_features(node.left, out)
        _used_features(node.right, out)


def brute_force_shap(model: TreeEnsemble, x: FeatureVector | Mapping | np.ndarray) -> Attribution:
    """Shapley values by the classic weighted sum over all feature subsets.

    Only usable when the ensemble touches at most 12 distinct features;
    features untouched by any split are null players with phi = 0.
    """
    row = x if isinstance(x, np.ndarray) else _vector_to_row(model, x)
    used: set[int] = set()
    for tree in model.trees:
        _validate_covers(tree)
        _used_features(tree, used)
    if len(used) > 12:
        raise TooManyFeatures(f"{len(used)} features used; brute force supports <= 12")

    players = sorted(used)
    m = len(players)

    def value(mask: int) -> float:
        known = frozenset(players[i] for i in range(m) if mask >> i & 1)
        return sum(_walk_conditional(t, row, known) for t in model.trees)

    values = [value(mask) for mask in range(1 << m)]
    fact = [math.factorial(i) for i in range(m + 1)]
    phi = np.zeros(len(model.feature_names))
    for i, feat in enumerate(players):
        for mask in range(1 << m):
            if mask >> i & 1:
                continue
            s = bin(mask).count("1")
            weight = fact[s] * fact[m - s - 1] / fact[m]
            phi[feat] += weight * (values[mask | (1 << i)] - values[mask])

    return Attribution(
        feature_names=list(model.feature_names),
        phi=phi,
        base_value=model.base_score + values[0],
        margin=predict_margin(model, row),
        feature_values=row,
    )


# --------------------------------------------------------------------------
# Aggregates and exports
# --------------------------------------------------------------------------

def global_importance(model: TreeEnsemble, dataset: Sequence | np.ndarray) -> GlobalImportance:
    """Mean absolute attribution per feature across a dataset."""
    rows = _as_rows(model, dataset)
    if len(rows) == 0:
        raise EmptyDataset("global importance needs at least one sample")
    acc = np.zeros(len(model.feature_names))
    for row in rows:
        acc += np.abs(tree_shap(model, row).phi)
    return GlobalImportance(
        feature_names=list(model.feature_names),
        mean_abs_phi=acc / len(rows),
        sample_count=len(rows),
    )


def dependence_series(model: TreeEnsemble, dataset: Sequence | np.ndarray,
                      feature: str) -> DependenceSeries:
    """(observed value, phi) pair for one feature on every sample."""
    if feature not in model.feature_names:
        raise UnknownFeature(f"model has no feature {feature!r}")
    idx = model.feature_names.index(feature)
    rows = _as_rows(model, dataset)
    if len(rows) == 0:
        raise EmptyDataset("dependence series needs at least one sample")
    pairs = []
    for row in rows:
        attr = tree_shap(model, row)
        pairs.append((float(row[idx]), float(attr.phi[idx])))
    return DependenceSeries(feature=feature, pairs=pairs)


def top_evidence(attr: Attribution, k: int = 3) -> tuple[list[EvidenceItem], list[EvidenceItem]]:
    """The k strongest positive (AI) and negative (human) contributions.

    Ties break by canonical feature order; a sign class returns fewer than
    k items when exhausted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")

    def canon(name: str) -> int:
        return FEATURE_INDEX.get(name, len(FEATURE_INDEX))

    items = [
        EvidenceItem(feature=n, value=float(v), phi=float(p))
        for n, v, p in zip(attr.feature_names, attr.feature_values, attr.phi)
    ]
    positive = sorted((e for e in items if e.phi > 0),
                      key=lambda e: (-e.phi, canon(e.feature)))[:k]
    negative = sorted((e for e in items if e.phi < 0),
                      key=lambda e: (e.phi, canon(e.feature)))[:k]
    return positive, negative


def _as_rows(model: TreeEnsemble, dataset) -> list[np.ndarray]:
    if isinstance(dataset, np.ndarray):
        if dataset.ndim != 2 or dataset.shape[1] != len(model.feature_names):
            raise EmptyDataset(
                f"expected (N, {len(model.feature_names)}) matrix, got {dataset.shape}")
        return [dataset[i] for i in range(dataset.shape[0])]
    return [x if isinstance(x, np.ndarray) else _vector_to_row(model, x) for x in dataset]


def write_importance_csv(gi: GlobalImportance, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "mean_abs_phi"])
        for name, val in zip(gi.feature_names, gi.mean_abs_phi):
            writer.writerow([name, repr(float(val))])


def write_dependence_csv(series: DependenceSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "value", "phi"])
        for value, phi in series.pairs:
            writer.writerow([series.feature, repr(value), repr(phi)])


def read_evidence_rows(items: Iterable[EvidenceItem]) -> list[dict]:
    return [{"feature": e.feature, "value": e.value, "phi": e.phi} for e in items]
