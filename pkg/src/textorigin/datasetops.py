"""Corpus ingestion, class balancing, splits, metrics, and ablations.

Datasets are pandas DataFrames with columns ``id, text, label, generator,
domain_topic`` plus optional precomputed feature columns under the 17
canonical names. ``label`` is "human" or "ai"; human rows carry generator
"human".
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .boostedtree import TrainConfig, TreeEnsemble, predict_margin_matrix, sigmoid, train
from .errors import MissingColumn, SingleClass, TooSmall, UnknownFeature
from .schema import FEATURE_NAMES

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("id", "text", "label", "generator", "domain_topic")
LABELS = ("human", "ai")


def read_dataset(path: str | Path) -> pd.DataFrame:
    """Load a UTF-8 CSV dataset and validate its schema.

    Labels must be consistent with generators: human rows carry generator
    "human" and vice versa; texts must be non-empty.
    """
    df = pd.read_csv(path, encoding="utf-8")
    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise MissingColumn(f"dataset lacks columns: {missing}")
    bad = set(df["label"].unique()) - set(LABELS)
    if bad:
        raise ValueError(f"labels must be 'human' or 'ai'; found {sorted(bad)}")
    mismatched = (df["label"] == "human") != (df["generator"] == "human")
    if mismatched.any():
        raise ValueError(
            f"{int(mismatched.sum())} rows have a label inconsistent with "
            "their generator")
    if df["text"].isna().any() or (df["text"].astype(str).str.strip() == "").any():
        raise ValueError("dataset contains empty texts")
    return df


def write_dataset(df: pd.DataFrame, path: str | Path) -> None:
    df.to_csv(path, index=False, encoding="utf-8")


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.85
    val: float = 0.05
    test: float = 0.10
    seed: int = 42

    def __post_init__(self):
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
        }


# --------------------------------------------------------------------------
# Balancing
# --------------------------------------------------------------------------

def _allocate(target: int, available: dict[str, int]) -> dict[str, int]:
    """Spread ``target`` samples across generators as evenly as possible.

    Equal integer quotas with the remainder given to lexicographically
    first generators; generators that run out contribute everything they
    have and the shortfall is redistributed among the rest.
    """
    alloc = {g: 0 for g in available}
    active = sorted(available)
    while target > 0 and active:
        base, extra = divmod(target, len(active))
        taken = 0
        still_active = []
        for i, g in enumerate(active):
            quota = base + (1 if i < extra else 0)
            take = min(quota, available[g] - alloc[g])
            alloc[g] += take
            taken += take
            if alloc[g] < available[g]:
                still_active.append(g)
        target -= taken
        active = still_active
        if taken == 0:
            break
    return alloc


def balance(df: pd.DataFrame, seed: int = 42) -> pd.DataFrame:
    """Downsample AI rows to a 1:1 class ratio, stratified per generator.

    Keeps every human row; AI generators contribute equal shares (with the
    remainder assigned lexicographically, and shortfalls redistributed).
    Sampling is without replacement under the fixed seed. Output is the
    human rows followed by the per-generator samples, index reset.
    """
    humans = df[df["label"] == "human"]
    ais = df[df["label"] == "ai"]
    if humans.empty or ais.empty:
        raise SingleClass("balancing requires both human and ai rows")

    target = len(humans)
    available = ais.groupby("generator").size().to_dict()
    if len(ais) < target:
        log.warning("only %d AI rows for %d human rows; keeping all AI rows",
                    len(ais), target)
        alloc = dict(available)
    else:
        alloc = _allocate(target, available)

    rng = np.random.default_rng(seed)
    parts = [humans]
    for gen in sorted(available):
        rows = ais[ais["generator"] == gen]
        n = alloc[gen]
        if n >= len(rows):
            parts.append(rows)
        else:
            chosen = np.sort(rng.choice(len(rows), size=n, replace=False))
            parts.append(rows.iloc[chosen])
    return pd.concat(parts, ignore_index=True)


# --------------------------------------------------------------------------
# Splitting
# --------------------------------------------------------------------------

def _largest_remainder(n: int, fractions: Sequence[float]) -> list[int]:
    exact = [n * f for f in fractions]
    counts = [math.floor(e) for e in exact]
    order = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in range(n - sum(counts)):
        counts[order[i]] += 1
    return counts


def split(df: pd.DataFrame, spec: SplitSpec = SplitSpec()
          ) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """Label-stratified train/val/test split; disjoint, exhaustive,
    deterministic under the seed."""
    if len(df) < 20:
        raise TooSmall(f"split needs >= 20 rows, got {len(df)}")
    rng = np.random.default_rng(spec.seed)
    buckets: list[list[np.ndarray]] = [[], [], []]
    for label in sorted(df["label"].unique()):
        positions = np.flatnonzero((df["label"] == label).to_numpy())
        shuffled = positions[rng.permutation(len(positions))]
        counts = _largest_remainder(len(positions), (spec.train, spec.val, spec.test))
        buckets[0].append(shuffled[:counts[0]])
        buckets[1].append(shuffled[counts[0]:counts[0] + counts[1]])
        buckets[2].append(shuffled[counts[0] + counts[1]:])
    out = []
    for chunks in buckets:
        positions = np.sort(np.concatenate(chunks))
        out.append(df.iloc[positions].reset_index(drop=True))
    return out[0], out[1], out[2]


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

def evaluate(pairs: Sequence[tuple[str, str]]) -> Metrics:
    """Standard binary metrics with ``ai`` as the positive class.

    0/0 ratios (no predicted or no actual positives) evaluate to 0.
    """
    if len(pairs) == 0:
        raise TooSmall("evaluate needs at least one prediction")
    tp = fp = tn = fn = 0
    for true, pred in pairs:
        if pred == "ai":
            tp, fp = (tp + 1, fp) if true == "ai" else (tp, fp + 1)
        else:
            fn, tn = (fn + 1, tn) if true == "ai" else (fn, tn + 1)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(
        accuracy=(tp + tn) / len(pairs),
        precision=precision, recall=recall, f1=f1,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def per_cell_f1(df: pd.DataFrame) -> pd.DataFrame:
    """F1 per (generator, topic) cell: generator rows are AI generators;
    each cell pools that generator's AI rows with the topic's human rows.

    Cells with no AI rows are NaN (absent), not 0. Rows and columns are
    sorted lexicographically.
    """
    for col in ("generator", "domain_topic", "label", "predicted"):
        if col not in df.columns:
            raise MissingColumn(f"per-cell F1 needs column {col!r}")
    generators = sorted(g for g in df["generator"].unique() if g != "human")
    topics = sorted(df["domain_topic"].unique())
    matrix = pd.DataFrame(np.nan, index=generators, columns=topics, dtype=float)
    for gen in generators:
        for topic in topics:
            in_topic = df["domain_topic"] == topic
            cell = df[in_topic & ((df["generator"] == gen) | (df["label"] == "human"))]
            if not (cell["label"] == "ai").any():
                continue
            m = evaluate(list(zip(cell["label"], cell["predicted"])))
            matrix.loc[gen, topic] = m.f1
    return matrix


# --------------------------------------------------------------------------
# Feature matrices and ablations
# --------------------------------------------------------------------------

def feature_matrix(df: pd.DataFrame, names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
    missing = [n for n in names if n not in df.columns]
    if missing:
        raise MissingColumn(f"dataset lacks feature columns: {missing}")
    return df[list(names)].to_numpy(dtype=np.float64)


def labels_vector(df: pd.DataFrame) -> np.ndarray:
    return (df["label"] == "ai").to_numpy(dtype=np.float64)


def train_on_dataframe(train_df: pd.DataFrame, val_df: pd.DataFrame | None,
                       cfg: TrainConfig, names: Sequence[str] = FEATURE_NAMES,
                       provenance: dict | None = None) -> TreeEnsemble:
    validation = None
    if val_df is not None and len(val_df):
        validation = (feature_matrix(val_df, names), labels_vector(val_df))
    return train(feature_matrix(train_df, names), labels_vector(train_df),
                 validation=validation, cfg=cfg, feature_names=names,
                 provenance=provenance)


def evaluate_model(model: TreeEnsemble, df: pd.DataFrame,
                   threshold: float = 0.5) -> Metrics:
    margins = predict_margin_matrix(model, feature_matrix(df, model.feature_names))
    predicted = np.where(sigmoid(margins) >= threshold, "ai", "human")
    return evaluate(list(zip(df["label"], predicted)))


def ablation_table(df: pd.DataFrame, families: dict[str, Sequence[str]],
                   cfg: TrainConfig | None = None,
                   spec: SplitSpec = SplitSpec()) -> list[tuple[str, Metrics]]:
    """Train one model per feature family plus the full set, evaluating
    every model on the identical test split."""
    if not families:
        raise ValueError("families must be non-empty")
    cfg = cfg or TrainConfig()
    for name, feats in families.items():
        unknown = set(feats) - set(FEATURE_NAMES)
        if unknown:
            raise UnknownFeature(f"family {name!r} references {sorted(unknown)}")

    train_df, val_df, test_df = split(df, spec)
    jobs = dict(families)
    if not any(tuple(f) == tuple(FEATURE_NAMES) for f in jobs.values()):
        jobs["all"] = FEATURE_NAMES

    results = []
    for name, feats in jobs.items():
        model = train_on_dataframe(train_df, val_df, cfg, names=tuple(feats))
        results.append((name, evaluate_model(model, test_df)))
    return results


def metrics_frame(rows: list[tuple[str, Metrics]]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"approach": name, **m.to_dict()} for name, m in rows]
    )
