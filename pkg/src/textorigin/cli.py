"""Command-line entry points.

Every command prints machine-readable output on stdout (line-delimited
JSON records, or CSV with ``--format csv``) and keeps diagnostics on
stderr. Report commands additionally write their CSV artifact and, unless
``--no-figures`` is given, a PNG figure next to it.

Exit codes: 0 ok, 2 usage, 3 data error, 4 backend error.
"""
from __future__ import annotations

import functools
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import boostedtree, datasetops, report
from .attribution import (
    dependence_series, global_importance, write_dependence_csv, write_importance_csv,
)
from .boostedtree import TrainConfig
from .curvature import cpc_score
from .errors import (
    BackendProtocol, BackendUnavailable, MissingColumn, TextOriginError,
)
from .gateway import AnalyzeRequest, build_logit_source, build_service, serve as run_server
from .ngram_lm import NgramLanguageModel, ngram_lm_fit
from .schema import FEATURE_FAMILIES, FEATURE_NAMES
from .synthcorpus import attach_features, make_synthetic_corpus
from .textstats import Document, load_lexicons


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (BackendUnavailable, BackendProtocol) as exc:
            click.echo(f"backend error: {exc}", err=True)
            sys.exit(4)
        except (TextOriginError, FileNotFoundError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
    return wrapper


def _emit(records: list[dict], fmt: str) -> None:
    if fmt == "csv":
        pd.DataFrame(records).to_csv(sys.stdout, index=False)
    else:
        for rec in records:
            click.echo(json.dumps(rec, sort_keys=True))


@click.group()
def main():
    """Explainable machine-generated-text detection toolkit."""


# --------------------------------------------------------------------------
# analyze
# --------------------------------------------------------------------------

@main.command()
@click.argument("input", type=click.Path(allow_dash=True), default="-")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--logit-backend", "logit_backend", multiple=True,
              help="ngram:PATH or http:URL for the curvature backend; "
                   "repeat to add fallbacks, tried in order.")
@click.option("--disable", "disabled", multiple=True,
              help="Feature name to disable (repeatable); scored at its training median.")
@click.option("--explain/--no-explain", default=True)
@click.option("--whole-file", is_flag=True,
              help="Treat the whole input as one document instead of one per line.")
@click.option("--jobs", default=1, show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
@guarded
def analyze(input, model_path, logit_backend, disabled, explain, whole_file,
            jobs, threshold):
    """Analyze texts; one EvidenceBundle JSON object per line on stdout."""
    service = build_service(model_path, logit_backend=logit_backend,
                            decision_threshold=threshold)
    raw = sys.stdin.read() if input == "-" else Path(input).read_text("utf-8")
    texts = [raw] if whole_file else [line for line in raw.splitlines() if line.strip()]
    if not any(t.strip() for t in texts):
        raise TextOriginError("no input text")

    def run(text: str) -> dict:
        req = AnalyzeRequest(text=text, disabled_features=frozenset(disabled),
                             explain=explain)
        return service.analyze(req).to_payload()

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            bundles = list(pool.map(run, texts))
    else:
        bundles = [run(t) for t in texts]
    for bundle in bundles:
        click.echo(json.dumps(bundle, sort_keys=True))


# --------------------------------------------------------------------------
# train / evaluate
# --------------------------------------------------------------------------

def _maybe_recompute(df: pd.DataFrame, recompute: bool, logit_backend: str | None):
    have_all = all(name in df.columns for name in FEATURE_NAMES)
    if have_all and not recompute:
        return df
    source = build_logit_source(logit_backend)
    if source is None or not isinstance(source, NgramLanguageModel):
        raise MissingColumn(
            "feature columns missing; recomputation needs --logit-backend ngram:PATH")
    if "bert_ai_score" not in df.columns:
        raise MissingColumn(
            "bert_ai_score column is required (precomputed); no neural backend is "
            "queried during batch recomputation")
    click.echo("recomputing text features and curvature...", err=True)
    return attach_features(df, source, load_lexicons())


@main.command()
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--model-out", required=True, type=click.Path())
@click.option("--rounds", default=200, show_default=True)
@click.option("--depth", default=4, show_default=True)
@click.option("--min-child-weight", default=1.0, show_default=True)
@click.option("--reg-lambda", default=1.0, show_default=True)
@click.option("--gamma", default=0.0, show_default=True)
@click.option("--learning-rate", default=0.1, show_default=True)
@click.option("--early-stopping", default=20, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--recompute", is_flag=True, help="Recompute features from text.")
@click.option("--logit-backend", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@guarded
def train(dataset, model_out, rounds, depth, min_child_weight, reg_lambda, gamma,
          learning_rate, early_stopping, seed, recompute, logit_backend, fmt):
    """Split 85/5/10, fit the meta-classifier, report val/test metrics."""
    df = datasetops.read_dataset(dataset)
    df = _maybe_recompute(df, recompute, logit_backend)
    cfg = TrainConfig(num_rounds=rounds, max_depth=depth,
                      min_child_weight=min_child_weight, lambda_=reg_lambda,
                      gamma=gamma, learning_rate=learning_rate,
                      early_stopping_rounds=early_stopping, seed=seed)
    spec = datasetops.SplitSpec(seed=seed)
    train_df, val_df, test_df = datasetops.split(df, spec)
    lexicons = load_lexicons()
    provenance = {
        "lexicon_hash": lexicons.content_hash,
        "backend_ids": [logit_backend or "precomputed"],
        "data_hash": hashlib.sha256(Path(dataset).read_bytes()).hexdigest(),
    }
    model = datasetops.train_on_dataframe(train_df, val_df, cfg, provenance=provenance)
    model_hash = boostedtree.save(model, model_out)
    records = []
    for name, part in (("val", val_df), ("test", test_df)):
        metrics = datasetops.evaluate_model(model, part)
        records.append({"split": name, **metrics.to_dict()})
    _emit(records, fmt)
    click.echo(f"model written to {model_out} ({model_hash[:12]}, "
               f"{len(model.trees)} trees)", err=True)


@main.command()
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--output", type=click.Path(), default=None, help="Metrics CSV path.")
@click.option("--per-cell", "per_cell", type=click.Path(), default=None,
              help="Write the generator x topic F1 matrix CSV here.")
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@guarded
def evaluate(dataset, model_path, output, per_cell, threshold, figures, fmt):
    """Score a dataset with a trained model and report metrics."""
    df = datasetops.read_dataset(dataset)
    model = boostedtree.load(model_path)
    margins = boostedtree.predict_margin_matrix(
        model, datasetops.feature_matrix(df, model.feature_names))
    df = df.assign(predicted=np.where(
        boostedtree.sigmoid(margins) >= threshold, "ai", "human"))
    metrics = datasetops.evaluate(list(zip(df["label"], df["predicted"])))
    _emit([metrics.to_dict()], fmt)
    if output:
        datasetops.metrics_frame([("all", metrics)]).to_csv(output, index=False)
        if figures:
            report.render_metrics_table([("all", metrics)], report.figure_path(output),
                                        title="Test metrics")
    if per_cell:
        matrix = datasetops.per_cell_f1(df)
        matrix.to_csv(per_cell, index_label="generator")
        if figures:
            report.render_heatmap(matrix, report.figure_path(per_cell))


# --------------------------------------------------------------------------
# balance / split / ablation
# --------------------------------------------------------------------------

@main.command()
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--seed", default=42, show_default=True)
@guarded
def balance(dataset, output, seed):
    """Downsample AI rows to a 1:1 class ratio, stratified per generator."""
    df = datasetops.read_dataset(dataset)
    balanced = datasetops.balance(df, seed=seed)
    datasetops.write_dataset(balanced, output)
    counts = balanced["label"].value_counts().to_dict()
    _emit([{"rows": len(balanced), "human": counts.get("human", 0),
            "ai": counts.get("ai", 0), "path": str(output)}], "json")


@main.command("split")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--output-dir", required=True, type=click.Path())
@click.option("--seed", default=42, show_default=True)
@guarded
def split_cmd(dataset, output_dir, seed):
    """Stratified 85/5/10 train/validation/test split."""
    df = datasetops.read_dataset(dataset)
    parts = datasetops.split(df, datasetops.SplitSpec(seed=seed))
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    record = {}
    for name, part in zip(("train", "val", "test"), parts):
        path = outdir / f"{name}.csv"
        datasetops.write_dataset(part, path)
        record[name] = {"rows": len(part), "path": str(path)}
    _emit([record], "json")


def _parse_families(specs: tuple[str, ...]) -> dict[str, tuple[str, ...]]:
    if not specs:
        return {k: v for k, v in FEATURE_FAMILIES.items() if k != "all"}
    families = {}
    for spec in specs:
        name, _, feats = spec.partition("=")
        families[name] = tuple(f.strip() for f in feats.split(",") if f.strip())
    return families


@main.command()
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--family", "families", multiple=True,
              help="name=feat1,feat2 (repeatable); default: stylometric/neural/curvature.")
@click.option("--output", type=click.Path(), default=None)
@click.option("--rounds", default=200, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@guarded
def ablation(dataset, families, output, rounds, seed, figures, fmt):
    """Train per-family models plus the full set; compare on one test split."""
    df = datasetops.read_dataset(dataset)
    rows = datasetops.ablation_table(
        df, _parse_families(families),
        cfg=TrainConfig(num_rounds=rounds, seed=seed),
        spec=datasetops.SplitSpec(seed=seed))
    _emit([{"approach": name, **m.to_dict()} for name, m in rows], fmt)
    if output:
        datasetops.metrics_frame(rows).to_csv(output, index=False)
        if figures:
            report.render_metrics_table(rows, report.figure_path(output),
                                        title="Feature-family ablation")


# --------------------------------------------------------------------------
# attribution exports
# --------------------------------------------------------------------------

@main.command("shap-global")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--output", type=click.Path(), default=None)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@guarded
def shap_global(dataset, model_path, output, figures, fmt):
    """Mean |phi| per feature across a dataset."""
    df = datasetops.read_dataset(dataset)
    model = boostedtree.load(model_path)
    gi = global_importance(model, datasetops.feature_matrix(df, model.feature_names))
    _emit([{"feature": n, "mean_abs_phi": float(v)}
           for n, v in zip(gi.feature_names, gi.mean_abs_phi)], fmt)
    if output:
        write_importance_csv(gi, output)
        if figures:
            report.render_importance(gi, report.figure_path(output))


@main.command("shap-dependence")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--feature", required=True)
@click.option("--output", type=click.Path(), default=None)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@guarded
def shap_dependence(dataset, model_path, feature, output, figures, fmt):
    """(value, phi) pairs for one feature across a dataset."""
    df = datasetops.read_dataset(dataset)
    model = boostedtree.load(model_path)
    series = dependence_series(
        model, datasetops.feature_matrix(df, model.feature_names), feature)
    _emit([{"feature": series.feature, "value": v, "phi": p}
           for v, p in series.pairs], fmt)
    if output:
        write_dependence_csv(series, output)
        if figures:
            report.render_dependence(series, report.figure_path(output))


# --------------------------------------------------------------------------
# language model / corpus / server
# --------------------------------------------------------------------------

@main.command("fit-lm")
@click.argument("corpus", type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--order", default=3, show_default=True)
@click.option("--alpha", default=0.5, show_default=True)
@click.option("--text-column", default="text", show_default=True)
@guarded
def fit_lm(corpus, output, order, alpha, text_column):
    """Fit the built-in n-gram language model on a corpus.

    CORPUS is a CSV with a text column, or a plain text file with one
    document per line.
    """
    path = Path(corpus)
    if path.suffix.lower() == ".csv":
        frame = pd.read_csv(path)
        if text_column not in frame.columns:
            raise MissingColumn(f"corpus lacks column {text_column!r}")
        docs = [str(t) for t in frame[text_column]]
    else:
        docs = [line for line in path.read_text("utf-8").splitlines() if line.strip()]
    lm = ngram_lm_fit(docs, order=order, smoothing_alpha=alpha)
    lm.save(output)
    sample = " ".join(docs[0].split()[:200])
    _emit([{"path": str(output), "order": lm.order, "alpha": lm.alpha,
            "vocab_size": lm.vocab_size,
            "sample_perplexity": lm.perplexity(sample)}], "json")


@main.command("synth-corpus")
@click.argument("output", type=click.Path())
@click.option("--n", default=4000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--lm-out", type=click.Path(), default=None,
              help="Also save the generator language model (NGLM).")
@guarded
def synth_corpus(output, n, seed, lm_out):
    """Generate a synthetic labeled corpus with all features precomputed."""
    df, lm = make_synthetic_corpus(n_docs=n, seed=seed)
    datasetops.write_dataset(df, output)
    if lm_out:
        lm.save(lm_out)
    _emit([{"rows": len(df), "path": str(output),
            "lm_path": str(lm_out) if lm_out else None,
            "vocab_size": lm.vocab_size}], "json")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--logit-backend", "logit_backend", multiple=True,
              help="Repeatable; later entries are fallbacks.")
@click.option("--webui", type=click.Path(), default=None,
              help="Directory with the built web UI bundle.")
@click.option("--threshold", default=0.5, show_default=True)
@guarded
def serve(model_path, host, port, logit_backend, webui, threshold):
    """Serve the HTTP API (and the web UI when a bundle is provided)."""
    service = build_service(model_path, logit_backend=logit_backend,
                            decision_threshold=threshold)
    webui_dir = webui or _default_webui_dir()
    click.echo(f"serving on {host}:{port} (model {service.model_hash[:12]})", err=True)
    run_server(service, host=host, port=port, webui_dir=webui_dir)


def _default_webui_dir() -> str | None:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return str(candidate) if (candidate / "index.html").is_file() else None


# --------------------------------------------------------------------------
# single-text curvature helper (useful for debugging backends)
# --------------------------------------------------------------------------

@main.command()
@click.argument("text")
@click.option("--logit-backend", required=True)
@guarded
def curvature(text, logit_backend):
    """Curvature score of one text under a logit backend."""
    source = build_logit_source(logit_backend)
    result = cpc_score(source.distributions(Document.from_raw(text)))
    _emit([{"score": result.score, "observed_loglik": result.observed_loglik,
            "expected_loglik": result.expected_loglik,
            "std_loglik": result.std_loglik,
            "positions_used": result.positions_used}], "json")


if __name__ == "__main__":
    main()
