"""Explainable machine-generated-text detection.

Extracts 17 interpretable signals from a text (readability, lexical
diversity, repetition, punctuation behavior, probability curvature, and a
pluggable neural detector score), decides with a gradient-boosted tree
ensemble, and attributes every decision with exact per-feature Shapley
values rendered as structured evidence and plain-language rationales.
"""

from .schema import FEATURE_NAMES, FeatureVector
from .textstats import Document, Lexicons, extract_stylometrics, load_lexicons, tokenize
from .curvature import ConditionalDistributionSequence, CurvatureResult, cpc_score
from .ngram_lm import NgramLanguageModel, ngram_lm_fit
from .boostedtree import TrainConfig, TreeEnsemble, predict_margin, predict_proba, train
from .attribution import Attribution, brute_force_shap, tree_shap, top_evidence
from .gateway import AnalyzeRequest, AnalyzerService, build_service, create_app

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES", "FeatureVector",
    "Document", "Lexicons", "tokenize", "extract_stylometrics", "load_lexicons",
    "ConditionalDistributionSequence", "CurvatureResult", "cpc_score",
    "NgramLanguageModel", "ngram_lm_fit",
    "TrainConfig", "TreeEnsemble", "train", "predict_margin", "predict_proba",
    "Attribution", "tree_shap", "brute_force_shap", "top_evidence",
    "AnalyzeRequest", "AnalyzerService", "build_service", "create_app",
    "__version__",
]
