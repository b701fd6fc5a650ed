from __future__ import annotations

import numpy as np
import pytest

from textorigin.boostedtree import TrainConfig
from textorigin.datasetops import SplitSpec, split, train_on_dataframe
from textorigin.synthcorpus import make_synthetic_corpus
from textorigin.textstats import load_lexicons


@pytest.fixture(scope="session")
def lexicons():
    return load_lexicons()


@pytest.fixture(scope="session")
def small_corpus():
    """800-document synthetic corpus with features, plus its language model."""
    df, lm = make_synthetic_corpus(n_docs=800, seed=11)
    return df, lm


@pytest.fixture(scope="session")
def trained_model(small_corpus):
    df, _ = small_corpus
    train_df, val_df, _ = split(df, SplitSpec(seed=3))
    return train_on_dataframe(train_df, val_df, TrainConfig(num_rounds=60, seed=3))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
