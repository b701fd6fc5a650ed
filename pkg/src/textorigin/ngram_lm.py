"""Word-level n-gram language model with add-alpha smoothing and backoff.

A desk-scale stand-in for a large proxy language model: it produces the
per-position conditional distributions the curvature score consumes. A
context unseen at order k falls back to the order-(k-1) distribution of
the same position.

Serializes to a versioned binary file (magic ``NGLM``).
"""
from __future__ import annotations

import hashlib
import math
import struct
from pathlib import Path

import numpy as np

from .curvature import ConditionalDistributionSequence
from .errors import CorruptModel, EmptyCorpus, VersionMismatch
from .textstats import Document, tokenize

_MAGIC = b"NGLM"
_VERSION = 1
UNK = "<unk>"


class NgramLanguageModel:
    """Immutable after fit; safe for concurrent scoring."""

    def __init__(self, order: int, alpha: float, vocab: list[str],
                 tables: list[dict[tuple[int, ...], dict[int, int]]]):
        self.order = order
        self.alpha = alpha
        self.vocab = vocab
        self.vocab_index = {w: i for i, w in enumerate(vocab)}
        # tables[k-1] maps a (k-1)-token context to token counts at order k.
        self.tables = tables
        self._totals = [
            {ctx: sum(cnt.values()) for ctx, cnt in table.items()}
            for table in tables
        ]
        self.backend_id = f"ngram:o{order}:a{alpha:g}:{self.content_hash()[:12]}"

    # -- fitting ------------------------------------------------------------

    @classmethod
    def fit(cls, corpus: list[str | Document], order: int = 3,
            smoothing_alpha: float = 0.5, reserve_unk: bool = True
            ) -> "NgramLanguageModel":
        """Fit from raw documents.

        ``reserve_unk=True`` (the default) appends an out-of-vocabulary
        token so unseen words can be scored; without it the vocabulary is
        exactly the corpus types and unseen words are skipped at scoring.
        """
        if not 1 <= order <= 5:
            raise ValueError("order must be in [1, 5]")
        if smoothing_alpha <= 0:
            raise ValueError("smoothing_alpha must be > 0")
        if not corpus:
            raise EmptyCorpus("n-gram fit requires a non-empty corpus")

        token_lists = []
        for item in corpus:
            doc = item if isinstance(item, Document) else Document.from_raw(item)
            token_lists.append(tokenize(doc).word_tokens)

        types = sorted({w for toks in token_lists for w in toks})
        vocab = types + [UNK] if reserve_unk else types
        index = {w: i for i, w in enumerate(vocab)}

        tables: list[dict[tuple[int, ...], dict[int, int]]] = [{} for _ in range(order)]
        for toks in token_lists:
            ids = [index[w] for w in toks]
            for j, tok in enumerate(ids):
                for k in range(1, order + 1):
                    if j < k - 1:
                        continue
                    ctx = tuple(ids[j - k + 1:j])
                    slot = tables[k - 1].setdefault(ctx, {})
                    slot[tok] = slot.get(tok, 0) + 1
        return cls(order=order, alpha=smoothing_alpha, vocab=vocab, tables=tables)

    # -- conditionals -------------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def conditional(self, context_ids: tuple[int, ...]) -> np.ndarray:
        """Dense probability vector for the next token.

        Uses the longest stored suffix of the context; unseen contexts back
        off one order at a time down to the unigram, which always exists.
        """
        ctx = context_ids[-(self.order - 1):] if self.order > 1 else ()
        while ctx and ctx not in self.tables[len(ctx)]:
            ctx = ctx[1:]
        table = self.tables[len(ctx)][ctx]
        total = self._totals[len(ctx)][ctx]
        v = self.vocab_size
        probs = np.full(v, self.alpha, dtype=np.float64)
        for tok, cnt in table.items():
            probs[tok] += cnt
        probs /= total + self.alpha * v
        return probs

    def token_ids(self, words: tuple[str, ...] | list[str]) -> list[int]:
        """Map words to ids; OOV becomes the unk id, or is dropped when the
        model was fitted without one."""
        unk = self.vocab_index.get(UNK)
        if unk is None:
            return [self.vocab_index[w] for w in words if w in self.vocab_index]
        return [self.vocab_index.get(w, unk) for w in words]

    def distributions(self, doc: Document) -> ConditionalDistributionSequence:
        """LogitSource implementation: one conditional per token position."""
        ids = self.token_ids(tokenize(doc).word_tokens)
        if not ids:
            raise EmptyCorpus("document has no in-vocabulary tokens")
        logprobs = np.empty((len(ids), self.vocab_size), dtype=np.float64)
        for j in range(len(ids)):
            logprobs[j] = np.log(self.conditional(tuple(ids[max(0, j - self.order + 1):j])))
        return ConditionalDistributionSequence(
            observed=np.array(ids, dtype=np.int64), logprobs=logprobs)

    def logprob_tokens(self, words: tuple[str, ...] | list[str]) -> float:
        ids = self.token_ids(words)
        total = 0.0
        for j, tok in enumerate(ids):
            ctx = tuple(ids[max(0, j - self.order + 1):j])
            total += math.log(self.conditional(ctx)[tok])
        return total

    def perplexity(self, text: str | Document) -> float:
        doc = text if isinstance(text, Document) else Document.from_raw(text)
        words = tokenize(doc).word_tokens
        return math.exp(-self.logprob_tokens(words) / len(words))

    # -- generation ----------------------------------------------------------

    def generate(self, length: int, seed: int | None = None,
                 temperature: float = 1.0, greedy: bool = False,
                 exclude_unk: bool = True) -> list[str]:
        """Decode a token sequence from the model's own conditionals."""
        rng = np.random.default_rng(seed)
        out: list[int] = []
        unk = self.vocab_index.get(UNK)
        for _ in range(length):
            probs = self.conditional(tuple(out[-(self.order - 1):]) if self.order > 1 else ())
            if exclude_unk and unk is not None:
                probs = probs.copy()
                probs[unk] = 0.0
                probs /= probs.sum()
            if greedy:
                tok = int(np.argmax(probs))
            else:
                if temperature != 1.0:
                    probs = probs ** (1.0 / temperature)
                    probs /= probs.sum()
                tok = int(rng.choice(self.vocab_size, p=probs))
            out.append(tok)
        return [self.vocab[t] for t in out]

    # -- serialization --------------------------------------------------------

    def to_bytes(self) -> bytes:
        parts = [_MAGIC, struct.pack("<BBd", _VERSION, self.order, self.alpha),
                 struct.pack("<I", len(self.vocab))]
        for word in self.vocab:
            enc = word.encode("utf-8")
            parts.append(struct.pack("<H", len(enc)))
            parts.append(enc)
        for k in range(1, self.order + 1):
            table = self.tables[k - 1]
            parts.append(struct.pack("<I", len(table)))
            for ctx in sorted(table):
                entries = table[ctx]
                parts.append(struct.pack(f"<{k - 1}I", *ctx) if k > 1 else b"")
                parts.append(struct.pack("<I", len(entries)))
                for tok in sorted(entries):
                    parts.append(struct.pack("<IQ", tok, entries[tok]))
        return b"".join(parts)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "NgramLanguageModel":
        view = memoryview(blob)
        if bytes(view[:4]) != _MAGIC:
            raise CorruptModel("bad magic; not an NGLM file")
        off = 4
        try:
            version, order, alpha = struct.unpack_from("<BBd", view, off)
            off += struct.calcsize("<BBd")
            if version != _VERSION:
                raise VersionMismatch(f"NGLM version {version} unsupported")
            (n_vocab,) = struct.unpack_from("<I", view, off)
            off += 4
            vocab = []
            for _ in range(n_vocab):
                (ln,) = struct.unpack_from("<H", view, off)
                off += 2
                vocab.append(bytes(view[off:off + ln]).decode("utf-8"))
                off += ln
            tables: list[dict[tuple[int, ...], dict[int, int]]] = []
            for k in range(1, order + 1):
                (n_ctx,) = struct.unpack_from("<I", view, off)
                off += 4
                table: dict[tuple[int, ...], dict[int, int]] = {}
                for _ in range(n_ctx):
                    ctx = struct.unpack_from(f"<{k - 1}I", view, off) if k > 1 else ()
                    off += 4 * (k - 1)
                    (n_ent,) = struct.unpack_from("<I", view, off)
                    off += 4
                    entries = {}
                    for _ in range(n_ent):
                        tok, cnt = struct.unpack_from("<IQ", view, off)
                        off += struct.calcsize("<IQ")
                        entries[tok] = cnt
                    table[ctx] = entries
                tables.append(table)
        except struct.error as exc:
            raise CorruptModel(f"truncated NGLM file: {exc}") from exc
        return cls(order=order, alpha=alpha, vocab=vocab, tables=tables)

    @classmethod
    def load(cls, path: str | Path) -> "NgramLanguageModel":
        return cls.from_bytes(Path(path).read_bytes())

    def content_hash(self) -> str:
        header = struct.pack("<Bd", self.order, self.alpha)
        digest = hashlib.sha256(header)
        for word in self.vocab:
            digest.update(word.encode("utf-8") + b"\n")
        for table in self.tables:
            for ctx in sorted(table):
                entries = table[ctx]
                digest.update(struct.pack(f"<{len(ctx)}I", *ctx))
                for tok in sorted(entries):
                    digest.update(struct.pack("<IQ", tok, entries[tok]))
        return digest.hexdigest()


def ngram_lm_fit(corpus: list[str | Document], order: int = 3,
                 smoothing_alpha: float = 0.5,
                 reserve_unk: bool = True) -> NgramLanguageModel:
    """Fit the built-in language model; the result is a LogitSource."""
    return NgramLanguageModel.fit(corpus, order=order,
                                  smoothing_alpha=smoothing_alpha,
                                  reserve_unk=reserve_unk)
