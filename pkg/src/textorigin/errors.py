"""Exception taxonomy shared by every textorigin module.

Errors are grouped by what the caller can do about them: data problems
(fix the input), backend problems (retry or degrade to imputation), and
model-file problems (refuse to load).
"""


class TextOriginError(Exception):
    """Base class for all library errors."""

    code = "error"


# --- input / data errors -------------------------------------------------

class EmptyDocument(TextOriginError):
    """Text contains no word tokens after normalization."""

    code = "empty_document"


class EmptyCorpus(TextOriginError):
    code = "empty_corpus"


class EmptyDataset(TextOriginError):
    code = "empty_dataset"


class SingleClass(TextOriginError):
    """Training or balancing requires both classes present."""

    code = "single_class"


class TextTooLong(TextOriginError):
    """Input text exceeds the configured maximum length."""

    code = "text_too_long"


class TooSmall(TextOriginError):
    """Dataset too small to split."""

    code = "too_small"


class MissingColumn(TextOriginError):
    code = "missing_column"


class UnknownFeature(TextOriginError):
    code = "unknown_feature"


class DimensionMismatch(TextOriginError):
    code = "dimension_mismatch"


# --- numerical degeneracies ----------------------------------------------

class DegenerateVariance(TextOriginError):
    """Log-likelihood variance too small to standardize the curvature score.

    Callers substitute the model file's training-median curvature and flag
    the feature as imputed.
    """

    code = "degenerate_variance"


# --- remote backends ------------------------------------------------------

class BackendUnavailable(TextOriginError):
    """Endpoint unreachable, refused, or timed out."""

    code = "backend_unavailable"


class BackendProtocol(TextOriginError):
    """Endpoint reachable but the response violates the wire contract."""

    code = "backend_protocol"


class OutOfRange(TextOriginError):
    """Remote returned a value outside its documented range."""

    code = "out_of_range"


class MalformedExplanation(TextOriginError):
    """LLM explainer response unparseable or schema-violating."""

    code = "malformed_explanation"


# --- model files ----------------------------------------------------------

class CorruptModel(TextOriginError):
    """Model file truncated or content hash mismatch."""

    code = "corrupt_model"


class VersionMismatch(TextOriginError):
    code = "version_mismatch"


class SchemaMismatch(TextOriginError):
    """Feature names in the model differ from the canonical schema."""

    code = "schema_mismatch"


class InconsistentCover(TextOriginError):
    """Tree node covers do not satisfy parent = left + right."""

    code = "inconsistent_cover"


class TooManyFeatures(TextOriginError):
    """Brute-force attribution is limited to small feature counts."""

    code = "too_many_features"
