"""Exception hierarchy for Survrank.

Every error carries a short machine-readable ``code`` so the CLI can emit
``{"error": {...}}`` objects without string matching.
"""

from typing import Any, Dict, Optional


class SurvRankError(Exception):
    """Base class for all errors raised by survrank."""

    code = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"code": self.code, "message": self.message}
        payload.update({k: v for k, v in self.details.items() if v is not None})
        return payload


class SchemaError(SurvRankError):
    """Input file does not carry the columns the schema config names."""

    code = "schema_error"


class ValidationError(SurvRankError):
    """A row holds a value outside its allowed domain."""

    code = "validation_error"

    def __init__(self, message: str, row_id: Optional[str] = None, **details: Any):
        super().__init__(message, row_id=row_id, **details)
        self.row_id = row_id


class ArgumentError(SurvRankError, ValueError):
    """A caller passed an argument outside its contract."""

    code = "argument_error"


class FeaturizationError(ArgumentError):
    """Records do not match the featurization a model was fitted with."""

    code = "featurization_error"


class DegenerateFeaturizationError(SurvRankError):
    """Every encoded feature is constant; nothing can be learned."""

    code = "degenerate_featurization"


class TransportError(SurvRankError):
    """The remote endpoint could not be reached after all retries."""

    code = "transport_error"


class EndpointError(SurvRankError):
    """The remote endpoint answered with a non-2xx status."""

    code = "endpoint_error"

    def __init__(self, message: str, status: int, body_excerpt: str = ""):
        super().__init__(message, status=status, body_excerpt=body_excerpt)
        self.status = status
        self.body_excerpt = body_excerpt


class ParseError(SurvRankError):
    """A model answer names neither label."""

    code = "parse_error"


class ScoringError(SurvRankError):
    """No anchor comparison for a subject produced a usable answer."""

    code = "scoring_error"

    def __init__(self, message: str, subject_id: Optional[str] = None):
        super().__init__(message, subject_id=subject_id)
        self.subject_id = subject_id


class UndefinedMetricError(SurvRankError):
    """The metric has no value on this sample (no pairs, no positives, ...)."""

    code = "undefined_metric"


class InstabilityError(SurvRankError):
    """Too many bootstrap resamples left the metric undefined."""

    code = "bootstrap_instability"


class SeparationError(SurvRankError):
    """The partial likelihood is monotone; coefficients diverge."""

    code = "separation"


class RankError(SurvRankError):
    """The design matrix or information matrix is rank deficient."""

    code = "rank_deficient"


class ConvergenceError(SurvRankError):
    """Newton iterations ran out before the gradient vanished."""

    code = "convergence"
