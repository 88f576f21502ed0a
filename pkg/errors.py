"""
Error Types Module
Exception hierarchy shared by the numerical modules and the CLI.
"""

from typing import Any, Dict, Optional


class HbError(Exception):
    """Base class for every failure raised by the library."""

    code = "hb_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Structured form used in CLI error output."""
        return {
            'error': self.code,
            'message': self.message,
            'details': self.details
        }


class EvalAtSingularity(HbError):
    code = "eval_at_singularity"


class DomainError(HbError):
    code = "domain_error"


class PrecisionLoss(HbError):
    code = "precision_loss"


class NoLimit(HbError):
    code = "no_limit"


class Inconclusive(HbError):
    """The computation finished but cannot decide the question asked."""

    code = "inconclusive"


class NotLogIntegrable(HbError):
    code = "not_log_integrable"


class IllConditioned(HbError):
    code = "ill_conditioned"


class TailNotDecayed(HbError):
    code = "tail_not_decayed"


class GridMismatch(HbError):
    code = "grid_mismatch"


class NegativeSymbol(HbError):
    code = "negative_symbol"


class IsInner(HbError):
    code = "is_inner"


class NotContractive(HbError):
    code = "not_contractive"


class NotInSpace(HbError):
    code = "not_in_space"


class NotInE0(HbError):
    code = "not_in_e0"


class NotDiscrete(HbError):
    code = "not_discrete"


class TailTooLarge(HbError):
    code = "tail_too_large"


class NodeZero(HbError):
    code = "node_zero"


class DivisionRemainder(HbError):
    code = "division_remainder"


class DivisionUnstable(HbError):
    code = "division_unstable"


class NotAZero(HbError):
    code = "not_a_zero"


class ParseError(HbError):
    code = "parse_error"


class ValidationError(HbError):
    code = "validation_error"
