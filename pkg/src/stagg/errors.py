"""Exception hierarchy shared by every stage of the lifting pipeline."""

from __future__ import annotations


class StaggError(Exception):
    """Base class for all errors raised by this package."""


class TacoSyntaxError(StaggError, SyntaxError):
    """Raised for text outside the TACO index-notation grammar."""

    def __init__(self, message: str, position: int, text: str = "") -> None:
        super().__init__(f"{message} at position {position}")
        self.msg = message
        self.position = position
        self.text = text

    def __str__(self) -> str:
        return f"{self.msg} at position {self.position}"


# evaluation


class EvaluationError(StaggError):
    pass


class UnboundTensor(EvaluationError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class RankMismatch(EvaluationError):
    pass


class InconsistentExtent(EvaluationError):
    pass


class DivisionByZero(EvaluationError, ZeroDivisionError):
    pass


# candidates


class EmptyCandidateSet(StaggError):
    pass


class TooManyIndices(StaggError):
    pass


# grammar


class InvalidDimensionList(StaggError):
    pass


class NotInLanguage(StaggError):
    pass


class ZeroWeightClass(StaggError):
    pass


class NonConvergence(StaggError):
    pass


# search


class SearchTimeout(StaggError):
    """Raised from inside callbacks when the wall-clock budget runs out."""


# benchmarks and validation


class MissingField(StaggError):
    pass


class MalformedDescriptor(StaggError):
    pass


class OracleMissing(StaggError):
    pass


class OracleMiss(StaggError):
    pass


class OracleFailure(StaggError):
    pass


# llm


class LlmError(StaggError):
    pass


class NetworkError(LlmError):
    pass


class AuthError(LlmError):
    pass


class RateLimited(LlmError):
    def __init__(self, message: str, retry_after: float | None = None) -> None:
        super().__init__(message)
        self.retry_after = retry_after


class FixtureMissing(LlmError):
    pass
