"""Exception types raised across the package.

Every error newsjury raises on purpose derives from NewsJuryError, so callers
can catch one base class at the boundary. The CLI maps the branches below to
exit codes: data problems exit 2, provider problems exit 3.
"""

from __future__ import annotations


class NewsJuryError(Exception):
    """Base class for all newsjury errors."""


# ---------------------------------------------------------------- datasets


class DatasetError(NewsJuryError):
    """A dataset file or record violates the corpus schema."""


class MissingFieldError(DatasetError):
    pass


class BadLabelError(DatasetError):
    pass


class DuplicateIdError(DatasetError):
    pass


class EmptyFileError(DatasetError):
    pass


class EmptyDatasetError(DatasetError):
    pass


# ---------------------------------------------------------------- provider


class ProviderError(NewsJuryError):
    """The model endpoint could not produce a response."""


class ProviderTimeoutError(ProviderError):
    pass


class UpstreamClientError(ProviderError):
    """4xx from the endpoint; not retryable."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(f"upstream returned {status}: {message}" if message else f"upstream returned {status}")
        self.status = status


class UpstreamServerError(ProviderError):
    """5xx from the endpoint; retryable."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(f"upstream returned {status}: {message}" if message else f"upstream returned {status}")
        self.status = status


class NotScriptedError(ProviderError):
    """A scripted provider saw a request no script entry matches."""


# ---------------------------------------------------------------- analysis


class AnalysisError(NewsJuryError):
    pass


class NoCommentsError(AnalysisError):
    pass


class UnparsableQuestionsError(AnalysisError):
    pass


class NoSectionsError(AnalysisError):
    pass


class AllSectionsFailedError(AnalysisError):
    pass


# ---------------------------------------------------------------- evidence


class AllQueriesFailedError(NewsJuryError):
    """Every search query errored (distinct from all queries returning nothing)."""


# ---------------------------------------------------------------- tasks


class TaskBuildError(NewsJuryError):
    pass


class SingleDomainError(TaskBuildError):
    pass


class MissingReportError(TaskBuildError):
    pass


class NotEnoughDemosError(TaskBuildError):
    pass


# ---------------------------------------------------------------- judge


class EmptyTaskSetError(NewsJuryError):
    pass


class NoUsableVerdictsError(NewsJuryError):
    pass


# ---------------------------------------------------------------- optimizer


class EmptyLedgerError(NewsJuryError):
    pass


class EmptyProposalError(NewsJuryError):
    pass


class DuplicateProposalError(NewsJuryError):
    """Signal: a proposed rule matches ledger text exactly. Callers re-request."""


class CorruptCheckpointError(NewsJuryError):
    pass


# ---------------------------------------------------------------- evaluation


class MetricsError(NewsJuryError):
    pass


class LengthMismatchError(MetricsError):
    pass


class EmptyPredictionsError(MetricsError):
    pass


class CrossDomainLeakError(NewsJuryError):
    """A demonstration or task item shares the held-out target domain."""
