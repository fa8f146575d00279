"""Exception types shared across the pipeline stages."""


class LogsynthError(Exception):
    """Base class for all pipeline errors."""


class JsubSyntaxError(LogsynthError):
    """Source file violates the subset grammar."""

    def __init__(self, message, file, line, column):
        super().__init__(f"{file}:{line}:{column}: {message}")
        self.file = file
        self.line = line
        self.column = column


class DuplicateMethodError(LogsynthError):
    """Two methods share a fully-qualified name."""


class FormatError(LogsynthError):
    """Malformed line in an imported edge-list file."""

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NoSubgraphsError(LogsynthError):
    """Subgraph extraction ran on an empty pruned graph."""


class CompletionRejectedError(LogsynthError):
    """No structurally legal insertion point exists for a proposed call."""


class InconsistentCfgError(LogsynthError):
    """A log node became unreachable on every kept path after enhancement."""


class BackendUnavailableError(LogsynthError):
    """The reasoner backend cannot be reached or is misconfigured."""


class SchemaViolationError(LogsynthError):
    """Reasoner response failed schema validation after all retries."""


class EmptyInputError(LogsynthError):
    """An operation requiring at least one record received none."""


class DegenerateDataError(LogsynthError):
    """Agreement data has zero expected disagreement."""


class ZeroDenominatorError(LogsynthError):
    """A ratio metric was asked to divide by zero."""


class EmptyReferenceError(LogsynthError):
    """R-coverage needs a non-empty reference template set."""


class MissingUpstreamArtifactError(LogsynthError):
    """A pipeline stage cannot find the artifact of the previous stage."""

    def __init__(self, path):
        super().__init__(f"missing upstream artifact: {path}")
        self.path = path


class ConfigError(LogsynthError):
    """Pipeline configuration is invalid."""
