"""Exception hierarchy shared by every stage of the pipeline."""


class SarcastError(Exception):
    """Base class for domain errors raised by this package."""


class InvalidSpec(SarcastError, ValueError):
    pass


class InvalidCoordinate(SarcastError, ValueError):
    pass


class EmptyDomain(SarcastError):
    pass


class LengthMismatch(SarcastError, ValueError):
    pass


class NonFiniteValue(SarcastError, ValueError):
    pass


class IsolatedCell(SarcastError):
    pass


class GridMismatch(SarcastError, ValueError):
    pass


class AllMassMasked(SarcastError):
    pass


class MissingHorizon(SarcastError, KeyError):
    pass


class NoClusters(SarcastError):
    pass


class MissingReview(SarcastError, KeyError):
    pass


class MalformedResponse(SarcastError):
    pass


class SchemaViolation(SarcastError, ValueError):
    """Raised with the full list of failing fields, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        fields = ", ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(f"schema violation ({len(self.errors)}): {fields}")

    @property
    def fields(self):
        return [path for path, _ in self.errors]


class StageError(SarcastError):
    """Wraps an error raised inside a pipeline stage, tagging the stage."""

    def __init__(self, stage, error):
        self.stage = stage
        self.error = error
        super().__init__(f"[{stage}] {type(error).__name__}: {error}")


class DegenerateSeed(UserWarning):
    """Gaussian seed underflowed everywhere; a point mass was used instead."""
