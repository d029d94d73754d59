"""Exception hierarchy for the localization pipeline."""


class LesionLocusError(Exception):
    """Base class. ``stage`` is filled in by the pipeline when known."""

    stage: str | None = None

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class DegenerateHistogram(LesionLocusError):
    pass


class FrameConsumesImage(LesionLocusError):
    pass


class EmptyMask(LesionLocusError):
    pass


class DimensionMismatch(LesionLocusError, ValueError):
    pass


class DegenerateCurve(LesionLocusError):
    pass


class DegenerateFit(LesionLocusError):
    pass


class ParseError(LesionLocusError):
    pass


class ManifestError(LesionLocusError):
    """Raised with one diagnostic line per offending manifest entry."""

    def __init__(self, message: str, problems: list[str] | None = None):
        self.problems = list(problems or [])
        if self.problems:
            message = message + "\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(message)
