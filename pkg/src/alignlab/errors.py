"""Exception types raised across the package."""


class AlignlabError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(AlignlabError, ValueError):
    """Invalid argument: bad dimensions, ranges, or mismatched shapes."""


class ConstructionError(AlignlabError):
    """A requested state or spectrum cannot be constructed (e.g. empty block)."""


class DegenerateStateError(AlignlabError):
    """State carries no energy where the operation requires some."""


class DegenerateBlockError(DegenerateStateError):
    """A single block is empty where the operation requires it nonzero."""


class UnsupportedNoiseError(AlignlabError):
    """Noise profile violates a positivity requirement (e.g. s_min = 0)."""


class UndefinedBoundError(AlignlabError):
    """A bound is undefined for this state (e.g. zero alignment)."""


class StepSizeError(AlignlabError, ValueError):
    """Step size outside the admissible range for the requested quantity."""


class InsufficientDataError(AlignlabError):
    """Too few points for the requested fit."""


class DivergenceError(AlignlabError):
    """Trajectory blew up; `step` is the first offending step index."""

    def __init__(self, step: int, detail: str = ""):
        self.step = step
        msg = f"trajectory diverged at step {step}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
