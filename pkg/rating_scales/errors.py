"""Domain errors. All derive from ValueError so callers can catch either."""

from __future__ import annotations

from typing import List


class RatingScaleError(ValueError):
    """Base class for every error raised by rating_scales."""


class DatasetFormatError(RatingScaleError):
    pass


class InfeasibleThresholdsError(RatingScaleError):
    """Raised when (lambda1, lambda2, m, n) admit no partition; the message names the inequality."""


class LayoutMismatchError(RatingScaleError):
    pass


class ModelFormatError(RatingScaleError):
    pass


class InstanceTooLargeError(RatingScaleError):
    pass


class SolverLimitError(RatingScaleError):
    """A solver bound (such as the stored-minimizer capacity) was hit before the answer was complete."""


class DecodeError(RatingScaleError):
    """The x-block is not a binary staircase matrix."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems) or "not a staircase")
