"""Exception types shared across the relocalization toolkit.

Everything derives from RelocError so batch drivers can convert any
expected failure into a per-query failure record instead of crashing.
"""


class RelocError(Exception):
    """Base class for all expected toolkit failures."""


class DegenerateBaseline(RelocError):
    """Two camera centers coincide; relative direction/scale undefined."""


class AntipodalPair(RelocError):
    """Two rotations are 180 degrees apart; their midpoint is undefined."""


class ShapeMismatch(RelocError):
    """Tensor or grid shapes are incompatible for the requested operation."""


class NonIntegerWindow(RelocError):
    """Guided search window size or anchor does not land on integer cells."""


class EmptyDatabase(RelocError):
    """Reference database contains no entries."""


class DegenerateRays(RelocError):
    """Two rays are near-parallel; triangulation is ill-conditioned."""


class NegativeRange(RelocError):
    """Triangulated point lies behind a ray origin (negative ray parameter)."""


class NotEnoughReferences(RelocError):
    """Fewer than two usable reference estimates were available."""


class AllHypothesesDegenerate(RelocError):
    """Every candidate reference pair failed to triangulate."""


class DegenerateMean(RelocError):
    """Sample mean collapsed to (near) zero; no usable average exists."""


class EmptyScene(RelocError):
    """Synthetic scene has no points, or no valid pose could be sampled."""


class NoValidDepth(RelocError):
    """A rendered view contains no valid depth pixels."""


class BudgetExhausted(RelocError):
    """Rejection sampling ran out of attempts before reaching the target."""

    def __init__(self, message: str, pairs=None):
        super().__init__(message)
        self.pairs = list(pairs) if pairs is not None else []
