"""firmfacts: heavy-tailed distribution fitting, goodness-of-fit testing,
distributional fixed-effects transforms, and firm-panel analytics."""

__version__ = "0.1.0"

from . import dists, errors  # noqa: F401
