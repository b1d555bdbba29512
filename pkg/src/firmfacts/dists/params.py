"""Distribution families, parameter vectors, and fit results."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from ..errors import ParameterError


class Family(str, Enum):
    """The closed set of distribution families used throughout."""

    NORMAL = "normal"
    SKEW_NORMAL = "skew_normal"
    LAPLACE = "laplace"
    STABLE = "stable"
    DLN = "dln"

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"sn": "skew_normal", "skewnormal": "skew_normal", "n": "normal"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ParameterError(f"unknown family {name!r}; expected one of "
                                 f"{[f.value for f in cls]}") from None


#: number of free parameters per family (used for AIC/BIC penalties)
N_PARAMS = {
    Family.NORMAL: 2,        # mu, sigma
    Family.SKEW_NORMAL: 3,   # xi, omega, alpha
    Family.LAPLACE: 2,       # mu, b
    Family.STABLE: 4,        # alpha, beta, c, delta
    Family.DLN: 4,           # mu_p, sigma_p, mu_n, sigma_n
}

PARAM_NAMES = {
    Family.NORMAL: ("mu", "sigma"),
    Family.SKEW_NORMAL: ("xi", "omega", "alpha"),
    Family.LAPLACE: ("mu", "b"),
    Family.STABLE: ("alpha", "beta", "c", "delta"),
    Family.DLN: ("mu_p", "sigma_p", "mu_n", "sigma_n"),
}

# Stable with very small alpha is out of scope; densities become impractical.
STABLE_ALPHA_MIN = 0.5


@dataclass(frozen=True)
class ParamVector:
    """A validated (family, parameters) pair."""

    family: Family
    params: tuple

    def __post_init__(self):
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        expected = N_PARAMS[family]
        if len(params) != expected:
            raise ParameterError(
                f"{family.value} takes {expected} parameters, got {len(params)}")
        if not all(math.isfinite(p) for p in params):
            raise ParameterError(f"{family.value} parameters must be finite: {params}")
        self._check_domain()

    def _check_domain(self):
        f, p = self.family, self.params
        if f is Family.NORMAL and p[1] <= 0:
            raise ParameterError(f"normal sigma must be > 0, got {p[1]}")
        if f is Family.SKEW_NORMAL and p[1] <= 0:
            raise ParameterError(f"skew_normal omega must be > 0, got {p[1]}")
        if f is Family.LAPLACE and p[1] <= 0:
            raise ParameterError(f"laplace b must be > 0, got {p[1]}")
        if f is Family.STABLE:
            alpha, beta, c, _ = p
            if not STABLE_ALPHA_MIN < alpha <= 2.0:
                raise ParameterError(
                    f"stable alpha must be in ({STABLE_ALPHA_MIN}, 2], got {alpha}")
            if not -1.0 <= beta <= 1.0:
                raise ParameterError(f"stable beta must be in [-1, 1], got {beta}")
            if c <= 0:
                raise ParameterError(f"stable c must be > 0, got {c}")
        if f is Family.DLN:
            if p[1] <= 0 or p[3] <= 0:
                raise ParameterError(
                    f"dln sigma_p and sigma_n must be > 0, got {p[1]}, {p[3]}")

    def as_dict(self) -> dict:
        return dict(zip(PARAM_NAMES[self.family], self.params))

    @property
    def k(self) -> int:
        """Number of free parameters."""
        return N_PARAMS[self.family]

    def __iter__(self):
        return iter(self.params)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a fitting run."""

    params: ParamVector
    loglik: float
    n: int
    method: str  # "mle" or "lad"
    converged: bool
    iterations: int
    message: str = field(default="", compare=False)

    def __post_init__(self):
        if self.converged and not math.isfinite(self.loglik):
            raise ParameterError("converged fit must report a finite log-likelihood")

    def as_dict(self) -> dict:
        return {
            "family": self.params.family.value,
            "params": self.params.as_dict(),
            "loglik": self.loglik,
            "n": self.n,
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
        }
