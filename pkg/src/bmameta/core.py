"""Study/comparison data model and meta-analytic likelihoods.

A *study* carries one observed standardized mean difference (Cohen's d)
with its standard error; a *comparison* is an ordered collection of
studies forming one meta-analysis.  The random-effects likelihood
integrates the latent per-study effects analytically, so both model
families reduce to independent normal densities:

    fixed:   y_i ~ N(delta, se_i)
    random:  y_i ~ N(delta, sqrt(se_i**2 + tau**2))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDataError, DomainError

__all__ = [
    "RawSummaries",
    "Study",
    "Comparison",
    "smd_from_raw",
    "loglik_fixed",
    "loglik_random",
]

_LOG_2PI = math.log(2.0 * math.pi)


def smd_from_raw(n1, mean1, sd1, n2, mean2, sd2):
    """Convert two-arm raw summaries to (Cohen's d, standard error).

    d = (mean1 - mean2) / s_pooled with the pooled within-group SD, and
    var(d) = (n1 + n2) / (n1 * n2) + d**2 / (2 * (n1 + n2)).

    This is plain Cohen's d with the standard large-sample variance; no
    small-sample (Hedges-type) bias correction is applied.
    """
    if n1 < 2 or n2 < 2:
        raise DomainError(f"both arms need n >= 2, got n1={n1}, n2={n2}")
    if sd1 < 0 or sd2 < 0:
        raise DomainError("arm standard deviations must be non-negative")
    df = n1 + n2 - 2
    pooled = math.sqrt(((n1 - 1) * sd1**2 + (n2 - 1) * sd2**2) / df)
    if pooled == 0.0:
        raise DegenerateDataError("both arms have zero variance; SMD undefined")
    d = (mean1 - mean2) / pooled
    var = (n1 + n2) / (n1 * n2) + d * d / (2.0 * (n1 + n2))
    return d, math.sqrt(var)


@dataclass(frozen=True)
class RawSummaries:
    """Per-arm sample size, mean and SD for a two-arm study."""

    n1: float
    mean1: float
    sd1: float
    n2: float
    mean2: float
    sd2: float

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise DomainError("both arms need n >= 2")
        if self.sd1 < 0 or self.sd2 < 0:
            raise DomainError("arm standard deviations must be non-negative")
        if self.sd1 == 0 and self.sd2 == 0:
            raise DegenerateDataError("both arms have zero variance")


@dataclass(frozen=True)
class Study:
    """One study's effect size (SMD) and standard error."""

    effect: float
    se: float
    label: str = ""
    raw: Optional[RawSummaries] = None

    def __post_init__(self):
        if not math.isfinite(self.effect):
            raise DomainError(f"study effect must be finite, got {self.effect!r}")
        if not (math.isfinite(self.se) and self.se > 0):
            raise DomainError(f"study standard error must be finite and > 0, got {self.se!r}")

    @staticmethod
    def from_raw(n1, mean1, sd1, n2, mean2, sd2, label: str = "") -> "Study":
        effect, se = smd_from_raw(n1, mean1, sd1, n2, mean2, sd2)
        return Study(effect, se, label, RawSummaries(n1, mean1, sd1, n2, mean2, sd2))


@dataclass(frozen=True)
class Comparison:
    """An ordered set of studies: the unit of one meta-analysis."""

    studies: tuple = field(default_factory=tuple)
    id: str = ""
    subfield: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "studies", tuple(self.studies))
        if len(self.studies) < 1:
            raise DomainError("a comparison needs at least one study")

    @property
    def k(self) -> int:
        return len(self.studies)

    @cached_property
    def effects(self) -> np.ndarray:
        return np.array([s.effect for s in self.studies])

    @cached_property
    def std_errors(self) -> np.ndarray:
        return np.array([s.se for s in self.studies])

    @cached_property
    def _canonical(self) -> tuple:
        """(effects, std errors) sorted by (se, effect).

        Every likelihood reduction runs in this order, which makes all
        downstream numbers bit-identical under study permutation.
        """
        idx = np.lexsort((self.effects, self.std_errors))
        return self.effects[idx], self.std_errors[idx]

    def subset(self, indices: Sequence[int]) -> "Comparison":
        return Comparison(tuple(self.studies[i] for i in indices), self.id, self.subfield)


def _normal_loglik(y: np.ndarray, variances, delta) -> np.ndarray:
    """Sum of normal log densities, broadcasting over leading axes.

    ``variances`` carries the study axis last; ``delta`` broadcasts
    against the remaining axes.  The quadratic form is expanded into
    sufficient statistics so the study axis never meets the (often much
    larger) ``delta`` axis:

        sum_i (y_i - d)^2 / v_i = S2 - 2 d S1 + d^2 S0
    """
    delta = np.asarray(delta, dtype=float)
    inv = 1.0 / variances
    log_det = np.sum(np.log(variances), axis=-1)
    s0 = np.sum(inv, axis=-1)
    s1 = np.sum(inv * y, axis=-1)
    s2 = np.sum(inv * y * y, axis=-1)
    k = y.shape[-1]
    return -0.5 * (k * _LOG_2PI + log_det + s2 - 2.0 * delta * s1 + delta * delta * s0)


def loglik_fixed(delta, comparison: Comparison):
    """Log likelihood of a common effect ``delta`` (tau = 0).

    ``delta`` may be a scalar or an array; the result has its shape.
    """
    y, se = comparison._canonical
    out = _normal_loglik(y, se**2, delta)
    return float(out) if out.ndim == 0 else out


def loglik_random(delta, tau, comparison: Comparison):
    """Log likelihood under the random-effects model.

    The latent study effects are integrated out analytically, leaving
    independent N(delta, sqrt(se_i**2 + tau**2)) terms.  ``delta`` and
    ``tau`` broadcast against each other; ``tau`` must be >= 0.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise DomainError("tau must be non-negative")
    y, se = comparison._canonical
    variances = se**2 + (tau * tau)[..., None]
    out = _normal_loglik(y, variances, np.asarray(delta, dtype=float))
    return float(out) if out.ndim == 0 else out
