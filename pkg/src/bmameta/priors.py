"""Prior distribution families: densities, quantiles, sampling, and MLE fitting.

Eight families are supported: a degenerate point mass plus uniform,
normal, half-normal, Cauchy, Student-t (location/scale/df), gamma and
inverse-gamma (both shape/scale).  Densities are evaluated with explicit
log-space formulas so integrands never underflow; quantiles, CDFs and
random draws delegate to ``scipy.stats``.

The half-normal with parameter ``sd`` is the zero-truncated normal with
that standard deviation.  The inverse-gamma scale ``b`` follows the
convention ``pdf(x) ~ x**(-shape-1) * exp(-b/x)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln

from .errors import (
    DegenerateDataError,
    DomainError,
    ParameterError,
    ParseError,
    UnsupportedOperationError,
)

__all__ = ["PriorSpec", "fit_mle", "parse_prior", "FAMILIES", "FITTABLE_FAMILIES"]

_LOG_2PI = math.log(2.0 * math.pi)

FAMILIES = ("point", "uniform", "normal", "halfnormal", "cauchy", "t", "gamma", "invgamma")

#: Families accepted by :func:`fit_mle`.
FITTABLE_FAMILIES = ("normal", "t", "halfnormal", "gamma", "invgamma")

_PARAM_NAMES = {
    "point": ("value",),
    "uniform": ("lower", "upper"),
    "normal": ("mean", "sd"),
    "halfnormal": ("sd",),
    "cauchy": ("location", "scale"),
    "t": ("location", "scale", "df"),
    "gamma": ("shape", "scale"),
    "invgamma": ("shape", "scale"),
}


def _validate_params(family: str, params: tuple) -> None:
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}")
    names = _PARAM_NAMES[family]
    if len(params) != len(names):
        raise ParameterError(
            f"{family} takes {len(names)} parameter(s) {names}, got {len(params)}"
        )
    for name, value in zip(names, params):
        if not math.isfinite(value):
            raise ParameterError(f"{family} parameter {name} must be finite, got {value!r}")
        if name in ("sd", "scale", "shape", "df") and value <= 0:
            raise ParameterError(f"{family} parameter {name} must be > 0, got {value}")
    if family == "uniform" and params[1] <= params[0]:
        raise ParameterError(f"uniform requires upper > lower, got {params}")


@dataclass(frozen=True)
class PriorSpec:
    """A parameterized prior distribution (or point mass) over a scalar.

    Construct through the family-named factories, e.g.
    ``PriorSpec.normal(0.0, 0.56)`` or ``PriorSpec.t(0.0, 0.33, 3.0)``.
    """

    family: str
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        _validate_params(self.family, self.params)

    # --- factories ------------------------------------------------------

    @staticmethod
    def point(value: float) -> "PriorSpec":
        return PriorSpec("point", (value,))

    @staticmethod
    def uniform(lower: float, upper: float) -> "PriorSpec":
        return PriorSpec("uniform", (lower, upper))

    @staticmethod
    def normal(mean: float, sd: float) -> "PriorSpec":
        return PriorSpec("normal", (mean, sd))

    @staticmethod
    def halfnormal(sd: float) -> "PriorSpec":
        return PriorSpec("halfnormal", (sd,))

    @staticmethod
    def cauchy(location: float, scale: float) -> "PriorSpec":
        return PriorSpec("cauchy", (location, scale))

    @staticmethod
    def t(location: float, scale: float, df: float) -> "PriorSpec":
        return PriorSpec("t", (location, scale, df))

    @staticmethod
    def gamma(shape: float, scale: float) -> "PriorSpec":
        return PriorSpec("gamma", (shape, scale))

    @staticmethod
    def invgamma(shape: float, scale: float) -> "PriorSpec":
        return PriorSpec("invgamma", (shape, scale))

    # --- basic properties -----------------------------------------------

    @property
    def is_point(self) -> bool:
        return self.family == "point"

    @property
    def support(self) -> tuple:
        """(lower, upper) bounds of the support, possibly infinite."""
        if self.family == "point":
            v = self.params[0]
            return (v, v)
        if self.family == "uniform":
            return self.params
        if self.family in ("halfnormal", "gamma", "invgamma"):
            return (0.0, math.inf)
        return (-math.inf, math.inf)

    def _frozen(self):
        """Matching scipy.stats frozen distribution (non-degenerate families)."""
        f, p = self.family, self.params
        if f == "uniform":
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        if f == "normal":
            return stats.norm(loc=p[0], scale=p[1])
        if f == "halfnormal":
            return stats.halfnorm(loc=0.0, scale=p[0])
        if f == "cauchy":
            return stats.cauchy(loc=p[0], scale=p[1])
        if f == "t":
            return stats.t(df=p[2], loc=p[0], scale=p[1])
        if f == "gamma":
            return stats.gamma(a=p[0], scale=p[1])
        if f == "invgamma":
            return stats.invgamma(a=p[0], scale=p[1])
        raise UnsupportedOperationError(f"no continuous distribution for family {f!r}")

    # --- evaluation -------------------------------------------------------

    def log_pdf(self, x):
        """Natural-log density at ``x`` (scalar or array); ``-inf`` off support.

        The point mass returns 0.0 at its location and ``-inf`` elsewhere;
        this bookkeeping convention is never integrated over.
        """
        x = np.asarray(x, dtype=float)
        f, p = self.family, self.params
        out = np.full(x.shape, -np.inf)
        if f == "point":
            out = np.where(x == p[0], 0.0, -np.inf)
        elif f == "uniform":
            lo, hi = p
            out = np.where((x >= lo) & (x <= hi), -math.log(hi - lo), -np.inf)
        elif f == "normal":
            m, s = p
            z = (x - m) / s
            out = -0.5 * z * z - math.log(s) - 0.5 * _LOG_2PI
        elif f == "halfnormal":
            (s,) = p
            z = x / s
            dens = math.log(2.0) - 0.5 * z * z - math.log(s) - 0.5 * _LOG_2PI
            out = np.where(x >= 0, dens, -np.inf)
        elif f == "cauchy":
            loc, s = p
            z = (x - loc) / s
            out = -math.log(math.pi * s) - np.log1p(z * z)
        elif f == "t":
            loc, s, df = p
            z = (x - loc) / s
            const = (
                gammaln((df + 1.0) / 2.0)
                - gammaln(df / 2.0)
                - 0.5 * math.log(df * math.pi)
                - math.log(s)
            )
            out = const - 0.5 * (df + 1.0) * np.log1p(z * z / df)
        elif f == "gamma":
            k, theta = p
            with np.errstate(divide="ignore", invalid="ignore"):
                dens = (k - 1.0) * np.log(x) - x / theta - gammaln(k) - k * math.log(theta)
            out = np.where(x > 0, dens, -np.inf)
        elif f == "invgamma":
            a, b = p
            with np.errstate(divide="ignore", invalid="ignore"):
                dens = a * math.log(b) - gammaln(a) - (a + 1.0) * np.log(x) - b / x
            out = np.where(x > 0, dens, -np.inf)
        if out.ndim == 0:
            return float(out)
        return out

    def cdf(self, x):
        """Cumulative distribution function at ``x`` (scalar or array)."""
        if self.family == "point":
            x = np.asarray(x, dtype=float)
            out = np.where(x >= self.params[0], 1.0, 0.0)
            return float(out) if out.ndim == 0 else out
        val = self._frozen().cdf(x)
        return float(val) if np.ndim(val) == 0 else val

    def quantile(self, p):
        """Inverse CDF at probability ``p`` in (0, 1).

        Undefined for the point mass, which has no continuous quantile
        function.
        """
        if self.family == "point":
            raise UnsupportedOperationError("quantile is undefined for a point mass")
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
            raise ParameterError(f"quantile probability must lie in (0, 1), got {p!r}")
        val = self._frozen().ppf(p)
        return float(val) if np.ndim(val) == 0 else val

    def sample(self, rng: np.random.Generator, n: int):
        """Draw ``n`` i.i.d. values using the caller-owned generator."""
        if n < 1:
            raise ParameterError(f"sample size must be >= 1, got {n}")
        f, p = self.family, self.params
        if f == "point":
            return np.full(n, p[0])
        if f == "uniform":
            return rng.uniform(p[0], p[1], n)
        if f == "normal":
            return rng.normal(p[0], p[1], n)
        if f == "halfnormal":
            return np.abs(rng.normal(0.0, p[0], n))
        if f == "cauchy":
            return p[0] + p[1] * rng.standard_cauchy(n)
        if f == "t":
            return p[0] + p[1] * rng.standard_t(p[2], n)
        if f == "gamma":
            return rng.gamma(p[0], p[1], n)
        if f == "invgamma":
            # 1/X with X ~ gamma(shape, scale=1/b) is inverse-gamma(shape, b)
            return 1.0 / rng.gamma(p[0], 1.0 / p[1], n)
        raise UnsupportedOperationError(f"cannot sample family {f!r}")

    # --- formatting -------------------------------------------------------

    def __str__(self) -> str:
        return f"{self.family}({','.join(_format_real(v) for v in self.params)})"


def _format_real(x: float) -> str:
    """Shortest round-trip decimal with a guaranteed decimal point."""
    s = repr(float(x))
    if "e" in s:
        mantissa, _, exponent = s.partition("e")
        if "." not in mantissa:
            mantissa += ".0"
        return mantissa + "e" + exponent
    if "." not in s:
        s += ".0"
    return s


# --------------------------------------------------------------------------
# Prior specification grammar
# --------------------------------------------------------------------------

_SPEC_RE = re.compile(r"^\s*([a-z]+)\s*\(([^()]*)\)\s*$")
# Decimal point is mandatory so that "3" cannot silently mean 3.0.
_REAL_RE = re.compile(r"^[+-]?(\d+\.\d*|\.\d+)([eE][+-]?\d+)?$")


def parse_prior(text: str) -> PriorSpec:
    """Parse a prior specification string such as ``"t(0.0,0.33,3.0)"``.

    Family names are case-insensitive; every real parameter must contain
    a decimal point.
    """
    m = _SPEC_RE.match(text.lower())
    if not m:
        raise ParseError(f"invalid prior specification {text!r}; expected family(p1,p2,...)")
    family, arg_text = m.group(1), m.group(2)
    if family not in FAMILIES:
        raise ParseError(f"unknown prior family {family!r} in {text!r}")
    args = []
    for piece in arg_text.split(","):
        piece = piece.strip()
        if not _REAL_RE.match(piece):
            raise ParseError(
                f"invalid real {piece!r} in {text!r}; a decimal point is required"
            )
        args.append(float(piece))
    expected = len(_PARAM_NAMES[family])
    if len(args) != expected:
        raise ParseError(f"{family} takes {expected} parameter(s), got {len(args)} in {text!r}")
    try:
        return PriorSpec(family, tuple(args))
    except ParameterError as exc:
        raise ParseError(f"invalid parameters in {text!r}: {exc}") from exc


# --------------------------------------------------------------------------
# Maximum-likelihood fitting
# --------------------------------------------------------------------------


def _check_fit_data(family: str, data: np.ndarray) -> None:
    if data.size == 0:
        raise DegenerateDataError("cannot fit a distribution to an empty sample")
    if not np.all(np.isfinite(data)):
        raise DomainError("fit data must be finite")
    if family in ("gamma", "invgamma") and np.any(data <= 0):
        raise DomainError(f"{family} requires strictly positive data")
    if family == "halfnormal" and np.any(data < 0):
        raise DomainError("halfnormal requires non-negative data")
    if np.var(data) == 0.0:
        raise DegenerateDataError("fit data has zero variance")


def _nelder_mead(neg_ll, starts: Sequence[np.ndarray]) -> np.ndarray:
    best = None
    for x0 in starts:
        res = optimize.minimize(
            neg_ll,
            np.asarray(x0, dtype=float),
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000, "maxfev": 8000},
        )
        if best is None or res.fun < best.fun:
            best = res
    return best.x


def _perturb(x0: np.ndarray) -> list:
    return [x0, x0 + math.log(1.5), x0 - math.log(1.8)]


def fit_mle(family: str, data, *, fix_location: bool = True) -> PriorSpec:
    """Fit a distribution family to a sample by maximum likelihood.

    Fittable families: normal, t, halfnormal, gamma, invgamma.  For the
    location families (normal, t) the location is fixed at 0 by default,
    matching how zero-centered effect-size priors are built; pass
    ``fix_location=False`` to fit it freely.

    Optimization is Nelder-Mead on log-transformed positive parameters,
    restarted from three moment-based initial guesses.
    """
    if family not in FITTABLE_FAMILIES:
        raise UnsupportedOperationError(f"family {family!r} is not fittable")
    data = np.asarray(data, dtype=float).ravel()
    _check_fit_data(family, data)
    n = data.size
    mean = float(np.mean(data))
    var = float(np.var(data))

    if family == "normal":
        if fix_location:
            sd0 = math.sqrt(float(np.mean(data**2)))

            def neg_ll(theta):
                return -float(np.sum(PriorSpec.normal(0.0, math.exp(theta[0])).log_pdf(data)))

            sol = _nelder_mead(neg_ll, _perturb(np.array([math.log(sd0)])))
            return PriorSpec.normal(0.0, math.exp(sol[0]))

        def neg_ll(theta):
            return -float(np.sum(PriorSpec.normal(theta[0], math.exp(theta[1])).log_pdf(data)))

        x0 = np.array([mean, math.log(math.sqrt(var))])
        starts = [x0, x0 + np.array([0.2 * math.sqrt(var), math.log(1.5)]),
                  x0 - np.array([0.2 * math.sqrt(var), math.log(1.8)])]
        sol = _nelder_mead(neg_ll, starts)
        return PriorSpec.normal(sol[0], math.exp(sol[1]))

    if family == "halfnormal":
        sd0 = math.sqrt(float(np.mean(data**2)))

        def neg_ll(theta):
            return -float(np.sum(PriorSpec.halfnormal(math.exp(theta[0])).log_pdf(data)))

        sol = _nelder_mead(neg_ll, _perturb(np.array([math.log(sd0)])))
        return PriorSpec.halfnormal(math.exp(sol[0]))

    if family == "t":
        sd = math.sqrt(var)
        mad = float(np.median(np.abs(data - np.median(data)))) * 1.4826
        scale0 = max(mad, 0.25 * sd, 1e-8)
        if fix_location:

            def neg_ll(theta):
                spec = PriorSpec.t(0.0, math.exp(theta[0]), math.exp(theta[1]))
                return -float(np.sum(spec.log_pdf(data)))

            starts = [np.array([math.log(scale0), math.log(df0)]) for df0 in (5.0, 2.0, 30.0)]
            sol = _nelder_mead(neg_ll, starts)
            return PriorSpec.t(0.0, math.exp(sol[0]), math.exp(sol[1]))

        def neg_ll(theta):
            spec = PriorSpec.t(theta[0], math.exp(theta[1]), math.exp(theta[2]))
            return -float(np.sum(spec.log_pdf(data)))

        med = float(np.median(data))
        starts = [np.array([med, math.log(scale0), math.log(df0)]) for df0 in (5.0, 2.0, 30.0)]
        sol = _nelder_mead(neg_ll, starts)
        return PriorSpec.t(sol[0], math.exp(sol[1]), math.exp(sol[2]))

    if family == "gamma":
        if var <= 0 or mean <= 0:
            raise DegenerateDataError("gamma fit needs positive spread")
        shape_mom = mean * mean / var
        scale_mom = var / mean
        # Log-moment initial guess (method of Ye & Chen style closed form).
        s = math.log(mean) - float(np.mean(np.log(data)))
        shape_log = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s) if s > 0 else shape_mom

        def neg_ll(theta):
            spec = PriorSpec.gamma(math.exp(theta[0]), math.exp(theta[1]))
            return -float(np.sum(spec.log_pdf(data)))

        starts = [
            np.array([math.log(shape_mom), math.log(scale_mom)]),
            np.array([math.log(shape_log), math.log(mean / shape_log)]),
            np.array([math.log(shape_mom * 1.6), math.log(scale_mom / 1.6)]),
        ]
        sol = _nelder_mead(neg_ll, starts)
        return PriorSpec.gamma(math.exp(sol[0]), math.exp(sol[1]))

    # invgamma
    if var > 0 and mean > 0:
        a0 = mean * mean / var + 2.0
        b0 = mean * (a0 - 1.0)
    else:  # pragma: no cover - guarded by _check_fit_data
        a0, b0 = 2.0, mean

    def neg_ll(theta):
        spec = PriorSpec.invgamma(math.exp(theta[0]), math.exp(theta[1]))
        return -float(np.sum(spec.log_pdf(data)))

    starts = [
        np.array([math.log(a0), math.log(b0)]),
        np.array([math.log(a0 * 1.7), math.log(b0 * 1.7)]),
        np.array([math.log(max(a0 / 1.7, 0.2)), math.log(b0 / 1.7)]),
    ]
    sol = _nelder_mead(neg_ll, starts)
    return PriorSpec.invgamma(math.exp(sol[0]), math.exp(sol[1]))
