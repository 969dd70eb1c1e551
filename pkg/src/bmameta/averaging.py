"""Model-ensemble bookkeeping: posterior model probabilities, Bayes-factor
matrices, inclusion Bayes factors, model-averaged estimates, and
sequential updating.

All probability arithmetic runs in log space with log-sum-exp, so
posterior model probabilities can dwindle to ~1e-300 without the odds
ratios degrading.  Inclusion Bayes factors are computed for any
bipartition of the ensemble; the two canonical ones contrast the models
with a free effect against the point-null models, and the free-
heterogeneity models against the fixed ones.

Model-averaged effect summaries follow the convention of averaging
*conditional on effect presence*: the mixture runs over the free-effect
models with their posterior probabilities renormalized within that set.
A spike-included (unconditional) average is available behind a flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import Comparison
from .errors import DegenerateEvidenceError, ParameterError
from .marginal import (
    ModelSpec,
    PosteriorSummary,
    log_marginal,
    posterior_summary,
    summarize_grid,
)
from .priors import PriorSpec

__all__ = [
    "MODEL_TYPES",
    "EnsembleMember",
    "ModelEnsemble",
    "BmaResult",
    "build_standard_ensemble",
    "evaluate",
    "inclusion_bf",
    "sequential_update",
    "mixture_summary",
]

MODEL_TYPES = ("fixed_H0", "fixed_H1", "random_H0", "random_H1")


@dataclass(frozen=True)
class EnsembleMember:
    model: ModelSpec
    prior_prob: float


@dataclass(frozen=True)
class ModelEnsemble:
    """A weighted collection of models; prior probabilities sum to one."""

    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if len(self.members) < 2:
            raise ParameterError("an ensemble needs at least two members")
        probs = np.array([m.prior_prob for m in self.members])
        if np.any(probs <= 0):
            raise ParameterError("all prior model probabilities must be > 0")
        if abs(float(np.sum(probs)) - 1.0) > 1e-12:
            raise ParameterError(
                f"prior model probabilities must sum to 1, got {float(np.sum(probs))!r}"
            )

    @property
    def names(self) -> tuple:
        return tuple(m.model.name for m in self.members)

    @property
    def prior_probs(self) -> np.ndarray:
        return np.array([m.prior_prob for m in self.members])

    @property
    def effect_indices(self) -> tuple:
        return tuple(i for i, m in enumerate(self.members) if m.model.delta_free)

    @property
    def heterogeneity_indices(self) -> tuple:
        return tuple(i for i, m in enumerate(self.members) if m.model.tau_free)


def build_standard_ensemble(
    delta_priors: Sequence[PriorSpec],
    tau_priors: Sequence[PriorSpec],
    scheme: str = "four-type",
    *,
    type_probs: Sequence[float] = (0.25, 0.25, 0.25, 0.25),
    include_types: Sequence[str] = MODEL_TYPES,
) -> ModelEnsemble:
    """Cross free/null assumptions with candidate priors into an ensemble.

    ``scheme="four-type"`` gives each model type its ``type_probs`` share
    and spreads it evenly over the type's prior configurations (so 3
    delta priors and 4 tau priors produce weights 1/4, 1/12, 1/16, 1/48).
    ``scheme="flat"`` weights every configuration equally.  Restricting
    ``include_types`` renormalizes over the kept types.
    """
    if scheme not in ("four-type", "flat"):
        raise ParameterError(f"unknown ensemble scheme {scheme!r}")
    delta_priors = list(delta_priors)
    tau_priors = list(tau_priors)
    if not delta_priors or not tau_priors:
        raise ParameterError("need at least one delta prior and one tau prior")
    unknown = set(include_types) - set(MODEL_TYPES)
    if unknown:
        raise ParameterError(f"unknown model types {sorted(unknown)!r}")
    type_probs = np.asarray(type_probs, dtype=float)
    if type_probs.shape != (4,) or np.any(type_probs <= 0):
        raise ParameterError("type_probs must be four positive values")
    if abs(float(np.sum(type_probs)) - 1.0) > 1e-9:
        raise ParameterError("type_probs must sum to 1")

    point0 = PriorSpec.point(0.0)
    configs = {
        "fixed_H0": [(point0, point0)],
        "fixed_H1": [(d, point0) for d in delta_priors],
        "random_H0": [(point0, t) for t in tau_priors],
        "random_H1": [(d, t) for d in delta_priors for t in tau_priors],
    }
    kept = [t for t in MODEL_TYPES if t in set(include_types)]
    members = []
    if scheme == "four-type":
        shares = {t: p for t, p in zip(MODEL_TYPES, type_probs)}
        # renormalize only when types were actually excluded, so a full
        # ensemble passes the caller's probabilities through untouched
        norm = sum(shares[t] for t in kept) if len(kept) < 4 else 1.0
        for t in kept:
            per = shares[t] / norm / len(configs[t])
            for d, tau in configs[t]:
                members.append(EnsembleMember(ModelSpec(_member_name(t, d, tau, configs), d, tau), per))
    else:
        total = sum(len(configs[t]) for t in kept)
        for t in kept:
            for d, tau in configs[t]:
                members.append(
                    EnsembleMember(ModelSpec(_member_name(t, d, tau, configs), d, tau), 1.0 / total)
                )
    return ModelEnsemble(tuple(members))


def _member_name(model_type: str, d: PriorSpec, tau: PriorSpec, configs) -> str:
    if len(configs[model_type]) == 1:
        return model_type
    if model_type == "fixed_H1":
        return f"{model_type}[{d}]"
    if model_type == "random_H0":
        return f"{model_type}[{tau}]"
    return f"{model_type}[{d};{tau}]"


@dataclass(frozen=True, eq=False)
class BmaResult:
    """Everything the ensemble update produced for one comparison."""

    member_names: tuple
    model_types: tuple
    prior_probs: np.ndarray
    log_marginals: np.ndarray
    posterior_probs: np.ndarray
    bf_matrix: np.ndarray
    incl_bf_effect: Optional[float]
    incl_posterior_prob_effect: Optional[float]
    incl_bf_heterogeneity: Optional[float]
    incl_posterior_prob_heterogeneity: Optional[float]
    averaged_delta: Optional[PosteriorSummary] = None
    delta_fixed: Optional[PosteriorSummary] = None
    delta_random: Optional[PosteriorSummary] = None
    averaged_tau: Optional[PosteriorSummary] = None
    averaged_delta_unconditional: Optional[PosteriorSummary] = None
    member_delta: tuple = ()
    member_tau: tuple = ()


def _log_inclusion(log_in, log_out) -> float:
    if not np.isfinite(log_out):
        return math.inf
    if not np.isfinite(log_in):
        return -math.inf
    return float(log_in - log_out)


def inclusion_bf(ensemble: ModelEnsemble, posterior_probs, in_indices) -> float:
    """Bayes factor for a bipartition: posterior odds over prior odds.

    ``in_indices`` selects the numerator side.  A zero denominator yields
    ``inf`` (check with ``math.isinf``) rather than an exception.
    """
    post = np.asarray(posterior_probs, dtype=float)
    prior = ensemble.prior_probs
    in_mask = np.zeros(post.size, dtype=bool)
    in_mask[list(in_indices)] = True
    if not np.any(in_mask) or np.all(in_mask):
        raise ParameterError("partition must be nonempty on both sides")
    post_in, post_out = float(np.sum(post[in_mask])), float(np.sum(post[~in_mask]))
    prior_in, prior_out = float(np.sum(prior[in_mask])), float(np.sum(prior[~in_mask]))
    log_prior_odds = math.log(prior_in) - math.log(prior_out)
    if post_out == 0.0:
        return math.inf
    if post_in == 0.0:
        return 0.0
    return math.exp(math.log(post_in) - math.log(post_out) - log_prior_odds)


def mixture_summary(summaries: Sequence[PosteriorSummary], weights) -> PosteriorSummary:
    """Posterior summary of a weighted mixture, on the combined grid."""
    weights = np.asarray(weights, dtype=float)
    weights = weights / np.sum(weights)
    if len(summaries) == 1:
        return summaries[0]
    x = np.unique(np.concatenate([s.grid_x for s in summaries]))
    pdf = np.zeros_like(x)
    for s, w in zip(summaries, weights):
        pdf += w * np.interp(x, s.grid_x, s.grid_pdf, left=0.0, right=0.0)
    return summarize_grid(x, pdf)


def _mixture_with_spikes(
    summaries: Sequence[PosteriorSummary],
    weights,
    spike_values,
    spike_weights,
) -> PosteriorSummary:
    """Mixture summary including point masses; no density grid is attached."""
    weights = np.asarray(weights, dtype=float)
    spike_values = np.asarray(spike_values, dtype=float)
    spike_weights = np.asarray(spike_weights, dtype=float)
    mean = float(np.sum(weights * [s.mean for s in summaries]) + np.sum(spike_weights * spike_values))
    second = float(
        np.sum(weights * [s.sd**2 + s.mean**2 for s in summaries])
        + np.sum(spike_weights * spike_values**2)
    )
    var = max(second - mean * mean, 0.0)

    x = np.unique(np.concatenate([spike_values] + [s.grid_x for s in summaries]))
    cdf = np.zeros_like(x)
    for s, w in zip(summaries, weights):
        h = np.diff(s.grid_x)
        member_cdf = np.concatenate([[0.0], np.cumsum(0.5 * h * (s.grid_pdf[:-1] + s.grid_pdf[1:]))])
        member_cdf /= member_cdf[-1]
        cdf += w * np.interp(x, s.grid_x, member_cdf, left=0.0, right=1.0)
    for v, w in zip(spike_values, spike_weights):
        cdf += w * (x >= v)

    def invert(q):
        idx = int(np.searchsorted(cdf, q, side="left"))
        return float(x[min(idx, x.size - 1)])

    return PosteriorSummary(
        mean=mean, median=invert(0.5), sd=math.sqrt(var),
        ci_lower=invert(0.025), ci_upper=invert(0.975),
        grid_x=None, grid_pdf=None,
    )


def _group_weights(log_post: np.ndarray, indices) -> np.ndarray:
    sub = log_post[list(indices)]
    return np.exp(sub - logsumexp(sub))


def evaluate(
    ensemble: ModelEnsemble,
    comparison: Comparison,
    *,
    rel_tol: float = 1e-9,
    summaries: bool = True,
    grid_points: int = 2048,
    include_null_average: bool = False,
) -> BmaResult:
    """Update the ensemble on one comparison.

    Computes per-member log marginal likelihoods, posterior model
    probabilities, the pairwise Bayes-factor matrix, and the inclusion
    Bayes factors for the effect and for heterogeneity.  With
    ``summaries=True``, grid posteriors are produced per free parameter
    and mixed into fixed/random/averaged effect summaries (conditional on
    effect presence) and an averaged heterogeneity summary.
    """
    models = [m.model for m in ensemble.members]
    logml = np.array([log_marginal(m, comparison, rel_tol=rel_tol) for m in models])
    if not np.any(np.isfinite(logml)):
        raise DegenerateEvidenceError("every model has zero marginal likelihood")
    log_prior = np.log(ensemble.prior_probs)
    log_unnorm = log_prior + logml
    log_post = log_unnorm - logsumexp(log_unnorm)
    posterior = np.exp(log_post)

    with np.errstate(invalid="ignore", over="ignore"):
        bf_matrix = np.exp(logml[:, None] - logml[None, :])
    np.fill_diagonal(bf_matrix, 1.0)

    eff = list(ensemble.effect_indices)
    het = list(ensemble.heterogeneity_indices)
    n = len(models)

    def _partition_bf(in_idx):
        out_idx = [i for i in range(n) if i not in set(in_idx)]
        if not in_idx or not out_idx:
            return None, None
        log_odds_post = _log_inclusion(logsumexp(log_unnorm[in_idx]), logsumexp(log_unnorm[out_idx]))
        log_odds_prior = float(logsumexp(log_prior[in_idx]) - logsumexp(log_prior[out_idx]))
        bf = math.exp(log_odds_post - log_odds_prior) if math.isfinite(log_odds_post) else (
            math.inf if log_odds_post > 0 else 0.0
        )
        return bf, float(np.exp(logsumexp(log_post[in_idx])))

    bf_effect, post_effect = _partition_bf(eff)
    bf_het, post_het = _partition_bf(het)

    member_delta: list = [None] * n
    member_tau: list = [None] * n
    delta_fixed = delta_random = averaged_delta = averaged_tau = None
    averaged_unconditional = None
    if summaries:
        for i, model in enumerate(models):
            if model.delta_free:
                member_delta[i] = posterior_summary(
                    model, comparison, "delta", grid_points=grid_points, rel_tol=rel_tol
                )
            if model.tau_free:
                member_tau[i] = posterior_summary(
                    model, comparison, "tau", grid_points=grid_points, rel_tol=rel_tol
                )
        fixed_idx = [i for i in eff if not models[i].tau_free]
        random_idx = [i for i in eff if models[i].tau_free]
        if fixed_idx:
            delta_fixed = mixture_summary(
                [member_delta[i] for i in fixed_idx], _group_weights(log_post, fixed_idx)
            )
        if random_idx:
            delta_random = mixture_summary(
                [member_delta[i] for i in random_idx], _group_weights(log_post, random_idx)
            )
        if eff:
            averaged_delta = mixture_summary(
                [member_delta[i] for i in eff], _group_weights(log_post, eff)
            )
        if het:
            averaged_tau = mixture_summary(
                [member_tau[i] for i in het], _group_weights(log_post, het)
            )
        if include_null_average and eff:
            null_idx = [i for i in range(n) if i not in set(eff)]
            averaged_unconditional = _mixture_with_spikes(
                [member_delta[i] for i in eff],
                posterior[eff],
                [models[i].delta_prior.params[0] for i in null_idx],
                posterior[null_idx],
            )

    return BmaResult(
        member_names=tuple(m.name for m in models),
        model_types=tuple(m.model_type for m in models),
        prior_probs=ensemble.prior_probs,
        log_marginals=logml,
        posterior_probs=posterior,
        bf_matrix=bf_matrix,
        incl_bf_effect=bf_effect,
        incl_posterior_prob_effect=post_effect,
        incl_bf_heterogeneity=bf_het,
        incl_posterior_prob_heterogeneity=post_het,
        averaged_delta=averaged_delta,
        delta_fixed=delta_fixed,
        delta_random=delta_random,
        averaged_tau=averaged_tau,
        averaged_delta_unconditional=averaged_unconditional,
        member_delta=tuple(member_delta),
        member_tau=tuple(member_tau),
    )


def sequential_update(
    ensemble: ModelEnsemble,
    comparison: Comparison,
    order: Optional[Sequence[int]] = None,
    *,
    rel_tol: float = 1e-9,
    summaries: bool = False,
) -> list:
    """Re-evaluate the ensemble on growing study prefixes.

    ``order`` must be a permutation of the study indices; the default is
    input order.  Element ``t`` is the batch result for the first ``t+1``
    studies, so the final element matches a full batch evaluation.
    """
    k = comparison.k
    if order is None:
        order = list(range(k))
    else:
        order = [int(i) for i in order]
        if sorted(order) != list(range(k)):
            raise ParameterError("order must be a permutation of the study indices")
    results = []
    for t in range(1, k + 1):
        prefix = comparison.subset(order[:t])
        results.append(
            evaluate(ensemble, prefix, rel_tol=rel_tol, summaries=summaries)
        )
    return results
