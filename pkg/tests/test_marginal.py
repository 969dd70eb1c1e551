import math

import numpy as np
import pytest

from bmameta import (
    Comparison,
    ModelSpec,
    ParameterError,
    PriorSpec,
    Study,
    UnsupportedOperationError,
    log_marginal,
    loglik_fixed,
    loglik_random,
    posterior_summary,
)
from conftest import make_comparison

POINT0 = PriorSpec.point(0.0)
T_POOLED = PriorSpec.t(0.0, 0.43, 5.0)
IG_POOLED = PriorSpec.invgamma(1.71, 0.40)


def h0f():
    return ModelSpec("fixed_H0", POINT0, POINT0)


def h1f(prior):
    return ModelSpec("fixed_H1", prior, POINT0)


def h0r(prior):
    return ModelSpec("random_H0", POINT0, prior)


def h1r(dprior, tprior):
    return ModelSpec("random_H1", dprior, tprior)


class TestModelSpec:
    def test_model_types(self):
        assert h0f().model_type == "fixed_H0"
        assert h1f(T_POOLED).model_type == "fixed_H1"
        assert h0r(IG_POOLED).model_type == "random_H0"
        assert h1r(T_POOLED, IG_POOLED).model_type == "random_H1"

    def test_tau_prior_support_checked(self):
        with pytest.raises(ParameterError):
            ModelSpec("bad", POINT0, PriorSpec.normal(0.0, 1.0))
        with pytest.raises(ParameterError):
            ModelSpec("bad", POINT0, PriorSpec.uniform(-1.0, 1.0))


class TestLogMarginal:
    def test_h0f_closed_form(self):
        c = Comparison((Study(0.0, 1.0),))
        assert log_marginal(h0f(), c) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-14)

    def test_conjugate_normal_identity(self, rng):
        for _ in range(8):
            s0 = float(rng.uniform(0.2, 1.5))
            y = float(rng.normal(0, 1))
            se = float(rng.uniform(0.1, 2.0))
            c = Comparison((Study(y, se),))
            got = log_marginal(h1f(PriorSpec.normal(0.0, s0)), c)
            want = PriorSpec.normal(0.0, math.sqrt(s0 * s0 + se * se)).log_pdf(y)
            assert got == pytest.approx(want, abs=1e-8)

    def test_point_mass_reproduces_simpler_model(self, rng):
        c = make_comparison(rng, 4)
        with_point = ModelSpec("h1f_at_0", PriorSpec.point(0.0), POINT0)
        assert log_marginal(with_point, c) == log_marginal(h0f(), c)
        assert log_marginal(with_point, c) == loglik_fixed(0.0, c)

    def test_study_order_invariance_exact(self, rng):
        c = make_comparison(rng, 5)
        rev = Comparison(c.studies[::-1])
        for model in (h0f(), h1f(T_POOLED), h0r(IG_POOLED), h1r(T_POOLED, IG_POOLED)):
            assert log_marginal(model, c) == log_marginal(model, rev)

    def test_refinement_stability(self, rng):
        c = make_comparison(rng, 4)
        for model in (h1f(T_POOLED), h0r(IG_POOLED), h1r(T_POOLED, IG_POOLED)):
            base = log_marginal(model, c)
            refined = log_marginal(model, c, extra_refine=1)
            assert abs(base - refined) < 1e-6

    @pytest.mark.parametrize("dprior", [
        PriorSpec.cauchy(0.0, 1.0 / math.sqrt(2.0)),
        PriorSpec.normal(0.0, 0.56),
        PriorSpec.t(0.0, 0.33, 3.0),
    ], ids=lambda p: p.family)
    @pytest.mark.parametrize("tprior", [
        PriorSpec.uniform(0.0, 1.0),
        PriorSpec.halfnormal(0.57),
        PriorSpec.invgamma(1.26, 0.24),
        PriorSpec.gamma(1.59, 0.26),
    ], ids=lambda p: p.family)
    def test_monte_carlo_oracle_all_candidate_pairs(self, dprior, tprior):
        rng = np.random.default_rng(hash((dprior.family, tprior.family)) % 2**31)
        comp = make_comparison(rng, 4, delta=0.4, tau=0.25)
        model = h1r(dprior, tprior)
        quad = log_marginal(model, comp)
        n = 300_000
        d = dprior.sample(rng, n)
        t = tprior.sample(rng, n)
        ll = loglik_random(d, t, comp)
        m = float(np.max(ll))
        w = np.exp(ll - m)
        mc = m + math.log(float(np.mean(w)))
        se_mc = float(np.std(w)) / (math.sqrt(n) * float(np.mean(w)))
        assert abs(quad - mc) < 3.5 * se_mc

    def test_conjugate_identity_with_fixed_nonzero_tau(self, rng):
        # point tau at tau0 > 0 inflates every study variance by tau0^2,
        # so the normal-prior marginal stays closed-form
        for _ in range(5):
            s0 = float(rng.uniform(0.3, 1.2))
            tau0 = float(rng.uniform(0.1, 0.8))
            y = float(rng.normal(0, 1))
            se = float(rng.uniform(0.1, 1.0))
            c = Comparison((Study(y, se),))
            model = ModelSpec("fixed_tau", PriorSpec.normal(0.0, s0), PriorSpec.point(tau0))
            got = log_marginal(model, c)
            want = PriorSpec.normal(0.0, math.sqrt(s0**2 + se**2 + tau0**2)).log_pdf(y)
            assert got == pytest.approx(want, abs=1e-8)

    def test_wide_likelihood_narrow_prior(self):
        # nearly uninformative data: marginal approaches the prior-predictive
        c = Comparison((Study(0.3, 8.0),))
        got = log_marginal(h1f(PriorSpec.normal(0.0, 0.3)), c)
        want = PriorSpec.normal(0.0, math.sqrt(0.09 + 64.0)).log_pdf(0.3)
        assert got == pytest.approx(want, abs=1e-8)

    def test_many_studies_log_space(self, rng):
        # 200 studies split around +/-5: every integrand value sits far
        # below exp() underflow, so only log-space accumulation survives.
        studies = [Study(-5.0 + float(rng.normal(0, 0.02)), 0.05) for _ in range(100)]
        studies += [Study(5.0 + float(rng.normal(0, 0.02)), 0.05) for _ in range(100)]
        c = Comparison(tuple(studies))
        value = log_marginal(h1r(T_POOLED, PriorSpec.uniform(0.0, 1.0)), c)
        assert math.isfinite(value)
        assert value < -2000.0

    def test_well_fitting_many_studies(self, rng):
        c = make_comparison(rng, 200, delta=0.5, tau=0.2, se_range=(0.05, 0.3))
        value = log_marginal(h1r(T_POOLED, IG_POOLED), c)
        assert math.isfinite(value)
        # the marginal can never exceed the likelihood peak
        grid_d = np.linspace(0.3, 0.7, 41)
        grid_t = np.linspace(0.05, 0.6, 41)
        peak = max(
            float(loglik_random(d, t, c)) for d in grid_d for t in grid_t
        )
        assert value < peak


class TestPosteriorSummary:
    def test_conjugate_posterior_mean_sd(self, rng):
        for _ in range(5):
            s0 = float(rng.uniform(0.3, 1.2))
            y = float(rng.normal(0, 0.8))
            se = float(rng.uniform(0.15, 0.8))
            c = Comparison((Study(y, se),))
            ps = posterior_summary(h1f(PriorSpec.normal(0.0, s0)), c, "delta")
            shrink = s0 * s0 / (s0 * s0 + se * se)
            assert ps.mean == pytest.approx(y * shrink, abs=1e-6)
            assert ps.sd == pytest.approx(math.sqrt(shrink) * se, abs=1e-6)

    def test_symmetric_data_symmetric_posterior(self):
        c = Comparison((Study(0.4, 0.3), Study(-0.4, 0.3)))
        ps = posterior_summary(h1f(PriorSpec.normal(0.0, 0.7)), c, "delta")
        assert abs(ps.median) < 1e-6
        assert abs(ps.mean) < 1e-6

    def test_point_mass_parameter_rejected(self, rng):
        c = make_comparison(rng, 3)
        with pytest.raises(UnsupportedOperationError):
            posterior_summary(h1f(T_POOLED), c, "tau")
        with pytest.raises(UnsupportedOperationError):
            posterior_summary(h0r(IG_POOLED), c, "delta")

    def test_grid_normalizes(self, rng):
        c = make_comparison(rng, 4)
        for model, par in [
            (h1f(T_POOLED), "delta"),
            (h0r(IG_POOLED), "tau"),
            (h1r(T_POOLED, IG_POOLED), "delta"),
            (h1r(T_POOLED, IG_POOLED), "tau"),
        ]:
            ps = posterior_summary(model, c, par)
            h = np.diff(ps.grid_x)
            mass = float(np.sum(0.5 * h * (ps.grid_pdf[:-1] + ps.grid_pdf[1:])))
            assert mass == pytest.approx(1.0, abs=1e-6)
            assert np.all(ps.grid_pdf >= 0)
            assert ps.ci_lower <= ps.median <= ps.ci_upper

    def test_posterior_with_fixed_nonzero_tau(self, rng):
        s0, tau0, y, se = 0.8, 0.5, 0.6, 0.3
        c = Comparison((Study(y, se),))
        model = ModelSpec("fixed_tau", PriorSpec.normal(0.0, s0), PriorSpec.point(tau0))
        ps = posterior_summary(model, c, "delta")
        total_var = se**2 + tau0**2
        shrink = s0**2 / (s0**2 + total_var)
        assert ps.mean == pytest.approx(y * shrink, abs=1e-6)
        assert ps.sd == pytest.approx(math.sqrt(shrink * total_var), abs=1e-6)

    def test_narrow_posterior_resolved(self, rng):
        # many precise studies: posterior is ~100x narrower than the prior
        c = make_comparison(rng, 80, delta=0.5, tau=0.0, se_range=(0.02, 0.05))
        ps = posterior_summary(h1f(PriorSpec.cauchy(0.0, 0.7071)), c, "delta")
        assert ps.sd < 0.01
        assert 0.4 < ps.mean < 0.6
