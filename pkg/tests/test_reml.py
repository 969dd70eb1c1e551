import numpy as np
import pytest

from bmameta import (
    Comparison,
    InsufficientDataError,
    Study,
    reml_fit,
    restricted_loglik,
)
from conftest import make_comparison


def test_two_equal_studies_zero_dispersion():
    c = Comparison((Study(0.3, 0.2), Study(0.3, 0.2)))
    fit = reml_fit(c)
    assert fit.delta_hat == pytest.approx(0.3, abs=1e-12)
    assert fit.tau_hat == 0.0
    assert fit.converged


def test_requires_two_studies():
    with pytest.raises(InsufficientDataError):
        reml_fit(Comparison((Study(0.1, 0.2),)))


def test_homogeneous_data_hits_boundary_mostly():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        c = make_comparison(rng, 10, delta=0.2, tau=0.0, se_range=(0.2, 0.4))
        if reml_fit(c).tau_hat == 0.0:
            hits += 1
    assert hits > 50


def test_grid_search_oracle(rng):
    for _ in range(10):
        c = make_comparison(rng, 10, delta=0.4, tau=0.3, se_range=(0.1, 0.4))
        fit = reml_fit(c)
        y, se = c._canonical
        tau_max = 10.0 * float(np.max(np.abs(y - np.median(y)))) + float(np.max(se))
        grid = np.linspace(0.0, tau_max, 100_000)
        oracle = float(grid[np.argmax(restricted_loglik(grid, c))])
        assert fit.tau_hat == pytest.approx(oracle, abs=1e-4)


def test_returned_tau_beats_thousand_point_grid(rng):
    c = make_comparison(rng, 8, delta=0.1, tau=0.25)
    fit = reml_fit(c)
    y, se = c._canonical
    tau_max = 10.0 * float(np.max(np.abs(y - np.median(y)))) + float(np.max(se))
    grid = np.linspace(0.0, tau_max, 1000)
    best_grid = float(np.max(restricted_loglik(grid, c)))
    assert restricted_loglik(fit.tau_hat, c) >= best_grid - 1e-9


def test_delta_hat_is_weighted_mean(rng):
    c = make_comparison(rng, 7, tau=0.3)
    fit = reml_fit(c)
    w = 1.0 / (c.std_errors**2 + fit.tau_hat**2)
    wmean = float(np.sum(w * c.effects) / np.sum(w))
    assert fit.delta_hat == pytest.approx(wmean, abs=1e-12)
    assert fit.se_delta == pytest.approx(1.0 / np.sqrt(np.sum(w)), abs=1e-12)


def test_translation_equivariance(rng):
    c = make_comparison(rng, 9, delta=0.2, tau=0.2)
    shift = 0.75
    shifted = Comparison(tuple(Study(s.effect + shift, s.se) for s in c.studies))
    fit = reml_fit(c)
    fit_shifted = reml_fit(shifted)
    assert fit_shifted.delta_hat == pytest.approx(fit.delta_hat + shift, abs=1e-10)
    assert fit_shifted.tau_hat == pytest.approx(fit.tau_hat, abs=1e-10)


def test_restricted_loglik_vectorized(rng):
    c = make_comparison(rng, 5)
    taus = np.linspace(0.0, 2.0, 11)
    vec = restricted_loglik(taus, c)
    assert vec.shape == (11,)
    for t, v in zip(taus, vec):
        assert restricted_loglik(float(t), c) == pytest.approx(v, abs=1e-14)
