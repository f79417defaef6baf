import numpy as np
import pytest

import fracbubble as fb
from fracbubble.errors import FitRejected, MomentDiverges
from fracbubble.landscape import (
    GammaSample,
    build_slab,
    find_critical_points,
    small_mu_limit,
    tail_rates,
)


def test_cancelling_pair_gives_zero(params):
    h = fb.CompactWeight((fb.Bump((0.4,), 1.0, 1.0, 2),
                          fb.Bump((0.4,), 1.0, -1.0, 2)))
    for mu, xi in ((0.3, 0.0), (1.0, 0.7), (2.5, -1.2)):
        gs = fb.gamma(mu, (xi,), h, params)
        assert abs(gs.gamma) <= 1e-12


def test_even_weight_centered_gradient_vanishes(params, weight):
    gs = fb.gamma(0.8, (0.0,), weight, params)
    assert gs.grad[1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_matches_finite_differences(params, weight_pm, seed):
    rng = np.random.default_rng(seed)
    d = 1e-5
    for _ in range(10):
        mu = float(rng.uniform(0.2, 2.0))
        xi = float(rng.uniform(-4.0, 4.0))
        gs = fb.gamma(mu, (xi,), weight_pm, params)
        fd_mu = (fb.gamma(mu + d, (xi,), weight_pm, params,
                          want_grad=False).gamma
                 - fb.gamma(mu - d, (xi,), weight_pm, params,
                            want_grad=False).gamma) / (2 * d)
        fd_xi = (fb.gamma(mu, (xi + d,), weight_pm, params,
                          want_grad=False).gamma
                 - fb.gamma(mu, (xi - d,), weight_pm, params,
                            want_grad=False).gamma) / (2 * d)
        assert abs(gs.grad[0] - fd_mu) <= 1e-6
        assert abs(gs.grad[1] - fd_xi) <= 1e-6


def test_linearity_in_weight(params, weight):
    g1 = fb.gamma(0.6, (0.2,), weight, params, want_grad=False).gamma
    g5 = fb.gamma(0.6, (0.2,), weight.scaled(5.0), params,
                  want_grad=False).gamma
    assert g5 == pytest.approx(5.0 * g1, rel=1e-13)


def test_translation_covariance(params, weight_pm):
    v = (1.37,)
    base = fb.gamma(0.9, (0.4,), weight_pm, params, want_grad=False).gamma
    moved = fb.gamma(0.9, (0.4 + v[0],), weight_pm.shifted(v), params,
                     want_grad=False).gamma
    assert moved == pytest.approx(base, rel=1e-12)


def test_sign_nonnegative_weight(params, weight):
    for mu in (0.1, 1.0, 3.0):
        for xi in (-2.0, 0.0, 1.5):
            assert fb.gamma(mu, (xi,), weight, params,
                            want_grad=False).gamma >= 0.0


def test_uniform_small_scale_decay(params, weight):
    tops = [max(abs(fb.gamma(2.0 ** (-j), (x,), weight, params,
                             want_grad=False).gamma)
                for x in np.linspace(-2, 2, 9))
            for j in range(4, 10)]
    assert all(a > b for a, b in zip(tops[:-1], tops[1:]))


def test_small_mu_limit_matches_moment(params, weight):
    rep = small_mu_limit((0.0,), weight, params, jrange=(8, 12))
    assert rep.regime == "limit"
    assert abs(rep.limit - rep.predicted) <= 1e-3 * abs(rep.predicted)


def test_small_mu_limit_sign_flip(params, weight_pm):
    rep = small_mu_limit((3.0,), weight_pm, params, jrange=(8, 12))
    assert rep.limit < 0.0
    assert float(weight_pm(np.array([3.0]))) < 0.0


def test_sublinear_divergence_certificate(params_sub, weight):
    rep = small_mu_limit((0.0,), weight, params_sub)
    assert rep.regime == "divergence"
    assert rep.monotone
    assert rep.growth_ratio >= 2.0
    assert rep.verdict == "consistent with +infinity"


def test_tail_rates_supercritical(params, weight):
    mu_fit, xi_fit = tail_rates(weight, params)
    assert mu_fit.expected == pytest.approx(0.25)
    assert abs(mu_fit.slope - 0.25) <= 0.02 * 0.25
    assert mu_fit.r2 >= 0.999
    assert xi_fit.expected == pytest.approx(-1.5)
    assert abs(xi_fit.slope - (-1.5)) <= 0.02 * 1.5
    assert xi_fit.r2 >= 0.999


def test_tail_rates_sublinear(params_sub, weight):
    mu_fit, _ = tail_rates(weight, params_sub)
    assert mu_fit.expected == pytest.approx(0.45)
    assert abs(mu_fit.slope - 0.45) <= 0.02 * 0.45
    assert mu_fit.r2 >= 0.999


def test_fit_rejected_on_bad_window(params, weight):
    # the pre-asymptotic window bends the log-log line enough to fail r^2
    with pytest.raises(FitRejected):
        tail_rates(weight, params, mu_window=(0, 3))


def test_slab_contains_seed(params, weight):
    slab = build_slab(weight, params)
    assert slab.mu1 < slab.mu0 < slab.mu2
    assert float(np.sqrt(sum(t * t for t in slab.xi0))) < slab.R
    assert slab.boundary_max < slab.B / 2


def test_threshold_scales_linearly_with_amplitude(params, weight):
    slab = build_slab(weight, params)
    g1 = fb.gamma(slab.mu0, slab.xi0, weight, params, want_grad=False).gamma
    g10 = fb.gamma(slab.mu0, slab.xi0, weight.scaled(10.0), params,
                   want_grad=False).gamma
    assert g10 == pytest.approx(10.0 * g1, rel=1e-13)


def test_critical_point_symmetric_bump(params, weight):
    slab = build_slab(weight, params)
    pts = find_critical_points(weight, params, slab, kinds=("max",))
    assert len(pts) >= 1
    assert abs(pts[0].xi[0]) <= 1e-6
    assert pts[0].grad_norm <= 1e-8


def test_synthetic_quadratic_hook(params, weight):
    slab = build_slab(weight, params)

    def fake(mu, xi):
        val = -(mu - 1.0) ** 2 - sum(t * t for t in xi)
        grad = (-2.0 * (mu - 1.0),) + tuple(-2.0 * t for t in xi)
        return GammaSample(mu=mu, xi=tuple(xi), gamma=val, grad=grad)

    pts = find_critical_points(weight, params, slab, gamma_fn=fake,
                               kinds=("max",))
    assert abs(pts[0].mu - 1.0) <= 1e-8
    assert abs(pts[0].xi[0]) <= 1e-8


def test_two_bump_max_min_locations(params, weight_pm):
    slab = build_slab(weight_pm, params)
    pts = find_critical_points(weight_pm, params, slab)
    kinds = {c.kind for c in pts}
    assert kinds == {"max", "min"}
    mx = [c for c in pts if c.kind == "max"][0]
    mn = [c for c in pts if c.kind == "min"][0]
    assert abs(mx.xi[0] - (-3.0)) <= 0.2
    assert abs(mn.xi[0] - 3.0) <= 0.2
    assert mx.gamma > 0 > mn.gamma
