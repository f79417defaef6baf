import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fracbubble as fb
from fracbubble.errors import HypothesisViolated, InsufficientLevels
from fracbubble.regularity import (
    IterationTrace,
    derive_growth,
    level_set_chain_ok,
    recursion_audit,
    run_iteration,
)


def test_bounded_term_derivation(params):
    # (gamma=0, m=inf) with crit = 10/3
    spec = derive_growth(params, [(0.0, None)])
    t = spec.terms[0]
    assert t.m_under == pytest.approx(2.5)
    assert t.theta_i == pytest.approx(-0.4)
    assert t.a_i == 1.0
    assert t.xi_i == pytest.approx(0.7)
    assert t.tau_i == pytest.approx(1.0)
    assert spec.theta == pytest.approx(5.0 / 3.0)


def test_boundary_growth_rejected(params):
    crit = params.crit_exp
    with pytest.raises(HypothesisViolated):
        derive_growth(params, [(crit - 1.0, None)])
    with pytest.raises(HypothesisViolated):
        derive_growth(params, [(0.0, 2.0)])  # m below the floor 2.5


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_theta_exceeds_one(gam, mfrac):
    pp = fb.validate(1, 0.2, 1.5)
    crit = pp.crit_exp
    if gam >= crit - 1.0:
        return
    m_under = crit / (crit - 2.0) if gam <= 1.0 else crit / (crit - 1.0 - gam)
    m = None if mfrac > 0.7 else m_under * (1.01 + 10.0 * mfrac)
    try:
        spec = derive_growth(pp, [(gam, m)])
    except HypothesisViolated:
        return
    assert spec.theta > 1.0
    t = spec.terms[0]
    assert 0.0 < t.xi_i < 1.0
    assert 0.0 <= t.a_i <= 1.0 and t.a_i * gam <= 1.0 + 1e-12
    assert t.tau_i > 2.0 / crit


def test_iteration_on_profile(params, grid_mid):
    spec = derive_growth(params, [(0.0, None)])
    u = fb.BubblePoint.at(params, 1.0).sample(grid_mid)
    trace = run_iteration(u, spec, 0.1)
    assert trace.converged
    assert trace.U[-1] <= 1e-12
    assert all(a >= b for a, b in zip(trace.U[:-1], trace.U[1:]))
    assert trace.U[0] <= 0.1 ** spec.crit + 1e-15
    audit = recursion_audit(trace, spec)
    assert audit.passed


def test_iteration_large_delta_stalls_quietly(params, grid_mid):
    spec = derive_growth(params, [(0.0, None)])
    u = fb.BubblePoint.at(params, 1.0).sample(grid_mid)
    trace = run_iteration(u, spec, 1.5)
    assert not trace.converged  # data, not an error


def test_level_chain(params, grid_mid):
    spec = derive_growth(params, [(0.0, None)])
    u = fb.BubblePoint.at(params, 1.0).sample(grid_mid)
    assert level_set_chain_ok(u, spec, 0.9)


def test_synthetic_recursion_recovers_constant(params):
    spec = derive_growth(params, [(0.0, None)])
    theta = spec.theta
    U = [1e-4]
    for k in range(12):
        U.append(2.0 ** k * U[-1] ** theta)
        if U[-1] < 1e-290:
            break
    trace = IterationTrace(delta=0.5, levels=tuple(1 - 2.0 ** (-k)
                                                   for k in range(len(U))),
                           U=tuple(U),
                           support_measure=(0.0,) * len(U),
                           converged=True)
    audit = recursion_audit(trace, spec)
    assert audit.n_pairs >= 5
    assert audit.C == pytest.approx(2.0, abs=1e-6)
    assert audit.passed


def test_white_noise_fails_not_errors(params, grid_mid, rng):
    spec = derive_growth(params, [(0.0, None)])
    u = fb.Field(grid_mid, rng.standard_normal(grid_mid.N))
    trace = run_iteration(u, spec, 0.99)
    if trace.converged:
        pytest.skip("noise trace happened to collapse")
    if sum(1 for a, b in zip(trace.U[:-1], trace.U[1:])
           if a > 1e-290 and b > 1e-290) >= 5:
        audit = recursion_audit(trace, spec)
        assert isinstance(audit.passed, bool)
    else:
        with pytest.raises(InsufficientLevels):
            recursion_audit(trace, spec)


def test_insufficient_levels(params):
    spec = derive_growth(params, [(0.0, None)])
    trace = IterationTrace(delta=0.5, levels=(0.0, 0.5), U=(0.5, 0.4),
                           support_measure=(1.0, 1.0), converged=False)
    with pytest.raises(InsufficientLevels):
        recursion_audit(trace, spec)
