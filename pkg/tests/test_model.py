import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fracbubble as fb
from fracbubble.errors import (
    DimensionOrderViolation,
    EmptyWeight,
    ExponentRange,
    SublinearNeedsPositiveWeight,
)
from fracbubble.model import check_regime, weight_support_box


def test_default_exponents():
    pp = fb.validate(1, 0.2, 1.5)
    assert pp.p == pytest.approx(7.0 / 3.0, rel=1e-14)
    assert pp.crit_exp == pytest.approx(10.0 / 3.0, rel=1e-14)
    assert pp.dual_exp == pytest.approx(10.0 / 7.0, rel=1e-14)
    assert pp.gamma_s == pytest.approx(0.75, rel=1e-14)
    assert pp.supercritical_q


def test_dimension_order_rejected():
    with pytest.raises(DimensionOrderViolation):
        fb.validate(1, 0.3, 1.0)


def test_2d_exponents():
    pp = fb.validate(2, 0.4, 1.0)
    assert pp.p == pytest.approx(2.8 / 1.2, rel=1e-14)
    assert pp.gamma_s == pytest.approx(1.2, rel=1e-14)


def test_exponent_range_rejected():
    with pytest.raises(ExponentRange):
        fb.validate(1, 0.2, 5.0)
    with pytest.raises(ExponentRange):
        fb.validate(1, 1.2, 1.0)
    with pytest.raises(ExponentRange):
        fb.validate(1, 0.2, -0.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.floats(0.01, 0.99))
def test_exponent_identities(n, s):
    # the two algebraic identities used throughout, for admissible pairs
    if n <= 4 * s:
        return
    pp = fb.validate(n, s, min(0.9 * (n + 2 * s) / (n - 2 * s), 1.0))
    assert pp.crit_exp / pp.dual_exp == pytest.approx(pp.p, rel=1e-12)
    assert (pp.p - 1.0) * pp.dual_exp * (n + 2 * s) / (4 * s) == \
        pytest.approx(pp.crit_exp, rel=1e-12)
    assert pp.dual_exp < 2.0 < pp.crit_exp


def test_bump_eval_values():
    h = fb.CompactWeight((fb.Bump((0.0,), 1.0, 1.0, 2),))
    assert h(np.array([0.0])) == pytest.approx(1.0)
    assert h(np.array([0.5])) == pytest.approx(0.5625)
    assert h(np.array([1.5])) == 0.0


def test_weight_continuity(rng):
    h = fb.CompactWeight((fb.Bump((0.3,), 1.2, -0.7, 2),
                          fb.Bump((-1.0,), 0.5, 1.3, 3)))
    x = rng.uniform(-3, 3, size=400)
    d = 1e-7
    jump = np.abs(h(x[:, None]) - h((x + d)[:, None]))
    assert np.max(jump) < 1e-5


def test_support_box():
    h1 = fb.CompactWeight((fb.Bump((0.0,), 1.0, 1.0, 2),))
    lo, hi = weight_support_box(h1)
    assert lo[0] == -1.0 and hi[0] == 1.0
    h2 = fb.CompactWeight((fb.Bump((-2.0,), 1.0, 1.0, 2),
                           fb.Bump((3.0,), 0.5, 0.2, 1)))
    lo, hi = weight_support_box(h2)
    assert lo[0] == -3.0 and hi[0] == 3.5


def test_eval_vanishes_outside_box(rng):
    h = fb.CompactWeight((fb.Bump((-2.0,), 1.0, 1.0, 2),
                          fb.Bump((3.0,), 0.5, -0.2, 1)))
    lo, hi = weight_support_box(h)
    pts = np.concatenate([lo[0] - 0.01 - rng.random(50),
                          hi[0] + 0.01 + rng.random(50)])
    assert np.all(h(pts[:, None]) == 0.0)


def test_empty_weight_rejected():
    with pytest.raises(EmptyWeight):
        fb.CompactWeight(())
    with pytest.raises(EmptyWeight):
        fb.CompactWeight((fb.Bump((0.0,), 1.0, -1.0, 2),))


def test_regime_check():
    pp = fb.validate(1, 0.2, 0.5)  # threshold 2s/(n-2s) = 2/3
    hpm = fb.CompactWeight((fb.Bump((0.0,), 1.0, 1.0, 2),
                            fb.Bump((2.0,), 1.0, -1.0, 2)))
    with pytest.raises(SublinearNeedsPositiveWeight):
        check_regime(pp, hpm)
    hplus = fb.CompactWeight((fb.Bump((0.0,), 1.0, 1.0, 2),))
    check_regime(pp, hplus)  # fine
    check_regime(fb.validate(1, 0.2, 1.5), hpm)  # supercritical: fine
