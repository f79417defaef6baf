import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fracbubble as fb
from fracbubble.errors import GridMismatch
from fracbubble.field import (
    field_from_raw,
    field_to_csv,
    field_to_raw,
    weight_quadrature,
    xs_norm,
)


def _random_field(grid, rng, width=2.0):
    r = grid.radius(rng.uniform(-grid.L / 4, grid.L / 4, size=grid.n))
    prof = np.maximum(1.0 - (r / width) ** 2, 0.0) ** 2
    return fb.Field(grid, prof * np.cos(rng.uniform(0, 3) * r))


def test_constant_maps_to_zero(params, grid_mid):
    u = fb.Field(grid_mid, np.full((grid_mid.N,), 3.7))
    out = fb.frac_laplacian(u, params.s)
    assert np.max(np.abs(out.values)) < 1e-12


def test_symbol_roundtrip(params, grid_mid, rng):
    u = fb.Field(grid_mid, rng.standard_normal(grid_mid.N))
    back = fb.riesz_potential(fb.frac_laplacian(u, params.s), params.s)
    target = u.values - u.values.mean()
    assert np.max(np.abs(back.values - target)) < 1e-10


def test_bubble_is_frac_laplacian_oracle(params, grid):
    # the profile equation, with the forward operator on the sampled bubble
    b = fb.BubblePoint.at(params, 1.0)
    z = b.sample(grid)
    out = fb.frac_laplacian(z, params.s, far=b.far_field())
    rhs = z.values ** params.p
    mask = grid.radius(b.xi) <= grid.L / 2
    assert np.max(np.abs(out.values - rhs)[mask]) / rhs.max() <= 1e-3


def test_potential_of_nonlinearity_returns_bubble(params, grid):
    b = fb.BubblePoint.at(params, 1.0)
    z = b.sample(grid)
    src = fb.SourceTail(center=b.xi, coef=b.far_mono() ** params.p)
    back = fb.riesz_potential(fb.Field(grid, z.values ** params.p),
                              params.s, src=src)
    mask = grid.radius(b.xi) <= grid.L / 2
    err = np.max(np.abs(back.values - z.values)[mask]) / z.values.max()
    assert err <= 1e-3


def test_near_classical_limit(grid_mid):
    # s -> 1: the symbol approaches the classical second difference
    sig = 2.0
    x = grid_mid.axis
    u = fb.Field(grid_mid, np.exp(-x * x / (2 * sig ** 2)))
    out = fb.frac_laplacian(u, 0.999)
    v = u.values
    fd = -(np.roll(v, -1) - 2 * v + np.roll(v, 1)) / grid_mid.dx ** 2
    mask = np.abs(x) <= grid_mid.L / 2
    rel = np.max(np.abs(out.values - fd)[mask]) / np.max(np.abs(fd))
    assert rel < 0.01


def test_hs_inner_symmetric_and_cauchy_schwarz(params, grid_mid, rng):
    u = _random_field(grid_mid, rng)
    v = _random_field(grid_mid, rng)
    s = params.s
    assert fb.hs_inner(u, v, s) == fb.hs_inner(v, u, s)
    lhs = fb.hs_inner(u, v, s) ** 2
    rhs = fb.hs_inner(u, u, s) * fb.hs_inner(v, v, s)
    assert lhs <= rhs * (1 + 1e-12)


def test_hs_inner_grid_mismatch(params, rng):
    u = fb.Field(fb.Grid(1, 40.0, 128), rng.standard_normal(128))
    v = fb.Field(fb.Grid(1, 40.0, 256), rng.standard_normal(256))
    with pytest.raises(GridMismatch):
        fb.hs_inner(u, v, params.s)


def test_tangent_frame_orthogonality_on_grid(params, grid):
    # center the bubble half a cell off the lattice so reflection is an
    # exact grid symmetry and the parity cancellation is clean
    b = fb.BubblePoint.at(params, 1.0, (grid.dx / 2,))
    q1 = b.sample_tangent(grid, 1)
    q2 = b.sample_tangent(grid, 2)
    lam = max(fb.hs_inner(q1, q1, params.s), fb.hs_inner(q2, q2, params.s))
    assert abs(fb.hs_inner(q1, q2, params.s)) <= 1e-6 * lam


def test_pairing_identity(params, grid_mid, rng):
    s = params.s
    psi = rng.standard_normal(grid_mid.N)
    psi -= psi.mean()
    phi = rng.standard_normal(grid_mid.N)
    lhs = fb.hs_inner(fb.riesz_potential(fb.Field(grid_mid, psi), s),
                      fb.Field(grid_mid, phi), s)
    rhs = grid_mid.integrate(psi * phi)
    assert abs(lhs - rhs) <= 1e-10 * abs(rhs)


def test_plancherel_positive(params, grid_mid, rng):
    u = _random_field(grid_mid, rng)
    assert fb.hs_inner(u, u, params.s) > 0.0
    c = fb.Field(grid_mid, np.ones(grid_mid.N))
    assert fb.hs_inner(c, c, params.s) == 0.0


def test_norms_sup(params, grid_mid, rng):
    u = _random_field(grid_mid, rng)
    rep = fb.norms(u, params.s)
    assert rep.sup == np.max(np.abs(u.values))


def test_critical_lp_dilation_invariant(params, grid):
    # grid integral plus the analytic completion beyond the box
    crit = params.crit_exp
    vals = []
    for mu in (0.5, 1.0, 2.0):
        b = fb.BubblePoint.at(params, mu)
        u = b.sample(grid)
        body = grid.integrate(np.abs(u.values) ** crit)
        # |z|^crit ~ A^crit |x|^{-2n} outside the box
        tail = b.far_mono() ** crit * 2.0 / grid.L
        vals.append((body + tail) ** (1.0 / crit))
    spread = (max(vals) - min(vals)) / min(vals)
    assert spread <= 1e-3


def test_energy_split_and_positive_part(params, weight, grid_mid):
    u = fb.Field(grid_mid, -np.exp(-grid_mid.axis ** 2))
    rep = fb.energy(u, params, weight)
    assert rep.G == 0.0
    assert rep.feps == rep.f0 - params.eps * rep.G
    assert rep.f0 == pytest.approx(0.5 * fb.hs_inner(u, u, params.s))


def test_energy_G_matches_reduced_functional(params, weight, grid):
    b = fb.BubblePoint.at(params, 0.8, (0.3,))
    u = b.sample(grid)
    rep = fb.energy(u, params, weight)
    gam = fb.gamma(0.8, (0.3,), weight, params, want_grad=False).gamma
    assert abs(rep.G - gam) <= 1e-6 * max(abs(gam), 1.0)


def test_energy_critical_at_bubble(params, weight, grid, rng):
    b = fb.BubblePoint.at(params, 1.0)
    z = b.sample(grid)
    t = 1e-5
    for _ in range(20):
        phi = _random_field(grid, rng)
        up = fb.Field(grid, z.values + t * phi.values)
        um = fb.Field(grid, z.values - t * phi.values)
        df = (fb.energy(up, params, weight, reference=b).f0
              - fb.energy(um, params, weight, reference=b).f0) / (2 * t)
        assert abs(df) <= 1e-4 * xs_norm(phi, params.s)


def test_weight_quadrature_positive_part(params, weight, grid_mid):
    u = fb.Field(grid_mid, -np.ones(grid_mid.N))
    assert weight_quadrature(weight, params.q + 1.0, u) == 0.0


def test_exports_roundtrip(tmp_path, params, grid_mid, rng):
    u = _random_field(grid_mid, rng)
    raw = tmp_path / "snap.f64"
    field_to_raw(u, raw)
    v = field_from_raw(raw)
    assert v.grid == u.grid
    assert np.array_equal(v.values, u.values)
    csv = tmp_path / "snap.csv"
    field_to_csv(u, csv)
    header = csv.read_text().splitlines()[0]
    assert header == "x_1,value"


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.45), st.integers(0, 2 ** 31 - 1))
def test_roundtrip_property(s, seed):
    g = fb.Grid(1, 10.0, 64)
    u = fb.Field(g, np.random.default_rng(seed).standard_normal(64))
    back = fb.riesz_potential(fb.frac_laplacian(u, s), s)
    assert np.max(np.abs(back.values - (u.values - u.values.mean()))) < 1e-9
