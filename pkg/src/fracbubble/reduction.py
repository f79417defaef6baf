"""Discretized reduction machinery around one bubble.

The auxiliary system is solved in defect-corrected form: the grid image of
the unperturbed profile equation is subtracted once, so the zero-perturbation
solve returns the zero correction exactly and the computed correction
measures the response to the perturbation rather than the grid floor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, lgmres

from .bubble import BubblePoint, GramReport, gram_constants
from .errors import (
    BorderedSolveStalled,
    NewtonDiverged,
    NotRequestedKind,
    PositivityLost,
)
from .field import (
    Field,
    Grid,
    SourceTail,
    frac_laplacian,
    hs_inner,
    riesz_potential,
    weight_quadrature,
    xs_norm,
)
from .landscape import SlabSpec, build_slab, find_critical_points, gamma
from .model import CompactWeight, ProblemParams


class TangentTails:
    """Analytic far-tail coefficients carried by the tangent components.

    Inputs of the reduction operators look like (coefficient field) * v.  The
    slow |x|^{-(n+2s)}-type tails of such products sit in the tangent
    directions; projecting v onto the frame with the seminorm inner product
    is a bounded linear functional, so attaching the projections' analytic
    tail coefficients keeps the operator linear while making it exact on the
    frame itself.
    """

    def __init__(self, b: BubblePoint, grid: Grid, qs: list[Field]):
        n, p = b.params.n, b.params.p
        self.b, self.grid, self.qs = b, grid, qs
        self.s = b.params.s
        # normalize with the grid's own inner products so the frame itself
        # projects to exactly one
        self.lam = np.array([hs_inner(qi, qi, self.s) for qi in qs])
        A = b.far_mono()
        m = (n - 2.0 * b.params.s) / 2.0
        Aq = m * b.alpha * b.mu ** (m - 1.0)
        self.even_coef = A ** (p - 1.0) * Aq       # dilation component
        self.dip_coef = (n - 2.0 * b.params.s) * A ** p  # center components

    def source(self, v: np.ndarray) -> SourceTail:
        n = self.b.params.n
        t = [hs_inner(Field(self.grid, v), qi, self.s) / li
             for qi, li in zip(self.qs, self.lam)]
        dip = tuple(self.dip_coef * t[j] for j in range(n))
        return SourceTail(center=self.b.xi, coef=self.even_coef * t[n],
                          dip=dip)


class LinearizedOp:
    """w -> w - p*J(z^{p-1} w), the derivative of the fixed-point map at the
    bubble with no perturbation."""

    def __init__(self, b: BubblePoint, grid: Grid):
        self.b = b
        self.grid = grid
        self.params = b.params
        self.z = b.sample(grid)
        self.zp1 = self.z.values ** (b.params.p - 1.0)
        self.qs = [b.sample_tangent(grid, j)
                   for j in range(1, b.params.n + 2)]
        self.tails = TangentTails(b, grid, self.qs)

    def apply(self, v: np.ndarray) -> np.ndarray:
        psi = Field(self.grid, self.zp1 * v)
        pot = riesz_potential(psi, self.params.s, src=self.tails.source(v))
        return v - self.params.p * pot.values


def apply_T(op: LinearizedOp, v: Field) -> Field:
    return Field(op.grid, op.apply(v.values))


class BorderedOp:
    """(v, beta) -> (T v - sum beta_i q_i, <v, q_1>, ..., <v, q_{n+1}>)."""

    def __init__(self, lin: LinearizedOp):
        self.lin = lin
        self.qs = lin.qs
        self.nq = lin.b.params.n + 1
        self.size = lin.grid.N ** lin.grid.n + self.nq

    def apply(self, v: np.ndarray, beta: np.ndarray):
        out = self.lin.apply(v)
        for bi, qi in zip(beta, self.qs):
            out = out - bi * qi.values
        rows = np.array([hs_inner(Field(self.lin.grid, v), qi,
                                  self.lin.params.s) for qi in self.qs])
        return out, rows

    def as_operator(self) -> LinearOperator:
        g = self.lin.grid
        m = g.N ** g.n

        def mv(x):
            v, beta = x[:m].reshape((g.N,) * g.n), x[m:]
            out, rows = self.apply(v, beta)
            return np.concatenate([out.ravel(), rows])
        return LinearOperator((self.size, self.size), matvec=mv)


def solve_bordered(op: BorderedOp, rhs_field: Field, rhs_vec: np.ndarray,
                   rtol: float = 1e-12) -> tuple[Field, np.ndarray]:
    """Krylov solve of the bordered system; raises on stagnation."""
    g = op.lin.grid
    m = g.N ** g.n
    rhs = np.concatenate([rhs_field.values.ravel(), rhs_vec])
    scale = float(np.max(np.abs(rhs)))
    if scale == 0.0:
        return Field(g, np.zeros((g.N,) * g.n)), np.zeros(op.nq)
    A = op.as_operator()
    sol, info = lgmres(A, rhs, rtol=rtol, atol=1e-14 * scale, maxiter=400)
    resid = float(np.max(np.abs(A.matvec(sol) - rhs)))
    if info != 0 or resid > 1e-9 * scale:
        raise BorderedSolveStalled(
            f"residual {resid:.2e} vs scale {scale:.2e} (info={info})")
    return Field(g, sol[:m].reshape((g.N,) * g.n)), sol[m:]


def condition_estimate(op: BorderedOp, probes: int = 4, seed: int = 0) -> float:
    """Rough condition number from random norm growth and inverse solves."""
    rng = np.random.default_rng(seed)
    g = op.lin.grid
    m = g.N ** g.n
    A = op.as_operator()
    hi = 0.0
    lo = np.inf
    for _ in range(probes):
        x = rng.standard_normal(op.size)
        x /= np.linalg.norm(x)
        hi = max(hi, float(np.linalg.norm(A.matvec(x))))
        f, v = solve_bordered(op, Field(g, x[:m].reshape((g.N,) * g.n)), x[m:])
        lo = min(lo, 1.0 / max(float(np.linalg.norm(
            np.concatenate([f.values.ravel(), v]))), 1e-300))
    return hi / lo


@dataclass
class ReductionState:
    w: Field
    alpha: np.ndarray
    residual_norm: float
    newton_iters: int
    trace: tuple[dict, ...]


class AuxiliaryProblem:
    """Holds the grid data for the defect-corrected auxiliary system."""

    def __init__(self, b: BubblePoint, h: CompactWeight,
                 params: ProblemParams, grid: Grid):
        self.b, self.h, self.params, self.grid = b, h, params, grid
        self.z = b.sample(grid)
        self.qs = [b.sample_tangent(grid, j) for j in range(1, params.n + 2)]
        self.tails = TangentTails(b, grid, self.qs)
        self.hx = h(grid.points()).reshape((grid.N,) * grid.n)
        self.z_tail = b.far_mono() ** params.p
        self.defect = self.z.values - riesz_potential(
            Field(grid, self.z.values ** params.p), params.s,
            src=SourceTail(center=b.xi, coef=self.z_tail)).values
        # positivity floor: least bubble height on the weight support
        on = self.hx != 0.0
        self.pos_floor = float(np.min(self.z.values[on])) if np.any(on) \
            else float(np.min(self.z.values))

    def nonlinearity(self, u: np.ndarray, eps: float) -> np.ndarray:
        up = np.maximum(u, 0.0)
        out = up ** self.params.p
        if eps != 0.0:
            q = self.params.q
            safe = np.maximum(u, 1e-300)
            out = out + eps * self.hx * np.where(self.hx != 0.0,
                                                 safe ** q, 0.0)
        return out

    def check_positivity(self, u: np.ndarray) -> None:
        if self.params.q >= 1.0:
            return
        on = self.hx != 0.0
        if np.any(on) and float(np.min(u[on])) <= self.pos_floor / 2.0:
            raise PositivityLost(
                "corrected profile at or below half the bubble floor on "
                "the weight support")

    def residual(self, w: np.ndarray, alpha: np.ndarray, eps: float):
        u = self.z.values + w
        self.check_positivity(u)
        src_w = self.tails.source(u - self.z.values)
        pot = riesz_potential(
            Field(self.grid, self.nonlinearity(u, eps)), self.params.s,
            src=SourceTail(center=self.b.xi,
                           coef=self.z_tail + src_w.coef,
                           dip=src_w.dip)).values
        H1 = u - pot - self.defect
        for ai, qi in zip(alpha, self.qs):
            H1 = H1 - ai * qi.values
        H2 = np.array([hs_inner(Field(self.grid, w), qi, self.params.s)
                       for qi in self.qs])
        return H1, H2

    def jacobian_factor(self, u: np.ndarray, eps: float) -> np.ndarray:
        p, q = self.params.p, self.params.q
        up = np.maximum(u, 0.0)
        out = p * np.where(up > 0.0, up ** (p - 1.0), 0.0)
        if eps != 0.0:
            safe = np.maximum(u, 1e-300)
            out = out + q * eps * self.hx * np.where(
                self.hx != 0.0, safe ** (q - 1.0), 0.0)
        return out


def solve_auxiliary(b: BubblePoint, eps: float, h: CompactWeight,
                    params: ProblemParams, grid: Grid,
                    tol: float = 1e-10, max_iter: int = 50,
                    problem: Optional[AuxiliaryProblem] = None) -> ReductionState:
    """Newton iteration on the orthogonally-constrained corrected system."""
    prob = problem if problem is not None else AuxiliaryProblem(
        b, h, params, grid)
    g = grid
    m = g.N ** g.n
    nq = params.n + 1
    w = np.zeros((g.N,) * g.n)
    alpha = np.zeros(nq)
    trace = []
    resid = np.inf
    for it in range(max_iter + 1):
        H1, H2 = prob.residual(w, alpha, eps)
        resid = float(np.max(np.abs(H1)) + np.max(np.abs(H2)))
        trace.append({"iter": it, "residual": resid,
                      "sup_w": float(np.max(np.abs(w))),
                      "alpha": tuple(map(float, alpha))})
        if resid <= tol:
            return ReductionState(w=Field(g, w), alpha=alpha,
                                  residual_norm=resid, newton_iters=it,
                                  trace=tuple(trace))
        if it == max_iter:
            break
        factor = prob.jacobian_factor(prob.z.values + w, eps)

        def mv(x):
            v, beta = x[:m].reshape((g.N,) * g.n), x[m:]
            pot = riesz_potential(Field(g, factor * v), params.s,
                                  src=prob.tails.source(v))
            out = v - pot.values
            for bi, qi in zip(beta, prob.qs):
                out = out - bi * qi.values
            rows = np.array([hs_inner(Field(g, v), qi, params.s)
                             for qi in prob.qs])
            return np.concatenate([out.ravel(), rows])
        A = LinearOperator((m + nq, m + nq), matvec=mv)
        rhs = np.concatenate([-H1.ravel(), -H2])
        scale = float(np.max(np.abs(rhs)))
        sol, info = lgmres(A, rhs, rtol=1e-12, atol=1e-14 * scale,
                           maxiter=400)
        if info != 0:
            raise BorderedSolveStalled(f"inner solve stalled at step {it}")
        w = w + sol[:m].reshape((g.N,) * g.n)
        alpha = alpha + sol[m:]
    raise NewtonDiverged(
        f"residual {resid:.3e} after {max_iter} iterations at eps={eps}")


@dataclass(frozen=True)
class MultiplierReport:
    lam: tuple[float, ...]
    B: np.ndarray
    B_norm: float
    det: float
    det_diag: float


def multiplier_matrix(b: BubblePoint, eps: float, h: CompactWeight,
                      params: ProblemParams, grid: Grid,
                      step_rel: float = 1e-4,
                      gram: Optional[GramReport] = None) -> MultiplierReport:
    """Bordering matrix diag(lam) + B with b_ij = <q_i, dw/dparam_j>.

    Parameter derivatives of the correction come from central differences of
    re-solves at shifted manifold points.
    """
    n = params.n
    gram = gram if gram is not None else gram_constants(b)
    base_qs = [b.sample_tangent(grid, j) for j in range(1, n + 2)]
    step = step_rel * b.mu
    cols = []
    for j in range(n + 1):
        shifts = []
        for sgn in (+1.0, -1.0):
            if j < n:
                xi = list(b.xi)
                xi[j] += sgn * step
                bp = BubblePoint(params, b.mu, tuple(xi), b.alpha)
            else:
                bp = BubblePoint(params, b.mu + sgn * step, b.xi, b.alpha)
            st = solve_auxiliary(bp, eps, h, params, grid)
            shifts.append(st.w.values)
        dw = Field(grid, (shifts[0] - shifts[1]) / (2.0 * step))
        cols.append([hs_inner(qi, dw, params.s) for qi in base_qs])
    B = np.array(cols).T  # b_ij = <q_i, dw/dparam_j>
    lam = np.asarray(gram.lam)
    M = np.diag(lam) + B
    return MultiplierReport(lam=tuple(map(float, lam)), B=B,
                            B_norm=float(np.linalg.norm(B, 2)),
                            det=float(np.linalg.det(M)),
                            det_diag=float(np.prod(lam)))


@dataclass
class SolutionReport:
    kind: str
    eps: float
    mu: float
    xi: tuple[float, ...]
    u: Field
    state: ReductionState
    residual_sup: float
    residual_dual: float
    residual_floor: float
    positivity_min: float
    energy_error: float


def equation_residual(b: BubblePoint, w: Field, eps: float,
                      prob: AuxiliaryProblem) -> tuple[float, float]:
    """Sup and dual-exponent norms of the full equation residual on the
    trusted region, with the correction's far monopole estimated from an
    annulus of samples."""
    g, params = prob.grid, prob.params
    u = prob.z.values + w.values
    rhs = prob.nonlinearity(u, eps)
    lhs = frac_laplacian(prob.z, params.s, far=b.far_field()).values
    r = g.radius(b.xi)
    ring = (r >= 0.55 * g.L) & (r <= 0.75 * g.L)
    wA = float(np.mean(w.values[ring] * r[ring] ** (params.n - 2 * params.s)))
    from .field import FarField
    lhs = lhs + frac_laplacian(w, params.s,
                               far=FarField(center=b.xi, mono=wA)).values
    resid = lhs - rhs
    mask = r <= g.L / 2.0
    sup = float(np.max(np.abs(resid[mask])))
    beta = params.dual_exp
    dual = float((np.sum(np.abs(resid[mask]) ** beta) * g.cell) ** (1.0 / beta))
    return sup, dual


def energy_expansion_error(b: BubblePoint, w: Field, eps: float,
                           prob: AuxiliaryProblem,
                           gamma_value: float) -> float:
    """|f_eps(z + w) - f_0(z) + eps*Gamma| from grid-native differences.

    The shared constant f_0 of the unperturbed profile cancels in the
    difference, so only the correction-dependent parts are quadrature.
    """
    g, params = prob.grid, prob.params
    fz = frac_laplacian(prob.z, params.s, far=b.far_field()).values
    dQ = g.integrate(fz * w.values) + 0.5 * hs_inner(w, w, params.s)
    u = prob.z.values + w.values
    dP = g.integrate(np.maximum(u, 0.0) ** (params.p + 1.0)
                     - prob.z.values ** (params.p + 1.0)) / (params.p + 1.0)
    Gval = weight_quadrature(prob.h, params.q + 1.0,
                             Field(g, u)) / (params.q + 1.0)
    return float(abs(dQ - dP - eps * Gval + eps * gamma_value))


def construct_solution(kind: str, eps: float, h: CompactWeight,
                       params: ProblemParams, grid: Grid,
                       slab: Optional[SlabSpec] = None,
                       points=None) -> SolutionReport:
    """Assemble bubble + correction at the selected critical point."""
    if slab is None and points is None:
        slab = build_slab(h, params)
    if points is None:
        points = find_critical_points(h, params, slab)
    matching = [c for c in points if c.kind == kind]
    if not matching:
        raise NotRequestedKind(f"no critical point of kind '{kind}'")
    cp = matching[0]
    b = BubblePoint.at(params, cp.mu, cp.xi)
    prob = AuxiliaryProblem(b, h, params, grid)
    state = solve_auxiliary(b, eps, h, params, grid, problem=prob)
    u = Field(grid, prob.z.values + state.w.values)
    sup, dual = equation_residual(b, state.w, eps, prob)
    zero_state = solve_auxiliary(b, 0.0, h, params, grid, problem=prob)
    floor_sup, _ = equation_residual(b, zero_state.w, 0.0, prob)
    mask = grid.radius(b.xi) <= grid.L / 2.0
    gam = gamma(cp.mu, cp.xi, h, params, want_grad=False).gamma
    en_err = energy_expansion_error(b, state.w, eps, prob, gam)
    return SolutionReport(
        kind=kind, eps=eps, mu=cp.mu, xi=cp.xi, u=u, state=state,
        residual_sup=sup, residual_dual=dual, residual_floor=floor_sup,
        positivity_min=float(np.min(u.values[mask])),
        energy_error=en_err)


def kernel_certificate(b: BubblePoint, grid: Grid,
                       count: int = 6) -> np.ndarray:
    """Smallest singular values of the dense discretized linearized map.

    The near-kernel must have dimension n+1; the gap between the (n+1)-th
    and (n+2)-th smallest singular values certifies it.
    """
    from scipy.linalg import svdvals
    lin = LinearizedOp(b, grid)
    m = grid.N ** grid.n
    if m > 4096:
        raise ValueError("dense certificate limited to 4096 unknowns")
    cols = np.empty((m, m))
    e = np.zeros((grid.N,) * grid.n)
    flat = e.ravel()
    for i in range(m):
        flat[i] = 1.0
        cols[:, i] = lin.apply(e).ravel()
        flat[i] = 0.0
    sv = svdvals(cols)
    return np.sort(sv)[:count]
