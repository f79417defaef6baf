"""Executable level-truncation iteration and its parameter bookkeeping.

Given growth data (gamma_i, m_i) the derivation produces the full set of
auxiliary exponents culminating in the superlinear recursion exponent
theta > 1; the iteration then runs the truncation cascade on grid data and
the audit fits the least constant C with U_{k+1} <= C^k U_k^theta along the
computed trace.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import HypothesisViolated, InsufficientLevels
from .field import Field
from .model import ProblemParams

_FLOOR = 1e-290


@dataclass(frozen=True)
class GrowthTerm:
    gamma_i: float
    m_i: Optional[float]      # None encodes a sup-norm bound (m = infinity)
    m_under: float
    theta_i: float
    a_i: float
    xi_i: float
    tau_i: float


@dataclass(frozen=True)
class GrowthSpec:
    crit: float
    terms: tuple[GrowthTerm, ...]
    tau: float
    theta: float


def derive_growth(params: ProblemParams,
                  raw_terms: Sequence[tuple[float, Optional[float]]],
                  a_override: Optional[Sequence[float]] = None) -> GrowthSpec:
    """Derive all iteration exponents, checking every inequality by name.

    Each raw term is (gamma_i, m_i) with m_i = None for a bounded coefficient.
    a_i defaults to the upper endpoint min{1, 1/gamma_i} of its admissible
    interval; a_override supplies custom values inside the interval.
    """
    crit = params.crit_exp
    terms = []
    for idx, (gam, m) in enumerate(raw_terms):
        if not 0.0 <= gam < crit - 1.0:
            raise HypothesisViolated(
                f"term {idx}: growth exponent {gam} outside [0, {crit - 1.0})")
        m_under = crit / (crit - 2.0) if gam <= 1.0 \
            else crit / (crit - 1.0 - gam)
        inv_m = 0.0 if m is None else 1.0 / m
        if m is not None and m <= m_under:
            raise HypothesisViolated(
                f"term {idx}: integrability order {m} <= floor {m_under}")
        theta_i = inv_m + (2.0 - crit + gam) / crit
        che = (gam / crit) * min(1.0, 1.0 / gam) if gam > 0.0 else 0.0
        if not theta_i < che:
            raise HypothesisViolated(
                f"term {idx}: theta_i = {theta_i} not below {che}")
        a_lo = max(0.0, crit * theta_i / gam) if gam > 0.0 else 0.0
        a_hi = min(1.0, 1.0 / gam) if gam > 0.0 else 1.0
        a = a_hi if a_override is None else float(a_override[idx])
        if not a_lo < a <= a_hi:
            raise HypothesisViolated(
                f"term {idx}: a = {a} outside ({a_lo}, {a_hi}]")
        if not (0.0 <= a <= 1.0 and a * gam <= 1.0):
            raise HypothesisViolated(f"term {idx}: a*gamma = {a * gam} > 1")
        if not a * gam / crit > theta_i:
            raise HypothesisViolated(
                f"term {idx}: a*gamma/crit = {a * gam / crit} <= theta_i")
        xi_i = 1.0 - (1.0 + gam) / crit - inv_m
        if not 0.0 < xi_i < 1.0:
            raise HypothesisViolated(f"term {idx}: xi_i = {xi_i} outside (0,1)")
        tau_i = (1.0 + a * gam) / crit + xi_i
        if not tau_i > 2.0 / crit:
            raise HypothesisViolated(f"term {idx}: tau_i = {tau_i} <= 2/crit")
        terms.append(GrowthTerm(gamma_i=gam, m_i=m, m_under=m_under,
                                theta_i=theta_i, a_i=a, xi_i=xi_i,
                                tau_i=tau_i))
    tau = min(t.tau_i for t in terms)
    theta = crit * tau / 2.0
    if not theta > 1.0:
        raise HypothesisViolated(f"theta = {theta} <= 1")
    return GrowthSpec(crit=crit, terms=tuple(terms), tau=tau, theta=theta)


@dataclass(frozen=True)
class IterationTrace:
    delta: float
    levels: tuple[float, ...]
    U: tuple[float, ...]
    support_measure: tuple[float, ...]
    converged: bool


def run_iteration(u: Field, spec: GrowthSpec, delta: float,
                  kmax: int = 40) -> IterationTrace:
    """Truncation cascade phi -> w_k = (phi - A_k)_+ with A_k = 1 - 2^{-k}.

    phi is the input scaled by delta/||u||_crit.  Non-convergence is data,
    not an error.
    """
    g = u.grid
    crit = spec.crit
    unorm = g.integrate(np.abs(u.values) ** crit) ** (1.0 / crit)
    if unorm <= 0.0:
        raise ValueError("input field vanishes identically")
    phi = delta * u.values / unorm
    levels, Us, meas = [], [], []
    for k in range(kmax + 1):
        Ak = 1.0 - 2.0 ** (-k)
        wk = np.maximum(phi - Ak, 0.0)
        levels.append(Ak)
        Us.append(g.integrate(wk ** crit))
        meas.append(float(np.count_nonzero(wk > 0.0)) * g.cell)
    return IterationTrace(delta=float(delta), levels=tuple(levels),
                          U=tuple(Us), support_measure=tuple(meas),
                          converged=bool(Us[-1] <= 1e-12))


@dataclass(frozen=True)
class AuditReport:
    C: float
    theta: float
    max_residual: float
    n_pairs: int
    trivial: bool
    passed: bool


def recursion_audit(trace: IterationTrace, spec: GrowthSpec,
                    min_pairs: int = 5) -> AuditReport:
    """Least-squares fit of log U_{k+1} = k log C + theta log U_k.

    theta is fixed from the spec; only C is fitted.  Traces that collapse to
    zero before producing min_pairs usable levels satisfy the recursion
    vacuously and pass as trivial.
    """
    U = np.asarray(trace.U)
    pairs = [(k, U[k], U[k + 1]) for k in range(len(U) - 1)
             if U[k] > _FLOOR and U[k + 1] > _FLOOR]
    if len(pairs) < min_pairs:
        if trace.converged:
            C = _fit_C(pairs, spec.theta) if pairs else float("nan")
            return AuditReport(C=C, theta=spec.theta, max_residual=0.0,
                               n_pairs=len(pairs), trivial=True, passed=True)
        raise InsufficientLevels(
            f"only {len(pairs)} nonzero level pairs and the trace "
            "did not converge")
    C = _fit_C(pairs, spec.theta)
    logC = np.log(C)
    resid = [abs(np.log(u1) - spec.theta * np.log(u0) - k * logC)
             for k, u0, u1 in pairs]
    max_resid = float(np.max(resid))
    return AuditReport(C=C, theta=spec.theta, max_residual=max_resid,
                       n_pairs=len(pairs), trivial=False,
                       passed=max_resid <= 0.1)


def _fit_C(pairs, theta: float) -> float:
    num = sum(k * (np.log(u1) - theta * np.log(u0)) for k, u0, u1 in pairs)
    den = sum(k * k for k, _, _ in pairs)
    if den == 0:
        # single k=0 pair determines nothing; report the implied bound
        k, u0, u1 = pairs[0]
        return float(np.exp(max(np.log(u1) - theta * np.log(u0), 0.0)))
    return float(np.exp(num / den))


def level_set_chain_ok(u: Field, spec: GrowthSpec, delta: float,
                       kmax: int = 20) -> bool:
    """Pointwise containment {w_{k+1} > 0} inside {w_k > 2^{-(k+1)}}."""
    g = u.grid
    crit = spec.crit
    unorm = g.integrate(np.abs(u.values) ** crit) ** (1.0 / crit)
    phi = delta * u.values / unorm
    for k in range(kmax):
        wk = np.maximum(phi - (1.0 - 2.0 ** (-k)), 0.0)
        wk1 = np.maximum(phi - (1.0 - 2.0 ** (-(k + 1))), 0.0)
        if not np.all(wk[wk1 > 0.0] > 2.0 ** (-(k + 1))):
            return False
        if not np.all(wk1 <= wk):
            return False
        on = wk1 > 0.0
        if not np.all((phi[on] > 0.0) & (phi[on] < 2.0 ** (k + 1) * wk[on])):
            return False
    return True
