"""Problem parameters, derived exponents, and compactly supported weights.

All other modules read the derived exponents from ProblemParams instead of
recomputing them, so the algebra lives in exactly one place.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionOrderViolation,
    EmptyWeight,
    ExponentRange,
    SublinearNeedsPositiveWeight,
)


@dataclass(frozen=True)
class ProblemParams:
    """Exponent bookkeeping for (-lap)^s u = eps*h*u_+^q + u_+^p.

    Derived quantities are populated in __post_init__ and cached:
    p = (n+2s)/(n-2s), crit_exp = 2n/(n-2s), dual_exp = 2n/(n+2s),
    gamma_s = (n-2s)(q+1)/2.
    """

    n: int
    s: float
    q: float
    eps: float = 0.0
    p: float = field(init=False)
    crit_exp: float = field(init=False)
    dual_exp: float = field(init=False)
    gamma_s: float = field(init=False)
    supercritical_q: bool = field(init=False)

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ExponentRange(f"n must be 1, 2 or 3, got {self.n}")
        if not 0.0 < self.s < 1.0:
            raise ExponentRange(f"s must lie in (0,1), got {self.s}")
        if self.n <= 4.0 * self.s:
            raise DimensionOrderViolation(
                f"need n > 4s, got n={self.n}, 4s={4.0 * self.s}")
        if self.eps < 0.0:
            raise ExponentRange(f"eps must be >= 0, got {self.eps}")
        n, s = self.n, self.s
        p = (n + 2.0 * s) / (n - 2.0 * s)
        if not 0.0 < self.q < p:
            raise ExponentRange(f"q must lie in (0, p)=(0, {p}), got {self.q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "crit_exp", 2.0 * n / (n - 2.0 * s))
        object.__setattr__(self, "dual_exp", 2.0 * n / (n + 2.0 * s))
        object.__setattr__(self, "gamma_s", (n - 2.0 * s) * (self.q + 1.0) / 2.0)
        object.__setattr__(self, "supercritical_q",
                           self.q > 2.0 * s / (n - 2.0 * s))

    @property
    def q_threshold(self) -> float:
        """Borderline value 2s/(n-2s) separating the two weight regimes."""
        return 2.0 * self.s / (self.n - 2.0 * self.s)


def validate(n: int, s: float, q: float, eps: float = 0.0) -> ProblemParams:
    """Build checked parameters; raises on inadmissible combinations."""
    return ProblemParams(n=n, s=s, q=q, eps=eps)


@dataclass(frozen=True)
class Bump:
    """One polynomial bump a*(1 - |x-c|^2/r^2)^k supported on |x-c| <= r."""

    c: tuple[float, ...]
    r: float
    a: float
    k: int

    def __post_init__(self):
        if self.r <= 0.0:
            raise ExponentRange(f"bump radius must be positive, got {self.r}")
        if self.k < 1:
            raise ExponentRange(f"bump smoothness k must be >= 1, got {self.k}")

    def profile(self, u):
        """Radial profile as a function of the distance u = |x-c|."""
        t = np.asarray(u, dtype=float) / self.r
        return self.a * np.where(np.abs(t) <= 1.0, (1.0 - t * t), 0.0) ** self.k


@dataclass(frozen=True)
class CompactWeight:
    """Finite sum of compactly supported polynomial bumps.

    The support is the union of the closed bump balls, hence compact, and the
    k >= 1 exponent makes each bump (and the sum) continuous.
    """

    bumps: tuple[Bump, ...]

    def __post_init__(self):
        if len(self.bumps) == 0:
            raise EmptyWeight("weight needs at least one bump")
        dims = {len(b.c) for b in self.bumps}
        if len(dims) != 1:
            raise ExponentRange(f"bump centers mix dimensions: {sorted(dims)}")
        if not any(b.a > 0.0 for b in self.bumps):
            raise EmptyWeight("weight needs at least one positive amplitude")

    @property
    def n(self) -> int:
        return len(self.bumps[0].c)

    @property
    def sign_changing(self) -> bool:
        return any(b.a < 0.0 for b in self.bumps)

    def __call__(self, x):
        """Evaluate at points of shape (..., n); exactly zero off the support."""
        x = np.asarray(x, dtype=float)
        if self.n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        out = np.zeros(x.shape[:-1], dtype=float)
        for b in self.bumps:
            d = np.sqrt(np.sum((x - np.asarray(b.c)) ** 2, axis=-1))
            out += b.profile(d)
        return out

    def shifted(self, v: Sequence[float]) -> "CompactWeight":
        """Weight with every bump center translated by v."""
        v = tuple(float(t) for t in v)
        return CompactWeight(tuple(
            Bump(tuple(ci + vi for ci, vi in zip(b.c, v)), b.r, b.a, b.k)
            for b in self.bumps))

    def scaled(self, factor: float) -> "CompactWeight":
        """Weight with every amplitude multiplied by factor."""
        return CompactWeight(tuple(
            Bump(b.c, b.r, b.a * factor, b.k) for b in self.bumps))


def weight_eval(h: CompactWeight, x) -> np.ndarray:
    return h(x)


def weight_support_box(h: CompactWeight):
    """Smallest axis-aligned box containing the union of the bump balls."""
    lo = np.min([[ci - b.r for ci in b.c] for b in h.bumps], axis=0)
    hi = np.max([[ci + b.r for ci in b.c] for b in h.bumps], axis=0)
    return lo, hi


def check_regime(params: ProblemParams, h: CompactWeight) -> None:
    """Reject the sublinear regime with a sign-changing weight.

    For q <= 2s/(n-2s) the construction requires h >= 0.
    """
    if not params.supercritical_q and h.sign_changing:
        raise SublinearNeedsPositiveWeight(
            f"q={params.q} <= {params.q_threshold} requires a nonnegative "
            "weight, but the weight changes sign")
