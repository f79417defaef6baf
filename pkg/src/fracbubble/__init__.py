"""Desk-scale continuation machinery for the perturbed critical profile
equation with a compactly supported weight."""

from .model import Bump, CompactWeight, ProblemParams, validate
from .field import (
    EnergyReport,
    FarField,
    Field,
    Grid,
    SourceTail,
    energy,
    frac_laplacian,
    hs_inner,
    norms,
    riesz_potential,
    xs_norm,
)
from .bubble import (
    BubblePoint,
    alpha_ns,
    bubble_eval,
    bubble_moment,
    bubble_moment_closed,
    gram_constants,
    tangent_eval,
)
from .landscape import (
    CriticalPoint,
    GammaSample,
    SlabSpec,
    build_slab,
    find_critical_points,
    gamma,
    small_mu_limit,
    tail_rates,
)
from .reduction import (
    AuxiliaryProblem,
    BorderedOp,
    LinearizedOp,
    ReductionState,
    construct_solution,
    kernel_certificate,
    multiplier_matrix,
    solve_auxiliary,
    solve_bordered,
)
from .regularity import (
    GrowthSpec,
    IterationTrace,
    derive_growth,
    recursion_audit,
    run_iteration,
)

__version__ = "0.1.0"
