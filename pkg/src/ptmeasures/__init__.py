"""Poisson-type random counting measures.

Stone-throwing construction of random measures from a counting law and a
spatial law, exact thinning maps for the three families closed under
restriction (Poisson, binomial, negative binomial), numeric verification
and refutation of the closure functional equation for power-series
families, and three worked models: compound store spend, SIR epidemic
labels, and particle traffic flows.
"""

from .counting import (
    Binomial,
    CountingLaw,
    Deterministic,
    NegativeBinomial,
    NnpsFamily,
    NnpsLaw,
    Poisson,
    pt_from_moments,
)
from .spatial import (
    Box,
    DensityTable,
    Discrete,
    IntervalUnion,
    ProductLaw,
    SpatialLaw,
    UniformInterval,
)
from .stc import (
    CEMETERY,
    MarkKernel,
    MeasureSpec,
    PointPattern,
    integrate,
    joint_pmf,
    laplace_analytic,
    laplace_mc,
    moments_analytic,
    pair_covariance_analytic,
    partition_counts,
    restrict,
    sample_pattern,
)
from .bone import BoneClass, BoneVerdict, atomic_counterexample, bone_residual, cauchy_classify, nnps_bone_test
from .sir import SirParams, SirTrajectory, final_size, infection_density, label_count_pmf, label_probabilities, recovery_kernel, simulate_labels, solve_sir
from .compound import PiecewiseStateProbs, StoreModel, decompose_total, simulate_store, z_covariance, z_moments
from .traffic import (
    BrownianMotion,
    CircularOrbit,
    RandomWaypoint,
    Snapshot,
    TrafficConfig,
    UniformWindow,
    covariance_sign_experiment,
    mean_measure,
    region_counts_bulk,
    restrict_traffic,
    simulate_snapshot,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
