"""Monte Carlo goodness-of-fit tests for planar point patterns.

Functional summaries (classical and topological), deviation and depth based
test statistics, exact Monte Carlo and two-stage tests, and global envelopes.
"""

from .classical import (
    estimate_F,
    estimate_G,
    estimate_G_star,
    estimate_J,
    estimate_K,
    estimate_L,
    estimate_pcf,
)
from .errors import ConfigError, NumericError, PointGofError
from .orderings import continuous_ranks, depth, depths_all, order_scalars, pointwise_ranks, rank_matrix
from .pattern import EvalGrid, PointPattern, SummaryCurve, Window, default_grid, new_pattern, unit_square
from .procedures import (
    Envelope,
    TestConfig,
    TestReport,
    analytic_envelope,
    bits_test,
    combine_one_step,
    combine_two_step,
    global_envelope,
    mad_family_envelope,
    monte_carlo_test,
    run_test,
    simulation_pointwise_envelope,
)
from .simulate import (
    SSI,
    Binomial,
    InhomPoisson,
    MaternCluster,
    Poisson,
    RngSeed,
    Strauss,
    Thomas,
    condition_on_count,
    simulate,
    simulate_many,
)
from .statistics import (
    CurveMatrix,
    StatValue,
    crps_statistic,
    deviation_statistic,
    functional_statistic,
    integral_statistic,
    point_statistic,
    pointwise_score,
    reference_mean,
)
from .tda import alpha_filtration, apf, betti_curve, euler_curve, nd0, persistence, rank_function

__version__ = "0.1.0"
