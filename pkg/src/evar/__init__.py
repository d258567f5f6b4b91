"""Growth-rate optimal e-variables under privacy, quantization, boundedness
and convex integral constraints, for simple and composite hypotheses."""

from .composite import (
    CompositeEVariable,
    CompositeProblem,
    CompositeReport,
    LFDPair,
    LiftError,
    lift,
    mlr_boundary_lfd,
    mlr_problem,
    validate_composite,
)
from .constraints import (
    ClippedEVariable,
    ConvexConstrainedEVariable,
    ConvexPenalty,
    InfeasibleError,
    TwoLevelEVariable,
    get_penalty,
    growth_rate,
    solve_bounded,
    solve_convex,
    solve_moment,
    solve_quantized,
)
from .counterexample import (
    CounterexampleConfig,
    CounterexampleVerdict,
    verify_counterexample,
)
from .dist import (
    AbsoluteContinuityError,
    Distribution,
    GrowthReport,
    HypothesisPair,
    IntegrationError,
    Quadrature,
    bernoulli_kl,
    expectation,
    kl_divergence,
    likelihood_ratio,
)
from .ldp import (
    BinaryMechanism,
    DominanceError,
    PrivacyBudget,
    PrivateEVariable,
    SolverError,
    ThresholdSolution,
    composite_ldp,
    kairouz_mechanism,
    kelly_fraction,
    private_evariable,
    randomized_postprocess,
    simulate_ldp_kelly,
    solve_binary_threshold,
)

from .estimators import (
    ClippedEVariableEstimator,
    ConvexEVariableEstimator,
    PrivateEVariableEstimator,
    QuantizedEVariableEstimator,
)

__version__ = "0.1.0"

__all__ = [
    "AbsoluteContinuityError",
    "BinaryMechanism",
    "ClippedEVariable",
    "ClippedEVariableEstimator",
    "CompositeEVariable",
    "CompositeProblem",
    "CompositeReport",
    "ConvexConstrainedEVariable",
    "ConvexEVariableEstimator",
    "ConvexPenalty",
    "CounterexampleConfig",
    "CounterexampleVerdict",
    "Distribution",
    "DominanceError",
    "GrowthReport",
    "HypothesisPair",
    "InfeasibleError",
    "IntegrationError",
    "LFDPair",
    "LiftError",
    "PrivacyBudget",
    "PrivateEVariable",
    "PrivateEVariableEstimator",
    "Quadrature",
    "QuantizedEVariableEstimator",
    "SolverError",
    "ThresholdSolution",
    "TwoLevelEVariable",
    "bernoulli_kl",
    "composite_ldp",
    "expectation",
    "get_penalty",
    "growth_rate",
    "kairouz_mechanism",
    "kelly_fraction",
    "kl_divergence",
    "lift",
    "likelihood_ratio",
    "mlr_boundary_lfd",
    "mlr_problem",
    "private_evariable",
    "randomized_postprocess",
    "simulate_ldp_kelly",
    "solve_binary_threshold",
    "solve_bounded",
    "solve_convex",
    "solve_moment",
    "solve_quantized",
    "validate_composite",
    "verify_counterexample",
]
