"""Budget pacing across simultaneous position auctions.

Core pieces: single-round auction clearing (GFP/GSP/VCG), expected
allocation/payment curves with best-response search, an offline dual solver
for the per-round optimum, online pacing strategies, and an experiment
harness with a CLI front end.
"""

__version__ = "0.1.0"

from .auctions import AuctionFormat, AuctionOutcome, AuctionSpec, clear_auction
from .distributions import (
    EmpiricalCdf,
    PointMass,
    TruncatedLognormal,
    UniformBids,
    ValueModel,
    dkw_epsilon,
    load_bid_samples,
)
from .errors import (
    ConfigError,
    LoadError,
    PacesimError,
    SolverError,
    StructuralError,
    ValidationError,
)
from .harness import (
    CSV_HEADER,
    AggregateResult,
    ExperimentConfig,
    RegretSeries,
    Strategy,
    offline_benchmark,
    run_experiment,
    run_single,
    simulate_run,
    write_outputs,
)
from .offline import (
    AuctionSetting,
    DualSolution,
    OfflineProblem,
    dual_derivative,
    dual_value,
    hindsight_benchmark,
    solve_mu_star,
)
from .pacing import (
    BestResponseCache,
    PacingConfig,
    PacingState,
    RoundFeedback,
    avp_bid,
    avp_update,
    baseline_bid,
    initial_state,
)
from .response import BestResponseMap, ExpectedResponse, estimated_best_response

__all__ = [
    "CSV_HEADER",
    "AggregateResult",
    "AuctionFormat",
    "AuctionOutcome",
    "AuctionSetting",
    "AuctionSpec",
    "BestResponseCache",
    "BestResponseMap",
    "ConfigError",
    "DualSolution",
    "EmpiricalCdf",
    "ExpectedResponse",
    "ExperimentConfig",
    "LoadError",
    "OfflineProblem",
    "PacesimError",
    "PacingConfig",
    "PacingState",
    "PointMass",
    "RegretSeries",
    "RoundFeedback",
    "SolverError",
    "Strategy",
    "StructuralError",
    "TruncatedLognormal",
    "UniformBids",
    "ValidationError",
    "ValueModel",
    "avp_bid",
    "avp_update",
    "baseline_bid",
    "clear_auction",
    "dkw_epsilon",
    "dual_derivative",
    "dual_value",
    "estimated_best_response",
    "hindsight_benchmark",
    "initial_state",
    "load_bid_samples",
    "offline_benchmark",
    "run_experiment",
    "run_single",
    "simulate_run",
    "solve_mu_star",
    "write_outputs",
]
