"""Binary freshness in source -> cache(s) -> user(s) update networks."""

__version__ = "0.1.0"

from .analytics import (  # noqa: E402
    alt_single_hop_freshness,
    chain_freshness,
    multi_user_freshness,
    single_hop_freshness,
    two_hop_user_freshness,
)
from .model import (  # noqa: E402
    FreshnessReport,
    Node,
    RateAllocation,
    SolveTrace,
    SourceProfile,
    Topology,
    ValidationError,
    freshness_report,
    total_objective,
    validate,
)
from .optimizer import (  # noqa: E402
    InnerProblem,
    OptimizerSettings,
    alternating_maximize,
    baseline_allocation,
    build_sigma,
    kkt_residuals,
    threshold_inner_solve,
)
from .simulator import BACKEND, SimConfig, SimEstimate, simulate_file, simulate_system  # noqa: E402
