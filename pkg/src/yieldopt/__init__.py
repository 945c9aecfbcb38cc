"""yieldopt: threshold-based online allocation across contracts and an ad exchange.

Library layout:

* :mod:`yieldopt.dist`: discrete exchange reward distributions
* :mod:`yieldopt.policy`: threshold computation (closed form, DP, objectives)
* :mod:`yieldopt.engine`: the online serving engine
* :mod:`yieldopt.instances`: instance model, adversarial generator, supply factor
* :mod:`yieldopt.oracle`: offline/online ground-truth computations
* :mod:`yieldopt.ratio`: competitive ratios and worst fixed-mean distributions
* :mod:`yieldopt.matching`: surplus-supply online matching (perturbed greedy)
* :mod:`yieldopt.repro`: named end-to-end verification experiments
* :mod:`yieldopt.cli`: the ``yieldopt`` command
"""

from .dist import (
    RewardDistribution,
    cond_mean_below,
    normalize,
    sample,
    sample_array,
    top_quantile_mean,
    validate,
)
from .engine import (
    AllocationState,
    Decision,
    RunReport,
    finalize,
    run_instance,
    run_rewards,
    serve_query,
    serve_query_multi_exchange,
)
from .errors import (
    DomainError,
    InfeasibleDecay,
    MalformedBidSet,
    MalformedDistribution,
    NonIntegralGroupSize,
    RewardExceedsPenalty,
    SizeLimit,
    TooManyThresholds,
    UndefinedRatio,
    YieldOptError,
)
from .instances import Instance, complete_instance, gen_upper_triangular, supply_factor
from .matching import (
    MatchingInstance,
    empirical_ratio,
    guarantee,
    perturbed_greedy,
    triangular_matching_instance,
)
from .oracle import (
    RealizedInstance,
    adversary_lp_tight,
    exhaustive_values,
    lp_residuals,
    offline_opt_exact,
    offline_opt_formula,
    online_opt_bruteforce,
    sample_realized,
)
from .policy import (
    AdversaryProfile,
    ThresholdPolicy,
    beta_closed_form,
    binary_threshold,
    lb_discrete,
    make_policy,
    optimize_thresholds_dp,
    optimize_thresholds_grid,
    ub_continuous,
)
from .ratio import (
    RatioReport,
    WorstCaseSpec,
    best_achievable_reward,
    binary_alg_bound,
    binary_opt,
    binary_ratio,
    worst_case_distribution,
)

__version__ = "0.1.0"
