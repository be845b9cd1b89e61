from .channel import (
    ChannelModel, FadingDistribution, dbw_to_watt, exponential_gain, failure_prob,
    get_distribution, quantize_channel, quantize_with_thresholds, watt_to_dbw,
)
from .cmdp import (
    Action, CMDPArrays, ConfigError, MixedPolicy, Policy, SlotCost, State, SystemConfig,
    build_state_space, lagrangian_reward, slot_cost, transitions,
)
from .analysis import (
    InducedChain, Metrics, average_metrics, evaluate_mixed, evaluate_policy, induced_chain,
    mix_metrics, steady_state,
)
from .solver import (
    LagrangianSolution, bellman_update, mixture_coefficient, solve_cmdp, value_iteration,
)

__version__ = "0.1.0"
