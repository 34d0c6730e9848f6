"""Active device identification over the non-coherent many-access channel."""

from .channel import ChannelConfig, simulate_block, simulate_symbol, transition_prob
from .protocol import StagePlan, run_protocol
from .theory import min_id_cost, optimize_capacity

__all__ = ["ChannelConfig", "StagePlan", "min_id_cost", "optimize_capacity", "run_protocol",
           "simulate_block", "simulate_symbol", "transition_prob"]
