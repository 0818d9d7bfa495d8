"""LoS-sensing enhanced channel estimation for UAV-assisted OFDM downlinks."""

__version__ = "0.1.0"

from .channel import ChannelConfig, ChannelRealization, Scenario
from .estimation import EstimationResult, SensingConfig, los_ence
from .harness import MethodVariant, SimConfig, SweepRecord, run_sweep

__all__ = [
    "ChannelConfig",
    "ChannelRealization",
    "EstimationResult",
    "MethodVariant",
    "Scenario",
    "SensingConfig",
    "SimConfig",
    "SweepRecord",
    "los_ence",
    "run_sweep",
]
