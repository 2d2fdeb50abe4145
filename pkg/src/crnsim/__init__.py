"""Finite-horizon adaptive distributed power allocation for cognitive radio networks."""

from .channel import ChannelParams, LinkChannelState, evolve_channel, sample_channel
from .config import ConfigError, ScenarioConfig, load_config, preset
from .controller import (BaselineController, FHController, FixedController, OracleController,
                         Targets)
from .estimator import TimeBasis, ValueEstimator
from .harness import MetricsRecord, Simulator, emit_metrics, read_metrics, run_scenario
from .network import ActivitySchedule, Case, CRNetwork, Node, Role
from .riccati import backward_riccati, optimal_cost

__version__ = "0.1.0"
