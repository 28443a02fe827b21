"""Goal-oriented IoT: drift-plus-penalty resource allocation for sensing, edge inference and federated learning."""
from .config import ScenarioConfig, load_config, save_config
from .engine import Direction, VirtualQueue, VirtualQueueSet, drift_plus_penalty, mean_rate_stability
from .harness import run_scenario, sweep, write_outputs

__all__ = [
    "Direction", "ScenarioConfig", "VirtualQueue", "VirtualQueueSet", "drift_plus_penalty", "load_config",
    "mean_rate_stability", "run_scenario", "save_config", "sweep", "write_outputs",
]
__version__ = "0.1.0"
