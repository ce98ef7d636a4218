"""Two-lane ring-highway traffic simulator with LOS/OLOS link classification."""

__version__ = "0.1.0"

from .scenario import (
    ConfigError,
    LaneParams,
    RoadConfig,
    ScenarioConfig,
    SimulationState,
    VehicleDims,
    init_scenario,
    load_config,
)

__all__ = [
    "ConfigError",
    "LaneParams",
    "RoadConfig",
    "ScenarioConfig",
    "SimulationState",
    "VehicleDims",
    "init_scenario",
    "load_config",
    "__version__",
]
