"""Clock- and orientation-robust single-anchor radio-SLAM from multipath geometry."""

__version__ = "0.1.0"

from .geometry import (SPEED_OF_LIGHT, MultipathSet, PathParameters, ScenarioConfig, Scene,
                       forward_model, observe, sample_scene, wrap_angle)
from .localization import LocationEstimate, solve_location
from .orientation import GroupingStrategy, OrientationSolverConfig, estimate_orientation, robust_locate

__all__ = [
    "SPEED_OF_LIGHT", "MultipathSet", "PathParameters", "ScenarioConfig", "Scene",
    "forward_model", "observe", "sample_scene", "wrap_angle",
    "LocationEstimate", "solve_location",
    "GroupingStrategy", "OrientationSolverConfig", "estimate_orientation", "robust_locate",
]
