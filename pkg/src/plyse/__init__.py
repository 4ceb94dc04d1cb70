"""Online sensing and edge-computation control for an energy-harvesting IoT device.

A time-slotted simulator of a wireless device that senses data, computes some of
it locally and offloads the rest over a shared licensed band to an edge server,
driven by a perturbed-Lyapunov controller and three baseline policies.
"""

from .benchmarks import PolicyId, eco_action, get_policy, lco_action, qs_oblivious_action
from .capacity import CapacityReport, omega_threshold
from .config import ConfigError, SystemParams, load_params, serialize_params
from .controller import opt_edge_freq, opt_sensing, opt_task_exec, plyse_action
from .engine import RunMetrics, SweepSpec, detect_divergence, run, run_events, sweep
from .environment import EventGenerator, RandomEvent
from .state import ControlAction, SystemState, step

__version__ = "0.1.0"

__all__ = [
    "CapacityReport",
    "ConfigError",
    "ControlAction",
    "EventGenerator",
    "PolicyId",
    "RandomEvent",
    "RunMetrics",
    "SweepSpec",
    "SystemParams",
    "SystemState",
    "detect_divergence",
    "eco_action",
    "get_policy",
    "lco_action",
    "load_params",
    "omega_threshold",
    "opt_edge_freq",
    "opt_sensing",
    "opt_task_exec",
    "plyse_action",
    "qs_oblivious_action",
    "run",
    "run_events",
    "serialize_params",
    "step",
    "sweep",
]
