"""Plant simulation, high-gain observer and state reconstruction."""

from .observer import (
    ObserverConfig,
    ObserverResult,
    design_gain,
    integrate_form,
    reconstruct_state,
    routh_hurwitz,
    run_high_gain_observer,
    sweep_summary,
)
from .simulate import Trajectory, integrate_system

__all__ = [
    "ObserverConfig",
    "ObserverResult",
    "Trajectory",
    "design_gain",
    "integrate_form",
    "integrate_system",
    "reconstruct_state",
    "routh_hurwitz",
    "run_high_gain_observer",
    "sweep_summary",
]
