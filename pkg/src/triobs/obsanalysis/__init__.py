"""Sample-based observability diagnostics on a compact box."""

from .box import SampleBox, Tube
from .fibers import (
    FiberPair,
    PropertyAReport,
    exact_collisions,
    fiber_pair_search,
    injectivity_scan,
    property_a_check,
)
from .lipschitz import KernelCheck, LipschitzScan, kernel_condition_check, lipschitz_ratio_scan
from .modulus import ModulusEstimate, fit_power_law, modulus_estimate
from .rank import RANK_TOL, OrderSearchResult, RankReport, numeric_rank, rank_profile, strong_order_search
from .tangent import InfinitesimalRank, TangentState, TangentTrace, infinitesimal_rank_check, tangent_simulate

__all__ = [
    "RANK_TOL",
    "FiberPair",
    "InfinitesimalRank",
    "KernelCheck",
    "LipschitzScan",
    "ModulusEstimate",
    "OrderSearchResult",
    "PropertyAReport",
    "RankReport",
    "SampleBox",
    "TangentState",
    "TangentTrace",
    "Tube",
    "exact_collisions",
    "fiber_pair_search",
    "fit_power_law",
    "infinitesimal_rank_check",
    "injectivity_scan",
    "kernel_condition_check",
    "lipschitz_ratio_scan",
    "modulus_estimate",
    "numeric_rank",
    "property_a_check",
    "rank_profile",
    "strong_order_search",
    "tangent_simulate",
]
