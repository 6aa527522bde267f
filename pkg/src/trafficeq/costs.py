"""BPR edge cost laws, their antiderivatives and slopes, and the Beckmann potential."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network


@dataclass(frozen=True)
class BprLaw:
    """One edge's volume-delay curve tau(f) = t_bar * (1 + gamma * (f / capacity)**power).

    Nondecreasing on f >= 0 with tau(0) = t_bar. The power must be at least 1
    so the slope stays finite at zero flow.
    """

    free_time: float
    capacity: float
    gamma: float
    power: float

    def __post_init__(self) -> None:
        if not self.free_time >= 0.0:
            raise ValueError("free_time must be nonnegative")
        if not self.capacity > 0.0:
            raise ValueError("capacity must be positive")
        if not self.gamma >= 0.0:
            raise ValueError("gamma must be nonnegative")
        if not self.power >= 1.0:
            raise ValueError("power must be at least 1")


def _check_flow(f: float) -> float:
    f = float(f)
    if f < 0.0:
        raise ValueError(f"negative flow {f}")
    return f


def tau(law: BprLaw, f: float) -> float:
    """Travel time on one edge at flow f."""
    f = _check_flow(f)
    return law.free_time * (1.0 + law.gamma * (f / law.capacity) ** law.power)


def sigma(law: BprLaw, f: float) -> float:
    """Integral of tau from 0 to f, in closed form."""
    f = _check_flow(f)
    return law.free_time * f * (1.0 + law.gamma / (law.power + 1.0) * (f / law.capacity) ** law.power)


def tau_prime(law: BprLaw, f: float) -> float:
    """Slope of tau at flow f."""
    f = _check_flow(f)
    return law.free_time * law.gamma * law.power * f ** (law.power - 1.0) / law.capacity**law.power


def law_of(net: Network, edge: int) -> BprLaw:
    """The cost law of one network edge."""
    return BprLaw(
        free_time=float(net.free_time[edge]),
        capacity=float(net.capacity[edge]),
        gamma=float(net.bpr_gamma[edge]),
        power=float(net.bpr_power[edge]),
    )


def _check_flows(net: Network, flows: np.ndarray) -> np.ndarray:
    flows = np.asarray(flows, dtype=float)
    if flows.shape != (net.edge_count,):
        raise ValueError(f"expected {net.edge_count} edge flows, got shape {flows.shape}")
    if flows.size and float(flows.min()) < 0.0:
        raise ValueError("negative edge flow")
    return flows


def edge_times(net: Network, flows: np.ndarray) -> np.ndarray:
    """Componentwise travel times at the given edge flows."""
    flows = _check_flows(net, flows)
    return net.free_time * (1.0 + net.bpr_gamma * (flows / net.capacity) ** net.bpr_power)


def edge_time_slopes(net: Network, flows: np.ndarray) -> np.ndarray:
    """Componentwise slopes of the travel-time laws at the given flows."""
    flows = _check_flows(net, flows)
    return net.free_time * net.bpr_gamma * net.bpr_power * flows ** (net.bpr_power - 1.0) / net.capacity**net.bpr_power


def beckmann_potential(net: Network, flows: np.ndarray) -> float:
    """Sum over edges of the travel-time integral from 0 to the edge flow."""
    flows = _check_flows(net, flows)
    terms = net.free_time * flows * (1.0 + net.bpr_gamma / (net.bpr_power + 1.0) * (flows / net.capacity) ** net.bpr_power)
    return float(terms.sum())
