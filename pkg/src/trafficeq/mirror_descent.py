"""Mirror descent with Euclidean prox on the stable-dynamics dual.

The dual variable is a vector of edge times bounded below by the free-flow
times. Subgradients come from shortest-path loadings, either in full or
randomized over one sampled correspondence / one sampled origin. Primal
flows are recovered from the averaged run, via the accumulated multiplier of
the time bound or (deterministic runs only) by averaging the loadings.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .network import DemandTable, Network
from .shortest_paths import (
    aggregate_tree_flows,
    all_or_nothing,
    aon_value,
    dijkstra,
    tree_path,
)

VARIANTS = ("deterministic", "sample_od", "sample_origin")
RECOVERIES = ("multiplier", "flow_average")

_SQRT2 = math.sqrt(2.0)


@dataclass
class MdConfig:
    """Solver knobs.

    ``iterations`` is the per-run step count N; each run performs N + 1
    subgradient draws. ``r_bar`` and ``m_bound`` are initial guesses for the
    step-size constants (defaults: the Euclidean norm of the free-flow times,
    and the full subgradient norm at the starting point); both are doubled by
    sqrt(2) on restart. ``tol`` is an absolute bound on the duality gap.
    ``confidence`` is carried into the result metadata only.
    """

    iterations: int = 20_000
    tol: float = 1e-2
    r_bar: float | None = None
    m_bound: float | None = None
    variant: str = "deterministic"
    recovery: str = "multiplier"
    seed: int = 0
    max_restarts: int = 10
    confidence: float = 0.05
    trace_every: int | None = None

    def __post_init__(self) -> None:
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.recovery not in RECOVERIES:
            raise ValueError(f"recovery must be one of {RECOVERIES}")
        if self.recovery == "flow_average" and self.variant != "deterministic":
            raise ValueError("flow_average recovery requires the deterministic variant")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be nonnegative")
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must lie in (0, 1)")


@dataclass
class MdRecord:
    k: int
    upsilon_sample: float
    step: float
    grad_norm: float


@dataclass
class MdTrace:
    records: list[MdRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["k,upsilon_sample,step,grad_norm"]
        for r in self.records:
            lines.append(f"{r.k},{r.upsilon_sample:.17g},{r.step:.17g},{r.grad_norm:.17g}")
        return "\n".join(lines) + "\n"


@dataclass
class MdResult:
    times: np.ndarray
    flows: np.ndarray
    objective: float
    gap: float
    violation: float
    restarts: int
    converged: bool
    iterations_total: int
    trace: MdTrace
    seed: int
    r_bar: float
    m_bound: float
    step: float
    metadata: dict


def _check_dual_times(net: Network, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (net.edge_count,):
        raise ValueError(f"expected {net.edge_count} edge times, got shape {t.shape}")
    if t.size and float((t - net.free_time).min()) < -1e-12:
        raise ValueError("dual times must dominate the free-flow times")
    return t


def dual_value(net: Network, dem: DemandTable, t: np.ndarray, threads: int = 1) -> float:
    """Dual objective at feasible times t: capacity-weighted excess time minus
    the demand-weighted shortest-path total."""
    t = _check_dual_times(net, t)
    return -aon_value(net, t, dem, threads=threads) + float(net.capacity @ (t - net.free_time))


def subgrad_full(
    net: Network, dem: DemandTable, t: np.ndarray, threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Exact subgradient of the dual and the shortest-path loading it came from."""
    t = _check_dual_times(net, t)
    aon = all_or_nothing(net, t, dem, threads=threads)
    return net.capacity - aon.flows, aon.flows


def od_subgradient(net: Network, dem: DemandTable, t: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    """Subgradient estimate from a single correspondence: the whole demand total
    is charged to that pair's shortest path."""
    origin, dest = pair
    tree = dijkstra(net, t, origin)
    g = net.capacity.copy()
    for e in tree_path(net, tree, dest):
        g[e] -= dem.total
    return g


def subgrad_sample_od(
    net: Network, dem: DemandTable, t: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw one correspondence with probability proportional to its rate."""
    t = _check_dual_times(net, t)
    idx = _draw_index(rng, np.cumsum([r for _, _, r in dem.entries]))
    origin, dest, _ = dem.entries[idx]
    return od_subgradient(net, dem, t, (origin, dest))


def origin_subgradient(net: Network, dem: DemandTable, t: np.ndarray, origin: int) -> np.ndarray:
    """Subgradient estimate from a single origin: one tree build plus the
    backward demand-weighting pass, rescaled by total / origin-total demand."""
    tree = dijkstra(net, t, origin)
    loaded = aggregate_tree_flows(net, tree, dem.by_origin[origin])
    scale = dem.total / dem.origin_totals[origin]
    return net.capacity - scale * loaded


def subgrad_sample_origin(
    net: Network, dem: DemandTable, t: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw one origin with probability proportional to its total demand."""
    t = _check_dual_times(net, t)
    idx = _draw_index(rng, np.cumsum([dem.origin_totals[o] for o in dem.origins]))
    return origin_subgradient(net, dem, t, dem.origins[idx])


def _draw_index(rng: np.random.Generator, cumulative: np.ndarray) -> int:
    if cumulative.size == 0:
        raise ValueError("cannot sample from an empty demand table")
    r = rng.random() * cumulative[-1]
    idx = int(np.searchsorted(cumulative, r, side="right"))
    return min(idx, cumulative.size - 1)


def md_step(t: np.ndarray, g: np.ndarray, step: float, floor: np.ndarray) -> np.ndarray:
    """Prox step: per-edge minimization of a parabola on a half-line, in closed form."""
    if step <= 0.0:
        raise ValueError("step must be positive")
    return np.maximum(floor, t - step * g)


def duality_gap(
    net: Network, dem: DemandTable, t: np.ndarray, flows: np.ndarray, threads: int = 1
) -> tuple[float, float]:
    """Duality gap of a (times, flows) pair and the capacity-violation norm.

    The gap adds the free-time primal cost of ``flows`` to the dual value at
    ``t``; it is nonnegative whenever the flows are feasible.
    """
    gap = dual_value(net, dem, t, threads=threads) + float(net.free_time @ flows)
    violation = float(np.linalg.norm(np.maximum(flows - net.capacity, 0.0)))
    return gap, violation


def solve_stable_dynamics_md(
    net: Network,
    dem: DemandTable,
    cfg: MdConfig | None = None,
    threads: int = 1,
) -> MdResult:
    """Averaged mirror descent on the dual with doubling restarts.

    Steps are constant within a run. A run aborts and doubles the gradient
    bound when an observed subgradient norm exceeds it; a completed run whose
    duality gap misses ``tol`` doubles the radius guess instead. Both kinds of
    restart share ``max_restarts``; the random stream continues across
    restarts, so a given seed fully determines the outcome.
    """
    cfg = cfg if cfg is not None else MdConfig()
    if cfg.variant != "deterministic" and dem.pair_count == 0:
        raise ValueError("stochastic variants need a nonempty demand table")
    start = time.perf_counter()
    tbar = net.free_time
    cap = net.capacity
    rng = np.random.default_rng(cfg.seed)
    n_steps = cfg.iterations
    trace_every = cfg.trace_every or max(1, (n_steps + 1) // 512)

    od_cum = np.cumsum([r for _, _, r in dem.entries])
    org_cum = np.cumsum([dem.origin_totals[o] for o in dem.origins])
    lin_base = float(cap @ tbar)

    m_bound = cfg.m_bound
    if m_bound is None:
        g0, _ = subgrad_full(net, dem, tbar, threads=threads)
        m_bound = max(float(np.linalg.norm(g0)), 1e-12)
    r_bar = cfg.r_bar
    if r_bar is None:
        r_bar = float(np.linalg.norm(tbar)) or 1.0

    restarts = 0
    total_iters = 0
    trace = MdTrace()
    converged = False
    t_avg = tbar.copy()
    f_rec = np.zeros(net.edge_count)
    gap = math.inf
    violation = 0.0
    step = 0.0

    while True:
        step = (r_bar / m_bound) * math.sqrt(2.0 / (n_steps + 1))
        t = tbar.copy()
        t_sum = np.zeros(net.edge_count)
        g_sum = np.zeros(net.edge_count)
        f_sum = np.zeros(net.edge_count)
        trace.records.clear()
        can_restart = restarts < cfg.max_restarts
        exceeded = False
        for k in range(n_steps + 1):
            if cfg.variant == "deterministic":
                g, flows_k = subgrad_full(net, dem, t, threads=threads)
                # The loading's cost at t equals the demand-weighted distances.
                ups = float(cap @ t) - lin_base - float(t @ flows_k)
            elif cfg.variant == "sample_od":
                idx = _draw_index(rng, od_cum)
                origin, dest, _ = dem.entries[idx]
                tree = dijkstra(net, t, origin)
                g = cap.copy()
                for e in tree_path(net, tree, dest):
                    g[e] -= dem.total
                ups = float(cap @ t) - lin_base - dem.total * float(tree.dist[dest])
                flows_k = None
            else:
                idx = _draw_index(rng, org_cum)
                origin = dem.origins[idx]
                tree = dijkstra(net, t, origin)
                loaded = aggregate_tree_flows(net, tree, dem.by_origin[origin])
                scale = dem.total / dem.origin_totals[origin]
                g = cap - scale * loaded
                value = sum(r * float(tree.dist[d]) for d, r in dem.by_origin[origin])
                ups = float(cap @ t) - lin_base - scale * value
                flows_k = None
            total_iters += 1
            grad_norm = float(np.linalg.norm(g))
            if grad_norm > m_bound and can_restart:
                exceeded = True
                break
            if k % trace_every == 0:
                trace.records.append(MdRecord(k=k, upsilon_sample=ups, step=step, grad_norm=grad_norm))
            t_sum += t
            g_sum += g
            if flows_k is not None:
                f_sum += flows_k
            t = md_step(t, g, step, tbar)

        if exceeded:
            m_bound *= _SQRT2
            restarts += 1
            continue

        weight_total = step * (n_steps + 1)
        t_avg = t_sum / (n_steps + 1)
        if cfg.recovery == "multiplier":
            multiplier = np.maximum(step * g_sum, 0.0) / weight_total
            f_rec = cap - multiplier
        else:
            f_rec = f_sum / (n_steps + 1)
        gap, violation = duality_gap(net, dem, t_avg, f_rec, threads=threads)
        # Recovered flows meet conservation only approximately, so the signed
        # gap can dip below zero; the certificate is its magnitude.
        if abs(gap) <= cfg.tol:
            converged = True
            break
        if restarts >= cfg.max_restarts:
            break
        r_bar *= _SQRT2
        restarts += 1

    metadata = {
        "confidence": cfg.confidence,
        "high_probability_constant": 16.0 * _SQRT2,
        "log_factor": math.log(4.0 * max(n_steps, 1) / cfg.confidence),
        "wall_time": time.perf_counter() - start,
    }
    return MdResult(
        times=t_avg,
        flows=f_rec,
        objective=float(net.free_time @ f_rec),
        gap=gap,
        violation=violation,
        restarts=restarts,
        converged=converged,
        iterations_total=total_iters,
        trace=trace,
        seed=cfg.seed,
        r_bar=r_bar,
        m_bound=m_bound,
        step=step,
        metadata=metadata,
    )
