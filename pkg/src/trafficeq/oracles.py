"""Brute-force ground truth for tiny instances.

Everything here is guarded by size limits and meant for verification only;
the solvers never call into this module.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .costs import beckmann_potential, edge_times, edge_time_slopes
from .exceptions import ConvergenceError, InfeasibleError, OracleGuardError
from .network import DemandTable, Network

PATH_EXPLOSION_LIMIT = 100_000
VERTEX_ENUM_PATH_LIMIT = 20
VERTEX_ENUM_BASIS_LIMIT = 200_000


def enumerate_paths(
    net: Network,
    od: tuple[int, int],
    max_nodes: int | None = None,
    limit: int = PATH_EXPLOSION_LIMIT,
) -> list[tuple[int, ...]]:
    """All simple paths for one origin-destination pair.

    Depth-first search expanding edges in index order, so the result order is
    lexicographic by edge index. Refuses (raises OracleGuardError) once the
    partial count exceeds ``limit``.
    """
    origin, dest = od
    if max_nodes is None:
        max_nodes = net.node_count
    paths: list[tuple[int, ...]] = []
    stack_edges: list[int] = []
    on_path = [False] * net.node_count
    on_path[origin] = True

    def visit(node: int) -> None:
        if node == dest:
            paths.append(tuple(stack_edges))
            if len(paths) > limit:
                raise OracleGuardError(f"more than {limit} simple paths for {origin}->{dest}")
            return
        if len(stack_edges) + 1 >= max_nodes:
            return
        for head, e in net.out_edges[node]:
            if on_path[head]:
                continue
            on_path[head] = True
            stack_edges.append(e)
            visit(head)
            stack_edges.pop()
            on_path[head] = False

    visit(origin)
    return paths


def _path_incidence(net: Network, paths: list[tuple[int, ...]]) -> np.ndarray:
    theta = np.zeros((net.edge_count, len(paths)))
    for j, path in enumerate(paths):
        for e in path:
            theta[e, j] = 1.0
    return theta


def _enumerate_all(net: Network, dem: DemandTable):
    od_paths = []
    for origin, dest, rate in dem.entries:
        paths = enumerate_paths(net, (origin, dest))
        if not paths:
            raise InfeasibleError(f"no path from {origin} to {dest}")
        od_paths.append(((origin, dest, rate), paths))
    return od_paths


def project_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection of v onto {x >= 0, sum(x) = total}, by the sort method."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, len(v) + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def beckmann_oracle(
    net: Network,
    dem: DemandTable,
    tol: float = 1e-8,
    max_iter: int = 500_000,
) -> tuple[np.ndarray, float]:
    """Minimize the Beckmann potential directly over enumerated path flows.

    Projected gradient over the product of demand-scaled simplices, stopped by
    the linearization-gap certificate over the enumerated paths, so the result
    is trustworthy regardless of the iteration path taken.
    """
    od_paths = _enumerate_all(net, dem)
    all_paths = [p for _, group in od_paths for p in group]
    theta = _path_incidence(net, all_paths)
    slices = []
    start = 0
    for (_, _, rate), group in od_paths:
        slices.append((slice(start, start + len(group)), rate))
        start += len(group)

    x = np.empty(len(all_paths))
    for sl, rate in slices:
        x[sl] = rate / (sl.stop - sl.start)

    max_len = max(len(p) for p in all_paths)
    slope_cap = float(edge_time_slopes(net, np.full(net.edge_count, dem.total)).max())
    lipschitz = max(slope_cap * max_len * len(all_paths), 1e-12)
    step = 1.0 / lipschitz

    for _ in range(max_iter):
        flows = theta @ x
        times = edge_times(net, flows)
        grad = theta.T @ times
        gap = 0.0
        for sl, rate in slices:
            gap += float(grad[sl] @ x[sl]) - rate * float(grad[sl].min())
        if gap <= tol:
            return flows, beckmann_potential(net, flows)
        y = x - step * grad
        for sl, rate in slices:
            x[sl] = project_simplex(y[sl], rate)
    raise ConvergenceError(f"beckmann oracle did not certify tol={tol} in {max_iter} iterations")


def stable_dynamics_oracle(net: Network, dem: DemandTable, feas_tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Exact optimum of the capacitated free-time routing LP on a tiny instance.

    Minimizes total free-flow travel cost over path flows subject to demand
    satisfaction and edge capacities, by enumerating every basic feasible
    point of the polytope. Guarded: at most 20 paths and a bounded basis count.
    """
    od_paths = _enumerate_all(net, dem)
    all_paths = [p for _, group in od_paths for p in group]
    n_paths = len(all_paths)
    if n_paths > VERTEX_ENUM_PATH_LIMIT:
        raise OracleGuardError(f"{n_paths} paths exceed the vertex-enumeration limit")

    theta = _path_incidence(net, all_paths)
    n_pairs = len(od_paths)
    n_edges = net.edge_count
    cost = np.array([float(net.free_time[list(p)].sum()) for p in all_paths])

    # Standard form over [x; slack]: demand rows then capacity rows.
    n_var = n_paths + n_edges
    n_con = n_pairs + n_edges
    mat = np.zeros((n_con, n_var))
    rhs = np.empty(n_con)
    row = 0
    start = 0
    for (_, _, rate), group in od_paths:
        mat[row, start : start + len(group)] = 1.0
        rhs[row] = rate
        row += 1
        start += len(group)
    mat[n_pairs:, :n_paths] = theta
    mat[n_pairs:, n_paths:] = np.eye(n_edges)
    rhs[n_pairs:] = net.capacity

    from math import comb

    if comb(n_var, n_con) > VERTEX_ENUM_BASIS_LIMIT:
        raise OracleGuardError("too many candidate bases for exhaustive enumeration")

    best_value = np.inf
    best_flows: np.ndarray | None = None
    for basis in combinations(range(n_var), n_con):
        sub = mat[:, basis]
        try:
            z = np.linalg.solve(sub, rhs)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(z)) or float(z.min()) < -feas_tol:
            continue
        x = np.zeros(n_var)
        x[list(basis)] = z
        value = float(cost @ x[:n_paths])
        if value < best_value:
            best_value = value
            best_flows = theta @ x[:n_paths]
    if best_flows is None:
        raise InfeasibleError("demand exceeds network capacity: no feasible routing")
    return best_flows, best_value
