"""Contextual two-stage minimum weight spanning tree on grid graphs.

First-stage decisions are forests; the second stage completes them into a
spanning tree at scenario-dependent edge costs.  The single-scenario
problem reduces to one minimum spanning tree under the per-edge minimum of
the (shifted) stage costs, because y + z must form a spanning tree and any
sub-forest of a tree is feasible as its first stage; stage attribution per
chosen edge goes to the cheaper stage, ties to stage one.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..core import InputError, LinearOracle, Scenario

EdgeList = tuple[tuple[int, int], ...]


class InfeasibleError(RuntimeError):
    """The graph cannot be spanned (disconnected input)."""


def grid_edges(rows: int, cols: int) -> EdgeList:
    """4-neighbor grid edges, horizontal block first, row-major within each."""
    if rows < 1 or cols < 1:
        raise InputError("grid dimensions must be positive")
    edges: list[tuple[int, int]] = []
    for r in range(rows):
        for c in range(cols - 1):
            edges.append((r * cols + c, r * cols + c + 1))
    for r in range(rows - 1):
        for c in range(cols):
            edges.append((r * cols + c, (r + 1) * cols + c))
    return tuple(edges)


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def _select_acyclic(order, heads, tails, parent, limit: int) -> list[int]:
    """Greedy acyclic edge selection along ``order`` (in-place union-find)."""
    chosen: list[int] = []
    for e in order:
        ru = _find(parent, heads[e])
        rv = _find(parent, tails[e])
        if ru != rv:
            parent[ru] = rv
            chosen.append(e)
            if len(chosen) == limit:
                break
    return chosen


def is_forest(y: np.ndarray, edges: EdgeList, n_nodes: int) -> bool:
    parent = list(range(n_nodes))
    for e, flag in enumerate(y):
        if flag > 0.5:
            ru = _find(parent, edges[e][0])
            rv = _find(parent, edges[e][1])
            if ru == rv:
                return False
            parent[ru] = rv
    return True


def kruskal_max_weight_forest(
    weights: np.ndarray, edges: EdgeList, n_nodes: int
) -> np.ndarray:
    """Maximum-total-weight forest: greedy by decreasing weight, ties by
    index, skipping cycles and edges with weight <= 0."""
    w = np.asarray(weights, dtype=float)
    if not np.all(np.isfinite(w)):
        raise InputError("weights must be finite")
    order = np.argsort(-w, kind="stable")
    heads = [e[0] for e in edges]
    tails = [e[1] for e in edges]
    parent = list(range(n_nodes))
    y = np.zeros(len(edges))
    for e in order.tolist():
        if w[e] <= 0.0:
            break
        ru = _find(parent, heads[e])
        rv = _find(parent, tails[e])
        if ru != rv:
            parent[ru] = rv
            y[e] = 1.0
    return y


def second_stage_value(
    y: np.ndarray, second_stage_costs: np.ndarray, edges: EdgeList, n_nodes: int
) -> tuple[float, np.ndarray]:
    """Minimum-cost completion of the forest y into a spanning tree.

    Kruskal in increasing second-stage cost over the edges not in y, with
    y's components pre-merged.  Returns the completion cost and indicator.
    """
    d = np.asarray(second_stage_costs, dtype=float)
    parent = list(range(n_nodes))
    merged = 0
    for e, flag in enumerate(y):
        if flag > 0.5:
            ru = _find(parent, edges[e][0])
            rv = _find(parent, edges[e][1])
            if ru == rv:
                raise InputError("first-stage selection contains a cycle")
            parent[ru] = rv
            merged += 1
    remaining = [e for e in range(len(edges)) if y[e] <= 0.5]
    order = sorted(remaining, key=lambda e: (d[e], e))
    heads = [e[0] for e in edges]
    tails = [e[1] for e in edges]
    chosen = _select_acyclic(order, heads, tails, parent, n_nodes - 1 - merged)
    if merged + len(chosen) != n_nodes - 1:
        raise InfeasibleError("graph is disconnected; no spanning completion")
    z = np.zeros(len(edges))
    z[chosen] = 1.0
    return float(d[chosen].sum()), z


def two_stage_mst_split(
    eff_first: np.ndarray, second: np.ndarray, edges: EdgeList, n_nodes: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """Joint minimizer of <eff_first|y> + <second|z> over spanning pairs.

    One Kruskal pass under the per-edge minimum of the two stage costs;
    each chosen edge is attributed to the cheaper stage (ties to stage one).
    """
    eff = np.asarray(eff_first, dtype=float)
    d = np.asarray(second, dtype=float)
    w = np.minimum(eff, d)
    order = np.argsort(w, kind="stable")
    heads = [e[0] for e in edges]
    tails = [e[1] for e in edges]
    parent = list(range(n_nodes))
    chosen = _select_acyclic(order.tolist(), heads, tails, parent, n_nodes - 1)
    if len(chosen) != n_nodes - 1:
        raise InfeasibleError("graph is disconnected")
    y = np.zeros(len(edges))
    z = np.zeros(len(edges))
    for e in chosen:
        if eff[e] <= d[e]:
            y[e] = 1.0
        else:
            z[e] = 1.0
    value = float(eff @ y + d @ z)
    return y, z, value


@dataclass(frozen=True)
class TwoStageCosts:
    """Noise payload for one spanning-tree scenario."""

    first_stage: np.ndarray
    second_stage: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.first_stage, dtype=float)
        d = np.asarray(self.second_stage, dtype=float)
        if c.shape != d.shape or c.ndim != 1:
            raise InputError("stage cost vectors must share one edge dimension")
        object.__setattr__(self, "first_stage", c)
        object.__setattr__(self, "second_stage", d)
        c.setflags(write=False)
        d.setflags(write=False)


@dataclass(frozen=True)
class GridInstance:
    rows: int
    cols: int
    first_stage_costs: np.ndarray   # (E,)
    features: np.ndarray            # (E, p)
    scenario_costs: np.ndarray      # (K, E) second-stage costs

    def __post_init__(self):
        expected = self.rows * (self.cols - 1) + (self.rows - 1) * self.cols
        if self.first_stage_costs.shape != (expected,):
            raise InputError("first-stage cost vector does not match the grid")
        if self.features.shape[0] != expected:
            raise InputError("feature rows do not match the edge count")
        if self.scenario_costs.ndim != 2 or self.scenario_costs.shape[1] != expected:
            raise InputError("scenario costs do not match the edge count")
        if np.any(self.scenario_costs <= 0.0):
            raise InputError("second-stage costs must be positive")
        for arr in (self.first_stage_costs, self.features, self.scenario_costs):
            arr.setflags(write=False)

    @property
    def edges(self) -> EdgeList:
        return grid_edges(self.rows, self.cols)

    @property
    def n_edges(self) -> int:
        return self.first_stage_costs.shape[0]

    @property
    def n_scenarios(self) -> int:
        return self.scenario_costs.shape[0]

    def scenario(self, context_id: int, k: int) -> Scenario:
        payload = TwoStageCosts(self.first_stage_costs, self.scenario_costs[k])
        return Scenario(context_id=context_id, features=self.features, noise_payload=payload)


def mst_anticipative_oracle(
    theta_tilde: np.ndarray,
    kappa: float,
    first_stage_costs: np.ndarray,
    second_stage_costs: np.ndarray,
    edges: EdgeList,
    n_nodes: int,
) -> np.ndarray:
    """First-stage minimizer of c.y + Q(y; xi) - kappa <theta_tilde|y>."""
    eff = np.asarray(first_stage_costs, dtype=float) - kappa * np.asarray(theta_tilde, dtype=float)
    y, _, _ = two_stage_mst_split(eff, second_stage_costs, edges, n_nodes)
    return y


class MstOracle(LinearOracle):
    """Linear oracle over the forests of a fixed grid graph."""

    def __init__(self, rows: int, cols: int):
        self.rows = rows
        self.cols = cols
        self.edges = grid_edges(rows, cols)
        self.n_nodes = rows * cols
        self.n_edges = len(self.edges)
        self._heads = [e[0] for e in self.edges]
        self._tails = [e[1] for e in self.edges]

    def argmax_linear(self, theta: np.ndarray) -> np.ndarray:
        return kruskal_max_weight_forest(theta, self.edges, self.n_nodes)

    def argmax_linear_many(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        orders = np.argsort(-thetas, axis=1, kind="stable")
        out = np.zeros_like(thetas)
        for r in range(thetas.shape[0]):
            parent = list(range(self.n_nodes))
            row = thetas[r]
            for e in orders[r].tolist():
                if row[e] <= 0.0:
                    break
                ru = _find(parent, self._heads[e])
                rv = _find(parent, self._tails[e])
                if ru != rv:
                    parent[ru] = rv
                    out[r, e] = 1.0
        return out

    def _payload(self, scenario: Scenario) -> TwoStageCosts:
        payload = scenario.noise_payload
        if not isinstance(payload, TwoStageCosts):
            raise InputError("spanning-tree scenarios need TwoStageCosts payloads")
        return payload

    def argmin_shifted(self, theta_tilde, kappa, scenario: Scenario) -> np.ndarray:
        payload = self._payload(scenario)
        return mst_anticipative_oracle(
            theta_tilde, kappa, payload.first_stage, payload.second_stage,
            self.edges, self.n_nodes,
        )

    def argmin_shifted_many(self, theta_tildes, kappa, scenario: Scenario) -> np.ndarray:
        payload = self._payload(scenario)
        eff = payload.first_stage[None, :] - kappa * np.asarray(theta_tildes, dtype=float)
        w = np.minimum(eff, payload.second_stage[None, :])
        orders = np.argsort(w, axis=1, kind="stable")
        target = self.n_nodes - 1
        out = np.zeros_like(w)
        for r in range(w.shape[0]):
            parent = list(range(self.n_nodes))
            chosen = _select_acyclic(
                orders[r].tolist(), self._heads, self._tails, parent, target
            )
            if len(chosen) != target:
                raise InfeasibleError("graph is disconnected")
            row_eff = eff[r]
            for e in chosen:
                if row_eff[e] <= payload.second_stage[e]:
                    out[r, e] = 1.0
        return out


class MstEvaluator:
    """True two-stage cost and anticipative optimum for policy evaluation."""

    def __init__(self, oracle: MstOracle):
        self.oracle = oracle
        self._anticipative_cache: dict[bytes, float] = {}

    def policy_cost(self, y: np.ndarray, scenario: Scenario) -> float:
        payload = scenario.noise_payload
        completion, _ = second_stage_value(
            y, payload.second_stage, self.oracle.edges, self.oracle.n_nodes
        )
        return float(payload.first_stage @ y) + completion

    def anticipative_cost(self, scenario: Scenario) -> float:
        payload = scenario.noise_payload
        key = payload.first_stage.tobytes() + payload.second_stage.tobytes()
        cached = self._anticipative_cache.get(key)
        if cached is None:
            _, _, cached = two_stage_mst_split(
                payload.first_stage, payload.second_stage,
                self.oracle.edges, self.oracle.n_nodes,
            )
            self._anticipative_cache[key] = cached
        return cached


# ---------------------------------------------------------------------------
# Exhaustive enumeration (independent oracles for small graphs)
# ---------------------------------------------------------------------------

def enumerate_forests(edges: EdgeList, n_nodes: int) -> list[np.ndarray]:
    """All 0/1 acyclic edge subsets; exponential, desk scale only."""
    n_edges = len(edges)
    if n_edges > 16:
        raise InputError("forest enumeration is limited to 16 edges")
    forests = []
    for mask in range(1 << n_edges):
        y = np.array([(mask >> e) & 1 for e in range(n_edges)], dtype=float)
        if is_forest(y, edges, n_nodes):
            forests.append(y)
    return forests


def brute_force_max_weight_forest_value(
    weights: np.ndarray, edges: EdgeList, n_nodes: int
) -> float:
    w = np.asarray(weights, dtype=float)
    return max(float(w @ y) for y in enumerate_forests(edges, n_nodes))


def brute_force_two_stage_pair(
    eff_first: np.ndarray, second: np.ndarray, edges: EdgeList, n_nodes: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """Min over all (y, z) with y + z a spanning tree; no reduction tricks."""
    eff = np.asarray(eff_first, dtype=float)
    d = np.asarray(second, dtype=float)
    n_edges = len(edges)
    best = (None, None, np.inf)
    for y in enumerate_forests(edges, n_nodes):
        free = [e for e in range(n_edges) if y[e] <= 0.5]
        need = n_nodes - 1 - int(y.sum())
        if need < 0 or need > len(free):
            continue
        for combo in combinations(free, need):
            z = np.zeros(n_edges)
            z[list(combo)] = 1.0
            if not is_forest(y + z, edges, n_nodes):
                continue
            value = float(eff @ y + d @ z)
            if value < best[2]:
                best = (y.copy(), z, value)
    return best


def brute_force_two_stage_value(
    eff_first: np.ndarray, second: np.ndarray, edges: EdgeList, n_nodes: int
) -> float:
    return brute_force_two_stage_pair(eff_first, second, edges, n_nodes)[2]
