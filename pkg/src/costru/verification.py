"""Brute-force verification suites: oracle exactness and gradient fidelity."""

from __future__ import annotations

import numpy as np

from .core import CheckRow, make_rng
from .problems.spanning_tree import (
    EdgeList,
    brute_force_max_weight_forest_value,
    brute_force_two_stage_pair,
    grid_edges,
    kruskal_max_weight_forest,
    two_stage_mst_split,
)
from .regularizers import (
    RegularizerKind,
    fy_loss_exact,
    perturbed_fy_gradient,
    perturbed_max_value,
    perturbed_maximizer_moment,
)
from .simplex_lab import ExplicitOracle, random_binary_polytope, random_interior_product

# Small graphs with at most 8 edges (edges, n_nodes).
_SMALL_GRAPHS: list[tuple[EdgeList, int]] = [
    (((0, 1), (1, 2), (0, 2)), 3),                       # triangle
    (((0, 1), (0, 2), (0, 3)), 4),                       # star
    (grid_edges(2, 2), 4),
    (((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)), 4),  # K4
    (grid_edges(2, 3), 6),
    (((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (0, 4), (1, 4)), 5),
]


def run_oracle_suite(
    n_kruskal: int = 500, n_anticipative: int = 200, seed: int = 0
) -> list[CheckRow]:
    """Kruskal max-weight forests and two-stage anticipative solves against
    exhaustive enumeration on small graphs; exact equality required."""
    rows: list[CheckRow] = []
    g = make_rng(seed, 61).generator()
    worst = 0.0
    per_graph = max(1, n_kruskal // len(_SMALL_GRAPHS))
    for edges, n_nodes in _SMALL_GRAPHS:
        for _ in range(per_graph):
            weights = g.normal(0.0, 2.0, size=len(edges))
            y = kruskal_max_weight_forest(weights, edges, n_nodes)
            value = float(weights @ y)
            best = brute_force_max_weight_forest_value(weights, edges, n_nodes)
            worst = max(worst, abs(value - best))
    rows.append(CheckRow("oracles/kruskal-forest", seed, worst, 0.0, worst == 0.0))

    g = make_rng(seed, 62).generator()
    worst = 0.0
    kappas = (0.0, 0.5, 1.0, 2.0)
    for grid in ((2, 2), (2, 3)):
        edges = grid_edges(*grid)
        n_nodes = grid[0] * grid[1]
        for i in range(n_anticipative // 2):
            c = g.uniform(5.0, 10.0, size=len(edges))
            d = g.uniform(2.0, 12.0, size=len(edges))
            theta = g.standard_normal(len(edges))
            kappa = kappas[i % len(kappas)]
            eff = c - kappa * theta
            y, z, _ = two_stage_mst_split(eff, d, edges, n_nodes)
            value = float(eff @ y + d @ z)
            _, _, best = brute_force_two_stage_pair(eff, d, edges, n_nodes)
            worst = max(worst, abs(value - best))
    rows.append(CheckRow("oracles/two-stage-anticipative", seed, worst, 0.0, worst == 0.0))
    return rows


def run_gradient_suite(
    seed: int = 0,
    m_mc: int = 100_000,
    d: int = 4,
    n_atoms: int = 6,
    eps: float = 1.0,
    fd_step_mc: float = 1e-3,
) -> list[CheckRow]:
    """Finite-difference fidelity of exact and Monte-Carlo FY gradients."""
    rows: list[CheckRow] = []

    # Exact negentropy FY gradient vs central differences, dim 6, step 1e-6.
    g = make_rng(seed, 71).generator()
    kind = RegularizerKind.negentropy()
    worst = 0.0
    for _ in range(10):
        s = g.standard_normal(6)
        target = random_interior_product(g, 1, 6)[0]
        _, grad = fy_loss_exact(s, target, kind)
        fd = np.empty(6)
        h = 1e-6
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            up, _ = fy_loss_exact(s + e, target, kind)
            down, _ = fy_loss_exact(s - e, target, kind)
            fd[k] = (up - down) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - grad))))
    rows.append(CheckRow("gradients/exact-fy-fd", seed, worst, 1e-6, worst <= 1e-6))

    # Monte-Carlo perturbed gradients vs common-random-number differences.
    g = make_rng(seed, 72).generator()
    poly = random_binary_polytope(g, d, n_atoms)
    oracle = ExplicitOracle(poly)
    theta = g.standard_normal(d)
    target = poly.moment(random_interior_product(g, 1, n_atoms)[0])
    stream = make_rng(seed, 73)

    moment = perturbed_maximizer_moment(oracle, theta, eps, m_mc, stream)
    _, fy_grad = perturbed_fy_gradient(oracle, theta, target, eps, m_mc, stream)
    fd = np.empty(d)
    for k in range(d):
        e = np.zeros(d)
        e[k] = fd_step_mc
        up = perturbed_max_value(oracle, theta + e, eps, m_mc, stream)
        down = perturbed_max_value(oracle, theta - e, eps, m_mc, stream)
        fd[k] = (up - down) / (2 * fd_step_mc)
    rel_moment = float(np.linalg.norm(fd - moment) / np.linalg.norm(moment))
    rows.append(
        CheckRow("gradients/perturbed-moment-fd", seed, rel_moment, 1e-3, rel_moment < 1e-3)
    )
    fd_fy = fd - target
    denom = max(float(np.linalg.norm(fy_grad)), 1e-12)
    rel_fy = float(np.linalg.norm(fd_fy - fy_grad) / denom)
    rows.append(
        CheckRow("gradients/perturbed-fy-fd", seed, rel_fy, 1e-3, rel_fy < 1e-3)
    )
    return rows
