"""Tabular toy problem: one binary decision, three equally likely noise states.

The cost table is chosen so that the most frequent single-scenario optimum
(y = 0) is the worst decision for the expected cost, which is minimized by
y = 1.
"""

from __future__ import annotations

import numpy as np

from ..core import Dataset, InputError, LinearOracle, Scenario
from ..simplex_lab import CostTable

# Rows are the solutions {0, 1}; columns the scenarios {xi1, xi2, xi3}.
TOY_COSTS = np.array([[4.0, -1.0, -2.0], [0.0, 0.0, 0.0]])
TOY_COSTS.setflags(write=False)

N_TOY_SCENARIOS = TOY_COSTS.shape[1]


def toy_oracle(theta: float, kappa: float, scenario_index: int) -> int:
    """argmin over y in {0, 1} of cost[y][j] - kappa * theta * y (ties -> 0)."""
    if scenario_index not in range(N_TOY_SCENARIOS):
        raise InputError(f"toy scenario index must be in 0..{N_TOY_SCENARIOS - 1}")
    objective_0 = TOY_COSTS[0, scenario_index]
    objective_1 = TOY_COSTS[1, scenario_index] - kappa * theta
    return 1 if objective_1 < objective_0 else 0


class ToyOracle(LinearOracle):
    """Linear oracle for the one-dimensional set Y = {0, 1}."""

    def argmax_linear(self, theta: np.ndarray) -> np.ndarray:
        return np.array([1.0]) if float(theta[0]) > 0.0 else np.array([0.0])

    def argmax_linear_many(self, thetas: np.ndarray) -> np.ndarray:
        return (np.asarray(thetas, dtype=float) > 0.0).astype(float)

    def argmin_shifted(self, theta_tilde, kappa, scenario: Scenario) -> np.ndarray:
        j = int(scenario.noise_payload)
        return np.array([float(toy_oracle(float(theta_tilde[0]), kappa, j))])

    def argmin_shifted_many(self, theta_tildes, kappa, scenario: Scenario) -> np.ndarray:
        j = int(scenario.noise_payload)
        # y = 1 strictly wins iff kappa * theta_tilde > cost(1) - cost(0).
        margin = TOY_COSTS[1, j] - TOY_COSTS[0, j]
        wins = kappa * np.asarray(theta_tildes, dtype=float) > margin
        return wins.astype(float)


def toy_scenarios() -> list[Scenario]:
    """The three tabular scenarios, each with the constant feature 1."""
    feats = np.array([[1.0]])
    return [Scenario(context_id=0, features=feats, noise_payload=j)
            for j in range(N_TOY_SCENARIOS)]


def toy_dataset(split_tag: str = "train") -> Dataset:
    return Dataset(tuple(toy_scenarios()), split_tag)


def toy_cost_table() -> CostTable:
    """Cost score vectors over Y = (0, 1) for the exact simplex laboratory."""
    return CostTable(TOY_COSTS.T.copy())


class ToyEvaluator:
    """True cost and per-scenario anticipative optimum for the toy problem."""

    def policy_cost(self, y: np.ndarray, scenario: Scenario) -> float:
        j = int(scenario.noise_payload)
        return float(TOY_COSTS[int(round(float(y[0]))), j])

    def anticipative_cost(self, scenario: Scenario) -> float:
        j = int(scenario.noise_payload)
        return float(TOY_COSTS[:, j].min())
