"""Regularization on distribution simplexes and moment polytopes.

Exact machinery (negentropy / squared-Euclidean on explicitly enumerated
sets): values, conjugates, gradients of conjugates, and Fenchel-Young
losses.  Monte-Carlo machinery (sparse perturbation): perturbed maxima and
maximizer moments through a linear oracle, with explicit rng streams so
that value and gradient estimators can share draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    InputError,
    LinearOracle,
    RngStream,
    Scenario,
    ensure_finite,
    project_to_simplex,
)

NEGENTROPY = "negentropy"
SQUARED_L2 = "squared_l2"
SPARSE_PERTURBATION = "sparse_perturbation"

_EXACT_TAGS = (NEGENTROPY, SQUARED_L2)


@dataclass(frozen=True)
class RegularizerKind:
    """Tagged regularizer choice.

    ``epsilon`` (perturbation scale) and ``nb_samples`` (Monte-Carlo sample
    count) are meaningful for the sparse perturbation only.
    """

    tag: str
    epsilon: float = 1.0
    nb_samples: int = 1

    def __post_init__(self):
        if self.tag not in (NEGENTROPY, SQUARED_L2, SPARSE_PERTURBATION):
            raise InputError(f"unknown regularizer tag {self.tag!r}")
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")
        if self.nb_samples < 1:
            raise InputError("nb_samples must be >= 1")

    @staticmethod
    def negentropy() -> "RegularizerKind":
        return RegularizerKind(NEGENTROPY)

    @staticmethod
    def squared_l2() -> "RegularizerKind":
        return RegularizerKind(SQUARED_L2)

    @staticmethod
    def sparse_perturbation(epsilon: float, nb_samples: int) -> "RegularizerKind":
        return RegularizerKind(SPARSE_PERTURBATION, epsilon, nb_samples)

    @property
    def is_exact(self) -> bool:
        return self.tag in _EXACT_TAGS


def validate_distribution(q: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Check q is a probability vector (entries >= 0, sums to 1 within tol)."""
    q = ensure_finite(q, "distribution")
    if q.ndim != 1:
        raise InputError("distribution must be one-dimensional")
    if np.any(q < -tol):
        raise InputError("distribution has negative entries")
    if abs(float(q.sum()) - 1.0) > max(tol, 1e-12 * q.size):
        raise InputError(f"distribution sums to {q.sum()!r}, not 1")
    return q


# ---------------------------------------------------------------------------
# Exact maps on explicit sets
# ---------------------------------------------------------------------------

def softmax_distribution(s: np.ndarray) -> np.ndarray:
    """Exponential-family map q_y = exp(s_y - A(s)), computed stably."""
    s = ensure_finite(s, "score")
    shifted = s - s.max()
    e = np.exp(shifted)
    return e / e.sum()


def logsumexp_conjugate(s: np.ndarray) -> float:
    """log sum exp(s): the Fenchel conjugate of the simplex negentropy."""
    s = ensure_finite(s, "score")
    m = float(s.max())
    return m + float(np.log(np.exp(s - m).sum()))


def negentropy_value(q: np.ndarray) -> float:
    """Sum q_y log q_y with the 0 log 0 = 0 convention."""
    q = validate_distribution(q)
    pos = q > 0.0
    return float(np.sum(q[pos] * np.log(q[pos])))


def sparsemax_distribution(s: np.ndarray) -> np.ndarray:
    """Euclidean projection of a score vector onto the simplex."""
    return project_to_simplex(ensure_finite(s, "score"))


def squared_l2_value(q: np.ndarray) -> float:
    q = validate_distribution(q)
    return 0.5 * float(q @ q)


def squared_l2_conjugate(s: np.ndarray) -> float:
    """max over the simplex of <s|q> - ||q||^2/2, via the projection."""
    p = sparsemax_distribution(s)
    return float(s @ p) - 0.5 * float(p @ p)


def omega_value(q: np.ndarray, kind: RegularizerKind) -> float:
    if kind.tag == NEGENTROPY:
        return negentropy_value(q)
    if kind.tag == SQUARED_L2:
        return squared_l2_value(q)
    raise InputError(f"no exact value for regularizer {kind.tag!r}")


def omega_conjugate(s: np.ndarray, kind: RegularizerKind) -> float:
    if kind.tag == NEGENTROPY:
        return logsumexp_conjugate(s)
    if kind.tag == SQUARED_L2:
        return squared_l2_conjugate(s)
    raise InputError(f"no exact conjugate for regularizer {kind.tag!r}")


def omega_conjugate_grad(s: np.ndarray, kind: RegularizerKind) -> np.ndarray:
    """The regularized prediction map: gradient of the conjugate at s."""
    if kind.tag == NEGENTROPY:
        return softmax_distribution(s)
    if kind.tag == SQUARED_L2:
        return sparsemax_distribution(s)
    raise InputError(f"no exact prediction map for regularizer {kind.tag!r}")


def fy_loss_exact(
    s: np.ndarray, target_q: np.ndarray, kind: RegularizerKind
) -> tuple[float, np.ndarray]:
    """Fenchel-Young loss and its score gradient on an explicit set.

    value = Omega*(s) + Omega(target) - <s|target> >= 0, zero exactly when
    the target equals the regularized prediction; gradient is the
    prediction minus the target.  For the negentropy the value is the
    Kullback-Leibler divergence KL(target || softmax(s)).
    """
    s = ensure_finite(s, "score")
    target_q = validate_distribution(target_q)
    if s.shape != target_q.shape:
        raise InputError("score and target dimensions differ")
    value = omega_conjugate(s, kind) + omega_value(target_q, kind) - float(s @ target_q)
    gradient = omega_conjugate_grad(s, kind) - target_q
    return value, gradient


# ---------------------------------------------------------------------------
# Monte-Carlo maps through a linear oracle (sparse perturbation)
# ---------------------------------------------------------------------------

def _standard_normal_draws(rng: RngStream, m: int, d: int) -> np.ndarray:
    return rng.generator().standard_normal((m, d))


def _perturbed_argmax_stats(
    oracle: LinearOracle, theta: np.ndarray, eps: float, m: int, rng: RngStream
) -> tuple[float, np.ndarray]:
    """Shared-draw (value, moment) pair for the perturbed maximum."""
    theta = ensure_finite(theta, "theta")
    if eps <= 0:
        raise InputError("eps must be positive")
    if m < 1:
        raise InputError("sample count must be >= 1")
    z = _standard_normal_draws(rng, m, theta.shape[0])
    tilted = theta[None, :] + eps * z
    ys = oracle.argmax_linear_many(tilted)
    value = float(np.einsum("ij,ij->i", tilted, ys).mean())
    moment = ys.mean(axis=0)
    return value, moment


def perturbed_max_value(
    oracle: LinearOracle, theta: np.ndarray, eps: float, m: int, rng: RngStream
) -> float:
    """Monte-Carlo estimate of E[max_y <theta + eps Z | y>]."""
    value, _ = _perturbed_argmax_stats(oracle, theta, eps, m, rng)
    return value


def perturbed_maximizer_moment(
    oracle: LinearOracle, theta: np.ndarray, eps: float, m: int, rng: RngStream
) -> np.ndarray:
    """Monte-Carlo estimate of E[argmax_y <theta + eps Z | y>]; lies in conv(Y)."""
    _, moment = _perturbed_argmax_stats(oracle, theta, eps, m, rng)
    return moment


def perturbed_fy_gradient(
    oracle: LinearOracle,
    theta: np.ndarray,
    target_mu: np.ndarray,
    eps: float,
    m: int,
    rng: RngStream,
) -> tuple[float, np.ndarray]:
    """Shifted perturbed Fenchel-Young loss and its gradient in theta.

    The loss drops the theta-independent (and intractable) regularizer value
    at the target, hence "shifted"; the gradient is unaffected.  Value and
    gradient are computed from one common set of draws.
    """
    target_mu = ensure_finite(target_mu, "target moment")
    if target_mu.shape != np.shape(theta):
        raise InputError("theta and target dimensions differ")
    value, moment = _perturbed_argmax_stats(oracle, theta, eps, m, rng)
    loss_shifted = value - float(np.dot(theta, target_mu))
    gradient = moment - target_mu
    return loss_shifted, gradient


def perturbed_decomposition_target(
    oracle: LinearOracle,
    theta: np.ndarray,
    scenario: Scenario,
    kappa: float,
    eps: float,
    m: int,
    rng: RngStream,
) -> np.ndarray:
    """Per-scenario primal target: E_Z[argmin_y c(y, xi) - kappa <theta + eps Z | y>].

    Only ever evaluates the cost at combinatorial points, never in the hull
    interior; the returned average lies in conv(Y(x)).
    """
    theta = ensure_finite(theta, "theta")
    if kappa <= 0:
        raise InputError("kappa must be positive")
    if eps <= 0:
        raise InputError("eps must be positive")
    z = _standard_normal_draws(rng, m, theta.shape[0])
    tilted = theta[None, :] + eps * z
    ys = oracle.argmin_shifted_many(tilted, kappa, scenario)
    return ys.mean(axis=0)
