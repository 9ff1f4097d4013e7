"""Gauss-Legendre quadrature on the reference interval [-1/2, 1/2].

Nodes and weights are computed at startup by Newton iteration on the roots
of the Legendre polynomials, so rules of any order are available without
tabulated constants.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_NEWTON_TOL = 1e-15


@dataclass(frozen=True)
class Quadrature1D:
    """A q-point Gauss rule on [-1/2, 1/2]; weights sum to one."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray


def _legendre_with_derivative(q: int, x: np.ndarray):
    """Values of P_q and P_q' on [-1, 1] by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    if q == 0:
        return p_prev, np.zeros_like(x)
    for n in range(2, q + 1):
        p_prev, p = p, ((2 * n - 1) * x * p - (n - 1) * p_prev) / n
    dp = q * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_rule(q: int) -> Quadrature1D:
    """Gauss-Legendre rule with q points, exact for degree <= 2q - 1."""
    if q < 1:
        raise ConfigError(f"quadrature order must be >= 1, got {q}")
    k = np.arange(q)
    x = np.cos(np.pi * (4 * k + 3) / (4 * q + 2))
    for _ in range(100):
        p, dp = _legendre_with_derivative(q, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    _, dp = _legendre_with_derivative(q, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    # affine map [-1, 1] -> [-1/2, 1/2] halves both nodes and weights
    return Quadrature1D(order=q, nodes=x[order] / 2.0, weights=w[order] / 2.0)


def tensor_rule(rule: Quadrature1D):
    """Tensor-product points (q^2, 2) and weights (q^2,) on [-1/2, 1/2]^2.

    Ordering is x-major: point i*q + j sits at (nodes[i], nodes[j]).
    """
    q = rule.order
    px, py = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    points = np.column_stack([px.ravel(), py.ravel()])
    weights = np.outer(rule.weights, rule.weights).ravel()
    assert points.shape == (q * q, 2)
    return points, weights
