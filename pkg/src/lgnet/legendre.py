"""Legendre polynomials and Gauss-Legendre-Lobatto quadrature on [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NonConvergence",
    "QuadratureRule",
    "legendre_eval",
    "legendre_deriv",
    "legendre_table",
    "gll_rule",
    "integrate",
]

NEWTON_TOL = 1e-14
NEWTON_MAXITER = 100


class NonConvergence(RuntimeError):
    """Newton iteration for the GLL nodes did not reach tolerance."""


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)

    @property
    def exactness(self) -> int:
        """Highest polynomial degree integrated exactly."""
        return 2 * self.order - 3


def _check_domain(x) -> None:
    if __debug__ and np.any(np.abs(np.asarray(x)) > 1.0 + 1e-12):
        raise ValueError("Legendre evaluation requested outside [-1, 1]")


def legendre_eval(n: int, x):
    """L_n(x) by the forward three-term recurrence. Works on scalars and arrays."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    _check_domain(x)
    x = np.asarray(x, dtype=float)
    p_prev, p = np.ones_like(x), x.copy()
    if n == 0:
        return p_prev[()] if p_prev.ndim == 0 else p_prev
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p[()] if p.ndim == 0 else p


def legendre_deriv(n: int, x):
    """L'_n(x) via L'_{k+1} = L'_{k-1} + (2k+1) L_k, exact endpoint values at x = +-1."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    _check_domain(x)
    x = np.asarray(x, dtype=float)
    _, dL = legendre_table(n, x)
    d = dL[n]
    end = n * (n + 1) / 2.0
    d = np.where(x == 1.0, end, d)
    d = np.where(x == -1.0, end * (-1.0) ** (n - 1), d)
    return d[()] if d.ndim == 0 else d


def legendre_table(nmax: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of L_0..L_nmax at x.

    Returns arrays of shape ``(nmax + 1,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    L = np.empty((nmax + 1,) + x.shape)
    dL = np.empty_like(L)
    L[0] = 1.0
    dL[0] = 0.0
    if nmax >= 1:
        L[1] = x
        dL[1] = 1.0
    for k in range(1, nmax):
        L[k + 1] = ((2 * k + 1) * x * L[k] - k * L[k - 1]) / (k + 1)
        dL[k + 1] = dL[k - 1] + (2 * k + 1) * L[k]
    return L, dL


def gll_rule(Q: int) -> QuadratureRule:
    """Q-point Gauss-Legendre-Lobatto rule, exact for degree <= 2Q - 3."""
    if Q < 2:
        raise ValueError("GLL rule needs at least 2 nodes")
    n = Q - 1
    nodes = -np.cos(np.pi * np.arange(Q) / n)
    nodes[0], nodes[-1] = -1.0, 1.0
    x = nodes[1:-1].copy()
    if x.size:
        for _ in range(NEWTON_MAXITER):
            L, dL = legendre_table(n, x)
            # L''_n from the Legendre ODE, valid away from the endpoints
            d2 = (2.0 * x * dL[n] - n * (n + 1) * L[n]) / (1.0 - x * x)
            dx = dL[n] / d2
            x -= dx
            if np.max(np.abs(dx)) < NEWTON_TOL:
                break
        else:
            raise NonConvergence(f"GLL Newton iteration failed for Q={Q}")
        # symmetrize to remove one-ulp drift between mirrored roots
        x = 0.5 * (x - x[::-1])
        nodes[1:-1] = x
    Ln = legendre_table(n, nodes)[0][n]
    weights = 2.0 / (Q * n * Ln**2)
    return QuadratureRule(nodes=nodes, weights=weights)


def integrate(rule: QuadratureRule, g: Callable[[np.ndarray], np.ndarray]) -> float:
    """Apply the rule to ``g``; ``g`` is called once on the full node vector."""
    vals = np.broadcast_to(np.asarray(g(rule.nodes), dtype=float), rule.nodes.shape)
    return float(rule.weights @ vals)
