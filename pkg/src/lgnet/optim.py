"""Full-batch optimizers on flat parameter vectors: L-BFGS with a strong-Wolfe
line search, and Adam.

Both work on ``fg(x) -> (f, g)`` callables and keep their state in plain
arrays so a run can be checkpointed and resumed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ValueGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class LineSearchResult:
    step: float
    f: float
    g: np.ndarray
    evals: int


def _cubic_min(a, fa, ga, b, fb, gb, lo, hi):
    """Minimizer of the cubic through (a, fa, ga), (b, fb, gb), clipped to [lo, hi]."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0 or not np.isfinite(disc):
        return 0.5 * (lo + hi)
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return 0.5 * (lo + hi)
    t = b - (b - a) * (gb + d2 - d1) / denom
    if not np.isfinite(t):
        return 0.5 * (lo + hi)
    return min(max(t, lo), hi)


def strong_wolfe(
    fg: ValueGrad,
    x: np.ndarray,
    f0: float,
    g0: np.ndarray,
    d: np.ndarray,
    step: float = 1.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 25,
    step_max: float = 1e10,
) -> LineSearchResult | None:
    """Bracketing + zoom line search (cubic interpolation, bisection safeguard).

    Returns None when no step satisfying both Wolfe conditions was found
    within ``max_evals`` function evaluations.
    """
    dphi0 = float(g0 @ d)
    if not dphi0 < 0:
        return None
    evals = 0
    t_prev, f_prev, dphi_prev = 0.0, f0, dphi0
    t = step
    lo = hi = None
    while evals < max_evals:
        f, g = fg(x + t * d)
        evals += 1
        dphi = float(g @ d)
        if not np.isfinite(f):
            # overshoot into a non-finite region: shrink
            t = 0.5 * (t_prev + t)
            continue
        if f > f0 + c1 * t * dphi0 or (evals > 1 and f >= f_prev):
            lo, hi = (t_prev, f_prev, dphi_prev), (t, f, dphi)
            break
        if abs(dphi) <= -c2 * dphi0:
            return LineSearchResult(t, f, g, evals)
        if dphi >= 0:
            lo, hi = (t, f, dphi), (t_prev, f_prev, dphi_prev)
            break
        t_new = _cubic_min(t_prev, f_prev, dphi_prev, t, f, dphi, t + 1.01 * (t - t_prev), min(10 * t, step_max))
        t_prev, f_prev, dphi_prev = t, f, dphi
        t = t_new
    else:
        return None

    # zoom: lo always holds the best point satisfying sufficient decrease
    while evals < max_evals:
        (ta, fa, ga), (tb, fb, gb) = lo, hi
        width = abs(tb - ta)
        if width < 1e-14 * max(1.0, abs(ta)):
            break
        left, right = min(ta, tb), max(ta, tb)
        t = _cubic_min(ta, fa, ga, tb, fb, gb, left + 0.1 * width, right - 0.1 * width)
        f, g = fg(x + t * d)
        evals += 1
        dphi = float(g @ d)
        if not np.isfinite(f) or f > f0 + c1 * t * dphi0 or f >= fa:
            hi = (t, f, dphi)
            continue
        if abs(dphi) <= -c2 * dphi0:
            return LineSearchResult(t, f, g, evals)
        if dphi * (tb - ta) >= 0:
            hi = lo
        lo = (t, f, dphi)
    return None


@dataclass
class LBFGSState:
    history: int = 10
    s: list[np.ndarray] = field(default_factory=list)
    y: list[np.ndarray] = field(default_factory=list)

    def push(self, s: np.ndarray, y: np.ndarray) -> None:
        if s @ y <= 1e-10 * np.sqrt((s @ s) * (y @ y)):
            return  # skip pairs that would break positive-definiteness
        self.s.append(s)
        self.y.append(y)
        if len(self.s) > self.history:
            self.s.pop(0)
            self.y.pop(0)

    def reset(self) -> None:
        self.s.clear()
        self.y.clear()

    def direction(self, g: np.ndarray) -> np.ndarray:
        """-H g by the two-loop recursion."""
        q = g.copy()
        rhos = [1.0 / (y @ s) for s, y in zip(self.s, self.y)]
        alphas = []
        for s, y, rho in zip(reversed(self.s), reversed(self.y), reversed(rhos)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if self.s:
            s, y = self.s[-1], self.y[-1]
            q *= (s @ y) / (y @ y)
        for s, y, rho, a in zip(self.s, self.y, rhos, reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        return -q


@dataclass
class AdamState:
    step: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def update(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return x - self.step * mhat / (np.sqrt(vhat) + self.eps)
