"""Residual-minimization losses for the coefficient network, and the training loop.

The empirical loss is

    L^M(theta) = |Omega| / M * sum_m | A alpha_theta(omega_m) - F(omega_m) |^2

with A = S + nu M. ``weak_form_loss`` evaluates the same quantity from the
reconstructed solution by quadrature, without touching A.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import network as nn
from .errors import DimensionMismatch
from .forcing import SampleBatch
from .galerkin import (
    GalerkinSystem,
    GalerkinSystem2D,
    basis_table,
    default_quadrature_order,
    load_vector,
    load_vector_2d,
    solve_exact,
    solve_exact_2d,
)
from .legendre import QuadratureRule, gll_rule
from .optim import AdamState, LBFGSState, strong_wolfe

__all__ = [
    "LossConfig",
    "TrainConfig",
    "TrainRecord",
    "Termination",
    "make_loss_config",
    "residual",
    "loss_from_coefficients",
    "empirical_loss",
    "weak_form_loss",
    "loss_gradient",
    "exact_coefficients",
    "auto_c_alpha",
    "train",
    "population_loss_mc",
    "quadrature_self_check",
]

System = GalerkinSystem | GalerkinSystem2D


@dataclass(eq=False)
class LossConfig:
    sys: System
    rule: QuadratureRule
    batch: SampleBatch
    F: np.ndarray  # (M, n) load vectors, computed once
    measure: float

    @property
    def M(self) -> int:
        return len(self.batch)


def make_loss_config(sys: System, batch: SampleBatch, rule: QuadratureRule | None = None) -> LossConfig:
    spec = sys.spec
    if rule is None:
        rule = gll_rule(default_quadrature_order(spec.N))
    if rule.order < spec.N + 3:
        raise ValueError(f"quadrature order {rule.order} < N + 3 = {spec.N + 3}")
    vals = batch.nodal_values(rule)
    if isinstance(sys, GalerkinSystem2D):
        F = np.stack([load_vector_2d(spec, v, rule) for v in vals])
    else:
        F = load_vector(spec, vals, rule)
    F.flags.writeable = False
    return LossConfig(sys=sys, rule=rule, batch=batch, F=F, measure=batch.family.measure)


def residual(sys: System, alpha: np.ndarray, F: np.ndarray) -> np.ndarray:
    """A alpha - F via the structured matvec (banded in 1D, Kronecker in 2D)."""
    alpha = np.asarray(alpha, dtype=float)
    F = np.asarray(F, dtype=float)
    if alpha.shape != F.shape:
        raise DimensionMismatch(f"alpha {alpha.shape} vs F {F.shape}")
    return sys.matvec(alpha) - F


def loss_from_coefficients(alpha: np.ndarray, cfg: LossConfig) -> float:
    """Empirical loss for given per-sample coefficients, shape (M, n)."""
    R = residual(cfg.sys, alpha, cfg.F)
    return float(cfg.measure / cfg.M * np.sum(R * R))


def empirical_loss(params: nn.NetworkParams, cfg: LossConfig) -> float:
    return loss_from_coefficients(nn.forward_batch(params, cfg.batch.omega), cfg)


def weak_form_loss(params: nn.NetworkParams | np.ndarray, cfg: LossConfig) -> float:
    """Sum of squared weak residuals by quadrature of the reconstructed solution.

    ``params`` may also be an (M, n) array of coefficients. Slow; intended
    as an independent check on ``empirical_loss``.
    """
    if isinstance(params, nn.NetworkParams):
        alpha = nn.forward_batch(params, cfg.batch.omega)
    else:
        alpha = np.asarray(params, dtype=float)
    spec, rule, nu = cfg.sys.spec, cfg.rule, cfg.sys.nu
    w = rule.weights
    fvals = cfg.batch.nodal_values(rule)
    phi, dphi = basis_table(spec, rule.nodes)  # (n, Q)
    if isinstance(cfg.sys, GalerkinSystem2D):
        n = spec.size
        C = alpha.reshape(-1, n, n)
        u = np.einsum("mij,iq,jr->mqr", C, phi, phi)
        ux = np.einsum("mij,iq,jr->mqr", C, dphi, phi)
        uy = np.einsum("mij,iq,jr->mqr", C, phi, dphi)
        W = np.outer(w, w)
        r = (
            np.einsum("mqr,qr,iq,jr->mij", ux, W, dphi, phi)
            + np.einsum("mqr,qr,iq,jr->mij", uy, W, phi, dphi)
            + nu * np.einsum("mqr,qr,iq,jr->mij", u, W, phi, phi)
            - np.einsum("mqr,qr,iq,jr->mij", fvals, W, phi, phi)
        ).reshape(len(alpha), -1)
    else:
        u = alpha @ phi  # (M, Q)
        du = alpha @ dphi
        r = (du * w) @ dphi.T + nu * (u * w) @ phi.T - (fvals * w) @ phi.T
    return float(cfg.measure / len(alpha) * np.sum(r * r))


def _value_and_grad(params: nn.NetworkParams, cfg: LossConfig) -> tuple[float, nn.Gradient]:
    X = cfg.batch.omega
    alpha, cache = nn.forward_with_cache(params, X)
    R = residual(cfg.sys, alpha, cfg.F)
    scale = cfg.measure / cfg.M
    loss = float(scale * np.sum(R * R))
    # d/dalpha |A alpha - F|^2 = 2 A^T R and A is symmetric
    G = 2.0 * scale * cfg.sys.matvec(R)
    grad = nn.backward(params, X, G, cache=cache)
    grad.loss = loss
    return loss, grad


def loss_gradient(params: nn.NetworkParams, cfg: LossConfig) -> nn.Gradient:
    return _value_and_grad(params, cfg)[1]


def exact_coefficients(cfg: LossConfig) -> np.ndarray:
    """alpha*(omega_m) = A^{-1} F(omega_m) for every sample, shape (M, n)."""
    if isinstance(cfg.sys, GalerkinSystem2D):
        return np.stack([solve_exact_2d(cfg.sys, F) for F in cfg.F])
    return solve_exact(cfg.sys, cfg.F)


def auto_c_alpha(cfg: LossConfig, factor: float = 2.0, per_mode: bool = True) -> float | tuple[float, ...]:
    """Output bound from the exact training coefficients.

    Scalar: factor * max_m ||A^{-1} F(omega_m)||_inf. Per mode: the same
    maximum taken separately for each component (floored at 1e-12 of the
    largest so no component bound is zero).
    """
    amax = np.max(np.abs(exact_coefficients(cfg)), axis=0)
    top = float(amax.max())
    if top == 0.0:
        return 1.0
    if not per_mode:
        return factor * top
    return tuple(float(c) for c in factor * np.maximum(amax, 1e-12 * top))


def quadrature_self_check(sys: System, batch: SampleBatch, Q: int) -> float:
    """Max change in F over the batch when the quadrature order is doubled."""
    F1 = make_loss_config(sys, batch, gll_rule(Q)).F
    F2 = make_loss_config(sys, batch, gll_rule(2 * Q)).F
    return float(np.max(np.abs(F1 - F2)))


def population_loss_mc(params: nn.NetworkParams, cfg_test: LossConfig, train_seed: int | None = None) -> float:
    """Monte Carlo estimate of the population loss on a held-out batch."""
    if train_seed is not None and cfg_test.batch.seed == train_seed:
        raise ValueError("test batch must use a seed disjoint from the training seed")
    return empirical_loss(params, cfg_test)


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------


class Termination(str, enum.Enum):
    EPOCHS = "epochs"
    LOSS_TOL = "loss_tol"
    GRAD_TOL = "grad_tol"
    LINE_SEARCH_FAIL = "line_search_fail"


@dataclass
class TrainConfig:
    optimizer: str = "lbfgs"  # "lbfgs" or "adam"
    epochs: int = 500
    seed: int = 0
    convergence_tol: float = 1e-9
    checkpoint_every: int = 0  # 0 disables
    history: int = 10
    max_linesearch: int = 25
    adam_step: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    adam_fallback: bool = True

    def __post_init__(self):
        if self.optimizer not in ("lbfgs", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")


@dataclass
class TrainState:
    """Everything needed to continue a run exactly where it stopped."""

    epoch: int = 0
    optimizer: str = "lbfgs"
    lbfgs: LBFGSState = field(default_factory=LBFGSState)
    adam: AdamState = field(default_factory=AdamState)
    loss_history: list[float] = field(default_factory=list)
    epoch_times: list[float] = field(default_factory=list)
    switched_to_adam_at: int | None = None

    def save(self, path: str | Path) -> None:
        arrays = {f"s{i}": s for i, s in enumerate(self.lbfgs.s)}
        arrays |= {f"y{i}": y for i, y in enumerate(self.lbfgs.y)}
        if self.adam.m is not None:
            arrays |= {"adam_m": self.adam.m, "adam_v": self.adam.v}
        meta = {
            "epoch": self.epoch,
            "optimizer": self.optimizer,
            "history": self.lbfgs.history,
            "pairs": len(self.lbfgs.s),
            "adam_t": self.adam.t,
            "adam": [self.adam.step, self.adam.beta1, self.adam.beta2, self.adam.eps],
            "switched_to_adam_at": self.switched_to_adam_at,
        }
        np.savez(
            path,
            meta=np.array(json.dumps(meta)),
            loss_history=np.asarray(self.loss_history, dtype=float),
            epoch_times=np.asarray(self.epoch_times, dtype=float),
            **arrays,
        )

    @classmethod
    def load(cls, path: str | Path) -> TrainState:
        with np.load(path) as z:
            meta = json.loads(str(z["meta"]))
            k = meta["pairs"]
            lb = LBFGSState(meta["history"], [z[f"s{i}"] for i in range(k)], [z[f"y{i}"] for i in range(k)])
            step, b1, b2, eps = meta["adam"]
            adam = AdamState(step, b1, b2, eps, t=meta["adam_t"])
            if "adam_m" in z:
                adam.m, adam.v = z["adam_m"], z["adam_v"]
            return cls(
                epoch=meta["epoch"],
                optimizer=meta["optimizer"],
                lbfgs=lb,
                adam=adam,
                loss_history=z["loss_history"].tolist(),
                epoch_times=z["epoch_times"].tolist(),
                switched_to_adam_at=meta["switched_to_adam_at"],
            )


@dataclass
class TrainRecord:
    loss_history: list[float]
    epoch_times: list[float]
    params: nn.NetworkParams
    termination: Termination
    final_grad_norm: float
    state: TrainState = field(repr=False)

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1] if self.loss_history else float("nan")

    def to_json(self, config: dict | None = None) -> str:
        return json.dumps(
            {
                "loss_history": self.loss_history,
                "epoch_times": self.epoch_times,
                "termination": self.termination.value,
                "final_loss": self.final_loss,
                "final_grad_norm": self.final_grad_norm,
                "epochs_run": len(self.loss_history),
                "switched_to_adam_at": self.state.switched_to_adam_at,
                "config": config or {},
            },
            indent=2,
        )


def train(
    params: nn.NetworkParams,
    cfg: LossConfig,
    tcfg: TrainConfig,
    state: TrainState | None = None,
    on_checkpoint: Callable[[nn.NetworkParams, TrainState], None] | None = None,
) -> TrainRecord:
    """Full-batch minimization of the empirical loss.

    One epoch is one optimizer iteration. ``state`` resumes a previous run;
    ``tcfg.epochs`` is the total epoch count including resumed ones.
    """
    arch = params.arch

    def fg(theta):
        loss, grad = _value_and_grad(nn.unflatten(theta, arch), cfg)
        return loss, nn.flatten(grad)

    if state is None:
        state = TrainState(optimizer=tcfg.optimizer, lbfgs=LBFGSState(tcfg.history))
        state.adam = AdamState(tcfg.adam_step, tcfg.beta1, tcfg.beta2, tcfg.eps)
    theta = nn.flatten(params)
    f, g = fg(theta)
    termination = Termination.EPOCHS
    retried = False
    while state.epoch < tcfg.epochs:
        gnorm = float(np.linalg.norm(g))
        if f < tcfg.convergence_tol:
            termination = Termination.LOSS_TOL
            break
        if gnorm < tcfg.convergence_tol:
            termination = Termination.GRAD_TOL
            break
        t0 = time.perf_counter()
        if state.optimizer == "lbfgs":
            d = state.lbfgs.direction(g)
            if not state.lbfgs.s:
                step = min(1.0, 1.0 / max(np.abs(g).sum(), 1e-300))
            else:
                step = 1.0
            ls = strong_wolfe(fg, theta, f, g, d, step=step, max_evals=tcfg.max_linesearch)
            if ls is None:
                if state.lbfgs.s and not retried:
                    # stale curvature pairs: restart from steepest descent
                    state.lbfgs.reset()
                    retried = True
                    continue
                if tcfg.adam_fallback:
                    state.optimizer = "adam"
                    state.switched_to_adam_at = state.epoch
                    continue
                termination = Termination.LINE_SEARCH_FAIL
                break
            retried = False
            theta_new = theta + ls.step * d
            state.lbfgs.push(theta_new - theta, ls.g - g)
            theta, f, g = theta_new, ls.f, ls.g
        else:
            theta = state.adam.update(theta, g)
            f, g = fg(theta)
        state.epoch += 1
        state.loss_history.append(f)
        state.epoch_times.append(time.perf_counter() - t0)
        if on_checkpoint and tcfg.checkpoint_every and state.epoch % tcfg.checkpoint_every == 0:
            on_checkpoint(nn.unflatten(theta, arch), state)
    else:
        if f < tcfg.convergence_tol:
            termination = Termination.LOSS_TOL
    return TrainRecord(
        loss_history=list(state.loss_history),
        epoch_times=list(state.epoch_times),
        params=nn.unflatten(theta, arch),
        termination=termination,
        final_grad_norm=float(np.linalg.norm(g)),
        state=state,
    )
