"""Error metrics, held-out evaluation, convergence sweeps and spectrum diagnostics."""

from __future__ import annotations

import csv
import enum
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import network as nn
from .errors import DimensionMismatch
from .forcing import ForcingFamily, sample_batch
from .galerkin import GalerkinSystem, GalerkinSystem2D, spectrum_bounds
from .training import (
    TrainConfig,
    TrainRecord,
    auto_c_alpha,
    exact_coefficients,
    make_loss_config,
    train,
)

__all__ = [
    "Norm",
    "ErrorReport",
    "SweepKind",
    "SweepBase",
    "SweepPoint",
    "SweepResult",
    "l2_norm_sq",
    "h1_seminorm_sq",
    "relative_error",
    "evaluate_model",
    "evaluate_predictions",
    "run_sweep",
    "spectrum_report",
]

log = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-14


class Norm(enum.Enum):
    L2 = "l2"
    H1SEMI = "h1semi"
    H1 = "h1"


def _quad(mat: np.ndarray, c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != mat.shape[0]:
        raise DimensionMismatch(f"coefficient length {c.shape[-1]} != {mat.shape[0]}")
    return np.einsum("...i,ij,...j->...", c, mat, c)


def _mass(sys) -> np.ndarray:
    return sys.mass_dense() if isinstance(sys, GalerkinSystem2D) else sys.M


def _stiff(sys) -> np.ndarray:
    return sys.stiff_dense() if isinstance(sys, GalerkinSystem2D) else sys.S


def l2_norm_sq(sys: GalerkinSystem, c: np.ndarray):
    """||sum_k c_k phi_k||^2_{L2} = c^T M c (also row-wise for (m, n) input)."""
    return _quad(_mass(sys), c)


def h1_seminorm_sq(sys: GalerkinSystem, c: np.ndarray):
    """|sum_k c_k phi_k|^2_{H1} = c^T S c."""
    return _quad(_stiff(sys), c)


def _form(sys: GalerkinSystem, norm: Norm) -> np.ndarray:
    norm = Norm(norm)
    if norm is Norm.L2:
        return _mass(sys)
    if norm is Norm.H1SEMI:
        return _stiff(sys)
    return _stiff(sys) + _mass(sys)


def relative_error(sys: GalerkinSystem, alpha_star, alpha_hat, norm: Norm | str = Norm.L2):
    """sqrt(q(a* - a^)) / sqrt(q(a*)); inf where q(a*) < 1e-14 (degenerate sample)."""
    Q = _form(sys, Norm(norm))
    alpha_star = np.asarray(alpha_star, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    if alpha_star.shape != alpha_hat.shape:
        raise DimensionMismatch("coefficient arrays differ in shape")
    num = _quad(Q, alpha_star - alpha_hat)
    den = _quad(Q, alpha_star)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den < DEGENERATE_TOL, np.inf, np.sqrt(np.maximum(num, 0.0) / np.where(den > 0, den, 1.0)))
    return out[()] if out.ndim == 0 else out


@dataclass
class ErrorReport:
    rel_l2: np.ndarray
    rel_h1semi: np.ndarray
    rel_h1: np.ndarray
    # Monte Carlo estimate of ||u_N - u_hat||^2 in L2(Omega; L2(I)), |Omega| included
    abs_l2_sq: float
    abs_h1_sq: float
    n_degenerate: int
    seed: int
    M_test: int
    sweep_value: int | None = None

    @staticmethod
    def _stats(v: np.ndarray) -> dict:
        v = v[np.isfinite(v)]
        if v.size == 0:
            return {"mean": float("nan"), "median": float("nan"), "max": float("nan")}
        return {"mean": float(v.mean()), "median": float(np.median(v)), "max": float(v.max())}

    @property
    def mean_rel_l2(self) -> float:
        return self._stats(self.rel_l2)["mean"]

    @property
    def median_rel_l2(self) -> float:
        return self._stats(self.rel_l2)["median"]

    @property
    def max_rel_l2(self) -> float:
        return self._stats(self.rel_l2)["max"]

    @property
    def mean_rel_h1semi(self) -> float:
        return self._stats(self.rel_h1semi)["mean"]

    def summary(self) -> dict:
        return {
            "rel_l2": self._stats(self.rel_l2),
            "rel_h1semi": self._stats(self.rel_h1semi),
            "rel_h1": self._stats(self.rel_h1),
            "abs_l2_sq": self.abs_l2_sq,
            "abs_h1_sq": self.abs_h1_sq,
            "n_degenerate": self.n_degenerate,
            "seed": self.seed,
            "M_test": self.M_test,
            "sweep_value": self.sweep_value,
        }

    def to_json(self) -> str:
        d = self.summary()
        d["per_sample_rel_l2"] = [float(x) for x in self.rel_l2]
        return json.dumps(d, indent=2)


def evaluate_predictions(
    sys: GalerkinSystem, alpha_star: np.ndarray, alpha_hat: np.ndarray, measure: float, seed: int
) -> ErrorReport:
    rel = {n: relative_error(sys, alpha_star, alpha_hat, n) for n in Norm}
    e = alpha_star - alpha_hat
    return ErrorReport(
        rel_l2=rel[Norm.L2],
        rel_h1semi=rel[Norm.H1SEMI],
        rel_h1=rel[Norm.H1],
        abs_l2_sq=float(measure * np.mean(l2_norm_sq(sys, e))),
        abs_h1_sq=float(measure * np.mean(_quad(_form(sys, Norm.H1), e))),
        n_degenerate=int(np.sum(~np.isfinite(rel[Norm.L2]))),
        seed=seed,
        M_test=len(alpha_star),
    )


def evaluate_model(
    params: nn.NetworkParams,
    sys: GalerkinSystem,
    family: ForcingFamily,
    M_test: int,
    seed: int,
    rule=None,
) -> ErrorReport:
    """Relative errors of the network against exact solves on fresh samples."""
    batch = sample_batch(family, M_test, seed)
    cfg = make_loss_config(sys, batch, rule)
    alpha_star = exact_coefficients(cfg)
    alpha_hat = nn.forward_batch(params, batch.omega)
    return evaluate_predictions(sys, alpha_star, alpha_hat, family.measure, seed)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


class SweepKind(enum.Enum):
    N_SWEEP = "n"
    M_SWEEP = "m"


@dataclass
class SweepBase:
    """Everything a sweep point needs besides the swept value."""

    sys: GalerkinSystem
    family: ForcingFamily
    train: TrainConfig
    M: int = 2000  # fixed M for the n-sweep
    hidden: tuple[int, ...] = (128,) * 5  # fixed hidden widths for the M-sweep
    activation: nn.Activation = nn.Activation.TANH
    c_alpha: str | float = "auto"  # "auto" (per mode), "auto_scalar", or a number
    normalize_inputs: bool = True
    train_seed: int = 1
    init_seed: int = 0
    test_seed: int = 12345
    M_test: int = 200
    rule: object = None


@dataclass
class SweepPoint:
    value: int
    report: ErrorReport | None
    final_train_loss: float
    wall_time_s: float
    termination: str
    epochs_run: int
    error: str | None = None
    record: TrainRecord | None = field(default=None, repr=False)


@dataclass
class SweepResult:
    kind: SweepKind
    points: list[SweepPoint]

    CSV_COLUMNS = (
        "sweep_value",
        "mean_rel_l2",
        "median_rel_l2",
        "max_rel_l2",
        "mean_rel_h1semi",
        "final_train_loss",
        "wall_time_s",
    )

    def rows(self) -> list[dict]:
        out = []
        for p in self.points:
            r = p.report
            out.append(
                {
                    "sweep_value": p.value,
                    "mean_rel_l2": r.mean_rel_l2 if r else float("nan"),
                    "median_rel_l2": r.median_rel_l2 if r else float("nan"),
                    "max_rel_l2": r.max_rel_l2 if r else float("nan"),
                    "mean_rel_h1semi": r.mean_rel_h1semi if r else float("nan"),
                    "final_train_loss": p.final_train_loss,
                    "wall_time_s": p.wall_time_s,
                }
            )
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.CSV_COLUMNS)
            w.writeheader()
            w.writerows(self.rows())

    def to_json(self) -> str:
        pts = []
        for p, row in zip(self.points, self.rows()):
            row = dict(row)
            row.update(termination=p.termination, epochs_run=p.epochs_run, error=p.error)
            if p.report is not None:
                row["report"] = p.report.summary()
            pts.append(row)
        return json.dumps({"kind": self.kind.value, "points": pts}, indent=2)


def _arch_for(base: SweepBase, kind: SweepKind, value: int, cfg) -> nn.Architecture:
    d, n_out = base.family.d, base.sys.size
    hidden = (value,) if kind is SweepKind.N_SWEEP else tuple(base.hidden)
    if base.c_alpha == "auto":
        C = auto_c_alpha(cfg, per_mode=True)
    elif base.c_alpha == "auto_scalar":
        C = auto_c_alpha(cfg, per_mode=False)
    else:
        C = float(base.c_alpha)
    rng = (base.family.a, base.family.b) if base.normalize_inputs else None
    return nn.Architecture((d, *hidden, n_out), base.activation, C, True, rng)


def run_point(base: SweepBase, kind: SweepKind, value: int) -> SweepPoint:
    M = base.M if kind is SweepKind.N_SWEEP else value
    t0 = time.perf_counter()
    try:
        cfg = make_loss_config(base.sys, sample_batch(base.family, M, base.train_seed), base.rule)
        arch = _arch_for(base, kind, value, cfg)
        rec = train(nn.init_params(arch, base.init_seed), cfg, base.train)
        report = evaluate_model(rec.params, base.sys, base.family, base.M_test, base.test_seed, base.rule)
        report.sweep_value = value
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("sweep point %s=%d failed: %s", kind.value, value, exc)
        return SweepPoint(value, None, float("nan"), time.perf_counter() - t0, "failed", 0, error=str(exc))
    return SweepPoint(
        value=value,
        report=report,
        final_train_loss=rec.final_loss,
        wall_time_s=time.perf_counter() - t0,
        termination=rec.termination.value,
        epochs_run=len(rec.loss_history),
        record=rec,
    )


def run_sweep(kind: SweepKind | str, grid, base: SweepBase, jobs: int = 1) -> SweepResult:
    """Train and evaluate one model per grid value.

    n-sweep: two-layer networks of width n at fixed M. M-sweep: the fixed
    ``base.hidden`` architecture trained on M samples. Failed points are
    recorded, not raised.
    """
    kind = SweepKind(kind)
    grid = [int(v) for v in grid]
    if not grid:
        raise ValueError("empty sweep grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("sweep grid must be strictly increasing")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            points = list(ex.map(run_point, [base] * len(grid), [kind] * len(grid), grid))
    else:
        points = []
        for v in grid:
            log.info("sweep %s=%d", kind.value, v)
            points.append(run_point(base, kind, v))
    return SweepResult(kind, points)


def spectrum_report(sys: GalerkinSystem) -> dict:
    rho_min, rho_max = spectrum_bounds(sys)
    return {"rho_min": rho_min, "rho_max": rho_max, "condition_number": rho_max / rho_min}
