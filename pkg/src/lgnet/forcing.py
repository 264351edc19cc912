"""Parametric forcing families f(x; omega) with omega uniform on [a, b]^d."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .legendre import QuadratureRule

__all__ = [
    "FamilyKind",
    "ForcingFamily",
    "ForcingSample",
    "SampleBatch",
    "GENERATOR_ID",
    "trig_four",
    "register_family",
    "get_family",
    "sample_batch",
    "eval_forcing",
    "eval_forcing_at_nodes",
    "lipschitz_constant",
    "sup_bound",
    "write_batch_csv",
    "read_batch_csv",
]

GENERATOR_ID = "numpy.PCG64"


class FamilyKind(enum.Enum):
    TRIG_FOUR = "trig_four"
    CUSTOM = "custom"


# evaluator(x, omega) -> values; x has shape (Q,) (or (Q, Q) pairs for 2D),
# omega has shape (m, d); result (m,) + x.shape
Evaluator = Callable[..., np.ndarray]


def _trig_four(x: np.ndarray, omega: np.ndarray) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    x = np.asarray(x, dtype=float)
    shape = (-1,) + (1,) * x.ndim
    w1, w2, w3, w4 = (w[:, i].reshape(shape) for i in range(4))
    return w1 * np.sin(2 * np.pi * w2 * x) + w3 * np.cos(2 * np.pi * w4 * x)


@dataclass(frozen=True)
class ForcingFamily:
    kind: FamilyKind
    a: float = 0.0
    b: float = 1.0
    d: int = 4
    name: str = "trig_four"
    spatial_dim: int = 1
    evaluator: Evaluator = field(default=_trig_four, compare=False, repr=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if self.kind is FamilyKind.TRIG_FOUR and self.d != 4:
            raise ValueError("trig_four family has d = 4")
        if self.d < 1:
            raise ValueError("parameter dimension must be positive")

    @property
    def measure(self) -> float:
        """Lebesgue measure of [a, b]^d."""
        return (self.b - self.a) ** self.d

    def __call__(self, x, omega) -> np.ndarray:
        omega = np.atleast_2d(np.asarray(omega, dtype=float))
        return self.evaluator(x, omega)


def trig_four(a: float = 0.0, b: float = 1.0) -> ForcingFamily:
    """omega_1 sin(2 pi omega_2 x) + omega_3 cos(2 pi omega_4 x)."""
    return ForcingFamily(FamilyKind.TRIG_FOUR, a=a, b=b, d=4, name="trig_four")


_REGISTRY: dict[str, tuple[Evaluator, int, int]] = {}


def register_family(name: str, evaluator: Evaluator, d: int, spatial_dim: int = 1) -> None:
    _REGISTRY[name] = (evaluator, d, spatial_dim)


def get_family(name: str, a: float = 0.0, b: float = 1.0) -> ForcingFamily:
    if name == "trig_four":
        return trig_four(a, b)
    try:
        evaluator, d, sdim = _REGISTRY[name]
    except KeyError:
        known = ", ".join(["trig_four", *sorted(_REGISTRY)])
        raise KeyError(f"unknown forcing family {name!r}; known: {known}") from None
    return ForcingFamily(FamilyKind.CUSTOM, a=a, b=b, d=d, name=name, spatial_dim=sdim, evaluator=evaluator)


def _sine_product_2d(xy, omega):
    X, Y = xy
    w = np.asarray(omega, dtype=float)
    shape = (-1,) + (1,) * np.ndim(X)
    w1, w2, w3 = (w[:, i].reshape(shape) for i in range(3))
    return w1 * np.sin(np.pi * (1 + w2) * X) * np.sin(np.pi * (1 + w3) * Y)


register_family("sine_product_2d", _sine_product_2d, d=3, spatial_dim=2)


@dataclass(eq=False)
class ForcingSample:
    omega: np.ndarray
    family: ForcingFamily
    index: int = 0
    _cache: dict = field(default_factory=dict, repr=False)


@dataclass(eq=False)
class SampleBatch:
    """M parameter draws; ``omega`` has shape (M, d)."""

    omega: np.ndarray
    family: ForcingFamily
    seed: int
    generator_id: str = GENERATOR_ID
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return self.omega.shape[0]

    @property
    def samples(self) -> list[ForcingSample]:
        return [ForcingSample(self.omega[i], self.family, i) for i in range(len(self))]

    def nodal_values(self, rule: QuadratureRule) -> np.ndarray:
        """f(x_q; omega_m) for every sample, shape (M, Q) (or (M, Q, Q) in 2D); cached per Q."""
        key = rule.order
        if key not in self._cache:
            if self.family.spatial_dim == 2:
                X, Y = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
                vals = self.family((X, Y), self.omega)
            else:
                vals = self.family(rule.nodes, self.omega)
            vals.flags.writeable = False
            self._cache[key] = vals
        return self._cache[key]


def sample_batch(family: ForcingFamily, M: int, seed: int) -> SampleBatch:
    """M i.i.d. uniform draws from [a, b]^d with a seeded PCG64 stream."""
    if M < 1:
        raise ValueError("M must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    omega = rng.uniform(family.a, family.b, size=(M, family.d))
    return SampleBatch(omega=omega, family=family, seed=int(seed))


def eval_forcing(sample: ForcingSample, x):
    vals = sample.family(x, sample.omega)[0]
    return vals[()] if np.ndim(vals) == 0 else vals


def eval_forcing_at_nodes(sample: ForcingSample, rule: QuadratureRule) -> np.ndarray:
    key = (sample.index, rule.order)
    if key not in sample._cache:
        vals = np.asarray(sample.family(rule.nodes, sample.omega)[0])
        vals.flags.writeable = False
        sample._cache[key] = vals
    return sample._cache[key]


def lipschitz_constant(family: ForcingFamily) -> float:
    """Bound on |f(x; w) - f(x; w')| / |w - w'| over x in [-1, 1], w, w' in [a, b]^4."""
    if family.kind is not FamilyKind.TRIG_FOUR:
        raise NotImplementedError("Lipschitz bound only known for trig_four")
    B = max(abs(family.a), abs(family.b))
    # |df/dw1|, |df/dw3| <= 1 and |df/dw2|, |df/dw4| <= 2 pi B
    return float(np.sqrt(2.0 + 2.0 * (2 * np.pi * B) ** 2))


def sup_bound(family: ForcingFamily) -> float:
    """Uniform bound on sup_x |f(x; omega)|: |omega_1| + |omega_3| <= 2 max(|a|, |b|)."""
    if family.kind is not FamilyKind.TRIG_FOUR:
        raise NotImplementedError("sup bound only known for trig_four")
    return 2.0 * max(abs(family.a), abs(family.b))


def write_batch_csv(batch: SampleBatch, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"omega_{i + 1}" for i in range(batch.family.d)])
        for i, row in enumerate(batch.omega):
            w.writerow([i] + [repr(float(v)) for v in row])


def read_batch_csv(path: str | Path, family: ForcingFamily) -> SampleBatch:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if len(header) != family.d + 1:
        raise ValueError(f"{path}: expected {family.d} omega columns, found {len(header) - 1}")
    body.sort(key=lambda r: int(r[0]))
    omega = np.array([[float(v) for v in r[1:]] for r in body])
    if np.any(omega < family.a) or np.any(omega > family.b):
        raise ValueError(f"{path}: parameters outside [{family.a}, {family.b}]")
    return SampleBatch(omega=omega, family=family, seed=-1, generator_id="csv")
