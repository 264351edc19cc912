"""Fully connected network with bounded output C * sigma*(raw), hand-written backprop."""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, LengthMismatch

__all__ = [
    "Activation",
    "Architecture",
    "NetworkParams",
    "Gradient",
    "init_params",
    "zero_params",
    "forward",
    "forward_batch",
    "forward_with_cache",
    "backward",
    "flatten",
    "unflatten",
    "num_params",
    "widen_hidden",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"LGNETCKPT1\n"


class Activation(enum.Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"


def _act(kind: Activation, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Activation values and their derivatives."""
    if kind is Activation.TANH:
        s = np.tanh(z)
        return s, 1.0 - s * s
    s = 0.5 * (1.0 + np.tanh(0.5 * z))  # overflow-free logistic
    return s, s * (1.0 - s)


def _bound(kind: Activation, y: np.ndarray, C: float) -> tuple[np.ndarray, np.ndarray]:
    """h(sigma*(y)) with h affine, h(inf sigma*) = -C, h(sup sigma*) = C; plus derivative."""
    if kind is Activation.TANH:
        t = np.tanh(y)
        return C * t, C * (1.0 - t * t)
    s, ds = _act(Activation.SIGMOID, y)
    return C * (2.0 * s - 1.0), 2.0 * C * ds


@dataclass(frozen=True)
class Architecture:
    """Layer widths (n_0, ..., n_L) plus the output bound.

    ``C_alpha`` is a single bound or one bound per output component.
    ``input_range`` (lo, hi) fixes an affine map of [lo, hi]^d onto
    [-1, 1]^d applied before the first layer; it does not change the set
    of functions the network can represent.
    """

    dims: tuple[int, ...]
    activation: Activation = Activation.TANH
    C_alpha: float | tuple[float, ...] = 1.0
    # False drops the output bounding map; only the convex sanity checks use this.
    bounded: bool = True
    input_range: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "activation", Activation(self.activation))
        if np.ndim(self.C_alpha):
            object.__setattr__(self, "C_alpha", tuple(float(c) for c in self.C_alpha))
            if len(self.C_alpha) != self.dims[-1]:
                raise DimensionMismatch(f"{len(self.C_alpha)} output bounds for {self.dims[-1]} outputs")
        else:
            object.__setattr__(self, "C_alpha", float(self.C_alpha))
        if self.input_range is not None:
            lo, hi = map(float, self.input_range)
            if not lo < hi:
                raise ValueError("input_range needs lo < hi")
            object.__setattr__(self, "input_range", (lo, hi))
        if len(self.dims) < 2 or min(self.dims) < 1:
            raise ValueError(f"invalid layer widths {self.dims}")
        if self.bounded and not np.all(np.asarray(self.C_alpha) > 0):
            raise ValueError("C_alpha must be positive")

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    @property
    def bound(self) -> float | np.ndarray:
        return np.asarray(self.C_alpha) if isinstance(self.C_alpha, tuple) else self.C_alpha

    def with_changes(self, **kw) -> Architecture:
        return dataclasses.replace(self, **kw)


@dataclass(eq=False)
class NetworkParams:
    arch: Architecture
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = self.arch.dims
        if len(self.weights) != self.arch.depth or len(self.biases) != self.arch.depth:
            raise DimensionMismatch("layer count does not match architecture")
        for l, (W, b) in enumerate(zip(self.weights, self.biases), start=1):
            if W.shape != (dims[l], dims[l - 1]) or b.shape != (dims[l],):
                raise DimensionMismatch(f"layer {l}: got W{W.shape}, b{b.shape}")

    def copy(self) -> NetworkParams:
        return NetworkParams(self.arch, [W.copy() for W in self.weights], [b.copy() for b in self.biases])


@dataclass(eq=False)
class Gradient:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float = float("nan")


def init_params(arch: Architecture, seed: int) -> NetworkParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for n_in, n_out in zip(arch.dims[:-1], arch.dims[1:]):
        r = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-r, r, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return NetworkParams(arch, weights, biases)


def zero_params(arch: Architecture) -> NetworkParams:
    return NetworkParams(
        arch,
        [np.zeros((o, i)) for i, o in zip(arch.dims[:-1], arch.dims[1:])],
        [np.zeros(o) for o in arch.dims[1:]],
    )


def _forward_cache(params: NetworkParams, X: np.ndarray):
    arch = params.arch
    if X.shape[-1] != arch.dims[0]:
        raise DimensionMismatch(f"input dimension {X.shape[-1]} != {arch.dims[0]}")
    if arch.input_range is not None:
        lo, hi = arch.input_range
        X = (2.0 * X - (lo + hi)) / (hi - lo)
    acts = [X]  # inputs to each affine layer
    derivs = []
    z = X @ params.weights[0].T + params.biases[0]
    for W, b in zip(params.weights[1:], params.biases[1:]):
        a, da = _act(arch.activation, z)
        acts.append(a)
        derivs.append(da)
        z = a @ W.T + b
    if arch.bounded:
        out, dout = _bound(arch.activation, z, arch.bound)
    else:
        out, dout = z, None
    return out, (acts, derivs, dout)


def forward_batch(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Network output for each row of X (shape (m, d)) -> (m, n_L)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _forward_cache(params, X)[0]


def forward(params: NetworkParams, omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1:
        raise DimensionMismatch("forward takes a single parameter vector; use forward_batch")
    return forward_batch(params, omega[None, :])[0]


def forward_with_cache(params: NetworkParams, X: np.ndarray):
    """Like ``forward_batch`` but also returns the intermediates ``backward`` reuses."""
    return _forward_cache(params, np.atleast_2d(np.asarray(X, dtype=float)))


def backward(params: NetworkParams, X: np.ndarray, G: np.ndarray, cache=None) -> Gradient:
    """Sum over rows m of G[m] . d(output(X[m]))/d(params).

    G holds dloss/d(output) per sample, shape (m, n_L). ``cache`` is the
    second value returned by ``forward_with_cache`` for the same X.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    arch = params.arch
    if G.shape != (X.shape[0], arch.dims[-1]):
        raise DimensionMismatch(f"output gradient shape {G.shape} != {(X.shape[0], arch.dims[-1])}")
    if cache is None:
        cache = _forward_cache(params, X)[1]
    acts, derivs, dout = cache
    delta = G * dout if dout is not None else G
    gW = [None] * arch.depth
    gb = [None] * arch.depth
    for l in range(arch.depth - 1, -1, -1):
        gW[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l]) * derivs[l - 1]
    return Gradient(gW, gb)


def num_params(arch: Architecture) -> int:
    return sum(o * (i + 1) for i, o in zip(arch.dims[:-1], arch.dims[1:]))


def flatten(p: NetworkParams | Gradient) -> np.ndarray:
    """Per layer: W row-major, then b."""
    parts = []
    for W, b in zip(p.weights, p.biases):
        parts.append(W.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unflatten(theta: np.ndarray, arch: Architecture) -> NetworkParams:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (num_params(arch),):
        raise LengthMismatch(f"expected {num_params(arch)} parameters, got {theta.shape}")
    weights, biases, pos = [], [], 0
    for n_in, n_out in zip(arch.dims[:-1], arch.dims[1:]):
        weights.append(theta[pos : pos + n_out * n_in].reshape(n_out, n_in).copy())
        pos += n_out * n_in
        biases.append(theta[pos : pos + n_out].copy())
        pos += n_out
    return NetworkParams(arch, weights, biases)


def widen_hidden(params: NetworkParams, width: int) -> NetworkParams:
    """Embed a one-hidden-layer network into a wider one by zero padding.

    The added neurons have zero incoming and outgoing weights, so the
    realized function is unchanged.
    """
    arch = params.arch
    if arch.depth != 2 or width < arch.dims[1]:
        raise ValueError("widening needs a two-layer network and width >= current width")
    n = arch.dims[1]
    new_arch = arch.with_changes(dims=(arch.dims[0], width, arch.dims[2]))
    W1 = np.zeros((width, arch.dims[0]))
    W1[:n] = params.weights[0]
    b1 = np.zeros(width)
    b1[:n] = params.biases[0]
    W2 = np.zeros((arch.dims[2], width))
    W2[:, :n] = params.weights[1]
    return NetworkParams(new_arch, [W1, W2], [b1, params.biases[1].copy()])


def save_checkpoint(path: str | Path, params: NetworkParams, seed: int | None = None, **extra) -> None:
    """Write a checkpoint.

    Layout: the magic line ``LGNETCKPT1``, one line of JSON header
    (dims, activation, C_alpha, bounded, input_range, seed, count, plus
    ``extra``), then
    ``count`` little-endian float64 values in ``flatten`` order.
    """
    arch = params.arch
    theta = flatten(params)
    header = {
        "dims": list(arch.dims),
        "activation": arch.activation.value,
        "C_alpha": list(arch.C_alpha) if isinstance(arch.C_alpha, tuple) else arch.C_alpha,
        "bounded": arch.bounded,
        "input_range": list(arch.input_range) if arch.input_range else None,
        "seed": seed,
        "count": int(theta.size),
        **extra,
    }
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(theta.astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[NetworkParams, dict]:
    with open(path, "rb") as fh:
        if fh.readline() != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not an lgnet checkpoint")
        header = json.loads(fh.readline())
        theta = np.frombuffer(fh.read(), dtype="<f8").astype(float)
    if theta.size != header["count"]:
        raise LengthMismatch(f"{path}: header says {header['count']} values, file has {theta.size}")
    arch = Architecture(
        tuple(header["dims"]),
        Activation(header["activation"]),
        header["C_alpha"],
        header["bounded"],
        header.get("input_range"),
    )
    return unflatten(theta, arch), header
