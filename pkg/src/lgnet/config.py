"""YAML run configuration with line-numbered validation errors.

A config is a YAML mapping with the sections ``pde``, ``forcing``,
``quadrature``, ``network``, ``train``, ``eval``, ``sweep`` and ``output``.
Every key is optional except where noted; see ``configs/`` for complete
examples.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .training import TrainConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None, key: str | None = None):
        self.source, self.line, self.key = source, line, key
        where = f"{source}:{line}" if line is not None else source
        what = f"{key}: " if key else ""
        super().__init__(f"{where}: {what}{message}")


@dataclass
class PDEConfig:
    nu: float = 1.0
    bc: str = "dirichlet"
    dimension: int = 1
    N: int = 32


@dataclass
class ForcingConfig:
    family: str = "trig_four"
    a: float = 0.0
    b: float = 1.0
    d: int = 4


@dataclass
class QuadratureConfig:
    Q: int | str = "auto"


@dataclass
class NetworkConfig:
    hidden: list[int] = field(default_factory=lambda: [256])
    activation: str = "tanh"
    C_alpha: float | str = "auto"  # "auto" (per mode), "auto_scalar", or a number
    normalize_inputs: bool = True
    output_dim: int | None = None  # optional; checked against the basis count


@dataclass
class TrainSection:
    M: int = 2000
    seed: int = 1  # training samples
    init_seed: int = 0  # network initialization
    optimizer: str = "lbfgs"
    epochs: int = 500
    convergence_tol: float = 1e-9
    checkpoint_every: int = 0
    history: int = 300
    max_linesearch: int = 25
    adam_step: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    adam_fallback: bool = True

    def to_train_config(self) -> TrainConfig:
        fields = {f.name for f in dataclasses.fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in fields})


@dataclass
class EvalConfig:
    M_test: int = 200
    seed: int = 12345


@dataclass
class SweepConfig:
    kind: str = "n"
    grid: list[int] = field(default_factory=lambda: [16, 64, 256])


@dataclass
class OutputConfig:
    directory: str = "runs/default"
    formats: list[str] = field(default_factory=lambda: ["csv", "json"])


@dataclass
class RunConfig:
    pde: PDEConfig = field(default_factory=PDEConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: str = "<config>"

    @property
    def basis_count(self) -> int:
        n = self.pde.N - 1
        return n * n if self.pde.dimension == 2 else n

    @property
    def quadrature_order(self) -> int:
        if self.quadrature.Q == "auto":
            return 2 * (self.pde.N + 2)
        return int(self.quadrature.Q)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("source")
        return d


def _lines(node: yaml.Node, prefix: str = "", out: dict | None = None) -> dict[str, int]:
    """Map dotted key paths to 1-based line numbers."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _lines(v, path, out)
    return out


def _coerce(value: Any, typ: Any, key: str, err) -> Any:
    t = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    if t in ("float",):
        if isinstance(value, str):
            # YAML 1.1 reads exponent forms such as 1e-9 as strings
            try:
                return float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise err(f"expected a number, got {value!r}")
        return float(value)
    if t in ("int",):
        if isinstance(value, bool) or not isinstance(value, int):
            raise err(f"expected an integer, got {value!r}")
        return value
    if t == "bool":
        if not isinstance(value, bool):
            raise err(f"expected true/false, got {value!r}")
        return value
    if t == "str":
        if not isinstance(value, str):
            raise err(f"expected a string, got {value!r}")
        return value
    if t == "list[int]":
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise err(f"expected a list of integers, got {value!r}")
        return value
    if t == "list[str]":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise err(f"expected a list of strings, got {value!r}")
        return value
    if t == "int | str":
        if value == "auto" or (isinstance(value, int) and not isinstance(value, bool)):
            return value
        raise err(f'expected an integer or "auto", got {value!r}')
    if t == "float | str":
        if isinstance(value, str) and value in ("auto", "auto_scalar"):
            return value
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise err(f'expected a number, "auto" or "auto_scalar", got {value!r}')
    if t == "int | None":
        if value is None or (isinstance(value, int) and not isinstance(value, bool)):
            return value
        raise err(f"expected an integer, got {value!r}")
    raise err(f"unsupported field type {t}")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", source, mark.line + 1 if mark else None)
    raw = raw or {}
    lines = _lines(node) if node is not None else {}
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", source, 1)

    def err_for(key):
        return lambda msg: ConfigError(msg, source, lines.get(key), key)

    cfg = RunConfig(source=source)
    sections = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "source"}
    for sec_name, sec_val in raw.items():
        if sec_name not in sections:
            raise err_for(sec_name)(f"unknown section (expected one of {', '.join(sections)})")
        if not isinstance(sec_val, dict):
            raise err_for(sec_name)("section must be a mapping")
        sec_obj = getattr(cfg, sec_name)
        known = {f.name: f for f in dataclasses.fields(sec_obj)}
        for k, v in sec_val.items():
            key = f"{sec_name}.{k}"
            if k not in known:
                raise err_for(key)(f"unknown key (expected one of {', '.join(known)})")
            setattr(sec_obj, k, _coerce(v, known[k].type, key, err_for(key)))
    _validate(cfg, err_for)
    return cfg


def _validate(cfg: RunConfig, err_for) -> None:
    from .forcing import get_family

    p = cfg.pde
    if p.bc not in ("dirichlet", "neumann"):
        raise err_for("pde.bc")(f"must be dirichlet or neumann, got {p.bc!r}")
    if p.dimension not in (1, 2):
        raise err_for("pde.dimension")("must be 1 or 2")
    if p.dimension == 2 and p.bc != "dirichlet":
        raise err_for("pde.bc")("2D problems support dirichlet only")
    if p.N < 2:
        raise err_for("pde.N")("must be >= 2")
    if p.nu < 0:
        raise err_for("pde.nu")("must be >= 0")
    f = cfg.forcing
    if not f.a < f.b:
        raise err_for("forcing.b")("need a < b")
    try:
        fam = get_family(f.family, f.a, f.b)
    except (KeyError, ValueError) as exc:
        raise err_for("forcing.family")(str(exc).strip('"'))
    if fam.d != f.d:
        raise err_for("forcing.d")(f"family {f.family} has d = {fam.d}, config says {f.d}")
    if fam.spatial_dim != p.dimension:
        raise err_for("forcing.family")(f"family is {fam.spatial_dim}D but pde.dimension = {p.dimension}")
    if cfg.quadrature.Q != "auto" and cfg.quadrature.Q < p.N + 3:
        raise err_for("quadrature.Q")(f"must be >= N + 3 = {p.N + 3}")
    n = cfg.network
    if not n.hidden or min(n.hidden) < 1:
        raise err_for("network.hidden")("need at least one positive hidden width")
    if n.activation not in ("tanh", "sigmoid"):
        raise err_for("network.activation")("must be tanh or sigmoid")
    if isinstance(n.C_alpha, float) and n.C_alpha <= 0:
        raise err_for("network.C_alpha")("must be positive")
    if n.output_dim is not None and n.output_dim != cfg.basis_count:
        raise err_for("network.output_dim")(f"must equal the basis count {cfg.basis_count}")
    t = cfg.train
    if t.M < 1:
        raise err_for("train.M")("must be >= 1")
    if t.optimizer not in ("lbfgs", "adam"):
        raise err_for("train.optimizer")("must be lbfgs or adam")
    if t.epochs < 1:
        raise err_for("train.epochs")("must be >= 1")
    if t.convergence_tol <= 0:
        raise err_for("train.convergence_tol")("must be positive")
    if t.history < 1:
        raise err_for("train.history")("must be >= 1")
    if cfg.eval.M_test < 1:
        raise err_for("eval.M_test")("must be >= 1")
    if cfg.eval.seed == t.seed:
        raise err_for("eval.seed")("test seed must differ from train.seed")
    s = cfg.sweep
    if s.kind not in ("n", "m"):
        raise err_for("sweep.kind")("must be n or m")
    if any(b <= a for a, b in zip(s.grid, s.grid[1:])) or not s.grid:
        raise err_for("sweep.grid")("must be a nonempty, strictly increasing list")
    bad = set(cfg.output.formats) - {"csv", "json"}
    if bad:
        raise err_for("output.formats")(f"unknown formats {sorted(bad)}")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    return parse_config(text, str(path))
