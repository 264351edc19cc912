"""Command line entry point: ``lgnet {solve,train,eval,sweep,diag} --config PATH``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure
(non-SPD matrix, CG or Newton divergence), 3 optimization failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from . import network as nn
from .config import ConfigError, RunConfig, load_config
from .errors import CGNonConvergence, NotPositiveDefinite
from .evaluation import SweepBase, evaluate_model, run_sweep, spectrum_report
from .forcing import get_family, read_batch_csv, sample_batch
from .galerkin import (
    assemble,
    assemble_2d,
    load_vector,
    load_vector_2d,
    make_basis,
    reconstruct,
    reconstruct_2d,
    solve_exact,
    solve_exact_2d,
)
from .legendre import NonConvergence, gll_rule
from .training import Termination, TrainState, auto_c_alpha, make_loss_config, train

log = logging.getLogger("lgnet")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OPTIM = 0, 1, 2, 3


# --------------------------------------------------------------------------
# wiring helpers
# --------------------------------------------------------------------------


def build_system(cfg: RunConfig):
    spec = make_basis(cfg.pde.N, cfg.pde.bc)
    if cfg.pde.dimension == 2:
        return assemble_2d(spec, cfg.pde.nu)
    return assemble(spec, cfg.pde.nu)


def build_family(cfg: RunConfig):
    return get_family(cfg.forcing.family, cfg.forcing.a, cfg.forcing.b)


def build_arch(cfg: RunConfig, loss_cfg) -> nn.Architecture:
    c = cfg.network.C_alpha
    if c == "auto":
        C = auto_c_alpha(loss_cfg, per_mode=True)
    elif c == "auto_scalar":
        C = auto_c_alpha(loss_cfg, per_mode=False)
    else:
        C = float(c)
    rng = (cfg.forcing.a, cfg.forcing.b) if cfg.network.normalize_inputs else None
    dims = (cfg.forcing.d, *cfg.network.hidden, cfg.basis_count)
    return nn.Architecture(dims, cfg.network.activation, C, True, rng)


def sweep_base(cfg: RunConfig) -> SweepBase:
    return SweepBase(
        sys=build_system(cfg),
        family=build_family(cfg),
        train=cfg.train.to_train_config(),
        M=cfg.train.M,
        hidden=tuple(cfg.network.hidden),
        activation=nn.Activation(cfg.network.activation),
        c_alpha=cfg.network.C_alpha,
        normalize_inputs=cfg.network.normalize_inputs,
        train_seed=cfg.train.seed,
        init_seed=cfg.train.init_seed,
        test_seed=cfg.eval.seed,
        M_test=cfg.eval.M_test,
        rule=gll_rule(cfg.quadrature_order),
    )


def _outdir(cfg: RunConfig, args) -> Path:
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg: RunConfig, out: Path, command: str, args) -> None:
    echo = {"command": command, "config_source": cfg.source, "config": cfg.to_dict()}
    echo["overrides"] = {k: v for k, v in vars(args).items() if k not in ("func", "command") and v is not None}
    (out / "config_echo.json").write_text(json.dumps(echo, indent=2, default=str))


def _formats(cfg: RunConfig, args) -> list[str]:
    return [args.format] if args.format else cfg.output.formats


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_matrix_market(path: Path, A: np.ndarray, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(np.where(np.abs(A) > 0, A, 0.0)), comment=comment)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    _echo_config(cfg, out, "solve", args)
    sys_ = build_system(cfg)
    spec = sys_.spec
    rule = gll_rule(cfg.quadrature_order)
    nu = cfg.pde.nu
    two_d = cfg.pde.dimension == 2

    if args.manufactured:
        if two_d:
            fvals = [lambda X, Y: (2 * np.pi**2 + nu) * np.sin(np.pi * X) * np.sin(np.pi * Y)]
        else:
            fvals = [lambda x: (np.pi**2 + nu) * np.sin(np.pi * x)]
        omegas = None
    else:
        family = build_family(cfg)
        if args.omega_file:
            omegas = read_batch_csv(args.omega_file, family).omega
        elif args.omega:
            try:
                omegas = np.array([[float(v) for v in args.omega.split(",")]])
            except ValueError:
                raise ConfigError(f"--omega must be comma-separated numbers, got {args.omega!r}", "<command line>")
            if omegas.shape[1] != family.d:
                raise ConfigError(f"--omega needs {family.d} values", "<command line>")
        else:
            raise ConfigError("give --omega, --omega-file or --manufactured", "<command line>")
        if two_d:
            X, Y = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
            fvals = [family((X, Y), w)[0] for w in omegas]
        else:
            fvals = list(family(rule.nodes, omegas))

    alphas = []
    for f in fvals:
        if two_d:
            alphas.append(solve_exact_2d(sys_, load_vector_2d(spec, f, rule)))
        else:
            alphas.append(solve_exact(sys_, load_vector(spec, f, rule)))
    alphas = np.array(alphas)

    xs = np.linspace(-1.0, 1.0, args.points)
    _write_rows(
        out / "coefficients.csv",
        ["sample"] + [f"alpha_{k + 1}" for k in range(alphas.shape[1])],
        [[i, *map(repr, a.tolist())] for i, a in enumerate(alphas)],
    )
    if two_d:
        rows = []
        for i, a in enumerate(alphas):
            U = reconstruct_2d(spec, a, xs, xs)
            rows += [[i, repr(x), repr(y), repr(U[p, q])] for p, x in enumerate(xs) for q, y in enumerate(xs)]
        _write_rows(out / "solution.csv", ["sample", "x", "y", "u"], rows)
    else:
        U = reconstruct(spec, alphas, xs)
        _write_rows(
            out / "solution.csv",
            ["sample", "x", "u"],
            [[i, repr(x), repr(u)] for i in range(len(alphas)) for x, u in zip(xs, U[i])],
        )

    if args.manufactured:
        fine = gll_rule(2 * cfg.pde.N + 40)
        if two_d:
            U = reconstruct_2d(spec, alphas[0], fine.nodes, fine.nodes)
            exact = np.outer(np.sin(np.pi * fine.nodes), np.sin(np.pi * fine.nodes))
            W = np.outer(fine.weights, fine.weights)
            err = np.sqrt(np.sum(W * (U - exact) ** 2) / np.sum(W * exact**2))
        else:
            u = reconstruct(spec, alphas[0], fine.nodes)
            exact = np.sin(np.pi * fine.nodes)
            err = np.sqrt(fine.weights @ (u - exact) ** 2 / (fine.weights @ exact**2))
        report = {"manufactured": "sin(pi x)" + (" sin(pi y)" if two_d else ""), "relative_l2_error": float(err)}
        (out / "solve_report.json").write_text(json.dumps(report, indent=2))
        print(f"relative L2 error vs manufactured solution: {err:.3e}")
    print(f"wrote {len(alphas)} coefficient vector(s) to {out}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    _echo_config(cfg, out, "train", args)
    sys_ = build_system(cfg)
    batch = sample_batch(build_family(cfg), cfg.train.M, cfg.train.seed)
    loss_cfg = make_loss_config(sys_, batch, gll_rule(cfg.quadrature_order))
    tcfg = cfg.train.to_train_config()
    ckpt = out / "model.ckpt"
    state_path = out / "train_state.npz"

    state = None
    if args.resume:
        params, header = nn.load_checkpoint(args.resume)
        resume_state = Path(args.resume).with_name("train_state.npz")
        if resume_state.exists():
            state = TrainState.load(resume_state)
        log.info("resuming from %s at epoch %d", args.resume, state.epoch if state else 0)
    else:
        params = nn.init_params(build_arch(cfg, loss_cfg), cfg.train.init_seed)

    def on_checkpoint(p, st):
        nn.save_checkpoint(ckpt, p, seed=cfg.train.init_seed, epoch=st.epoch)
        st.save(state_path)

    rec = train(params, loss_cfg, tcfg, state=state, on_checkpoint=on_checkpoint)
    nn.save_checkpoint(ckpt, rec.params, seed=cfg.train.init_seed, epoch=rec.state.epoch)
    rec.state.save(state_path)
    (out / "train_record.json").write_text(rec.to_json(cfg.to_dict()))
    print(f"{rec.termination.value}: {len(rec.loss_history)} epochs, final loss {rec.final_loss:.6e}")
    if rec.termination is Termination.LINE_SEARCH_FAIL:
        return EXIT_OPTIM
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    _echo_config(cfg, out, "eval", args)
    params, _ = nn.load_checkpoint(args.checkpoint)
    sys_ = build_system(cfg)
    if params.arch.dims[-1] != sys_.size or params.arch.dims[0] != cfg.forcing.d:
        raise ConfigError(
            f"checkpoint dims {params.arch.dims} do not match d={cfg.forcing.d}, basis count={sys_.size}",
            str(args.checkpoint),
        )
    report = evaluate_model(
        params, sys_, build_family(cfg), cfg.eval.M_test, cfg.eval.seed, gll_rule(cfg.quadrature_order)
    )
    fmts = _formats(cfg, args)
    if "json" in fmts:
        (out / "eval_report.json").write_text(report.to_json())
    if "csv" in fmts:
        _write_rows(
            out / "eval_report.csv",
            ["sample", "rel_l2", "rel_h1semi", "rel_h1"],
            [
                [i, repr(a), repr(b), repr(c)]
                for i, (a, b, c) in enumerate(zip(report.rel_l2, report.rel_h1semi, report.rel_h1))
            ],
        )
    print(
        f"mean rel L2 {report.mean_rel_l2:.4e}, median {report.median_rel_l2:.4e}, "
        f"max {report.max_rel_l2:.4e} over {report.M_test} samples ({report.n_degenerate} degenerate)"
    )
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    _echo_config(cfg, out, "sweep", args)
    kind = args.kind or cfg.sweep.kind
    grid = cfg.sweep.grid
    if args.grid:
        try:
            grid = [int(g) for g in args.grid.split(",")]
        except ValueError:
            raise ConfigError(f"--grid must be comma-separated integers, got {args.grid!r}", "<command line>")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("--grid must be strictly increasing", "<command line>")
    result = run_sweep(kind, grid, sweep_base(cfg), jobs=args.jobs or 1)
    fmts = _formats(cfg, args)
    if "csv" in fmts:
        result.write_csv(out / "sweep.csv")
    if "json" in fmts:
        (out / "sweep.json").write_text(result.to_json())
    for row, p in zip(result.rows(), result.points):
        print(
            f"{kind}={row['sweep_value']:>6d}  mean rel L2 {row['mean_rel_l2']:.4e}  "
            f"train loss {row['final_train_loss']:.3e}  {p.termination} after {p.epochs_run} epochs  {row['wall_time_s']:.1f}s"
        )
    if any(p.report is None for p in result.points):
        return EXIT_OPTIM
    return EXIT_OK


def cmd_diag(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    _echo_config(cfg, out, "diag", args)
    spec = make_basis(cfg.pde.N, cfg.pde.bc)
    sys1 = assemble(spec, cfg.pde.nu)
    tag = f"bc={cfg.pde.bc} N={cfg.pde.N} nu={cfg.pde.nu}"
    write_matrix_market(out / "S.mtx", np.array(sys1.S), f"stiffness {tag}")
    write_matrix_market(out / "M.mtx", np.array(sys1.M), f"mass {tag}")
    write_matrix_market(out / "A.mtx", np.array(sys1.A), f"capacitance S + nu M {tag}")
    report = {"1d": spectrum_report(sys1)}
    if cfg.pde.dimension == 2:
        sys2 = assemble_2d(spec, cfg.pde.nu)
        lam = np.linalg.eigvalsh(sys2.dense())
        report["2d"] = {
            "rho_min": float(np.abs(lam).min()),
            "rho_max": float(np.abs(lam).max()),
            "condition_number": float(np.abs(lam).max() / np.abs(lam).min()),
        }
    (out / "spectrum.json").write_text(json.dumps(report, indent=2))
    r = report["1d"]
    print(f"rho_min {r['rho_min']:.6e}  rho_max {r['rho_max']:.6e}  cond {r['condition_number']:.6e}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override train.seed")
    common.add_argument("--out", help="override output.directory")
    common.add_argument("--jobs", type=int, help="worker processes for sweeps")
    common.add_argument("--format", choices=["csv", "json"], help="restrict output formats")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="lgnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="exact spectral solve")
    s.add_argument("--omega", help="comma-separated forcing parameters")
    s.add_argument("--omega-file", help="CSV of parameters (index, omega_1..omega_d)")
    s.add_argument("--manufactured", action="store_true", help="solve the sin(pi x) manufactured problem")
    s.add_argument("--points", type=int, default=201, help="uniform output grid size")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("train", parents=[common], help="train the coefficient network")
    s.add_argument("--resume", help="checkpoint to continue from")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on held-out samples")
    s.add_argument("--checkpoint", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", parents=[common], help="n- or M-convergence sweep")
    s.add_argument("--kind", choices=["n", "m"])
    s.add_argument("--grid", help="comma-separated increasing integers")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("diag", parents=[common], help="matrix dumps and spectrum report")
    s.set_defaults(func=cmd_diag)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.train.seed = args.seed
            if cfg.eval.seed == cfg.train.seed:
                raise ConfigError("--seed collides with eval.seed", "<command line>")
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotPositiveDefinite, CGNonConvergence, NonConvergence) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
