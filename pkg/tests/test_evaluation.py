import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lgnet import network as nn
from lgnet.evaluation import (
    Norm,
    SweepBase,
    SweepKind,
    SweepResult,
    evaluate_model,
    evaluate_predictions,
    h1_seminorm_sq,
    l2_norm_sq,
    relative_error,
    run_point,
    run_sweep,
    spectrum_report,
)
from lgnet.forcing import trig_four
from lgnet.galerkin import (
    assemble,
    assemble_2d,
    make_basis,
    reconstruct,
    reconstruct_deriv,
)
from lgnet.legendre import gll_rule
from lgnet.training import TrainConfig

SYS = assemble(make_basis(10, "dirichlet"), 1.0)


@given(st.integers(0, 2**31))
def test_norms_match_quadrature(seed):
    c = np.random.default_rng(seed).standard_normal(9)
    rule = gll_rule(20)
    u = reconstruct(SYS.spec, c, rule.nodes)
    du = reconstruct_deriv(SYS.spec, c, rule.nodes)
    assert l2_norm_sq(SYS, c) == pytest.approx(rule.weights @ u**2, rel=1e-12)
    assert h1_seminorm_sq(SYS, c) == pytest.approx(rule.weights @ du**2, rel=1e-12)


def test_norms_2d():
    sys2 = assemble_2d(make_basis(5, "dirichlet"), 1.0)
    c = np.random.default_rng(0).standard_normal(16)
    assert l2_norm_sq(sys2, c) == pytest.approx(c @ np.kron(SYS.M[:4, :4], SYS.M[:4, :4]) @ c)


@given(st.integers(0, 2**31), st.floats(0.1, 10))
def test_relative_error_properties(seed, scale):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 9))
    for norm in Norm:
        assert np.all(relative_error(SYS, a, a, norm) == 0)
        np.testing.assert_allclose(relative_error(SYS, a, np.zeros_like(a), norm), 1.0)
        np.testing.assert_allclose(relative_error(SYS, scale * a, scale * (a + a / 2), norm), 0.5)


def test_degenerate_sample_is_inf_and_excluded():
    a = np.vstack([np.zeros(9), np.ones(9)])
    r = relative_error(SYS, a, a + 0.1)
    assert np.isinf(r[0]) and np.isfinite(r[1])
    rep = evaluate_predictions(SYS, a, a + 0.1, 1.0, 0)
    assert rep.n_degenerate == 1
    assert rep.mean_rel_l2 == pytest.approx(r[1])


def test_report_json():
    a = np.random.default_rng(0).standard_normal((5, 9))
    rep = evaluate_predictions(SYS, a, 0.9 * a, 1.0, 42)
    d = json.loads(rep.to_json())
    assert d["seed"] == 42 and d["M_test"] == 5
    assert d["rel_l2"]["mean"] == pytest.approx(0.1)
    assert len(d["per_sample_rel_l2"]) == 5


def test_evaluate_model_zero_network():
    p = nn.zero_params(nn.Architecture((4, 3, 9)))
    rep = evaluate_model(p, SYS, trig_four(), 10, 5)
    np.testing.assert_allclose(rep.rel_l2, 1.0)
    assert rep.abs_l2_sq > 0


def _base(**kw):
    return SweepBase(
        sys=SYS, family=trig_four(), train=TrainConfig(epochs=15, history=10), M=40, hidden=(6, 6), M_test=20, **kw
    )


def test_run_sweep_n_and_m():
    r = run_sweep("n", [3, 6], _base())
    assert [p.value for p in r.points] == [3, 6]
    assert all(p.report is not None and p.epochs_run == 15 for p in r.points)
    assert r.points[1].record.params.arch.dims == (4, 6, 9)
    r = run_sweep(SweepKind.M_SWEEP, [10, 30], _base())
    assert r.points[0].record.params.arch.dims == (4, 6, 6, 9)


def test_sweep_grid_validated():
    with pytest.raises(ValueError):
        run_sweep("n", [6, 3], _base())
    with pytest.raises(ValueError):
        run_sweep("n", [], _base())


def test_sweep_failed_point_is_recorded():
    r = run_sweep("n", [3], _base(c_alpha=-1.0))
    assert r.points[0].termination == "failed" and r.points[0].report is None
    assert np.isnan(r.rows()[0]["mean_rel_l2"])


def test_sweep_csv(tmp_path):
    r = run_sweep("n", [3], _base())
    r.write_csv(tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header.split(",") == list(SweepResult.CSV_COLUMNS)
    assert json.loads(r.to_json())["kind"] == "n"


def test_spectrum_report():
    rep = spectrum_report(SYS)
    lam = np.linalg.eigvalsh(SYS.A)
    assert rep["rho_min"] == pytest.approx(lam.min()) and rep["rho_max"] == pytest.approx(lam.max())
    assert rep["condition_number"] == pytest.approx(lam.max() / lam.min())


def test_condition_number_small_example():
    # Dirichlet, nu = 0: A = S = diag(10, 14, 18)
    rep = spectrum_report(assemble(make_basis(4, "dirichlet"), 0.0))
    assert rep["condition_number"] == pytest.approx(1.8)


def test_condition_number_grows_with_N():
    conds = [spectrum_report(assemble(make_basis(N, "dirichlet"), 1.0))["condition_number"] for N in (8, 16, 32, 64)]
    assert all(b >= a for a, b in zip(conds, conds[1:]))
    assert all(
        spectrum_report(assemble(make_basis(N, bc), 0.0))["rho_min"] > 0
        for N in (4, 9)
        for bc in ("dirichlet", "neumann")
    )


def test_monte_carlo_error_stable_across_test_seeds():
    sys = assemble(make_basis(32, "dirichlet"), 1.0)
    base = SweepBase(sys=sys, family=trig_four(), train=TrainConfig(epochs=150, history=50), M=500, M_test=1000)
    pt = run_point(base, SweepKind.N_SWEEP, 32)
    e1 = evaluate_model(pt.record.params, sys, trig_four(), 1000, 12345).mean_rel_l2
    e2 = evaluate_model(pt.record.params, sys, trig_four(), 1000, 54321).mean_rel_l2
    assert abs(e1 - e2) / min(e1, e2) < 0.2
