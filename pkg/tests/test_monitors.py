import numpy as np
import pytest

from conftest import fold_field
from graphflow.geometry import graph_geometry
from graphflow.monitors import (MONITOR_FIELDS, VERDICTS, MonitorReport, MonitorSample, Tolerances,
                                assert_suite, choose_kappa, node_invariants, p_tensor, sample)


def t0_sample(f, report=None):
    gd = graph_geometry(f)
    inv = node_invariants(gd, f.grid.owned)
    kappa = choose_kappa(inv, gd.m)
    return sample(0.0, f, gd, kappa, 0.0, report, inv), kappa, inv


def test_constant_map_sample(const32):
    s, kappa, _ = t0_sample(const32)
    assert kappa == pytest.approx(0.5 / 2)
    assert (s.eps_min, s.lambda_max, s.max_H2, s.max_logdet, s.image_diameter) == (1.0, 0.0, 0.0, 0.0, 0.0)
    assert s.P_max_eig == pytest.approx(-1.0)


def test_identity_map_sample(ident32):
    s, kappa, _ = t0_sample(ident32)
    assert kappa is None
    assert s.eps_min == pytest.approx(0.0, abs=1e-12)
    assert s.max_logdet == pytest.approx(2 * np.log(2), abs=1e-12)
    assert np.isnan(s.P_max_eig)


def test_fold_sample_at_t0():
    f = fold_field(64)
    report = MonitorReport()
    s, kappa, inv = t0_sample(f, report)
    h2 = f.grid.h ** 2
    assert s.eps_min == pytest.approx(0.6, abs=5 * h2)
    assert s.max_logdet == pytest.approx(2 * np.log(1.25), abs=5 * h2)
    assert s.P_max_eig <= -0.3
    eps0 = s.eps_min
    assert kappa == pytest.approx(min(0.5 * eps0**2 / (2 * (1 + s.max_H2)), eps0 / (2 * s.max_H2)))
    # determinant route and singular value route agree
    assert report.logdet_mismatch < 1e-12
    assert s.eps_min == pytest.approx((1 - s.lambda_max**2) / (1 + s.lambda_max**2), abs=1e-15)


def test_p_tensor_is_symmetric_and_bounded():
    f = fold_field(32)
    _, kappa, inv = t0_sample(f)
    P = p_tensor(inv, kappa)
    np.testing.assert_allclose(P, np.swapaxes(P, -1, -2))
    # theta <= ||H||^2 and s_perp <= -eps0 on normals
    assert np.linalg.eigvalsh(P)[:, -1].max() <= -np.min(inv.eps_node) / 2 + 1e-12


def mk(t, eps=0.6, h2=0.5, logdet=0.4, P=-0.5, diam=1.0, disp=0.0):
    return MonitorSample(t, eps, 0.5, h2, 0.1, logdet, P, diam, disp)


def test_assert_suite_all_pass():
    rep = MonitorReport([mk(0), mk(1, eps=0.7, logdet=0.3, diam=1e-4)], kappa_used=0.1)
    v = assert_suite(rep, Tolerances(), h=0.05)
    assert set(v) == set(VERDICTS) and rep.all_passed


@pytest.mark.parametrize("bad,name", [
    (dict(eps=0.55), "eps_preserved"),
    (dict(h2=100.0), "H2_bounded"),
    (dict(logdet=0.5), "logdet_monotone"),
    (dict(P=0.0), "P_negative"),
    (dict(disp=0.1), "displacement_budget"),
    (dict(diam=0.5), "converged"),
])
def test_assert_suite_detects_each_violation(bad, name):
    rep = MonitorReport([mk(0), mk(0.5, **bad), mk(1, diam=1e-4 if name != "converged" else 0.5)],
                        kappa_used=0.1)
    v = assert_suite(rep, Tolerances(), h=0.05)
    failed = [k for k, x in v.items() if not x.passed]
    assert failed == [name]
    if name != "converged":
        assert v[name].first_violation == 0.5


def test_logdet_tolerance_is_per_unit_time():
    rep = MonitorReport([mk(0, logdet=0.4), mk(2.0, logdet=0.4 + 1.5e-6, diam=0)], kappa_used=0.1)
    assert assert_suite(rep, Tolerances(tol_logdet=1e-6)).get("logdet_monotone").passed


def test_p_disabled_without_kappa():
    rep = MonitorReport([mk(0, P=np.nan, diam=0)], kappa_used=None, p_enabled=False)
    v = assert_suite(rep, Tolerances())
    assert not v["P_negative"].enabled and rep.all_passed


def test_empty_report():
    rep = MonitorReport()
    v = assert_suite(rep, Tolerances())
    assert all(not x.enabled for x in v.values())


def test_sample_fields_order():
    assert tuple(mk(0).row()) == tuple(getattr(mk(0), k) for k in MONITOR_FIELDS)


def test_hypothesis_violating_run_reports(tmp_path):
    # flat periodic domain: curvature hypotheses fail, the run still reports
    from graphflow.flow import Controls, run
    from graphflow.grid import build_grid
    from graphflow.manifolds import euclidean, sphere
    from graphflow.maps import dilation_map
    f = dilation_map(build_grid(euclidean(), 32, "periodic"), sphere(), 0.5)
    r = run(f, Controls(max_steps=10, monitor_stride=5))
    assert set(r.report.verdicts) == set(VERDICTS)
    assert len(r.report.samples) == 3
