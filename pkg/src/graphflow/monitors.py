"""Runtime monitors for the scalars the length-decreasing theory controls.

Every reduction runs over owned nodes, in lattice order, so samples are
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .frames import SingularData, s_tensor_values, singular_decompose
from .geometry import GraphData

MONITOR_FIELDS = ("t", "eps_min", "lambda_max", "max_H2", "max_A2", "max_logdet", "P_max_eig",
                  "image_diameter", "displacement_budget_residual")

VERDICTS = ("eps_preserved", "H2_bounded", "logdet_monotone", "P_negative", "displacement_budget",
            "converged")


@dataclass
class MonitorSample:
    t: float
    eps_min: float
    lambda_max: float
    max_H2: float
    max_A2: float
    max_logdet: float
    P_max_eig: float
    image_diameter: float
    displacement_budget_residual: float

    def row(self):
        return [getattr(self, k) for k in MONITOR_FIELDS]


@dataclass
class Verdict:
    name: str
    passed: bool
    first_violation: float | None = None
    enabled: bool = True
    detail: str = ""


@dataclass
class Tolerances:
    tol_eps: float = 1e-3
    tol_logdet: float = 1e-6
    tol_disp: float | None = None      # default 5 h^2
    diam_tol: float = 1e-3
    H2_ceiling: float | None = None    # default 10 * max_H2(0) + 1


@dataclass
class MonitorReport:
    samples: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    kappa_used: float | None = None
    p_enabled: bool = True
    null_checks: list = field(default_factory=list)   # (t, |kappa theta + s_perp|) near P = 0
    logdet_mismatch: float = 0.0

    def series(self, name):
        return np.array([getattr(s, name) for s in self.samples])

    @property
    def all_passed(self):
        return all(v.passed for v in self.verdicts.values() if v.enabled)


@dataclass
class NodeInvariants:
    """Per-owned-node arrays used by the reductions."""

    sd: SingularData
    eps_node: np.ndarray
    normal_vals: np.ndarray
    H_xi: np.ndarray          # (p, n) components of H in the normal frame
    H2: np.ndarray
    A2: np.ndarray
    logdet: np.ndarray        # determinant route
    logdet_sv: np.ndarray     # singular value route


def node_invariants(gd: GraphData, mask) -> NodeInvariants:
    gM = gd.gM[mask]
    gN = gd.gN[mask]
    df = gd.jets.df[mask]
    sd = singular_decompose(gM, gN, df)
    st = s_tensor_values(sd)
    gK = gd.gK[mask]
    H_xi = np.einsum("pr,prs,psa->pa", gd.H[mask], gK, sd.xi)
    logdet = np.linalg.slogdet(gd.g[mask])[1] - np.linalg.slogdet(gM)[1]
    logdet_sv = np.sum(np.log1p(sd.lam**2), axis=-1)
    return NodeInvariants(sd, st.eps_node, st.normal, H_xi, gd.H2[mask], gd.A2[mask], logdet, logdet_sv)


def p_tensor(inv: NodeInvariants, kappa):
    """P = kappa theta + s_perp on the normal frame, one n x n matrix per node."""
    return kappa * inv.H_xi[:, :, None] * inv.H_xi[:, None, :] + np.apply_along_axis(
        np.diag, -1, inv.normal_vals)


def choose_kappa(inv: NodeInvariants, m: int):
    """kappa = min(eps0^2 / (2 m (1 + max H2)), eps0 / (2 max H2)); None when eps0 <= 0.

    The second term bounds the largest eigenvalue of P at t = 0 by -eps0/2, since
    s_perp <= -eps0 on normals and theta <= ||H||^2.
    """
    eps0 = float(np.min(inv.eps_node))
    if eps0 <= 0:
        return None
    h2 = float(np.max(inv.H2))
    k = 0.5 * eps0**2 / (m * (1.0 + h2))
    if h2 > 0:
        k = min(k, 0.5 * eps0 / h2)
    return k


def image_diameter(f, mask):
    return f.target.diameter(f.values[mask], f.charts[mask])


def sample(t, f, gd: GraphData, kappa, displacement=0.0, report: MonitorReport | None = None,
           inv: NodeInvariants | None = None) -> MonitorSample:
    mask = f.grid.owned
    if inv is None:
        inv = node_invariants(gd, mask)
    lam_max = float(np.max(inv.sd.lam))
    k = int(np.argmax(inv.logdet_sv))
    if kappa is not None:
        P = p_tensor(inv, kappa)
        w, vecs = np.linalg.eigh(P)
        top = w[:, -1]
        p_max = float(np.max(top))
        if report is not None and p_max > -1e-3:
            i = int(np.argmax(top))
            eta = vecs[i, :, -1]
            theta = float(eta @ inv.H_xi[i]) ** 2
            sperp = float(np.sum(inv.normal_vals[i] * eta**2))
            report.null_checks.append((t, abs(kappa * theta + sperp)))
    else:
        p_max = float("nan")
    if report is not None:
        report.logdet_mismatch = max(report.logdet_mismatch, abs(inv.logdet[k] - inv.logdet_sv[k]))
    return MonitorSample(
        t=float(t),
        eps_min=float(np.min(inv.eps_node)),
        lambda_max=lam_max,
        max_H2=float(np.max(inv.H2)),
        max_A2=float(np.max(inv.A2)),
        max_logdet=float(inv.logdet_sv[k]),
        P_max_eig=p_max,
        image_diameter=float(image_diameter(f, mask)),
        displacement_budget_residual=float(displacement),
    )


def _first(ts, bad):
    idx = np.flatnonzero(bad)
    return (False, float(ts[idx[0]])) if idx.size else (True, None)


def assert_suite(report: MonitorReport, tol: Tolerances, h: float | None = None) -> dict:
    """Evaluate the six verdicts on a (possibly partial) report."""
    S = report.samples
    out = {}
    if not S:
        for name in VERDICTS:
            out[name] = Verdict(name, True, None, False, "no samples")
        report.verdicts = out
        return out
    t = report.series("t")
    eps = report.series("eps_min")
    ok, tv = _first(t, eps < eps[0] - tol.tol_eps)
    out["eps_preserved"] = Verdict("eps_preserved", ok, tv, detail=f"min {eps.min():.6g} vs start {eps[0]:.6g}")

    h2 = report.series("max_H2")
    ceiling = tol.H2_ceiling if tol.H2_ceiling is not None else 10.0 * h2[0] + 1.0
    ok, tv = _first(t, h2 > max(h2[0], ceiling))
    out["H2_bounded"] = Verdict("H2_bounded", ok, tv, detail=f"max {h2.max():.6g} ceiling {ceiling:.6g}")

    ld = report.series("max_logdet")
    rise = np.diff(ld) - tol.tol_logdet * np.diff(t)
    ok, tv = _first(t[1:], rise > 0)
    out["logdet_monotone"] = Verdict("logdet_monotone", ok, tv,
                                     detail=f"largest rise {np.max(np.diff(ld), initial=0.0):.3g}")

    if report.p_enabled and report.kappa_used is not None:
        P = report.series("P_max_eig")
        ok, tv = _first(t, ~(P < 0))
        out["P_negative"] = Verdict("P_negative", ok, tv, detail=f"max {P.max():.6g}")
    else:
        out["P_negative"] = Verdict("P_negative", True, None, False, "disabled: not strictly length decreasing")

    tol_disp = tol.tol_disp if tol.tol_disp is not None else (5.0 * h * h if h else 0.0)
    disp = report.series("displacement_budget_residual")
    ok, tv = _first(t, disp > tol_disp)
    out["displacement_budget"] = Verdict("displacement_budget", ok, tv,
                                         detail=f"max {disp.max():.3g} tol {tol_disp:.3g}")

    d_end = S[-1].image_diameter
    out["converged"] = Verdict("converged", bool(d_end < tol.diam_tol), None if d_end < tol.diam_tol else S[-1].t,
                               detail=f"final diameter {d_end:.6g}")
    report.verdicts = out
    return out


def sample_fieldnames():
    return [f.name for f in fields(MonitorSample)]
