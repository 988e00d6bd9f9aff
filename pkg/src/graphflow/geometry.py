"""Second-order geometry of the graph of f inside the product M x N.

Per-node quantities are evaluated on evolved nodes and stored as lattice
arrays (NaN elsewhere).  The product chart is (x, y) with x a domain chart
coordinate and y the node's target chart coordinate, so the graph embedding
is F(x) = (x, f(x)) with dF = (I; Df).

The residual checks compare two independent discretizations of the same
continuum identity and therefore converge at the order of the stencils.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .grid import JetField, MapField, compute_jets, lattice_gradient, lattice_hessian
from .manifolds import assemble_riemann


@dataclass
class GraphData:
    """Lattice arrays (C, Nx, Ny, ...) for the graph of a map field."""

    gM: np.ndarray        # (..., m, m)
    gN: np.ndarray        # (..., n, n)  at f(x)
    g: np.ndarray         # induced metric (..., m, m)
    ginv: np.ndarray
    dF: np.ndarray        # (..., m+n, m)
    hess: np.ndarray      # (..., m+n, m, m) covariant chart Hessian of F (before projection)
    pr: np.ndarray        # (..., m+n, m+n) normal projection
    A: np.ndarray         # (..., m+n, m, m)
    H: np.ndarray         # (..., m+n)
    H2: np.ndarray        # (...,)
    A2: np.ndarray        # (...,)
    gamma_ind: np.ndarray  # (..., m, m, m) induced Christoffels [l, i, j]
    jets: JetField
    mask: np.ndarray

    @property
    def m(self):
        return self.g.shape[-1]

    @property
    def gK(self):
        m, n = self.m, self.gN.shape[-1]
        out = np.zeros(self.g.shape[:-2] + (m + n, m + n))
        out[..., :m, :m] = self.gM
        out[..., m:, m:] = self.gN
        return out

    def at(self, mask):
        """Flat per-node view of the main fields at ``mask``."""
        return {k: getattr(self, k)[mask] for k in ("gM", "gN", "g", "ginv", "dF", "A", "H", "H2", "A2")}


def _scatter(mask, vals, tail=()):
    out = np.full(mask.shape + tail, np.nan)
    out[mask] = vals
    return out


def _blockdiag(a, b):
    m, n = a.shape[-1], b.shape[-1]
    out = np.zeros(a.shape[:-2] + (m + n, m + n))
    out[..., :m, :m] = a
    out[..., m:, m:] = b
    return out


def induced_metric(gM, gN, df):
    """g = g_M + df^T g_N df and its inverse; raises NumericalError if not SPD."""
    g = gM + np.swapaxes(df, -1, -2) @ gN @ df
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("induced metric is not positive definite") from exc
    return g, np.linalg.inv(g)


def normal_projector(dF, ginv, gK):
    """Matrix of pr(V) = V - g^{kl} <V, dF_k> dF_l."""
    k = dF.shape[-2]
    return np.eye(k) - dF @ ginv @ np.swapaxes(dF, -1, -2) @ gK


def project_normal(V, dF, ginv, gK):
    return np.einsum("...rs,...s->...r", normal_projector(dF, ginv, gK), V)


def _node_geometry(M, N, x, y, Df, D2f):
    """All per-node graph quantities for flat node arrays."""
    nn, n, m = Df.shape
    gM = M.metric(x)
    gN = N.metric(y)
    g, ginv = induced_metric(gM, gN, Df)
    GM = M.christoffel(x)
    GN = N.christoffel(y)
    gnn = np.einsum("pabc,pbi,pcj->paij", GN, Df, Df)
    dF = np.concatenate([np.broadcast_to(np.eye(m), (nn, m, m)), Df], axis=1)
    hess = np.concatenate([GM, D2f + gnn], axis=1)
    gK = _blockdiag(gM, gN)
    pr = normal_projector(dF, ginv, gK)
    A = np.einsum("prs,psij->prij", pr, hess)
    H = np.einsum("pij,prij->pr", ginv, A)
    H2 = np.einsum("pr,prs,ps->p", H, gK, H)
    A2 = np.einsum("pik,pjl,prij,prs,pskl->p", ginv, ginv, A, gK, A)
    tang = np.einsum("prij,prs,psq->pijq", hess, gK, dF)
    gamma_ind = np.einsum("plq,pijq->plij", ginv, tang)
    return dict(gM=gM, gN=gN, g=g, ginv=ginv, dF=dF, hess=hess, pr=pr, A=A, H=H, H2=H2, A2=A2,
                gamma_ind=gamma_ind)


def graph_geometry(f: MapField, jets: JetField | None = None) -> GraphData:
    """Induced metric, projector, second fundamental form and mean curvature on evolved nodes."""
    if jets is None:
        jets = compute_jets(f)
    grid = f.grid
    mask = grid.evolved
    out = _node_geometry(grid.manifold, f.target, grid.coords[mask], jets.value[mask],
                         jets.df[mask], jets.d2f[mask])
    lat = {k: _scatter(mask, v, v.shape[1:]) for k, v in out.items()}
    return GraphData(jets=jets, mask=mask, **lat)


def second_fundamental_form(gd: GraphData):
    return gd.A, gd.H


def tension(f: MapField, jets: JetField, gd: GraphData):
    """Graph-gauge velocity g^ij (D_ij f - Gamma_M^k_ij D_k f + Gamma_N(D_i f, D_j f)).

    Returned as a lattice array (C, Nx, Ny, n), NaN off the evolved set."""
    grid = f.grid
    mask = grid.evolved
    x = grid.coords[mask]
    y = jets.value[mask]
    Df = jets.df[mask]
    GM = grid.manifold.christoffel(x)
    GN = f.target.christoffel(y)
    lap = (jets.d2f[mask] - np.einsum("pkij,pak->paij", GM, Df)
           + np.einsum("pabc,pbi,pcj->paij", GN, Df, Df))
    v = np.einsum("pij,paij->pa", gd.ginv[mask], lap)
    return _scatter(mask, v, (f.n,))


@dataclass
class FlowKinematics:
    """Flat per-evolved-node data needed by the time stepper."""

    velocity: np.ndarray   # (p, n)
    g: np.ndarray          # (p, m, m)
    ginv: np.ndarray
    HM: np.ndarray         # (p, m) domain components of H = pr(0, v)
    H2: np.ndarray         # (p,)


def flow_kinematics(f: MapField, jets: JetField) -> FlowKinematics:
    """Tension field and H for conformal model metrics, in closed form.

    With g_M = a^2 I, g_N = b^2 I and phi = log a, psi = log b:
    g^ij Gamma_M(.)_ij = 2 g^-1 dphi - tr(g^-1) dphi, and
    g^ij Gamma_N(Df_i, Df_j) = 2 Df g^-1 (Df^T dpsi) - tr(g^-1 Df^T Df) dpsi.
    Written out component-wise for two-dimensional domains; agrees with
    :func:`tension` and :func:`graph_geometry` to round-off.
    """
    grid = f.grid
    mask = grid.evolved
    M, N = grid.manifold, f.target
    x, a2, dphi = grid.evolved_domain_data()
    y = jets.value[mask]
    Df = jets.df[mask]
    d2 = jets.d2f[mask]
    b2 = N.conformal_factor(y) ** 2
    dpsi = N._log_factor_derivatives(y)[0]
    D0, D1 = Df[..., 0], Df[..., 1]
    S00 = np.sum(D0 * D0, -1)
    S01 = np.sum(D0 * D1, -1)
    S11 = np.sum(D1 * D1, -1)
    g00 = a2 + b2 * S00
    g01 = b2 * S01
    g11 = a2 + b2 * S11
    det = g00 * g11 - g01 * g01
    if not (np.all(det > 0) and np.all(g00 > 0)):
        raise NumericalError("induced metric is not positive definite")
    i00, i01, i11 = g11 / det, -g01 / det, g00 / det
    tr = i00 + i11
    w0 = 2.0 * (i00 * dphi[:, 0] + i01 * dphi[:, 1]) - tr * dphi[:, 0]
    w1 = 2.0 * (i01 * dphi[:, 0] + i11 * dphi[:, 1]) - tr * dphi[:, 1]
    u0 = np.sum(D0 * dpsi, -1)
    u1 = np.sum(D1 * dpsi, -1)
    z0 = 2.0 * (i00 * u0 + i01 * u1) - w0
    z1 = 2.0 * (i01 * u0 + i11 * u1) - w1
    trS = i00 * S00 + 2.0 * i01 * S01 + i11 * S11
    lap = i00[:, None] * d2[..., 0, 0] + 2.0 * i01[:, None] * d2[..., 0, 1] + i11[:, None] * d2[..., 1, 1]
    v = lap + D0 * z0[:, None] + D1 * z1[:, None] - trS[:, None] * dpsi
    q0 = np.sum(v * D0, -1)
    q1 = np.sum(v * D1, -1)
    HM = -b2[:, None] * np.stack([i00 * q0 + i01 * q1, i01 * q0 + i11 * q1], -1)
    HN = v + D0 * HM[:, 0:1] + D1 * HM[:, 1:2]
    H2 = a2 * np.sum(HM * HM, -1) + b2 * np.sum(HN * HN, -1)
    g = np.stack([np.stack([g00, g01], -1), np.stack([g01, g11], -1)], -2)
    ginv = np.stack([np.stack([i00, i01], -1), np.stack([i01, i11], -1)], -2)
    return FlowKinematics(v, g, ginv, HM, H2)


def lift_velocity(v, m):
    """(0, v) in product chart coordinates."""
    return np.concatenate([np.zeros(v.shape[:-1] + (m,)), v], axis=-1)


# ---------------------------------------------------------------------------
# Residual checks, evaluated on owned nodes


def divergence_mean_curvature(f: MapField, gd: GraphData):
    """H from the divergence form (1/sqrt g) d_i(sqrt g g^ij d_j F) + g^ij Gamma_K(dF_i, dF_j).

    Lattice array (C, Nx, Ny, m+n); finite only where all neighbors are evolved.
    """
    grid = f.grid
    m = gd.m
    sq = np.sqrt(np.linalg.det(np.where(gd.mask[..., None, None], gd.g, np.eye(m))))
    sq = np.where(gd.mask, sq, np.nan)
    flux_M = sq[..., None, None] * gd.ginv                       # [k, i]
    flux_N = sq[..., None, None] * np.einsum("...ij,...aj->...ai", gd.ginv, gd.jets.df)
    flux_M, flux_N = grid.fill_halo(flux_M), grid.fill_halo(flux_N)
    div_M = np.einsum("...kii->...k", lattice_gradient(f, flux_M))
    div_N = np.einsum("...aii->...a", lattice_gradient(f, flux_N, target_valued=True))
    lap = np.concatenate([div_M, div_N], axis=-1) / sq[..., None]
    gam = np.concatenate([gd.hess[..., :m, :, :],
                          gd.hess[..., m:, :, :] - gd.jets.d2f], axis=-3)
    return lap + np.einsum("...ij,...rij->...r", gd.ginv, gam)


def gauge_residual(f: MapField, gd: GraphData, velocity, mask=None):
    """max ||pr(0, v) - H_div|| / (1 + ||H||) over ``mask`` (default: owned nodes).

    Returns (max value, per-node lattice array)."""
    mask = f.grid.owned if mask is None else mask
    Hd = divergence_mean_curvature(f, gd)
    prv = np.einsum("...rs,...s->...r", gd.pr, lift_velocity(velocity, gd.m))
    d = prv - Hd
    gK = gd.gK
    err = np.sqrt(np.abs(np.einsum("...r,...rs,...s->...", d, gK, d))) / (1.0 + np.sqrt(gd.H2))
    return float(np.max(err[mask])), np.where(mask, err, np.nan)


def _induced_riemann_fd(f: MapField, gd: GraphData, mask):
    """Riemann tensor of the induced metric from lattice differences of g."""
    grid = f.grid
    g = grid.fill_halo(gd.g)
    dg = lattice_gradient(f, g)[mask]               # [a, b, q]
    ddg = lattice_hessian(grid, g)[mask]            # [a, b, q, r]
    g0 = g[mask]
    ginv = np.linalg.inv(g0)
    low = 0.5 * (np.einsum("pjli->plij", dg) + np.einsum("pilj->plij", dg)
                 - np.einsum("pijl->plij", dg))
    dlow = 0.5 * (np.einsum("pjliq->plijq", ddg) + np.einsum("piljq->plijq", ddg)
                  - np.einsum("pijlq->plijq", ddg))
    dginv = -np.einsum("pka,pabq,pbl->pklq", ginv, dg, ginv)
    G = np.einsum("pkl,plij->pkij", ginv, low)
    dG = np.einsum("pklq,plij->pkijq", dginv, low) + np.einsum("pkl,plijq->pkijq", ginv, dlow)
    return assemble_riemann(g0, G, dG), g0


def _ambient_riemann_on_graph(M, N, x, y, Df):
    """F^*R_K [i, j, k, l] for the product metric."""
    RmM = M.riemann(x)
    RmN = N.riemann(y)
    return RmM + np.einsum("pabcd,pai,pbj,pck,pdl->pijkl", RmN, Df, Df, Df, Df)


def gauss_residual(f: MapField, gd: GraphData, mask=None):
    """Gauss equation check: |R_ind - F^*R_K - (<A_ik,A_jl> - <A_il,A_jk>)| in units of
    Gaussian curvature (the 0101 component divided by det g), max over ``mask``."""
    grid = f.grid
    mask = grid.owned if mask is None else mask
    R_ind, g0 = _induced_riemann_fd(f, gd, mask)
    Df = gd.jets.df[mask]
    RK = _ambient_riemann_on_graph(grid.manifold, f.target, grid.coords[mask], gd.jets.value[mask], Df)
    A = gd.A[mask]
    gK = gd.gK[mask]
    AA = np.einsum("prik,prs,psjl->pijkl", A, gK, A)
    quad = AA - np.swapaxes(AA, -1, -2)
    diff = R_ind - RK - quad
    err = np.abs(diff[:, 0, 1, 0, 1]) / np.linalg.det(g0)
    return float(np.max(err)), _scatter(mask, err)


def codazzi_residual(f: MapField, gd: GraphData, mask=None):
    """Codazzi equation check: (nabla_i A)_jk - (nabla_j A)_ik - (R_K(dF_i, dF_j) dF_k)^perp,
    measured in the g_K / induced-metric tensor norm, max over ``mask``."""
    grid = f.grid
    M, N = grid.manifold, f.target
    mask = grid.owned if mask is None else mask
    m = gd.m
    A = grid.fill_halo(gd.A)
    dA = np.concatenate([lattice_gradient(f, A[..., :m, :, :]),
                         lattice_gradient(f, A[..., m:, :, :], target_valued=True)], axis=3)[mask]
    A0 = gd.A[mask]
    x = grid.coords[mask]
    y = gd.jets.value[mask]
    Df = gd.jets.df[mask]
    GM = M.christoffel(x)
    GN = N.christoffel(y)
    # ambient derivative D_i A_jk = d_i A_jk + Gamma_K(dF_i, A_jk)
    DA_M = np.einsum("prjki->pirjk", dA[:, :m]) + np.einsum("prij,pjab->pirab", GM, A0[:, :m])
    DA_N = (np.einsum("prjki->pirjk", dA[:, m:])
            + np.einsum("pabc,pbi,pcjk->piajk", GN, Df, A0[:, m:]))
    DA = np.concatenate([DA_M, DA_N], axis=2)                    # [i, r, j, k]
    T = DA - np.einsum("pirjk->pjrik", DA)
    T = np.einsum("prs,pisjk->pirjk", gd.pr[mask], T)
    Gi = gd.gamma_ind[mask]
    T = T - np.einsum("plik,prjl->pirjk", Gi, A0) + np.einsum("pljk,pril->pirjk", Gi, A0)

    RmM = M.riemann(x)
    RmN = N.riemann(y)
    # R(d_i, d_j) d_l = rop[P, l, i, j] d_P
    ropM = np.einsum("pPq,pijql->pPlij", np.linalg.inv(M.metric(x)), RmM)
    ropN = np.einsum("pPq,pbcqd->pPdbc", np.linalg.inv(N.metric(y)), RmN)
    RM_vec = np.einsum("pPkij->piPjk", ropM)
    RN_vec = np.einsum("padbc,pbi,pcj,pdk->piajk", ropN, Df, Df, Df)
    RK = np.concatenate([RM_vec, RN_vec], axis=2)
    RK = np.einsum("prs,pisjk->pirjk", gd.pr[mask], RK)
    diff = T - RK
    gK = gd.gK[mask]
    gi = gd.ginv[mask]
    nrm = np.einsum("pia,pjb,pkc,pirjk,prs,pasbc->p", gi, gi, gi, diff, gK, diff)
    err = np.sqrt(np.abs(nrm))
    return float(np.max(err)), _scatter(mask, err)
