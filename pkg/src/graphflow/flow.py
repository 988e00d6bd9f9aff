"""Mean curvature flow of the graph of f, integrated in the graph gauge.

The evolved quantity is f itself: df/dt is the tension field of f taken with
respect to the induced metric.  Its lift (0, df/dt) differs from H by a
tangent vector, which is the reparametrization the gauge absorbs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ChartEscapeError, NumericalError, SingularitySuspected
from .geometry import FlowKinematics, GraphData, flow_kinematics, gauge_residual, graph_geometry
from .grid import MapField, compute_jets, halo_exchange, reown_targets
from .monitors import (MonitorReport, Tolerances, assert_suite, choose_kappa, node_invariants,
                       sample)

log = logging.getLogger(__name__)


@dataclass
class Controls:
    cfl_safety: float = 0.2
    t_max: float = 10.0
    diam_tol: float = 1e-3
    retry_max: int = 8
    monitor_stride: int = 10
    snapshot_stride: int = 0
    dt_request: float | None = None
    max_steps: int | None = None
    gauge_check: bool = True
    tolerances: Tolerances = field(default_factory=Tolerances)
    particle_stride: int = 3


@dataclass
class FlowState:
    t: float
    f: MapField
    dt_last: float = 0.0
    step_index: int = 0


@dataclass
class StepResult:
    accepted: bool
    dt_used: float
    max_velocity: float
    gauge_residual: float
    chart_migrations: int
    retries: int = 0


@dataclass
class RhsData:
    velocity: np.ndarray       # lattice (C, Nx, Ny, n), NaN off the evolved set
    kin: FlowKinematics
    jets: object
    f: MapField

    def lattice(self, flat, tail=()):
        out = np.full(self.f.grid.evolved.shape + tail, np.nan)
        out[self.f.grid.evolved] = flat
        return out


def flow_rhs(f: MapField) -> RhsData:
    """Graph-gauge velocity at every evolved node, in each node's target chart."""
    jets = compute_jets(f)
    kin = flow_kinematics(f, jets)
    out = RhsData(None, kin, jets, f)
    out.velocity = out.lattice(kin.velocity, (f.n,))
    return out


def cfl_dt(ginv, h: float, safety: float) -> float:
    """safety * h^2 / max over nodes of the largest eigenvalue of g^ij."""
    a, b, c = ginv[:, 0, 0], ginv[:, 0, 1], ginv[:, 1, 1]
    top = np.max(0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + b * b))
    return float(safety * h * h / top)


def _advance(f: MapField, v, dt):
    """f + dt v on evolved nodes, followed by halo exchange; chart-escape checked."""
    ev = f.grid.evolved
    vals = f.values.copy()
    vals[ev] = f.values[ev] + dt * v[ev]
    new = f.with_values(vals)
    if not np.all(f.target.in_chart(vals[ev])):
        raise ChartEscapeError("update left the target chart")
    return halo_exchange(new)


def step(state: FlowState, controls: Controls, rhs: RhsData | None = None, max_A2: float = 0.0):
    """One explicit midpoint step.

    ``max_A2`` feeds the curvature blow-up detector; the gauge residual is only
    evaluated when ``controls.gauge_check`` is set (it needs the full geometry).
    Returns (new state, StepResult).
    """
    f = state.f
    h = f.grid.h
    if rhs is None:
        rhs = flow_rhs(f)
    dt = cfl_dt(rhs.kin.ginv, h, controls.cfl_safety)
    if controls.dt_request is not None:
        dt = min(dt, controls.dt_request)
    vmax = float(np.max(np.abs(rhs.kin.velocity))) if rhs.kin.velocity.size else 0.0
    gres = float("nan")
    if controls.gauge_check:
        gres = gauge_residual(f, graph_geometry(f, rhs.jets), rhs.velocity)[0]
    retries = 0
    while True:
        if dt < 1e-12 * h * h:
            raise SingularitySuspected("time step collapsed below 1e-12 h^2",
                                       {"t": state.t, "dt": dt, "max_A2": max_A2})
        if max_A2 * dt > 10.0:
            raise SingularitySuspected("curvature blow-up: max |A|^2 dt > 10",
                                       {"t": state.t, "dt": dt, "max_A2": max_A2})
        try:
            half = _advance(f, rhs.velocity, 0.5 * dt)
            k2 = flow_rhs(half).velocity
            new = _advance(f, k2, dt)
            new, moved = reown_targets(new)
            if moved:
                new = halo_exchange(new)
            break
        except (ChartEscapeError, NumericalError) as exc:
            retries += 1
            if retries > controls.retry_max:
                raise SingularitySuspected(f"step rejected {retries} times: {exc}",
                                           {"t": state.t, "dt": dt, "max_A2": max_A2}) from exc
            log.debug("step rejected (%s); halving dt", exc)
            dt *= 0.5
    out = FlowState(state.t + dt, new, dt, state.step_index + 1)
    return out, StepResult(True, dt, vmax, gres, moved, retries)


# ---------------------------------------------------------------------------
# displacement budget


class DisplacementTracker:
    """Material points of the parametric flow, followed through the graph gauge.

    A graph point over y moves with the full mean curvature vector; its domain
    footprint therefore moves with the M-components of H.  Each particle
    integrates that footprint and the path length int ||H|| dt, so that
    dist_K(F(x, t0), F(x, t)) - length should stay <= 0.
    """

    def __init__(self, f: MapField, stride: int = 3):
        g = f.grid
        c, i, j = g.nodes(g.owned)
        keep = (i % stride == 0) & (j % stride == 0)
        c, i, j = c[keep], i[keep], j[keep]
        self.chart = c.copy()
        self.y = g.coords[c, i, j].copy()
        self.dom0 = (c.copy(), self.y.copy())
        self.tgt0 = (f.charts[c, i, j].copy(), f.values[c, i, j].copy())
        self.length = np.zeros(len(c))

    def __len__(self):
        return len(self.chart)

    def advance(self, rhs: RhsData, dt: float):
        g = rhs.f.grid
        HM = g.bilinear(g.fill_halo(rhs.lattice(rhs.kin.HM, (rhs.kin.HM.shape[-1],))), self.chart, self.y)
        speed = g.bilinear(g.fill_halo(rhs.lattice(np.sqrt(rhs.kin.H2))), self.chart, self.y)
        self.length = self.length + dt * speed
        self.chart, self.y = g.owner_of(self.chart, self.y + dt * HM)

    def target_points(self, f: MapField, jets):
        """Second-order Taylor evaluation of f at the particles from the nearest node."""
        g = f.grid
        k = np.rint((self.y - g.origin) / g.h).astype(int)
        c, i, j = self.chart, k[:, 0], k[:, 1]
        d = self.y - g.coords[c, i, j]
        val = (jets.value[c, i, j] + np.einsum("paq,pq->pa", jets.df[c, i, j], d)
               + 0.5 * np.einsum("paqr,pq,pr->pa", jets.d2f[c, i, j], d, d))
        return jets.charts[c, i, j], val

    def residual(self, f: MapField, jets) -> float:
        if not len(self):
            return 0.0
        g = f.grid
        dM = g.domain_distance(self.dom0[0], self.dom0[1], self.chart, self.y)
        ch, q = self.target_points(f, jets)
        dN = f.target.distance_array(self.tgt0[1], q, self.tgt0[0], ch)
        return float(np.max(np.hypot(dM, dN) - self.length))


# ---------------------------------------------------------------------------
# run loop


@dataclass
class RunResult:
    state: FlowState
    report: MonitorReport
    status: str                    # "converged", "t_max", "max_steps", "singularity"
    steps: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    max_gauge_residual: float = 0.0


def run(initial: MapField, controls: Controls | None = None, callback=None,
        step_callback=None) -> RunResult:
    """Integrate until the image diameter drops below diam_tol, t exceeds t_max,
    max_steps is reached or a singularity is suspected.

    Monitors (and the gauge check, when enabled) are evaluated every
    ``monitor_stride`` steps and at the end.  ``callback(state, sample)`` runs
    after every monitor sample and ``step_callback(state)`` after every step.
    """
    controls = controls or Controls()
    tol = controls.tolerances
    tol.diam_tol = controls.diam_tol
    state = FlowState(0.0, halo_exchange(initial))
    report = MonitorReport()
    tracker = DisplacementTracker(state.f, controls.particle_stride)
    owned = state.f.grid.owned
    rhs = flow_rhs(state.f)
    gd = graph_geometry(state.f, rhs.jets)
    inv = node_invariants(gd, owned)
    kappa = choose_kappa(inv, gd.m)
    report.kappa_used = kappa
    report.p_enabled = kappa is not None
    result = RunResult(state, report, "t_max")
    quiet = replace(controls, gauge_check=False)

    def take_sample():
        nonlocal gd, inv
        if gd is None:
            gd = graph_geometry(state.f, rhs.jets)
            inv = node_invariants(gd, owned)
        if controls.gauge_check:
            gres = gauge_residual(state.f, gd, rhs.velocity)[0]
            result.max_gauge_residual = max(result.max_gauge_residual, gres)
        disp = tracker.residual(state.f, rhs.jets)
        s = sample(state.t, state.f, gd, kappa, disp, report, inv)
        report.samples.append(s)
        if callback is not None:
            callback(state, s)
        return s

    s = take_sample()
    max_A2 = s.max_A2
    while True:
        if s.image_diameter < controls.diam_tol:
            result.status = "converged"
            break
        if state.t >= controls.t_max:
            result.status = "t_max"
            break
        if controls.max_steps is not None and state.step_index >= controls.max_steps:
            result.status = "max_steps"
            break
        try:
            new, res = step(state, quiet, rhs, max_A2)
        except SingularitySuspected as exc:
            result.status = "singularity"
            result.diagnostics = dict(exc.diagnostics, message=str(exc))
            break
        tracker.advance(rhs, res.dt_used)
        result.steps.append(res)
        state = new
        if step_callback is not None:
            step_callback(state)
        rhs = flow_rhs(state.f)
        gd = None
        if state.step_index % controls.monitor_stride == 0:
            s = take_sample()
            max_A2 = s.max_A2
    if report.samples[-1].t != state.t:
        take_sample()
    result.state = state
    assert_suite(report, tol, state.f.grid.h)
    return result
