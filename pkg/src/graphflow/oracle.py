"""One-dimensional reduced flow for rotationally symmetric maps S^2 -> N^2.

A symmetric map sends the point at polar distance s (geodesic polar
coordinates about a pole) and angle phi to the point at distance rho(s) and
the same angle.  In these coordinates the induced metric is
diag(1 + rho'^2, sn_M(s)^2 + sn_N(rho)^2), and the graph-gauge velocity is

    rho_t = rho'' / (1 + rho'^2)
            + (sn_M cs_M rho' - sn_N(rho) cs_N(rho)) / (sn_M^2 + sn_N(rho)^2).

Both poles are fixed points of the rotation, so their images stay fixed
(rho pinned at both ends).  The singular values are |rho'| (radial) and
sn_N(rho) / sn_M(s) (angular), and ||H||^2 = rho_t^2 / (1 + rho'^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifolds import SPHERE, ModelManifold
from .monitors import MonitorSample


@dataclass
class Profile:
    s: np.ndarray          # polar distance on M, from 0 to pi R_M
    rho: np.ndarray        # target geodesic radius
    M: ModelManifold
    N: ModelManifold

    def __post_init__(self):
        if self.M.kind != SPHERE or self.M.dimension != 2 or self.N.dimension != 2:
            raise ValueError("the reduced flow needs M = S^2 and a surface target")
        if self.rho[0] != 0.0 or np.any(self.rho < 0):
            raise ValueError("profile must satisfy rho >= 0 and rho(0) = 0")

    @property
    def n_nodes(self):
        return len(self.s)

    @property
    def ds(self):
        return self.s[1] - self.s[0]

    @classmethod
    def from_function(cls, M, N, rho_fn, n_nodes=201):
        s = np.linspace(0.0, np.pi * M.radius, n_nodes)
        rho = np.asarray(rho_fn(s), dtype=float) * np.ones_like(s)
        rho[0] = 0.0
        return cls(s, np.abs(rho), M, N)

    def with_rho(self, rho):
        return Profile(self.s, rho, self.M, self.N)


def fold_profile(M, N, c, n_nodes=201):
    """rho = c R_M sin(s / R_M): the reduced form of the dilation family."""
    return Profile.from_function(M, N, lambda s: c * M.radius * np.sin(s / M.radius), n_nodes)


def stereo_profile(M, N, c, n_nodes=201):
    """rho = 2 R_N arctan(c tan(s / 2 R_M)) (Moebius scaling, sphere targets)."""
    def fn(s):
        half = np.minimum(s / (2 * M.radius), np.pi / 2)
        return 2 * N.radius * np.arctan2(c * np.sin(half), np.cos(half))
    return Profile.from_function(M, N, fn, n_nodes)


def _derivatives(p: Profile, rho):
    """rho' (fourth order) and rho'' (second order) with odd-reflection ghosts at the poles.

    rho - rho(pole) is odd in the distance to either pole, so the ghosts keep the
    O(ds^4) error of rho' small enough that dividing by sn_M(s) near a pole
    still leaves a second-order velocity.
    """
    ds = p.ds
    a, b = rho[0], rho[-1]
    ext = np.concatenate([2 * a - rho[2:0:-1], rho, 2 * b - rho[-2:-4:-1]])
    d1 = (ext[:-4] - 8 * ext[1:-3] + 8 * ext[3:-1] - ext[4:]) / (12 * ds)
    d2 = np.zeros_like(rho)
    d2[1:-1] = (rho[2:] - 2 * rho[1:-1] + rho[:-2]) / ds**2
    return d1, d2


def reduced_rhs(p: Profile, rho=None):
    """Velocity rho_t at every node (zero at the pinned poles)."""
    rho = p.rho if rho is None else rho
    d1, d2 = _derivatives(p, rho)
    s = p.s[1:-1]
    snM, csM = p.M.sn(s), p.M.cs(s)
    r = rho[1:-1]
    snN, csN = p.N.sn(r), p.N.cs(r)
    v = np.zeros_like(rho)
    v[1:-1] = d2[1:-1] / (1 + d1[1:-1] ** 2) + (snM * csM * d1[1:-1] - snN * csN) / (snM**2 + snN**2)
    return v


def singular_values(p: Profile, rho=None):
    """(radial, angular) singular values; the angular one uses its pole limit |rho'|."""
    rho = p.rho if rho is None else rho
    d1, _ = _derivatives(p, rho)
    snM = p.M.sn(p.s)
    ang = np.empty_like(rho)
    inner = slice(1, -1)
    ang[inner] = p.N.sn(rho[inner]) / snM[inner]
    ang[0], ang[-1] = abs(d1[0]), abs(d1[-1])
    return np.abs(d1), ang


def image_diameter(p: Profile, rho=None):
    """Diameter of the image, a union of geodesic circles about the target origin."""
    rho = p.rho if rho is None else rho
    tot = rho[:, None] + rho[None, :]
    if p.N.kind == SPHERE:
        tot = np.minimum(tot, 2 * np.pi * p.N.radius - tot)
    return float(np.max(tot))


def reduced_sample(t, p: Profile, rho=None) -> MonitorSample:
    rho = p.rho if rho is None else rho
    lr, la = singular_values(p, rho)
    lam = np.maximum(lr, la)
    lmax = float(lam.max())
    d1, _ = _derivatives(p, rho)
    v = reduced_rhs(p, rho)
    H2 = v * v / (1 + d1 * d1)
    logdet = np.log1p(lr**2) + np.log1p(la**2)
    nan = float("nan")
    return MonitorSample(float(t), (1 - lmax**2) / (1 + lmax**2), lmax, float(H2.max()), nan,
                         float(logdet.max()), nan, image_diameter(p, rho), nan)


@dataclass
class ReducedControls:
    cfl_safety: float = 0.2
    t_max: float = 10.0
    diam_tol: float = 1e-3
    sample_times: list | None = None     # exact output times; default every sample_dt
    sample_dt: float = 0.05


@dataclass
class ReducedRun:
    profile: Profile
    samples: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    status: str = "t_max"
    steps: int = 0


def run_reduced(p: Profile, controls: ReducedControls | None = None) -> ReducedRun:
    """Explicit midpoint integration with dt = cfl_safety * ds^2.

    Samples are taken exactly at ``sample_times`` (steps are shortened to land
    on them); without them the run samples every ``sample_dt`` and stops once
    the image diameter is below ``diam_tol`` or t reaches ``t_max``.
    """
    c = controls or ReducedControls()
    dt0 = c.cfl_safety * p.ds**2
    out = ReducedRun(p)
    rho = p.rho.copy()
    t = 0.0
    if c.sample_times is not None:
        targets = sorted(float(x) for x in c.sample_times)
        stop_on_diam = False
    else:
        n = int(np.floor(c.t_max / c.sample_dt + 1e-9))
        targets = [k * c.sample_dt for k in range(n + 1)]
        if targets[-1] < c.t_max:
            targets.append(c.t_max)
        stop_on_diam = True
    for target in targets:
        while t < target - 1e-14:
            dt = min(dt0, target - t)
            k1 = reduced_rhs(p, rho)
            k2 = reduced_rhs(p, rho + 0.5 * dt * k1)
            rho = rho + dt * k2
            t = target if dt < dt0 else t + dt
            out.steps += 1
        smp = reduced_sample(t, p, rho)
        out.samples.append(smp)
        out.profiles.append(rho.copy())
        if not np.all(np.isfinite(rho)):
            out.status = "singularity"
            break
        if stop_on_diam and smp.image_diameter < c.diam_tol:
            out.status = "converged"
            break
    out.profile = p.with_rho(np.abs(rho))
    return out
