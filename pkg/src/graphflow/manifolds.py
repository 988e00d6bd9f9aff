"""Model spaces of constant curvature in conformal charts.

Every model space is written in a chart where the metric is conformally flat,

    g = a(x)^2 * I,    a(x) = 2 R / (1 + s |x|^2),

with ``R = 1/sqrt(|kappa|)`` and ``s = sign(kappa)``.  For the sphere these are
stereographic coordinates of the radius-R sphere (chart 0 projects from the
north pole, so its origin is the south pole; chart 1 is the mirror image and
the transition map is the inversion x -> x/|x|^2).  For hyperbolic space it is
the Poincare ball.  Euclidean space uses a = 1.

All array routines are vectorized over leading axes: ``coords`` has shape
``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, HypothesisError

SPHERE = "sphere"
HYPERBOLIC = "hyperbolic"
EUCLIDEAN = "euclidean"
KINDS = (SPHERE, HYPERBOLIC, EUCLIDEAN)

SPHERE_CHART_RADIUS = 1.8


@dataclass(frozen=True)
class ModelManifold:
    kind: str
    dimension: int
    curvature_scale: float
    chart_radius: float = SPHERE_CHART_RADIUS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        k = self.curvature_scale
        if self.kind == SPHERE and not k > 0:
            raise ValueError("a sphere needs positive curvature")
        if self.kind == HYPERBOLIC and not k < 0:
            raise ValueError("hyperbolic space needs negative curvature")
        if self.kind == EUCLIDEAN and k != 0:
            raise ValueError("euclidean space has zero curvature")
        if self.kind == SPHERE and not self.chart_radius > 1.0:
            raise ValueError("sphere charts must overlap (chart_radius > 1)")

    # -- basic constants ---------------------------------------------------

    @property
    def sign(self) -> int:
        return {SPHERE: 1, HYPERBOLIC: -1, EUCLIDEAN: 0}[self.kind]

    @property
    def radius(self) -> float:
        if self.kind == EUCLIDEAN:
            return np.inf
        return 1.0 / np.sqrt(abs(self.curvature_scale))

    @property
    def n_charts(self) -> int:
        return 2 if self.kind == SPHERE else 1

    @property
    def compact(self) -> bool:
        return self.kind == SPHERE

    def __repr__(self):
        return f"ModelManifold({self.kind}, dim={self.dimension}, kappa={self.curvature_scale:g})"

    # -- chart domain --------------------------------------------------------

    def in_chart(self, coords, chart=0) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        r2 = np.sum(coords * coords, axis=-1)
        if self.kind == SPHERE:
            ok = r2 <= self.chart_radius**2 * (1 + 1e-12)
        elif self.kind == HYPERBOLIC:
            ok = r2 < 1.0
        else:
            ok = np.isfinite(r2)
        return ok & np.isfinite(r2)

    def check_point(self, p: "ChartPoint"):
        if p.chart not in range(self.n_charts):
            raise DomainError(f"{self!r} has no chart {p.chart}")
        if len(p.coords) != self.dimension:
            raise DomainError(f"point has {len(p.coords)} coordinates, expected {self.dimension}")
        if not self.in_chart(p.coords, p.chart):
            raise DomainError(f"{p} lies outside chart {p.chart} of {self!r}")

    def transition(self, coords, chart=0):
        """Map coordinates in ``chart`` to the other sphere chart.

        Returns ``(other_chart, new_coords)``.  Points that do not fit into the
        other chart come back as NaN rather than raising.
        """
        if self.kind != SPHERE:
            return chart, np.array(coords, dtype=float)
        coords = np.asarray(coords, dtype=float)
        r2 = np.sum(coords * coords, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = coords / r2
        bad = ~self.in_chart(out)
        out = np.where(bad[..., None], np.nan, out)
        return 1 - chart, out

    def transition_jacobian(self, coords):
        """Jacobian of the inversion x -> x/|x|^2 at ``coords``; shape (..., d, d)."""
        x = np.asarray(coords, dtype=float)
        r2 = np.sum(x * x, axis=-1)[..., None, None]
        eye = np.eye(x.shape[-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            return (r2 * eye - 2.0 * x[..., :, None] * x[..., None, :]) / r2**2

    # -- conformal data ------------------------------------------------------

    def conformal_factor(self, coords):
        x = np.asarray(coords, dtype=float)
        if self.kind == EUCLIDEAN:
            return np.ones(x.shape[:-1])
        r2 = np.sum(x * x, axis=-1)
        return 2.0 * self.radius / (1.0 + self.sign * r2)

    def _log_factor_derivatives(self, x):
        """Gradient and Hessian of log a(x)."""
        s = self.sign
        d = x.shape[-1]
        if s == 0:
            return np.zeros(x.shape), np.zeros(x.shape + (d,))
        q = 1.0 + s * np.sum(x * x, axis=-1)[..., None]
        grad = -2.0 * s * x / q
        hess = (-2.0 * s * np.eye(d) / q[..., None]
                + 4.0 * x[..., :, None] * x[..., None, :] / q[..., None] ** 2)
        return grad, hess

    def metric(self, coords):
        x = np.asarray(coords, dtype=float)
        a = self.conformal_factor(x)
        return (a * a)[..., None, None] * np.eye(x.shape[-1])

    def christoffel(self, coords):
        """Gamma[..., k, i, j] = Christoffel symbol of the second kind."""
        x = np.asarray(coords, dtype=float)
        d = x.shape[-1]
        g, _ = self._log_factor_derivatives(x)
        eye = np.eye(d)
        return (eye[:, :, None] * g[..., None, None, :]
                + eye[:, None, :] * g[..., None, :, None]
                - eye[None, :, :] * g[..., :, None, None])

    def christoffel_derivative(self, coords):
        """dGamma[..., k, i, j, q] = d/dx^q Gamma^k_ij."""
        x = np.asarray(coords, dtype=float)
        d = x.shape[-1]
        _, h = self._log_factor_derivatives(x)
        eye = np.eye(d)
        return (eye[:, :, None, None] * h[..., None, None, :, :]
                + eye[:, None, :, None] * h[..., None, :, None, :]
                - eye[None, :, :, None] * h[..., :, None, None, :])

    def riemann(self, coords):
        """Rm[..., i, j, k, l] = R(d_i, d_j, d_k, d_l), assembled from the
        Christoffel symbols and their derivatives.

        Convention: Rm[i,j,i,j] is the sectional curvature times the area
        factor, so constant curvature reads kappa*(g_ik g_jl - g_il g_jk).
        """
        x = np.asarray(coords, dtype=float)
        return assemble_riemann(self.metric(x), self.christoffel(x), self.christoffel_derivative(x))

    def constant_curvature_tensor(self, coords):
        g = self.metric(coords)
        return self.curvature_scale * (np.einsum("...ik,...jl->...ijkl", g, g)
                                       - np.einsum("...il,...jk->...ijkl", g, g))

    def curvature_operator(self, coords, X, Y, Z):
        """R(X, Y)Z for constant curvature: kappa(<Y,Z> X - <X,Z> Y)."""
        a2 = self.conformal_factor(coords) ** 2
        yz = a2 * np.sum(Y * Z, axis=-1)
        xz = a2 * np.sum(X * Z, axis=-1)
        return self.curvature_scale * (yz[..., None] * X - xz[..., None] * Y)

    # -- embeddings and distance ------------------------------------------------

    def embed(self, coords, chart=0):
        """Sphere: point on the radius-R sphere in R^(d+1).  Hyperbolic: point on
        the hyperboloid model (time coordinate first), scaled by R."""
        x = np.asarray(coords, dtype=float)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        if self.kind == SPHERE:
            last = (r2 - 1.0) if np.ndim(chart) == 0 and chart == 0 else None
            if last is None:
                ch = np.asarray(chart)[..., None]
                last = np.where(ch == 0, r2 - 1.0, 1.0 - r2)
            return self.radius * np.concatenate([2.0 * x, last], axis=-1) / (1.0 + r2)
        if self.kind == HYPERBOLIC:
            return self.radius * np.concatenate([1.0 + r2, 2.0 * x], axis=-1) / (1.0 - r2)
        return x.copy()

    def distance_array(self, x, y, chart_x=0, chart_y=0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == SPHERE:
            u = self.embed(x, chart_x) / self.radius
            v = self.embed(y, chart_y) / self.radius
            num = np.linalg.norm(u - v, axis=-1)
            den = np.linalg.norm(u + v, axis=-1)
            return 2.0 * self.radius * np.arctan2(num, den)
        if self.kind == HYPERBOLIC:
            diff = np.linalg.norm(x - y, axis=-1)
            q = np.sqrt((1.0 - np.sum(x * x, axis=-1)) * (1.0 - np.sum(y * y, axis=-1)))
            return 2.0 * self.radius * np.arcsinh(diff / q)
        return np.linalg.norm(x - y, axis=-1)

    def diameter(self, coords, charts=None, block=1024) -> float:
        """Largest pairwise distance of a point cloud given in chart coordinates."""
        x = np.asarray(coords, dtype=float).reshape(-1, self.dimension)
        if len(x) < 2:
            return 0.0
        ch = np.zeros(len(x), dtype=int) if charts is None else np.asarray(charts).reshape(-1)
        if self.kind == EUCLIDEAN:
            from scipy.spatial.distance import pdist
            return float(pdist(x).max())
        p = self.embed(x, ch)
        q = p
        if self.kind == HYPERBOLIC:
            q = p * np.concatenate([[-1.0], np.ones(self.dimension)])
        # distance is monotone decreasing in the (Minkowski) inner product
        best, bi, bj = np.inf, 0, 0
        for start in range(0, len(p), block):
            gram = q[start:start + block] @ p.T
            k = np.argmin(gram)
            i, j = divmod(int(k), len(p))
            if gram[i, j] < best:
                best, bi, bj = gram[i, j], start + i, j
        return float(self.distance_array(x[bi], x[bj], ch[bi], ch[bj]))

    # -- geodesic polar coordinates about the chart-0 origin ------------------

    def sn(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == SPHERE:
            return self.radius * np.sin(r / self.radius)
        if self.kind == HYPERBOLIC:
            return self.radius * np.sinh(r / self.radius)
        return r

    def cs(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == SPHERE:
            return np.cos(r / self.radius)
        if self.kind == HYPERBOLIC:
            return np.cosh(r / self.radius)
        return np.ones_like(r)

    def chart_radius_of(self, rho):
        """Chart-0 coordinate radius of the point at geodesic distance rho from the origin."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == SPHERE:
            return np.tan(rho / (2.0 * self.radius))
        if self.kind == HYPERBOLIC:
            return np.tanh(rho / (2.0 * self.radius))
        return rho

    def geodesic_radius(self, coords, chart=0):
        """Geodesic distance from the chart-0 origin."""
        r = np.linalg.norm(np.asarray(coords, dtype=float), axis=-1)
        if self.kind == SPHERE:
            theta = 2.0 * np.arctan(r)
            return self.radius * np.where(np.asarray(chart) == 0, theta, np.pi - theta)
        if self.kind == HYPERBOLIC:
            return 2.0 * self.radius * np.arctanh(r)
        return r

    def from_polar(self, rho, direction):
        """Point at geodesic distance ``rho`` from the chart-0 origin along the
        unit vector ``direction``.  Returns ``(charts, coords)``; sphere points
        beyond the equator are placed in chart 1."""
        rho = np.asarray(rho, dtype=float)
        direction = np.asarray(direction, dtype=float)
        r = self.chart_radius_of(rho)[..., None]
        coords = r * direction
        charts = np.zeros(rho.shape, dtype=int)
        if self.kind == SPHERE:
            flip = r[..., 0] > 1.0
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                inv = direction / r
            coords = np.where(flip[..., None], inv, coords)
            charts = flip.astype(int)
        return charts, coords


def assemble_riemann(g, G, dG):
    """Rm[..., i, j, k, l] = <R(d_i, d_j) d_l, d_k> from the metric, the
    Christoffel symbols G[k, i, j] and their derivatives dG[k, i, j, q]."""
    # R(d_i, d_j) d_l = rop[p, l, i, j] d_p
    term_d = np.einsum("...pjli->...plij", dG) - np.einsum("...pilj->...plij", dG)
    term_q = (np.einsum("...piq,...qjl->...plij", G, G)
              - np.einsum("...pjq,...qil->...plij", G, G))
    return np.einsum("...kp,...plij->...ijkl", g, term_d + term_q)


@dataclass(frozen=True)
class ChartPoint:
    chart: int
    coords: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))

    def __repr__(self):
        return f"ChartPoint(chart={self.chart}, coords={self.coords.tolist()})"


@dataclass(frozen=True)
class HypothesisCheck:
    sigma: float
    mu: float
    holds: bool
    margin: float
    slacks: tuple = ()


def sphere(dimension=2, curvature=1.0):
    return ModelManifold(SPHERE, dimension, curvature)


def hyperbolic(dimension=2, curvature=-1.0):
    return ModelManifold(HYPERBOLIC, dimension, curvature)


def euclidean(dimension=2):
    return ModelManifold(EUCLIDEAN, dimension, 0.0)


def _point(mfd, p):
    if not isinstance(p, ChartPoint):
        p = ChartPoint(0, p)
    mfd.check_point(p)
    return p


def metric_at(mfd: ModelManifold, p) -> np.ndarray:
    p = _point(mfd, p)
    return mfd.metric(p.coords)


def christoffel_at(mfd: ModelManifold, p) -> np.ndarray:
    """Gamma[k, i, j] at ``p``."""
    p = _point(mfd, p)
    return mfd.christoffel(p.coords)


def sectional_curvature(Rm, g, X, Y):
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    num = np.einsum("ijkl,i,j,k,l->", Rm, X, Y, X, Y)
    area = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    return num / area


def riemann_at(mfd: ModelManifold, p):
    """Curvature tensor at ``p`` plus the sectional curvature of the first
    coordinate plane (NaN in dimension one)."""
    p = _point(mfd, p)
    Rm = mfd.riemann(p.coords)
    if mfd.dimension < 2:
        return Rm, float("nan")
    e = np.eye(mfd.dimension)
    return Rm, float(sectional_curvature(Rm, mfd.metric(p.coords), e[0], e[1]))


def distance(mfd: ModelManifold, p, q) -> float:
    p = _point(mfd, p)
    q = _point(mfd, q)
    if p.chart == q.chart and np.array_equal(p.coords, q.coords):
        return 0.0
    return float(mfd.distance_array(p.coords, q.coords, p.chart, q.chart))


def check_hypotheses(M: ModelManifold, N: ModelManifold, sigma: float, mu: float) -> HypothesisCheck:
    """Curvature assumptions of the long-time convergence result for constant
    curvature model spaces:

        sec_M > -sigma,  Ric_M >= (m-1) sigma >= (m-1) sec_N >= -mu.
    """
    m = M.dimension
    if m < 2:
        raise HypothesisError(f"dim M = {m}; at least 2 is required")
    if not (sigma > 0 and mu > 0):
        raise HypothesisError("sigma and mu must be positive")
    kM, kN = M.curvature_scale, N.curvature_scale
    slacks = (
        kM + sigma,                  # sec_M > -sigma (strict)
        (m - 1) * kM - (m - 1) * sigma,
        (m - 1) * sigma - (m - 1) * kN,
        (m - 1) * kN + mu,
    )
    holds = slacks[0] > 0 and all(s >= 0 for s in slacks[1:])
    return HypothesisCheck(sigma=sigma, mu=mu, holds=bool(holds), margin=float(min(slacks)),
                           slacks=tuple(float(s) for s in slacks))
