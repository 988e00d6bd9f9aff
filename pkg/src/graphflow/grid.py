"""Discretization of the domain, map storage, halo exchange and finite-difference jets.

Layout: every nodal quantity is a lattice array with leading shape
``(n_charts, Nx, Ny)``.  Three node classes are tracked per chart:

``evolved``  nodes whose values are advanced in time (and get jets);
``halo``     nodes read by the stencils of evolved nodes, filled by exchange;
``owned``    the evolved nodes that represent their point of M in reductions.

For the sphere every chart evolves the disk |x| <= 1.3 and owns |x| <= 1
(chart 0) or |x| < 1 (chart 1); the ring beyond is filled from the other
chart by tensor-product Lagrange interpolation (6 points per axis, so
interpolation error is O(h^6) and stays invisible in second derivatives).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ChartEscapeError, ConfigurationError
from .manifolds import EUCLIDEAN, HYPERBOLIC, SPHERE, ModelManifold

MIN_RESOLUTION = 8
HALO_WIDTH = 3
EVOLVE_RADIUS = 1.3
INTERP_OFFSETS = np.arange(-2, 4)  # 6-point Lagrange stencil, symmetric about its cell

ATLAS, PERIODIC, OPEN = "atlas", "periodic", "open"

_NEIGHBORS = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


@dataclass
class HaloMap:
    chart: int
    dst: np.ndarray          # flat lattice indices in ``chart``
    src_chart: int
    src: np.ndarray          # (n_halo, K) flat indices in ``src_chart``
    weights: np.ndarray      # (n_halo, K)


@dataclass
class DomainGrid:
    manifold: ModelManifold
    resolution: int
    h: float
    boundary: str
    coords: np.ndarray        # (C, Nx, Ny, 2)
    active: np.ndarray
    evolved: np.ndarray
    owned: np.ndarray
    halo: np.ndarray
    halo_maps: list = field(default_factory=list)
    origin: float = 0.0       # coordinate of lattice index 0
    period: float | None = None

    @property
    def n_charts(self):
        return self.coords.shape[0]

    @property
    def shape(self):
        return self.coords.shape[1:3]

    @property
    def valid(self):
        return self.evolved | self.halo

    def evolved_domain_data(self):
        """Cached (coords, a^2, grad log a) of the evolved nodes; these never change."""
        cache = self.__dict__.setdefault("_cache", {})
        if "domain" not in cache:
            x = self.coords[self.evolved]
            cache["domain"] = (x, self.manifold.conformal_factor(x) ** 2,
                               self.manifold._log_factor_derivatives(x)[0])
        return cache["domain"]

    def nodes(self, mask=None):
        """Index tuple (c, i, j) of the nodes in ``mask`` (default: evolved)."""
        return np.nonzero(self.evolved if mask is None else mask)

    def fill_halo(self, arr):
        """Copy derived lattice quantities into periodic halo nodes (no-op otherwise)."""
        if self.boundary != PERIODIC:
            return arr
        out = arr.copy()
        flat = out.reshape((self.n_charts, -1) + arr.shape[3:])
        for hm in self.halo_maps:
            flat[hm.chart, hm.dst] = flat[hm.src_chart, hm.src[:, 0]]
        return out

    # -- point location ----------------------------------------------------------

    def owner_of(self, chart, y):
        """Re-express domain points in the chart that owns them."""
        chart = np.asarray(chart).copy()
        y = np.array(y, dtype=float)
        if self.boundary == ATLAS:
            r2 = np.sum(y * y, axis=-1)
            flip = np.where(chart == 0, r2 > 1.0, r2 >= 1.0)
            y[flip] = y[flip] / r2[flip, None]
            chart[flip] = 1 - chart[flip]
        elif self.boundary == PERIODIC:
            y = np.mod(y, self.period)
        return chart, y

    def bilinear(self, arr, chart, y):
        """Bilinear interpolation of lattice data ``arr`` (C, Nx, Ny, ...) at points."""
        t = (np.asarray(y, dtype=float) - self.origin) / self.h
        k = np.floor(t).astype(int)
        fr = t - k
        out = 0.0
        for a in (0, 1):
            for b in (0, 1):
                w = (fr[:, 0] if a else 1 - fr[:, 0]) * (fr[:, 1] if b else 1 - fr[:, 1])
                v = arr[chart, k[:, 0] + a, k[:, 1] + b]
                out = out + w.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        return out

    def domain_distance(self, c0, y0, c1, y1):
        if self.boundary == PERIODIC:
            d = np.abs(np.asarray(y0) - np.asarray(y1))
            d = np.minimum(d, self.period - d)
            return np.linalg.norm(d, axis=-1)
        return self.manifold.distance_array(y0, y1, c0, c1)


def _lagrange_weights(frac, offsets=INTERP_OFFSETS):
    frac = np.asarray(frac, dtype=float)[..., None]
    w = np.ones(frac.shape[:-1] + (len(offsets),))
    for k, ok in enumerate(offsets):
        for oj in offsets:
            if oj != ok:
                w[..., k] *= (frac[..., 0] - oj) / (ok - oj)
    return w


def _dilate(mask, width):
    """Chebyshev dilation of a (C, Nx, Ny) boolean mask."""
    out = mask.copy()
    C, Nx, Ny = mask.shape
    for di in range(-width, width + 1):
        for dj in range(-width, width + 1):
            out |= shift(mask, di, dj, fill=False)
    return out


def shift(a, di, dj, fill=np.nan):
    """``out[:, i, j] = a[:, i + di, j + dj]``; out-of-lattice entries get ``fill``."""
    out = np.full_like(a, fill)
    Nx, Ny = a.shape[1], a.shape[2]
    si = slice(max(di, 0), Nx + min(di, 0))
    di_ = slice(max(-di, 0), Nx + min(-di, 0))
    sj = slice(max(dj, 0), Ny + min(dj, 0))
    dj_ = slice(max(-dj, 0), Ny + min(-dj, 0))
    out[:, di_, dj_] = a[:, si, sj]
    return out


def build_grid(M: ModelManifold, resolution: int, boundary: str | None = None,
               period: float = 2 * np.pi) -> DomainGrid:
    if int(resolution) != resolution or resolution < MIN_RESOLUTION:
        raise ConfigurationError([("resolution",
                                   f"{resolution} is below the stencil minimum {MIN_RESOLUTION}")])
    resolution = int(resolution)
    if M.dimension != 2:
        raise ConfigurationError([("domain_dim", "lattices are two-dimensional; dim M must be 2")])
    if M.kind == HYPERBOLIC:
        raise ConfigurationError([("domain_kind", "the domain must be compact (sphere or flat torus)")])
    if M.kind == SPHERE:
        if boundary not in (None, ATLAS):
            raise ConfigurationError([("boundary", "spheres use the two-chart atlas")])
        return _sphere_grid(M, resolution)
    boundary = boundary or PERIODIC
    if boundary == PERIODIC:
        return _periodic_grid(M, resolution, period)
    if boundary == OPEN:
        return _open_grid(M, resolution, period)
    raise ConfigurationError([("boundary", f"unknown boundary policy {boundary!r}")])


def _lattice(origin, h, n, n_charts):
    ax = origin + h * np.arange(n)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    xy = np.stack([X, Y], axis=-1)
    return np.broadcast_to(xy, (n_charts,) + xy.shape).copy()


def _sphere_grid(M, resolution):
    grid, problem = _sphere_layout(M, resolution)
    if problem:
        need = _min_sphere_resolution(M)
        raise ConfigurationError([("resolution", f"{resolution} too coarse for the two-chart atlas "
                                                 f"({problem}); use resolution >= {need}")])
    return grid


def _sphere_layout(M, resolution):
    rc = M.chart_radius
    h = 2.0 * rc / resolution
    n = resolution + 1
    coords = _lattice(-rc, h, n, 2)
    r2 = np.sum(coords**2, axis=-1)
    active = r2 <= rc**2 * (1 + 1e-12)
    evolved = r2 <= EVOLVE_RADIUS**2
    owned = np.stack([r2[0] <= 1.0, r2[1] < 1.0])
    halo = _dilate(evolved, HALO_WIDTH) & ~evolved
    if np.any(halo & ~active):
        return None, "halo leaves the chart"
    if np.any(_dilate(owned, 1) & ~evolved):
        return None, "owned stencils leave the evolved region"
    grid = DomainGrid(M, resolution, h, ATLAS, coords, active, evolved, owned, halo, origin=-rc)
    for c in (0, 1):
        idx = np.flatnonzero(halo[c])
        x = coords[c].reshape(-1, 2)[idx]
        y = x / np.sum(x * x, axis=-1, keepdims=True)
        t = (y + rc) / h
        k = np.floor(t).astype(int)
        fr = t - k
        wx, wy = _lagrange_weights(fr[:, 0]), _lagrange_weights(fr[:, 1])
        ii = k[:, 0, None, None] + INTERP_OFFSETS[None, :, None]
        jj = k[:, 1, None, None] + INTERP_OFFSETS[None, None, :]
        ii, jj = np.broadcast_arrays(ii, jj)
        if ii.min() < 0 or jj.min() < 0 or ii.max() >= n or jj.max() >= n:
            return None, "interpolation stencil leaves the lattice"
        src = (ii * n + jj).reshape(len(idx), -1)
        if not evolved[1 - c].reshape(-1)[src].all():
            return None, "interpolation would read halo data"
        w = (wx[:, :, None] * wy[:, None, :]).reshape(len(idx), -1)
        grid.halo_maps.append(HaloMap(c, idx, 1 - c, src, w))
    return grid, None


def _min_sphere_resolution(M):
    for res in range(MIN_RESOLUTION, 1024):
        if _sphere_layout(M, res)[1] is None:
            return res
    return None


def _periodic_grid(M, resolution, period):
    W = HALO_WIDTH
    h = period / resolution
    n = resolution + 2 * W
    coords = _lattice(-W * h, h, n, 1)
    idx = np.arange(n)
    inner = (idx >= W) & (idx < W + resolution)
    evolved = (inner[:, None] & inner[None, :])[None]
    active = np.ones_like(evolved)
    halo = ~evolved
    grid = DomainGrid(M, resolution, h, PERIODIC, coords, active, evolved, evolved.copy(), halo,
                      origin=-W * h, period=period)
    dst = np.flatnonzero(halo[0])
    i, j = np.unravel_index(dst, (n, n))
    si = (i - W) % resolution + W
    sj = (j - W) % resolution + W
    grid.halo_maps.append(HaloMap(0, dst, 0, (si * n + sj)[:, None], np.ones((len(dst), 1))))
    return grid


def _open_grid(M, resolution, length):
    W = HALO_WIDTH
    h = length / resolution
    n = resolution + 1
    coords = _lattice(0.0, h, n, 1)
    idx = np.arange(n)
    edge = np.minimum(idx, n - 1 - idx)
    dist = np.minimum(edge[:, None], edge[None, :])[None]
    evolved = dist >= W
    owned = dist >= W + 1
    return DomainGrid(M, resolution, h, OPEN, coords, np.ones_like(evolved), evolved, owned, ~evolved,
                      origin=0.0, period=None)


# ---------------------------------------------------------------------------
# Map fields


@dataclass
class MapField:
    grid: DomainGrid
    target: ModelManifold
    charts: np.ndarray        # (C, Nx, Ny) target chart ids
    values: np.ndarray        # (C, Nx, Ny, n) target chart coordinates

    def copy(self):
        return replace(self, charts=self.charts.copy(), values=self.values.copy())

    @property
    def n(self):
        return self.values.shape[-1]

    def with_values(self, values, charts=None):
        return replace(self, values=values, charts=self.charts.copy() if charts is None else charts)


def flip_points(target: ModelManifold, values):
    """Values re-expressed in the opposite sphere chart (NaN when they do not fit)."""
    return target.transition(values)[1]


def flip_vectors(target: ModelManifold, values, vectors):
    """Push tangent vectors at ``values`` (shape (..., n, k)) into the opposite chart."""
    J = target.transition_jacobian(values)
    return np.einsum("...ab,...bk->...ak", J, vectors)


def gather_points(f: MapField, di, dj, flipped=None):
    """Neighbor values at offset (di, dj) expressed in each center node's target chart."""
    v = shift(f.values, di, dj)
    if f.target.kind != SPHERE:
        return v
    ch = shift(f.charts, di, dj, fill=-1)
    if flipped is None:
        flipped = flip_points(f.target, f.values)
    vf = shift(flipped, di, dj)
    other = (ch != f.charts) & (ch >= 0)
    return np.where(other[..., None], vf, v)


def gather_vectors(f: MapField, arr, di, dj, flipped=None):
    """Like :func:`gather_points` for lattice fields of target tangent vectors.

    ``arr`` has shape (C, Nx, Ny, n, ...); the first trailing axis is the target index.
    """
    v = shift(arr, di, dj)
    if f.target.kind != SPHERE:
        return v
    ch = shift(f.charts, di, dj, fill=-1)
    if flipped is None:
        a2 = arr.reshape(arr.shape[:4] + (-1,))
        flipped = flip_vectors(f.target, f.values, a2).reshape(arr.shape)
    vf = shift(flipped, di, dj)
    other = (ch != f.charts) & (ch >= 0)
    sel = other.reshape(other.shape + (1,) * (arr.ndim - 3))
    return np.where(sel, vf, v)


def halo_exchange(f: MapField) -> MapField:
    """Refill halo nodes from the evolved nodes they mirror.  Idempotent."""
    g = f.grid
    if g.boundary == OPEN or not g.halo_maps:
        return f
    out = f.copy()
    n = f.n
    vals = out.values.reshape(g.n_charts, -1, n)
    chs = out.charts.reshape(g.n_charts, -1)
    src_vals = f.values.reshape(g.n_charts, -1, n)
    src_chs = f.charts.reshape(g.n_charts, -1)
    for hm in g.halo_maps:
        S = src_vals[hm.src_chart][hm.src]            # (nh, K, n)
        Sc = src_chs[hm.src_chart][hm.src]            # (nh, K)
        ref = Sc[np.arange(len(hm.dst)), np.argmax(np.abs(hm.weights), axis=1)]
        if f.target.kind == SPHERE and (Sc != ref[:, None]).any():
            # express the stencil in the chart of its dominant node, or in the other
            # chart when only that one holds every source value
            F = flip_points(f.target, S)
            in_ref = np.where((Sc != ref[:, None])[..., None], F, S)
            in_alt = np.where((Sc == ref[:, None])[..., None], F, S)
            use_alt = np.isnan(in_ref).any(axis=(1, 2)) & ~np.isnan(in_alt).any(axis=(1, 2))
            S = np.where(use_alt[:, None, None], in_alt, in_ref)
            ref = np.where(use_alt, 1 - ref, ref)
        if np.isnan(S).any():
            bad = np.unique(np.nonzero(np.isnan(S).any(axis=(1, 2)))[0])
            raise ChartEscapeError(f"halo interpolation in chart {hm.chart}: {len(bad)} node(s) "
                                   "have source values outside a common target chart")
        vals[hm.chart, hm.dst] = np.einsum("hk,hkn->hn", hm.weights, S)
        chs[hm.chart, hm.dst] = ref
    return out


def reown_targets(f: MapField, threshold=1.4):
    """Move sphere target values with |coords| > threshold into the other chart.

    Returns the new field and the number of nodes that changed chart."""
    if f.target.kind != SPHERE:
        return f, 0
    r2 = np.sum(f.values**2, axis=-1)
    move = f.grid.evolved & (r2 > threshold**2)
    count = int(move.sum())
    if not count:
        return f, 0
    out = f.copy()
    out.values[move] = f.values[move] / r2[move][:, None]
    out.charts[move] = 1 - f.charts[move]
    return out, count


# ---------------------------------------------------------------------------
# Jets


@dataclass
class JetField:
    value: np.ndarray   # (C, Nx, Ny, n)
    df: np.ndarray      # (C, Nx, Ny, n, 2)
    d2f: np.ndarray     # (C, Nx, Ny, n, 2, 2)
    charts: np.ndarray


def _single_chart(f: MapField):
    """True when every valid node stores its value in the same target chart."""
    if f.target.kind != SPHERE:
        return True
    ch = f.charts[f.grid.valid]
    return ch.size == 0 or bool(np.all(ch == ch[0]))


def compute_jets(f: MapField) -> JetField:
    """Second-order central differences on evolved nodes (NaN elsewhere).

    Stencil values are first re-expressed in the target chart of the center
    node; a stencil that cannot be expressed there raises ChartEscapeError.
    """
    h = f.grid.h
    if _single_chart(f):
        nb = {s: shift(f.values, *s) for s in _NEIGHBORS}
    else:
        flipped = flip_points(f.target, f.values)
        nb = {s: gather_points(f, *s, flipped=flipped) for s in _NEIGHBORS}
    V = f.values
    df = np.stack([(nb[(1, 0)] - nb[(-1, 0)]) / (2 * h),
                   (nb[(0, 1)] - nb[(0, -1)]) / (2 * h)], axis=-1)
    dxx = (nb[(1, 0)] - 2 * V + nb[(-1, 0)]) / h**2
    dyy = (nb[(0, 1)] - 2 * V + nb[(0, -1)]) / h**2
    dxy = (nb[(1, 1)] - nb[(1, -1)] - nb[(-1, 1)] + nb[(-1, -1)]) / (4 * h**2)
    d2f = np.stack([np.stack([dxx, dxy], -1), np.stack([dxy, dyy], -1)], -1)
    ev = f.grid.evolved
    bad = ev & (np.isnan(df).any(axis=(-2, -1)) | np.isnan(d2f).any(axis=(-3, -2, -1)))
    if bad.any():
        c, i, j = (int(a[0]) for a in np.nonzero(bad))
        raise ChartEscapeError(f"{int(bad.sum())} stencil(s) leave the target chart "
                               f"(first at chart {c}, node {(i, j)})")
    df[~ev] = np.nan
    d2f[~ev] = np.nan
    return JetField(V.copy(), df, d2f, f.charts.copy())


def lattice_gradient(f: MapField, arr, target_valued=False):
    """Central first differences of a lattice field; shape (..., 2) appended.

    ``target_valued`` fields carry a target index on axis 3 and are re-expressed
    in the center node's target chart before differencing.
    """
    h = f.grid.h
    if target_valued and not _single_chart(f):
        a2 = arr.reshape(arr.shape[:4] + (-1,))
        fl = flip_vectors(f.target, f.values, a2).reshape(arr.shape)
        get = lambda di, dj: gather_vectors(f, arr, di, dj, flipped=fl)  # noqa: E731
    else:
        get = lambda di, dj: shift(arr, di, dj)  # noqa: E731
    return np.stack([(get(1, 0) - get(-1, 0)) / (2 * h), (get(0, 1) - get(0, -1)) / (2 * h)], -1)


def lattice_hessian(grid: DomainGrid, arr):
    h = grid.h
    xx = (shift(arr, 1, 0) - 2 * arr + shift(arr, -1, 0)) / h**2
    yy = (shift(arr, 0, 1) - 2 * arr + shift(arr, 0, -1)) / h**2
    xy = (shift(arr, 1, 1) - shift(arr, 1, -1) - shift(arr, -1, 1) + shift(arr, -1, -1)) / (4 * h**2)
    return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -1)
