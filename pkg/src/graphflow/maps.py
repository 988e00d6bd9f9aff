"""Initial maps f: M -> N sampled on a DomainGrid.

All families are built from the domain's unit embedding, so they are smooth
across the two sphere charts by construction.  Target points are produced by
the exponential map at the target's chart-0 origin, w -> (|w|, w/|w|) in
geodesic polar coordinates.
"""

from __future__ import annotations

import numpy as np

from .grid import ATLAS, DomainGrid, MapField, halo_exchange
from .manifolds import SPHERE, ModelManifold

FAMILIES = ("constant", "dilation", "identity", "stereo_scale", "custom", "random")


def target_exp(N: ModelManifold, w):
    """Point of N at the end of the geodesic from the chart-0 origin with velocity ``w``."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] < N.dimension:
        pad = np.zeros(w.shape[:-1] + (N.dimension - w.shape[-1],))
        w = np.concatenate([w, pad], axis=-1)
    w = w[..., :N.dimension]
    rho = np.linalg.norm(w, axis=-1)
    safe = np.where(rho > 0, rho, 1.0)
    direction = np.where((rho > 0)[..., None], w / safe[..., None], 0.0)
    direction[..., 0] = np.where(rho > 0, direction[..., 0], 1.0)
    return N.from_polar(rho, direction)


def domain_features(grid: DomainGrid):
    """Smooth coordinates of the domain nodes.

    Sphere: unit embedding in R^3 with chart-0 origin at (0, 0, -1).
    Flat torus: (sin, cos) pairs of each angle, scaled so the period is 2 pi.
    """
    x = grid.coords
    if grid.boundary == ATLAS:
        charts = np.arange(grid.n_charts)[:, None, None] * np.ones(grid.shape, int)
        return grid.manifold.embed(x, charts) / grid.manifold.radius
    L = grid.period if grid.period else 2 * np.pi
    a = 2 * np.pi * x / L
    return np.concatenate([np.sin(a), np.cos(a)], axis=-1)


def _field(grid, N, charts, coords):
    values = np.where(grid.valid[..., None], coords, np.nan)
    charts = np.where(grid.valid, charts, 0).astype(int)
    return halo_exchange(MapField(grid, N, charts, values))


def constant_map(grid: DomainGrid, N: ModelManifold, q=None, q_chart=0) -> MapField:
    q = np.zeros(N.dimension) if q is None else np.asarray(q, dtype=float)
    coords = np.broadcast_to(q, grid.shape + (N.dimension,))
    coords = np.broadcast_to(coords, (grid.n_charts,) + coords.shape)
    return _field(grid, N, np.full(coords.shape[:-1], q_chart), coords)


def dilation_map(grid: DomainGrid, N: ModelManifold, c: float) -> MapField:
    """Folding contraction with singular values <= c.

    On the sphere (geodesic polar angle theta from the chart-0 origin) this is the
    equivariant map theta -> rho = c * R_M * sin(theta); on the flat torus it is
    x -> exp(c * (L/2pi) * sin(2 pi x / L)).
    """
    feats = domain_features(grid)
    if grid.boundary == ATLAS:
        w = c * grid.manifold.radius * feats[..., :2]
    else:
        L = grid.period if grid.period else 2 * np.pi
        w = c * L / (2 * np.pi) * feats[..., :2]
    charts, coords = target_exp(N, w)
    return _field(grid, N, charts, coords)


def identity_map(grid: DomainGrid, N: ModelManifold) -> MapField:
    M = grid.manifold
    if (M.kind, M.dimension, M.curvature_scale) != (N.kind, N.dimension, N.curvature_scale):
        raise ValueError("identity map needs N == M")
    charts = np.arange(grid.n_charts)[:, None, None] * np.ones(grid.shape, int)
    return _field(grid, N, charts, grid.coords.copy())


def stereo_scale_map(grid: DomainGrid, N: ModelManifold, c: float) -> MapField:
    """x -> c x in stereographic coordinates (a Moebius map, not a contraction
    globally: its singular values run from c at one pole to 1/c at the other)."""
    if grid.boundary != ATLAS or N.kind != SPHERE:
        raise ValueError("stereo_scale maps a sphere to a sphere")
    coords = grid.coords.copy()
    coords[0] *= c
    coords[1] /= c
    charts = np.arange(grid.n_charts)[:, None, None] * np.ones(grid.shape, int)
    r2 = np.sum(coords**2, axis=-1)
    flip = r2 > 1.0
    coords[flip] = coords[flip] / r2[flip][:, None]
    charts[flip] = 1 - charts[flip]
    return _field(grid, N, charts, coords)


def profile_map(grid: DomainGrid, N: ModelManifold, profile) -> MapField:
    """Equivariant sphere map theta -> rho(theta), with ``profile`` a callable on
    the polar angle theta in [0, pi] returning the geodesic radius in N."""
    if grid.boundary != ATLAS:
        raise ValueError("equivariant profiles need a sphere domain")
    feats = domain_features(grid)
    theta = np.arctan2(np.linalg.norm(feats[..., :2], axis=-1), -feats[..., 2])
    rho = np.asarray(profile(theta), dtype=float) * np.ones_like(theta)
    r = np.linalg.norm(feats[..., :2], axis=-1, keepdims=True)
    direction = np.where(r > 0, feats[..., :2] / np.where(r > 0, r, 1.0), [1.0, 0.0])
    charts, coords = target_exp(N, rho[..., None] * direction)
    return _field(grid, N, charts, coords)


def expression_profile(expr: str):
    """Compile a profile expression in ``theta`` (numpy namespace, no builtins)."""
    names = {k: getattr(np, k) for k in ("sin", "cos", "tan", "arctan", "arcsin", "arcsinh",
                                         "sinh", "cosh", "tanh", "exp", "log", "sqrt", "pi")}
    code = compile(expr, "<profile>", "eval")
    for name in code.co_names:
        if name not in names and name != "theta":
            raise ValueError(f"name {name!r} not allowed in profile expression")
    return lambda theta: eval(code, {"__builtins__": {}}, dict(names, theta=theta))


def random_map(grid: DomainGrid, N: ModelManifold, amplitude: float, seed: int = 0) -> MapField:
    """Smooth random map: quadratic polynomial in the domain features, sent
    through the exponential map of N."""
    rng = np.random.default_rng(seed)
    feats = domain_features(grid)
    k = feats.shape[-1]
    A = rng.standard_normal((N.dimension, k))
    B = rng.standard_normal((N.dimension, k, k))
    w = np.einsum("ak,...k->...a", A, feats) + 0.5 * np.einsum("akl,...k,...l->...a", B, feats, feats)
    w = amplitude * w / (np.abs(A).sum() + np.abs(B).sum()) * N.dimension
    charts, coords = target_exp(N, w)
    return _field(grid, N, charts, coords)


def make_initial_map(grid: DomainGrid, N: ModelManifold, family: str, parameter=0.5,
                     constant_point=None, expression="", seed=0) -> MapField:
    if family == "constant":
        return constant_map(grid, N, constant_point)
    if family == "dilation":
        return dilation_map(grid, N, parameter)
    if family == "identity":
        return identity_map(grid, N)
    if family == "stereo_scale":
        return stereo_scale_map(grid, N, parameter)
    if family == "custom":
        return profile_map(grid, N, expression_profile(expression))
    if family == "random":
        return random_map(grid, N, parameter, seed)
    raise ValueError(f"unknown map family {family!r}")
