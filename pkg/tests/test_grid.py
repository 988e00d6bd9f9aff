import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fold_field, sphere_grid, torus_grid
from graphflow.errors import ChartEscapeError, ConfigurationError
from graphflow.grid import (MapField, build_grid, compute_jets, halo_exchange, lattice_gradient,
                            lattice_hessian, reown_targets)
from graphflow.manifolds import euclidean, hyperbolic, sphere
from graphflow.maps import constant_map, random_map

S2 = sphere()


def test_sphere_grid_layout():
    g = sphere_grid(64)
    assert g.n_charts == 2
    assert g.h == pytest.approx(2 * 1.8 / 64)
    assert g.shape == (65, 65)
    # owned nodes of both charts partition the sphere: each lattice point once
    r0 = np.linalg.norm(g.coords[0][g.owned[0]], axis=-1)
    r1 = np.linalg.norm(g.coords[1][g.owned[1]], axis=-1)
    assert r0.max() <= 1.0 and r1.max() < 1.0
    assert not (g.owned & ~g.evolved).any()
    assert not (g.halo & g.evolved).any()


def test_periodic_grid_layout():
    g = torus_grid(32)
    assert g.n_charts == 1
    assert g.evolved.sum() == 32 * 32
    assert g.h == pytest.approx(2 * np.pi / 32)
    # halo values wrap around
    vals = np.zeros(g.shape + (2,))[None]
    vals[g.evolved] = np.random.default_rng(0).standard_normal((32 * 32, 2))
    f = halo_exchange(MapField(g, euclidean(), np.zeros(vals.shape[:-1], int), vals))
    W = 3
    np.testing.assert_array_equal(f.values[0, 0, W:W + 32], f.values[0, 32, W:W + 32])
    np.testing.assert_array_equal(f.values[0, W:W + 32, W + 32], f.values[0, W:W + 32, W])


@pytest.mark.parametrize("res", [4, 7])
def test_resolution_below_stencil_minimum(res):
    with pytest.raises(ConfigurationError) as info:
        build_grid(euclidean(), res, "periodic")
    assert info.value.violations[0][0] == "resolution"


def test_coarse_sphere_grid_names_minimum():
    with pytest.raises(ConfigurationError, match="resolution >= 29"):
        build_grid(S2, 16)
    build_grid(S2, 29)


def test_hyperbolic_domain_rejected():
    with pytest.raises(ConfigurationError):
        build_grid(hyperbolic(), 32)


# -- jets ------------------------------------------------------------------------


def test_constant_map_jets_vanish(const32):
    j = compute_jets(const32)
    ev = const32.grid.evolved
    assert np.all(j.df[ev] == 0) and np.all(j.d2f[ev] == 0)
    assert np.all(np.isnan(j.df[~ev]))


def test_constant_map_halo_is_the_point(const32):
    f = const32
    halo = f.grid.halo
    # chart-0 origin of the target, expressed in whatever chart the halo node uses
    assert np.all(f.values[halo & (f.charts == 0)] == 0.0)


def test_linear_map_jets_exact():
    g = build_grid(euclidean(), 16, "open", period=2.0)
    B = np.array([[0.3, -1.2], [2.0, 0.7]])
    vals = np.einsum("ab,...b->...a", B, g.coords)
    f = MapField(g, euclidean(), np.zeros(g.shape, int)[None], vals)
    j = compute_jets(f)
    ev = g.evolved
    np.testing.assert_allclose(j.df[ev], np.broadcast_to(B, j.df[ev].shape), atol=1e-13)
    np.testing.assert_allclose(j.d2f[ev], 0.0, atol=1e-11)


def fold_chart_map(c=0.5):
    """Chart expression of the fold map S^2 -> S^2 near the chart-0 origin."""
    x, y = sp.symbols("x y", real=True)
    r = sp.sqrt(x**2 + y**2)
    t = sp.tan(c * r / (1 + r**2)) / r
    F = sp.Matrix([t * x, t * y])
    X = sp.Matrix([x, y])
    D = F.jacobian(X)
    D2 = [[[sp.diff(F[a], X[i], X[j]) for j in range(2)] for i in range(2)] for a in range(2)]
    return (x, y), F, D, D2


FOLD = fold_chart_map()


def fold_oracle(point):
    (x, y), F, D, D2 = FOLD
    sub = {x: point[0], y: point[1]}
    return (np.array(F.evalf(subs=sub), float).ravel(), np.array(D.evalf(subs=sub), float),
            np.array([[[float(e.evalf(subs=sub)) for e in row] for row in mat] for mat in D2]))


def test_fold_jets_at_origin():
    g = sphere_grid(64)
    j = compute_jets(fold_field(64))
    k = 32
    np.testing.assert_allclose(g.coords[0, k, k], 0.0, atol=1e-15)
    np.testing.assert_allclose(j.df[0, k, k], 0.5 * np.eye(2), atol=5 * g.h**2)
    np.testing.assert_allclose(j.d2f[0, k, k], 0.0, atol=1e-12)


@pytest.mark.parametrize("node_frac", [(0.225, 0.1125), (-0.45, 0.3375)])
def test_fold_jets_second_order(node_frac):
    errs = []
    for res in (32, 64, 128):
        g = sphere_grid(res)
        i, j = (int(round((v + 1.8) / g.h)) for v in node_frac)
        p = g.coords[0, i, j]
        np.testing.assert_allclose(p, node_frac, atol=1e-12)
        jets = compute_jets(fold_field(res))
        val, D, D2 = fold_oracle(p)
        np.testing.assert_allclose(jets.value[0, i, j], val, atol=1e-14)
        errs.append((np.abs(jets.df[0, i, j] - D).max(), np.abs(jets.d2f[0, i, j] - D2).max()))
    errs = np.array(errs)
    assert np.all(errs[:-1] / errs[1:] > 3.5), errs


def test_lattice_derivatives_of_smooth_scalar():
    g = sphere_grid(64)
    x = g.coords
    arr = np.sin(x[..., 0]) * np.cos(2 * x[..., 1])
    grad = lattice_gradient(fold_field(64), arr)
    hess = lattice_hessian(g, arr)
    inner = np.linalg.norm(x, axis=-1) < 1.0
    exact_g = np.stack([np.cos(x[..., 0]) * np.cos(2 * x[..., 1]), -2 * np.sin(x[..., 0]) * np.sin(2 * x[..., 1])], -1)
    assert np.abs(grad[inner] - exact_g[inner]).max() < 2 * g.h**2
    exact_xx = -arr
    assert np.abs(hess[..., 0, 0][inner] - exact_xx[inner]).max() < 2 * g.h**2


# -- halo exchange and ownership -------------------------------------------------


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 1.5))
def test_halo_exchange_idempotent(seed, amp):
    f = random_map(sphere_grid(32), S2, amp, seed)
    once = halo_exchange(f)
    twice = halo_exchange(once)
    assert np.array_equal(once.values, twice.values, equal_nan=True)
    assert np.array_equal(once.charts, twice.charts)


def test_halo_exchange_noop_for_open_grid():
    g = build_grid(euclidean(), 16, "open", period=1.0)
    f = MapField(g, euclidean(), np.zeros(g.shape, int)[None], np.zeros(g.shape + (2,))[None])
    assert halo_exchange(f) is f


def test_halo_exchange_interpolates_smooth_maps():
    # halo values come from 6-point interpolation in the other chart; compare to the closed form
    from graphflow.maps import domain_features, target_exp
    errs = []
    for res in (32, 64):
        f = fold_field(res)
        g = f.grid
        ch, exact = target_exp(S2, 0.5 * domain_features(g)[..., :2])
        hal = g.halo
        errs.append(np.abs(S2.embed(f.values[hal], f.charts[hal]) - S2.embed(exact[hal], ch[hal])).max())
    assert errs[1] < 1e-7 and errs[0] / errs[1] > 16, errs


def test_reown_targets_preserves_points():
    f = fold_field(32, c=0.5).copy()
    g = f.grid
    # push some values toward the chart edge
    vals = f.values.copy()
    vals[g.evolved] *= 6.0
    f2 = MapField(g, S2, f.charts.copy(), vals)
    out, moved = reown_targets(f2)
    assert moved > 0
    ev = g.evolved
    np.testing.assert_allclose(S2.embed(out.values[ev], out.charts[ev]),
                               S2.embed(f2.values[ev], f2.charts[ev]), atol=1e-12)
    assert np.all(np.linalg.norm(out.values[ev], axis=-1) <= 1.4)


def test_escape_detected_by_jets():
    f = fold_field(32).copy()
    g = f.grid
    c, i, j = (a[0] for a in g.nodes(g.owned))
    f.values[c, i, j] = np.nan
    with pytest.raises(ChartEscapeError):
        compute_jets(f)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.29), st.floats(0, 2 * np.pi), st.integers(0, 1))
def test_owner_of_represents_same_point(r, phi, chart):
    g = sphere_grid(32)
    y = np.array([[r * np.cos(phi), r * np.sin(phi)]])
    c2, y2 = g.owner_of(np.array([chart]), y)
    r2 = np.linalg.norm(y2[0])
    assert (r2 <= 1.0) if c2[0] == 0 else (r2 < 1.0)
    np.testing.assert_allclose(S2.embed(y2, c2), S2.embed(y, np.array([chart])), atol=1e-12)


def test_bilinear_exact_on_affine_data():
    g = sphere_grid(32)
    arr = 2.0 + 3.0 * g.coords[..., 0] - g.coords[..., 1]
    pts = np.array([[0.13, -0.41], [0.77, 0.05]])
    out = g.bilinear(arr, np.array([0, 1]), pts)
    np.testing.assert_allclose(out, 2 + 3 * pts[:, 0] - pts[:, 1], atol=1e-13)
