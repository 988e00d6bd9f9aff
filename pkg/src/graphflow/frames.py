"""Singular values of df and the adapted tangent/normal frames of the graph.

Everything here is batched over leading axes: ``gM`` is (..., m, m), ``gN`` is
(..., n, n) and ``df`` is (..., n, m).  Frame vectors are stored as columns of
(m+n)-vectors in product chart coordinates, M block first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

RANK_TOL = 1e-9


@dataclass
class SingularData:
    lam: np.ndarray      # (..., m) ascending
    rank: np.ndarray     # (...,) numerical rank (informational; pairing uses all min(m, n) columns)
    alpha: np.ndarray    # (..., m, m) g_M-orthonormal columns
    beta: np.ndarray     # (..., n, n) g_N-orthonormal columns
    e: np.ndarray        # (..., m+n, m) tangent frame
    xi: np.ndarray       # (..., m+n, n) normal frame
    gM: np.ndarray
    gN: np.ndarray

    @property
    def m(self):
        return self.alpha.shape[-1]

    @property
    def n(self):
        return self.beta.shape[-1]

    def normal_lam(self):
        """lambda paired with each normal vector xi_a (zero on the pure-N block)."""
        m, n = self.m, self.n
        a = np.arange(n)
        idx = np.clip(a + m - n, 0, m - 1)
        lam = np.take_along_axis(self.lam, np.broadcast_to(idx, self.lam.shape[:-1] + (n,)), -1)
        return np.where(a >= n - min(m, n), lam, 0.0)


@dataclass
class STensorValues:
    tangent: np.ndarray   # (..., m)   s(e_i, e_i)
    normal: np.ndarray    # (..., n)   s_perp(xi_a, xi_a)
    mixed: np.ndarray     # (..., m, n) s_K(e_i, xi_a)
    eps_node: np.ndarray  # (...,)


def _cholesky(g, name):
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{name} is not positive definite") from exc


def _fix_signs(vecs):
    """Make the largest-magnitude component of every column positive."""
    k = np.argmax(np.abs(vecs), axis=-2)[..., None, :]
    s = np.sign(np.take_along_axis(vecs, k, axis=-2))
    return vecs * np.where(s == 0, 1.0, s)


def product_metric(gM, gN):
    m, n = gM.shape[-1], gN.shape[-1]
    out = np.zeros(np.broadcast_shapes(gM.shape[:-2], gN.shape[:-2]) + (m + n, m + n))
    out[..., :m, :m] = gM
    out[..., m:, m:] = gN
    return out


def s_metric(gM, gN):
    """s_K = pi_M^* g_M - pi_N^* g_N as a matrix."""
    out = product_metric(gM, gN)
    out[..., gM.shape[-1]:, gM.shape[-1]:] *= -1
    return out


def singular_decompose(gM, gN, df) -> SingularData:
    """Singular values of df relative to (g_M, g_N) and the adapted frames.

    Both metrics are Cholesky-whitened, g_M = L L^T and g_N = L_N L_N^T, and the
    SVD of L_N^T df L^{-T} supplies lambda together with paired alpha/beta
    columns, so df(alpha_i) = lambda_i beta_{n-m+i} holds to round-off even for
    tiny lambda.
    """
    gM = np.asarray(gM, dtype=float)
    gN = np.asarray(gN, dtype=float)
    df = np.asarray(df, dtype=float)
    m, n = gM.shape[-1], gN.shape[-1]
    k = min(m, n)
    L = _cholesky(gM, "g_M")
    LN = _cholesky(gN, "g_N")
    LinvT = np.swapaxes(np.linalg.inv(L), -1, -2)
    D = np.swapaxes(LN, -1, -2) @ df @ LinvT
    U, sig, Vt = np.linalg.svd(D, full_matrices=True)
    V = np.swapaxes(Vt, -1, -2)[..., ::-1]
    U = U[..., ::-1]
    lam = np.concatenate([np.zeros(sig.shape[:-1] + (m - k,)), sig[..., ::-1]], axis=-1)

    alpha = LinvT @ V
    # deterministic signs: alpha by its largest component, paired beta follows
    kmax = np.argmax(np.abs(alpha), axis=-2)[..., None, :]
    sa = np.sign(np.take_along_axis(alpha, kmax, axis=-2))
    sa = np.where(sa == 0, 1.0, sa)
    alpha = alpha * sa
    su = np.ones(U.shape[:-2] + (1, n))
    su[..., 0, n - k:] = sa[..., 0, m - k:]
    U = U * su
    if n > k:
        U[..., :n - k] = _fix_signs(U[..., :n - k])
    beta = np.linalg.solve(np.swapaxes(LN, -1, -2), U)

    rank = np.sum(lam > RANK_TOL * (1.0 + lam[..., -1:]), axis=-1)
    img = df @ alpha
    e = np.concatenate([alpha, img], axis=-2) / np.sqrt(1.0 + lam**2)[..., None, :]

    sd = SingularData(lam, rank, alpha, beta, e, None, gM, gN)
    pos = np.arange(n)
    lt = sd.normal_lam()
    at = np.take(alpha, np.clip(pos + m - n, 0, m - 1), axis=-1)
    at = np.where((pos >= n - k)[None, :], at, 0.0)
    sd.xi = np.concatenate([-lt[..., None, :] * at, beta], axis=-2) / np.sqrt(1.0 + lt**2)[..., None, :]
    return sd


def s_tensor_values(sd: SingularData) -> STensorValues:
    """Closed-form values of s_K on the adapted frames."""
    lam = sd.lam
    m, n = sd.m, sd.n
    tangent = (1.0 - lam**2) / (1.0 + lam**2)
    lt = sd.normal_lam()
    normal = -(1.0 - lt**2) / (1.0 + lt**2)
    i = np.arange(m)[:, None]
    a = np.arange(n)[None, :]
    paired = a == i + n - m
    mixed = np.where(paired, (-2.0 * lam / (1.0 + lam**2))[..., :, None], 0.0)
    return STensorValues(tangent, normal, mixed, tangent.min(axis=-1))


def s_tensor_direct(sd: SingularData):
    """Evaluate s_K on the stored frame vectors; returns (tangent, normal, mixed) Gram blocks."""
    S = s_metric(sd.gM, sd.gN)
    eT = np.swapaxes(sd.e, -1, -2)
    xT = np.swapaxes(sd.xi, -1, -2)
    return eT @ S @ sd.e, xT @ S @ sd.xi, eT @ S @ sd.xi


def frame_gram(sd: SingularData):
    """g_K Gram matrix of the combined frame (e | xi); the identity when orthonormal."""
    G = product_metric(sd.gM, sd.gN)
    F = np.concatenate([sd.e, sd.xi], axis=-1)
    return np.swapaxes(F, -1, -2) @ G @ F


def epsilon_min(values, mask=None) -> float:
    """Smallest s(e_i, e_i) over the selected nodes.

    ``values`` is an STensorValues or a SingularData."""
    if isinstance(values, SingularData):
        values = s_tensor_values(values)
    eps = values.eps_node if mask is None else values.eps_node[mask]
    return float(np.min(eps))
