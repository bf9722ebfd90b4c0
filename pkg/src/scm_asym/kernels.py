"""Vectorised building blocks shared by the closed forms and the quadrature engine.

Every function works in the eigenbasis of one population: resolvents are
diagonal vectors ``q(omega)`` and any other matrix enters through its
representation ``At = U^H A U`` in that basis.  Grids of ``omega`` values are
1-d arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularityError
from .spectral import OmegaContext

SINGULAR_TOL = 1e-13
# element budget for one block of the n x M^2 products in sigma_weighted
_CHUNK = 1 << 22


def _arr(w):
    return np.atleast_1d(np.asarray(w, dtype=complex))


def one_minus(value, what="1 - Gamma"):
    if np.any(np.abs(1.0 - value) < SINGULAR_TOL):
        raise SingularityError(f"{what} vanishes")
    return 1.0 - value


def gamma_grid(ctx: OmegaContext, wa, wb):
    """``Gamma(omega_a, omega_b)`` for all pairs, shape ``(na, nb)``."""
    qa, qb = ctx.q(_arr(wa)), ctx.q(_arr(wb))
    return (qa * ctx.lam**2) @ qb.T / ctx.N


def phi_rows(ctx: OmegaContext, w, diags):
    """``phi(omega_a; A_a)`` where row ``a`` of ``diags`` is ``diag(At_a)``."""
    w = _arr(w)
    q = ctx.q(w)
    g = one_minus(np.sum(ctx.lam**2 * q**2, axis=1) / ctx.N)
    return w / g * np.sum(q**2 * ctx.lam * diags, axis=1) / ctx.N


def little_m_weights(ctx: OmegaContext, w):
    """Rows ``D(omega)`` with ``m(omega, A) = D(omega) . diag(At)``, shape ``(n, M)``."""
    w = _arr(w)
    q = ctx.q(w)
    lam, N = ctx.lam, ctx.N
    g = one_minus(np.sum(lam**2 * q**2, axis=1) / N)
    s3 = np.sum(lam**2 * q**3, axis=1)
    D = lam**2 * q**3 + (w * s3 / (N * g))[:, None] * (lam * q**2)
    return D / (N * g)[:, None]


def _stack(h, mats):
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    mats = np.asarray(mats)
    if mats.ndim == 2:
        mats = mats[None]
    return h, mats


def sigma_weighted(ctx: OmegaContext, wa, ha, At, wb, hb, Bt):
    """Weighted grid of ``sigma^2`` values, shape ``(na, nb)``.

    Entry ``(a, b)`` is ``sum_{l, k} ha[l, a] hb[k, b] sigma^2(wa[a], wb[b]; At[l], Bt[k])``;
    since ``sigma^2`` is bilinear in its matrix arguments the weighted
    combination is formed per node before the expensive contraction.  With
    ``ha = hb = 1`` and single matrices this is the plain ``sigma^2`` grid.
    """
    wa, wb = _arr(wa), _arr(wb)
    ha, At = _stack(ha, At)
    hb, Bt = _stack(hb, Bt)
    lam, N, M = ctx.lam, ctx.N, ctx.M
    qa, qb = ctx.q(wa), ctx.q(wb)
    dA = ha.T @ np.diagonal(At, axis1=1, axis2=2)
    dB = hb.T @ np.diagonal(Bt, axis1=1, axis2=2)
    phiA = phi_rows(ctx, wa, dA)[:, None]
    phiB = phi_rows(ctx, wb, dB)[None, :]
    den = one_minus((qa * lam**2) @ qb.T / N, "1 - Gamma(w, w')")

    # T[a, b] = sum_st r_s r_t A_a[s, t] B_b[t, s] qa_s qa_t qb_s qb_t
    Af = At.reshape(At.shape[0], -1)
    Bf = np.swapaxes(Bt, 1, 2).reshape(Bt.shape[0], -1) * np.outer(lam, lam).reshape(-1)
    T = np.empty((wa.size, wb.size), dtype=complex)
    rows = max(1, _CHUNK // max(1, M * M))
    for lo_b in range(0, wb.size, rows):
        sl_b = slice(lo_b, lo_b + rows)
        Pb = (hb[:, sl_b].T @ Bf) * (qb[sl_b, :, None] * qb[sl_b, None, :]).reshape(-1, M * M)
        for lo_a in range(0, wa.size, rows):
            sl_a = slice(lo_a, lo_a + rows)
            Pa = (ha[:, sl_a].T @ Af) * (qa[sl_a, :, None] * qa[sl_a, None, :]).reshape(-1, M * M)
            T[sl_a, sl_b] = Pa @ Pb.T

    l2 = lam**2
    qa2, qb2 = qa**2, qb**2
    t1 = (T + phiB * ((qa2 * l2 * dA) @ qb2.T) + phiA * ((qa2 * l2) @ (qb2 * dB).T)
          + phiA * phiB * ((qa2 * l2) @ qb2.T)) / N
    left = ((qa2 * l2 * dA) @ qb.T + phiA * ((qa2 * l2) @ qb.T)) / N
    right = ((qa * l2) @ (qb2 * dB).T + phiB * ((qa * l2) @ qb2.T)) / N
    return t1 / den + left * right / den**2


def varrho_moment(ctx: OmegaContext, wa, ha, wb, hb):
    """``X = sum_ab ha[a] hb[b] x_ab x_ab^T / (1 - Gamma(a, b))`` with ``x_ab = r q_a q_b``."""
    wa, wb = _arr(wa), _arr(wb)
    qa, qb = ctx.q(wa), ctx.q(wb)
    alpha = np.outer(ha, hb) / one_minus(gamma_grid(ctx, wa, wb), "1 - Gamma(w, w')")
    Z = (qa[:, None, :] * qb[None, :, :]).reshape(-1, ctx.M) * ctx.lam
    return (Z * alpha.reshape(-1, 1)).T @ Z


def rotate_diag(V, values):
    """``V diag(values) V^H``: a matrix diagonal in another basis, seen from this one."""
    return (V * values) @ V.conj().T
