"""Asymptotic descriptors of distances between two sample covariance matrices.

For a pair of populations the distance ``d_hat`` behaves, for large ``M``,
like a Gaussian with mean ``dbar + m / M`` and variance ``Sigma / M^2``.  This
module provides the building blocks (``phi``, ``m_j``, ``sigma_j^2``,
``varrho``) for arbitrary matrix arguments and the closed forms of
``dbar``, ``m`` and ``Sigma`` for the Euclidean, symmetrised KL and subspace
distances.  Cross-covariances between different pairs go through the
quadrature engine.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .errors import DomainError, NumericError
from .model import Ensemble, Member
from .spectral import OmegaContext

# Cauchy-circle differentiation around mu0: nodes per circle and radius as a
# fraction of the distance from mu0 to the nearest singularity
CAUCHY_NODES = 64
CAUCHY_FRACTION = 0.5
EIG_FLOOR = 1e-12


class DistanceKind(enum.Enum):
    EUCLIDEAN = "eu"
    KL = "kl"
    SUBSPACE = "ss"

    @classmethod
    def parse(cls, value) -> "DistanceKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"eu": cls.EUCLIDEAN, "euclidean": cls.EUCLIDEAN, "kl": cls.KL,
                   "symmetrizedkl": cls.KL, "ss": cls.SUBSPACE, "subspace": cls.SUBSPACE}
        if key not in aliases:
            raise DomainError(f"unknown distance kind {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class Generic:
    """A distance given only through its functional representation."""

    spec: object


def _resolve_kind(kind):
    if isinstance(kind, Generic):
        return kind
    if hasattr(kind, "terms"):
        return Generic(kind)
    return DistanceKind.parse(kind)


class PairHandle:
    """Two distinct populations with their cross-basis rotation cached.

    ``V = U_i^H U_j`` maps the eigenbasis of ``j`` into that of ``i`` and
    ``W = |V|^2`` turns traces of products of matrices diagonal in the two
    bases into bilinear forms: ``tr[X_i Y_j] = x^T W y``.
    """

    def __init__(self, ctx_i: OmegaContext, ctx_j: OmegaContext, varsigma: int = 1):
        if ctx_i is ctx_j or (ctx_i.label and ctx_i.label == ctx_j.label):
            raise DomainError("a pair needs two distinct populations")
        if ctx_i.M != ctx_j.M:
            raise DomainError("populations in a pair must share M")
        self.ctx_i, self.ctx_j = ctx_i, ctx_j
        self.varsigma = int(varsigma)
        self.V = ctx_i._basis().conj().T @ ctx_j._basis()
        self.W = np.abs(self.V) ** 2
        unit = np.abs(self.V @ self.V.conj().T - np.eye(self.M)).max()
        if unit > 1e-10:
            raise NumericError(f"cross rotation is not unitary (error {unit:.2e})")

    @property
    def M(self) -> int:
        return self.ctx_i.M

    @property
    def labels(self) -> tuple:
        return (self.ctx_i.label, self.ctx_j.label)

    def swapped(self) -> "PairHandle":
        return PairHandle(self.ctx_j, self.ctx_i, self.varsigma)

    def partner_in_own(self, side: int, values):
        """Matrix diagonal in the other member's basis, rotated into member ``side``'s basis."""
        V = self.V if side == 0 else self.V.conj().T
        return K.rotate_diag(V, values)

    def __repr__(self):
        return f"PairHandle{self.labels}"


def contexts_for(ensemble: Ensemble) -> dict:
    return {m.label: OmegaContext.from_member(m) for m in ensemble.members}


def pair_from_ensemble(ensemble: Ensemble, a, b, contexts: dict | None = None) -> PairHandle:
    ctxs = contexts if contexts is not None else {}
    out = []
    for key in (a, b):
        member: Member = ensemble[key]
        if member.label not in ctxs:
            ctxs[member.label] = OmegaContext.from_member(member)
        out.append(ctxs[member.label])
    return PairHandle(out[0], out[1], ensemble.varsigma)


# ---------------------------------------------------------------------------
# Building blocks with explicit matrix arguments (standard basis)


def omega_correction(ctx: OmegaContext, omega, A):
    """``(phi, Omega)`` with ``Omega = A + phi I``."""
    At = ctx.rotate(A)
    phi = K.phi_rows(ctx, omega, np.diag(At)[None, :])[0]
    return phi, np.asarray(A) + phi * np.eye(ctx.M)


def little_m(ctx: OmegaContext, omega, A):
    """``(1/N) tr[R^2 Q^3 Omega(omega; A)] / (1 - Gamma(omega))``."""
    At = ctx.rotate(A)
    return (K.little_m_weights(ctx, omega) @ np.diag(At))[0]


def sigma_sq(ctx: OmegaContext, omega, omega2, A, B):
    """Bivariate variance kernel ``sigma_j^2(omega, omega'; A, B)``."""
    At, Bt = ctx.rotate(A), ctx.rotate(B)
    return K.sigma_weighted(ctx, omega, 1.0, At, omega2, 1.0, Bt)[0, 0]


def varrho(pair: PairHandle, w_i, w_j, w_i2, w_j2):
    ci, cj = pair.ctx_i, pair.ctx_j
    x = ci.lam * ci.q(np.asarray(w_i, dtype=complex)) * ci.q(np.asarray(w_i2, dtype=complex))
    y = cj.lam * cj.q(np.asarray(w_j, dtype=complex)) * cj.q(np.asarray(w_j2, dtype=complex))
    gi = K.one_minus(ci.gamma(w_i, w_i2))
    gj = K.one_minus(cj.gamma(w_j, w_j2))
    t = x @ pair.W @ y
    return t**2 / (ci.N * cj.N * gi * gj)


def _real(value, scale=1.0, what="value"):
    v = complex(value)
    if abs(v.imag) > 1e-8 * max(1.0, abs(scale), abs(v.real)):
        raise NumericError(f"{what} has imaginary residue {v.imag:.3e}")
    return v.real


# ---------------------------------------------------------------------------
# Cauchy-integral derivatives at mu0


def _cauchy_radius(ctx: OmegaContext) -> float:
    return CAUCHY_FRACTION * (ctx.omega_minus - ctx.mu0)


def _circle(ctx: OmegaContext, n: int = CAUCHY_NODES):
    r = _cauchy_radius(ctx)
    theta = 2 * np.pi * np.arange(n) / n
    e = np.exp(1j * theta)
    return ctx.mu0 + r * e, np.conj(e) / (n * r)


def derivative_at_mu0(ctx: OmegaContext, fn, n: int = CAUCHY_NODES):
    """``d/d omega`` of a vectorised analytic function at ``mu0``."""
    w, h = _circle(ctx, n)
    return np.sum(h * fn(w))


# ---------------------------------------------------------------------------
# Closed forms


def _tr_stats(pair: PairHandle):
    li, lj = pair.ctx_i.lam, pair.ctx_j.lam
    return li, lj, li @ pair.W @ lj


def _psi_matrix(pair: PairHandle, side: int):
    """``Psi_j = +-(R_1 - R_2) + (tr R_j / N_j) I``, signed so that ``R_j`` enters positively."""
    ci, cj = pair.ctx_i, pair.ctx_j
    R1, R2 = ci.matrix(), cj.matrix()
    own = ci if side == 0 else cj
    D = (R1 - R2) if side == 0 else (R2 - R1)
    return D + (own.trace / own.N) * np.eye(pair.M)


def _eu(pair: PairHandle):
    ci, cj = pair.ctx_i, pair.ctx_j
    M, s = pair.M, pair.varsigma
    li, lj, cross = _tr_stats(pair)
    t1, t2 = np.sum(li**2), np.sum(lj**2)
    dbar = (t1 + t2 - 2 * cross) / M + ci.trace**2 / (M * ci.N) + cj.trace**2 / (M * cj.N)
    m = s * (t1 / ci.N + t2 / cj.N)
    var = 2 * (t1 / ci.N) ** 2 + 2 * (t2 / cj.N) ** 2 + 4 * cross**2 / (ci.N * cj.N)
    R = (ci.matrix(), cj.matrix())
    for side, c in ((0, ci), (1, cj)):
        X = R[side] @ _psi_matrix(pair, side)
        var += 4.0 / c.N * np.real(np.trace(X @ X))
    return dbar, m, (1 + s) * var


def _kl_dbar(pair: PairHandle):
    out = -1.0
    for side, (c, partner) in enumerate(((pair.ctx_i, pair.ctx_j), (pair.ctx_j, pair.ctx_i))):
        W = pair.W if side == 0 else pair.W.T
        q = 1.0 / (c.lam - c.mu0)
        diagB = W @ partner.lam
        g = K.one_minus(c.gamma(c.mu0))
        out += np.sum(c.lam * q**2 * diagB) / (2 * pair.M * g)
    return float(out)


def _kl_mean(pair: PairHandle):
    total = 0.0
    for side, (c, partner) in enumerate(((pair.ctx_i, pair.ctx_j), (pair.ctx_j, pair.ctx_i))):
        W = pair.W if side == 0 else pair.W.T
        diagB = W @ partner.lam

        def f(w, c=c, diagB=diagB):
            return w * (K.little_m_weights(c, w) @ diagB)

        d = derivative_at_mu0(c, f)
        total += _real(d, what="KL mean derivative") / (2 * K.one_minus(c.gamma(c.mu0)))
    return pair.varsigma * total


def _upsilon_self(pair: PairHandle, side: int, wa, ha, wb, hb):
    """``sum_ab ha hb Upsilon_jj(wa, wb)`` for the member on ``side``."""
    c = pair.ctx_i if side == 0 else pair.ctx_j
    partner = pair.ctx_j if side == 0 else pair.ctx_i
    Bt = pair.partner_in_own(side, partner.lam)
    dB = np.real(np.diag(Bt))
    qa, qb = c.q(wa), c.q(wb)
    den = K.one_minus(K.gamma_grid(c, wa, wb))
    t = (qa * c.lam * dB) @ qb.T
    first = t**2 / (c.N * partner.N * den)
    third = qa @ (np.abs(Bt) ** 2) @ qb.T / partner.N
    grid = first + third
    val = ha @ grid @ hb
    val += np.sum(K.sigma_weighted(c, wa, ha, Bt, wb, hb, Bt))
    return val


def _cross_trace_term(pair: PairHandle, side: int, wa, wb):
    """Grid of ``tr[R Q_a Q'_b R Q_a Omega(a; R')]`` with ``a`` on ``side``, ``b`` on the partner."""
    c = pair.ctx_i if side == 0 else pair.ctx_j
    partner = pair.ctx_j if side == 0 else pair.ctx_i
    V = pair.V if side == 0 else pair.V.conj().T
    Bt = K.rotate_diag(V, partner.lam)
    qa, qb = c.q(wa), partner.q(wb)
    d = c.lam * qa
    first = np.empty((qa.shape[0], qb.shape[0]), dtype=complex)
    Vc = V.conj()
    for a in range(qa.shape[0]):
        # diag(V^H D B D V) with D = diag(d_a)
        G = Bt * np.outer(d[a], d[a])
        first[a] = np.sum(Vc * (G @ V), axis=0) @ qb.T
    phi = K.phi_rows(c, wa, np.broadcast_to(np.real(np.diag(Bt)), qa.shape))
    second = phi[:, None] * ((d**2) @ pair_W(pair, side) @ qb.T)
    return first + second


def pair_W(pair: PairHandle, side: int):
    return pair.W if side == 0 else pair.W.T


def _upsilon_cross(pair: PairHandle, w1, h1, w2, h2):
    ci, cj = pair.ctx_i, pair.ctx_j
    x = ci.lam * ci.q(w1)
    y = cj.lam * cj.q(w2)
    grid = (x @ pair.W @ y.T) ** 2 / (ci.N * cj.N)
    grid -= _cross_trace_term(pair, 0, w1, w2) / ci.N
    grid -= _cross_trace_term(pair, 1, w2, w1).T / cj.N
    return h1 @ grid @ h2


def _kl_variance(pair: PairHandle):
    ci, cj = pair.ctx_i, pair.ctx_j
    total = 0.0
    for side, c in ((0, ci), (1, cj)):
        w, h = _circle(c)
        hw = h * w
        val = _upsilon_self(pair, side, w, hw, w, hw)
        total += _real(val, what="KL variance") / (4 * K.one_minus(c.gamma(c.mu0)) ** 2)
    w1, h1 = _circle(ci)
    w2, h2 = _circle(cj)
    val = _upsilon_cross(pair, w1, h1 * w1, w2, h2 * w2)
    total += _real(val, what="KL variance") / (
        2 * K.one_minus(ci.gamma(ci.mu0)) * K.one_minus(cj.gamma(cj.mu0)))
    return (1 + pair.varsigma) * total


def kl_oversampled(pair: PairHandle):
    """Shortcut forms of ``(dbar, m, Sigma)`` when both members are oversampled."""
    ci, cj = pair.ctx_i, pair.ctx_j
    if ci.N <= ci.M or cj.N <= cj.M:
        raise DomainError("oversampled shortcut needs N > M for both members")
    M, s = pair.M, pair.varsigma
    N1, N2 = ci.N, cj.N
    W = pair.W
    # tr[R1^{-1} R2] and tr[(R1^{-1} R2)^2]
    t12 = (1 / ci.lam) @ W @ cj.lam
    t21 = (1 / cj.lam) @ W.T @ ci.lam
    A = pair.partner_in_own(0, cj.lam) / ci.lam[:, None]
    s12 = np.real(np.trace(A @ A))
    B = pair.partner_in_own(1, ci.lam) / cj.lam[:, None]
    s21 = np.real(np.trace(B @ B))
    dbar = (N1 * t12 / (N1 - M) + N2 * t21 / (N2 - M)) / (2 * M) - 1
    m = s / 2 * (N1 * t12 / (N1 - M) ** 2 + N2 * t21 / (N2 - M) ** 2)
    u11 = (N1 + N2 - M) / (N2 * (N1 - M)) * (s12 + t12**2 / (N1 - M))
    u22 = (N1 + N2 - M) / (N1 * (N2 - M)) * (s21 + t21**2 / (N2 - M))
    u12 = M**2 / (N1 * N2) - M / N1 - M / N2
    var = (N1**2 * u11 / (4 * (N1 - M) ** 2) + N2**2 * u22 / (4 * (N2 - M) ** 2)
           + N1 * N2 * u12 / (2 * (N1 - M) * (N2 - M)))
    return float(dbar), float(m), float((1 + s) * var)


def _require_undersampled(pair: PairHandle):
    for c in (pair.ctx_i, pair.ctx_j):
        if c.N >= c.M:
            raise DomainError(f"subspace distance needs N < M (member {c.label!r} has N={c.N}, M={c.M})")


def _ss_parts(pair: PairHandle):
    ci, cj = pair.ctx_i, pair.ctx_j
    a = ci.lam / (ci.lam - ci.mu0)   # diag of R_i Q_i(mu_i) in basis i
    b = cj.lam / (cj.lam - cj.mu0)
    return a, b


def _ss(pair: PairHandle):
    _require_undersampled(pair)
    ci, cj = pair.ctx_i, pair.ctx_j
    M, s = pair.M, pair.varsigma
    a, b = _ss_parts(pair)
    dbar = (ci.N + cj.N) / M - 2.0 / M * (a @ pair.W @ b)
    m = 0.0
    var = 0.0
    for side, (c, own, other) in enumerate(((ci, a, b), (cj, b, a))):
        Wt = pair_W(pair, side)
        mu = c.mu0
        m += -2 * mu * (K.little_m_weights(c, mu) @ (Wt @ other))[0].real
        At = pair.partner_in_own(side, other)
        var += 4 * mu**2 * K.sigma_weighted(c, mu, 1.0, At, mu, 1.0, At)[0, 0].real
    x = ci.lam / (ci.lam - ci.mu0) ** 2
    y = cj.lam / (cj.lam - cj.mu0) ** 2
    g = K.one_minus(ci.gamma(ci.mu0)) * K.one_minus(cj.gamma(cj.mu0))
    var += 4 * (ci.mu0 * cj.mu0) ** 2 * (x @ pair.W @ y) ** 2 / (ci.N * cj.N * g)
    return float(dbar), float(s * m), float((1 + s) * var)


def ss_varrho_term(pair: PairHandle) -> float:
    """The last (cross) contribution to the subspace variance, divided by ``1 + varsigma``."""
    _require_undersampled(pair)
    ci, cj = pair.ctx_i, pair.ctx_j
    x = ci.lam / (ci.lam - ci.mu0) ** 2
    y = cj.lam / (cj.lam - cj.mu0) ** 2
    g = K.one_minus(ci.gamma(ci.mu0)) * K.one_minus(cj.gamma(cj.mu0))
    return float(4 * (ci.mu0 * cj.mu0) ** 2 * (x @ pair.W @ y) ** 2 / (ci.N * cj.N * g))


def _check_variance(v: float) -> float:
    if v < 0:
        if v < -1e-9 * max(1.0, abs(v)):
            raise NumericError(f"negative variance {v:.3e}")
        return 0.0
    return v


def deterministic_equivalent(pair: PairHandle, kind) -> float:
    kind = _resolve_kind(kind)
    if kind is DistanceKind.EUCLIDEAN:
        return float(_eu(pair)[0])
    if kind is DistanceKind.KL:
        return _kl_dbar(pair)
    if kind is DistanceKind.SUBSPACE:
        return _ss(pair)[0]
    from .quadrature import dbar_numeric
    return dbar_numeric(pair, kind.spec)


def second_order_mean(pair: PairHandle, kind) -> float:
    kind = _resolve_kind(kind)
    if pair.varsigma == 0:
        if kind is DistanceKind.SUBSPACE:
            _require_undersampled(pair)
        return 0.0
    if kind is DistanceKind.EUCLIDEAN:
        return float(_eu(pair)[1])
    if kind is DistanceKind.KL:
        return float(_kl_mean(pair))
    if kind is DistanceKind.SUBSPACE:
        return _ss(pair)[1]
    from .quadrature import mean2_numeric
    return mean2_numeric(pair, kind.spec)


def variance(pair: PairHandle, kind) -> float:
    kind = _resolve_kind(kind)
    if kind is DistanceKind.EUCLIDEAN:
        v = float(_eu(pair)[2])
    elif kind is DistanceKind.KL:
        v = float(_kl_variance(pair))
    elif kind is DistanceKind.SUBSPACE:
        v = _ss(pair)[2]
    else:
        from .quadrature import cov_numeric
        v = cov_numeric(pair, pair, kind.spec, kind.spec)
    return _check_variance(v)


def cross_covariance(pair_r: PairHandle, pair_s: PairHandle, kind, nodes: int | None = None) -> float:
    """Asymptotic covariance of two normalised distances; zero without a shared member."""
    from .quadrature import cov_numeric, spec_for

    if not set(pair_r.labels) & set(pair_s.labels):
        return 0.0
    kind = _resolve_kind(kind)
    spec = kind.spec if isinstance(kind, Generic) else spec_for(kind)
    if kind is DistanceKind.SUBSPACE:
        _require_undersampled(pair_r)
        _require_undersampled(pair_s)
    kw = {} if nodes is None else {"nodes": nodes}
    return cov_numeric(pair_r, pair_s, spec, spec, **kw)


# ---------------------------------------------------------------------------
# Assembly


@dataclass
class DescriptorSet:
    """First- and second-order descriptors for a list of pairs."""

    pairs: list
    dbar: np.ndarray
    mean2: np.ndarray
    cov: np.ndarray

    def to_dict(self) -> dict:
        return {"pairs": [list(p) for p in self.pairs], "dbar": self.dbar.tolist(),
                "mean2": self.mean2.tolist(), "cov": self.cov.tolist()}


@dataclass
class GaussianLaw:
    """Gaussian approximation of a vector of distances at finite ``M``."""

    descriptors: DescriptorSet
    M: int
    varsigma: int
    kind: str
    floored: bool = field(default=False)

    @property
    def pairs(self):
        return self.descriptors.pairs

    @property
    def mean(self) -> np.ndarray:
        return self.descriptors.dbar + self.descriptors.mean2 / self.M

    @property
    def covariance(self) -> np.ndarray:
        return self.descriptors.cov / self.M**2

    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    def scaled(self, t: float) -> "GaussianLaw":
        """Law of ``t`` times the distance vector."""
        d = self.descriptors
        ds = DescriptorSet(d.pairs, t * d.dbar, t * d.mean2, t * t * d.cov)
        return GaussianLaw(ds, self.M, self.varsigma, self.kind, self.floored)

    def to_dict(self) -> dict:
        out = self.descriptors.to_dict()
        out.update({"M": self.M, "varsigma": self.varsigma, "kind": self.kind,
                    "mean": self.mean.tolist(), "covariance": self.covariance.tolist()})
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianLaw":
        ds = DescriptorSet([tuple(p) for p in data["pairs"]], np.asarray(data["dbar"], float),
                           np.asarray(data["mean2"], float), np.asarray(data["cov"], float))
        return cls(ds, int(data["M"]), int(data["varsigma"]), str(data["kind"]))


def floor_covariance(S: np.ndarray, rel: float = EIG_FLOOR):
    """Symmetrise and clip eigenvalues below ``rel * trace / R``; returns ``(S, clipped?)``."""
    S = 0.5 * (S + S.T)
    if S.size == 0:
        return S, False
    floor = rel * max(np.trace(S), 0.0) / S.shape[0]
    ev, U = np.linalg.eigh(S)
    if ev.min() >= floor:
        return S, False
    ev = np.maximum(ev, floor)
    return (U * ev) @ U.T, True


def gaussian_law(ensemble: Ensemble, pairs, kind, contexts: dict | None = None,
                 nodes: int | None = None) -> GaussianLaw:
    """Joint Gaussian law of the distances over ``pairs`` (label tuples or PairHandles)."""
    kind_r = _resolve_kind(kind)
    ctxs = contexts if contexts is not None else {}
    handles = [p if isinstance(p, PairHandle) else pair_from_ensemble(ensemble, p[0], p[1], ctxs)
               for p in pairs]
    labels = [h.labels for h in handles]
    if len({frozenset(x) for x in labels}) != len(labels):
        raise DomainError("pairs must be distinct")
    R = len(handles)
    dbar = np.array([deterministic_equivalent(h, kind_r) for h in handles])
    mean2 = np.array([second_order_mean(h, kind_r) for h in handles])
    S = np.zeros((R, R))
    for r in range(R):
        S[r, r] = variance(handles[r], kind_r)
        for s in range(r + 1, R):
            if set(labels[r]) & set(labels[s]):
                S[r, s] = S[s, r] = cross_covariance(handles[r], handles[s], kind_r, nodes)
    S, clipped = floor_covariance(S)
    name = kind_r.value if isinstance(kind_r, DistanceKind) else getattr(kind_r.spec, "name", "generic")
    return GaussianLaw(DescriptorSet(labels, dbar, mean2, S), ensemble.M, ensemble.varsigma, name, clipped)
