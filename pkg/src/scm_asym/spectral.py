"""The companion map ``omega(z)``, its inverse ``z(omega)``, Gamma, mu0 and contours.

For a population with distinct eigenvalues ``gamma_m`` (multiplicities
``K_m``) estimated from ``N`` samples,

    z(omega) = omega * (1 - (1/N) sum_m K_m gamma_m / (gamma_m - omega))

and ``omega(z)`` is the branch of its inverse that preserves the half plane
of ``z`` (for real ``z``: the real root with ``Gamma(omega) < 1``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, GeometryError, NumericError, PoleError
from .model import DEFAULT_RATIO_GUARD, Member, PopulationCovariance, PopulationSpectrum

_NEWTON_TOL = 1e-13
_NEWTON_MAXIT = 60


def support_interval(spectrum: PopulationSpectrum, N: int) -> tuple[float, float]:
    """Interval that contains every positive SCM eigenvalue for large ``M``."""
    c = spectrum.M / N
    lo = spectrum.eigenvalues[0] * (1.0 - np.sqrt(c)) ** 2
    hi = spectrum.eigenvalues[-1] * (1.0 + np.sqrt(c)) ** 2
    return float(lo), float(hi)


class OmegaContext:
    """Cached per-population quantities feeding every descriptor formula.

    Build with :meth:`from_member` or :meth:`from_covariance`; a context made
    :meth:`from_spectrum` has no eigenbasis and only supports scalar maps.
    """

    def __init__(self, spectrum: PopulationSpectrum, N: int, basis=None, lam=None,
                 guard: float = DEFAULT_RATIO_GUARD, label: str = ""):
        if N < 1:
            raise DomainError("N must be positive")
        self.spectrum = spectrum
        self.gam = spectrum.eigenvalues
        self.K = spectrum.multiplicities.astype(float)
        self.M = spectrum.M
        self.N = int(N)
        self.c = self.M / self.N
        self.label = label
        self.guard = guard
        self.U = basis
        self.lam = spectrum.expanded() if lam is None else np.asarray(lam, dtype=float)
        self.trace = float(np.dot(self.K, self.gam))
        self.support = support_interval(spectrum, self.N)
        self.mu0 = solve_mu0(self)
        self.omega_minus, self.omega_plus = _edge_preimages(self)
        self.x_minus = float(np.real(self.z(self.omega_minus)))
        self.x_plus = float(np.real(self.z(self.omega_plus)))

    @classmethod
    def from_spectrum(cls, spectrum: PopulationSpectrum, N: int, **kw) -> "OmegaContext":
        return cls(spectrum, N, **kw)

    @classmethod
    def from_covariance(cls, cov: PopulationCovariance, N: int, **kw) -> "OmegaContext":
        return cls(cov.spectrum, N, basis=cov.eigenbasis, lam=cov.eigenvalues, **kw)

    @classmethod
    def from_member(cls, member: Member, **kw) -> "OmegaContext":
        return cls.from_covariance(member.covariance, member.N, label=member.label, **kw)

    @property
    def undersampled(self) -> bool:
        return self.N < self.M

    # Scalar / vectorised maps over distinct eigenvalues.
    def z(self, omega):
        w = np.asarray(omega)
        s = np.sum(self.K * self.gam / (self.gam - w[..., None]), axis=-1) / self.N
        return w * (1.0 - s)

    def gamma(self, omega, omega2=None):
        w = np.asarray(omega)
        w2 = w if omega2 is None else np.asarray(omega2)
        return np.sum(
            self.K * self.gam**2 / ((self.gam - w[..., None]) * (self.gam - w2[..., None])), axis=-1
        ) / self.N

    def q(self, omega):
        """Diagonal of ``Q(omega) = (R - omega I)^{-1}`` in the eigenbasis, shape ``(..., M)``."""
        return 1.0 / (self.lam - np.asarray(omega)[..., None])

    def resolvent(self, omega) -> np.ndarray:
        """Dense ``Q(omega)`` in the standard basis."""
        U = self._basis()
        return (U * self.q(omega)) @ U.conj().T

    def rotate(self, A) -> np.ndarray:
        """Express a standard-basis matrix in this population's eigenbasis."""
        U = self._basis()
        return U.conj().T @ np.asarray(A) @ U

    def matrix(self) -> np.ndarray:
        U = self._basis()
        return (U * self.lam) @ U.conj().T

    def _basis(self):
        if self.U is None:
            return np.eye(self.M)
        return self.U

    def check_ratio(self):
        if abs(self.c - 1.0) < self.guard:
            raise DomainError(f"c = {self.c:.4f} is within {self.guard} of 1")

    def __repr__(self):
        return f"OmegaContext(label={self.label!r}, M={self.M}, N={self.N}, mu0={self.mu0:.6g})"


def _check_pole(ctx: OmegaContext, omega):
    d = np.min(np.abs(np.asarray(omega)[..., None] - ctx.gam), axis=-1)
    if np.any(d <= 1e-14 * np.maximum(1.0, ctx.gam[-1])):
        raise PoleError("omega coincides with a population eigenvalue")


def z_of_omega(ctx: OmegaContext, omega):
    """Return ``(z(omega), z'(omega))`` with ``z' = 1 - Gamma(omega, omega)``."""
    _check_pole(ctx, omega)
    return ctx.z(omega), 1.0 - ctx.gamma(omega)


def gamma(ctx: OmegaContext, omega, omega2=None):
    """``(1/N) tr[R^2 Q(omega) Q(omega2)]``; ``omega2`` defaults to ``omega``."""
    _check_pole(ctx, omega)
    if omega2 is not None:
        _check_pole(ctx, omega2)
    return ctx.gamma(omega, omega2)


def solve_mu0(ctx: OmegaContext) -> float:
    """Smallest root of ``mu (1 - (1/N) tr[R Q(mu)]) = 0``: zero when oversampled."""
    if abs(ctx.c - 1.0) < ctx.guard:
        raise DomainError(f"c = {ctx.c:.4f} is within {ctx.guard} of 1")
    if ctx.N > ctx.M:
        return 0.0
    gam, K, N = ctx.gam, ctx.K, ctx.N

    def f(mu):
        return np.sum(K * gam / (gam - mu)) - N

    lo = -gam[-1] * ctx.M / N
    hi = -1e-12 * gam[0]
    for _ in range(200):
        if f(lo) < 0:
            break
        lo *= 2.0
    else:
        raise NumericError("could not bracket mu0")
    if f(hi) <= 0:
        raise NumericError("could not bracket mu0 from above")
    mu = brentq(f, lo, hi, xtol=1e-15 * abs(lo), rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(mu)


def _edge_preimages(ctx: OmegaContext):
    """Real roots of ``Gamma(omega) = 1`` left of the smallest and right of the largest eigenvalue."""
    gam, K, N = ctx.gam, ctx.K, ctx.N
    spread = np.sqrt(np.sum(K * gam**2) / N)

    def g(w):
        return np.sum(K * gam**2 / (gam - w) ** 2) / N - 1.0

    near_lo = gam[0] * np.sqrt(K[0] / N) * 0.5
    near_hi = gam[-1] * np.sqrt(K[-1] / N) * 0.5
    if len(gam) > 1:
        near_lo = min(near_lo, 0.5 * (gam[1] - gam[0]))
        near_hi = min(near_hi, 0.5 * (gam[-1] - gam[-2]))
    w_minus = brentq(g, gam[0] - 2.0 * spread - 1.0, gam[0] - near_lo, xtol=1e-15, maxiter=500)
    w_plus = brentq(g, gam[-1] + near_hi, gam[-1] + 2.0 * spread + 1.0, xtol=1e-15, maxiter=500)
    return float(w_minus), float(w_plus)


def _arrowhead_roots(ctx: OmegaContext, z):
    """All ``M_bar + 1`` roots of ``z(omega) = z`` as eigenvalues of an arrowhead matrix."""
    gam, K, N = ctx.gam, ctx.K, ctx.N
    b = 1j * gam * np.sqrt(K / N)
    n = gam.size
    H = np.zeros((n + 1, n + 1), dtype=complex)
    H[0, 0] = z - ctx.trace / N
    H[0, 1:] = b
    H[1:, 0] = b
    H[np.arange(1, n + 1), np.arange(1, n + 1)] = gam
    return np.linalg.eigvals(H)


def _newton(ctx: OmegaContext, z, w0):
    w = complex(w0)
    scale = max(1.0, abs(z))
    for _ in range(_NEWTON_MAXIT):
        g = complex(ctx.z(w)) - z
        if abs(g) <= _NEWTON_TOL * scale:
            return w, abs(g)
        d = 1.0 - complex(ctx.gamma(w))
        if d == 0:
            break
        step = g / d
        # keep away from the poles at the eigenvalues
        lam = 1.0
        for _ in range(30):
            wn = w - lam * step
            if np.min(np.abs(wn - ctx.gam)) > 1e-12 * scale and abs(complex(ctx.z(wn)) - z) < abs(g) * (1 - 1e-4 * lam):
                break
            lam *= 0.5
        else:
            break
        w = wn
    g = abs(complex(ctx.z(w)) - z)
    return w, g


def _select_root(ctx: OmegaContext, z, roots):
    if z.imag != 0.0:
        good = roots[np.sign(roots.imag) == np.sign(z.imag)]
        if good.size == 0:
            raise NumericError("no root in the half plane of z")
        return good[np.argmin(np.abs(ctx.z(good) - z))]
    real = roots[np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots))].real
    ok = real[ctx.gamma(real) < 1.0]
    if ok.size == 0:
        raise DomainError(f"z = {z.real} lies inside the support; omega(z) is undefined on the real axis")
    return complex(ok[np.argmin(np.abs(ctx.z(ok) - z.real))])


def _accept(ctx, z, w, resid):
    if resid > 1e-10 * max(1.0, abs(z)):
        return False
    if z.imag != 0.0:
        return np.sign(w.imag) == np.sign(z.imag)
    return abs(w.imag) <= 1e-12 * max(1.0, abs(w)) and float(ctx.gamma(w.real)) < 1.0


def _solve_one(ctx: OmegaContext, z: complex, guess=None) -> complex:
    if z.imag == 0.0:
        w = _select_root(ctx, z, _arrowhead_roots(ctx, z))
        w, r = _newton(ctx, z, w.real)
        w = complex(w.real, 0.0)
        if not _accept(ctx, z, w, abs(complex(ctx.z(w)) - z)):
            raise NumericError(f"omega({z}) did not converge", residual=r)
        return w
    starts = [guess] if guess is not None else []
    starts.append(z)
    for w0 in starts:
        w, r = _newton(ctx, z, w0)
        if _accept(ctx, z, w, r):
            return w
    w = _select_root(ctx, z, _arrowhead_roots(ctx, z))
    w, r = _newton(ctx, z, w)
    if not _accept(ctx, z, w, r):
        raise NumericError(f"omega({z}) did not converge", residual=r)
    return w


def solve_omega(ctx: OmegaContext, z):
    """``omega(z)`` for a scalar or an ordered array of points.

    Arrays are solved by continuation: each point is warm-started from the
    previous solution, so pass contour nodes in traversal order.
    """
    arr = np.asarray(z)
    if arr.ndim == 0:
        return _solve_one(ctx, complex(arr))
    flat = arr.astype(complex).reshape(-1)
    out = np.empty_like(flat)
    prev = None
    for k, zk in enumerate(flat):
        if prev is None and zk.imag != 0.0 and zk.real > ctx.x_plus:
            # start on the real branch right of the support
            xr = zk.real
            prev = brentq(lambda w: float(ctx.z(w)) - xr, ctx.omega_plus * (1 + 1e-14) + 1e-300,
                          max(2 * xr + 2 * ctx.trace, ctx.omega_plus + 1.0) + abs(xr), xtol=1e-15)
        out[k] = _solve_one(ctx, zk, prev)
        prev = out[k]
    return out.reshape(arr.shape)


@dataclass(frozen=True)
class Contour:
    """Closed contour sampled for the periodic trapezoidal rule.

    ``sum(g(nodes) * weights)`` approximates the counter-clockwise integral
    of ``g``; ``orientation`` is ``+1`` for counter-clockwise traversal.
    """

    nodes: np.ndarray
    weights: np.ndarray
    encloses_zero: bool
    orientation: int = 1

    def __len__(self):
        return self.nodes.size

    def reversed(self) -> "Contour":
        return Contour(self.nodes[::-1].copy(), -self.weights[::-1], self.encloses_zero, -self.orientation)

    def integrate(self, values) -> complex:
        """``(1 / 2 pi i)`` times the contour integral of sampled values."""
        return np.tensordot(self.weights, values, axes=(0, 0)) / (2j * np.pi)

    def winding_number(self, point: complex) -> float:
        """Discrete argument principle: total change of ``arg(z - point)`` over ``2 pi``."""
        d = self.nodes - point
        dphi = np.angle(np.roll(d, -1) / d)
        return float(np.sum(dphi) / (2 * np.pi))


def _theta(nodes: int):
    if nodes < 16 or nodes % 2:
        raise DomainError("nodes must be an even integer >= 16")
    # half-step offset keeps every node off the real axis
    return 2 * np.pi * (np.arange(nodes) + 0.5) / nodes


def build_contour(ctx: OmegaContext, enclose_zero: bool, nodes: int = 128, margin: float = 1.0) -> Contour:
    """Elliptic contour around the SCM support, with or without the origin.

    Zero-enclosing contours are ellipses confocal with ``[0, x+]``, where
    ``x+`` is the right support edge.  Zero-excluding contours are the image
    under ``exp`` of an ellipse confocal with ``[log x-, log x+]`` in the log
    plane; they never cross the negative real axis, which keeps functions
    such as ``1/z`` or ``log z`` analytic across the contour however close
    the support comes to the origin.  ``margin`` in ``(0, 2]`` scales the
    distance to the support.
    """
    if not 0.0 < margin <= 2.0:
        raise DomainError("margin must lie in (0, 2]")
    t = _theta(nodes)
    dt = 2 * np.pi / nodes
    cos, sin = np.cos(t), np.sin(t)
    if enclose_zero:
        lo, hi = 0.0, ctx.x_plus
        h, m = 0.5 * (hi - lo), 0.5 * (hi + lo)
        rho = 0.8 * margin
        A, B = h * np.cosh(rho), h * np.sinh(rho)
        z = m + A * cos + 1j * B * sin
        dz = (-A * sin + 1j * B * cos) * dt
        return Contour(z, dz, True)
    if ctx.x_minus <= 0 or ctx.support[0] <= 0:
        raise GeometryError("support touches the origin; cannot separate it from zero")
    a, b = np.log(ctx.x_minus), np.log(ctx.x_plus)
    h, m = 0.5 * (b - a), 0.5 * (b + a)
    rho = 0.8 * margin
    if h * np.sinh(rho) > 0.45 * np.pi * margin:
        rho = np.arcsinh(0.45 * np.pi * margin / h)
    A, B = h * np.cosh(rho), h * np.sinh(rho)
    u = m + A * cos + 1j * B * sin
    z = np.exp(u)
    dz = z * (-A * sin + 1j * B * cos) * dt
    return Contour(z, dz, False)
