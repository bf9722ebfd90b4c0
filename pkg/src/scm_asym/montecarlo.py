"""Synthetic Gaussian data, sample covariance matrices and empirical distances."""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .descriptors import DistanceKind
from .errors import DomainError
from .model import Ensemble, PopulationCovariance


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _gaussian(rng: np.random.Generator, shape, varsigma: int):
    if varsigma == 1:
        return rng.standard_normal(shape)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_observations(cov: PopulationCovariance, N: int, varsigma: int = 1, seed=None) -> np.ndarray:
    """``Y = R^{1/2} X`` with i.i.d. unit-variance real or circular complex ``X``."""
    rng = _rng(seed)
    X = _gaussian(rng, (cov.M, int(N)), varsigma)
    return cov.sqrt() @ X


def bartlett_factor(M: int, N: int, varsigma: int, rng: np.random.Generator) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L^H`` distributed as ``X X^H`` for ``X`` of size ``M x N``, ``N >= M``."""
    if N < M:
        raise DomainError("Bartlett factor needs N >= M")
    L = np.tril(_gaussian(rng, (M, M), varsigma), -1)
    dof = N - np.arange(M)
    if varsigma == 1:
        diag = np.sqrt(rng.chisquare(dof))
    else:
        diag = np.sqrt(rng.chisquare(2 * dof) / 2.0)
    L[np.arange(M), np.arange(M)] = diag
    return L


@dataclass
class ScmSample:
    """Sample covariance ``R_hat = G G^H / N`` kept together with its factor ``G``.

    ``G`` is the data matrix ``Y`` (``M x N``) or any factor with the same
    Gram matrix (``M x M`` Bartlett factor); the rank is ``min(M, N)``.
    """

    data: np.ndarray
    N: int
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def M(self) -> int:
        return self.data.shape[0]

    @property
    def rank(self) -> int:
        return min(self.M, self.N)

    @property
    def scm(self) -> np.ndarray:
        if "scm" not in self._cache:
            G = self.data
            S = G @ G.conj().T / self.N
            self._cache["scm"] = 0.5 * (S + S.conj().T)
        return self._cache["scm"]

    def svd(self):
        """Left singular vectors and singular values of ``G`` truncated to the rank."""
        if "svd" not in self._cache:
            U, s, _ = np.linalg.svd(self.data, full_matrices=False)
            r = self.rank
            if s[r - 1] <= 1e-12 * s[0]:
                warnings.warn("sample covariance is numerically rank deficient", RuntimeWarning)
            self._cache["svd"] = (U[:, :r], s[:r])
        return self._cache["svd"]

    def column_basis(self) -> np.ndarray:
        if "basis" not in self._cache:
            if self.N >= self.M:
                raise DomainError("column space is the whole space when N >= M")
            Q, _ = np.linalg.qr(self.data[:, : self.N])
            self._cache["basis"] = Q
        return self._cache["basis"]


def sample_covariance(Y: np.ndarray, label: str = "") -> ScmSample:
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    return ScmSample(Y, Y.shape[1], label)


def _kl_half(a: ScmSample, b: ScmSample) -> float:
    """``tr[R_hat_a R_hat_b^+]`` using the factors."""
    if b.N >= b.M and b.data.shape[1] == b.M:
        # square full-rank factor: R_b^{-1} = N_b G_b^{-H} G_b^{-1}
        X = np.linalg.solve(b.data, a.data)
        return float(np.real(np.vdot(X, X))) * b.N / a.N
    U, s = b.svd()
    proj = a.data.conj().T @ U
    return float(np.sum(np.abs(proj) ** 2 * (b.N / s**2)) / a.N)


def empirical_distance(a: ScmSample, b: ScmSample, kind) -> float:
    """Distance between two sample covariance matrices."""
    kind = DistanceKind.parse(kind)
    if a.M != b.M:
        raise DomainError("samples must share M")
    M = a.M
    if kind is DistanceKind.EUCLIDEAN:
        D = a.scm - b.scm
        return float(np.real(np.vdot(D, D))) / M
    if kind is DistanceKind.KL:
        return (_kl_half(a, b) + _kl_half(b, a)) / (2 * M) - 1.0
    if a.N >= M or b.N >= M:
        raise DomainError("subspace distance needs N < M for both samples")
    C = a.column_basis().conj().T @ b.column_basis()
    return float((a.N + b.N - 2 * np.real(np.vdot(C, C))) / M)


@dataclass
class TrialStatistics:
    """Per-trial empirical distances, shape ``(trials, len(pairs))``."""

    distances: np.ndarray
    pairs: list
    seed: int
    kind: str

    @property
    def trials(self) -> int:
        return self.distances.shape[0]

    def column(self, pair) -> np.ndarray:
        return self.distances[:, self.pairs.index(tuple(pair))]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "pair", "distance"])
            for t in range(self.trials):
                for k, p in enumerate(self.pairs):
                    w.writerow([t, f"{p[0]}-{p[1]}", repr(float(self.distances[t, k]))])


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SCM_ASYM_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


class _Simulator:
    def __init__(self, ensemble: Ensemble, pairs, kinds, seed: int):
        self.ensemble = ensemble
        self.labels = [m.label for m in ensemble.members]
        self.pairs = [tuple(p) for p in pairs]
        self.kinds = [DistanceKind.parse(k) for k in kinds]
        self.seed = int(seed)
        used = sorted({self.labels.index(l) for p in self.pairs for l in p})
        self.used = used
        self.sqrt = {i: ensemble.members[i].covariance.sqrt() for i in used}
        if DistanceKind.SUBSPACE in self.kinds:
            for i in used:
                m = ensemble.members[i]
                if m.N >= m.M:
                    raise DomainError(f"subspace distance needs N < M (member {m.label!r})")

    def draw(self, trial: int) -> dict:
        out = {}
        vs = self.ensemble.varsigma
        for i in self.used:
            m = self.ensemble.members[i]
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, trial, i]))
            if m.N >= m.M and DistanceKind.SUBSPACE not in self.kinds:
                G = self.sqrt[i] @ bartlett_factor(m.M, m.N, vs, rng)
            else:
                G = self.sqrt[i] @ _gaussian(rng, (m.M, m.N), vs)
            out[m.label] = ScmSample(G, m.N, m.label)
        return out

    def trial(self, t: int) -> np.ndarray:
        s = self.draw(t)
        row = np.empty((len(self.kinds), len(self.pairs)))
        for k, kind in enumerate(self.kinds):
            for p, (a, b) in enumerate(self.pairs):
                row[k, p] = empirical_distance(s[a], s[b], kind)
        return row


def run_trials_multi(ensemble: Ensemble, pairs, kinds, trials: int, seed: int = 0,
                     threads: int | None = None) -> dict:
    """Like :func:`run_trials` for several kinds on the same draws; returns ``{kind: stats}``."""
    sim = _Simulator(ensemble, pairs, kinds, seed)
    out = np.empty((len(sim.kinds), int(trials), len(sim.pairs)))
    n = thread_count(threads)

    def work(t):
        out[:, t, :] = sim.trial(t)

    if n == 1 or trials < 2:
        for t in range(int(trials)):
            work(t)
    else:
        with ThreadPoolExecutor(n) as ex:
            list(ex.map(work, range(int(trials))))
    return {k.value: TrialStatistics(out[i], list(sim.pairs), int(seed), k.value)
            for i, k in enumerate(sim.kinds)}


def run_trials(ensemble: Ensemble, pairs, kind, trials: int, seed: int = 0,
               threads: int | None = None) -> TrialStatistics:
    """Independent trials of the empirical distances over ``pairs``.

    Trial ``t`` draws member ``i`` from ``SeedSequence([seed, t, i])``, so the
    result does not depend on the number of threads or the execution order.
    """
    kind = DistanceKind.parse(kind)
    return run_trials_multi(ensemble, pairs, [kind], trials, seed, threads)[kind.value]


@dataclass(frozen=True)
class ScalarLaw:
    mean: float
    std: float

    def cdf(self, x):
        return stats.norm.cdf(x, loc=self.mean, scale=self.std)


def qq_points(samples, law: ScalarLaw) -> np.ndarray:
    """``(theoretical, empirical)`` quantile pairs at plotting positions ``(k - 0.5) / T``."""
    x = np.sort(np.asarray(samples, dtype=float), kind="stable")
    T = x.size
    if T < 10:
        raise DomainError("need at least 10 samples")
    p = (np.arange(1, T + 1) - 0.5) / T
    return np.column_stack([stats.norm.ppf(p) * law.std + law.mean, x])


def ks_statistic(samples, law: ScalarLaw) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size < 10:
        raise DomainError("need at least 10 samples")
    return float(stats.kstest(x, law.cdf).statistic)


def ks_critical(T: int, level: float = 0.01) -> float:
    """Asymptotic KS critical value; 1.63 / sqrt(T) at the 1% level."""
    coef = {0.01: 1.63, 0.05: 1.36, 0.1: 1.22}.get(level)
    if coef is None:
        coef = float(stats.kstwobign.isf(level))
    return coef / np.sqrt(T)
