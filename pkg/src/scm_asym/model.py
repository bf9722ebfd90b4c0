"""Population covariances, sampling configurations and ensembles."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz

from .errors import DomainError

DEFAULT_DEDUPE_TOL = 1e-8
DEFAULT_RATIO_GUARD = 0.02


@dataclass(frozen=True)
class PopulationSpectrum:
    """Distinct eigenvalues (ascending) of a covariance and their multiplicities."""

    eigenvalues: np.ndarray
    multiplicities: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        k = np.asarray(self.multiplicities).reshape(-1)
        if g.size == 0 or g.size != k.size:
            raise DomainError("eigenvalues and multiplicities must be non-empty and aligned")
        if np.any(g <= 0):
            raise DomainError("eigenvalues must be positive")
        if np.any(np.diff(g) <= 0):
            raise DomainError("eigenvalues must be strictly ascending")
        if np.any(k < 1) or not np.all(np.equal(np.mod(k, 1), 0)):
            raise DomainError("multiplicities must be positive integers")
        object.__setattr__(self, "eigenvalues", g)
        object.__setattr__(self, "multiplicities", k.astype(int))

    @property
    def M(self) -> int:
        return int(self.multiplicities.sum())

    def expanded(self) -> np.ndarray:
        """Eigenvalues repeated by multiplicity (length ``M``)."""
        return np.repeat(self.eigenvalues, self.multiplicities)


@dataclass(frozen=True)
class PopulationCovariance:
    """Hermitian positive-definite ``R`` with its eigendecomposition attached.

    ``eigenvalues`` holds one value per column of ``eigenbasis``; after
    deduplication these are the clustered values, so that
    ``eigenbasis @ diag(eigenvalues) @ eigenbasis^H`` reproduces ``matrix``
    to within the dedupe tolerance.
    """

    matrix: np.ndarray
    spectrum: PopulationSpectrum
    eigenbasis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    def reconstruct(self) -> np.ndarray:
        U = self.eigenbasis
        return (U * self.eigenvalues) @ U.conj().T

    def sqrt(self) -> np.ndarray:
        U = self.eigenbasis
        return (U * np.sqrt(self.eigenvalues)) @ U.conj().T


def _check_hermitian(matrix: np.ndarray) -> np.ndarray:
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("matrix must be square")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.conj().T).max() > 1e-12 * scale:
        raise DomainError("matrix is not Hermitian")
    return A


def _cluster(values: np.ndarray, tol: float):
    groups = [[values[0]]]
    for v in values[1:]:
        ref = groups[-1][0]
        if abs(v - ref) <= tol * max(abs(ref), abs(v)):
            groups[-1].append(v)
        else:
            groups.append([v])
    gammas = np.array([np.mean(g) for g in groups])
    counts = np.array([len(g) for g in groups])
    return gammas, counts


def build_spectrum(matrix: np.ndarray, tol: float = DEFAULT_DEDUPE_TOL) -> PopulationSpectrum:
    """Cluster the eigenvalues of a Hermitian PD matrix into distinct values."""
    A = _check_hermitian(matrix)
    ev = np.linalg.eigvalsh(A)
    if ev[0] <= 0:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {ev[0]:.3e})")
    gammas, counts = _cluster(ev, tol)
    return PopulationSpectrum(gammas, counts)


def population_covariance(matrix: np.ndarray, tol: float = DEFAULT_DEDUPE_TOL) -> PopulationCovariance:
    A = _check_hermitian(matrix)
    ev, U = np.linalg.eigh(A)
    if ev[0] <= 0:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {ev[0]:.3e})")
    gammas, counts = _cluster(ev, tol)
    spectrum = PopulationSpectrum(gammas, counts)
    return PopulationCovariance(np.array(A), spectrum, U, spectrum.expanded())


def from_spectrum(spectrum: PopulationSpectrum, basis: np.ndarray | None = None) -> PopulationCovariance:
    """Covariance with the given spectrum, in ``basis`` (identity by default)."""
    lam = spectrum.expanded()
    M = lam.size
    U = np.eye(M) if basis is None else np.asarray(basis)
    if U.shape != (M, M):
        raise DomainError("basis dimension does not match the spectrum")
    R = (U * lam) @ U.conj().T
    R = 0.5 * (R + R.conj().T)
    return PopulationCovariance(R, spectrum, U, lam)


def toeplitz_covariance(rho: float, M: int) -> PopulationCovariance:
    """Symmetric Toeplitz covariance with first row ``[rho**0, ..., rho**(M-1)]``."""
    if not -1.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (-1, 1), got {rho}")
    if M < 2:
        raise DomainError("M must be at least 2")
    return population_covariance(toeplitz(float(rho) ** np.arange(M)))


@dataclass(frozen=True)
class SamplingConfig:
    """Sample count ``N`` for one population; ``c = M / N``."""

    N: int
    M: int
    varsigma: int = 1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise DomainError("N must be an integer >= 2")
        if self.varsigma not in (0, 1):
            raise DomainError("varsigma must be 0 (complex) or 1 (real)")

    @property
    def c(self) -> float:
        return self.M / self.N

    @classmethod
    def from_ratio(cls, M: int, c: float, varsigma: int = 1) -> "SamplingConfig":
        """``N = M / c`` rounded half-up; ``c`` is then recomputed as ``M / N``."""
        if c <= 0:
            raise DomainError("c must be positive")
        return cls(int(np.floor(M / c + 0.5)), M, varsigma)


@dataclass(frozen=True)
class Member:
    label: str
    covariance: PopulationCovariance
    sampling: SamplingConfig

    @property
    def N(self) -> int:
        return self.sampling.N

    @property
    def M(self) -> int:
        return self.covariance.M


@dataclass(frozen=True)
class Ensemble:
    """Indexed collection of populations sharing ``M`` and the field flag."""

    members: tuple
    varsigma: int = 1
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        names = [m.label for m in self.members]
        if len(set(names)) != len(names):
            raise DomainError("member labels must be unique")

    @property
    def M(self) -> int:
        return self.members[0].M

    def __len__(self):
        return len(self.members)

    def __getitem__(self, key) -> Member:
        if isinstance(key, str):
            for m in self.members:
                if m.label == key:
                    return m
            raise KeyError(key)
        return self.members[key]

    def index(self, label: str) -> int:
        return [m.label for m in self.members].index(label)


def validate_ensemble(ensemble: Ensemble, guard: float = DEFAULT_RATIO_GUARD) -> list[str]:
    """Return human-readable diagnostics; an empty list means the ensemble is valid."""
    out = []
    if len(ensemble.members) == 0:
        return ["ensemble has no members"]
    dims = {m.label: m.covariance.M for m in ensemble.members}
    if len(set(dims.values())) > 1:
        out.append(f"dimension mismatch across members: {dims}")
    for m in ensemble.members:
        if m.sampling.M != m.covariance.M:
            out.append(f"member {m.label}: sampling M={m.sampling.M} but covariance M={m.covariance.M}")
        if m.sampling.varsigma != ensemble.varsigma:
            out.append(f"member {m.label}: varsigma differs from the ensemble")
        if abs(m.sampling.c - 1.0) < guard:
            out.append(f"member {m.label}: c={m.sampling.c:.4f} within {guard} of 1")
        lam_min = np.linalg.eigvalsh(m.covariance.matrix)[0]
        if lam_min <= 0:
            out.append(f"member {m.label}: covariance not positive definite")
    return out


def make_member(label, covariance, M, varsigma=1, N=None, c=None, n_per_m=None) -> Member:
    given = [x is not None for x in (N, c, n_per_m)]
    if sum(given) != 1:
        raise DomainError(f"member {label}: give exactly one of N, c or n_per_m")
    if n_per_m is not None:
        N = int(np.floor(n_per_m * M + 0.5))
    sampling = SamplingConfig(int(N), M, varsigma) if N is not None else SamplingConfig.from_ratio(M, c, varsigma)
    return Member(str(label), covariance, sampling)


def ensemble_from_dict(spec: dict, M: int | None = None) -> Ensemble:
    """Build an ensemble from the scenario schema; ``M`` overrides the file value.

    Each member has ``label``, either ``rho`` or ``eigenvalues`` +
    ``multiplicities``, and one of ``c`` (= M/N), ``n_per_m`` (= N/M) or
    ``N``.  The ratio forms keep a scenario meaningful when ``M`` is swept.
    """
    M = int(spec["M"] if M is None else M)
    varsigma = int(spec.get("varsigma", 1))
    members = []
    for entry in spec["members"]:
        label = str(entry["label"])
        if "rho" in entry:
            cov = toeplitz_covariance(float(entry["rho"]), M)
        elif "eigenvalues" in entry:
            spectrum = PopulationSpectrum(entry["eigenvalues"], entry["multiplicities"])
            if spectrum.M != M:
                raise DomainError(f"member {label}: multiplicities sum to {spectrum.M}, expected {M}")
            cov = from_spectrum(spectrum)
        else:
            raise DomainError(f"member {label}: needs 'rho' or 'eigenvalues'")
        members.append(make_member(label, cov, M, varsigma, N=entry.get("N"), c=entry.get("c"),
                                   n_per_m=entry.get("n_per_m")))
    labels = {str(k): str(v) for k, v in spec.get("labels", {}).items()}
    return Ensemble(tuple(members), varsigma, labels)


def load_scenario(path) -> dict:
    with open(Path(path), encoding="utf-8") as fh:
        return json.load(fh)
