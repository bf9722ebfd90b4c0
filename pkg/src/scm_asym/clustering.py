"""Probability that every within-cluster distance lies below every between-cluster distance."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .descriptors import GaussianLaw
from .errors import DomainError, NumericError
from .model import Ensemble

DEFAULT_GAUSSIAN_SAMPLES = 100_000
DEFAULT_TRIALS = 10_000
_JITTER = (0.0, 1e-12, 1e-10, 1e-8)
_BLOCK = 20_000


def enumerate_pairs(labels) -> list[tuple[tuple[str, str], bool]]:
    """All unordered pairs of members, tagged ``True`` when both share a cluster.

    ``labels`` maps member name to cluster id (a dict, or a sequence of
    ``(member, cluster)`` items).
    """
    items = list(labels.items()) if isinstance(labels, dict) else list(labels)
    if len(items) < 2:
        raise DomainError("need at least two members")
    return [((a, b), ca == cb) for (a, ca), (b, cb) in combinations(items, 2)]


@dataclass(frozen=True)
class ClusterScenario:
    ensemble: Ensemble
    labels: dict

    def __post_init__(self):
        names = [m.label for m in self.ensemble.members]
        missing = [n for n in names if n not in self.labels]
        if missing:
            raise DomainError(f"members without cluster label: {missing}")
        extra = [k for k in self.labels if k not in names]
        if extra:
            raise DomainError(f"cluster labels for unknown members: {extra}")

    @classmethod
    def from_ensemble(cls, ensemble: Ensemble, labels: dict | None = None) -> "ClusterScenario":
        labels = labels if labels is not None else ensemble.labels
        if not labels:
            raise DomainError("scenario has no cluster labels")
        return cls(ensemble, dict(labels))

    @property
    def tagged(self):
        order = {m.label: self.labels[m.label] for m in self.ensemble.members}
        return enumerate_pairs(order)

    @property
    def pairs(self) -> list:
        return [p for p, _ in self.tagged]

    @property
    def within_mask(self) -> np.ndarray:
        return np.array([w for _, w in self.tagged], dtype=bool)

    def digest(self) -> str:
        """Short content hash used to tag serialized results."""
        payload = {
            "labels": self.labels,
            "members": [(m.label, m.N, np.round(m.covariance.eigenvalues, 12).tolist())
                        for m in self.ensemble.members],
            "varsigma": self.ensemble.varsigma,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _success_rows(D: np.ndarray, within: np.ndarray) -> np.ndarray:
    D = np.atleast_2d(D)
    if not within.any() or within.all():
        # vacuous: no between set, or no within constraint
        return np.ones(D.shape[0], dtype=bool)
    return D[:, within].max(axis=1) < D[:, ~within].min(axis=1)


def success_event(distances, scenario: ClusterScenario) -> bool:
    d = np.asarray(distances, dtype=float)
    if d.shape != (len(scenario.pairs),):
        raise DomainError("distances must align with scenario.pairs")
    return bool(_success_rows(d, scenario.within_mask)[0])


@dataclass(frozen=True)
class PredictionResult:
    probability: float
    se: float
    samples: int

    @classmethod
    def from_hits(cls, hits: int, n: int) -> "PredictionResult":
        if n <= 0:
            return cls(float("nan"), float("nan"), 0)
        p = hits / n
        return cls(p, float(np.sqrt(p * (1 - p) / n)), n)

    def to_dict(self, scenario: ClusterScenario | None = None, kind: str | None = None,
                M: int | None = None) -> dict:
        out = {"probability": self.probability, "se": self.se, "samples": self.samples}
        if scenario is not None:
            out["scenario"] = scenario.digest()
        if kind is not None:
            out["kind"] = kind
        if M is not None:
            out["M"] = M
        return out


def _aligned(pairs_src, pairs_dst, what):
    src = {frozenset(p): i for i, p in enumerate(pairs_src)}
    try:
        return np.array([src[frozenset(p)] for p in pairs_dst])
    except KeyError as exc:
        raise DomainError(f"{what} does not cover pair {set(exc.args[0])}") from None


def empirical_probability(trials, scenario: ClusterScenario) -> PredictionResult:
    idx = _aligned(trials.pairs, scenario.pairs, "trial statistics")
    D = trials.distances[:, idx]
    hits = int(_success_rows(D, scenario.within_mask).sum()) if D.shape[0] else 0
    return PredictionResult.from_hits(hits, D.shape[0])


def _cholesky(S: np.ndarray) -> np.ndarray:
    scale = max(float(np.trace(S)) / max(S.shape[0], 1), np.finfo(float).tiny)
    for eps in _JITTER:
        try:
            return np.linalg.cholesky(S + eps * scale * np.eye(S.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise NumericError("covariance is not positive semidefinite even after jitter")


def theoretical_probability(law: GaussianLaw, scenario: ClusterScenario,
                            samples: int = DEFAULT_GAUSSIAN_SAMPLES, seed: int = 0) -> PredictionResult:
    """Fraction of draws from the Gaussian law of the distance vector that separate the clusters."""
    idx = _aligned(law.pairs, scenario.pairs, "law")
    mu = law.mean[idx]
    S = law.covariance[np.ix_(idx, idx)]
    L = _cholesky(S)
    within = scenario.within_mask
    hits = 0
    for b, lo in enumerate(range(0, int(samples), _BLOCK)):
        n = min(_BLOCK, int(samples) - lo)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), b]))
        draws = mu + rng.standard_normal((n, mu.size)) @ L.T
        hits += int(_success_rows(draws, within).sum())
    return PredictionResult.from_hits(hits, int(samples))
