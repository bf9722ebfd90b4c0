import json

import numpy as np
import pytest

from scm_asym.clustering import (ClusterScenario, PredictionResult, empirical_probability, enumerate_pairs,
                                 success_event, theoretical_probability)
from scm_asym.descriptors import DescriptorSet, GaussianLaw, gaussian_law
from scm_asym.errors import DomainError, NumericError
from scm_asym.model import Ensemble, PopulationSpectrum, from_spectrum, make_member
from scm_asym.montecarlo import TrialStatistics, run_trials

from conftest import fig3_ensemble, toeplitz_ensemble


def _scenario(labels):
    e = toeplitz_ensemble([0.1 * (i + 1) for i in range(len(labels))], [20] * len(labels), 10)
    return ClusterScenario(e, dict(zip("abcdefgh", labels)))


def _law(pairs, mean, cov, M=10):
    return GaussianLaw(DescriptorSet(list(pairs), np.asarray(mean, float), np.zeros(len(mean)),
                                     np.asarray(cov, float) * M**2), M, 1, "eu")


def test_enumerate_pairs_counts():
    tagged = enumerate_pairs({"a": 0, "b": 0, "c": 1, "d": 1})
    assert len(tagged) == 6 and sum(w for _, w in tagged) == 2
    six = enumerate_pairs({f"m{i}": i // 2 for i in range(6)})
    assert len(six) == 15 and sum(w for _, w in six) == 3
    assert enumerate_pairs([("x", 1), ("y", 1)]) == [(("x", "y"), True)]
    with pytest.raises(DomainError):
        enumerate_pairs({"x": 1})


def test_success_event_rules():
    sc = _scenario("aabb")
    within = sc.within_mask
    d = np.where(within, 0.1, 0.5)
    d[np.flatnonzero(within)[1]] = 0.2
    assert success_event(d, sc)
    assert success_event(3 * d, sc)
    tie = np.where(within, 0.5, 0.5)
    assert not success_event(tie, sc)
    with pytest.raises(DomainError):
        success_event(d[:-1], sc)


def test_vacuous_between_set():
    sc = _scenario("xx")
    assert success_event([123.0], sc)
    sc_all_between = _scenario("xy")
    assert success_event([0.0], sc_all_between)


def test_scenario_validation():
    e = toeplitz_ensemble((0.1, 0.2), (20, 20), 10)
    with pytest.raises(DomainError):
        ClusterScenario(e, {"a": 0})
    with pytest.raises(DomainError):
        ClusterScenario(e, {"a": 0, "b": 0, "z": 1})
    with pytest.raises(DomainError):
        ClusterScenario.from_ensemble(e)


def test_prediction_result_se():
    r = PredictionResult.from_hits(25, 100)
    assert r.probability == 0.25 and r.se == pytest.approx(np.sqrt(0.25 * 0.75 / 100))
    sc = _scenario("aabb")
    d = r.to_dict(sc, "kl", 20)
    assert set(d) == {"probability", "se", "samples", "scenario", "kind", "M"}
    json.dumps(d)


def test_empirical_all_successful():
    sc = _scenario("aabb")
    row = np.where(sc.within_mask, 0.1, 1.0)
    st = TrialStatistics(np.tile(row, (50, 1)), sc.pairs, 0, "eu")
    r = empirical_probability(st, sc)
    assert r.probability == 1.0 and r.se == 0.0 and r.samples == 50


def test_empirical_aligns_reversed_pairs():
    sc = _scenario("aabb")
    row = np.where(sc.within_mask, 0.1, 1.0)
    flipped = [(b, a) for a, b in reversed(sc.pairs)]
    st = TrialStatistics(np.tile(row[::-1], (5, 1)), flipped, 0, "eu")
    assert empirical_probability(st, sc).probability == 1.0


def test_degenerate_law_gives_certainty():
    sc = _scenario("aabb")
    mean = np.where(sc.within_mask, 1.0, 2.0)
    law = _law(sc.pairs, mean, 1e-14 * np.eye(len(mean)))
    assert theoretical_probability(law, sc, 10_000, seed=1).probability == 1.0


def test_indefinite_covariance_is_numeric_error():
    sc = _scenario("aabb")
    cov = -np.eye(6)
    with pytest.raises(NumericError):
        theoretical_probability(_law(sc.pairs, np.ones(6), cov), sc, 100)


def test_scaling_invariance_and_determinism():
    e = toeplitz_ensemble((0.2, 0.25, 0.6, 0.65), (30, 30, 30, 30), 12)
    sc = ClusterScenario(e, {"a": 0, "b": 0, "c": 1, "d": 1})
    law = gaussian_law(e, sc.pairs, "eu")
    base = theoretical_probability(law, sc, 50_000, seed=3)
    assert theoretical_probability(law.scaled(7.0), sc, 50_000, seed=3).probability == base.probability
    assert theoretical_probability(law, sc, 50_000, seed=3) == base
    assert 0.0 < base.probability < 1.0


def test_identity_population_agreement():
    M, N = 20, 40
    I = from_spectrum(PopulationSpectrum([1.0], [M]))
    members = tuple(make_member(l, I, M, N=N) for l in "abcd")
    sc = ClusterScenario(Ensemble(members), {"a": 0, "b": 0, "c": 1, "d": 1})
    law = gaussian_law(sc.ensemble, sc.pairs, "eu")
    theo = theoretical_probability(law, sc, 100_000, seed=2)
    emp = empirical_probability(run_trials(sc.ensemble, sc.pairs, "eu", 3000, seed=5), sc)
    assert abs(theo.probability - emp.probability) < 3 * np.hypot(theo.se, emp.se)


@pytest.mark.slow
def test_fig3a_kl_monotone_in_m():
    probs = []
    for M in (10, 40):
        e = fig3_ensemble(M, (2,) * 6)
        sc = ClusterScenario.from_ensemble(e)
        probs.append(theoretical_probability(gaussian_law(e, sc.pairs, "kl"), sc, 100_000, seed=0).probability)
    assert probs[1] >= probs[0]
