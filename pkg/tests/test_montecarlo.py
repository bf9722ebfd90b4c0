import csv
import warnings

import numpy as np
import pytest
from scipy import stats

from scm_asym.descriptors import gaussian_law
from scm_asym.errors import DomainError
from scm_asym.model import Ensemble, PopulationSpectrum, from_spectrum, make_member, toeplitz_covariance
from scm_asym.montecarlo import (ScalarLaw, ScmSample, bartlett_factor, empirical_distance, ks_critical,
                                 ks_statistic, qq_points, run_trials, sample_covariance,
                                 sample_observations)
from scm_asym.spectral import support_interval

from conftest import toeplitz_ensemble


def _scm(matrix, N=10):
    """Sample wrapper whose covariance is exactly ``matrix``."""
    w, U = np.linalg.eigh(matrix)
    G = U * np.sqrt(np.maximum(w, 0) * N)
    return ScmSample(G, N)


def test_identity_columns_average_to_identity():
    cov = from_spectrum(PopulationSpectrum([1.0], [3]))
    Y = sample_observations(cov, 10_000, 1, seed=1)
    S = Y @ Y.T / Y.shape[1]
    se = np.sqrt(2.0 / Y.shape[1])
    assert np.all(np.abs(S - np.eye(3)) < 4 * se)


def test_sampling_is_deterministic():
    cov = toeplitz_covariance(0.5, 5)
    assert np.array_equal(sample_observations(cov, 7, 1, seed=3), sample_observations(cov, 7, 1, seed=3))


def test_complex_moments():
    cov = from_spectrum(PopulationSpectrum([1.0], [1]))
    x = sample_observations(cov, 100_000, 0, seed=5)[0]
    n = x.size
    assert abs(np.mean(np.abs(x) ** 2) - 1) < 4 * np.std(np.abs(x) ** 2) / np.sqrt(n)
    for part in (x.real, x.imag):
        assert abs(part.var() - 0.5) < 4 * np.sqrt(2 * 0.25 / n)
    assert abs(np.mean(x.real * x.imag)) < 4 * 0.5 / np.sqrt(n)


def test_sample_covariance_examples(rng):
    y = np.array([1.0, 2.0, -1.0])
    s = sample_covariance(y)
    assert np.allclose(s.scm, np.outer(y, y)) and s.rank == 1
    Q, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    Y = Q * np.sqrt(3)
    ev = np.linalg.eigvalsh(sample_covariance(Y).scm)
    assert np.allclose(ev, [0, 0, 0, 1, 1, 1], atol=1e-12)
    Y = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
    s = sample_covariance(Y)
    assert np.trace(s.scm).real == pytest.approx(np.linalg.norm(Y) ** 2 / 4)
    assert np.allclose(s.scm, s.scm.conj().T, atol=0)


def test_undersampled_rank(rng):
    s = sample_covariance(rng.standard_normal((10, 4)))
    ev = np.linalg.eigvalsh(s.scm)
    assert np.sum(ev > 1e-10 * ev.max()) == 4


def test_empirical_distance_hand_values():
    a, b = _scm(np.diag([1.0, 1.0])), _scm(np.diag([3.0, 1.0]))
    assert empirical_distance(a, b, "eu") == pytest.approx(2)
    c = _scm(np.diag([2.0, 2.0]))
    assert empirical_distance(a, c, "kl") == pytest.approx(0.25)
    p1 = ScmSample(np.array([[1.0], [0.0]]), 1)
    p2 = ScmSample(np.array([[0.0], [1.0]]), 1)
    assert empirical_distance(p1, p2, "ss") == pytest.approx(1)


@pytest.mark.parametrize("kind,N", [("eu", 30), ("eu", 5), ("kl", 30), ("ss", 5)])
def test_self_distance_zero(rng, kind, N):
    s = sample_covariance(rng.standard_normal((12, N)))
    assert abs(empirical_distance(s, s, kind)) < 1e-10


def test_undersampled_kl_self_distance(rng):
    # tr[R R^+] equals the rank, so the generalized divergence of a sample with itself is N/M - 1
    s = sample_covariance(rng.standard_normal((12, 5)))
    assert empirical_distance(s, s, "kl") == pytest.approx(5 / 12 - 1, abs=1e-10)


def test_undersampled_kl_matches_pinv(rng):
    Ya, Yb = rng.standard_normal((8, 5)), rng.standard_normal((8, 12))
    A, B = Ya @ Ya.T / 5, Yb @ Yb.T / 12
    ref = (np.trace(A @ np.linalg.pinv(B)) + np.trace(B @ np.linalg.pinv(A))) / 16 - 1
    assert empirical_distance(sample_covariance(Ya), sample_covariance(Yb), "kl") == pytest.approx(ref, rel=1e-10)


def test_complex_distances_are_real(rng):
    Ya = rng.standard_normal((8, 5)) + 1j * rng.standard_normal((8, 5))
    Yb = rng.standard_normal((8, 6)) + 1j * rng.standard_normal((8, 6))
    a, b = sample_covariance(Ya), sample_covariance(Yb)
    for kind in ("eu", "kl", "ss"):
        assert isinstance(empirical_distance(a, b, kind), float)
    Z = Ya[:, :1] @ np.ones((1, 5))  # rank one: collapse of the pseudo-inverse
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        empirical_distance(sample_covariance(Z), b, "kl")
    assert any("rank deficient" in str(x.message) for x in w)


def test_ss_regime_violation(rng):
    a, b = sample_covariance(rng.standard_normal((4, 6))), sample_covariance(rng.standard_normal((4, 2)))
    with pytest.raises(DomainError):
        empirical_distance(a, b, "ss")


def test_scale_equivariance(rng):
    X1, X2 = rng.standard_normal((10, 6)), rng.standard_normal((10, 4))
    t = 3.0
    a, b = sample_covariance(X1), sample_covariance(X2)
    at, bt = sample_covariance(np.sqrt(t) * X1), sample_covariance(np.sqrt(t) * X2)
    assert empirical_distance(at, bt, "eu") == pytest.approx(t**2 * empirical_distance(a, b, "eu"))
    assert empirical_distance(at, bt, "ss") == pytest.approx(empirical_distance(a, b, "ss"))


def test_bartlett_factor_moments():
    rng = np.random.default_rng(2)
    M, N, T = 4, 9, 20_000
    acc = np.zeros((M, M))
    acc2 = np.zeros((M, M))
    for _ in range(T):
        L = bartlett_factor(M, N, 1, rng)
        W = L @ L.T
        acc += W
        acc2 += W**2
    mean = acc / T
    var = acc2 / T - mean**2
    # Wishart(I, N): E W = N I, Var W_ii = 2N, Var W_ij = N
    assert np.all(np.abs(mean - N * np.eye(M)) < 4 * np.sqrt(var / T))
    assert np.allclose(np.diag(var), 2 * N, rtol=0.1)


def test_run_trials_basics(tmp_path):
    e = toeplitz_ensemble((0.3, 0.6), (8, 10), 12)
    empty = run_trials(e, [("a", "b")], "eu", 0, seed=1)
    assert empty.distances.shape == (0, 1)
    s1 = run_trials(e, [("a", "b")], "ss", 20, seed=4)
    s2 = run_trials(e, [("a", "b")], "ss", 20, seed=4, threads=3)
    assert np.array_equal(s1.distances, s2.distances)
    s1.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["trial", "pair", "distance"] and len(rows) == 21 and rows[1][1] == "a-b"


def test_identity_mean_matches_descriptors():
    M, N = 100, 50
    I = from_spectrum(PopulationSpectrum([1.0], [M]))
    e = Ensemble((make_member("a", I, M, N=N), make_member("b", I, M, N=N)))
    st = run_trials(e, [("a", "b")], "eu", 10_000, seed=21)
    law = gaussian_law(e, [("a", "b")], "eu")
    x = st.distances[:, 0]
    assert abs(x.mean() - law.mean[0]) < 4 * x.std(ddof=1) / np.sqrt(x.size)


@pytest.mark.slow
def test_identity_ks_at_m200():
    M, N, T = 200, 100, 10_000
    I = from_spectrum(PopulationSpectrum([1.0], [M]))
    e = Ensemble((make_member("a", I, M, N=N), make_member("b", I, M, N=N)))
    st = run_trials(e, [("a", "b")], "eu", T, seed=8)
    law = gaussian_law(e, [("a", "b")], "eu")
    scalar = ScalarLaw(float(law.mean[0]), float(np.sqrt(law.covariance[0, 0])))
    assert ks_statistic(st.distances[:, 0], scalar) < ks_critical(T)


def test_eigenvalues_inside_support():
    cov = toeplitz_covariance(0.5, 40)
    lo, hi = support_interval(cov.spectrum, 20)
    eps = 0.05 * hi
    rng = np.random.default_rng(9)
    S = cov.sqrt()
    for _ in range(1000):
        Y = S @ rng.standard_normal((40, 20))
        ev = np.linalg.eigvalsh(Y.T @ Y / 20)
        assert ev.min() >= lo - eps and ev.max() <= hi + eps


def test_qq_points_properties():
    law = ScalarLaw(1.0, 2.0)
    x = np.random.default_rng(0).normal(1.0, 2.0, 100_000)
    qq = qq_points(x, law)
    assert np.all(np.diff(qq[:, 0]) > 0) and np.all(np.diff(qq[:, 1]) >= 0)
    bulk = slice(1000, -1000)
    assert np.max(np.abs(qq[bulk, 0] - qq[bulk, 1])) < 5 * law.std / np.sqrt(x.size) * 3 * 10
    flat = qq_points(np.full(20, 3.0), law)
    assert np.all(flat[:, 1] == 3.0)
    with pytest.raises(DomainError):
        qq_points(np.ones(5), law)


def test_ks_statistic_examples():
    law = ScalarLaw(0.0, 1.0)
    T = 1000
    q = stats.norm.ppf((np.arange(1, T + 1) - 0.5) / T)
    assert ks_statistic(q, law) <= 1.0 / T + 1e-12
    assert ks_statistic(q + 10, law) > 0.99
    assert ks_critical(10_000) == pytest.approx(0.0163)
