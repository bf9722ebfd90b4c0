import numpy as np
import pytest

from scm_asym.descriptors import Generic, deterministic_equivalent, pair_from_ensemble, variance
from scm_asym.errors import DomainError
from scm_asym.model import population_covariance
from scm_asym.quadrature import (EUCLIDEAN_SPEC, FunctionalSpec, Term, cov_numeric, dbar_numeric,
                                 mean2_numeric, sigma_double_integral)
from scm_asym.spectral import OmegaContext

from conftest import identity_pair, random_hermitian, random_spd, toeplitz_ensemble, toeplitz_pair


def test_identity_dbar():
    eu = identity_pair()
    assert dbar_numeric(eu, "eu", nodes=128, adaptive=False) == pytest.approx(4, abs=1e-8)
    assert dbar_numeric(eu, "ss", nodes=128, adaptive=False) == pytest.approx(0.5, abs=1e-8)
    kl = identity_pair(N1=100, N2=100)
    assert dbar_numeric(kl, "kl", nodes=128, adaptive=False) == pytest.approx(1, abs=1e-8)


def test_identity_mean2():
    eu = identity_pair()
    assert mean2_numeric(eu, "eu") == pytest.approx(4, abs=1e-7)
    assert abs(mean2_numeric(eu, "ss")) < 1e-9
    assert mean2_numeric(identity_pair(varsigma=0), "eu") == 0.0


def test_identity_cov():
    eu = identity_pair(varsigma=0)
    assert cov_numeric(eu, eu, "eu", "eu", nodes=32) == pytest.approx(96, rel=1e-5)
    assert cov_numeric(eu, eu, "ss", "ss", nodes=32) == pytest.approx(0.25, rel=1e-5)


def test_disjoint_pairs_zero():
    e = toeplitz_ensemble((0.2, 0.4, 0.6, 0.8), (12, 12, 12, 12), 8)
    assert cov_numeric(pair_from_ensemble(e, "a", "b"), pair_from_ensemble(e, "c", "d"), "eu") == 0.0


@pytest.mark.parametrize("kind,Ns", [("eu", (40, 24)), ("kl", (40, 24)), ("kl", (10, 12)), ("ss", (10, 12))])
def test_node_doubling_two_fold(kind, Ns):
    p = toeplitz_pair(0.5, 0.8, 20, *Ns)
    a = dbar_numeric(p, kind, nodes=64, adaptive=False)
    b = dbar_numeric(p, kind, nodes=128, adaptive=False)
    assert abs(a - b) <= 1e-8 * abs(b)
    a = mean2_numeric(p, kind, nodes=64, adaptive=False)
    b = mean2_numeric(p, kind, nodes=128, adaptive=False)
    assert abs(a - b) <= 1e-8 * max(abs(b), 1e-12)


def test_orientation_negates_each_integral():
    p = toeplitz_pair(0.5, 0.8, 16, 8, 10)
    for kind in ("eu", "kl", "ss"):
        base = dbar_numeric(p, kind, adaptive=False)
        off = 0.0 if kind != "ss" else (8 + 10) / 16
        flip = dbar_numeric(p, kind, orientation=(-1, 1), adaptive=False)
        assert flip - off == pytest.approx(-(base - off), rel=1e-12)
        m = mean2_numeric(p, kind, adaptive=False)
        assert mean2_numeric(p, kind, orientation=(1, -1), adaptive=False) == pytest.approx(-m, rel=1e-12)
        v = cov_numeric(p, p, kind, kind, adaptive=False)
        assert cov_numeric(p, p, kind, kind, orientation=(-1, 1, 1, 1), adaptive=False) == pytest.approx(-v, rel=1e-10)


@pytest.mark.parametrize("kind,Ns", [("eu", (40, 24)), ("kl", (40, 24)), ("kl", (10, 12)), ("ss", (10, 12))])
def test_contour_independence(kind, Ns):
    p = toeplitz_pair(0.5, 0.8, 20, *Ns)
    assert dbar_numeric(p, kind, margin=1.5) == pytest.approx(dbar_numeric(p, kind), rel=1e-8)
    assert mean2_numeric(p, kind, margin=1.5) == pytest.approx(mean2_numeric(p, kind), rel=1e-8)
    assert cov_numeric(p, p, kind, kind, margin=1.5) == pytest.approx(cov_numeric(p, p, kind, kind), rel=1e-8)


def test_cost_guard():
    p = toeplitz_pair(0.5, 0.8, 400, 800, 1000)
    with pytest.raises(DomainError):
        cov_numeric(p, p, "eu", "eu", nodes=1024, adaptive=False)


def test_generic_functional():
    # (1/M) tr[R1_hat R2_hat] has deterministic equivalent (1/M) tr[R1 R2]
    spec = FunctionalSpec("prod", (Term(lambda z: z, lambda z: z),))
    p = toeplitz_pair(0.3, 0.6, 12, 30, 20)
    R1, R2 = p.ctx_i.matrix(), p.ctx_j.matrix()
    assert deterministic_equivalent(p, Generic(spec)) == pytest.approx(np.trace(R1 @ R2).real / 12, rel=1e-10)
    assert variance(p, Generic(EUCLIDEAN_SPEC)) == pytest.approx(variance(p, "eu"), rel=1e-8)


@pytest.mark.parametrize("Ns", [(20, 5), (4, 12)])
def test_residue_identity_with_squares(rng, Ns):
    M = 8
    N1, N2 = Ns
    R1, R2 = population_covariance(random_spd(rng, M)), population_covariance(random_spd(rng, M))
    c1 = OmegaContext.from_covariance(R1, N1)
    c2 = OmegaContext.from_covariance(R2, N2)
    A, B = random_hermitian(rng, M), random_hermitian(rng, M)
    z2, z2p = 0.7, -0.3
    lhs = sigma_double_integral(c1, lambda z: (z - z2) ** 2, lambda z: (z - z2p) ** 2, A, B)
    R, I = R1.matrix, np.eye(M)
    t = np.trace(R).real / N1
    X = (t - 2 * z2) * A + R @ A + A @ R + np.trace(R @ A) / N1 * I
    Y = (t - 2 * z2p) * B + B @ R + R @ B + np.trace(R @ B) / N1 * I
    rhs = (np.trace(R @ X @ R @ Y) / N1 + np.trace(R @ R @ A) / N1 * np.trace(R @ R @ B) / N1
           + np.trace(R @ R) / N1 * np.trace(R @ A @ R @ B) / N1)
    assert lhs == pytest.approx(rhs, rel=1e-6)
