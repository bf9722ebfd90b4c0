import numpy as np
import pytest

from scm_asym.descriptors import pair_from_ensemble
from scm_asym.model import (Ensemble, PopulationSpectrum, ensemble_from_dict, from_spectrum,
                            make_member, toeplitz_covariance)
from scm_asym.spectral import OmegaContext

ACCEPTANCE_LINES: list[str] = []

FIG3_RHO = (0.3, 0.3, 0.6, 0.6, 0.9, 0.9)


def identity_ctx(M=50, N=25):
    return OmegaContext.from_spectrum(PopulationSpectrum([1.0], [M]), N)


def identity_pair(M=50, N1=25, N2=25, varsigma=1):
    I = from_spectrum(PopulationSpectrum([1.0], [M]))
    e = Ensemble((make_member("a", I, M, varsigma, N=N1), make_member("b", I, M, varsigma, N=N2)), varsigma)
    return pair_from_ensemble(e, "a", "b")


def toeplitz_ensemble(rhos, Ns, M, varsigma=1, labels="abcdefgh"):
    members = tuple(make_member(l, toeplitz_covariance(r, M), M, varsigma, N=n)
                    for l, r, n in zip(labels, rhos, Ns))
    return Ensemble(members, varsigma)


def toeplitz_pair(r1, r2, M, N1, N2, varsigma=1):
    return pair_from_ensemble(toeplitz_ensemble((r1, r2), (N1, N2), M, varsigma), "a", "b")


def fig3_ensemble(M, n_per_m, varsigma=1):
    return ensemble_from_dict({
        "M": M, "varsigma": varsigma,
        "members": [{"label": f"R{i + 1}", "rho": r, "n_per_m": n}
                    for i, (r, n) in enumerate(zip(FIG3_RHO, n_per_m))],
        "labels": {f"R{i + 1}": f"C{i // 2 + 1}" for i in range(6)},
    })


def random_hermitian(rng, M):
    X = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    return (X + X.conj().T) / 2


def random_spd(rng, M):
    X = rng.standard_normal((M, 2 * M))
    return X @ X.T / (2 * M) + 0.2 * np.eye(M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
