import math

import numpy as np
import pytest

from kmschain.basis import HermiteBasis, PotentialSpec, harmonic_hamiltonian, position_matrix
from kmschain.chain import ChainSpec, hamiltonian
from kmschain.errors import NotHermitian, NotPositive, SupportMismatch
from kmschain.gibbs import (
    PositiveMultiplier,
    ProductTerm,
    boltzmann_tail,
    chain_gibbs,
    expectation,
    gibbs_factorization,
    gibbs_state,
    partial_trace,
    perturbed_gibbs,
    sandwich_check,
    spectral,
    trace_norm,
)
from kmschain.operators import LabeledOperator, embed

V = PotentialSpec.bump(0.5)
PHI = PotentialSpec.bump(0.3)

# independent closed forms for one oscillator at omega = beta = 1
Z_ONE = 0.42545906411966077  # e^{-1} / (1 - e^{-2})
X2_ONE = 0.65651764274966565  # coth(1) / 2


def chain(L=1, d=4, **kw):
    return ChainSpec(L=L, site_dim=d, V=kw.pop("V", V), phi=kw.pop("phi", PHI), **kw)


def test_single_oscillator_partition_function():
    st = gibbs_state(harmonic_hamiltonian(HermiteBasis(40)), 1.0)
    assert math.exp(st.log_z) == pytest.approx(Z_ONE, rel=1e-12)


def test_single_oscillator_second_moment():
    basis = HermiteBasis(40)
    st = gibbs_state(harmonic_hamiltonian(basis), 1.0)
    x = position_matrix(basis)
    x2 = LabeledOperator((0,), x.matrix @ x.matrix, basis.dim)
    assert expectation(st, x2).real == pytest.approx(X2_ONE, abs=1e-12)


def test_state_properties():
    st = chain_gibbs(chain())
    rho = st.matrix
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-13)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-15)
    assert np.linalg.eigvalsh(rho).min() > -1e-15
    H = hamiltonian(chain()).H.matrix
    assert np.abs(rho @ H - H @ rho).max() < 1e-12
    assert st.weights.sum() == pytest.approx(1.0, abs=1e-13)


def test_low_temperature_selects_ground_state():
    st = chain_gibbs(chain(), beta=50.0)
    ground = st.spectrum.eigenvectors[:, 0]
    overlap = np.real(ground.conj() @ st.matrix @ ground)
    assert overlap >= 1 - 1e-10


def test_no_overflow_at_large_beta_energy():
    st = gibbs_state(np.diag([1000.0, 1001.0]), 10.0)
    assert np.all(np.isfinite(st.matrix))
    assert st.matrix[0, 0].real == pytest.approx(1 / (1 + math.exp(-10)), rel=1e-14)


def test_decoupled_state_is_product():
    c = chain(V=PotentialSpec(), phi=PotentialSpec(), d=5)
    st = chain_gibbs(c, beta=0.7)
    one = gibbs_state(harmonic_hamiltonian(c.basis), 0.7).matrix
    np.testing.assert_allclose(st.matrix, np.kron(one, one), atol=1e-14)


def test_spectral_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        spectral(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        gibbs_state(np.eye(2), 0.0)


def test_spectral_apply_complex_function():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((5, 5))
    h = a + a.T
    sd = spectral(h)
    np.testing.assert_allclose(sd.reconstruct(), h, atol=1e-12)
    w, U = np.linalg.eigh(h)
    want = U @ np.diag(np.exp(1j * w)) @ U.T
    np.testing.assert_allclose(sd.apply(lambda E: np.exp(1j * E)), want, atol=1e-12)


def test_partial_trace_duality():
    # Tr(rho (A (x) 1)) = Tr(Tr_1(rho) A)
    rng = np.random.default_rng(1)
    st = chain_gibbs(chain(L=2, d=3))
    for _ in range(20):
        site = int(rng.choice(st.support))
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        A = LabeledOperator((site,), a, 3)
        full = np.trace(st.matrix @ embed(A, st.support).matrix)
        red = partial_trace(st.rho, (site,)).matrix
        assert abs(full - np.trace(red @ a)) < 1e-12


def test_partial_trace_of_product():
    rng = np.random.default_rng(2)
    p = rng.standard_normal((3, 3))
    q = rng.standard_normal((3, 3))
    rho = LabeledOperator((0, 1), np.kron(p, q), 3)
    np.testing.assert_allclose(partial_trace(rho, (0,)).matrix, p * np.trace(q), atol=1e-14)
    np.testing.assert_allclose(partial_trace(rho, (1,)).matrix, q * np.trace(p), atol=1e-14)
    with pytest.raises(SupportMismatch):
        partial_trace(rho, (3,))


def test_trace_norm():
    assert trace_norm(np.diag([1.0, -2.0, 0.5])) == pytest.approx(3.5)
    assert trace_norm(np.array([[0.0, 2.0], [0.0, 0.0]])) == pytest.approx(2.0)


class TestPositiveMultiplier:
    def test_rejects_negative_data(self):
        with pytest.raises(NotPositive):
            PositiveMultiplier(constant=-1.0)
        with pytest.raises(NotPositive):
            PositiveMultiplier((ProductTerm(((0, PotentialSpec.bump(-1.0)),)),))
        with pytest.raises(ValueError):
            ProductTerm(((0, V), (0, V)))

    def test_operator_is_positive(self):
        c = chain(d=5)
        F = PositiveMultiplier((ProductTerm(((0, PotentialSpec.bump(1.0)), (1, PotentialSpec.bump(0.5, 1.0)))),), 0.1)
        m = F.operator(c).matrix
        assert np.linalg.eigvalsh(m).min() >= 0.1 - 1e-12


class TestSandwich:
    F = PositiveMultiplier((ProductTerm(((0, PotentialSpec.bump(1.0)),)),), 0.05)

    def test_within_envelope(self):
        rep = sandwich_check(chain(L=1, d=5), chain(L=2, d=5), self.F)
        assert rep.passed
        assert 1 / rep.state_envelope <= rep.state_ratio <= rep.state_envelope
        assert 1 / rep.trace_envelope <= rep.trace_ratio <= rep.trace_envelope

    def test_phi_zero_ratios_are_one(self):
        free = dict(phi=PotentialSpec(), d=5)
        rep = sandwich_check(chain(L=1, **free), chain(L=2, **free), self.F)
        assert rep.state_ratio == pytest.approx(1.0, abs=1e-12)
        assert rep.trace_ratio == pytest.approx(1.0, abs=1e-12)

    def test_support_errors(self):
        with pytest.raises(SupportMismatch):
            sandwich_check(chain(L=2), chain(L=1), self.F)
        G = PositiveMultiplier((ProductTerm(((2, V),)),))
        with pytest.raises(SupportMismatch):
            sandwich_check(chain(L=1), chain(L=2), G)

    def test_boltzmann_tail(self):
        assert boltzmann_tail(chain(d=4), 0.5) == pytest.approx(math.exp(-4.0))


def test_factorization_after_removing_boundary():
    rep = gibbs_factorization(chain(L=2, d=3), 1, samples=5)
    assert rep.trace_distance < 1e-12
    assert rep.gibbs_condition < 1e-12


def test_perturbed_gibbs_requires_hermitian():
    W = LabeledOperator((0,), np.array([[0.0, 1.0], [0.0, 0.0]]), 2)
    with pytest.raises(NotHermitian):
        perturbed_gibbs(chain(d=2), W)
