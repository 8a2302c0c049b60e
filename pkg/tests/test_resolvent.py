import numpy as np
import pytest

from kmschain.basis import HermiteBasis
from kmschain.chain import ChainSpec
from kmschain.errors import LambdaZero, SupportMismatch
from kmschain.operators import opnorm
from kmschain.resolvent import (
    EXACT_RELATIONS,
    ResolventSample,
    SymplecticVector,
    block_residual,
    field_operator,
    low_energy_block,
    relation_residuals,
    resolvent,
    sigma,
    trivial_state,
    weyl_operator,
    weyl_residual,
)

delta = SymplecticVector.delta


def _samples(rng, n, sites=(0, 1)):
    out = []
    for _ in range(n):
        f = SymplecticVector(tuple((s, complex(*rng.normal(0, 0.5, 2))) for s in sites))
        g = SymplecticVector(tuple((s, complex(*rng.normal(0, 0.5, 2))) for s in sites))
        lam, mu, nu = rng.uniform(0.5, 2, 3) * rng.choice([-1, 1], 3)
        out.append(ResolventSample(lam, mu, nu, f, g))
    return out


class TestSymplecticVector:
    def test_merge_and_drop_zeros(self):
        v = SymplecticVector(((1, 1.0), (0, 2j), (1, -1.0)))
        assert v.coefficients == ((0, 2j),)
        assert (delta(0) + delta(0)).as_dict() == {0: 2.0}
        assert (delta(0) - delta(0)).support == ()

    def test_real_scalars_only(self):
        assert (2.0 * delta(3, 1j)).as_dict() == {3: 2j}
        with pytest.raises(TypeError):
            delta(0) * 1j

    def test_sigma(self):
        assert sigma(delta(0), delta(0, 1j)) == 1.0
        rng = np.random.default_rng(0)
        for _ in range(10):
            f = SymplecticVector.from_dict({0: complex(*rng.standard_normal(2)), 2: complex(*rng.standard_normal(2))})
            g = SymplecticVector.from_dict({0: complex(*rng.standard_normal(2)), 1: complex(*rng.standard_normal(2))})
            assert sigma(f, g) == pytest.approx(-sigma(g, f), abs=1e-15)
            assert sigma(f, f) == 0.0


class TestField:
    def test_canonical_commutator_on_low_block(self):
        c = ChainSpec(L=1, site_dim=12)
        rng = np.random.default_rng(1)
        f = SymplecticVector(((0, complex(*rng.standard_normal(2))), (1, complex(*rng.standard_normal(2)))))
        g = SymplecticVector(((0, complex(*rng.standard_normal(2))), (1, complex(*rng.standard_normal(2)))))
        A = field_operator(c, f, (0, 1))
        B = field_operator(c, g, (0, 1))
        comm = A @ B - B @ A
        idx = low_energy_block(12, 2)
        target = 1j * sigma(f, g) * np.eye(144)
        assert block_residual(comm.matrix - target, idx) < 1e-12

    def test_field_is_hermitian(self):
        psi = field_operator(HermiteBasis(6), delta(0, 0.3 - 0.7j))
        assert psi.is_hermitian()

    def test_support_errors(self):
        c = ChainSpec(L=1, site_dim=4)
        with pytest.raises(SupportMismatch):
            field_operator(c, delta(4))
        with pytest.raises(SupportMismatch):
            field_operator(c, delta(1), (0,))
        with pytest.raises(TypeError):
            field_operator("space", delta(0))

    def test_low_energy_block(self):
        np.testing.assert_array_equal(low_energy_block(4, 1), [0, 1])
        np.testing.assert_array_equal(low_energy_block(4, 2), [0, 1, 4, 5])


class TestResolvent:
    def test_zero_vector(self):
        R = resolvent(HermiteBasis(5), 2.0, SymplecticVector(), (0,))
        np.testing.assert_allclose(R.matrix, -0.5j * np.eye(5), atol=1e-15)

    def test_lambda_zero(self):
        with pytest.raises(LambdaZero):
            resolvent(HermiteBasis(4), 0.0, delta(0))
        with pytest.raises(LambdaZero):
            trivial_state([(0.0, delta(0))])

    def test_adjoint_and_norm(self):
        rng = np.random.default_rng(2)
        c = ChainSpec(L=1, site_dim=6)
        for _ in range(10):
            lam = rng.uniform(0.1, 3) * rng.choice([-1, 1])
            f = SymplecticVector(((0, complex(*rng.standard_normal(2))), (1, complex(*rng.standard_normal(2)))))
            R = resolvent(c, lam, f)
            np.testing.assert_allclose(R.dag().matrix, resolvent(c, -lam, f).matrix, atol=1e-12)
            assert opnorm(R.matrix, hermitian=False) <= 1 / abs(lam) + 1e-12

    def test_exact_relations(self):
        res = relation_residuals(ChainSpec(L=1, site_dim=6), _samples(np.random.default_rng(3), 8))
        for name in EXACT_RELATIONS:
            assert res[name] <= 1e-12, name

    def test_truncated_relations_improve_with_dimension(self):
        samples = _samples(np.random.default_rng(4), 6, sites=(0,))
        small = relation_residuals(HermiteBasis(8), samples)
        big = relation_residuals(HermiteBasis(16), samples)
        assert small["commutator"] / big["commutator"] >= 2
        assert small["sum"] > big["sum"]

    def test_sum_skipped_for_opposite_lambdas(self):
        s = ResolventSample(1.0, -1.0, 1.0, delta(0), delta(0, 1j))
        assert relation_residuals(HermiteBasis(6), [s])["sum"] == 0.0


class TestWeyl:
    def test_unitary(self):
        W = weyl_operator(HermiteBasis(8), delta(0, 0.4 + 0.2j)).matrix
        np.testing.assert_allclose(W @ W.conj().T, np.eye(8), atol=1e-13)

    def test_weyl_relation_small_amplitude(self):
        assert weyl_residual(HermiteBasis(32), delta(0, 0.1), delta(0, 0.1j)) <= 1e-6

    def test_weyl_relation_improves_with_dimension(self):
        f, g = delta(0, 0.5), delta(0, 0.5j)
        assert weyl_residual(HermiteBasis(24), f, g) < weyl_residual(HermiteBasis(12), f, g)


def test_trivial_state():
    assert trivial_state([]) == 1.0
    assert trivial_state([(1.0, delta(0))]) == 0.0
    assert trivial_state([(1.0, delta(0)), (-2.0, delta(3, 1j))]) == 0.0
