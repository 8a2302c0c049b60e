import numpy as np
import pytest

from kmschain.errors import NotHermitian, SupportMismatch
from kmschain.operators import (
    LabeledOperator,
    apply_local,
    embed,
    identity,
    opnorm,
    permute_to_sorted,
    require_hermitian,
    sandwich,
    tensor_product,
)


def _rand(rng, n, hermitian=False):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + a.conj().T if hermitian else a


def test_support_must_be_ascending():
    with pytest.raises(SupportMismatch):
        LabeledOperator((1, 0), np.eye(4), 2)
    with pytest.raises(SupportMismatch):
        LabeledOperator((0,), np.eye(3), 2)


def test_matrix_is_read_only():
    op = LabeledOperator((0,), np.eye(2), 2)
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 5.0


def test_embed_identity():
    e = embed(identity((0,), 3), (0, 1))
    np.testing.assert_array_equal(e.matrix, np.eye(9))


def test_embed_requires_containment():
    with pytest.raises(SupportMismatch):
        embed(identity((2,), 2), (0, 1))


def test_embed_places_factor_by_site_order():
    rng = np.random.default_rng(1)
    a = _rand(rng, 2)
    e = embed(LabeledOperator((1,), a, 2), (0, 1, 2))
    np.testing.assert_allclose(e.matrix, np.kron(np.kron(np.eye(2), a), np.eye(2)))


def test_embed_preserves_norm():
    rng = np.random.default_rng(2)
    for _ in range(10):
        q = LabeledOperator((0,), _rand(rng, 4, hermitian=True), 4)
        assert embed(q, (0, 1)).norm() == pytest.approx(q.norm(), rel=1e-12)


def test_embed_mixed_product():
    rng = np.random.default_rng(3)
    x0 = LabeledOperator((0,), _rand(rng, 3), 3)
    x1 = LabeledOperator((1,), _rand(rng, 3), 3)
    lhs = embed(x0, (0, 1)).matrix @ embed(x1, (0, 1)).matrix
    np.testing.assert_allclose(lhs, tensor_product(x0, x1).matrix, atol=1e-14)


def test_embed_commutes_with_products():
    rng = np.random.default_rng(4)
    for _ in range(5):
        a = LabeledOperator((0, 2), _rand(rng, 4), 2)
        b = LabeledOperator((0, 2), _rand(rng, 4), 2)
        target = (-1, 0, 1, 2)
        np.testing.assert_allclose(
            embed(a @ b, target).matrix, embed(a, target).matrix @ embed(b, target).matrix, atol=1e-12
        )


def test_tensor_product_reorders():
    rng = np.random.default_rng(5)
    a = LabeledOperator((2,), _rand(rng, 2), 2)
    b = LabeledOperator((0,), _rand(rng, 2), 2)
    np.testing.assert_allclose(tensor_product(a, b).matrix, np.kron(b.matrix, a.matrix))
    with pytest.raises(SupportMismatch):
        tensor_product(a, a)


def test_permute_to_sorted_roundtrip():
    rng = np.random.default_rng(6)
    m = _rand(rng, 8)
    once = permute_to_sorted(m, [2, 0, 1], 2)
    # the inverse permutation of (2, 0, 1) is (1, 2, 0)
    back = permute_to_sorted(once, [1, 2, 0], 2)
    np.testing.assert_allclose(back, m)


def test_arithmetic_aligns_supports():
    a = LabeledOperator((0,), np.diag([1.0, 2.0]), 2)
    b = LabeledOperator((1,), np.diag([10.0, 20.0]), 2)
    s = a + b
    assert s.support == (0, 1)
    np.testing.assert_allclose(np.diag(s.matrix), [11, 21, 12, 22])
    np.testing.assert_allclose((a - a).matrix, 0.0)
    np.testing.assert_allclose((2 * a).matrix, np.diag([2.0, 4.0]))
    np.testing.assert_allclose((a + 1.0).matrix, np.diag([2.0, 3.0]))


def test_dag_and_hermitian():
    rng = np.random.default_rng(7)
    a = LabeledOperator((0,), _rand(rng, 3), 3)
    np.testing.assert_allclose(a.dag().matrix, a.matrix.conj().T)
    assert (a + a.dag()).is_hermitian()
    with pytest.raises(NotHermitian):
        require_hermitian(a.matrix)


@pytest.mark.parametrize("n", [6, 40, 600, 1600])
def test_opnorm_matches_dense(n):
    rng = np.random.default_rng(n)
    h = _rand(rng, n, hermitian=True)
    g = _rand(rng, n)
    assert opnorm(h) == pytest.approx(np.abs(np.linalg.eigvalsh(h)).max(), rel=1e-10)
    if n <= 600:
        assert opnorm(g) == pytest.approx(np.linalg.norm(g, 2), rel=1e-10)


def test_opnorm_edge_cases():
    assert opnorm(np.zeros((0, 0))) == 0.0
    assert opnorm(np.zeros((1600, 1600))) == 0.0


@pytest.mark.parametrize("side", ["left", "right"])
def test_apply_local_matches_embedding(side):
    rng = np.random.default_rng(8)
    d = 3
    support = (-1, 0, 1)
    for local in [(0,), (-1, 1), (1,)]:
        op = LabeledOperator(local, _rand(rng, d ** len(local)), d)
        A = _rand(rng, d**3)
        big = embed(op, support).matrix
        want = big @ A if side == "left" else A @ big
        np.testing.assert_allclose(apply_local(op, A, support, side), want, atol=1e-12)


def test_sandwich_real_and_complex():
    rng = np.random.default_rng(9)
    U = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    M = _rand(rng, 6)
    np.testing.assert_allclose(sandwich(U, M), U @ M @ U.T, atol=1e-13)
    np.testing.assert_allclose(sandwich(U, M.real), U @ M.real @ U.T, atol=1e-13)
    Uc = np.linalg.qr(_rand(rng, 6))[0]
    np.testing.assert_allclose(sandwich(Uc, M), Uc @ M @ Uc.conj().T, atol=1e-13)
