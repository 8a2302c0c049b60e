import math

import numpy as np
import pytest

from kmschain.basis import (
    GaussianBump,
    GridSpec,
    HermiteBasis,
    PotentialSpec,
    default_grid,
    eigenfunctions,
    eigenfunctions_on_grid,
    function_matrix,
    harmonic_hamiltonian,
    momentum_matrix,
    multiplication_operator,
    pair_multiplication_operator,
    position_matrix,
)
from kmschain.errors import GridTooCoarse


@pytest.mark.parametrize("dim, omega", [(0, 1.0), (1, 1.0), (2.5, 1.0), (4, 0.0), (4, -1.0)])
def test_basis_rejects_bad_parameters(dim, omega):
    with pytest.raises(ValueError):
        HermiteBasis(dim, omega)


@pytest.mark.parametrize(
    "dim, omega, expected",
    [(3, 1.0, [1.0, 3.0, 5.0]), (2, 2.0, [2.0, 6.0])],
)
def test_harmonic_hamiltonian_levels(dim, omega, expected):
    h = harmonic_hamiltonian(HermiteBasis(dim, omega)).matrix
    np.testing.assert_array_equal(h, np.diag(expected))


def test_spectrum_scales_with_omega():
    e1 = HermiteBasis(10, 1.0).energies
    e2 = HermiteBasis(10, 2.0).energies
    np.testing.assert_allclose(e2, 2 * e1)


def test_position_entries():
    x = position_matrix(HermiteBasis(2, 1.0)).matrix
    assert x[0, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    np.testing.assert_array_equal(np.diag(x), 0.0)
    x4 = position_matrix(HermiteBasis(4, 2.0)).matrix
    assert x4[2, 3] == pytest.approx(math.sqrt(0.75), abs=1e-15)


def test_position_matches_quadrature():
    # <psi_0 | x | psi_1> on a grid, independent of the ladder algebra
    basis = HermiteBasis(2, 1.0)
    grid = GridSpec(-10, 10, 2001)
    psi = eigenfunctions_on_grid(basis, grid)
    val = np.sum(grid.weights * psi[:, 0] * grid.nodes * psi[:, 1])
    assert val == pytest.approx(position_matrix(basis).matrix[0, 1], abs=1e-12)


def test_momentum_entries():
    p = momentum_matrix(HermiteBasis(2, 1.0)).matrix
    assert abs(p[0, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    np.testing.assert_array_equal(np.diag(p), 0.0)
    np.testing.assert_allclose(p, p.conj().T, atol=0)


@pytest.mark.parametrize("omega", [0.5, 1.0, 2.0])
def test_canonical_commutator_on_low_block(omega):
    basis = HermiteBasis(8, omega)
    x = position_matrix(basis).matrix
    p = momentum_matrix(basis).matrix
    comm = x @ p - p @ x
    err = np.linalg.norm(comm[:4, :4] - 1j * np.eye(4), 2)
    assert err <= 1e-12


@pytest.mark.parametrize("dim", [6, 9])
def test_truncation_consistency(dim):
    half = dim // 2
    small, big = HermiteBasis(dim), HermiteBasis(2 * dim)
    for build in (position_matrix, momentum_matrix):
        a, b = build(small).matrix, build(big).matrix
        np.testing.assert_allclose(a[:half, :half], b[:half, :half], atol=1e-10)
        np.testing.assert_allclose((a @ a)[:half, :half], (b @ b)[:half, :half], atol=1e-10)


def test_harmonic_from_ladder_matches_energies():
    basis = HermiteBasis(12, 1.5)
    x = position_matrix(basis).matrix
    p = momentum_matrix(basis).matrix
    h = (p @ p + basis.omega**2 * x @ x).real
    np.testing.assert_allclose(h[:-1, :-1], np.diag(basis.energies[:-1]), atol=1e-12)


def test_eigenfunction_values():
    psi = eigenfunctions(HermiteBasis(3, 1.0), [0.0])[0]
    assert psi[0] == pytest.approx(math.pi**-0.25, abs=1e-15)
    assert psi[1] == 0.0
    for omega in (0.5, 3.0):
        assert eigenfunctions(HermiteBasis(2, omega), [0.0])[0, 1] == 0.0


def test_eigenfunction_normalization():
    psi = eigenfunctions_on_grid(HermiteBasis(3, 1.0), GridSpec(-8, 8, 400))
    w = GridSpec(-8, 8, 400).weights
    assert np.sum(w * psi[:, 2] ** 2) == pytest.approx(1.0, abs=1e-10)


def test_recurrence_matches_hermite_polynomials():
    from numpy.polynomial.hermite import hermval

    basis = HermiteBasis(12, 1.3)
    x = np.linspace(-3, 3, 31)
    psi = eigenfunctions(basis, x)
    xi = math.sqrt(basis.omega) * x
    for n in range(basis.dim):
        c = np.zeros(n + 1)
        c[n] = 1.0
        direct = (
            (basis.omega / math.pi) ** 0.25
            / math.sqrt(2.0**n * math.factorial(n))
            * hermval(xi, c)
            * np.exp(-0.5 * xi * xi)
        )
        np.testing.assert_allclose(psi[:, n], direct, atol=1e-12)


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        eigenfunctions_on_grid(HermiteBasis(30), GridSpec(-3, 3, 40))


def test_default_grid_is_adequate():
    for dim in (8, 32, 64):
        basis = HermiteBasis(dim, 1.0)
        eigenfunctions_on_grid(basis, default_grid(basis))


def test_gaussian_bump_validation():
    with pytest.raises(ValueError):
        GaussianBump(1.0, width=0.0)


def test_zero_potential_gives_zero_matrix():
    m = multiplication_operator(HermiteBasis(6), PotentialSpec()).matrix
    np.testing.assert_array_equal(m, 0.0)


@pytest.mark.parametrize("omega", [1.0, 2.0])
def test_gaussian_matrix_elements(omega):
    # <0|e^{-x^2}|0> = sqrt(w/(w+1)),  <1|e^{-x^2}|1> = (w/(w+1))^{3/2}
    basis = HermiteBasis(8, omega)
    m = multiplication_operator(basis, PotentialSpec.bump(1.0)).matrix
    r = omega / (omega + 1)
    assert m[0, 0] == pytest.approx(math.sqrt(r), abs=1e-12)
    assert m[1, 1] == pytest.approx(r**1.5, abs=1e-12)
    assert m[0, 1] == pytest.approx(0.0, abs=1e-14)


def test_wide_bump_approaches_identity():
    m = multiplication_operator(HermiteBasis(8), PotentialSpec.bump(1.0, width=50.0)).matrix
    assert m[0, 0] == pytest.approx(1.0, abs=1e-3)


def test_multiplication_is_symmetric_and_bounded():
    rng = np.random.default_rng(0)
    for _ in range(5):
        V = PotentialSpec(
            tuple(GaussianBump(rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(0.5, 2)) for _ in range(3))
        )
        m = multiplication_operator(HermiteBasis(10), V).matrix
        np.testing.assert_allclose(m, m.T, atol=1e-12)
        assert np.linalg.norm(m, 2) <= V.sup_norm() + 1e-10


def test_multiplication_converged_under_grid_doubling():
    basis = HermiteBasis(10)
    V = PotentialSpec.bump(0.7, 0.3, 0.8)
    a = multiplication_operator(basis, V, GridSpec(-10, 10, 801)).matrix
    b = multiplication_operator(basis, V, GridSpec(-10, 10, 1601)).matrix
    assert np.abs(a - b).max() < 1e-10


def test_function_matrix_of_x_is_position():
    basis = HermiteBasis(10)
    fm = function_matrix(basis, lambda x: x)
    np.testing.assert_allclose(fm, position_matrix(basis).matrix, atol=1e-12)


def test_pair_operator_of_difference_function():
    # phi(x0 - x1) = x0 - x1 is linear, so the quadrature image is x (x) 1 - 1 (x) x
    basis = HermiteBasis(5)
    grid = default_grid(basis)
    from kmschain.basis import _pair_galerkin

    class Linear(PotentialSpec):
        def __call__(self, x):
            return np.asarray(x, dtype=float)

    lin = Linear((GaussianBump(1.0),))
    m = _pair_galerkin(basis, lin, grid)
    x = position_matrix(basis).matrix
    eye = np.eye(basis.dim)
    np.testing.assert_allclose(m, np.kron(x, eye) - np.kron(eye, x), atol=1e-11)


def test_pair_operator_norm_below_sup():
    basis = HermiteBasis(6)
    m = pair_multiplication_operator(basis, PotentialSpec.bump(1.0)).matrix
    assert np.linalg.norm(m, 2) <= 1.0 + 1e-10


class TestPotentialSpec:
    def test_sup_norm_single_and_multi(self):
        assert PotentialSpec.bump(-0.4).sup_norm() == 0.4
        V = PotentialSpec((GaussianBump(1.0, -0.5), GaussianBump(1.0, 0.5)))
        x = np.linspace(-3, 3, 200001)
        assert V.sup_norm() == pytest.approx(np.abs(V(x)).max(), abs=1e-9)

    def test_zero(self):
        assert PotentialSpec().is_zero
        assert PotentialSpec().sup_norm() == 0.0
        assert PotentialSpec.bump(0.0).is_zero

    def test_lipschitz(self):
        V = PotentialSpec.bump(0.8, 0.2, 0.7)
        x = np.linspace(-4, 4, 400001)
        assert V.lipschitz == pytest.approx(np.abs(V.derivative(x)).max(), rel=1e-8)

    def test_shift_sup(self):
        V = PotentialSpec.bump(1.0)
        assert V.shift_sup(0.0) == 0.0
        # independent value, from roots of the derivative of e^{-(x+t)^2} - e^{-x^2}
        assert V.shift_sup(0.1) == pytest.approx(0.0856335945207116, abs=1e-12)
