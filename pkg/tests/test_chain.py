import math

import numpy as np
import pytest

from kmschain.basis import PotentialSpec, multiplication_operator
from kmschain.chain import (
    ChainSpec,
    boundary_coupling,
    hamiltonian,
    interaction_map,
    interaction_norm,
    lambda_sites,
    lr_boundary,
    lr_constant,
    lr_distance,
    region_hamiltonian,
    upsilon,
)
from kmschain.errors import DimensionOverflow, NotDisjoint, SupportMismatch
from kmschain.operators import embed, opnorm

V = PotentialSpec.bump(0.5)
PHI = PotentialSpec.bump(0.3)


def chain(L=1, d=3, **kw):
    return ChainSpec(L=L, site_dim=d, V=kw.pop("V", V), phi=kw.pop("phi", PHI), **kw)


def test_lambda_sites():
    assert lambda_sites(1) == (0, 1)
    assert lambda_sites(3) == (-2, -1, 0, 1, 2, 3)


def test_chainspec_basics():
    c = chain(L=2, d=3)
    assert len(c.sites) == 4
    assert c.total_dim == 81
    assert c.phi_sup == pytest.approx(0.3)
    with pytest.raises(ValueError):
        ChainSpec(L=0, site_dim=3)
    with pytest.raises(ValueError):
        ChainSpec(L=1, site_dim=3, beta=-1.0)


def test_dimension_cap():
    with pytest.raises(DimensionOverflow):
        hamiltonian(chain(L=2, d=4, max_dim=100))


def test_interaction_map_cases():
    c = chain(L=2)
    assert np.all(interaction_map(c, (0, 2)).matrix == 0)
    single = interaction_map(c, (0,))
    np.testing.assert_allclose(single.matrix, multiplication_operator(c.basis, V, c.quadrature).matrix)
    with pytest.raises(SupportMismatch):
        interaction_map(c, (5,))


def test_pair_norm_approaches_sup():
    # ||phi(x0 - x1)|| <= ||phi||_inf and increases toward it with site_dim
    phi = PotentialSpec.bump(1.0)
    norms = [interaction_norm(chain(d=d, phi=phi)).value * 4 for d in (4, 8, 12)]
    assert all(n <= 1.0 + 1e-10 for n in norms)
    assert norms[0] < norms[1] < norms[2]
    assert norms[-1] > 0.6


def test_interaction_norm_bound():
    rng = np.random.default_rng(0)
    for _ in range(5):
        phi = PotentialSpec.bump(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 2))
        r = interaction_norm(chain(d=5, phi=phi))
        assert r.value <= r.bound + 1e-12
    assert interaction_norm(chain(phi=PotentialSpec())).value == 0.0


def test_upsilon_unrolled():
    c = chain(L=1)
    u0 = upsilon(c, (0,))
    np.testing.assert_allclose(u0.matrix, interaction_map(c, (0,)).matrix)
    full = upsilon(c).matrix
    parts = (
        embed(interaction_map(c, (0,)), (0, 1)).matrix
        + embed(interaction_map(c, (1,)), (0, 1)).matrix
        + interaction_map(c, (0, 1)).matrix
    )
    np.testing.assert_allclose(full, parts, atol=1e-14)


def test_upsilon_triangle_bound():
    for L in (1, 2):
        c = chain(L=L, d=3)
        n = 2 * L
        assert opnorm(upsilon(c).matrix) <= n * V.sup_norm() + (n - 1) * PHI.sup_norm() + 1e-10


def test_upsilon_additivity_for_separated_regions():
    c = chain(L=2, d=3)
    whole = upsilon(c, (-1, 1)).matrix
    parts = embed(upsilon(c, (-1,)), (-1, 1)).matrix + embed(upsilon(c, (1,)), (-1, 1)).matrix
    np.testing.assert_allclose(whole, parts, atol=1e-14)


def test_hamiltonian_structure():
    c = chain(L=1, d=4)
    ham = hamiltonian(c)
    np.testing.assert_allclose(ham.H.matrix, ham.H_h.matrix + ham.upsilon.matrix)
    diag_part = ham.H.matrix - ham.upsilon.matrix
    np.testing.assert_array_equal(diag_part, np.diag(np.diag(diag_part)))
    free = ham.H_h.matrix + embed(interaction_map(c, (0,)), (0, 1)).matrix + embed(interaction_map(c, (1,)), (0, 1)).matrix
    np.testing.assert_allclose(ham.H_free.matrix, free, atol=1e-14)


def test_decoupled_spectrum():
    c = ChainSpec(L=1, site_dim=4, omega=1.5)
    E = np.linalg.eigvalsh(hamiltonian(c).H.matrix)
    e = c.basis.energies
    np.testing.assert_allclose(E, np.sort(np.add.outer(e, e).ravel()), atol=1e-12)


def test_phi_zero_gives_free_hamiltonian():
    ham = hamiltonian(chain(L=1, phi=PotentialSpec()))
    np.testing.assert_allclose(ham.H.matrix, ham.H_free.matrix, rtol=0, atol=1e-14)


def test_trace_linearity_small():
    ham = hamiltonian(chain(L=1, d=2))
    E = np.linalg.eigvalsh(ham.H.matrix)
    assert E.sum() == pytest.approx(np.trace(ham.H_h.matrix) + np.trace(ham.upsilon.matrix), abs=1e-12)


def test_region_hamiltonian_matches_full_when_region_is_everything():
    c = chain(L=1)
    np.testing.assert_allclose(region_hamiltonian(c, c.sites).matrix, hamiltonian(c).H.matrix)


def test_boundary_coupling_splits_hamiltonian():
    c = chain(L=2, d=3)
    W = boundary_coupling(c, 1)
    split = (
        embed(region_hamiltonian(c, (0, 1)), c.sites).matrix
        + embed(region_hamiltonian(c, (-1,)), c.sites).matrix
        + embed(region_hamiltonian(c, (2,)), c.sites).matrix
    )
    np.testing.assert_allclose(hamiltonian(c).H.matrix - W.matrix, split, atol=1e-13)
    with pytest.raises(SupportMismatch):
        boundary_coupling(c, 3)


def test_sandwich_operator_inequality():
    # Upsilon_{L'} >= Upsilon_L + Upsilon_{L' \ L} - 2 ||phi||_inf as operators
    c = chain(L=2, d=3)
    split = (
        embed(upsilon(c, (0, 1)), c.sites).matrix
        + embed(upsilon(c, (-1,)), c.sites).matrix
        + embed(upsilon(c, (2,)), c.sites).matrix
    )
    diff = np.linalg.eigvalsh(upsilon(c).matrix - split)
    assert diff.min() >= -2 * c.phi_sup - 1e-12
    assert diff.max() <= 2 * c.phi_sup + 1e-12


class TestLiebRobinsonBookkeeping:
    def test_constant(self):
        C = lr_constant()
        assert C == pytest.approx(4 * (math.pi**2 / 3 - 1), abs=1e-10)
        assert C == pytest.approx(9.159472534785811, abs=1e-10)
        assert C > 8

    def test_constant_cutoff_insensitive(self):
        assert abs(lr_constant(10**6) - lr_constant()) < 1e-5

    @pytest.mark.parametrize("g1, g2, expected", [((0,), (1,), 0.5), ((0,), (5,), 1 / 6)])
    def test_distance(self, g1, g2, expected):
        assert lr_distance(g1, g2) == pytest.approx(expected, abs=1e-15)
        assert lr_distance(g2, g1) == pytest.approx(expected, abs=1e-15)

    def test_distance_requires_disjoint(self):
        with pytest.raises(NotDisjoint):
            lr_distance((0, 1), (1, 2))

    def test_boundary(self):
        assert lr_boundary((0, 1, 2, 3)) == (0, 3)
        assert lr_boundary((0,)) == (0,)
        assert lr_boundary((0, 1), coupled=False) == ()
