"""Chains of coupled anharmonic oscillators on Lambda_L = {-L+1, ..., L}.

The Hamiltonian is

    H_L = sum_k (p_k^2 + omega^2 x_k^2 + V(x_k)) + sum_k phi(x_k - x_{k+1}),

split as H_L = H^h_L + Upsilon_L, where Upsilon collects the interaction map
Phi: V on singletons, phi on nearest-neighbour pairs, zero otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from .basis import (
    GridSpec,
    HermiteBasis,
    PotentialSpec,
    default_grid,
    multiplication_operator,
    pair_multiplication_operator,
)
from .errors import DimensionOverflow, NotDisjoint, SupportMismatch
from .operators import LabeledOperator, embed, opnorm

__all__ = [
    "ChainSpec",
    "ChainHamiltonians",
    "InteractionNorm",
    "lambda_sites",
    "interaction_map",
    "upsilon",
    "hamiltonian",
    "region_hamiltonian",
    "boundary_coupling",
    "interaction_norm",
    "lr_constant",
    "lr_boundary",
    "lr_distance",
    "site_operator",
    "DEFAULT_MAX_DIM",
]

DEFAULT_MAX_DIM = 65536


def lambda_sites(L: int) -> tuple[int, ...]:
    return tuple(range(-L + 1, L + 1))


@dataclass(frozen=True)
class ChainSpec:
    L: int
    site_dim: int
    omega: float = 1.0
    V: PotentialSpec = field(default_factory=PotentialSpec)
    phi: PotentialSpec = field(default_factory=PotentialSpec)
    beta: float = 1.0
    max_dim: int = DEFAULT_MAX_DIM
    grid: GridSpec | None = None

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be a positive integer")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        HermiteBasis(self.site_dim, self.omega)  # validates dim and omega

    @property
    def sites(self) -> tuple[int, ...]:
        return lambda_sites(self.L)

    @property
    def basis(self) -> HermiteBasis:
        return HermiteBasis(self.site_dim, self.omega)

    @property
    def quadrature(self) -> GridSpec:
        return self.grid or default_grid(self.basis)

    @property
    def total_dim(self) -> int:
        return self.site_dim ** (2 * self.L)

    @property
    def phi_sup(self) -> float:
        return self.phi.sup_norm()

    def with_(self, **changes) -> "ChainSpec":
        return replace(self, **changes)


class ChainHamiltonians(NamedTuple):
    H: LabeledOperator
    H_h: LabeledOperator
    H_free: LabeledOperator
    upsilon: LabeledOperator


class InteractionNorm(NamedTuple):
    value: float
    bound: float


def _check_region(chain: ChainSpec, region: Iterable[int]) -> tuple[int, ...]:
    region = tuple(sorted(set(int(s) for s in region)))
    if not set(region) <= set(chain.sites):
        raise SupportMismatch(f"sites {region} are not inside Lambda_{chain.L}")
    if chain.site_dim ** len(region) > chain.max_dim:
        raise DimensionOverflow(
            f"dimension {chain.site_dim}^{len(region)} exceeds cap {chain.max_dim}"
        )
    return region


def _place(block: np.ndarray, pos: int, width: int, n: int, d: int) -> np.ndarray:
    """kron(I, block, I) with ``block`` on consecutive tensor positions pos..pos+width-1."""
    left = np.eye(d**pos)
    right = np.eye(d ** (n - pos - width))
    return np.kron(np.kron(left, block), right)


def site_operator(chain: ChainSpec, matrix: np.ndarray, site: int) -> LabeledOperator:
    return LabeledOperator((site,), matrix, chain.site_dim)


def _potential_block(chain: ChainSpec) -> np.ndarray:
    return multiplication_operator(chain.basis, chain.V, chain.quadrature).matrix


def _pair_block(chain: ChainSpec) -> np.ndarray:
    return pair_multiplication_operator(chain.basis, chain.phi, chain.quadrature).matrix


def interaction_map(chain: ChainSpec, region: Iterable[int]) -> LabeledOperator:
    """Phi(region): V on a singleton, phi(x_k - x_{k+1}) on an adjacent pair, else 0."""
    region = _check_region(chain, region)
    d = chain.site_dim
    if len(region) == 1:
        return LabeledOperator(region, _potential_block(chain), d)
    if len(region) == 2 and region[1] == region[0] + 1:
        return LabeledOperator(region, _pair_block(chain), d)
    return LabeledOperator(region, np.zeros((d ** len(region),) * 2), d)


def _upsilon_matrix(chain: ChainSpec, region: tuple[int, ...]) -> np.ndarray:
    d, n = chain.site_dim, len(region)
    out = np.zeros((d**n, d**n))
    if not chain.V.is_zero:
        v = _potential_block(chain)
        for pos in range(n):
            out += _place(v, pos, 1, n, d)
    if not chain.phi.is_zero:
        w = _pair_block(chain)
        for pos in range(n - 1):
            if region[pos + 1] == region[pos] + 1:
                out += _place(w, pos, 2, n, d)
    return out


def upsilon(chain: ChainSpec, region: Iterable[int] | None = None) -> LabeledOperator:
    """Upsilon(region) = sum of Phi(X) over X contained in region."""
    region = _check_region(chain, chain.sites if region is None else region)
    return LabeledOperator(region, _upsilon_matrix(chain, region), chain.site_dim)


def _harmonic_matrix(chain: ChainSpec, n: int) -> np.ndarray:
    e = chain.basis.energies
    total = np.zeros(chain.site_dim**n)
    for pos in range(n):
        total += np.kron(np.kron(np.ones(chain.site_dim**pos), e), np.ones(chain.site_dim ** (n - pos - 1)))
    return np.diag(total)


@lru_cache(maxsize=4)
def _hamiltonians(chain: ChainSpec) -> ChainHamiltonians:
    region = _check_region(chain, chain.sites)
    d, n = chain.site_dim, len(region)
    h = _harmonic_matrix(chain, n)
    ups = _upsilon_matrix(chain, region)
    free = h.copy()
    if not chain.V.is_zero:
        v = _potential_block(chain)
        for pos in range(n):
            free += _place(v, pos, 1, n, d)
    return ChainHamiltonians(
        H=LabeledOperator(region, h + ups, d),
        H_h=LabeledOperator(region, h, d),
        H_free=LabeledOperator(region, free, d),
        upsilon=LabeledOperator(region, ups, d),
    )


def hamiltonian(chain: ChainSpec) -> ChainHamiltonians:
    """(H_L, H^h_L, H^free_L, Upsilon_L) on the whole of Lambda_L."""
    return _hamiltonians(chain)


def region_hamiltonian(chain: ChainSpec, region: Iterable[int]) -> LabeledOperator:
    """H(region) = sum_{k in region} (p_k^2 + omega^2 x_k^2) + Upsilon(region)."""
    region = _check_region(chain, region)
    h = _harmonic_matrix(chain, len(region))
    return LabeledOperator(region, h + _upsilon_matrix(chain, region), chain.site_dim)


def boundary_coupling(chain: ChainSpec, L: int) -> LabeledOperator:
    """W(L): the pair terms joining Lambda_L to the rest of the chain's sites."""
    if not 1 <= L <= chain.L:
        raise SupportMismatch(f"inner volume L={L} must lie in [1, {chain.L}]")
    bonds = [(L, L + 1), (-L, -L + 1)]
    sites = chain.sites
    total = LabeledOperator(sites, np.zeros((chain.total_dim,) * 2), chain.site_dim)
    for bond in bonds:
        if set(bond) <= set(sites):
            total = total + embed(interaction_map(chain, bond), sites)
    return total


def interaction_norm(chain: ChainSpec) -> InteractionNorm:
    """||Phi||_int restricted to nearest-neighbour supports, with its bound ||phi||_inf / 4."""
    value = opnorm(_pair_block(chain), hermitian=True) / 4.0 if not chain.phi.is_zero else 0.0
    return InteractionNorm(value=value, bound=chain.phi_sup / 4.0)


def lr_constant(cutoff: int = 10_000) -> float:
    """C = 4 sum_{x in Z} (1 + |x|)^-2, by partial sum plus an Euler-Maclaurin tail."""
    partial = math.fsum(1.0 / (1.0 + x) ** 2 for x in range(1, cutoff + 1))
    # sum_{k >= a} k^-2 with a = cutoff + 2
    a = cutoff + 2.0
    tail = 1.0 / a + 1.0 / (2 * a**2) + 1.0 / (6 * a**3) - 1.0 / (30 * a**5)
    return 4.0 * (1.0 + 2.0 * (partial + tail))


def lr_boundary(region: Iterable[int], coupled: bool = True) -> tuple[int, ...]:
    """Sites of ``region`` that share a nonzero nearest-neighbour term with the complement in Z."""
    region = set(int(s) for s in region)
    if not coupled:
        return ()
    return tuple(sorted(x for x in region if (x - 1) not in region or (x + 1) not in region))


def lr_distance(gamma1: Iterable[int], gamma2: Iterable[int], coupled: bool = True) -> float:
    """D(Gamma1, Gamma2) with weights 1 / (1 + |x - y|)."""
    g1 = tuple(sorted(set(int(s) for s in gamma1)))
    g2 = tuple(sorted(set(int(s) for s in gamma2)))
    if set(g1) & set(g2):
        raise NotDisjoint(f"{g1} and {g2} intersect")

    def double_sum(xs, ys):
        return math.fsum(1.0 / (1.0 + abs(x - y)) for x in xs for y in ys)

    return min(
        double_sum(lr_boundary(g1, coupled), g2),
        double_sum(g1, lr_boundary(g2, coupled)),
    )
