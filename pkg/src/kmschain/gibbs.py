"""Spectral decompositions, Gibbs states, partial traces and trace sandwiches.

Every matrix function is evaluated through one eigendecomposition, so a
Gibbs state commutes with its Hamiltonian to rounding error and the same
decomposition serves both imaginary and real time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np
from scipy.special import logsumexp

from .basis import PotentialSpec, multiplication_operator
from .chain import (
    ChainSpec,
    boundary_coupling,
    hamiltonian,
    region_hamiltonian,
)
from .errors import NotHermitian, NotPositive, SupportMismatch
from .operators import LabeledOperator, embed, is_hermitian, sandwich, tensor_product

__all__ = [
    "SpectralDecomposition",
    "GibbsState",
    "spectral",
    "gibbs_state",
    "chain_gibbs",
    "expectation",
    "partial_trace",
    "trace_norm",
    "ProductTerm",
    "PositiveMultiplier",
    "SandwichReport",
    "sandwich_check",
    "boltzmann_tail",
    "perturbed_gibbs",
    "FactorizationReport",
    "gibbs_factorization",
]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """H = U diag(eigenvalues) U^dag with eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    support: tuple[int, ...] = ()
    site_dim: int = 0

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self) -> np.ndarray:
        return self.apply(lambda E: E)

    def apply(self, f) -> np.ndarray:
        """f(H) for a scalar function f evaluated on the eigenvalues."""
        U = self.eigenvectors
        vals = np.asarray(f(self.eigenvalues))
        if np.iscomplexobj(vals) and not np.iscomplexobj(U):
            out = np.empty(U.shape, dtype=complex)
            out.real = (U * vals.real) @ U.T
            out.imag = (U * vals.imag) @ U.T
            return out
        return (U * vals) @ U.conj().T

    def to_eigenbasis(self, A: np.ndarray) -> np.ndarray:
        return sandwich(self.eigenvectors.conj().T, A)

    def from_eigenbasis(self, A: np.ndarray) -> np.ndarray:
        return sandwich(self.eigenvectors, A)


def _matrix_of(H) -> tuple[np.ndarray, tuple[int, ...], int]:
    if isinstance(H, LabeledOperator):
        return H.matrix, H.support, H.site_dim
    return np.asarray(H), (), 0


def spectral(H) -> SpectralDecomposition:
    """Full eigendecomposition of a Hermitian matrix or :class:`LabeledOperator`."""
    m, support, d = _matrix_of(H)
    if not is_hermitian(m, 1e-10):
        raise NotHermitian("spectral decomposition requires a Hermitian operator")
    if np.iscomplexobj(m) and not np.any(m.imag):
        m = m.real
    w, U = np.linalg.eigh(m)
    w.setflags(write=False)
    U.setflags(write=False)
    return SpectralDecomposition(w, U, support, d)


@dataclass(frozen=True, eq=False)
class GibbsState:
    beta: float
    rho: LabeledOperator
    log_z: float
    spectrum: SpectralDecomposition

    @property
    def support(self) -> tuple[int, ...]:
        return self.rho.support

    @property
    def site_dim(self) -> int:
        return self.rho.site_dim

    @property
    def matrix(self) -> np.ndarray:
        return self.rho.matrix

    @property
    def weights(self) -> np.ndarray:
        """Boltzmann populations of the eigenvectors, summing to one."""
        E = self.spectrum.eigenvalues
        return np.exp(-self.beta * E - self.log_z)


def gibbs_state(H, beta: float) -> GibbsState:
    """rho = exp(-beta H) / Z via the spectral decomposition, log Z by log-sum-exp."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    sd = H if isinstance(H, SpectralDecomposition) else spectral(H)
    E = sd.eigenvalues
    log_z = float(logsumexp(-beta * E))
    p = np.exp(-beta * E - log_z)
    rho = sd.apply(lambda _: p)
    rho = 0.5 * (rho + rho.conj().T)
    support, d = sd.support, sd.site_dim
    if not d:
        # bare matrix input: treat as a single site of full dimension
        support, d = (0,), rho.shape[0]
    return GibbsState(beta, LabeledOperator(support, rho, d), log_z, sd)


def chain_gibbs(chain: ChainSpec, beta: float | None = None) -> GibbsState:
    return _chain_gibbs(chain, float(chain.beta if beta is None else beta))


@lru_cache(maxsize=2)
def _chain_gibbs(chain: ChainSpec, beta: float) -> GibbsState:
    return gibbs_state(hamiltonian(chain).H, beta)


def partial_trace(rho: LabeledOperator, keep: Iterable[int]) -> LabeledOperator:
    """Trace out every site of ``rho.support`` not in ``keep``."""
    keep = tuple(sorted(set(int(s) for s in keep)))
    if not set(keep) <= set(rho.support):
        raise SupportMismatch(f"cannot keep {keep}: support is {rho.support}")
    if keep == rho.support:
        return rho
    d, n = rho.site_dim, len(rho.support)
    kpos = [i for i, s in enumerate(rho.support) if s in keep]
    tpos = [i for i, s in enumerate(rho.support) if s not in keep]
    t = rho.matrix.reshape((d,) * (2 * n))
    t = t.transpose(kpos + tpos + [n + i for i in kpos] + [n + i for i in tpos])
    dk, dt = d ** len(kpos), d ** len(tpos)
    red = np.einsum("iaja->ij", t.reshape(dk, dt, dk, dt))
    return LabeledOperator(keep, red, d)


def expectation(state: GibbsState, Q: LabeledOperator) -> complex:
    """Tr(rho Q), reducing rho to the support of Q first."""
    if not set(Q.support) <= set(state.support):
        raise SupportMismatch(f"operator support {Q.support} not inside {state.support}")
    red = partial_trace(state.rho, Q.support)
    q = embed(Q, red.support).matrix
    # Tr(rho Q) = sum_ij rho_ij Q_ji
    return complex(np.sum(red.matrix * q.T))


def trace_norm(A: np.ndarray) -> float:
    A = np.asarray(A)
    if is_hermitian(A, 1e-13):
        return float(np.abs(np.linalg.eigvalsh(A)).sum())
    return float(np.linalg.svd(A, compute_uv=False).sum())


# ---------------------------------------------------------------------------
# positive multiplication operators and the trace sandwich


@dataclass(frozen=True)
class ProductTerm:
    """prod_k f_k(x_k) over the listed (site, bump-sum) factors."""

    factors: tuple[tuple[int, PotentialSpec], ...]

    def __post_init__(self):
        sites = [s for s, _ in self.factors]
        if len(set(sites)) != len(sites):
            raise ValueError("a product term may use each site once")
        object.__setattr__(self, "factors", tuple(sorted(self.factors, key=lambda t: t[0])))


@dataclass(frozen=True)
class PositiveMultiplier:
    """F(x) = constant + sum of products of nonnegative Gaussian-bump sums.

    Positivity is checked on the data (nonnegative amplitudes and constant),
    which makes every quadrature image a positive semidefinite matrix.
    """

    terms: tuple[ProductTerm, ...] = ()
    constant: float = 0.0

    def __post_init__(self):
        if self.constant < 0:
            raise NotPositive("constant part of F is negative")
        for term in self.terms:
            for _, f in term.factors:
                if any(b.amplitude < 0 for b in f.terms):
                    raise NotPositive("F contains a bump with negative amplitude")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted({s for t in self.terms for s, _ in t.factors}))

    def operator(self, chain: ChainSpec, support: Iterable[int] | None = None) -> LabeledOperator:
        support = tuple(sorted(set(self.support if support is None else support)))
        d = chain.site_dim
        total = LabeledOperator(support, self.constant * np.eye(d ** len(support)), d)
        for term in self.terms:
            op = None
            for site, f in term.factors:
                m = multiplication_operator(chain.basis, f, chain.quadrature, site=site)
                op = m if op is None else tensor_product(op, m)
            total = total + embed(op, support)
        return total


def boltzmann_tail(chain: ChainSpec, beta: float) -> float:
    """Relative weight of the discarded single-site levels, exp(-2 beta omega dim)."""
    return math.exp(-2.0 * beta * chain.omega * chain.site_dim)


class SandwichReport(NamedTuple):
    log_trace_big: float  # log Tr(e^{-beta H_L'} M_F)
    log_trace_small: float  # log Tr(e^{-beta H_L} M_F)
    log_trace_rest: float  # log Tr(e^{-beta H_{L' \ L}})
    state_big: float  # psi_L'(F)
    state_small: float  # psi_L(F)
    trace_ratio: float  # Tr(e^{-beta H_L'} M_F) / (Tr(e^{-beta H_{L' \\ L}}) Tr(e^{-beta H_L} M_F))
    state_ratio: float  # state_big / state_small
    trace_envelope: float  # exp(2 beta ||phi||_inf)
    state_envelope: float  # exp(4 beta ||phi||_inf)
    tolerance: float
    passed: bool


def _log_trace(H: LabeledOperator, beta: float) -> float:
    return float(logsumexp(-beta * np.linalg.eigvalsh(H.matrix)))


def sandwich_check(
    small: ChainSpec, big: ChainSpec, F: PositiveMultiplier, beta: float | None = None
) -> SandwichReport:
    """Compare psi_L(F) and psi_L'(F) for a positive multiplication operator F on Lambda_L.

    Traces are reported as logarithms so that large volumes stay representable.
    """
    if small.L > big.L:
        raise SupportMismatch("need L <= L'")
    if not set(F.support) <= set(small.sites):
        raise SupportMismatch(f"F must live on Lambda_{small.L}")
    beta = small.beta if beta is None else beta
    MF_small = F.operator(small, small.sites)

    st_small = chain_gibbs(small, beta)
    st_big = chain_gibbs(big, beta)
    psi_small = expectation(st_small, MF_small).real
    psi_big = expectation(st_big, F.operator(big, small.sites)).real

    rest = [s for s in big.sites if s not in small.sites]
    log_rest = _log_trace(region_hamiltonian(big, rest), beta) if rest else 0.0
    log_big = math.log(psi_big) + st_big.log_z
    log_small = math.log(psi_small) + st_small.log_z
    trace_ratio = math.exp(log_big - log_rest - log_small)
    state_ratio = psi_big / psi_small

    phi_sup = big.phi_sup
    n_sites = len(big.sites)
    tol = 10.0 * n_sites * boltzmann_tail(big, beta)
    trace_env = math.exp(2 * beta * phi_sup)
    state_env = math.exp(4 * beta * phi_sup)
    ok = (
        1.0 / trace_env - tol <= trace_ratio <= trace_env + tol
        and 1.0 / state_env - tol <= state_ratio <= state_env + tol
    )
    return SandwichReport(
        log_trace_big=log_big,
        log_trace_small=log_small,
        log_trace_rest=log_rest,
        state_big=psi_big,
        state_small=psi_small,
        trace_ratio=trace_ratio,
        state_ratio=state_ratio,
        trace_envelope=trace_env,
        state_envelope=state_env,
        tolerance=tol,
        passed=bool(ok),
    )


# ---------------------------------------------------------------------------
# boundary-perturbed states


def perturbed_gibbs(big: ChainSpec, W: LabeledOperator, beta: float | None = None) -> GibbsState:
    """Gibbs state of H_L' - W."""
    if not W.is_hermitian(1e-10):
        raise NotHermitian("perturbation W must be Hermitian")
    beta = big.beta if beta is None else beta
    H = hamiltonian(big).H
    return gibbs_state(H - embed(W, H.support), beta)


class FactorizationReport(NamedTuple):
    trace_distance: float  # ||rho' - rho_L (x) rho_rest||_1
    gibbs_condition: float  # max |psi'(Q R) - psi_L(Q) psi'(R)| over samples


def gibbs_factorization(big: ChainSpec, L: int, samples: int = 5, seed: int = 0) -> FactorizationReport:
    """Remove W(L) from H_L' and measure how far the result is from a product state."""
    beta = big.beta
    pert = perturbed_gibbs(big, boundary_coupling(big, L), beta)
    small = big.with_(L=L)
    inner = tuple(small.sites)
    rest = tuple(s for s in big.sites if s not in inner)
    rho_in = gibbs_state(region_hamiltonian(big, inner), beta).rho
    if rest:
        rho_out = gibbs_state(region_hamiltonian(big, rest), beta).rho
        prod = tensor_product(rho_in, rho_out).matrix
    else:
        prod = rho_in.matrix
    dist = trace_norm(pert.matrix - prod)

    rng = np.random.default_rng(seed)
    d = big.site_dim
    err = 0.0
    state_in = gibbs_state(region_hamiltonian(big, inner), beta)
    for _ in range(samples if rest else 0):
        q = rng.standard_normal((d ** len(inner),) * 2) + 1j * rng.standard_normal((d ** len(inner),) * 2)
        r = rng.standard_normal((d ** len(rest),) * 2) + 1j * rng.standard_normal((d ** len(rest),) * 2)
        Q = LabeledOperator(inner, q, d)
        R = LabeledOperator(rest, r, d)
        lhs = expectation(pert, tensor_product(Q, R))
        rhs = expectation(state_in, Q) * expectation(pert, R)
        err = max(err, abs(lhs - rhs))
    return FactorizationReport(trace_distance=dist, gibbs_condition=err)
