"""Relative entropy of density matrices and the inequalities built on it."""
from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .chain import ChainSpec, boundary_coupling, hamiltonian
from .errors import NotDensity, SupportMismatch
from .gibbs import (
    GibbsState,
    boltzmann_tail,
    expectation,
    gibbs_state,
    partial_trace,
    perturbed_gibbs,
    trace_norm,
)
from .operators import LabeledOperator, is_hermitian

__all__ = [
    "SUPPORT_CUTOFF",
    "relative_entropy",
    "pinsker_gap",
    "MonotonicityReport",
    "monotonicity_check",
    "PBReport",
    "peierls_bogoliubov_check",
    "UniquenessReport",
    "uniqueness_bound_experiment",
    "LSCReport",
    "lsc_check",
    "mixing_sequence",
    "padded_gibbs_sequence",
]

SUPPORT_CUTOFF = 1e-13


def _density(rho, atol: float = 1e-8) -> np.ndarray:
    if isinstance(rho, GibbsState):
        rho = rho.rho
    m = rho.matrix if isinstance(rho, LabeledOperator) else np.asarray(rho)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotDensity("density matrix must be square")
    if not is_hermitian(m, 1e-10):
        raise NotDensity("density matrix must be Hermitian")
    tr = np.trace(m).real
    if abs(tr - 1.0) > atol:
        raise NotDensity(f"trace is {tr}, expected 1")
    return m


def relative_entropy(rho1, rho2) -> float:
    """S(rho1, rho2) = Tr rho1 (log rho1 - log rho2), or inf if supp rho1 is not inside supp rho2.

    Eigenvalues below ``SUPPORT_CUTOFF`` times the largest one are treated as
    zero when deciding supports.
    """
    a, b = _density(rho1), _density(rho2)
    if a.shape != b.shape:
        raise NotDensity("density matrices act on different spaces")
    p, U = np.linalg.eigh(a)
    q, V = np.linalg.eigh(b)
    p_live = p > SUPPORT_CUTOFF * p.max()
    q_live = q > SUPPORT_CUTOFF * q.max()
    overlap = np.abs(U[:, p_live].conj().T @ V) ** 2  # |<u_i|v_j>|^2
    pl = p[p_live]
    if np.any(~q_live):
        leak = float(pl @ overlap[:, ~q_live].sum(axis=1))
        if leak > SUPPORT_CUTOFF:
            return math.inf
    logq = np.zeros_like(q)
    logq[q_live] = np.log(q[q_live])
    s = float(np.dot(pl, np.log(pl)) - pl @ overlap @ logq)
    return max(s, 0.0) if s > -1e-12 else s


def pinsker_gap(rho1, rho2) -> tuple[float, float]:
    """(S(rho1, rho2), ||rho1 - rho2||_1^2 / 2); Pinsker says the first is at least the second."""
    a, b = _density(rho1), _density(rho2)
    return relative_entropy(a, b), 0.5 * trace_norm(a - b) ** 2


class MonotonicityReport(NamedTuple):
    full: float
    restricted: float
    passed: bool


def monotonicity_check(rho1: LabeledOperator, rho2: LabeledOperator, keep: Iterable[int]) -> MonotonicityReport:
    """0 <= S(rho1|keep, rho2|keep) <= S(rho1, rho2) under the partial trace."""
    keep = tuple(keep)
    if not keep:
        raise SupportMismatch("keep must be nonempty")
    full = relative_entropy(rho1, rho2)
    red = relative_entropy(partial_trace(rho1, keep), partial_trace(rho2, keep))
    ok = -1e-12 <= red <= full + 1e-9
    return MonotonicityReport(full, red, bool(ok))


class PBReport(NamedTuple):
    lhs: float  # log Tr e^{-beta H + beta W} - log Tr e^{-beta H}
    rhs: float  # beta Tr(rho W)
    passed: bool


def peierls_bogoliubov_check(H, W, beta: float, slack: float = 1e-10) -> PBReport:
    h = H.matrix if isinstance(H, LabeledOperator) else np.asarray(H)
    w = W.matrix if isinstance(W, LabeledOperator) else np.asarray(W)
    E, U = np.linalg.eigh(h)
    log_z = logsumexp(-beta * E)
    log_zw = logsumexp(-beta * np.linalg.eigvalsh(h - w))
    p = np.exp(-beta * E - log_z)
    mean_w = float(np.real(np.einsum("i,ji,jk,ki->", p, U.conj(), w, U)))
    lhs = float(log_zw - log_z)
    rhs = beta * mean_w
    return PBReport(lhs, rhs, bool(lhs >= rhs - slack))


class UniquenessReport(NamedTuple):
    relative_entropy: float  # S(psi|Lambda_L, phi|Lambda_L)
    full_relative_entropy: float  # S(psi, phi) on Lambda_N
    energy_gap: float  # beta (psi(W) - phi(W))
    bound: float  # 4 beta ||phi||_inf
    slack: float
    nested: tuple[float, ...]  # S restricted to Lambda_N, Lambda_L, then {0}
    passed: bool


def uniqueness_bound_experiment(small: ChainSpec, big: ChainSpec, beta: float | None = None) -> UniquenessReport:
    """Relative entropy between the coupled and the boundary-decoupled Gibbs states.

    phi = Gibbs(H_N) and psi = Gibbs(H_N - W(L)) = Gibbs(H_L) (x) Gibbs(H_{N \\ L}).
    The chain S(psi|L, phi|L) <= S(psi, phi) <= beta (psi(W) - phi(W)) <= 4 beta ||phi||_inf
    is reported term by term.
    """
    if big.L <= small.L:
        raise SupportMismatch("need N >= L + 1")
    beta = big.beta if beta is None else beta
    W = boundary_coupling(big, small.L)
    phi_state = gibbs_state(hamiltonian(big).H, beta)
    psi_state = perturbed_gibbs(big, W, beta)
    inner = small.sites
    s_full = relative_entropy(psi_state.rho, phi_state.rho)
    s_inner = relative_entropy(partial_trace(psi_state.rho, inner), partial_trace(phi_state.rho, inner))
    s_site = relative_entropy(partial_trace(psi_state.rho, (0,)), partial_trace(phi_state.rho, (0,)))
    gap = beta * (expectation(psi_state, W).real - expectation(phi_state, W).real)
    bound = 4.0 * beta * big.phi_sup
    slack = 10.0 * len(big.sites) * boltzmann_tail(big, beta)
    ok = 0.0 <= s_inner <= s_full + 1e-9 and s_full <= gap + 1e-9 and s_inner <= bound + slack
    return UniquenessReport(s_inner, s_full, gap, bound, slack, (s_full, s_inner, s_site), bool(ok))


class LSCReport(NamedTuple):
    limit: float  # S(lim rho_i, lim sigma_i)
    values: tuple[float, ...]
    liminf: float  # min over the second half of the sequence
    passed: bool


def lsc_check(
    rho_sequence: Sequence[np.ndarray],
    sigma_sequence: Sequence[np.ndarray],
    rho_limit: np.ndarray,
    sigma_limit: np.ndarray,
    tol: float = 1e-6,
) -> LSCReport:
    """S(rho, sigma) <= liminf S(rho_i, sigma_i) along convergent sequences.

    The liminf of a finite sequence is estimated by the minimum over its
    second half.
    """
    if len(rho_sequence) != len(sigma_sequence) or not rho_sequence:
        raise ValueError("sequences must be nonempty and of equal length")
    values = tuple(relative_entropy(r, s) for r, s in zip(rho_sequence, sigma_sequence))
    tail = values[len(values) // 2 :]
    liminf = min(tail)
    limit = relative_entropy(rho_limit, sigma_limit)
    return LSCReport(limit, values, liminf, bool(limit <= liminf + tol))


def mixing_sequence(rho: np.ndarray, n: int) -> list[np.ndarray]:
    """(1 - 1/i) rho + (1/i) I/d along i = 2^k, k = 0..n-1.

    The geometric subsequence reaches 1/i ~ 1e-12 within 40 terms, so the
    second half of a finite prefix sits at the limit to working precision.
    """
    d = rho.shape[0]
    eye = np.eye(d) / d
    return [(1 - 2.0**-k) * rho + 2.0**-k * eye for k in range(n)]


def padded_gibbs_sequence(H_full: np.ndarray, beta: float, dims: Sequence[int]) -> list[np.ndarray]:
    """Gibbs states of the leading d x d blocks of ``H_full``, zero-padded to full size."""
    n = H_full.shape[0]
    out = []
    for d in dims:
        rho = gibbs_state(H_full[:d, :d], beta).matrix
        pad = np.zeros((n, n), dtype=rho.dtype)
        pad[:d, :d] = rho
        out.append(pad)
    return out
