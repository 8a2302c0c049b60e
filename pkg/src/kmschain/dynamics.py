"""Heisenberg dynamics, Dyson series and Lieb-Robinson experiments.

All unitary groups are built from one cached eigendecomposition, so group
law and unitarity hold to rounding error for any t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.special import gammainc

from .chain import (
    ChainSpec,
    hamiltonian,
    interaction_norm,
    lambda_sites,
    lr_constant,
    lr_distance,
    region_hamiltonian,
)
from .basis import PotentialSpec
from .errors import QuadratureBudgetExceeded, SupportMismatch
from .gibbs import SpectralDecomposition, spectral
from .operators import LabeledOperator, apply_local, embed, opnorm, sandwich
from .resolvent import SymplecticVector

__all__ = [
    "EvolutionPlan",
    "evolution_plan",
    "heisenberg",
    "free_symplectic",
    "DysonResult",
    "dyson_unitary",
    "exp_tail",
    "lr_envelope",
    "LRReport",
    "lr_experiment",
    "lr_truncation_drift",
    "VolumeReport",
    "volume_envelope",
    "volume_convergence",
]


@dataclass(frozen=True, eq=False)
class EvolutionPlan:
    H: LabeledOperator
    spectral: SpectralDecomposition
    t_grid: tuple[float, ...] = ()

    def unitary(self, t: float) -> np.ndarray:
        """e^{itH}."""
        return self.spectral.apply(lambda E: np.exp(1j * t * E))

    def unitarity_error(self) -> float:
        err = 0.0
        for t in self.t_grid:
            U = self.unitary(t)
            err = max(err, float(np.abs(U @ U.conj().T - np.eye(U.shape[0])).max()))
        return err


def evolution_plan(H: LabeledOperator, t_grid: Iterable[float] = ()) -> EvolutionPlan:
    return EvolutionPlan(H, spectral(H), tuple(float(t) for t in t_grid))


def _conjugate(sd: SpectralDecomposition, A: np.ndarray, t: float) -> np.ndarray:
    """e^{itH} A e^{-itH} through the eigenbasis."""
    E = sd.eigenvalues
    phase = np.exp(1j * t * E)
    At = sd.to_eigenbasis(A) * phase[:, None] * phase.conj()[None, :]
    return sd.from_eigenbasis(At)


def heisenberg(plan: EvolutionPlan, t: float, Q: LabeledOperator) -> LabeledOperator:
    """alpha_t(Q) = e^{itH} Q e^{-itH} on the support of H."""
    if Q.site_dim != plan.H.site_dim or not set(Q.support) <= set(plan.H.support):
        raise SupportMismatch(f"operator on {Q.support} does not live inside {plan.H.support}")
    q = embed(Q, plan.H.support).matrix
    return LabeledOperator(plan.H.support, _conjugate(plan.spectral, q, t), Q.site_dim)


def free_symplectic(t: float, omega: float, f: SymplecticVector) -> SymplecticVector:
    """T_t f with Psi(T_t f) = alpha^h_t(Psi(f)) for h = p^2 + omega^2 x^2 at every site.

    Heisenberg's equations x' = 2p, p' = -2 omega^2 x rotate the
    (position, momentum) coefficients (Re f_k, Im f_k) by
    [[cos 2wt, -w sin 2wt], [sin(2wt) / w, cos 2wt]].
    """
    c, s = math.cos(2 * omega * t), math.sin(2 * omega * t)
    out = []
    for site, v in f.coefficients:
        a, b = v.real, v.imag
        out.append((site, complex(c * a - omega * s * b, s * a / omega + c * b)))
    return SymplecticVector(tuple(out))


# ---------------------------------------------------------------------------
# Dyson series


def exp_tail(x: float, order: int) -> float:
    """sum_{k > order} x^k / k! = e^x P(order + 1, x) for x >= 0."""
    if x <= 0:
        return 0.0
    return float(math.exp(x) * gammainc(order + 1, x))


def _integration_matrix(nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes, weights and S[j, l] = int_{-1}^{tau_j} ell_l on [-1, 1]."""
    tau, w = legendre.leggauss(nodes)
    vander = legendre.legvander(tau, nodes - 1)
    anti = np.empty((nodes, nodes))
    for k in range(nodes):
        c = np.zeros(nodes)
        c[k] = 1.0
        anti[:, k] = legendre.legval(tau, legendre.legint(c, lbnd=-1))
    return tau, w, anti @ np.linalg.inv(vander)


class DysonResult(NamedTuple):
    matrix: np.ndarray
    tail_bound: float
    quadrature_error: float


def _dyson_sum(E, Ut, t, order, nodes):
    tau, w, S = _integration_matrix(nodes)
    s = 0.5 * t * (tau + 1.0)
    ws = 0.5 * t * w
    Sm = 0.5 * t * S
    n = E.size
    gaps = E[:, None] - E[None, :]
    A = Ut[None, :, :] * np.exp(1j * s[:, None, None] * gaps[None, :, :])
    F = np.broadcast_to(np.eye(n, dtype=complex), (nodes, n, n))
    total = np.eye(n, dtype=complex)
    for _ in range(order):
        G = F @ A
        total = total + 1j * np.tensordot(ws, G, axes=(0, 0))
        F = 1j * np.tensordot(Sm, G, axes=(1, 0))
    return total


def dyson_unitary(
    H_h,
    upsilon,
    t: float,
    order: int,
    nodes: int = 32,
    max_order: int = 6,
    quad_budget: float = 1e-6,
) -> DysonResult:
    """Order-``order`` Dyson approximation of U(t) = e^{itH} e^{-itH_h}, H = H_h + Upsilon.

    U solves U' = i U alpha^h_t(Upsilon).  Each nested integral
    F_k(s) = i int_0^s F_{k-1} alpha^h(Upsilon) is evaluated by spectral
    collocation on ``nodes`` Gauss-Legendre points, which integrates the
    same polynomial interpolant as the full tensor rule at linear cost per
    order.  The quadrature error is estimated by rerunning with 16 more
    nodes and must stay below ``quad_budget``.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if order > max_order:
        raise QuadratureBudgetExceeded(f"order {order} exceeds the cap {max_order}")
    h = H_h.matrix if isinstance(H_h, LabeledOperator) else np.asarray(H_h)
    ups = upsilon.matrix if isinstance(upsilon, LabeledOperator) else np.asarray(upsilon)
    sd = spectral(h)
    Ut = sd.to_eigenbasis(ups)
    coarse = _dyson_sum(sd.eigenvalues, Ut, t, order, nodes)
    fine = _dyson_sum(sd.eigenvalues, Ut, t, order, nodes + 16)
    qerr = float(np.abs(fine - coarse).max())
    if qerr > quad_budget:
        raise QuadratureBudgetExceeded(f"quadrature drift {qerr:.2e} exceeds {quad_budget:.1e}")
    tail = exp_tail(abs(t) * opnorm(ups), order)
    return DysonResult(sd.from_eigenbasis(fine), tail, qerr)


# ---------------------------------------------------------------------------
# Lieb-Robinson experiments


def lr_envelope(t, q_norm: float, r_norm: float, phi_int: float, distance: float, C: float | None = None):
    """(2 ||Q|| ||R|| / C) (exp(2 ||Phi||_int C |t|) - 1) D."""
    C = lr_constant() if C is None else C
    t = np.asarray(t, dtype=float)
    return 2.0 * q_norm * r_norm / C * np.expm1(2.0 * phi_int * C * np.abs(t)) * distance


class LRReport(NamedTuple):
    t: np.ndarray
    g: np.ndarray
    envelope: np.ndarray
    max_ratio: float  # max g / envelope over t != 0
    max_excess: float  # max(g - envelope)
    truncation_tol: float
    passed: bool


def _free_region(chain: ChainSpec, region: Sequence[int]) -> LabeledOperator:
    """H^free restricted to ``region``: harmonic part plus on-site V, no pair terms."""
    return region_hamiltonian(chain.with_(phi=PotentialSpec()), region)


def _lr_curve(chain: ChainSpec, Q: LabeledOperator, R: LabeledOperator, t_grid: np.ndarray) -> np.ndarray:
    sd = spectral(hamiltonian(chain).H)
    sites = chain.sites
    r_full = embed(R, sites).matrix
    r_eig = sandwich(sd.eigenvectors.conj().T, r_full)
    free_q = spectral(_free_region(chain, Q.support))
    E = sd.eigenvalues
    U = sd.eigenvectors
    g = np.empty(t_grid.size)
    for i, t in enumerate(t_grid):
        # [alpha_t(alpha^free_{-t} Q), R] = alpha_t([Y, alpha_{-t}(R)]) with Y local
        Y = LabeledOperator(Q.support, _conjugate(free_q, Q.matrix, -t), Q.site_dim)
        phase = np.exp(-1j * t * E)
        Rt = sandwich(U, r_eig * phase[:, None] * phase.conj()[None, :])
        comm = apply_local(Y, Rt, sites, "left") - apply_local(Y, Rt, sites, "right")
        g[i] = opnorm(comm)
    return g


def lr_experiment(
    chain: ChainSpec,
    gamma1: Iterable[int],
    gamma2: Iterable[int],
    Q: LabeledOperator,
    R: LabeledOperator,
    t_grid: Sequence[float],
    truncation_tol: float = 0.0,
) -> LRReport:
    """g(t) = || [alpha_t(alpha^free_{-t}(Q)), R] || against the Lieb-Robinson envelope."""
    g1 = tuple(sorted(set(gamma1)))
    g2 = tuple(sorted(set(gamma2)))
    if not set(Q.support) <= set(g1) or not set(R.support) <= set(g2):
        raise SupportMismatch("Q must live in gamma1 and R in gamma2")
    if not (set(g1) | set(g2)) <= set(chain.sites):
        raise SupportMismatch("gamma1 and gamma2 must lie inside the chain")
    t = np.asarray(t_grid, dtype=float)
    g = _lr_curve(chain, Q, R, t)
    env = lr_envelope(
        t, Q.norm(), R.norm(), interaction_norm(chain).value, lr_distance(g1, g2)
    )
    nz = np.abs(t) > 0
    ratio = float(np.max(g[nz] / np.where(env[nz] > 0, env[nz], np.inf))) if nz.any() else 0.0
    excess = float(np.max(g - env)) if t.size else 0.0
    return LRReport(t, g, env, ratio, excess, truncation_tol, bool(excess <= truncation_tol))


def lr_truncation_drift(
    chain: ChainSpec,
    make_ops: Callable[[ChainSpec], tuple[LabeledOperator, LabeledOperator]],
    t_points: Sequence[float],
    increment: int = 2,
) -> float:
    """max_t |g_{d + increment}(t) - g_d(t)| for operators rebuilt at each site dimension."""
    t = np.asarray(t_points, dtype=float)
    curves = []
    for c in (chain, chain.with_(site_dim=chain.site_dim + increment)):
        Q, R = make_ops(c)
        curves.append(_lr_curve(c, Q, R, t))
    return float(np.max(np.abs(curves[1] - curves[0])))


# ---------------------------------------------------------------------------
# finite-volume convergence


def volume_envelope(T: float, q_norm: float, phi_sup: float, support: Iterable[int], N: int, N2: int) -> float:
    """(T/2)(1 + e^{C ||phi|| T / 2}) ||Q|| sum_{k in supp} sum_{l in Lambda_N' \\ Lambda_N} (1+|k-l|)^-2."""
    C = lr_constant()
    inner = set(lambda_sites(N))
    outer = [l for l in lambda_sites(N2) if l not in inner]
    s = math.fsum(1.0 / (1.0 + abs(k - l)) ** 2 for k in support for l in outer)
    return 0.5 * T * (1.0 + math.exp(0.5 * C * phi_sup * T)) * q_norm * s


class VolumeReport(NamedTuple):
    pairs: list[tuple[int, int, float, float]]  # (N, N', delta, envelope)
    passed: bool


def volume_convergence(
    chain: ChainSpec,
    Q: LabeledOperator,
    t: float,
    N_list: Sequence[int],
    tolerance: float = 0.0,
) -> VolumeReport:
    """delta(N, N') = || alpha^{N'}_t(Q) - alpha^N_t(Q) || for consecutive volumes in ``N_list``.

    ``chain`` supplies every parameter except the volume.
    """
    N_list = sorted(N_list)
    if not set(Q.support) <= set(lambda_sites(N_list[0])):
        raise SupportMismatch("Q must live inside the smallest volume")
    evolved = {}
    for N in N_list:
        c = chain.with_(L=N)
        plan = evolution_plan(hamiltonian(c).H)
        evolved[N] = heisenberg(plan, t, Q)
    pairs = []
    ok = True
    q_norm = Q.norm()
    for N, N2 in zip(N_list[:-1], N_list[1:]):
        delta = opnorm(evolved[N2].matrix - embed(evolved[N], evolved[N2].support).matrix)
        env = volume_envelope(abs(t), q_norm, chain.phi_sup, Q.support, N, N2)
        pairs.append((N, N2, delta, env))
        ok &= delta <= env + tolerance
    return VolumeReport(pairs, bool(ok))
