"""The KMS boundary condition, invariance and continuity of finite-volume Gibbs states.

For a Gibbs state of H with eigenpairs (E_m, u_m) the two-point function

    F(z) = Z^{-1} sum_{m,n} e^{-beta E_m} Q_mn R_nm e^{i z (E_n - E_m)}

is entire.  It equals psi(Q alpha_t(R)) at z = t and psi(alpha_t(R) Q) at
z = t + i beta.  Inside the strip 0 <= Im z <= beta each weight is
exp(-(beta - y)(E_m - E_0) - y (E_n - E_0)) <= 1, so the sum is evaluated
without overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .basis import PotentialSpec, function_matrix, momentum_matrix
from .chain import ChainSpec, hamiltonian
from .errors import OutOfStrip, SupportMismatch
from .gibbs import GibbsState, gibbs_state, partial_trace
from .kernel import continuity_modulus, shift_amplification
from .operators import LabeledOperator, embed

__all__ = [
    "KMSPair",
    "kms_pair",
    "kms_function",
    "boundary_residual",
    "invariance_check",
    "cauchy_riemann_residual",
    "three_lines_check",
    "ModulusReport",
    "continuity_scan",
    "RegularityReport",
    "regularity_experiment",
]


@dataclass(frozen=True, eq=False)
class KMSPair:
    """Q and R in the eigenbasis of the state's Hamiltonian, ready for F(z)."""

    state: GibbsState
    q: np.ndarray
    r: np.ndarray

    @property
    def beta(self) -> float:
        return self.state.beta


def _local_matrix(state: GibbsState, A: LabeledOperator) -> np.ndarray:
    if A.site_dim != state.site_dim or not set(A.support) <= set(state.support):
        raise SupportMismatch(f"operator on {A.support} does not live inside {state.support}")
    return embed(A, state.support).matrix


def kms_pair(state: GibbsState, Q: LabeledOperator, R: LabeledOperator) -> KMSPair:
    sd = state.spectrum
    return KMSPair(state, sd.to_eigenbasis(_local_matrix(state, Q)), sd.to_eigenbasis(_local_matrix(state, R)))


def _check_strip(z: np.ndarray, beta: float) -> None:
    y = z.imag
    eps = 1e-12 * max(1.0, beta)
    if np.any(y < -eps) or np.any(y > beta + eps):
        raise OutOfStrip(f"need 0 <= Im z <= beta = {beta}")


def kms_function(pair: KMSPair, z) -> np.ndarray | complex:
    """F(z) for scalar or array z in the closed strip."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    beta = pair.beta
    _check_strip(z_arr, beta)
    E = pair.state.spectrum.eigenvalues
    e = E - E[0]
    log_z = pair.state.log_z + beta * E[0]  # log sum_m e^{-beta (E_m - E_0)}
    M = pair.q * pair.r.T  # M[m, n] = Q_mn R_nm
    out = np.empty(z_arr.shape, dtype=complex)
    for idx, zz in np.ndenumerate(z_arr):
        t, y = zz.real, min(max(zz.imag, 0.0), beta)
        wm = np.exp(-(beta - y) * e - 1j * t * e)
        wn = np.exp(-y * e + 1j * t * e)
        out[idx] = (wm @ M @ wn) * math.exp(-log_z)
    return out if np.ndim(z) else complex(out[0])


def boundary_residual(state: GibbsState, Q: LabeledOperator, R: LabeledOperator, t_grid) -> float:
    """max_t |F(t + i beta) - psi(alpha_t(R) Q)|, the right side computed with explicit matrices."""
    pair = kms_pair(state, Q, R)
    t = np.asarray(t_grid, dtype=float)
    F = kms_function(pair, t + 1j * state.beta)
    sd = state.spectrum
    rho = state.matrix
    q = _local_matrix(state, Q)
    r = _local_matrix(state, R)
    worst = 0.0
    for ti, Fi in zip(t, F):
        U = sd.apply(lambda E: np.exp(1j * ti * E))
        rt = U @ r @ U.conj().T
        direct = np.sum((rho @ rt) * q.T)
        worst = max(worst, abs(Fi - direct))
    return float(worst)


def invariance_check(rho, H, Q: LabeledOperator, t_grid) -> float:
    """max_t |Tr rho alpha_t(Q) - Tr rho Q| with alpha generated by H.

    ``rho`` may be any density matrix on the support of H, which allows
    positive controls with states that are not invariant.
    """
    rho_m = rho.matrix if isinstance(rho, (GibbsState, LabeledOperator)) else np.asarray(rho)
    Hm = H.matrix if isinstance(H, LabeledOperator) else np.asarray(H)
    q = embed(Q, H.support).matrix if isinstance(H, LabeledOperator) else Q.matrix
    E, U = np.linalg.eigh(Hm)
    q_e = U.conj().T @ q @ U
    rho_e = U.conj().T @ rho_m @ U
    base = np.sum(rho_e * q_e.T)
    worst = 0.0
    for t in np.asarray(t_grid, dtype=float):
        ph = np.exp(1j * t * E)
        qt = q_e * ph[:, None] * ph.conj()[None, :]
        worst = max(worst, abs(np.sum(rho_e * qt.T) - base))
    return float(worst)


def cauchy_riemann_residual(pair: KMSPair, t_grid, y_grid) -> float:
    """max |dF/dy - i dF/dx| over interior strip points, by fourth-order central differences.

    The step is 1e-3 over the spectral spread, which balances truncation and
    rounding error.  The result is relative to max |F|.
    """
    E = pair.state.spectrum.eigenvalues
    spread = max(float(E[-1] - E[0]), 1.0)
    h = 1e-3 / spread
    beta = pair.beta
    worst = 0.0
    scale = 0.0
    for t in np.asarray(t_grid, float):
        for y in np.asarray(y_grid, float):
            if not 2 * h < y < beta - 2 * h:
                continue
            z = t + 1j * y
            dx = _d4(lambda s: kms_function(pair, z + s), h)
            dy = _d4(lambda s: kms_function(pair, z + 1j * s), h)
            worst = max(worst, abs(dy - 1j * dx))
            scale = max(scale, abs(kms_function(pair, z)))
    return worst / max(scale, 1e-300)


def _d4(f, h: float) -> complex:
    return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h)


def three_lines_check(pair: KMSPair, t_grid, y_grid, slack: float = 1e-9) -> tuple[float, float, bool]:
    """(max |F| inside, max |F| on the two boundary lines, inside <= boundary + slack)."""
    t = np.asarray(t_grid, float)
    beta = pair.beta
    edge = max(np.abs(kms_function(pair, t)).max(), np.abs(kms_function(pair, t + 1j * beta)).max())
    inside = 0.0
    for y in np.asarray(y_grid, float):
        if 0 < y < beta:
            inside = max(inside, float(np.abs(kms_function(pair, t + 1j * y)).max()))
    return inside, float(edge), bool(inside <= edge + slack)


class ModulusReport(NamedTuple):
    deltas: np.ndarray
    modulus: np.ndarray  # max_{|t| <= delta} |F(t) - F(0)|


def continuity_scan(pair: KMSPair, t_grid, deltas) -> ModulusReport:
    """Modulus of continuity of t -> psi(Q alpha_t(R)) on the sampled grid."""
    t = np.asarray(t_grid, float)
    if not np.any(t == 0):
        raise ValueError("t_grid must contain 0")
    F = kms_function(pair, t)
    F0 = kms_function(pair, 0.0)
    diff = np.abs(F - F0)
    deltas = np.asarray(deltas, float)
    mod = np.array([diff[np.abs(t) <= d].max() for d in deltas])
    return ModulusReport(deltas, mod)


# ---------------------------------------------------------------------------
# regularity: continuity of t -> psi_L(Q e^{i t p_0}) uniformly in L


def _mehler_shift_coefficients(beta_half: float, omega: float, t: float) -> tuple[float, float, float]:
    """log r(x, y) = alpha + a x + b y for r = k_{beta/2}(x + t, y) / k_{beta/2}(x, y)."""
    th = 2.0 * omega * beta_half
    coth = 1.0 / math.tanh(th)
    csch = 1.0 / math.sinh(th)
    return -0.5 * omega * t * t * coth, -omega * t * coth, omega * t * csch


def _half_density(state: GibbsState) -> np.ndarray:
    """S = e^{-beta (H - E_0) / 2} / sqrt(Tr e^{-beta (H - E_0)}), so Tr S^2 = 1."""
    sd = state.spectrum
    half = np.exp(-0.5 * state.beta * (sd.eigenvalues - sd.eigenvalues[0]))
    half /= math.sqrt(np.sum(half**2))
    return sd.apply(lambda _: half)


def _pair_tensor(S: np.ndarray, support: Sequence[int], site_dim: int) -> np.ndarray:
    """M[i, j, k, l] = sum_{I, J} S[iI, jJ] S[kJ, lI], with i, j, k, l indexing site 0."""
    n = len(support)
    pos = list(support).index(0)
    d = site_dim
    rest = d ** (n - 1)
    T = np.moveaxis(S.reshape((d,) * (2 * n)), (pos, n + pos), (0, n)).reshape(d, rest, d, rest)
    A = np.ascontiguousarray(T.transpose(0, 2, 1, 3)).reshape(d * d, rest * rest)
    B = np.ascontiguousarray(T.transpose(0, 2, 3, 1)).reshape(d * d, rest * rest)
    return (A @ B.T).reshape(d, d, d, d)


def _pair_moment(M: np.ndarray, chain: ChainSpec, a: float, b: float) -> float:
    """E[e^{a x_0 + b y_0}] = Tr(S E_a S E_b) for the normalized half density S."""
    Ea = function_matrix(chain.basis, lambda x: np.exp(a * x), chain.quadrature)
    Eb = function_matrix(chain.basis, lambda x: np.exp(b * x), chain.quadrature)
    return float(np.einsum("ijkl,jk,li->", M, Ea, Eb).real)


class RegularityReport(NamedTuple):
    t: np.ndarray
    deltas: np.ndarray
    moduli: dict[int, np.ndarray]  # L -> measured modulus m_L(delta)
    bounds: dict[int, np.ndarray]  # L -> direct bound B_L(delta)
    transfer: np.ndarray  # bound on m_L' built from the L = min volume data
    c_small: float  # c(0.01)
    c_large: float  # c(0.1)
    amplification: float
    sandwich_factor: float  # e^{4 beta ||phi||_inf}
    passed: bool


def regularity_experiment(
    chain: ChainSpec,
    volumes: Sequence[int] = (1, 2),
    t_max: float = 0.2,
    points: int = 41,
    deltas: Sequence[float] = (0.025, 0.05, 0.1, 0.2),
    Q: PotentialSpec | None = None,
) -> RegularityReport:
    """Continuity of f_L(t) = psi_L(Q e^{i t p_0}) for a positive multiplication Q on site 0.

    Writing psi_L(Q e^{itp_0}) = int mu_L(x, y) Q(x_0) R_t(x, y) with
    mu_L = k(y, x) k(x, y) / Z for k the kernel of e^{-beta H_L / 2} and R_t
    the shift ratio of k, the pointwise estimate
    R_t = r_t e^{theta}, |theta| <= c(A t), with r_t the harmonic ratio gives

        |f_L(t) - f_L(0)| <= ||Q|| [ sqrt(E_L (r_t - 1)^2) + (e^{c(A t)} - 1) E_L r_t ].

    The L-independent transfer replaces E_{L'} by e^{4 beta ||phi||} E_L for
    the smallest volume L.
    """
    Q = Q or PotentialSpec.bump(1.0)
    t = np.linspace(-t_max, t_max, points)
    if not np.any(t == 0):
        t = np.sort(np.append(t, 0.0))
    deltas = np.asarray(deltas, float)
    beta = chain.beta
    amp = shift_amplification(0.5 * beta, chain.omega)
    q_norm = Q.sup_norm()
    q_mat = LabeledOperator((0,), function_matrix(chain.basis, Q, chain.quadrature), chain.site_dim)
    p0 = momentum_matrix(chain.basis).matrix
    pe, pU = np.linalg.eigh(p0)

    moduli, bounds, moments = {}, {}, {}
    for L in volumes:
        c = chain.with_(L=L)
        state = gibbs_state(hamiltonian(c).H, beta)
        rho0 = partial_trace(state.rho, (0,)).matrix
        f = np.empty(t.size, dtype=complex)
        for i, ti in enumerate(t):
            shift = (pU * np.exp(1j * ti * pe)) @ pU.conj().T
            f[i] = np.sum(rho0 * (q_mat.matrix @ shift).T)
        f0 = f[t == 0][0]
        diff = np.abs(f - f0)
        moduli[L] = np.array([diff[np.abs(t) <= d].max() for d in deltas])
        M = _pair_tensor(_half_density(state), state.support, c.site_dim)
        er, er2 = np.empty(t.size), np.empty(t.size)
        for i, ti in enumerate(t):
            alpha, a, b = _mehler_shift_coefficients(0.5 * beta, chain.omega, ti)
            er[i] = math.exp(alpha) * _pair_moment(M, c, a, b)
            er2[i] = math.exp(2 * alpha) * _pair_moment(M, c, 2 * a, 2 * b)
        moments[L] = (er, er2)
        cvals = np.array([continuity_modulus(chain.V, chain.phi, amp * abs(ti)) for ti in t])
        pointwise = q_norm * (np.sqrt(np.maximum(er2 - 2 * er + 1, 0.0)) + np.expm1(cvals) * er)
        bounds[L] = np.array([pointwise[np.abs(t) <= d].max() for d in deltas])

    factor = math.exp(4.0 * beta * chain.phi_sup)
    base = min(volumes)
    er, er2 = moments[base]
    cvals = np.array([continuity_modulus(chain.V, chain.phi, amp * abs(ti)) for ti in t])
    var = np.maximum(er2 - 2 * er + 1, 0.0)
    pointwise = q_norm * (np.sqrt(factor * var) + np.expm1(cvals) * factor * er)
    transfer = np.array([pointwise[np.abs(t) <= d].max() for d in deltas])

    c_small = continuity_modulus(chain.V, chain.phi, 0.01)
    c_large = continuity_modulus(chain.V, chain.phi, 0.1)
    ok = c_small < c_large
    for L in volumes:
        ok &= bool(np.all(moduli[L] <= bounds[L]))
        ok &= bool(np.all(moduli[L] <= transfer))
    return RegularityReport(t, deltas, moduli, bounds, transfer, c_small, c_large, amp, factor, bool(ok))
