"""Position-space heat kernels of exp(-beta H).

Three constructions are provided:

* the Mehler closed form for the harmonic part h = p^2 + omega^2 x^2,
* a truncated eigenfunction sum (the oracle),
* plain Lie-Trotter products (e^{-beta h/m} e^{-beta U/m})^m with the
  Mehler factors composed by trapezoid quadrature.

The Trotter kernel is S(x, y) b(y) with S symmetric and b = e^{-beta U/m},
so it is not symmetric at finite m.  Ratios taken at a fixed column y are
unaffected by the trailing factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .basis import (
    GridSpec,
    HermiteBasis,
    PotentialSpec,
    default_grid,
    eigenfunctions,
    multiplication_operator,
)
from .errors import GridTooCoarse, InsufficientDim

__all__ = [
    "HeatKernel",
    "KERNEL_GRID",
    "PAIR_KERNEL_GRID",
    "log_mehler_kernel",
    "mehler_kernel",
    "mehler_matrix",
    "eigensum_kernel",
    "trotter_kernel",
    "continuity_modulus",
    "shift_coefficients",
    "shift_amplification",
    "shift_exponent",
    "composed_mehler",
    "ShiftRatioReport",
    "kernel_shift_ratio_check",
    "EIGENSUM_TAIL_TOL",
]

KERNEL_GRID = GridSpec(-8.0, 8.0, 256)
PAIR_KERNEL_GRID = GridSpec(-8.0, 8.0, 96)
EIGENSUM_TAIL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HeatKernel:
    """Kernel values on a grid.

    For one site ``values[i, j] = k(x_i, x_j)``.  For two sites the rows run
    over the flattened product grid (index ``i0 * points + i1``) and the
    columns over ``columns``, a subset of the same flattened index.
    """

    grid: GridSpec
    values: np.ndarray
    beta: float
    description: str
    sites: int = 1
    columns: np.ndarray | None = None
    tail_bound: float = 0.0
    convergence: float | None = None

    def symmetry_error(self) -> float:
        """max |k(x,y) - k(y,x)| / max |k| for square single-site kernels."""
        k = self.values
        return float(np.abs(k - k.T).max() / np.abs(k).max())

    def trace(self) -> float:
        """Quadrature trace sum_i w_i k(x_i, x_i)."""
        if self.sites != 1 or self.columns is not None:
            raise ValueError("trace needs a full single-site kernel")
        return float(np.dot(self.grid.weights, np.diag(self.values)))

    def min(self) -> float:
        return float(self.values.min())


def _log_sinh(th):
    th = np.asarray(th, dtype=float)
    return th + np.log1p(-np.exp(-2.0 * th)) - math.log(2.0)


def log_mehler_kernel(beta: float, omega: float, x, y):
    """log k^h_beta(x, y) for e^{-beta (p^2 + omega^2 x^2)}, elementwise."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    th = 2.0 * omega * beta
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    coth = 1.0 / math.tanh(th)
    csch = math.exp(-th) * 2.0 / -math.expm1(-2.0 * th)
    pref = 0.5 * (math.log(omega / (2.0 * math.pi)) - float(_log_sinh(th)))
    return pref - 0.5 * omega * ((x * x + y * y) * coth - 2.0 * x * y * csch)


def mehler_kernel(beta: float, omega: float, x, y, site_axis: int | None = None):
    """Mehler kernel; with ``site_axis`` the product over that axis (one factor per site)."""
    logk = log_mehler_kernel(beta, omega, x, y)
    if site_axis is not None:
        logk = np.sum(logk, axis=site_axis)
    return np.exp(logk)


def mehler_matrix(beta: float, omega: float, rows, cols) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    return mehler_kernel(beta, omega, rows[:, None], cols[None, :])


def _nodes(grid) -> np.ndarray:
    return grid.nodes if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)


def eigensum_kernel(
    basis: HermiteBasis,
    beta: float,
    grid: GridSpec = KERNEL_GRID,
    V: PotentialSpec | None = None,
    quad_grid: GridSpec | None = None,
    tail_tol: float = EIGENSUM_TAIL_TOL,
) -> HeatKernel:
    """k(x, y) = sum_n e^{-beta E_n} phi_n(x) phi_n(y) over the truncated basis.

    Without ``V`` the harmonic levels are used directly; with ``V`` the
    Galerkin matrix of h + V is diagonalized first.  The discarded weight
    relative to the ground level must be below ``tail_tol``.
    """
    rel_tail = math.exp(-2.0 * beta * basis.omega * basis.dim)
    if rel_tail > tail_tol:
        raise InsufficientDim(
            f"dim={basis.dim} leaves relative Boltzmann tail {rel_tail:.2e} at beta={beta}"
        )
    x = _nodes(grid)
    psi = eigenfunctions(basis, x)
    E = basis.energies
    # |phi_n(x)| <= (omega / pi)^{1/4} for normalized Hermite functions
    tail = math.sqrt(basis.omega / math.pi) * math.exp(-beta * basis.omega * (2 * basis.dim + 1))
    tail /= -math.expm1(-2.0 * beta * basis.omega)
    if V is not None and not V.is_zero:
        Vm = multiplication_operator(basis, V, quad_grid or default_grid(basis)).matrix
        E, U = np.linalg.eigh(np.diag(basis.energies) + Vm)
        psi = psi @ U
        tail *= math.exp(beta * V.sup_norm())
    weights = np.exp(-beta * E)
    values = (psi * weights) @ psi.T
    desc = "eigensum" if V is None or V.is_zero else "eigensum+V"
    grid_spec = grid if isinstance(grid, GridSpec) else GridSpec(float(x[0]), float(x[-1]), x.size)
    return HeatKernel(grid_spec, values, beta, desc, tail_bound=tail)


# ---------------------------------------------------------------------------
# Trotter products


def _step_width(beta_step: float, omega: float) -> float:
    """Standard deviation in z of z -> k_{beta_step}(x, z) at fixed x."""
    return math.sqrt(math.tanh(2.0 * omega * beta_step) / omega)


def _check_resolution(grid: GridSpec, beta_step: float, omega: float) -> None:
    sigma = _step_width(beta_step, omega)
    if grid.spacing > sigma:
        raise GridTooCoarse(
            f"grid spacing {grid.spacing:.3g} exceeds the Trotter step width {sigma:.3g}; "
            "use more points or fewer steps"
        )


class _TrotterPre(NamedTuple):
    """k(x, y_c) = sum_z A(x, z) pre[z, c] with A the one-step Mehler factor."""

    pre: np.ndarray
    step: float
    omega: float
    sites: int


def _upsilon_on_grid(x: np.ndarray, V: PotentialSpec | None, phi: PotentialSpec | None, sites: int):
    V = V or PotentialSpec()
    phi = phi or PotentialSpec()
    if sites == 1:
        return V(x)
    return V(x)[:, None] + V(x)[None, :] + phi(x[:, None] - x[None, :])


def _trotter_pre(beta, m, omega, V, phi, grid, sites, columns) -> _TrotterPre:
    x = grid.nodes
    w = grid.weights
    step = beta / m
    A = mehler_matrix(step, omega, x, x)
    b = np.exp(-step * _upsilon_on_grid(x, V, phi, sites))
    if sites == 1:
        cols = np.arange(x.size) if columns is None else np.asarray(columns)
        K = A[:, cols] * b[cols]
        wb = (w * b)[:, None]
        for _ in range(m - 2):
            K = A @ (wb * K)
        return _TrotterPre(wb * K, step, omega, 1)
    G = x.size
    cols = np.arange(G * G) if columns is None else np.asarray(columns)
    c0, c1 = np.divmod(cols, G)
    K = A[:, c0][:, None, :] * A[:, c1][None, :, :] * b.reshape(-1)[cols]
    wb = (np.outer(w, w) * b)[:, :, None]
    for _ in range(m - 2):
        K = _apply_pair(A, A, wb * K)
    return _TrotterPre(wb * K, step, omega, 2)


def _apply_pair(A0: np.ndarray, A1: np.ndarray, K: np.ndarray) -> np.ndarray:
    """(A0 (x) A1) applied to each column K[:, :, c]."""
    out = np.tensordot(A0, K, axes=(1, 0))  # (r0, z1, c)
    out = np.tensordot(A1, out, axes=(1, 1))  # (r1, r0, c)
    return out.transpose(1, 0, 2)


def _trotter_rows(tp: _TrotterPre, grid: GridSpec, rows0, rows1=None) -> np.ndarray:
    x = grid.nodes
    A0 = mehler_matrix(tp.step, tp.omega, rows0, x)
    if tp.sites == 1:
        return A0 @ tp.pre
    A1 = mehler_matrix(tp.step, tp.omega, x if rows1 is None else rows1, x)
    return _apply_pair(A0, A1, tp.pre)


def _trotter_values(beta, m, omega, V, phi, grid, sites, columns) -> np.ndarray:
    x = grid.nodes
    if m == 1:
        b = np.exp(-beta * _upsilon_on_grid(x, V, phi, sites)).reshape(-1)
        if sites == 1:
            cols = np.arange(x.size) if columns is None else np.asarray(columns)
            return mehler_matrix(beta, omega, x, x)[:, cols] * b[cols]
        G = x.size
        cols = np.arange(G * G) if columns is None else np.asarray(columns)
        c0, c1 = np.divmod(cols, G)
        A = mehler_matrix(beta, omega, x, x)
        return (A[:, c0][:, None, :] * A[:, c1][None, :, :]).reshape(G * G, -1) * b[cols]
    tp = _trotter_pre(beta, m, omega, V, phi, grid, sites, columns)
    out = _trotter_rows(tp, grid, x)
    return out.reshape(x.size**sites, -1)


def trotter_kernel(
    beta: float,
    m: int,
    omega: float = 1.0,
    V: PotentialSpec | None = None,
    phi: PotentialSpec | None = None,
    grid: GridSpec | None = None,
    sites: int = 1,
    columns: Sequence[int] | None = None,
    estimate: bool = False,
) -> HeatKernel:
    """Lie-Trotter kernel of exp(-beta (H^h + Upsilon)) for one or two sites.

    For two sites Upsilon = V(x_0) + V(x_1) + phi(x_0 - x_1) and the default
    grid has 96 points per axis; ``columns`` selects flattened column indices
    of the product grid to keep the cost at O(points^3 * len(columns) * m).

    With ``estimate`` the kernel is also computed with m // 2 steps and the
    relative sup difference is stored as ``convergence``.
    """
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    if sites not in (1, 2):
        raise ValueError("trotter_kernel supports one or two sites")
    grid = grid or (KERNEL_GRID if sites == 1 else PAIR_KERNEL_GRID)
    _check_resolution(grid, beta / m, omega)
    values = _trotter_values(beta, m, omega, V, phi, grid, sites, columns)
    conv = None
    if estimate and m >= 2:
        coarse = _trotter_values(beta, m // 2, omega, V, phi, grid, sites, columns)
        conv = float(np.abs(values - coarse).max() / np.abs(values).max())
    cols = None if columns is None else np.asarray(columns)
    return HeatKernel(grid, values, beta, f"trotter({m})", sites, cols, convergence=conv)


# ---------------------------------------------------------------------------
# continuity modulus and the shift construction


def continuity_modulus(V: PotentialSpec, phi: PotentialSpec, t: float) -> float:
    """c(t) = sup |V(. + t) - V| + 2 sup |phi(. + t) - phi|."""
    return V.shift_sup(t) + 2.0 * phi.shift_sup(t)


def shift_coefficients(beta: float, omega: float, n: int, t: float) -> np.ndarray:
    """Shifts s_0 = t, ..., s_n = 0 that cancel the cross terms of n composed Mehler factors.

    Writing u_k = z_k + s_k in the exponent of prod_k k_{beta/n}(u_k, u_{k+1}),
    the terms linear in an interior z_k vanish when
    2 cosh(theta) s_k - s_{k-1} - s_{k+1} = 0 with theta = 2 omega beta / n.
    """
    if n < 1:
        raise ValueError("n must be positive")
    s = np.zeros(n + 1)
    s[0] = t
    if n == 1:
        return s
    th = 2.0 * omega * beta / n
    k = n - 1
    ab = np.zeros((3, k))
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0 * math.cosh(th)
    ab[2, :-1] = -1.0
    rhs = np.zeros(k)
    rhs[0] = t
    s[1:n] = solve_banded((1, 1), ab, rhs)
    return s


def shift_amplification(
    beta: float, omega: float = 1.0, n_values: Sequence[int] = (2, 4, 8, 16, 32, 64, 128)
) -> float:
    """max_{n, k} |s_k| / |t|, the constant bounding every shift by a multiple of |t|."""
    return float(max(np.abs(shift_coefficients(beta, omega, n, 1.0)).max() for n in n_values))


def _chain_exponent(u: np.ndarray, th: float, omega: float) -> float:
    a, b = u[:-1], u[1:]
    return float(np.sum(omega * (math.cosh(th) * (a * a + b * b) - 2 * a * b)) / (2 * math.sinh(th)))


def shift_exponent(
    beta: float, omega: float, n: int, t: float, x0: float, y0: float, z: Sequence[float] | None = None
) -> float:
    """Sigma_n: exponent change of the n-fold Mehler chain x0 -> ... -> y0 under the optimal shifts.

    The result does not depend on the interior points ``z``; exp(-Sigma_n)
    equals k_beta(x0 + t, y0) / k_beta(x0, y0).
    """
    th = 2.0 * omega * beta / n
    s = shift_coefficients(beta, omega, n, t)
    zz = np.zeros(n + 1) if z is None else np.concatenate([[0.0], np.asarray(z, float), [0.0]])
    zz[0], zz[-1] = x0, y0
    return _chain_exponent(zz + s, th, omega) - _chain_exponent(zz, th, omega)


def composed_mehler(
    x: float,
    y: float,
    beta: float,
    n: int,
    omega: float = 1.0,
    grid: GridSpec = KERNEL_GRID,
    shifts: Sequence[float] | None = None,
) -> float:
    """Quadrature value of int prod_k k_{beta/n}(z_k + s_k, z_{k+1} + s_{k+1}) dz_1 ... dz_{n-1}.

    The endpoints are z_0 = x and z_n = y with s_0 = s_n = 0; ``shifts``
    gives the n - 1 interior shifts.  In exact arithmetic the value is
    k_beta(x, y) for any shifts.
    """
    if n < 2:
        return float(mehler_kernel(beta, omega, x, y))
    s = np.zeros(n - 1) if shifts is None else np.asarray(shifts, dtype=float)
    if s.size != n - 1:
        raise ValueError("need n - 1 interior shifts")
    z = grid.nodes
    w = grid.weights
    step = beta / n
    vec = mehler_kernel(step, omega, x, z + s[0]) * w
    for k in range(1, n - 1):
        vec = (vec @ mehler_matrix(step, omega, z + s[k - 1], z + s[k])) * w
    return float(vec @ mehler_kernel(step, omega, z + s[-1], y))


class ShiftRatioReport(NamedTuple):
    max_deviation: float  # max |log(ratio_int) - log(ratio_h)|
    envelope: float  # c(A t)
    amplification: float  # A
    violation: float  # max(max_deviation - envelope, 0)
    points: int
    passed: bool


def kernel_shift_ratio_check(
    beta: float,
    t: float,
    omega: float = 1.0,
    V: PotentialSpec | None = None,
    phi: PotentialSpec | None = None,
    m: int = 64,
    grid: GridSpec | None = None,
    sites: int = 1,
    column_stride: int = 6,
    rel_floor: float = 1e-10,
    interior: float = 0.75,
    quad_tol: float = 1e-6,
) -> ShiftRatioReport:
    """Compare shift ratios of the interacting and harmonic kernels of exp(-beta H / 2).

    The interacting ratio e^{-beta H/2}(x + t e_0, y) / e^{-beta H/2}(x, y) is
    evaluated with the Trotter product, the harmonic one with the Mehler form
    at the same inverse temperature beta / 2.  Points where either interacting
    value is below ``rel_floor`` times the kernel maximum are skipped, as are
    points outside the central fraction ``interior`` of the grid, where the
    finite integration range distorts the quadrature.  The check passes when
    the deviation stays within the envelope plus ``quad_tol``, the
    quadrature error of the log-ratios on the retained points.
    """
    V = V or PotentialSpec()
    phi = phi or PotentialSpec()
    half = 0.5 * beta
    grid = grid or (KERNEL_GRID if sites == 1 else PAIR_KERNEL_GRID)
    _check_resolution(grid, half / m, omega)
    amp = shift_amplification(half, omega)
    envelope = continuity_modulus(V, phi, amp * abs(t))
    x = grid.nodes
    if sites == 1:
        cols = np.arange(x.size)
        y = x[cols]
    else:
        sub = np.arange(0, x.size, column_stride)
        cols = (sub[:, None] * x.size + sub[None, :]).reshape(-1)
        y = x[np.divmod(cols, x.size)[0]]
    if m == 1:
        raise ValueError("shift ratios need m >= 2")
    tp = _trotter_pre(half, m, omega, V, phi, grid, sites, cols)
    base = _trotter_rows(tp, grid, x).reshape(x.size**sites, -1)
    shifted = _trotter_rows(tp, grid, x + t).reshape(x.size**sites, -1)
    x0 = np.repeat(x, x.size) if sites == 2 else x
    log_h = log_mehler_kernel(half, omega, x0[:, None] + t, y[None, :]) - log_mehler_kernel(
        half, omega, x0[:, None], y[None, :]
    )
    floor = rel_floor * base.max()
    mask = (base > floor) & (shifted > floor)
    reach = interior * min(-grid.x_min, grid.x_max)
    mask &= (np.abs(x0)[:, None] + abs(t) <= reach) & (np.abs(y)[None, :] <= reach)
    dev = np.abs(np.log(shifted[mask]) - np.log(base[mask]) - log_h[mask])
    worst = float(dev.max()) if dev.size else 0.0
    violation = max(worst - envelope, 0.0)
    return ShiftRatioReport(worst, envelope, amp, violation, int(mask.sum()), violation <= quad_tol)
