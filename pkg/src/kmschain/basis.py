"""Single-site quantization in the eigenbasis of h = p^2 + omega^2 x^2.

Note the normalization: there is no factor 1/2, so level n has energy
omega * (2n + 1) and the natural length scale is 1/sqrt(omega).  In ladder
form x = (a + a^dag) / sqrt(2 omega) and p = i sqrt(omega / 2) (a^dag - a).

Multiplication operators V(x) are Galerkin projections computed with the
trapezoid rule on a uniform grid.  The Gaussian decay of the eigenfunctions
makes this spectrally accurate once the grid covers their support, which is
verified through the quadrature Gram matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import GridTooCoarse
from .operators import LabeledOperator

__all__ = [
    "HermiteBasis",
    "GaussianBump",
    "PotentialSpec",
    "GridSpec",
    "default_grid",
    "eigenfunctions",
    "eigenfunctions_on_grid",
    "position_matrix",
    "momentum_matrix",
    "harmonic_hamiltonian",
    "multiplication_operator",
    "pair_multiplication_operator",
    "function_matrix",
    "NORMALIZATION_TOL",
]

NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class HermiteBasis:
    dim: int
    omega: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"basis dimension must be an integer >= 2, got {self.dim}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def energies(self) -> np.ndarray:
        return self.omega * (2 * np.arange(self.dim) + 1.0)


@dataclass(frozen=True)
class GaussianBump:
    """x -> amplitude * exp(-(x - center)^2 / width^2)."""

    amplitude: float
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"bump width must be positive, got {self.width}")

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return self.amplitude * np.exp(-u * u)

    def derivative(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return -2.0 * self.amplitude * u / self.width * np.exp(-u * u)

    @property
    def lipschitz(self) -> float:
        # max |d/dx| is attained at u = 1/sqrt(2)
        return abs(self.amplitude) * math.sqrt(2.0 / math.e) / self.width


@dataclass(frozen=True)
class PotentialSpec:
    """Finite sum of Gaussian bumps; the zero potential has no terms."""

    terms: tuple[GaussianBump, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def bump(cls, amplitude: float, center: float = 0.0, width: float = 1.0) -> "PotentialSpec":
        return cls((GaussianBump(amplitude, center, width),))

    @property
    def is_zero(self) -> bool:
        return all(t.amplitude == 0 for t in self.terms)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in self.terms:
            out = out + t(x)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in self.terms:
            out = out + t.derivative(x)
        return out

    @property
    def lipschitz(self) -> float:
        return sum(t.lipschitz for t in self.terms)

    def _support_window(self) -> tuple[float, float]:
        lo = min(t.center - 6 * t.width for t in self.terms)
        hi = max(t.center + 6 * t.width for t in self.terms)
        return lo, hi

    def sup_norm(self) -> float:
        """sup_x |V(x)|, exact for one bump, grid search plus local refinement otherwise."""
        live = [t for t in self.terms if t.amplitude != 0]
        if not live:
            return 0.0
        if len(live) == 1:
            return abs(live[0].amplitude)
        return _refined_sup(self, *self._support_window())

    def shift_sup(self, t: float) -> float:
        """sup_x |V(x + t) - V(x)|."""
        if self.is_zero or t == 0:
            return 0.0
        lo, hi = self._support_window()
        return _refined_sup(lambda x: self(x + t) - self(x), lo - abs(t), hi + abs(t))


def _refined_sup(f, lo: float, hi: float, points: int = 4001) -> float:
    x = np.linspace(lo, hi, points)
    vals = np.abs(f(x))
    i = int(np.argmax(vals))
    a, b = x[max(i - 1, 0)], x[min(i + 1, points - 1)]
    res = minimize_scalar(
        lambda s: -abs(float(f(np.array([s]))[0])),
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(max(vals[i], -res.fun))


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    points: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("grid requires x_min < x_max")
        if int(self.points) != self.points or self.points < 2:
            raise ValueError("grid requires at least 2 points")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.points)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


def default_grid(basis: HermiteBasis) -> GridSpec:
    """Grid covering the classically allowed region of the top level plus a decay margin."""
    half = max(8.0, math.sqrt(2 * basis.dim + 1) + 7.0) / math.sqrt(basis.omega)
    points = max(512, int(math.ceil(2 * half * math.sqrt(basis.omega) / 0.05)) + 1)
    return GridSpec(-half, half, points)


def eigenfunctions(basis: HermiteBasis, x) -> np.ndarray:
    """psi_n(x) for n < dim; shape (len(x), dim).

    Uses the three-term recurrence on normalized functions, which stays
    stable where explicit Hermite polynomials would overflow.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = math.sqrt(basis.omega) * x
    out = np.empty((x.size, basis.dim))
    out[:, 0] = (basis.omega / math.pi) ** 0.25 * np.exp(-0.5 * xi * xi)
    out[:, 1] = math.sqrt(2.0) * xi * out[:, 0]
    for n in range(1, basis.dim - 1):
        out[:, n + 1] = (
            math.sqrt(2.0 / (n + 1)) * xi * out[:, n] - math.sqrt(n / (n + 1.0)) * out[:, n - 1]
        )
    return out


def eigenfunctions_on_grid(basis: HermiteBasis, grid: GridSpec, check: bool = True) -> np.ndarray:
    """Eigenfunction values on the grid nodes, columns indexed by level.

    With ``check`` the quadrature Gram matrix must equal the identity to
    ``NORMALIZATION_TOL``, otherwise :class:`GridTooCoarse` is raised.
    """
    vals = eigenfunctions(basis, grid.nodes)
    if check:
        gram = (vals * grid.weights[:, None]).T @ vals
        err = float(np.abs(gram - np.eye(basis.dim)).max())
        if err > NORMALIZATION_TOL:
            raise GridTooCoarse(
                f"quadrature Gram error {err:.2e} on [{grid.x_min}, {grid.x_max}] "
                f"with {grid.points} points for dim={basis.dim}, omega={basis.omega}"
            )
    return vals


def _ladder(basis: HermiteBasis) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, basis.dim, dtype=float)), 1)


def position_matrix(basis: HermiteBasis, site: int = 0) -> LabeledOperator:
    a = _ladder(basis)
    return LabeledOperator((site,), (a + a.T) / math.sqrt(2 * basis.omega), basis.dim)


def momentum_matrix(basis: HermiteBasis, site: int = 0) -> LabeledOperator:
    a = _ladder(basis)
    return LabeledOperator((site,), 1j * math.sqrt(basis.omega / 2) * (a.T - a), basis.dim)


def harmonic_hamiltonian(basis: HermiteBasis, site: int = 0) -> LabeledOperator:
    return LabeledOperator((site,), np.diag(basis.energies), basis.dim)


@lru_cache(maxsize=64)
def _galerkin(basis: HermiteBasis, V: PotentialSpec, grid: GridSpec) -> np.ndarray:
    psi = eigenfunctions_on_grid(basis, grid)
    m = (psi * (grid.weights * V(grid.nodes))[:, None]).T @ psi
    m = 0.5 * (m + m.T)
    m.setflags(write=False)
    return m


def multiplication_operator(
    basis: HermiteBasis, V: PotentialSpec, grid: GridSpec | None = None, site: int = 0
) -> LabeledOperator:
    """Galerkin matrix V_mn = sum_i w_i psi_m(x_i) V(x_i) psi_n(x_i)."""
    grid = grid or default_grid(basis)
    if V.is_zero:
        return LabeledOperator((site,), np.zeros((basis.dim, basis.dim)), basis.dim)
    return LabeledOperator((site,), _galerkin(basis, V, grid), basis.dim)


@lru_cache(maxsize=16)
def _pair_galerkin(basis: HermiteBasis, phi: PotentialSpec, grid: GridSpec) -> np.ndarray:
    d = basis.dim
    psi = eigenfunctions_on_grid(basis, grid)
    w = grid.weights
    x = grid.nodes
    # P[i, (m, n)] = w_i psi_m(x_i) psi_n(x_i)
    P = (w[:, None, None] * psi[:, :, None] * psi[:, None, :]).reshape(x.size, d * d)
    kern = phi(x[:, None] - x[None, :])
    M = (P.T @ kern @ P).reshape(d, d, d, d)  # indices (m0, n0, m1, n1)
    M = M.transpose(0, 2, 1, 3).reshape(d * d, d * d)
    M = 0.5 * (M + M.T)
    M.setflags(write=False)
    return M


def pair_multiplication_operator(
    basis: HermiteBasis,
    phi: PotentialSpec,
    grid: GridSpec | None = None,
    sites: tuple[int, int] = (0, 1),
) -> LabeledOperator:
    """Galerkin matrix of phi(x_k - x_{k+1}) on two sites via product-grid quadrature.

    ``sites`` must be ascending; the first entry is the k in phi(x_k - x_{k+1}).
    """
    grid = grid or default_grid(basis)
    d = basis.dim
    if phi.is_zero:
        return LabeledOperator(tuple(sites), np.zeros((d * d, d * d)), d)
    return LabeledOperator(tuple(sites), _pair_galerkin(basis, phi, grid), d)


def function_matrix(basis: HermiteBasis, fn, grid: GridSpec | None = None) -> np.ndarray:
    """Galerkin matrix of multiplication by an arbitrary vectorized function ``fn``."""
    grid = grid or default_grid(basis)
    psi = eigenfunctions_on_grid(basis, grid)
    m = (psi * (grid.weights * fn(grid.nodes))[:, None]).T @ psi
    return 0.5 * (m + m.T)
