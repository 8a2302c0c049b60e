"""Field operators, resolvents and Weyl operators on truncated oscillator spaces.

The field of a finitely supported f is Psi(f) = sum_k Re(f_k) x_k + Im(f_k) p_k,
which gives [Psi(f), Psi(g)] = i sigma(f, g) with sigma(f, g) = Im <f, g>.
In a truncated basis the canonical relations fail near the top level, so
relation residuals are measured on the block of states whose every site
occupies the lower half of the levels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .basis import HermiteBasis, momentum_matrix, position_matrix
from .chain import ChainSpec
from .errors import LambdaZero, SupportMismatch
from .operators import LabeledOperator, opnorm

__all__ = [
    "SymplecticVector",
    "sigma",
    "field_operator",
    "resolvent",
    "weyl_operator",
    "low_energy_block",
    "block_residual",
    "ResolventSample",
    "RELATIONS",
    "relation_residuals",
    "weyl_residual",
    "trivial_state",
]


@dataclass(frozen=True)
class SymplecticVector:
    """Finitely supported complex sequence on Z, stored as sorted (site, value) pairs."""

    coefficients: tuple[tuple[int, complex], ...] = ()

    def __post_init__(self):
        merged: dict[int, complex] = {}
        for site, value in self.coefficients:
            merged[int(site)] = merged.get(int(site), 0j) + complex(value)
        items = tuple(sorted((s, v) for s, v in merged.items() if v != 0))
        object.__setattr__(self, "coefficients", items)

    @classmethod
    def from_dict(cls, values: Mapping[int, complex]) -> "SymplecticVector":
        return cls(tuple(values.items()))

    @classmethod
    def delta(cls, site: int, value: complex = 1.0) -> "SymplecticVector":
        return cls(((site, value),))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.coefficients)

    def as_dict(self) -> dict[int, complex]:
        return dict(self.coefficients)

    def __add__(self, other: "SymplecticVector") -> "SymplecticVector":
        return SymplecticVector(self.coefficients + other.coefficients)

    def __mul__(self, scalar: float) -> "SymplecticVector":
        if isinstance(scalar, complex):
            raise TypeError("symplectic vectors form a real vector space")
        return SymplecticVector(tuple((s, scalar * v) for s, v in self.coefficients))

    __rmul__ = __mul__

    def __neg__(self) -> "SymplecticVector":
        return -1.0 * self

    def __sub__(self, other: "SymplecticVector") -> "SymplecticVector":
        return self + (-other)

    def inner(self, other: "SymplecticVector") -> complex:
        a, b = self.as_dict(), other.as_dict()
        return sum((a[s].conjugate() * b[s] for s in a.keys() & b.keys()), 0j)


def sigma(f: SymplecticVector, g: SymplecticVector) -> float:
    return f.inner(g).imag


def _space(space) -> tuple[tuple[int, ...], HermiteBasis]:
    if isinstance(space, ChainSpec):
        return space.sites, space.basis
    if isinstance(space, HermiteBasis):
        return (0,), space
    raise TypeError("space must be a ChainSpec or a HermiteBasis")


def _resolve_support(space, f: SymplecticVector, support) -> tuple[tuple[int, ...], HermiteBasis]:
    sites, basis = _space(space)
    if not set(f.support) <= set(sites):
        raise SupportMismatch(f"support {f.support} of f is not inside {sites}")
    support = tuple(sorted(set(f.support if support is None else support)))
    if not set(f.support) <= set(support) or not set(support) <= set(sites):
        raise SupportMismatch(f"requested support {support} is incompatible with f")
    return support, basis


def field_operator(space, f: SymplecticVector, support: Iterable[int] | None = None) -> LabeledOperator:
    """Psi(f) on ``support`` (default: the support of f)."""
    support, basis = _resolve_support(space, f, support)
    d = basis.dim
    n = len(support)
    x = position_matrix(basis).matrix
    p = momentum_matrix(basis).matrix
    out = np.zeros((d**n, d**n), dtype=complex)
    coeffs = f.as_dict()
    for pos, site in enumerate(support):
        c = coeffs.get(site, 0j)
        if c == 0:
            continue
        local = c.real * x + c.imag * p
        out += np.kron(np.kron(np.eye(d**pos), local), np.eye(d ** (n - pos - 1)))
    return LabeledOperator(support, out, d)


def _function_of_field(space, f, support, fn) -> LabeledOperator:
    psi = field_operator(space, f, support)
    e, U = np.linalg.eigh(psi.matrix)
    return LabeledOperator(psi.support, (U * fn(e)) @ U.conj().T, psi.site_dim)


def resolvent(space, lam: float, f: SymplecticVector, support: Iterable[int] | None = None) -> LabeledOperator:
    """R(lam, f) = (i lam + Psi(f))^{-1}, lam real and nonzero."""
    if lam == 0:
        raise LambdaZero("the resolvent needs lambda != 0")
    lam = float(lam)
    return _function_of_field(space, f, support, lambda e: 1.0 / (1j * lam + e))


def weyl_operator(space, f: SymplecticVector, support: Iterable[int] | None = None) -> LabeledOperator:
    """W(f) = exp(i Psi(f))."""
    return _function_of_field(space, f, support, lambda e: np.exp(1j * e))


def low_energy_block(site_dim: int, n_sites: int) -> np.ndarray:
    """Indices of product states whose every site level is below site_dim // 2."""
    half = site_dim // 2
    levels = np.indices((site_dim,) * n_sites).reshape(n_sites, -1)
    return np.flatnonzero(np.all(levels < half, axis=0))


def block_residual(A: LabeledOperator | np.ndarray, idx: np.ndarray | None = None) -> float:
    """Spectral norm of P A P, with P projecting onto ``idx`` (all indices if None)."""
    m = A.matrix if isinstance(A, LabeledOperator) else np.asarray(A)
    if idx is not None:
        m = m[np.ix_(idx, idx)]
    return opnorm(m, hermitian=False)


class ResolventSample(NamedTuple):
    lam: float
    mu: float
    nu: float
    f: SymplecticVector
    g: SymplecticVector


RELATIONS = ("zero", "adjoint", "scaling", "first_resolvent", "commutator", "sum")
# relations that hold exactly for finite matrices
EXACT_RELATIONS = ("zero", "adjoint", "scaling", "first_resolvent")


def _relation_terms(space, s: ResolventSample, support):
    R = lambda lam, f: resolvent(space, lam, f, support)  # noqa: E731
    d = _space(space)[1].dim
    eye = LabeledOperator(support, np.eye(d ** len(support)), d)
    Rf = R(s.lam, s.f)
    Rg = R(s.mu, s.g)
    Rmf = R(s.mu, s.f)
    sg = sigma(s.f, s.g)
    out = {
        "zero": R(s.lam, SymplecticVector()) + (1j / s.lam) * eye,
        "adjoint": Rf.dag() - R(-s.lam, s.f),
        "scaling": s.nu * R(s.nu * s.lam, s.nu * s.f) - Rf,
        "first_resolvent": Rf - Rmf - (1j * (s.mu - s.lam)) * (Rf @ Rmf),
        "commutator": (Rf @ Rg - Rg @ Rf) - (1j * sg) * (Rf @ Rg @ Rg @ Rf),
    }
    if s.lam + s.mu != 0:
        Rsum = R(s.lam + s.mu, s.f + s.g)
        out["sum"] = Rf @ Rg - Rsum @ (Rf + Rg + (1j * sg) * (Rf @ Rf @ Rg))
    return out


def relation_residuals(space, samples: Sequence[ResolventSample]) -> dict[str, float]:
    """Largest low-energy-block residual of each resolvent relation over ``samples``.

    The sum relation is the identity
    R(lam, f) R(mu, g) = R(lam + mu, f + g) [R(lam, f) + R(mu, g) + i sigma(f, g) R(lam, f)^2 R(mu, g)],
    skipped for samples with lam + mu = 0.
    """
    sites, basis = _space(space)
    worst = {name: 0.0 for name in RELATIONS}
    for s in samples:
        support = tuple(sorted(set(s.f.support) | set(s.g.support))) or (sites[0],)
        idx = low_energy_block(basis.dim, len(support))
        for name, op in _relation_terms(space, s, support).items():
            worst[name] = max(worst[name], block_residual(op, idx))
    return worst


def weyl_residual(space, f: SymplecticVector, g: SymplecticVector) -> float:
    """|| P [W(f) W(g) - e^{-i sigma(f,g)/2} W(f + g)] P || on the low-energy block."""
    sites, basis = _space(space)
    support = tuple(sorted(set(f.support) | set(g.support))) or (sites[0],)
    W = lambda h: weyl_operator(space, h, support)  # noqa: E731
    diff = W(f) @ W(g) - np.exp(-0.5j * sigma(f, g)) * W(f + g)
    return block_residual(diff, low_energy_block(basis.dim, len(support)))


def trivial_state(word: Sequence[tuple[float, SymplecticVector]]) -> complex:
    """The singular state: 0 on every nonempty resolvent word, 1 on the unit."""
    for lam, _ in word:
        if lam == 0:
            raise LambdaZero("the resolvent needs lambda != 0")
    return 1.0 + 0j if len(word) == 0 else 0j
