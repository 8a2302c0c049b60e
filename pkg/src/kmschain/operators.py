"""Site-labelled operators on tensor products of truncated oscillator spaces.

A :class:`LabeledOperator` is a dense matrix acting on the tensor product of
the site spaces listed in ``support``.  Tensor factors are always ordered by
ascending lattice index, so embedding and partial traces have a single
canonical layout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import NotHermitian, SupportMismatch

__all__ = [
    "LabeledOperator",
    "embed",
    "tensor_product",
    "identity",
    "opnorm",
    "is_hermitian",
    "permute_to_sorted",
    "apply_local",
    "sandwich",
]

# dense eigvalsh beyond this size is slower than Lanczos on one core
_DENSE_NORM_LIMIT = 1500
# dense SVD is several times slower than eigvalsh at equal size
_DENSE_SVD_LIMIT = 500


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """Matrix on the sites ``support`` (ascending), each of dimension ``site_dim``."""

    support: tuple[int, ...]
    matrix: np.ndarray
    site_dim: int

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        if list(support) != sorted(set(support)):
            raise SupportMismatch(f"support must be strictly ascending, got {support}")
        n = self.site_dim ** len(support)
        m = np.asarray(self.matrix)
        if m.shape != (n, n):
            raise SupportMismatch(
                f"matrix shape {m.shape} does not match site_dim={self.site_dim} "
                f"on {len(support)} sites"
            )
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def _align(self, other: "LabeledOperator"):
        if self.site_dim != other.site_dim:
            raise SupportMismatch("operators have different site dimensions")
        if self.support == other.support:
            return self.matrix, other.matrix, self.support
        union = tuple(sorted(set(self.support) | set(other.support)))
        return embed(self, union).matrix, embed(other, union).matrix, union

    def __add__(self, other):
        if np.isscalar(other):
            return self + other * identity(self.support, self.site_dim)
        a, b, sup = self._align(other)
        return LabeledOperator(sup, a + b, self.site_dim)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, scalar):
        return LabeledOperator(self.support, scalar * self.matrix, self.site_dim)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __matmul__(self, other: "LabeledOperator"):
        a, b, sup = self._align(other)
        return LabeledOperator(sup, a @ b, self.site_dim)

    def dag(self) -> "LabeledOperator":
        return LabeledOperator(self.support, self.matrix.conj().T, self.site_dim)

    def norm(self) -> float:
        return opnorm(self.matrix)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return is_hermitian(self.matrix, atol)


def identity(support: Iterable[int], site_dim: int) -> LabeledOperator:
    support = tuple(sorted(support))
    return LabeledOperator(support, np.eye(site_dim ** len(support)), site_dim)


def permute_to_sorted(matrix: np.ndarray, order: Sequence[int], site_dim: int) -> np.ndarray:
    """Reorder tensor factors of ``matrix`` (acting on ``order``) into ascending site order."""
    n = len(order)
    perm = list(np.argsort(order, kind="stable"))
    if perm == list(range(n)):
        return np.asarray(matrix)
    t = np.asarray(matrix).reshape((site_dim,) * (2 * n))
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(site_dim**n, site_dim**n)


def embed(op: LabeledOperator, target_support: Iterable[int]) -> LabeledOperator:
    """Return ``op`` tensored with identities on ``target_support \\ op.support``."""
    target = tuple(sorted(set(int(s) for s in target_support)))
    if not set(op.support) <= set(target):
        raise SupportMismatch(f"support {op.support} is not contained in {target}")
    if target == op.support:
        return op
    rest = [s for s in target if s not in op.support]
    big = np.kron(op.matrix, np.eye(op.site_dim ** len(rest)))
    return LabeledOperator(
        target, permute_to_sorted(big, list(op.support) + rest, op.site_dim), op.site_dim
    )


def tensor_product(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    """Tensor product of operators with disjoint supports."""
    if set(a.support) & set(b.support):
        raise SupportMismatch(f"supports overlap: {a.support} and {b.support}")
    if a.site_dim != b.site_dim:
        raise SupportMismatch("operators have different site dimensions")
    order = list(a.support) + list(b.support)
    mat = permute_to_sorted(np.kron(a.matrix, b.matrix), order, a.site_dim)
    return LabeledOperator(tuple(sorted(order)), mat, a.site_dim)


def is_hermitian(matrix: np.ndarray, atol: float = 1e-12) -> bool:
    m = np.asarray(matrix)
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    return bool(np.abs(m - m.conj().T).max(initial=0.0) <= atol * scale)


def opnorm(matrix: np.ndarray, hermitian: bool | None = None) -> float:
    """Spectral norm; Lanczos on large Hermitian input, otherwise dense."""
    m = np.asarray(matrix)
    if m.size == 0:
        return 0.0
    if hermitian is None:
        hermitian = is_hermitian(m, 1e-13)
    n = m.shape[0]
    if hermitian:
        if n <= _DENSE_NORM_LIMIT:
            w = np.linalg.eigvalsh(m)
            return float(max(abs(w[0]), abs(w[-1])))
        if not np.any(m):
            return 0.0
        op = LinearOperator(m.shape, matvec=lambda v: m @ v, dtype=m.dtype)
        w = eigsh(op, k=1, which="LM", return_eigenvectors=False, tol=1e-12, v0=np.ones(n, dtype=m.dtype))
        return float(abs(w[0]))
    if n <= _DENSE_SVD_LIMIT:
        return float(np.linalg.norm(m, 2))
    mh = np.ascontiguousarray(m.conj().T)
    gram = LinearOperator(m.shape, matvec=lambda v: mh @ (m @ v), dtype=m.dtype)
    w = eigsh(gram, k=1, which="LA", return_eigenvectors=False, tol=1e-12, v0=np.ones(n, dtype=m.dtype))
    return float(np.sqrt(abs(w[0])))


def require_hermitian(matrix: np.ndarray, atol: float = 1e-10) -> None:
    if not is_hermitian(matrix, atol):
        raise NotHermitian("matrix is not Hermitian")


def apply_local(op: LabeledOperator, A: np.ndarray, support: Sequence[int], side: str = "left") -> np.ndarray:
    """embed(op, support) @ A (side="left") or A @ embed(op, support), without forming the embedding."""
    support = tuple(support)
    d, n = op.site_dim, len(support)
    pos = [support.index(s) for s in op.support]
    k = len(pos)
    q = op.matrix.reshape((d,) * (2 * k))
    A = np.asarray(A)
    if side == "left":
        t = A.reshape((d,) * n + (A.shape[1],))
        # contract the column indices of q with the row tensor positions of A
        out = np.tensordot(q, t, axes=(list(range(k, 2 * k)), pos))
        out = np.moveaxis(out, list(range(k)), pos)
        return out.reshape(A.shape[0], A.shape[1])
    t = A.reshape((A.shape[0],) + (d,) * n)
    out = np.tensordot(t, q, axes=([1 + p for p in pos], list(range(k))))
    out = np.moveaxis(out, list(range(out.ndim - k, out.ndim)), [1 + p for p in pos])
    return out.reshape(A.shape[0], A.shape[1])


def sandwich(U: np.ndarray, M: np.ndarray) -> np.ndarray:
    """U M U^dag, with real U handled by real products (half the flops of complex ones)."""
    if np.iscomplexobj(U):
        return U @ M @ U.conj().T
    if not np.iscomplexobj(M):
        return U @ M @ U.T
    # .real/.imag are strided views; BLAS needs contiguous operands
    re, im = np.ascontiguousarray(M.real), np.ascontiguousarray(M.imag)
    left_re, left_im = U @ re, U @ im
    out = np.empty(M.shape, dtype=complex)
    out.real = left_re @ U.T
    out.imag = left_im @ U.T
    return out
