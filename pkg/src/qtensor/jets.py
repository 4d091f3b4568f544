"""Truncated Taylor expansions in Wirtinger variables.

A :class:`Jet` stores the Taylor coefficients of a (tensor-valued) smooth
function of ``(z^1, ..., z^n, zbar^1, ..., zbar^n)`` around a base point, up
to a total degree ``order``.  The ``2n`` variables are treated as independent
formal variables; reality of a function is a checkable property
(``f.conj() == f``), not something the representation enforces.

Coefficients are stored densely, monomials ordered by total degree, so the
basis of a lower order is a prefix of the basis of a higher one and
truncation is a slice of the last axis.
"""

from __future__ import annotations

import functools
import math
import string
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_RADIX = 64
_MAX_VARS = 10


class JetError(ValueError):
    """Mismatched jets (base point, order, variable count) or bad requests."""


class JetSingularError(JetError):
    """Raised when the constant term of a jet matrix cannot be inverted."""

    def __init__(self, min_singular_value: float):
        super().__init__(
            f"constant term is singular (smallest singular value {min_singular_value:.3e})"
        )
        self.min_singular_value = min_singular_value


@dataclass(frozen=True, eq=False)
class Basis:
    """Monomial basis for ``nvars`` variables up to total degree ``order``."""

    nvars: int
    order: int
    exponents: np.ndarray  # (M, nvars) int
    keys: np.ndarray  # (M,) int64, mixed radix encoding of each exponent
    degree_starts: np.ndarray  # index of the first monomial of each degree, len order+2

    @property
    def size(self) -> int:
        return len(self.keys)

    def index(self, exponent: Sequence[int]) -> int:
        key = _encode(np.asarray(exponent))
        pos = int(np.searchsorted(self._sorted_keys, key))
        if pos >= self.size or self._sorted_keys[pos] != key:
            raise JetError(f"monomial {tuple(exponent)} is not in the order-{self.order} basis")
        return int(self._sorted_pos[pos])

    def lookup(self, keys: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self._sorted_keys, keys)
        return self._sorted_pos[pos]

    @functools.cached_property
    def _sorted_pos(self) -> np.ndarray:
        return np.argsort(self.keys, kind="stable")

    @functools.cached_property
    def _sorted_keys(self) -> np.ndarray:
        return self.keys[self._sorted_pos]

    @functools.cached_property
    def product_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pairs (a, b) with deg a + deg b <= order, grouped by product monomial.

        Returns ``(left, right, starts)``; the pairs contributing to output
        monomial ``c`` are ``left[starts[c]:starts[c+1]]`` etc.
        """
        deg = self.exponents.sum(axis=1)
        a, b = np.nonzero(deg[:, None] + deg[None, :] <= self.order)
        c = self.lookup(self.keys[a] + self.keys[b])
        perm = np.argsort(c, kind="stable")
        a, b, c = a[perm], b[perm], c[perm]
        starts = np.searchsorted(c, np.arange(self.size))
        return a, b, starts

    @functools.cached_property
    def conj_permutation(self) -> np.ndarray:
        n = self.nvars // 2
        swapped = np.concatenate([self.exponents[:, n:], self.exponents[:, :n]], axis=1)
        return self.lookup(_encode(swapped))

    def derivative_map(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        """Source indices and multipliers for d/d(var), landing in order-1 basis."""
        return _derivative_map(self.nvars, self.order, var)


def _encode(exponents: np.ndarray) -> np.ndarray:
    weights = _RADIX ** np.arange(exponents.shape[-1], dtype=np.int64)
    return exponents.astype(np.int64) @ weights


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@functools.lru_cache(maxsize=None)
def get_basis(nvars: int, order: int) -> Basis:
    if not 1 <= nvars <= _MAX_VARS:
        raise JetError(f"unsupported number of variables {nvars}")
    if order < 0 or order >= _RADIX:
        raise JetError(f"unsupported jet order {order}")
    exps = []
    starts = []
    for d in range(order + 1):
        starts.append(len(exps))
        exps.extend(_compositions(d, nvars))
    starts.append(len(exps))
    exps = np.array(exps, dtype=np.int64).reshape(-1, nvars)
    return Basis(nvars, order, exps, _encode(exps), np.array(starts))


@functools.lru_cache(maxsize=None)
def _derivative_map(nvars: int, order: int, var: int):
    if order < 1:
        raise JetError("cannot differentiate an order-0 jet")
    hi = get_basis(nvars, order)
    lo = get_basis(nvars, order - 1)
    src = hi.lookup(lo.keys + _RADIX**var)
    mult = (lo.exponents[:, var] + 1).astype(float)
    return src, mult


def _fresh_label(used: str) -> str:
    for ch in string.ascii_letters:
        if ch not in used:
            return ch
    raise JetError("ran out of einsum labels")


class Jet:
    """Tensor-valued truncated Taylor series.

    Parameters
    ----------
    coeffs : ndarray, shape ``(*shape, M)``
        Taylor coefficients; the last axis runs over the monomial basis.
    basis : Basis
    base_point : ndarray, shape ``(n,)``
        Complex expansion point (the values of ``z``).
    """

    __slots__ = ("coeffs", "basis", "base_point")
    __array_ufunc__ = None

    def __init__(self, coeffs, basis: Basis, base_point):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[-1:] != (basis.size,):
            raise JetError(f"coefficient axis has length {coeffs.shape[-1:]}, basis needs {basis.size}")
        self.coeffs = coeffs
        self.basis = basis
        self.base_point = np.asarray(base_point, dtype=complex)

    # -- construction -------------------------------------------------

    @classmethod
    def constant(cls, value, base_point, order: int) -> "Jet":
        base_point = np.asarray(base_point, dtype=complex)
        basis = get_basis(2 * len(base_point), order)
        value = np.asarray(value, dtype=complex)
        coeffs = np.zeros(value.shape + (basis.size,), dtype=complex)
        coeffs[..., 0] = value
        return cls(coeffs, basis, base_point)

    def zeros_like(self, shape=()) -> "Jet":
        return Jet(np.zeros(tuple(shape) + (self.basis.size,), complex), self.basis, self.base_point)

    @staticmethod
    def stack(jets: Sequence["Jet"], axis: int = 0) -> "Jet":
        first = jets[0]
        for j in jets[1:]:
            first._check_compatible(j)
        if axis < 0:
            axis += first.coeffs.ndim
        return Jet(np.stack([j.coeffs for j in jets], axis=axis), first.basis, first.base_point)

    # -- basic properties --------------------------------------------

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def dim(self) -> int:
        return self.basis.nvars // 2

    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        """Value of the represented function at the base point."""
        v = self.coeffs[..., 0]
        return v.copy() if isinstance(v, np.ndarray) else complex(v)

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, order={self.order}, dim={self.dim})"

    def coefficient(self, alpha: Sequence[int], beta: Sequence[int]):
        """Raw Taylor coefficient of ``dz^alpha dzbar^beta``."""
        idx = self._monomial_index(alpha, beta)
        return self.coeffs[..., idx]

    def partial(self, alpha: Sequence[int], beta: Sequence[int]):
        """Mixed partial ``d^alpha dbar^beta`` of the function at the base point."""
        idx = self._monomial_index(alpha, beta)
        fact = math.prod(math.factorial(a) for a in alpha) * math.prod(math.factorial(b) for b in beta)
        return fact * self.coeffs[..., idx]

    def _monomial_index(self, alpha, beta) -> int:
        alpha, beta = tuple(alpha), tuple(beta)
        if len(alpha) != self.dim or len(beta) != self.dim:
            raise JetError(f"multi-indices must have length {self.dim}")
        if min(alpha + beta) < 0:
            raise JetError("negative multi-index")
        if sum(alpha) + sum(beta) > self.order:
            raise JetError(
                f"derivative of degree {sum(alpha) + sum(beta)} requested from an order-{self.order} jet"
            )
        return self.basis.index(alpha + beta)

    # -- compatibility -------------------------------------------------

    def _check_compatible(self, other: "Jet") -> None:
        if self.basis is not other.basis:
            if self.nvars != other.nvars:
                raise JetError(f"jets in {self.nvars} and {other.nvars} variables")
            raise JetError(f"jet orders differ ({self.order} vs {other.order})")
        if self.base_point is not other.base_point and not np.array_equal(self.base_point, other.base_point):
            raise JetError("jets expanded at different base points")

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        basis = get_basis(self.nvars, order)
        return Jet(self.coeffs[..., : basis.size], basis, self.base_point)

    # -- arithmetic -----------------------------------------------------

    def _coerce(self, other):
        """Return coefficient array for ``other`` aligned with self."""
        if isinstance(other, Jet):
            self._check_compatible(other)
            return other.coeffs
        arr = np.asarray(other, dtype=complex)
        out = np.zeros(arr.shape + (self.basis.size,), dtype=complex)
        out[..., 0] = arr
        return out

    def __add__(self, other):
        return Jet(self.coeffs + self._coerce(other), self.basis, self.base_point)

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.coeffs - self._coerce(other), self.basis, self.base_point)

    def __rsub__(self, other):
        return Jet(self._coerce(other) - self.coeffs, self.basis, self.base_point)

    def __neg__(self):
        return Jet(-self.coeffs, self.basis, self.base_point)

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check_compatible(other)
            a, b, starts = self.basis.product_table
            prod = self.coeffs[..., a] * other.coeffs[..., b]
            return Jet(np.add.reduceat(prod, starts, axis=-1), self.basis, self.base_point)
        arr = np.asarray(other, dtype=complex)
        return Jet(self.coeffs * arr[..., None], self.basis, self.base_point)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=complex))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx) or len(idx) > len(self.shape):
            raise JetError("jet indexing must address tensor axes only")
        return Jet(self.coeffs[idx], self.basis, self.base_point)

    def transpose(self, *axes) -> "Jet":
        nd = len(self.shape)
        return Jet(self.coeffs.transpose(*axes, nd), self.basis, self.base_point)

    def sum(self, axis=None) -> "Jet":
        nd = len(self.shape)
        if axis is None:
            axis = tuple(range(nd))
        return Jet(self.coeffs.sum(axis=axis), self.basis, self.base_point)

    def conj(self) -> "Jet":
        """Complex conjugate function: swaps the roles of z and zbar."""
        return Jet(self.coeffs.conj()[..., self.basis.conj_permutation], self.basis, self.base_point)

    def scalar_mul(self, c) -> "Jet":
        return self * c

    # -- calculus -------------------------------------------------------

    def d(self, var: int) -> "Jet":
        """Derivative along formal variable ``var`` (``0..n-1`` z, ``n..2n-1`` zbar)."""
        if not 0 <= var < self.nvars:
            raise JetError(f"variable index {var} out of range")
        src, mult = self.basis.derivative_map(var)
        lo = get_basis(self.nvars, self.order - 1)
        return Jet(self.coeffs[..., src] * mult, lo, self.base_point)

    def dz(self, i: int) -> "Jet":
        return self.d(i)

    def dzbar(self, j: int) -> "Jet":
        return self.d(self.dim + j)

    def grad(self) -> "Jet":
        """Stack of ``d_i`` along a new leading axis."""
        return Jet.stack([self.dz(i) for i in range(self.dim)])

    def gradbar(self) -> "Jet":
        return Jet.stack([self.dzbar(i) for i in range(self.dim)])

    def compose(self, taylor_coeffs: Callable[[np.ndarray, int], np.ndarray]) -> "Jet":
        """Apply a univariate analytic function entrywise.

        ``taylor_coeffs(a0, k)`` must return ``f^(k)(a0) / k!``.
        """
        a0 = self.coeffs[..., 0]
        nil = self - a0
        out = nil.zeros_like(self.shape) + taylor_coeffs(a0, self.order)
        for k in range(self.order - 1, -1, -1):
            out = out * nil + taylor_coeffs(a0, k)
        return out

    def exp(self) -> "Jet":
        return self.compose(lambda a0, k: np.exp(a0) / math.factorial(k))

    def log(self) -> "Jet":
        def coeffs(a0, k):
            if k == 0:
                return np.log(a0)
            return (-1.0) ** (k - 1) / (k * a0**k)

        return self.compose(coeffs)

    def reciprocal(self) -> "Jet":
        a0 = self.coeffs[..., 0]
        if np.any(a0 == 0):
            raise JetSingularError(0.0)
        return self.compose(lambda a0, k: (-1.0) ** k / a0 ** (k + 1))

    def power(self, p: float) -> "Jet":
        return self.compose(lambda a0, k: _binom(p, k) * a0 ** (p - k))

    def inv(self) -> "Jet":
        """Matrix inverse of a jet with shape ``(n, n)``."""
        return jet_matrix_invert(self)


def _binom(p: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= (p - i) / (i + 1)
    return out


def coordinate_jets(base_point, order: int) -> tuple[Jet, Jet]:
    """Jets of the coordinate functions ``z`` and ``zbar`` (each shape ``(n,)``)."""
    base_point = np.asarray(base_point, dtype=complex).ravel()
    n = len(base_point)
    basis = get_basis(2 * n, order)
    z = np.zeros((n, basis.size), complex)
    zb = np.zeros((n, basis.size), complex)
    z[:, 0] = base_point
    zb[:, 0] = base_point.conj()
    if order >= 1:
        for i in range(n):
            e = np.zeros(2 * n, int)
            e[i] = 1
            z[i, basis.index(e)] = 1.0
            e[i], e[n + i] = 0, 1
            zb[i, basis.index(e)] = 1.0
    return Jet(z, basis, base_point), Jet(zb, basis, base_point)


def jet_arith(a: Jet, b, kind: str) -> Jet:
    """Dispatch for the four elementary operations: add, mul, scalar_mul, conj."""
    if kind == "add":
        return a + b
    if kind == "mul":
        if not isinstance(b, Jet):
            raise JetError("mul expects two jets; use scalar_mul for constants")
        return a * b
    if kind == "scalar_mul":
        return a * b
    if kind == "conj":
        return a.conj()
    raise JetError(f"unknown jet operation {kind!r}")


def jet_extract(a: Jet, alpha: Sequence[int], beta: Sequence[int]):
    return a.partial(alpha, beta)


def jet_matrix_invert(g: Jet) -> Jet:
    """Inverse of a square jet matrix via the truncated Neumann series.

    With ``g = g0 + N`` (``N`` without constant term),
    ``g^-1 = sum_k (-g0^-1 N)^k g0^-1``; the series terminates at the jet order.
    """
    if len(g.shape) != 2 or g.shape[0] != g.shape[1]:
        raise JetError(f"expected a square jet matrix, got shape {g.shape}")
    g0 = g.coeffs[..., 0]
    sv = np.linalg.svd(g0, compute_uv=False)
    if sv[-1] <= 1e-14 * max(sv[0], 1e-300):
        raise JetSingularError(float(sv[-1]))
    g0inv = np.linalg.inv(g0)
    x = jeinsum("ij,jk->ik", g0inv, g - g0)
    y = Jet.constant(np.eye(g.shape[0]), g.base_point, g.order)
    eye = np.eye(g.shape[0])
    for _ in range(g.order):
        y = eye - jeinsum("ij,jk->ik", x, y)
    return jeinsum("ij,jk->ik", y, g0inv)


def jeinsum(subscripts: str, *operands) -> Jet | np.ndarray:
    """``numpy.einsum`` over tensor axes where operands may be jets.

    Products of two jets are truncated Taylor products.  Explicit ``->``
    output is required.
    """
    if "->" not in subscripts:
        raise JetError("jeinsum needs an explicit output specification")
    lhs, out = subscripts.replace(" ", "").split("->")
    labels = lhs.split(",")
    if len(labels) != len(operands):
        raise JetError("operand count does not match subscripts")
    cur, cur_lab = operands[0], labels[0]
    for k in range(1, len(operands)):
        nxt, nxt_lab = operands[k], labels[k]
        needed = set(out).union(*labels[k + 1:]) if k + 1 < len(labels) else set(out)
        keep = "".join(dict.fromkeys(ch for ch in cur_lab + nxt_lab if ch in needed))
        cur = _pair_einsum(cur, cur_lab, nxt, nxt_lab, keep)
        cur_lab = keep
    return _pair_einsum(cur, cur_lab, None, "", out)


def _pair_einsum(a, la: str, b, lb: str, out: str):
    used = la + lb + out
    c = _fresh_label(used)
    if b is None:
        if isinstance(a, Jet):
            return Jet(np.einsum(f"{la}{c}->{out}{c}", a.coeffs), a.basis, a.base_point)
        return np.einsum(f"{la}->{out}", a)
    if isinstance(a, Jet) and isinstance(b, Jet):
        a._check_compatible(b)
        left, right, starts = a.basis.product_table
        prod = np.einsum(f"{la}{c},{lb}{c}->{out}{c}", a.coeffs[..., left], b.coeffs[..., right])
        return Jet(np.add.reduceat(prod, starts, axis=-1), a.basis, a.base_point)
    if isinstance(a, Jet):
        return Jet(np.einsum(f"{la}{c},{lb}->{out}{c}", a.coeffs, np.asarray(b)), a.basis, a.base_point)
    if isinstance(b, Jet):
        return Jet(np.einsum(f"{la},{lb}{c}->{out}{c}", np.asarray(a), b.coeffs), b.basis, b.base_point)
    return np.einsum(f"{la},{lb}->{out}", a, b)


def ddbar(u: Jet) -> Jet:
    """Complex Hessian ``[i, j] = d_i dbar_j u`` of a scalar jet (order drops by 2)."""
    return Jet.stack([u.dz(i).gradbar() for i in range(u.dim)])
