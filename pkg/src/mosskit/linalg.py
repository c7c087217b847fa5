"""Exact linear algebra over Z/p^k.

Vectors are rows. A matrix ``G`` is read as a list of generators, and
"span" always means the row span over Z/p^k.  The workhorse is the Howell
normal form, which gives a canonical generating set for any submodule of
(Z/p^k)^n and makes span membership a reduction problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product as iproduct
from typing import Optional

import numpy as np

__all__ = [
    "Modulus",
    "GroupPresentation",
    "Subquotient",
    "PreconditionError",
    "howell_form",
    "howell_rows",
    "solve",
    "row_solve",
    "left_kernel",
    "in_span",
    "same_span",
    "span_size",
    "subquotient_presentation",
    "as_matrix",
]


class PreconditionError(ValueError):
    """An operation was called outside its domain (e.g. B not inside Z)."""


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class Modulus:
    """The coefficient ring Z/p^k."""

    p: int
    k: int = 1

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        if self.k < 1:
            raise ValueError(f"k={self.k} must be positive")
        if self.p ** self.k >= 2 ** 31:
            raise ValueError("modulus must be below 2^31")

    @property
    def m(self) -> int:
        return self.p ** self.k

    def valuation(self, x: int) -> int:
        """p-adic valuation of x in Z/p^k; the valuation of 0 is k."""
        x %= self.m
        if x == 0:
            return self.k
        v = 0
        while x % self.p == 0:
            x //= self.p
            v += 1
        return v

    def order(self, x: int) -> int:
        """Additive order of x."""
        return self.p ** (self.k - self.valuation(x))

    def unit_inverse(self, u: int) -> int:
        return pow(int(u) % self.m, -1, self.m)

    def to_json(self) -> dict:
        return {"p": self.p, "k": self.k}

    def __str__(self):
        return f"Z/{self.p}^{self.k}" if self.k > 1 else f"F_{self.p}"


def rows(x, n: int) -> np.ndarray:
    """Stack ``x`` as an int64 array of shape (-1, n); empty input gives (0, n)."""
    a = np.asarray(x, dtype=np.int64)
    if a.size == 0:
        return np.zeros((0, n), dtype=np.int64)
    return a.reshape(-1, n)


def as_matrix(rows, ncols: int, m: int) -> np.ndarray:
    """Coerce ``rows`` (nested lists or arrays) to an int64 matrix mod m."""
    a = np.asarray(rows, dtype=np.int64)
    if a.size == 0:
        return np.zeros((0, ncols), dtype=np.int64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.shape[1] != ncols:
        raise ValueError(f"expected {ncols} columns, got {a.shape[1]}")
    return a % m


def matmul(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """Matrix product mod m without int64 overflow."""
    if a.shape[-1] == 0 or m * m * max(a.shape[-1], 1) < 2 ** 62:
        return (a @ b) % m
    return (a.astype(object) @ b.astype(object) % m).astype(np.int64)


# -- Howell form -------------------------------------------------------------

def _echelon(rows: list, ncols: int, mod: Modulus, pivot_cols: Optional[int] = None):
    """Howell reduction of a list of int64 rows.

    Returns a list of (pivot column, row, pivot value) sorted by column.
    Pivot search is restricted to the first ``pivot_cols`` columns; rows that
    are zero there but nonzero elsewhere are returned in ``rest``.
    """
    m, p, k = mod.m, mod.p, mod.k
    pc = ncols if pivot_cols is None else pivot_cols
    work = [r for r in rows if r[:pc].any()]
    rest = [r for r in rows if not r[:pc].any() and r.any()]
    pivots = []
    for j in range(pc):
        best, bestv = -1, k
        for idx, r in enumerate(work):
            x = int(r[j])
            if x:
                v = mod.valuation(x)
                if v < bestv:
                    best, bestv = idx, v
                    if v == 0:
                        break
        if best < 0:
            continue
        r = work.pop(best)
        pe = p ** bestv
        u = int(r[j]) // pe
        if u != 1:
            r = (r * mod.unit_inverse(u)) % m
        nxt = []
        for w in work:
            x = int(w[j])
            if x:
                w = (w - (x // pe) * r) % m
            if w[:pc].any():
                nxt.append(w)
            elif w.any():
                rest.append(w)
        if bestv > 0:
            s = (r * (p ** (k - bestv))) % m
            if s[:pc].any():
                nxt.append(s)
            elif s.any():
                rest.append(s)
        work = nxt
        pivots.append([j, r, pe])
    for i, (j, r, pe) in enumerate(pivots):
        for h in range(i):
            hr = pivots[h][1]
            x = int(hr[j])
            if x >= pe:
                pivots[h][1] = (hr - (x // pe) * r) % m
    return pivots, rest


def howell_rows(M, mod: Modulus) -> np.ndarray:
    """Nonzero rows of the Howell normal form of M (canonical span basis)."""
    M = np.asarray(M, dtype=np.int64)
    if M.ndim != 2:
        raise ValueError("expected a matrix")
    ncols = M.shape[1]
    pivots, _ = _echelon([r % mod.m for r in M], ncols, mod)
    if not pivots:
        return np.zeros((0, ncols), dtype=np.int64)
    return np.array([r for _, r, _ in pivots], dtype=np.int64)


def howell_form(M, mod: Modulus):
    """Howell normal form with transform.

    Returns ``(H, U)`` with ``H == U @ M'`` mod p^k, where ``M'`` is M padded
    with zero rows to ``U.shape[0]`` rows (padding is only added when the form
    needs more rows than M has).  U is invertible.  The nonzero rows of H come
    first and are the unique Howell form of the row span of M.
    """
    m = mod.m
    M = np.asarray(M, dtype=np.int64) % m
    nrows, ncols = M.shape
    # Saturation can add at most one row per pivot column.
    R = nrows + ncols
    aug = np.zeros((R, ncols + R), dtype=np.int64)
    aug[:nrows, :ncols] = M
    aug[:, ncols:] = np.eye(R, dtype=np.int64)
    rows = [aug[i].copy() for i in range(R)]
    p, k = mod.p, mod.k
    free = [i for i in range(R)]  # rows not yet used as pivots
    pivot_order = []
    for j in range(ncols):
        best, bestv = -1, k
        for i in free:
            x = int(rows[i][j])
            if x:
                v = mod.valuation(x)
                if v < bestv:
                    best, bestv = i, v
        if best < 0:
            continue
        free.remove(best)
        pe = p ** bestv
        u = int(rows[best][j]) // pe
        if u != 1:
            rows[best] = (rows[best] * mod.unit_inverse(u)) % m
        r = rows[best]
        for i in free:
            x = int(rows[i][j])
            if x:
                rows[i] = (rows[i] - (x // pe) * r) % m
        if bestv > 0:
            s = (r * p ** (k - bestv)) % m
            if s[:ncols].any():
                # Prefer a row already zero in the M part; keep U invertible.
                target = next(i for i in free if not rows[i][:ncols].any())
                rows[target] = (rows[target] + s) % m
        pivot_order.append((j, best, pe))
    for a, (j, i, pe) in enumerate(pivot_order):
        for b in range(a):
            h = pivot_order[b][1]
            x = int(rows[h][j])
            if x >= pe:
                rows[h] = (rows[h] - (x // pe) * rows[i]) % m
    order = [i for _, i, _ in pivot_order] + [i for i in free]
    full = np.array([rows[i] for i in order], dtype=np.int64)
    # Drop padding rows that were never touched: they are unit rows of U
    # whose column is zero elsewhere, so removing both keeps U invertible.
    keep_cols = list(range(R))
    drop = []
    for pos, i in enumerate(order):
        if i >= nrows and not full[pos, :ncols].any():
            col = ncols + i
            if full[pos, col] == 1 and np.count_nonzero(full[:, col]) == 1 \
                    and np.count_nonzero(full[pos, ncols:]) == 1:
                drop.append((pos, i))
    if drop:
        drop_pos = {pos for pos, _ in drop}
        drop_idx = {i for _, i in drop}
        keep_rows = [pos for pos in range(R) if pos not in drop_pos]
        keep_cols = [c for c in range(R) if c not in drop_idx]
        full = full[keep_rows]
        full = np.concatenate([full[:, :ncols], full[:, ncols:][:, keep_cols]], axis=1)
    H = full[:, :ncols]
    U = full[:, ncols:]
    return H, U


def _reduce(pivots, v: np.ndarray, m: int):
    """Reduce v by Howell pivots; returns (remainder, coefficients)."""
    v = v % m
    coeffs = []
    for j, r, pe in pivots:
        x = int(v[j])
        c = x // pe
        if c:
            v = (v - c * r) % m
        coeffs.append(c)
    return v, coeffs


# -- solving -----------------------------------------------------------------

def solve(M, v, mod: Modulus):
    """Solve ``M @ x == v`` over Z/p^k.

    Returns ``(x0, K)`` where the rows of K generate the kernel of M, so the
    full solution set is ``x0 + rowspan(K)``; returns None when unsolvable.
    """
    m = mod.m
    M = np.asarray(M, dtype=np.int64) % m
    if M.ndim != 2:
        raise ValueError("M must be a matrix")
    v = np.asarray(v, dtype=np.int64).reshape(-1) % m
    nrows, ncols = M.shape
    if v.shape[0] != nrows:
        raise ValueError(f"dimension mismatch: M is {nrows}x{ncols}, v has {v.shape[0]} entries")
    # Row span of [M^T | I] is {(Mx, x)}.
    aug = np.concatenate([M.T, np.eye(ncols, dtype=np.int64)], axis=1)
    pivots, _ = _echelon(list(aug), nrows + ncols, mod)
    top = [pv for pv in pivots if pv[0] < nrows]
    kern = [pv[1][nrows:] for pv in pivots if pv[0] >= nrows]
    K = np.array(kern, dtype=np.int64) if kern else np.zeros((0, ncols), dtype=np.int64)
    w = np.concatenate([v, np.zeros(ncols, dtype=np.int64)])
    for j, r, pe in top:
        x = int(w[j])
        if x % pe:
            return None
        if x:
            w = (w - (x // pe) * r) % m
    if w[:nrows].any():
        return None
    x0 = (-w[nrows:]) % m
    return x0, K


def row_solve(G, v, mod: Modulus):
    """Find c with ``c @ G == v``; returns (c0, kernel rows) or None."""
    G = np.asarray(G, dtype=np.int64)
    if G.shape[0] == 0:
        v = np.asarray(v, dtype=np.int64) % mod.m
        if v.any():
            return None
        return np.zeros(0, dtype=np.int64), np.zeros((0, 0), dtype=np.int64)
    return solve(G.T, v, mod)


def left_kernel(G, mod: Modulus) -> np.ndarray:
    """Generators of {c : c @ G == 0}."""
    G = np.asarray(G, dtype=np.int64) % mod.m
    n, c = G.shape
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64)
    aug = np.concatenate([G, np.eye(n, dtype=np.int64)], axis=1)
    pivots, rest = _echelon(list(aug), c + n, mod)
    kern = [r[c:] for j, r, _ in pivots if j >= c]
    if not kern:
        return np.zeros((0, n), dtype=np.int64)
    return np.array(kern, dtype=np.int64)


def in_span(G, v, mod: Modulus) -> bool:
    G = np.asarray(G, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64) % mod.m
    if G.shape[0] == 0:
        return not v.any()
    pivots, _ = _echelon([r % mod.m for r in G], G.shape[1], mod)
    rem, _ = _reduce(pivots, v, mod.m)
    return not rem.any()


def same_span(G1, G2, mod: Modulus) -> bool:
    H1 = howell_rows(np.asarray(G1, dtype=np.int64), mod)
    H2 = howell_rows(np.asarray(G2, dtype=np.int64), mod)
    return H1.shape == H2.shape and bool((H1 == H2).all())


def span_size(G, mod: Modulus) -> int:
    """Number of elements in the row span of G."""
    H = howell_rows(np.asarray(G, dtype=np.int64), mod)
    size = 1
    # Howell pivots p^e contribute p^(k-e) elements each.
    for row in H:
        j = int(np.flatnonzero(row)[0])
        size *= mod.order(int(row[j]))
    return size


# -- finite abelian p-groups -------------------------------------------------

@dataclass(frozen=True)
class GroupPresentation:
    """A finite abelian p-group as a sum of cyclic groups of given orders."""

    orders: tuple
    names: tuple = ()

    @property
    def ngens(self) -> int:
        return len(self.orders)

    @property
    def size(self) -> int:
        s = 1
        for o in self.orders:
            s *= o
        return s

    def reduce(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64).reshape(-1)
        return c % np.asarray(self.orders, dtype=np.int64) if self.orders else c[:0]

    def zero(self) -> np.ndarray:
        return np.zeros(self.ngens, dtype=np.int64)

    def relations(self) -> np.ndarray:
        return np.diag(np.asarray(self.orders, dtype=np.int64))

    def elements(self):
        """Iterate over all elements (small groups only)."""
        for t in iproduct(*[range(o) for o in self.orders]):
            yield np.array(t, dtype=np.int64)


def _smith_local(rel: np.ndarray, ngens: int, mod: Modulus):
    """Diagonalize ``rel`` by row ops and column ops over Z/p^k.

    Returns (diag, Q, Qinv) with ``P @ rel @ Q`` diagonal for some invertible
    P; only the column transform is needed by callers.
    """
    m, p = mod.m, mod.p
    A = rel.copy() % m
    Q = np.eye(ngens, dtype=np.int64)
    Qi = np.eye(ngens, dtype=np.int64)
    diag = []
    t = 0
    nr = A.shape[0]
    while t < min(nr, ngens):
        sub = A[t:, t:]
        nz = np.argwhere(sub != 0)
        if nz.size == 0:
            break
        best, bv = None, mod.k
        for (i, j) in nz:
            v = mod.valuation(int(sub[i, j]))
            if v < bv:
                best, bv = (i + t, j + t), v
                if v == 0:
                    break
        i, j = best
        A[[t, i]] = A[[i, t]]
        if j != t:
            A[:, [t, j]] = A[:, [j, t]]
            Q[:, [t, j]] = Q[:, [j, t]]
            Qi[[t, j]] = Qi[[j, t]]
        pe = p ** bv
        u = int(A[t, t]) // pe
        if u != 1:
            A[t] = (A[t] * mod.unit_inverse(u)) % m
        for i2 in range(nr):
            if i2 != t and A[i2, t]:
                A[i2] = (A[i2] - (int(A[i2, t]) // pe) * A[t]) % m
        for j2 in range(t + 1, ngens):
            x = int(A[t, j2])
            if x:
                c = x // pe
                # column j2 -= c * column t ; Q likewise, Qinv row t += c * row j2
                A[:, j2] = (A[:, j2] - c * A[:, t]) % m
                Q[:, j2] = (Q[:, j2] - c * Q[:, t]) % m
                Qi[t] = (Qi[t] + c * Qi[j2]) % m
        diag.append(pe)
        t += 1
    return diag, Q, Qi


class Subquotient:
    """span(Z) / span(B) inside an ambient (Z/p^k)^n, with explicit maps.

    ``section`` sends canonical coordinates to an ambient representative and
    ``project`` sends an ambient element of span(Z) to coordinates;
    ``project(section(x)) == x`` for every coordinate vector x.
    """

    def __init__(self, Z, B, mod: Modulus, ambient_dim: Optional[int] = None, names=None):
        self.mod = mod
        m = mod.m
        n = ambient_dim if ambient_dim is not None else np.asarray(Z).shape[-1]
        Z = rows(Z, n)
        self.ambient_dim = n
        B = rows(B, n)
        self._zpiv, _ = _echelon([r % m for r in Z], n, mod)
        Zh = rows([r for _, r, _ in self._zpiv], n)
        self.Z = Zh
        a = Zh.shape[0]
        rels = [left_kernel(Zh, mod)] if a else []
        for b in B:
            rem, coeffs = _reduce(self._zpiv, b, m)
            if rem.any():
                raise PreconditionError("boundary generator not contained in the cycle span")
            rels.append(np.array(coeffs, dtype=np.int64).reshape(1, -1))
        rel = rows(np.concatenate(rels, axis=0) if a else [], a)
        self.B = howell_rows(B, mod) if B.shape[0] else np.zeros((0, n), dtype=np.int64)
        diag, Q, Qi = _smith_local(rel, a, mod)
        orders = []
        for t in range(a):
            if t < len(diag):
                orders.append(diag[t])  # Z/m / (p^e) has order p^e
            else:
                orders.append(m)
        keep = [t for t in range(a) if orders[t] > 1]
        keep.sort(key=lambda t: -orders[t])
        self._keep = keep
        self._Q = Q
        self.group = GroupPresentation(tuple(orders[t] for t in keep), tuple(names or ()))
        self.gens = matmul(Qi[keep].reshape(len(keep), a), Zh, m) if keep else np.zeros((0, n), dtype=np.int64)

    @property
    def orders(self):
        return self.group.orders

    @property
    def ngens(self) -> int:
        return self.group.ngens

    @property
    def size(self) -> int:
        return self.group.size

    def contains(self, v) -> bool:
        rem, _ = _reduce(self._zpiv, np.asarray(v, dtype=np.int64), self.mod.m)
        return not rem.any()

    def project(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.int64).reshape(-1)
        rem, coeffs = _reduce(self._zpiv, v, self.mod.m)
        if rem.any():
            raise PreconditionError("element is not in the cycle span")
        if not self._keep:
            return np.zeros(0, dtype=np.int64)
        c = matmul(np.array(coeffs, dtype=np.int64).reshape(1, -1), self._Q, self.mod.m)[0]
        return self.group.reduce(c[self._keep])

    def section(self, coords) -> np.ndarray:
        c = self.group.reduce(coords)
        if not len(c):
            return np.zeros(self.ambient_dim, dtype=np.int64)
        return matmul(c.reshape(1, -1), self.gens, self.mod.m)[0]

    def is_zero(self, v) -> bool:
        return not self.project(v).any()

    @cached_property
    def projection_matrix(self):
        return np.array([self.project(r) for r in self.Z]).reshape(self.Z.shape[0], self.ngens)


def subquotient_presentation(Z, B, mod: Modulus, ambient_dim: Optional[int] = None) -> Subquotient:
    """Present span(Z)/span(B); raises PreconditionError if B is not inside Z."""
    return Subquotient(Z, B, mod, ambient_dim)
