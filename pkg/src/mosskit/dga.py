"""Finite filtered differential graded algebras.

A :class:`FilteredDGA` is a free Z/p^k-module on named generators, each
carrying a degree (the stem), an optional tuple of auxiliary gradings, and a
filtration level.  ``F_s`` is spanned by generators of filtration >= s, so
every subquotient ``X_{s,r} = F_s / F_{s+r}`` is spanned by a window of
generators.  Chains are row vectors in the full basis; a window only decides
which coordinates count.

Homotopy classes of the tower become homology classes, nullhomotopies become
bounding chains, and brackets are computed by solving for those chains.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coset import Coset, format_element
from .linalg import (
    Modulus,
    PreconditionError,
    Subquotient,
    left_kernel,
    matmul,
    row_solve,
    rows,
)

__all__ = [
    "Generator",
    "FilteredDGA",
    "ChainComplex",
    "Homology",
    "HomologyClass",
    "ValidationReport",
    "BracketUndefined",
    "validate",
    "subquotient",
    "subquotient2",
    "split_srt",
    "homology_product",
    "toda_bracket",
    "toda_filtered",
    "differential_source",
    "random_instance",
    "load_dga",
    "dump_dga",
]


class BracketUndefined(ValueError):
    """A product required to vanish does not vanish."""

    def __init__(self, message, product=None):
        super().__init__(message)
        self.product = product


@dataclass(frozen=True)
class Generator:
    name: str
    degree: int
    filtration: int
    weight: tuple = ()

    @property
    def grade(self) -> tuple:
        return (self.degree,) + tuple(self.weight)


def _shift(grade: tuple, dn: int) -> tuple:
    return (grade[0] + dn,) + tuple(grade[1:])


def _add(g1: tuple, g2: tuple) -> tuple:
    return tuple(a + b for a, b in zip(g1, g2))


# -- generic chain complexes -------------------------------------------------

class ChainComplex:
    """A finite chain complex over Z/p^k, rows as chains.

    ``D[i, j]`` is the coefficient of basis element j in d(basis element i).
    Only basis elements flagged in ``active`` take part, which lets a window
    of a filtered algebra reuse the global coordinates.
    """

    def __init__(self, grades: Sequence[tuple], D: np.ndarray, mod: Modulus, active=None, label=""):
        self.grades = [tuple(g) for g in grades]
        self.D = np.asarray(D, dtype=np.int64) % mod.m
        self.mod = mod
        n = len(self.grades)
        self.active = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
        self.label = label
        self._hcache = {}
        self._idx = {}

    @property
    def dim(self) -> int:
        return len(self.grades)

    def basis(self, grade: tuple) -> np.ndarray:
        grade = tuple(grade)
        if grade not in self._idx:
            self._idx[grade] = np.array(
                [i for i, g in enumerate(self.grades) if g == grade and self.active[i]], dtype=np.int64)
        return self._idx[grade]

    def differential(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.int64) * self.active
        return matmul(v.reshape(1, -1), self.D, self.mod.m)[0] * self.active

    def restrict(self, v) -> np.ndarray:
        return np.asarray(v, dtype=np.int64) * self.active

    def homology(self, grade: tuple) -> "Homology":
        grade = tuple(grade)
        if grade not in self._hcache:
            self._hcache[grade] = Homology(self, grade)
        return self._hcache[grade]

    def all_grades(self):
        return sorted({g for g, a in zip(self.grades, self.active) if a})


class Homology:
    """H_grade of a :class:`ChainComplex` with section and projection."""

    def __init__(self, C: ChainComplex, grade: tuple):
        self.complex = C
        self.grade = grade
        m = C.mod.m
        idx = C.basis(grade)
        below = C.basis(_shift(grade, -1))
        above = C.basis(_shift(grade, 1))
        self.idx = idx
        if len(idx):
            dmat = C.D[np.ix_(idx, below)] if len(below) else np.zeros((len(idx), 0), dtype=np.int64)
            cyc = left_kernel(dmat, C.mod) if dmat.shape[1] else np.eye(len(idx), dtype=np.int64)
            bnd = C.D[np.ix_(above, idx)] if len(above) else np.zeros((0, len(idx)), dtype=np.int64)
        else:
            cyc = np.zeros((0, 0), dtype=np.int64)
            bnd = np.zeros((0, 0), dtype=np.int64)
        self.sq = Subquotient(cyc, bnd, C.mod, ambient_dim=len(idx))

    @property
    def orders(self) -> tuple:
        return self.sq.orders

    @property
    def size(self) -> int:
        return self.sq.size

    @property
    def group(self):
        return self.sq.group

    def _embed(self, local) -> np.ndarray:
        v = np.zeros(self.complex.dim, dtype=np.int64)
        v[self.idx] = local
        return v

    def section(self, coords) -> np.ndarray:
        return self._embed(self.sq.section(coords))

    def project(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.int64)
        return self.sq.project(v[self.idx] % self.complex.mod.m)

    def is_cycle(self, v) -> bool:
        v = np.asarray(v, dtype=np.int64)
        return self.sq.contains(v[self.idx] % self.complex.mod.m)

    def cycle_generators(self) -> np.ndarray:
        return rows([self._embed(z) for z in self.sq.Z], self.complex.dim)

    def boundary_generators(self) -> np.ndarray:
        return rows([self._embed(b) for b in self.sq.B], self.complex.dim)

    def generators(self) -> np.ndarray:
        """Cycle representatives of the cyclic generators."""
        return rows([self._embed(g) for g in self.sq.gens], self.complex.dim)


# -- the filtered algebra ----------------------------------------------------

class FilteredDGA:
    """A finite filtered DGA.

    Parameters
    ----------
    modulus : Modulus
    generators : list of Generator
        Basis of the underlying free module.
    d : (n, n) array
        ``d[i]`` is the differential of basis element i.
    mult : (n, n, n) array
        ``mult[i, j]`` is the product of basis elements i and j.
    unit : str, optional
        Name of the unit; defaults to a generator named "1".
    length : int, optional
        Filtration length L with F_L = 0; defaults to one more than the
        largest filtration level.
    """

    def __init__(self, modulus: Modulus, generators, d, mult, unit: Optional[str] = None,
                 length: Optional[int] = None, name: str = ""):
        self.modulus = modulus
        self.generators = list(generators)
        n = len(self.generators)
        m = modulus.m
        self.d = np.asarray(d, dtype=np.int64).reshape(n, n) % m
        self.mult = np.asarray(mult, dtype=np.int64).reshape(n, n, n) % m
        self.names = [g.name for g in self.generators]
        if len(set(self.names)) != n:
            raise ValueError("generator names must be distinct")
        self.index = {g.name: i for i, g in enumerate(self.generators)}
        if unit is None and "1" in self.index:
            unit = "1"
        self.unit = unit
        self.deg = np.array([g.degree for g in self.generators], dtype=np.int64)
        self.fil = np.array([g.filtration for g in self.generators], dtype=np.int64)
        self.grades = [g.grade for g in self.generators]
        top = int(self.fil.max()) + 1 if n else 1
        self.L = max(length or top, top)
        self.name = name
        self._windows = {}

    @property
    def dim(self) -> int:
        return len(self.generators)

    @property
    def m(self) -> int:
        return self.modulus.m

    # chains
    def vector(self, terms) -> np.ndarray:
        """Build a chain from ``{name: coeff}`` or ``[(coeff, name), ...]``."""
        v = np.zeros(self.dim, dtype=np.int64)
        items = terms.items() if isinstance(terms, dict) else [(n, c) for c, n in terms]
        for name, c in items:
            v[self.index[name]] += c
        return v % self.m

    def basis_vector(self, name: str) -> np.ndarray:
        return self.vector({name: 1})

    def unit_vector(self) -> np.ndarray:
        if self.unit is None:
            raise ValueError("algebra has no designated unit")
        return self.basis_vector(self.unit)

    def differential(self, v) -> np.ndarray:
        return matmul(np.asarray(v, dtype=np.int64).reshape(1, -1), self.d, self.m)[0]

    def mul(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64) % self.m
        y = np.asarray(y, dtype=np.int64) % self.m
        outer = np.outer(x, y) % self.m
        flat = outer.reshape(1, -1)
        return matmul(flat, self.mult.reshape(self.dim * self.dim, self.dim), self.m)[0]

    def grade_of(self, v) -> Optional[tuple]:
        """The common grade of the support of v, or None for 0; raises if mixed."""
        support = np.flatnonzero(np.asarray(v) % self.m)
        gs = {self.grades[i] for i in support}
        if not gs:
            return None
        if len(gs) > 1:
            raise ValueError(f"chain is not homogeneous: grades {sorted(gs)}")
        return gs.pop()

    def min_filtration(self, v) -> int:
        support = np.flatnonzero(np.asarray(v) % self.m)
        return int(self.fil[support].min()) if len(support) else self.L

    def clamp(self, lo: int, hi: Optional[int] = None) -> tuple:
        lo = min(max(0, lo), self.L)
        hi = self.L if hi is None else min(max(lo, hi), self.L)
        return lo, hi

    # windows
    def window(self, lo: int, hi: Optional[int] = None) -> ChainComplex:
        """The complex F_lo / F_hi (hi defaults to L, i.e. F_lo itself)."""
        lo, hi = self.clamp(lo, hi)
        key = (lo, hi)
        if key not in self._windows:
            active = (self.fil >= lo) & (self.fil < hi)
            self._windows[key] = ChainComplex(self.grades, self.d, self.modulus, active, label=f"X[{lo},{hi})")
        return self._windows[key]

    def homology(self, grade, lo: int = 0, hi: Optional[int] = None) -> Homology:
        if isinstance(grade, (int, np.integer)):
            grade = (int(grade),) + (0,) * (len(self.grades[0]) - 1 if self.grades else 0)
        return self.window(lo, hi).homology(tuple(grade))

    def restrict(self, v, lo: int, hi: Optional[int] = None) -> np.ndarray:
        lo, hi = self.clamp(lo, hi)
        mask = (self.fil >= lo) & (self.fil < hi)
        return (np.asarray(v, dtype=np.int64) * mask) % self.m

    def present_grades(self) -> list:
        return sorted(set(self.grades))

    def degree_range(self) -> tuple:
        return (int(self.deg.min()), int(self.deg.max())) if self.dim else (0, 0)

    def cls(self, v, lo: int = 0, hi: Optional[int] = None, grade=None) -> "HomologyClass":
        """Wrap a chain as a homology class of the window F_lo/F_hi."""
        v = np.asarray(v, dtype=np.int64) % self.m
        if grade is None:
            grade = self.grade_of(v)
            if grade is None:
                raise ValueError("the zero chain needs an explicit grade")
        lo, hi = self.clamp(lo, hi)
        return HomologyClass(self, tuple(grade), lo, hi, self.restrict(v, lo, hi))

    def __repr__(self):
        return f"FilteredDGA({self.name or '?'}, dim={self.dim}, L={self.L}, {self.modulus})"


@dataclass(eq=False)
class HomologyClass:
    """A class in H(F_lo / F_hi) given by a cycle representative."""

    dga: FilteredDGA
    grade: tuple
    lo: int
    hi: int
    chain: np.ndarray

    @property
    def degree(self) -> int:
        return self.grade[0]

    @property
    def homology(self) -> Homology:
        return self.dga.homology(self.grade, self.lo, self.hi)

    @property
    def coords(self) -> np.ndarray:
        return self.homology.project(self.chain)

    def is_zero(self) -> bool:
        return not self.coords.any()

    def __eq__(self, other):
        if not isinstance(other, HomologyClass):
            return NotImplemented
        if (self.grade, self.lo, self.hi) != (other.grade, other.lo, other.hi):
            return False
        return bool((self.coords == other.coords).all())

    def __repr__(self):
        return f"HomologyClass(grade={self.grade}, window=[{self.lo},{self.hi}), coords={self.coords.tolist()})"


# -- validation --------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, where, detail: str = ""):
        self.violations.append((kind, where, detail))

    def kinds(self):
        return [v[0] for v in self.violations]

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(f"{k} at {w}: {d}" for k, w, d in self.violations)


def validate(A: FilteredDGA) -> ValidationReport:
    """Check every structural invariant and list each violation."""
    rep = ValidationReport()
    n, m = A.dim, A.m
    D, M = A.d, A.mult
    names = A.names
    if not n:
        return rep
    dd = matmul(D, D, m)
    for i in np.flatnonzero(dd.any(axis=1)):
        rep.add("d∘d", names[i], f"d(d({names[i]})) = {dd[i].tolist()}")
    for i, j in np.argwhere(D):
        if A.grades[j] != _shift(A.grades[i], -1):
            rep.add("d-degree", (names[i], names[j]), "differential must lower degree by 1 and keep weights")
        if A.fil[j] < A.fil[i]:
            rep.add("d-filtration", (names[i], names[j]),
                    f"d({names[i]}) leaves F_{A.fil[i]} through {names[j]}")
    for i, j, k in np.argwhere(M):
        if A.grades[k] != _add(A.grades[i], A.grades[j]):
            rep.add("mult-grade", (names[i], names[j], names[k]), "product is not additive in grades")
        if A.fil[k] < A.fil[i] + A.fil[j]:
            rep.add("mult-filtration", (names[i], names[j], names[k]), "F_s·F_t ⊄ F_{s+t}")
    # Leibniz on basis pairs
    dM = np.einsum("ijk,kl->ijl", M, D) % m                       # d(xy)
    left = np.einsum("ia,ajk->ijk", D, M) % m                     # (dx)y
    right = np.einsum("jb,ibk->ijk", D, M) % m                    # x(dy)
    sign = np.where(A.deg % 2 == 0, 1, -1)[:, None, None]
    leib = (dM - left - sign * right) % m
    for i, j in np.argwhere(leib.any(axis=2)):
        rep.add("leibniz", (names[i], names[j]), "d(xy) ≠ (dx)y + (-1)^|x| x(dy)")
    # associativity
    xy_z = np.einsum("ijk,klo->ijlo", M, M) % m
    x_yz = np.einsum("jlk,iko->ijlo", M, M) % m
    bad = (xy_z - x_yz) % m
    for i, j, l in np.argwhere(bad.any(axis=3)):
        rep.add("associativity", (names[i], names[j], names[l]), "(xy)z ≠ x(yz)")
    if A.unit is None:
        rep.add("unit", None, "no unit designated")
    else:
        u = A.index[A.unit]
        if A.fil[u] != 0 or A.deg[u] != 0:
            rep.add("unit", A.unit, "unit must sit in degree 0, filtration 0")
        eye = np.eye(n, dtype=np.int64)
        for i in range(n):
            if (M[u, i] != eye[i]).any() or (M[i, u] != eye[i]).any():
                rep.add("unit", (A.unit, names[i]), "unit does not act as identity")
    return rep


# -- subquotients ------------------------------------------------------------

def subquotient(A: FilteredDGA, s: int, r: int) -> ChainComplex:
    """X_{s,r} = F_s / F_{s+r}; windows past L are clamped."""
    if s < 0 or r < 1:
        raise ValueError("need s >= 0 and r >= 1")
    return A.window(s, s + r)


@dataclass(eq=False)
class Cone:
    """X_{s,r,t} as the mapping cone of X_{s+t,r} -> X_{s,r}.

    A cone chain in grade g is a pair ``(b, a)``: b a chain of X_{s,r} in
    grade g and a a chain of X_{s+t,r} in grade g-1, stored as the
    concatenation ``[b | a]`` of two global-length vectors.
    """

    dga: FilteredDGA
    s: int
    r: int
    t: int
    complex: ChainComplex

    def pack(self, b, a) -> np.ndarray:
        return np.concatenate([np.asarray(b, dtype=np.int64), np.asarray(a, dtype=np.int64)]) % self.dga.m

    def unpack(self, v):
        n = self.dga.dim
        v = np.asarray(v, dtype=np.int64)
        return v[:n], v[n:]

    def inclusion(self, b) -> np.ndarray:
        """X_{s,r} -> X_{s,r,t}."""
        return self.pack(self.dga.restrict(b, self.s, self.s + self.r), np.zeros(self.dga.dim, dtype=np.int64))

    def kappa(self, v) -> np.ndarray:
        """Connecting map X_{s,r,t} -> Σ X_{s+t,r}: (b, a) -> -a."""
        return (-self.unpack(v)[1]) % self.dga.m


def subquotient2(A: FilteredDGA, s: int, r: int, t: int) -> Cone:
    """X_{s,r,t}: cofiber of X_{s+t,r} -> X_{s,r}, built as a mapping cone."""
    if s < 0 or r < 1 or t < 1:
        raise ValueError("need s >= 0, r >= 1, t >= 1")
    n, m = A.dim, A.m
    Bw = A.window(s, s + r).active
    Aw = A.window(s + t, s + t + r).active
    D = A.d
    # d(b, a) = (d b + f(a), -d a) with f the restriction to X_{s,r}.
    big = np.zeros((2 * n, 2 * n), dtype=np.int64)
    big[:n, :n] = D * Bw[:, None] * Bw[None, :]
    big[n:, :n] = np.eye(n, dtype=np.int64) * (Aw & Bw)[:, None]
    big[n:, n:] = (-D * Aw[:, None] * Aw[None, :]) % m
    grades = list(A.grades) + [_shift(g, 1) for g in A.grades]
    active = np.concatenate([Bw, Aw])
    C = ChainComplex(grades, big % m, A.modulus, active, label=f"X[{s},{r},{t}]")
    return Cone(A, s, r, t, C)


def split_srt(A: FilteredDGA, s: int, r: int, t: int):
    """Chain maps xi: X_{s,r,t} -> X_{s,t} and xi': X_{s,r,t} -> Σ X_{s+r,t}.

    Valid for 1 <= t <= r, where the map X_{s+r,t} -> X_{s,t} vanishes and
    the cone splits.  Returns ``(cone, xi, xi_prime)`` with xi and xi' as
    functions on packed cone chains; xi' lands in the global coordinates of
    the window [s+r, s+r+t) (degree shifted up by one).
    """
    if not (1 <= t <= r):
        raise PreconditionError(f"splitting needs 1 <= t <= r, got t={t}, r={r}")
    cone = subquotient2(A, s, r, t)

    def xi(v):
        b, _ = cone.unpack(v)
        return A.restrict(b, s, s + t)

    def xi_prime(v):
        b, a = cone.unpack(v)
        # The P_K(d b) term makes this a chain map; the overall sign makes
        # kappa = p kappa' xi + i xi' on homology.
        return A.restrict(-(a + A.differential(A.restrict(b, s, s + r))) % A.m, s + r, s + r + t)

    return cone, xi, xi_prime


# -- products and brackets ---------------------------------------------------

def _width(c: HomologyClass):
    return None if c.hi >= c.dga.L else c.hi - c.lo


def homology_product(x: HomologyClass, y: HomologyClass) -> HomologyClass:
    """Product of classes in windows of equal width: X_{a,w} x X_{b,w} -> X_{a+b,w}."""
    A = x.dga
    if y.dga is not A:
        raise ValueError("classes live in different algebras")
    wx, wy = _width(x), _width(y)
    if wx != wy and not (x.lo == 0 and y.lo == 0 and x.hi >= A.L and y.hi >= A.L):
        raise ValueError(f"incompatible windows [{x.lo},{x.hi}) and [{y.lo},{y.hi})")
    lo = x.lo + y.lo
    hi = None if wx is None else lo + wx
    grade = _add(x.grade, y.grade)
    return A.cls(A.mul(x.chain, y.chain), lo, hi, grade)


def _koszul(deg: int, m: int) -> int:
    return 1 if deg % 2 == 0 else m - 1


def _nullhomotopy(A: FilteredDGA, target, grade: tuple, lo: int):
    """Chains G in F_lo of the given grade with dG = target: (G0, cycle gens) or None."""
    idx = A.window(lo).basis(grade)
    if not len(idx):
        if np.asarray(target).any():
            return None
        return np.zeros(A.dim, dtype=np.int64), np.zeros((0, A.dim), dtype=np.int64)
    sol = row_solve(A.d[idx], target, A.modulus)
    if sol is None:
        return None
    c0, K = sol
    G0 = np.zeros(A.dim, dtype=np.int64)
    G0[idx] = c0
    Ks = np.zeros((K.shape[0], A.dim), dtype=np.int64)
    Ks[:, idx] = K
    return G0, Ks


def _bracket(A, a, a2, a3, lo_F, lo_G, out_lo, grades):
    """Shared chain-level bracket: {a F - (-1)^|a| G a3 : dF = a2 a3, dG = a a2}."""
    ga, ga2, ga3 = grades
    m = A.m
    prod23 = A.mul(a2, a3)
    prod12 = A.mul(a, a2)
    gF = _shift(_add(ga2, ga3), 1)
    gG = _shift(_add(ga, ga2), 1)
    F = _nullhomotopy(A, prod23, gF, lo_F)
    if F is None:
        raise BracketUndefined(f"a'a'' is not a boundary in F_{lo_F}", product=prod23)
    G = _nullhomotopy(A, prod12, gG, lo_G)
    if G is None:
        raise BracketUndefined(f"aa' is not a boundary in F_{lo_G}", product=prod12)
    F0, FK = F
    G0, GK = G
    sgn = _koszul(ga[0], m)
    rep = (A.mul(a, F0) - sgn * A.mul(G0, a3)) % m
    out_grade = _shift(_add(_add(ga, ga2), ga3), 1)
    H = A.homology(out_grade, out_lo)
    ind_chains = [A.mul(a, z) for z in FK] + [A.mul(z, a3) for z in GK]
    ind = [H.project(c) for c in ind_chains]
    coset = Coset(H.group, H.project(rep), rows(ind, H.group.ngens), A.modulus,
                  where=(out_grade, out_lo), names=_class_names(A, H))
    coset.chain = rep
    coset.indeterminacy_chains = ind_chains
    coset.homology = H
    return coset


def _class_names(A, H) -> tuple:
    """Homology generators named by their cycle representatives."""
    out = []
    for i in range(H.group.ngens):
        e = np.zeros(H.group.ngens, dtype=np.int64)
        e[i] = 1
        t = format_element(H.section(e), A.names)
        out.append(f"[{t}]" if " + " in t else t)
    return tuple(out)


def toda_bracket(x: HomologyClass, y: HomologyClass, z: HomologyClass) -> Coset:
    """Multiplicative bracket <x, y, z> in H(X) as representative + indeterminacy.

    Raises :class:`BracketUndefined` if xy or yz is nonzero in homology.
    """
    A = x.dga
    return _bracket(A, x.chain, y.chain, z.chain, 0, 0, 0, (x.grade, y.grade, z.grade))


def toda_filtered(x: HomologyClass, y: HomologyClass, z: HomologyClass,
                  f: int, f1: int, f2: int, r: int) -> Coset:
    """Filtered bracket of x in F_{f-f1}, y in F_{f1-f2-r}, z in F_{f2}.

    The nullhomotopies are confined to F_{f1-r} (for yz) and F_{f-f2-r}
    (for xy); the answer lives in H(F_{f-r}).
    """
    A = x.dga
    for c, lo, nm in ((x, f - f1, "first"), (y, f1 - f2 - r, "second"), (z, f2, "third")):
        if A.min_filtration(c.chain) < lo:
            raise ValueError(f"{nm} class is not in filtration {lo}")
    try:
        return _bracket(A, x.chain, y.chain, z.chain, f1 - r, f - f2 - r, f - r,
                        (x.grade, y.grade, z.grade))
    except BracketUndefined as e:
        which = "product of the second and third classes is not null in F_{%d}" % max(0, f1 - r) \
            if "a'a''" in str(e) else \
            "product of the first and second classes is not null in F_{%d}" % max(0, f - f2 - r)
        raise BracketUndefined(f"filtered bracket undefined: {which}", product=e.product) from None


def differential_source(A: FilteredDGA, alpha: HomologyClass, r: int) -> HomologyClass:
    """Source of the d_r hitting the E_1 image of ``alpha`` in H(F_f).

    Requires alpha to vanish in H(F_{f-r}); solves dw = alpha with w in
    F_{f-r} and returns the class of w in the window [f-r, f) (one degree up).
    """
    f = alpha.lo
    lo = max(0, f - r)
    grade = _shift(alpha.grade, 1)
    sol = _nullhomotopy(A, alpha.chain, grade, lo)
    if sol is None:
        raise PreconditionError(f"class does not vanish in H(F_{lo})")
    w = sol[0]
    return A.cls(w, lo, f, grade)


# -- serialization -----------------------------------------------------------

def load_dga(source) -> FilteredDGA:
    """Parse the JSON description (path, string, or dict)."""
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if text.lstrip().startswith("{"):
            doc = json.loads(text)
        else:
            with open(text, encoding="utf-8") as fh:
                doc = json.load(fh)
    mod = Modulus(int(doc["modulus"]["p"]), int(doc["modulus"].get("k", 1)))
    gens = []
    for g in doc["generators"]:
        w = g.get("weight")
        w = () if w is None else (tuple(w) if isinstance(w, list) else (int(w),))
        gens.append(Generator(g["name"], int(g["degree"]), int(g["filtration"]), w))
    n = len(gens)
    index = {g.name: i for i, g in enumerate(gens)}
    d = np.zeros((n, n), dtype=np.int64)
    for src, terms in doc.get("d", {}).items():
        for c, tgt in terms:
            d[index[src], index[tgt]] += int(c)
    mult = np.zeros((n, n, n), dtype=np.int64)
    for key, terms in doc.get("mult", {}).items():
        a, b = key.split("*")
        for c, tgt in terms:
            mult[index[a], index[b], index[tgt]] += int(c)
    unit = doc.get("unit")
    if unit is None and "1" in index:
        unit = "1"
    if unit is not None:
        u = index[unit]
        for i in range(n):
            if not mult[u, i].any():
                mult[u, i, i] = 1
            if not mult[i, u].any():
                mult[i, u, i] = 1
    return FilteredDGA(mod, gens, d, mult, unit=unit, length=doc.get("length"), name=doc.get("name", ""))


def dga_to_dict(A: FilteredDGA) -> dict:
    gens = []
    for g in A.generators:
        e = {"name": g.name, "degree": g.degree, "filtration": g.filtration}
        if g.weight:
            e["weight"] = list(g.weight) if len(g.weight) > 1 else g.weight[0]
        gens.append(e)
    d = {}
    for i in range(A.dim):
        terms = [[int(A.d[i, j]), A.names[j]] for j in np.flatnonzero(A.d[i])]
        if terms:
            d[A.names[i]] = terms
    mult = {}
    u = A.index.get(A.unit) if A.unit else None
    for i in range(A.dim):
        for j in range(A.dim):
            if u is not None and (i == u or j == u):
                continue
            terms = [[int(A.mult[i, j, k]), A.names[k]] for k in np.flatnonzero(A.mult[i, j])]
            if terms:
                mult[f"{A.names[i]}*{A.names[j]}"] = terms
    doc = {"modulus": A.modulus.to_json(), "generators": gens, "d": d, "mult": mult}
    if A.unit:
        doc["unit"] = A.unit
    if A.name:
        doc["name"] = A.name
    if A.L != (int(A.fil.max()) + 1 if A.dim else 1):
        doc["length"] = A.L
    return doc


def dump_dga(A: FilteredDGA) -> str:
    return json.dumps(dga_to_dict(A), ensure_ascii=False, indent=1, sort_keys=True) + "\n"


# -- random instances --------------------------------------------------------

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _monomial_product(u: tuple, v: tuple, odd: Sequence[bool]):
    """Graded-commutative product of sorted monomials: (sign, monomial) or None."""
    sign = 1
    for i in u:
        if odd[i]:
            for j in v:
                if odd[j] and j < i:
                    sign = -sign
    w = tuple(sorted(u + v))
    for a, b in zip(w, w[1:]):
        if a == b and odd[a]:
            return None
    return sign, w


def random_instance(seed: int, dim: int = 16, L: int = 4, p: int = 2, k: int = 1,
                    max_tries: int = 200) -> FilteredDGA:
    """A random valid filtered DGA, deterministic in ``seed``.

    Free graded-commutative algebra on a few generators, truncated by word
    length and by F_L; each generator's differential is a random cycle of
    the algebra built so far, so d∘d = 0 and Leibniz hold by construction.
    """
    if not (1 <= dim <= 16):
        raise ValueError("dim must be in [1, 16]")
    if not (1 <= L <= 5):
        raise ValueError("L must be in [1, 5]")
    mod = Modulus(p, k)
    m = mod.m
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, dim, L, p, k]))
    for _ in range(max_tries):
        if rng.random() < 0.5:
            degrees, fils, plan = _massey_plan(rng, L, m)
            ngen = len(degrees)
            W = 2
        else:
            ngen = int(rng.integers(2, 5))
            degrees, fils = _random_degrees(rng, ngen, L)
            plan = {}
            W = int(rng.integers(2, 4))
        odd = [d % 2 == 1 for d in degrees]
        # enumerate monomials of length <= W and filtration < L
        monos = [()]
        frontier = [()]
        for _len in range(W):
            nxt = []
            for mono in frontier:
                start = mono[-1] if mono else 0
                for g in range(start, ngen):
                    if mono and g == mono[-1] and odd[g]:
                        continue
                    new = mono + (g,)
                    if plan and len(new) > 1 and new not in _PLANTED_WORDS:
                        continue
                    if sum(fils[i] for i in new) < L:
                        nxt.append(new)
            monos += nxt
            frontier = nxt
        # keep degree-0 polynomial growth in check
        if len(monos) > dim or len(monos) < 3:
            continue
        pos = {mono: i for i, mono in enumerate(monos)}
        n = len(monos)
        mdeg = [sum(degrees[i] for i in mono) for mono in monos]
        mfil = [sum(fils[i] for i in mono) for mono in monos]
        mult = np.zeros((n, n, n), dtype=np.int64)
        for a, u in enumerate(monos):
            for b, v in enumerate(monos):
                res = _monomial_product(u, v, odd)
                if res is None:
                    continue
                sgn, w = res
                if w in pos:
                    mult[a, b, pos[w]] = sgn % m
        gen_d = {}
        D = np.zeros((n, n), dtype=np.int64)

        def d_of(mono):
            # d(g * rest) = d(g) rest + (-1)^|g| g d(rest)
            if not mono:
                return np.zeros(n, dtype=np.int64)
            g, rest = mono[0], mono[1:]
            dg = gen_d.get(g)
            out = np.zeros(n, dtype=np.int64)
            rvec = np.zeros(n, dtype=np.int64)
            rvec[pos[rest]] = 1
            gvec = np.zeros(n, dtype=np.int64)
            gvec[pos[(g,)]] = 1
            if dg is not None and rest:
                out += _mulv(dg, rvec, mult, m)
            elif dg is not None:
                out += dg
            if rest:
                sgn = 1 if degrees[g] % 2 == 0 else -1
                out += sgn * _mulv(gvec, d_of(rest), mult, m)
            return out % m

        ok = True
        for g in range(ngen):
            if (g,) not in pos:
                ok = False
                break
            gen_d[g] = np.zeros(n, dtype=np.int64)
            if g in plan:
                for c, mono in plan[g]:
                    if mono in pos:
                        gen_d[g][pos[mono]] = c % m
                continue
            if rng.random() < 0.1:
                continue
            cands = [i for i, mono in enumerate(monos)
                     if mono and max(mono) < g and mdeg[i] == degrees[g] - 1 and mfil[i] >= fils[g]]
            if not cands:
                continue
            sub = np.array([d_of(monos[i]) for i in cands]).reshape(len(cands), n)
            cyc = left_kernel(sub, mod) if sub.any() else np.eye(len(cands), dtype=np.int64)
            if not len(cyc):
                continue
            for _attempt in range(4):
                coeffs = rng.integers(0, m, size=len(cyc))
                dg = np.zeros(n, dtype=np.int64)
                for c, z in zip(coeffs, cyc):
                    for ci, i in zip(z, cands):
                        dg[i] += int(c) * int(ci)
                if (dg % m).any():
                    break
            gen_d[g] = dg % m
        if not ok:
            continue
        for i, mono in enumerate(monos):
            D[i] = d_of(mono)
        names = []
        for mono in monos:
            if not mono:
                names.append("1")
                continue
            parts = []
            for g in sorted(set(mono)):
                e = mono.count(g)
                parts.append(_LETTERS[g] + (f"^{e}" if e > 1 else ""))
            names.append("".join(parts))
        gens = [Generator(nm, dg, fl) for nm, dg, fl in zip(names, mdeg, mfil)]
        A = FilteredDGA(mod, gens, D, mult, unit="1", length=L, name=f"random-{seed}")
        if validate(A).ok:
            return A
    raise RuntimeError(f"no valid instance found for seed {seed}")


# words kept in the planted quotient; the complement is an ideal closed under d
_PLANTED_WORDS = frozenset({(0, 1), (1, 2), (0, 2), (2, 3), (0, 4)})


def _massey_plan(rng, L: int, m: int):
    """Cycles x, y, z with du = xy and dv = yz, plus an optional extra generator.

    This is the smallest shape carrying a nonzero bracket <x, y, z>.
    """
    degrees = [int(rng.integers(0, 3)) for _ in range(3)]
    # keep fil(x) + fil(y) + fil(z) < L so the bracket survives truncation
    total = int(rng.integers(0, L))
    cuts = np.sort(rng.integers(0, total + 1, size=2))
    fils = [int(cuts[0]), int(cuts[1] - cuts[0]), int(total - cuts[1])]
    plan = {0: [], 1: [], 2: []}
    for g, (i, j) in ((3, (0, 1)), (4, (1, 2))):
        degrees.append(degrees[i] + degrees[j] + 1)
        ft = fils[i] + fils[j]
        gap = int(rng.choice([1, 1, 2, 2, 3]))
        fils.append(max(0, ft - gap))
        unit = int(rng.integers(1, m))
        while unit % 2 == 0 and m % 2 == 0 or m % 3 == 0 and unit % 3 == 0:
            unit = int(rng.integers(1, m))
        plan[g] = [(unit, (i, j))]
    if rng.random() < 0.4:
        degrees.append(int(rng.integers(0, 4)))
        fils.append(int(rng.integers(0, L)))
    return degrees, fils, plan


def _random_degrees(rng, ngen: int, L: int):
    """Degrees and filtrations, mostly aimed so a generator can hit an earlier monomial."""
    degrees = [int(rng.integers(0, 3))]
    fils = [int(rng.integers(min(1, L - 1), L))]
    for _ in range(1, ngen):
        targets = [(degrees[i], fils[i]) for i in range(len(degrees))]
        targets += [(degrees[i] + degrees[j], fils[i] + fils[j])
                     for i in range(len(degrees)) for j in range(i, len(degrees))
                     if fils[i] + fils[j] < L]
        if rng.random() < 0.75:
            dt, ft = targets[int(rng.integers(0, len(targets)))]
            degrees.append(dt + 1)
            fils.append(int(rng.integers(0, ft)) if ft and rng.random() < 0.85 else ft)
        else:
            degrees.append(int(rng.integers(0, 4)))
            fils.append(int(rng.integers(min(1, L - 1), L)))
    return degrees, fils


def _mulv(x, y, mult, m):
    outer = np.outer(x, y) % m
    n = len(x)
    return (outer.reshape(1, -1) @ mult.reshape(n * n, n))[0] % m
