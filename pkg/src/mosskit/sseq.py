"""Spectral-sequence pages, cycles and boundaries, and Massey products on pages.

Bidegrees are keys ``(n, f, *w)``: stem, filtration, then any inert auxiliary
gradings.  d_r sends ``(n, f, *w)`` to ``(n - 1, f + r, *w)``.

Every page group is a subquotient ``Z / B`` of a fixed ambient module per
bidegree.  For a filtered DGA the ambient is the chain group of the window
``[f, f+1)``; for a chart it is the free module on the E_1 classes.  Keeping
the ambient fixed lets pages computed along different routes be compared
exactly.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coset import Coset, format_element
from .linalg import (
    Modulus,
    PreconditionError,
    Subquotient,
    howell_rows,
    in_span,
    left_kernel,
    matmul,
    row_solve,
    rows,
    same_span,
    span_size,
)

__all__ = [
    "Page",
    "PageGroup",
    "PageElement",
    "PermanenceStatus",
    "CrossingResult",
    "MasseyUndefined",
    "LeibnizError",
    "DGASource",
    "e1_from_filtered",
    "cycles_Zr",
    "boundaries_Br",
    "er_page",
    "turn_page",
    "ztilde",
    "dr_tilde",
    "massey_on_page",
    "crossing_check",
    "permanent_cycle_status",
    "detects",
    "associated_graded",
    "key_add",
    "parse_element",
    "d_target",
]


class MasseyUndefined(ValueError):
    def __init__(self, message, product=None):
        super().__init__(message)
        self.product = product


class LeibnizError(ValueError):
    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


_TERM = re.compile(r"^(\d*)\s*[·*]?\s*(.*)$")


def parse_element(source, text: str):
    """``(key, ambient vector)`` for a sum of ``coefficient·name`` terms at one bidegree.

    A bare integer is a multiple of the unit.
    """
    key = None
    vec = None
    for term in str(text).split("+"):
        term = term.strip()
        if not term:
            raise ValueError(f"empty term in {text!r}")
        mt = _TERM.match(term)
        coef = int(mt.group(1)) if mt.group(1) else 1
        name = mt.group(2).strip() or getattr(source, "unit_name", "1")
        k, v = source.named_vector(name)
        if key is None:
            key, vec = k, coef * np.asarray(v, dtype=np.int64)
        elif k != key:
            raise ValueError(f"terms of {text!r} live in different bidegrees {key} and {k}")
        else:
            vec = vec + coef * np.asarray(v, dtype=np.int64)
    if key is None:
        raise ValueError("empty element")
    return key, vec % source.mod.m


def key_add(*keys) -> tuple:
    return tuple(int(sum(c)) for c in zip(*keys))


def d_target(key: tuple, r: int) -> tuple:
    return (key[0] - 1, key[1] + r) + tuple(key[2:])


def d_source(key: tuple, r: int) -> tuple:
    return (key[0] + 1, key[1] - r) + tuple(key[2:])


def _grade(key: tuple) -> tuple:
    return (key[0],) + tuple(key[2:])


# -- groups and pages --------------------------------------------------------

class PageGroup:
    """E_r at one bidegree: span(Z) / span(B) in the ambient module."""

    def __init__(self, key, Z, B, mod: Modulus, ambient_names):
        self.key = tuple(key)
        self.mod = mod
        self.ambient_names = tuple(ambient_names)
        a = len(self.ambient_names)
        self.sq = Subquotient(howell_rows(rows(Z, a), mod), howell_rows(rows(B, a), mod), mod, ambient_dim=a)
        self.names = tuple(format_element(g, self.ambient_names) for g in self.sq.gens)
        self.sq.group = type(self.sq.group)(self.sq.group.orders, self.names)

    @property
    def group(self):
        return self.sq.group

    @property
    def orders(self) -> tuple:
        return self.sq.orders

    @property
    def ngens(self) -> int:
        return self.sq.ngens

    @property
    def size(self) -> int:
        return self.sq.size

    @property
    def Z(self):
        return self.sq.Z

    @property
    def B(self):
        return self.sq.B

    @property
    def gens(self):
        return self.sq.gens

    def project(self, v) -> np.ndarray:
        return self.sq.project(np.asarray(v, dtype=np.int64) % self.mod.m)

    def section(self, coords) -> np.ndarray:
        return self.sq.section(coords)

    def relation_rows(self) -> np.ndarray:
        return np.diag(np.asarray(self.orders, dtype=np.int64)).reshape(self.ngens, self.ngens)


@dataclass(eq=False)
class PageElement:
    page: "Page"
    key: tuple
    coords: np.ndarray

    @property
    def stem(self) -> int:
        return self.key[0]

    @property
    def filtration(self) -> int:
        return self.key[1]

    @property
    def group(self) -> Optional[PageGroup]:
        return self.page.groups.get(self.key)

    def ambient(self) -> np.ndarray:
        g = self.group
        if g is None:
            return np.zeros(0, dtype=np.int64)
        return g.section(self.coords)

    def is_zero(self) -> bool:
        return not np.asarray(self.coords).any()

    def format(self) -> str:
        g = self.group
        if g is None or self.is_zero():
            return "0"
        return format_element(g.section(self.coords), g.ambient_names)

    def __eq__(self, other):
        if not isinstance(other, PageElement):
            return NotImplemented
        return self.key == other.key and bool((np.asarray(self.coords) == np.asarray(other.coords)).all())

    def __repr__(self):
        return f"PageElement(E_{self.page.r}{self.key}, {self.format()})"


class Page:
    """One page E_r with its differential and pairing.

    ``differentials[key]`` has one row per generator of the group at key and
    one column per generator at ``d_target(key, r)``; it is ``None`` when the
    source cannot determine d_r (a chart past its completeness bound).
    """

    def __init__(self, r: int, source, groups: dict, route: str = "direct"):
        self.r = r
        self.source = source
        self.mod = source.mod
        self.groups = groups
        self.route = route
        self.differentials = {}
        self.known = True
        for key, G in groups.items():
            M = source.page_differential(self, key)
            if M is None:
                self.known = False
            self.differentials[key] = M
        self._next = None

    # access
    def keys(self):
        return sorted(self.groups)

    def nonzero_keys(self):
        return [k for k in self.keys() if self.groups[k].ngens]

    def group(self, key) -> Optional[PageGroup]:
        return self.groups.get(tuple(key))

    def element(self, key, coords=None) -> PageElement:
        key = tuple(key)
        g = self.groups.get(key)
        n = g.ngens if g else 0
        c = np.zeros(n, dtype=np.int64) if coords is None else np.asarray(coords, dtype=np.int64)
        if g is not None:
            c = g.group.reduce(c)
        return PageElement(self, key, c)

    def from_ambient(self, key, v) -> PageElement:
        key = tuple(key)
        g = self.groups.get(key)
        if g is None:
            return self.element(key)
        return PageElement(self, key, g.project(v))

    def named(self, text: str) -> PageElement:
        """Parse ``"2τ² + ρ"``-style text: integer coefficients times ambient names."""
        key, v = parse_element(self.source, text)
        return self.from_ambient(key, v)

    def generators(self, key):
        g = self.groups.get(tuple(key))
        if g is None:
            return []
        return [self.element(key, np.eye(g.ngens, dtype=np.int64)[i]) for i in range(g.ngens)]

    # differential
    def d(self, x: PageElement) -> PageElement:
        tk = d_target(x.key, self.r)
        M = self.differentials.get(x.key)
        if M is None:
            if x.key not in self.groups:
                return self.element(tk)
            raise PreconditionError(f"d_{self.r} is not known at {x.key}")
        tg = self.groups.get(tk)
        if tg is None or not tg.ngens or x.group is None or not x.group.ngens:
            return self.element(tk)
        return self.element(tk, matmul(np.asarray(x.coords).reshape(1, -1), M, self.mod.m)[0])

    # product
    def mul(self, x: PageElement, y: PageElement) -> PageElement:
        k = key_add(x.key, y.key)
        if x.is_zero() or y.is_zero():
            return self.element(k)
        res = self.source.ambient_product(x.key, x.ambient(), y.key, y.ambient())
        if res is None:
            return self.element(k)
        return self.from_ambient(k, res)

    def add(self, *terms) -> PageElement:
        """Linear combination of ``(coeff, element)`` pairs at one bidegree."""
        key = terms[0][1].key
        tot = None
        for c, e in terms:
            if e.key != key:
                raise ValueError("elements live in different bidegrees")
            tot = c * np.asarray(e.coords) if tot is None else tot + c * np.asarray(e.coords)
        return self.element(key, tot % self.mod.m)

    def turn(self, check_leibniz: bool = True) -> "Page":
        if self._next is None:
            self._next = turn_page(self, check_leibniz=check_leibniz)
        return self._next

    # checks
    def check_dd(self) -> list:
        bad = []
        for k, M in self.differentials.items():
            t = d_target(k, self.r)
            M2 = self.differentials.get(t)
            if M is None or M2 is None or not M.size or not M2.size:
                continue
            prod = matmul(M, M2, self.mod.m)
            tg = self.groups[d_target(t, self.r)]
            for row in prod:
                if tg.group.reduce(row).any():
                    bad.append(k)
                    break
        return bad

    def leibniz_failures(self, limit: Optional[int] = None) -> list:
        """Generator pairs violating d(xy) = d(x)y + (-1)^|x| x d(y)."""
        bad = []
        if not self.source.has_pairing:
            return bad
        keys = self.nonzero_keys()
        present = set(self.groups)
        m = self.mod.m
        for k1 in keys:
            for k2 in keys:
                k3 = key_add(k1, k2)
                t3 = d_target(k3, self.r)
                if k3 not in present and t3 not in present:
                    continue
                for x in self.generators(k1):
                    dx = self.d(x)
                    for y in self.generators(k2):
                        dy = self.d(y)
                        s = 1 if k1[0] % 2 == 0 else m - 1
                        try:
                            lhs = self.d(self.mul(x, y))
                            r1 = self.mul(dx, y)
                            r2 = self.mul(x, dy)
                        except PreconditionError:
                            continue  # product not known to the source
                        if r1.key != lhs.key or r2.key != lhs.key:
                            continue
                        rhs = self.add((1, r1), (s, r2))
                        if not lhs == rhs:
                            bad.append((x.format(), k1, y.format(), k2))
                            if limit and len(bad) >= limit:
                                return bad
        return bad

    # export
    def to_json(self) -> dict:
        groups = []
        diffs = []
        for k in self.nonzero_keys():
            g = self.groups[k]
            entry = {"n": k[0], "f": k[1], "orders": list(g.orders), "names": list(g.names)}
            if len(k) > 2:
                entry["w"] = list(k[2:])
            groups.append(entry)
            M = self.differentials.get(k)
            tk = d_target(k, self.r)
            tg = self.groups.get(tk)
            if M is None:
                diffs.append({"source": [k[0], k[1]], "known": False})
                continue
            if tg is None or not tg.ngens:
                continue
            for i, row in enumerate(M):
                if row.any():
                    diffs.append({"source": g.names[i], "target": format_element(row, tg.names),
                                  "at": [k[0], k[1]]})
        pairing = []
        if self.source.has_pairing:
            keys = self.nonzero_keys()
            for k1 in keys:
                for k2 in keys:
                    k3 = key_add(k1, k2)
                    if k3 not in self.groups or not self.groups[k3].ngens:
                        continue
                    for x in self.generators(k1):
                        for y in self.generators(k2):
                            try:
                                z = self.mul(x, y)
                            except PreconditionError:
                                continue
                            if not z.is_zero():
                                pairing.append({"a": x.format(), "b": y.format(), "product": z.format()})
        ct = self.source.complete_through
        return {
            "r": self.r,
            "groups": groups,
            "differentials": diffs,
            "pairing": pairing,
            "complete_through": "inf" if ct is None else ct,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=1) + "\n"

    def __repr__(self):
        return f"Page(r={self.r}, {len(self.nonzero_keys())} nonzero bidegrees)"


def same_page(P: Page, Q: Page) -> list:
    """Differences between two pages over the same source; empty when identical."""
    diffs = []
    if P.r != Q.r:
        diffs.append(("r", P.r, Q.r))
    keys = set(P.nonzero_keys()) | set(Q.nonzero_keys())
    mod = P.mod
    for k in sorted(keys):
        g, h = P.groups.get(k), Q.groups.get(k)
        if g is None or h is None:
            diffs.append(("missing", k))
            continue
        if g.orders != h.orders:
            diffs.append(("orders", k, g.orders, h.orders))
            continue
        if not same_span(g.Z, h.Z, mod) or not same_span(g.B, h.B, mod):
            diffs.append(("span", k))
            continue
        M, N = P.differentials.get(k), Q.differentials.get(k)
        if M is None or N is None:
            if (M is None) != (N is None):
                diffs.append(("known", k))
            continue
        if M.shape != N.shape or (M % mod.m != N % mod.m).any():
            diffs.append(("differential", k, M.tolist(), N.tolist()))
    return diffs


# -- permanence and crossing results -----------------------------------------

@dataclass
class PermanenceStatus:
    """``permanent``, ``dies`` (with page and witness) or ``unknown``."""

    kind: str
    page: Optional[int] = None
    witness: str = ""
    reason: str = ""
    element: str = ""

    @property
    def permanent(self) -> bool:
        return self.kind == "permanent"

    def __str__(self):
        if self.kind == "permanent":
            return "permanent" + (f" ({self.reason})" if self.reason else "")
        if self.kind == "dies":
            return f"dies(page {self.page}: {self.witness})"
        return f"unknown(needs page {self.page}" + (f": {self.reason}" if self.reason else "") + ")"


@dataclass
class CrossingResult:
    status: str                     # holds | fails | unknown
    key: tuple
    r: int
    vacuous: bool = False
    witness: str = ""
    differential: str = ""
    checked: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    def __str__(self):
        if self.status == "holds":
            return "holds (vacuous)" if self.vacuous else "holds"
        if self.status == "fails":
            return f"fails: {self.witness} supports {self.differential}"
        return f"unknown: {self.witness}"


# -- the filtered-DGA source -------------------------------------------------

class DGASource:
    """Pages of the spectral sequence of a :class:`~mosskit.dga.FilteredDGA`.

    All chain-level solving happens here.  Two lifting procedures are
    available for d_r: lifting a class of E_1 to a cycle of the window
    ``X_{f,r}`` and applying the connecting map ("window"), or lifting it to
    any chain of ``F_f`` whose boundary lies in ``F_{f+r}`` ("classical").
    """

    has_pairing = True
    complete_through = None

    def __init__(self, A):
        self.A = A
        self.unit_name = A.unit or "1"
        self.mod = A.modulus
        self.m = A.m
        self._by_grade = {}
        for i, g in enumerate(A.grades):
            self._by_grade.setdefault(g, []).append(i)
        self._by_grade = {g: np.array(v, dtype=np.int64) for g, v in self._by_grade.items()}
        self._cache = {}
        keys = set()
        for i, g in enumerate(A.grades):
            keys.add((g[0], int(A.fil[i])) + tuple(g[1:]))
        self.all_keys = sorted(keys)

    # index helpers
    def sel(self, grade, lo, hi=None) -> np.ndarray:
        idx = self._by_grade.get(tuple(grade))
        if idx is None:
            return np.zeros(0, dtype=np.int64)
        f = self.A.fil[idx]
        mask = f >= lo
        if hi is not None:
            mask &= f < hi
        return idx[mask]

    def ambient_index(self, key) -> np.ndarray:
        return self.sel(_grade(key), key[1], key[1] + 1)

    def ambient_names(self, key):
        return [self.A.names[i] for i in self.ambient_index(key)]

    def named_vector(self, name):
        if name not in self.A.index:
            raise KeyError(f"no basis element named {name!r}")
        i = self.A.index[name]
        key = (int(self.A.deg[i]), int(self.A.fil[i])) + tuple(self.A.grades[i][1:])
        idx = list(self.ambient_index(key))
        v = np.zeros(len(idx), dtype=np.int64)
        v[idx.index(i)] = 1
        return key, v

    def _dsub(self, rows_idx, cols_idx) -> np.ndarray:
        return self.A.d[np.ix_(rows_idx, cols_idx)]

    def _restrict_rows(self, vecs, var_idx, key) -> np.ndarray:
        """Columns of ``vecs`` (indexed by var_idx) lying in the ambient of key."""
        amb = self.ambient_index(key)
        pos = {int(j): t for t, j in enumerate(var_idx)}
        cols = [pos[int(j)] for j in amb]
        return rows(vecs, len(var_idx))[:, cols] if len(cols) else np.zeros((rows(vecs, len(var_idx)).shape[0], 0), dtype=np.int64)

    # cycles and boundaries
    def cycles(self, key, r: Optional[int], truncated: bool = True) -> np.ndarray:
        """Ambient restrictions of chains x in F_f with dx in F_{f+r}.

        ``truncated`` restricts x to the window [f, f+r) (cycles of X_{f,r});
        otherwise x ranges over all of F_f.  r=None gives global cycles of F_f.
        """
        ck = ("Z", key, r, truncated)
        if ck in self._cache:
            return self._cache[ck]
        g, f = _grade(key), key[1]
        hi = None if (r is None or not truncated) else f + r
        var = self.sel(g, f, hi)
        cols = self.sel((g[0] - 1,) + g[1:], f, None if r is None else f + r)
        amb = self.ambient_index(key)
        if not len(amb):
            out = np.zeros((0, 0), dtype=np.int64)
        else:
            K = left_kernel(self._dsub(var, cols), self.mod) if len(cols) else np.eye(len(var), dtype=np.int64)
            out = howell_rows(self._restrict_rows(K, var, key), self.mod) if len(K) else np.zeros((0, len(amb)), dtype=np.int64)
        self._cache[ck] = out
        return out

    def boundaries(self, key, r: Optional[int], literal: bool = False) -> np.ndarray:
        """Ambient restrictions of dy with y in F_{f-r+1} and dy in F_f.

        The lower index is clamped at 0; r=None means y ranges over all chains.
        With ``literal`` the group is declared 0 whenever f < r - 1.
        """
        ck = ("B", key, r, literal)
        if ck in self._cache:
            return self._cache[ck]
        g, f = _grade(key), key[1]
        amb = self.ambient_index(key)
        a = len(amb)
        if literal and r is not None and f < r - 1:
            out = np.zeros((0, a), dtype=np.int64)
        else:
            lo = 0 if r is None else max(0, f - r + 1)
            var = self.sel((g[0] + 1,) + g[1:], lo)
            cols = self.sel(g, lo, f)
            if not len(var) or not a:
                out = np.zeros((0, a), dtype=np.int64)
            else:
                K = left_kernel(self._dsub(var, cols), self.mod) if len(cols) else np.eye(len(var), dtype=np.int64)
                if not len(K):
                    out = np.zeros((0, a), dtype=np.int64)
                else:
                    dy = matmul(K, self._dsub(var, amb), self.m)
                    out = howell_rows(dy, self.mod)
        self._cache[ck] = out
        return out

    def e1(self, key):
        return self.cycles(key, 1), self.boundaries(key, 1)

    # differentials
    def lift(self, key, v, r: int, truncated: bool = True) -> Optional[np.ndarray]:
        """Global chain x in F_f restricting to v with dx in F_{f+r}, or None."""
        g, f = _grade(key), key[1]
        amb = self.ambient_index(key)
        hi = f + r if truncated else None
        var = self.sel(g, f + 1, hi)
        cols = self.sel((g[0] - 1,) + g[1:], f, f + r)
        x = np.zeros(self.A.dim, dtype=np.int64)
        x[amb] = v
        if not len(cols):
            return x
        target = (-matmul(x.reshape(1, -1), self.A.d, self.m)[0][cols]) % self.m
        if not len(var):
            return x if not target.any() else None
        sol = row_solve(self._dsub(var, cols), target, self.mod)
        if sol is None:
            return None
        x[var] = (x[var] + sol[0]) % self.m
        return x

    def differential(self, key, v, r: int, truncated: bool = True) -> np.ndarray:
        """Ambient vector of d_r(v) at d_target(key, r)."""
        x = self.lift(key, v, r, truncated)
        if x is None:
            raise PreconditionError(f"class at {key} does not survive to E_{r}")
        dx = matmul(x.reshape(1, -1), self.A.d, self.m)[0]
        return dx[self.ambient_index(d_target(key, r))]

    def page_differential(self, page: Page, key) -> np.ndarray:
        G = page.groups[key]
        tk = d_target(key, page.r)
        tg = page.groups.get(tk)
        if tg is None:
            return np.zeros((G.ngens, 0), dtype=np.int64)
        truncated = page.route != "turned"
        out = np.zeros((G.ngens, tg.ngens), dtype=np.int64)
        for i, gen in enumerate(G.gens):
            out[i] = tg.project(self.differential(key, gen, page.r, truncated))
        return out

    # product
    def ambient_product(self, k1, v1, k2, v2) -> Optional[np.ndarray]:
        A = self.A
        x = np.zeros(A.dim, dtype=np.int64)
        y = np.zeros(A.dim, dtype=np.int64)
        x[self.ambient_index(k1)] = v1
        y[self.ambient_index(k2)] = v2
        k3 = key_add(k1, k2)
        return A.mul(x, y)[self.ambient_index(k3)]

    # permanence
    def survives_to(self, key, v) -> Optional[int]:
        """Largest R with v in Z_R (None if v is a permanent cycle)."""
        if in_span(self.cycles(key, None), v, self.mod):
            return None
        R = 1
        while in_span(self.cycles(key, R + 1), v, self.mod):
            R += 1
        return R

    def permanence(self, key, v, page_r: int = 1, detections: bool = True) -> PermanenceStatus:
        R = self.survives_to(key, v)
        if R is None:
            return PermanenceStatus("permanent", reason="lifts to a cycle of F_f")
        tk = d_target(key, R)
        tgt = self.differential(key, v, R)
        P = er_page(self.A, R)
        tg = P.groups.get(tk)
        tname = format_element(tg.section(tg.project(tgt)), tg.ambient_names) if tg else "0"
        src = format_element(v, self.ambient_names(key))
        return PermanenceStatus("dies", page=R, witness=f"d_{R}({src}) = {tname}", reason="supports", element=src)

    def group_known(self, key) -> bool:
        return True

    def detects(self, key, v):
        return None


def _source(obj):
    if hasattr(obj, "page_differential"):
        return obj
    if hasattr(obj, "source") and hasattr(obj.source, "page_differential"):
        return obj.source
    if hasattr(obj, "as_source"):
        return obj.as_source()
    from .dga import FilteredDGA

    if isinstance(obj, FilteredDGA):
        cache = getattr(obj, "_sseq_source", None)
        if cache is None:
            cache = DGASource(obj)
            obj._sseq_source = cache
        return cache
    raise TypeError(f"cannot build a spectral sequence from {type(obj).__name__}")


# -- public operations -------------------------------------------------------

def _build(source, r, ZB: dict, route) -> Page:
    groups = {}
    for key, (Z, B) in ZB.items():
        names = source.ambient_names(key)
        if not len(names):
            continue
        groups[key] = PageGroup(key, Z, B, source.mod, names)
    return Page(r, source, groups, route=route)


def e1_from_filtered(A) -> Page:
    """E_1 from the associated graded of A (or of a chart)."""
    S = _source(A)
    cache = getattr(S, "_pages", None)
    if cache is None:
        cache = S._pages = {}
    if 1 not in cache:
        cache[1] = _build(S, 1, {k: S.e1(k) for k in S.all_keys}, route="direct")
    return cache[1]


def cycles_Zr(A, key, r: int, method: str = "window") -> np.ndarray:
    """Z_r at a bidegree as ambient chain rows (E_1 classes that survive to E_r).

    ``method="window"``: restrictions of cycles of X_{f,r} (classes lifting
    to H(X_{f,r})).  ``method="kappa"``: classes whose connecting image in
    H(F_{f+1}) lifts to H(F_{f+r}), i.e. restrictions of chains of F_f with
    boundary in F_{f+r}.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    S = _source(A)
    key = tuple(key)
    if method == "window":
        Z = S.cycles(key, r, truncated=True)
    elif method == "kappa":
        Z = S.cycles(key, r, truncated=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    return howell_rows(np.concatenate([rows(Z, len(S.ambient_index(key))), S.boundaries(key, 1)]), S.mod) \
        if len(S.ambient_index(key)) else Z


def boundaries_Br(A, key, r: int, literal: bool = False) -> np.ndarray:
    """B_r at a bidegree as ambient chain rows.

    Classes lifting to H(F_f) elements that vanish in H(F_{f-r+1}), with the
    index clamped at 0.  ``literal=True`` instead returns 0 for f < r - 1.
    Rows include the d_0-boundaries, which are 0 in E_1.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    S = _source(A)
    key = tuple(key)
    B = S.boundaries(key, r, literal=literal)
    if literal and key[1] < r - 1:
        return howell_rows(np.concatenate([B, S.boundaries(key, 1)]), S.mod) if B.shape[1] else B
    return B


def er_page(A, r: int) -> Page:
    """E_r = Z_r / B_r computed directly, with d_r from the window lift."""
    if r < 1:
        raise ValueError("r must be >= 1")
    S = _source(A)
    if not isinstance(S, DGASource):
        P = e1_from_filtered(A)
        for _ in range(r - 1):
            P = P.turn()
        return P
    cache = getattr(S, "_er", None)
    if cache is None:
        cache = S._er = {}
    if r not in cache:
        ZB = {k: (S.cycles(k, r, truncated=True), S.boundaries(k, r)) for k in S.all_keys}
        cache[r] = _build(S, r, ZB, route="direct")
    return cache[r]


def turn_page(P: Page, check_leibniz: bool = True) -> Page:
    """E_{r+1} = ker d_r / im d_r, with groups re-presented canonically."""
    S = P.source
    if not P.known:
        unknown = [k for k, M in P.differentials.items() if M is None]
        raise PreconditionError(f"d_{P.r} is not known at {unknown[:3]}; cannot turn the page")
    bad = P.check_dd()
    if bad:
        raise PreconditionError(f"d_{P.r}∘d_{P.r} ≠ 0 at {bad}")
    if check_leibniz:
        fails = P.leibniz_failures(limit=5)
        if fails:
            raise LeibnizError(f"Leibniz rule fails on E_{P.r}: {fails}", fails)
    m = P.mod.m
    ZB = {}
    for key, G in P.groups.items():
        a = len(G.ambient_names)
        M = P.differentials[key]
        tg = P.groups.get(d_target(key, P.r))
        if G.ngens == 0:
            kern = np.zeros((0, 0), dtype=np.int64)
        elif tg is None or not tg.ngens:
            kern = np.eye(G.ngens, dtype=np.int64)
        else:
            stacked = np.concatenate([M, tg.relation_rows()], axis=0)
            K = left_kernel(stacked, P.mod)
            kern = K[:, :G.ngens] if len(K) else np.zeros((0, G.ngens), dtype=np.int64)
        Zlift = matmul(kern, G.gens, m) if len(kern) and G.ngens else np.zeros((0, a), dtype=np.int64)
        sk = d_source(key, P.r)
        sg = P.groups.get(sk)
        if sg is not None and sg.ngens and G.ngens:
            im = matmul(P.differentials[sk], G.gens, m)
        else:
            im = np.zeros((0, a), dtype=np.int64)
        Znew = np.concatenate([rows(Zlift, a), G.B])
        Bnew = np.concatenate([G.B, rows(im, a)])
        ZB[key] = (Znew, Bnew)
    return _build(S, P.r + 1, ZB, route="turned")


def ztilde(A, key, r: int):
    """Z̃_r = coker(H(X_{f+1,r-1}) -> H(X_{f,r})) and its map to E_1.

    Returns ``(sq, window_index, iso)``: ``sq`` presents Z̃_r on chains of the
    window [f, f+r) (local coordinates ``window_index``), and ``iso`` has one
    row per generator giving its image in the E_1 group coordinates.
    """
    S = _source(A)
    key = tuple(key)
    g, f = _grade(key), key[1]
    win = S.sel(g, f, f + r)
    below = S.sel((g[0] - 1,) + g[1:], f, f + r)
    above = S.sel((g[0] + 1,) + g[1:], f, f + r)
    n = len(win)
    cyc = left_kernel(S._dsub(win, below), S.mod) if len(below) else np.eye(n, dtype=np.int64)
    bnd = S._dsub(above, win) if len(above) else np.zeros((0, n), dtype=np.int64)
    sub = (S.A.fil[win] >= f + 1)
    cyc_sub_full = left_kernel(S._dsub(win[sub], below[S.A.fil[below] >= f + 1]), S.mod) \
        if sub.any() and (S.A.fil[below] >= f + 1).any() else np.eye(int(sub.sum()), dtype=np.int64)
    cyc_sub = np.zeros((cyc_sub_full.shape[0], n), dtype=np.int64)
    if cyc_sub_full.size:
        cyc_sub[:, np.flatnonzero(sub)] = cyc_sub_full
    sq = Subquotient(rows(cyc, n), np.concatenate([rows(bnd, n), cyc_sub]), S.mod, ambient_dim=n)
    E1 = e1_from_filtered(A)
    G = E1.groups.get(key)
    amb_pos = [int(np.flatnonzero(win == j)[0]) for j in S.ambient_index(key)]
    iso = np.array([G.project(gen[amb_pos]) for gen in sq.gens]).reshape(sq.ngens, G.ngens if G else 0) \
        if G is not None else np.zeros((sq.ngens, 0), dtype=np.int64)
    return sq, win, iso


def dr_tilde(A, key, r: int, chain) -> np.ndarray:
    """p∘κ on a cycle of X_{f,r}: the window-[f+r, f+2r) part of its boundary.

    ``chain`` is a global chain supported in [f, f+r); the result is a global
    chain supported in [f+r, f+2r).
    """
    from .dga import FilteredDGA  # noqa: F401

    S = _source(A)
    f = key[1]
    x = S.A.restrict(chain, f, f + r)
    dx = S.A.differential(x)
    if S.A.restrict(dx, f, f + r).any():
        raise PreconditionError("chain is not a cycle of the window")
    return S.A.restrict(dx, f + r, f + 2 * r)


# -- Massey products ---------------------------------------------------------

def _solve_d(P: Page, key, target: PageElement):
    """All b at key with d_r(b) = target: (b0 coords, kernel coords) or None."""
    G = P.groups.get(key)
    if G is None or not G.ngens:
        if target.is_zero():
            return np.zeros(0, dtype=np.int64), np.zeros((0, 0), dtype=np.int64)
        return None
    M = P.differentials.get(key)
    if M is None:
        raise PreconditionError(f"d_{P.r} unknown at {key}")
    tg = P.groups.get(target.key)
    if tg is None or not tg.ngens:
        return np.zeros(G.ngens, dtype=np.int64), np.eye(G.ngens, dtype=np.int64)
    stacked = np.concatenate([M, tg.relation_rows()], axis=0)
    sol = row_solve(stacked, target.coords, P.mod)
    if sol is None:
        return None
    c0, K = sol
    K = rows(K, stacked.shape[0])[:, :G.ngens]
    return G.group.reduce(c0[:G.ngens]), K


def massey_on_page(P: Page, a: PageElement, a2: PageElement, a3: PageElement) -> Coset:
    """<a, a', a''> in E_{r+1} from inputs on E_r.

    The set {a b' - (-1)^|a| b a'' : d_r b' = a'a'', d_r b = a a'} as a coset of
    a·E_{r+1} + E_{r+1}·a''.
    """
    r, m = P.r, P.mod.m
    for x in (a, a2, a3):
        if not P.d(x).is_zero():
            raise PreconditionError(f"{x.format()} is not a d_{r}-cycle")
    p12 = P.mul(a, a2)
    p23 = P.mul(a2, a3)
    kb = d_source(p12.key, r)
    kb2 = d_source(p23.key, r)
    s12 = _solve_d(P, kb, p12)
    if s12 is None:
        raise MasseyUndefined(f"product {a.format()}·{a2.format()} = {p12.format()} is not hit by d_{r}", p12)
    s23 = _solve_d(P, kb2, p23)
    if s23 is None:
        raise MasseyUndefined(f"product {a2.format()}·{a3.format()} = {p23.format()} is not hit by d_{r}", p23)
    b0, Kb = s12
    b20, Kb2 = s23
    Q = P.turn(check_leibniz=False)
    ko = key_add(a.key, a2.key, a3.key)
    ko = (ko[0] + 1, ko[1] - r) + tuple(ko[2:])
    sign = 1 if a.stem % 2 == 0 else m - 1

    def combo(bc, b2c):
        t1 = P.mul(a, P.element(kb2, b2c))
        t2 = P.mul(P.element(kb, bc), a3)
        return _to_next(P, Q, ko, (t1.coords if t1.key == ko else None), (t2.coords if t2.key == ko else None), sign)

    rep = combo(b0, b20)
    ind = [combo(np.zeros_like(b0), k) for k in Kb2] + [_neg(combo(k, np.zeros_like(b20)), m) for k in Kb]
    G = Q.groups.get(ko)
    group = G.group if G is not None else _empty_group()
    coset = Coset(group, rep, rows(ind, group.ngens), P.mod, where=ko, names=group.names)
    coset.page = Q
    coset.key = ko
    coset.inputs = (a.format(), a2.format(), a3.format())
    return coset


def _neg(v, m):
    return (-np.asarray(v)) % m


def _empty_group():
    from .linalg import GroupPresentation

    return GroupPresentation((), ())


def _to_next(P: Page, Q: Page, ko, c1, c2, sign) -> np.ndarray:
    """Project (c1 - sign*c2), coordinates on E_r at ko, into E_{r+1}."""
    G = P.groups.get(ko)
    H = Q.groups.get(ko)
    if G is None or H is None or not H.ngens:
        return np.zeros(H.ngens if H is not None else 0, dtype=np.int64)
    tot = np.zeros(G.ngens, dtype=np.int64)
    if c1 is not None:
        tot = tot + c1
    if c2 is not None:
        tot = tot - sign * c2
    return H.project(G.section(tot % P.mod.m))


def massey_enumerate(P: Page, a: PageElement, a2: PageElement, a3: PageElement, limit: int = 1 << 12) -> set:
    """Brute-force <a, a', a''>: every pair (b, b') enumerated."""
    r, m = P.r, P.mod.m
    p12, p23 = P.mul(a, a2), P.mul(a2, a3)
    kb, kb2 = d_source(p12.key, r), d_source(p23.key, r)
    Q = P.turn(check_leibniz=False)
    ko = key_add(a.key, a2.key, a3.key)
    ko = (ko[0] + 1, ko[1] - r) + tuple(ko[2:])
    sign = 1 if a.stem % 2 == 0 else m - 1

    def sols(key, target):
        G = P.groups.get(key)
        if G is None or not G.ngens:
            return [np.zeros(0, dtype=np.int64)] if target.is_zero() else []
        out = []
        for c in G.group.elements():
            if P.d(P.element(key, c)) == target:
                out.append(c)
        return out

    Gb, Gb2 = P.groups.get(kb), P.groups.get(kb2)
    space = (Gb.size if Gb else 1) * (Gb2.size if Gb2 else 1)
    if space > limit:
        raise ValueError(f"solution space {space} exceeds {limit}")
    B, B2 = sols(kb, p12), sols(kb2, p23)
    if not B or not B2:
        raise MasseyUndefined("bracket undefined")
    out = set()
    for b in B:
        for b2 in B2:
            t1 = P.mul(a, P.element(kb2, b2))
            t2 = P.mul(P.element(kb, b), a3)
            v = _to_next(P, Q, ko, t1.coords if t1.key == ko else None, t2.coords if t2.key == ko else None, sign)
            out.add(tuple(int(x) for x in v))
    return out


# -- permanence and crossing -------------------------------------------------

def permanent_cycle_status(C, x: PageElement) -> PermanenceStatus:
    """Three-valued permanence of a page element."""
    S = _source(C)
    if x.is_zero():
        return PermanenceStatus("permanent", reason="zero")
    return S.permanence(x.key, x.ambient(), x.page.r)


def detects(C, x: PageElement):
    """The homotopy class named by a convergence annotation on x, if any."""
    S = _source(C)
    return S.detects(x.key, x.ambient())


def crossing_check(C, key, r: int) -> CrossingResult:
    """Crossing-differential hypothesis at the E_r-page in degree ``key``.

    Every element of E^{n+1,m}_{f-m+1} must be a permanent cycle for
    0 <= m <= f-r-1.  ``r = 0`` gives the E_1-variant ranges.
    """
    S = _source(C)
    key = tuple(key)
    n, f = key[0], key[1]
    ms = list(range(0, f - r))
    if not ms:
        return CrossingResult("holds", key, r, vacuous=True)
    res = CrossingResult("holds", key, r)
    all_empty = True
    for mm in ms:
        k = (n + 1, mm) + tuple(key[2:])
        R = f - mm + 1
        status = S.crossing_degree(k, R) if hasattr(S, "crossing_degree") else _dga_crossing_degree(S, k, R)
        res.checked.append((k, R, str(status)))
        if status.kind == "dies":
            return CrossingResult("fails", key, r, witness=status.element or status.witness,
                                  differential=status.witness, checked=res.checked)
        if status.kind == "unknown":
            res.status = "unknown"
            res.witness = status.reason or f"E_{R} at {k}"
        if status.reason != "empty":
            all_empty = False
    res.vacuous = all_empty and res.status == "holds"
    return res


def _dga_crossing_degree(S: DGASource, key, R: int) -> PermanenceStatus:
    amb = S.ambient_index(key)
    if not len(amb):
        return PermanenceStatus("permanent", reason="empty")
    ZR = S.cycles(key, R)
    Zinf = S.cycles(key, None)
    for z in ZR:
        if not in_span(Zinf, z, S.mod):
            return S.permanence(key, z, R)
    return PermanenceStatus("permanent", reason="Z_R ⊆ Z_∞")


# -- associated graded -------------------------------------------------------

def associated_graded(A):
    """gr A as a DGA graded additionally by filtration (last weight slot)."""
    from .dga import FilteredDGA, Generator

    gens = [Generator(g.name, g.degree, g.filtration, tuple(g.weight) + (g.filtration,)) for g in A.generators]
    fil = A.fil
    d = A.d * (fil[:, None] == fil[None, :])
    mult = A.mult * (fil[:, None, None] + fil[None, :, None] == fil[None, None, :])
    return FilteredDGA(A.modulus, gens, d, mult, unit=A.unit, length=A.L, name=(A.name + ":gr") if A.name else "gr")
