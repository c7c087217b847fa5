"""Set-valued answers: a representative plus an indeterminacy subgroup."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .linalg import GroupPresentation, Modulus, _echelon, _reduce, rows, span_size


@dataclass(eq=False)
class Coset:
    """``representative + indeterminacy`` inside a finite abelian p-group.

    Coordinates are with respect to ``group``'s cyclic generators.  The
    stored representative is always the lexicographically least element.
    """

    group: GroupPresentation
    representative: np.ndarray
    indeterminacy: np.ndarray
    mod: Modulus
    where: Any = None  # bidegree or window label, for reports
    names: tuple = ()

    def __post_init__(self):
        g = self.group.ngens
        self.indeterminacy = rows(self.indeterminacy, g)
        rels = np.concatenate([self.indeterminacy, rows(self.group.relations(), g)], axis=0) % self.mod.m
        self._piv, _ = _echelon(list(rels), g, self.mod) if g else ([], [])
        self.representative = self._canonical(self.representative)

    def _canonical(self, v) -> np.ndarray:
        v = self.group.reduce(v)
        if not self.group.ngens:
            return v
        rem, _ = _reduce(self._piv, v, self.mod.m)
        return self.group.reduce(rem)

    @property
    def subgroup_rows(self) -> np.ndarray:
        g = self.group.ngens
        return rows([r for _, r, _ in self._piv], g)

    @property
    def indeterminacy_size(self) -> int:
        if not self.group.ngens:
            return 1
        return span_size(self.subgroup_rows, self.mod) // max(1, _relation_size(self.group, self.mod))

    @property
    def strict(self) -> bool:
        return self.indeterminacy_size == 1

    def contains(self, v) -> bool:
        return bool((self._canonical(v) == self.representative).all())

    def elements(self):
        """All elements of the coset as canonical tuples (small groups only)."""
        seen = set()
        gens = [self.group.reduce(r) for r in self.indeterminacy]
        frontier = [self.representative]
        seen.add(tuple(self.representative))
        while frontier:
            nxt = []
            for v in frontier:
                for g in gens:
                    w = self.group.reduce(v + g)
                    t = tuple(w)
                    if t not in seen:
                        seen.add(t)
                        nxt.append(w)
            frontier = nxt
        return seen

    def format(self, names=None) -> str:
        names = names or self.names
        return format_element(self.representative, names)

    def __repr__(self):
        return f"Coset(rep={self.representative.tolist()}, indeterminacy_size={self.indeterminacy_size})"


def _relation_size(group: GroupPresentation, mod: Modulus) -> int:
    # The diagonal relations span the "zero" part of (Z/m)^g.
    size = 1
    for o in group.orders:
        size *= mod.m // o
    return size


def format_element(coords, names) -> str:
    """Render ``sum c_i name_i``; coefficient 1 is omitted, the unit prints as its coefficient."""
    terms = []
    for c, name in zip(np.asarray(coords).tolist(), names):
        if not c:
            continue
        if name in ("1", ""):
            terms.append(str(c))
        elif c == 1:
            terms.append(name)
        else:
            terms.append(f"{c}{name}")
    return " + ".join(terms) if terms else "0"
