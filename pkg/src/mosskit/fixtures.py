"""Named fixtures: the slice chart fragment, the HZ/2^n bracket model, and the d(y) = x² toy.

The JSON files under ``data/`` are what ships; the builders here regenerate
the two DGA fixtures and are checked against those files by the tests.
"""
from __future__ import annotations

from importlib import resources
from itertools import product as iproduct
from pathlib import Path

import numpy as np

from .dga import FilteredDGA, Generator, dga_to_dict
from .linalg import Modulus

FIXTURES = {
    "slice-fragment": "slice-fragment.json",
    "hz2n": "hz2n.json",
    "toy-dga": "toy-dga.json",
}

_SUP = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return Path(str(resources.files("mosskit") / "data" / FIXTURES[name]))


def fixtures() -> dict:
    """Every shipped fixture, parsed: chart documents and filtered DGAs by name."""
    from .chart import load_any

    return {name: load_any(str(fixture_path(name))) for name in FIXTURES}


def _word_name(word, names) -> str:
    if not word:
        return "1"
    out = []
    i = 0
    while i < len(word):
        j = i
        while j < len(word) and word[j] == word[i]:
            j += 1
        run = j - i
        out.append(names[word[i]] + (str(run).translate(_SUP) if run > 1 else ""))
        i = j
    return "".join(out)


def free_associative(mod: Modulus, gens, d_gens: dict, max_len: int, length: int, name: str = "") -> FilteredDGA:
    """Truncated free associative DGA on ``gens``.

    ``gens`` lists ``(name, degree, filtration, weight)``; ``d_gens`` maps a
    generator name to ``[(coefficient, word), ...]`` with words as tuples of
    generator names.  Words longer than ``max_len`` or of filtration at least
    ``length`` are set to zero; both are ideals closed under d as long as d
    does not lower word length or filtration.
    """
    names = [g[0] for g in gens]
    gi = {n: i for i, n in enumerate(names)}
    deg = [g[1] for g in gens]
    fil = [g[2] for g in gens]
    wt = [tuple(g[3]) for g in gens]
    nw = len(wt[0]) if wt else 0
    words = [()]
    for ln in range(1, max_len + 1):
        for w in iproduct(range(len(gens)), repeat=ln):
            if sum(fil[i] for i in w) < length:
                words.append(w)
    pos = {w: i for i, w in enumerate(words)}
    n = len(words)
    m = mod.m
    basis = []
    for w in words:
        weight = tuple(sum(wt[i][t] for i in w) for t in range(nw))
        basis.append(Generator(_word_name(w, names), sum(deg[i] for i in w), sum(fil[i] for i in w), weight))
    mult = np.zeros((n, n, n), dtype=np.int64)
    for a, u in enumerate(words):
        for b, v in enumerate(words):
            if u + v in pos:
                mult[a, b, pos[u + v]] = 1
    dg = {}
    for g in range(len(gens)):
        vec = np.zeros(n, dtype=np.int64)
        for c, word in d_gens.get(names[g], []):
            w = tuple(gi[x] for x in word)
            if w in pos:
                vec[pos[w]] += c
        dg[g] = vec % m
    D = np.zeros((n, n), dtype=np.int64)
    for i, w in enumerate(words):
        # d(g w') = d(g) w' + (-1)^|g| g d(w'), expanded letter by letter
        sign = 1
        for t, g in enumerate(w):
            left, right = w[:t], w[t + 1:]
            for j in np.flatnonzero(dg[g]):
                full = left + words[j] + right
                if full in pos:
                    D[i, pos[full]] += sign * dg[g][j]
            if deg[g] % 2:
                sign = -sign
    return FilteredDGA(mod, basis, D % m, mult, unit="1", length=length, name=name)


def hz2n(n: int = 3) -> FilteredDGA:
    """Model of the bracket <ρ, 2, 2^(n-1)> = 2^(n-1)τ over Z/2^n: dτ = 2ρ."""
    if n < 2:
        raise ValueError("n must be at least 2")
    mod = Modulus(2, n)
    gens = [("ρ", -1, 0, (-1,)), ("τ", 0, 0, (-1,))]
    return free_associative(mod, gens, {"τ": [(2, ("ρ",))]}, max_len=2, length=1, name=f"hz2n(n={n})")


def toy_dga(p: int = 3, k: int = 1, fx: int = 1, fy: int = 0) -> FilteredDGA:
    """d(y) = x² with x in degree 1; <x, x, x> = {xy + yx} on E_{2fx-fy+1}."""
    if not 0 <= fy < 2 * fx:
        raise ValueError("need 0 <= fy < 2 fx so that d(y) = x² has positive length")
    mod = Modulus(p, k)
    gens = [("x", 1, fx, ()), ("y", 3, fy, ())]
    return free_associative(mod, gens, {"y": [(1, ("x", "x"))]}, max_len=2, length=2 * fx + 1,
                            name=f"toy(p={p},k={k},fx={fx},fy={fy})")


def toy_instances():
    """Seeded family of d(y) = x² instances for oracle runs."""
    for p, k in ((2, 1), (3, 1), (2, 2), (3, 2), (5, 1)):
        for fx in (1, 2):
            for fy in range(0, 2 * fx):
                yield toy_dga(p, k, fx, fy)


def dga_fixture_dict(name: str) -> dict:
    if name == "hz2n":
        return dga_to_dict(hz2n())
    if name == "toy-dga":
        return dga_to_dict(toy_dga())
    raise KeyError(name)
