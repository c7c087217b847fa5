"""Brute-force verification of the comparison theorems on filtered DGAs.

Everything here works at chain level on a :class:`~mosskit.dga.FilteredDGA`
and compares against the page-level machinery in :mod:`mosskit.sseq`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dga import (
    BracketUndefined,
    FilteredDGA,
    HomologyClass,
    random_instance,
    split_srt,
    toda_bracket,
    toda_filtered,
)
from .linalg import in_span, left_kernel, matmul, rows, span_size
from .sseq import (
    MasseyUndefined,
    _solve_d,
    _source,
    associated_graded,
    boundaries_Br,
    crossing_check,
    cycles_Zr,
    dr_tilde,
    e1_from_filtered,
    er_page,
    key_add,
    massey_enumerate,
    massey_on_page,
    same_page,
    ztilde,
)

__all__ = [
    "OracleReport",
    "page_equivalence",
    "lemma_checks",
    "crossing_diff_oracle",
    "massey_enumeration_check",
    "detected_classes",
    "oracle_verify_moss",
    "oracle_verify_e1",
    "moss_campaign",
    "rule_agrees_with_oracle",
    "rule_e1_agrees_with_oracle",
    "corpus",
]

PRIMES = ((2, 1), (2, 2), (3, 1), (2, 3), (3, 2))


def corpus(n: int, dim: int = 16, lengths=(2, 3, 4, 5), start: int = 0):
    """Seeded instances cycling through moduli and filtration lengths."""
    for s in range(start, start + n):
        p, k = PRIMES[s % len(PRIMES)]
        L = lengths[s % len(lengths)]
        yield s, random_instance(s, dim=dim, L=L, p=p, k=k)


@dataclass
class OracleReport:
    applicable: bool
    passed: bool = True
    reason: str = ""
    checks: list = field(default_factory=list)

    def check(self, name: str, ok: bool, detail: str = ""):
        self.checks.append((name, bool(ok), detail))
        if not ok:
            self.passed = False

    def __str__(self):
        if not self.applicable:
            return f"not applicable: {self.reason}"
        lines = [("pass" if self.passed else "FAIL")]
        lines += [f"  {'ok ' if ok else 'BAD'} {n}" + (f": {d}" if d else "") for n, ok, d in self.checks]
        return "\n".join(lines)


def _group_image_size(images, group, mod) -> int:
    """Size of the subgroup of ``group`` generated by coordinate rows."""
    g = group.ngens
    if not g:
        return 1
    rel = np.diag(np.asarray(group.orders, dtype=np.int64))
    full = span_size(np.concatenate([rows(images, g), rel]), mod)
    base = span_size(rel, mod)
    return full // base


# -- pages -------------------------------------------------------------------

def page_equivalence(A: FilteredDGA, rmax: int = 6, check_leibniz: bool = True) -> list:
    """Differences between er_page(A, r) and turned pages for r <= rmax."""
    out = []
    P = e1_from_filtered(A)
    for r in range(2, rmax + 1):
        P = P.turn(check_leibniz=check_leibniz)
        d = same_page(P, er_page(A, r))
        if d:
            out.append((r, d))
    return out


# -- lemma suite -------------------------------------------------------------

def lemma_checks(A: FilteredDGA, rmax: int = 3) -> dict:
    """Run the structural lemmas on every bidegree; returns counters and failures."""
    S = _source(A)
    mod = A.modulus
    res = {"checked": 0, "failures": []}

    def fail(name, detail):
        res["failures"].append((name, detail))

    E1 = e1_from_filtered(A)
    for key in S.all_keys:
        a = len(S.ambient_index(key))
        for r in range(1, rmax + 2):
            Zw = cycles_Zr(A, key, r, "window")
            Zk = cycles_Zr(A, key, r, "kappa")
            B = boundaries_Br(A, key, r)
            res["checked"] += 1
            if not (len(Zw) == len(Zk) and all(in_span(Zw, z, mod) for z in Zk)
                    and all(in_span(Zk, z, mod) for z in Zw)):
                fail("Z_r characterizations", (key, r))
            if not all(in_span(Zw, b, mod) for b in B):
                fail("B_r ⊆ Z_r", (key, r))
            if r == 1:
                G = E1.groups.get(key)
                if G is not None and any(G.project(b).any() for b in B):
                    fail("B_1 = 0", key)
            # Z~_r and its isomorphism onto Z_r
            sq, win, iso = ztilde(A, key, r)
            G = E1.groups.get(key)
            if G is None:
                continue
            Zr_size = _group_image_size([G.project(z) for z in Zw], G.group, mod)
            img = _group_image_size(iso, G.group, mod)
            if sq.size != Zr_size or img != sq.size:
                fail("Z~_r ≅ Z_r", (key, r, sq.size, Zr_size, img))
            # commuting square: d~_r against d_r on E_r
            P = er_page(A, r)
            Gr = P.groups.get(key)
            if Gr is None or not Gr.ngens:
                continue
            tk = (key[0] - 1, key[1] + r) + tuple(key[2:])
            Tg = P.groups.get(tk)
            amb = S.ambient_index(key)
            tamb = S.ambient_index(tk)
            for gen in sq.gens:
                chain = np.zeros(A.dim, dtype=np.int64)
                chain[win] = gen
                left = P.d(P.from_ambient(key, chain[amb]))
                dt = dr_tilde(A, key, r, chain)
                right = P.from_ambient(tk, dt[tamb]) if Tg is not None else P.element(tk)
                if not left == right:
                    fail("d~_r square", (key, r))
    # X_{s,r,t} splitting
    grades = A.present_grades()
    for s in range(A.L):
        for r in range(1, rmax + 1):
            for t in range(1, r + 1):
                cone, xi, xip = split_srt(A, s, r, t)
                C = cone.complex
                for g in grades:
                    Hc = C.homology(g)
                    H1 = A.homology(g, s, s + t)
                    gm = (g[0] - 1,) + tuple(g[1:])
                    H2 = A.homology(gm, s + r, s + r + t)
                    res["checked"] += 1
                    if Hc.size != H1.size * H2.size:
                        fail("srt order identity", (s, r, t, g, Hc.size, H1.size, H2.size))
                        continue
                    imgs = []
                    for z in Hc.generators():
                        u, v = xi(z), xip(z)
                        if not H1.is_cycle(u) or not H2.is_cycle(v):
                            fail("srt chain map", (s, r, t, g))
                            break
                        imgs.append(np.concatenate([H1.project(u), H2.project(v)]))
                    else:
                        from .linalg import GroupPresentation

                        prod = GroupPresentation(H1.orders + H2.orders)
                        if _group_image_size(imgs, prod, A.modulus) != Hc.size:
                            fail("srt isomorphism", (s, r, t, g))
                        # connecting map: kappa = p kappa' on xi, plus i on xi'
                        Hk = A.homology(gm, s + t, s + t + r)
                        for z in Hc.generators():
                            kz = cone.kappa(z)
                            u = A.restrict(A.differential(A.restrict(xi(z), s, s + t)), s + t, s + t + r)
                            w = (u + xip(z)) % A.m
                            if not Hk.is_cycle(kz) or not Hk.is_cycle(w) or \
                                    (Hk.project(kz) != Hk.project(w)).any():
                                fail("srt connecting map", (s, r, t, g))
                                break
    return res


# -- Massey coset against brute force -----------------------------------------

def massey_enumeration_check(A: FilteredDGA, rmax: int = 3, limit: int = 1 << 12,
                             max_triples: int = 30) -> dict:
    """Compare massey_on_page with massey_enumerate on d_r-cycle generators."""
    out = {"checked": 0, "skipped": 0, "failures": []}
    for r in range(1, rmax + 1):
        P = er_page(A, r)
        cyc = [g for k in P.nonzero_keys() for g in P.generators(k) if P.d(g).is_zero()]
        n = 0
        for a, a2, a3 in itertools.product(cyc, repeat=3):
            if n >= max_triples:
                break
            try:
                C = massey_on_page(P, a, a2, a3)
            except MasseyUndefined:
                continue
            try:
                brute = massey_enumerate(P, a, a2, a3, limit=limit)
            except ValueError:
                out["skipped"] += 1
                continue
            n += 1
            out["checked"] += 1
            got = {tuple(int(x) for x in v) for v in C.elements()}
            if got != brute:
                out["failures"].append((r, a.format(), a2.format(), a3.format()))
    return out


# -- crossing differentials --------------------------------------------------

def crossing_diff_oracle(A: FilteredDGA, rmax: int = 3) -> dict:
    """Lifts of d_r-boundaries that die in H(A) vanish in H(F_{f-r}) when crossing holds."""
    S = _source(A)
    mod, m = A.modulus, A.m
    out = {"applicable": 0, "failures": []}
    for key in S.all_keys:
        g, f = (key[0],) + tuple(key[2:]), key[1]
        amb = S.ambient_index(key)
        if not len(amb):
            continue
        up = (g[0] + 1,) + g[1:]
        for r in range(1, rmax + 1):
            if f - r < 0:
                continue
            cc = crossing_check(A, key, r)
            if not cc.holds:
                continue
            # y with dy in F_f and (dy)|_f in B_{r+1}
            var = S.sel(up, 0)
            cols_low = S.sel(g, 0, f)
            Bn = S.boundaries(key, r + 1)
            if not len(var):
                continue
            Dv = A.d[np.ix_(var, cols_low)] if len(cols_low) else np.zeros((len(var), 0), dtype=np.int64)
            Da = A.d[np.ix_(var, amb)]
            # unknowns (y, c): y·Dv = 0 and y·Da - c·Bn = 0
            top = np.concatenate([Dv, Da], axis=1)
            bot = np.concatenate([np.zeros((Bn.shape[0], Dv.shape[1]), dtype=np.int64), (-Bn) % m], axis=1) \
                if Bn.shape[0] else np.zeros((0, top.shape[1]), dtype=np.int64)
            K = left_kernel(np.concatenate([top, bot], axis=0), mod)
            if not len(K):
                continue
            ys = K[:, :len(var)]
            Hlow = A.homology(g, f - r)
            for y in ys:
                yy = np.zeros(A.dim, dtype=np.int64)
                yy[var] = y
                alpha = A.differential(yy)
                if not alpha.any():
                    continue
                out["applicable"] += 1
                if Hlow.project(alpha).any():
                    out["failures"].append((key, r, alpha.tolist()))
    return out


# -- Moss oracle -------------------------------------------------------------

def detected_classes(A: FilteredDGA, r: int, per_key: int = 3):
    """Classes of H(F_s) with a nonzero E_r image at filtration s."""
    S = _source(A)
    P = er_page(A, r)
    out = []
    for key in P.nonzero_keys():
        g, s = (key[0],) + tuple(key[2:]), key[1]
        H = A.homology(g, s)
        amb = S.ambient_index(key)
        count = 0
        seen = []
        # single basis cycles first: planted brackets live on those
        basis = [A.basis_vector(A.names[i]) for i in S.sel(g, s, None)]
        basis = [v for v in basis if not A.differential(v).any()]
        for gen in basis + list(H.generators()):
            a = P.from_ambient(key, gen[amb])
            if a.is_zero() or any(a == b for b in seen):
                continue
            seen.append(a)
            out.append((key, A.cls(gen, s, None, g), a))
            count += 1
            if count >= per_key:
                break
    return out


def _positions(keys):
    s1, s2, s3 = (k[1] for k in keys)
    f2 = s3
    f1 = s2 + s3
    f = s1 + s2 + s3
    return f, f1, f2


def _premises(A, P, trip, r, e1: bool):
    """Check the theorem premises; returns (ok, reason, crossing results)."""
    (k1, x, a), (k2, y, a2), (k3, z, a3) = trip
    H0 = lambda c: A.homology(c.grade, 0)  # noqa: E731
    xy = A.mul(x.chain, y.chain)
    yz = A.mul(y.chain, z.chain)
    gxy = key_add(x.grade, y.grade)
    gyz = key_add(y.grade, z.grade)
    if A.homology(gxy, 0).project(xy).any():
        return False, "αα' ≠ 0 in homotopy", []
    if A.homology(gyz, 0).project(yz).any():
        return False, "α'α'' ≠ 0 in homotopy", []
    p12, p23 = P.mul(a, a2), P.mul(a2, a3)
    if e1:
        if not p12.is_zero() or not p23.is_zero():
            return False, "aa' or a'a'' nonzero in E_1", []
    else:
        for x_ in (a, a2, a3):
            if not P.d(x_).is_zero():
                return False, "input not a d_r-cycle", []
        kb = (p12.key[0] + 1, p12.key[1] - r) + tuple(p12.key[2:])
        kb2 = (p23.key[0] + 1, p23.key[1] - r) + tuple(p23.key[2:])
        if _solve_d(P, kb, p12) is None or _solve_d(P, kb2, p23) is None:
            return False, "products not hit by d_r", []
    rr = 0 if e1 else r
    c1 = crossing_check(A, p12.key, rr)
    c2 = crossing_check(A, p23.key, rr)
    if not c1.holds or not c2.holds:
        return False, "crossing hypothesis fails", [c1, c2]
    return True, "", [c1, c2]


def _coset_contains_image(target, chains, project) -> bool:
    """Every element of the coset spanned by chains[0] + <chains[1:]> lies in target."""
    rep, ind = chains[0], chains[1:]
    v = project(rep)
    if not target.contains(v):
        return False
    for c in ind:
        if not target.contains((target.representative + project(c)) % target.mod.m):
            return False
    return True


def oracle_verify_moss(A: FilteredDGA, r: int, trip) -> OracleReport:
    """Both containments of the E_r comparison theorem for one triple."""
    P = er_page(A, r)
    ok, why, cross = _premises(A, P, trip, r, e1=False)
    if not ok:
        return OracleReport(False, reason=why)
    rep = OracleReport(True)
    (k1, x, a), (k2, y, a2), (k3, z, a3) = trip
    f, f1, f2 = _positions((k1, k2, k3))
    for c in cross:
        rep.check(f"crossing at {c.key}", c.holds, str(c))
    try:
        T = toda_filtered(x, y, z, f, f1, f2, r)
    except BracketUndefined as e:
        rep.check("filtered bracket defined", False, str(e))
        return rep
    rep.check("filtered bracket defined", True)
    M = massey_on_page(P, a, a2, a3)
    S = _source(A)
    ko = M.key
    amb = S.ambient_index(ko)
    Q = M.page
    G = Q.groups.get(ko)
    chains = [T.chain] + list(T.indeterminacy_chains)

    def to_page(c):
        if G is None:
            return np.zeros(0, dtype=np.int64)
        return G.project(np.asarray(c)[amb])

    rep.check("projects into the Massey product", _coset_contains_image(M, chains, to_page))
    U = toda_bracket(x, y, z)
    H = U.homology
    rep.check("maps into the homotopy bracket", _coset_contains_image(U, chains, H.project))
    rep.massey = M
    rep.toda = U
    return rep


def oracle_verify_e1(A: FilteredDGA, trip) -> OracleReport:
    """Both containments of the E_1 comparison theorem for one triple."""
    P = e1_from_filtered(A)
    ok, why, cross = _premises(A, P, trip, 1, e1=True)
    if not ok:
        return OracleReport(False, reason=why)
    rep = OracleReport(True)
    (k1, x, a), (k2, y, a2), (k3, z, a3) = trip
    f, f1, f2 = _positions((k1, k2, k3))
    for c in cross:
        rep.check(f"crossing at {c.key}", c.holds, str(c))
    try:
        T = toda_filtered(x, y, z, f, f1, f2, 0)
    except BracketUndefined as e:
        rep.check("filtered bracket defined", False, str(e))
        return rep
    rep.check("filtered bracket defined", True)
    gr = _gr(A)
    xs = [gr.cls(A.restrict(c.chain, k[1], k[1] + 1), k[1], None, c.grade + (k[1],))
          for c, k in ((x, k1), (y, k2), (z, k3))]
    try:
        E = toda_bracket(*xs)
    except BracketUndefined as e:
        rep.check("E_1 bracket defined", False, str(e))
        return rep
    HE = E.homology
    chains = [T.chain] + list(T.indeterminacy_chains)
    rep.check("projects into the E_1 bracket",
              _coset_contains_image(E, chains, lambda c: HE.project(A.restrict(c, f, f + 1))))
    U = toda_bracket(x, y, z)
    rep.check("maps into the homotopy bracket", _coset_contains_image(U, chains, U.homology.project))
    rep.e1_bracket = E
    rep.toda = U
    return rep


def _gr(A):
    g = getattr(A, "_gr", None)
    if g is None:
        g = A._gr = associated_graded(A)
    return g


def moss_campaign(seeds: int = 500, dim: int = 16, L: Optional[int] = None, rmax: int = 2,
                  max_triples: int = 40, e1: bool = False, start: int = 0,
                  max_examined: int = 2000) -> dict:
    """Run the oracle over seeded instances.

    ``applicable``/``pass``/``fail`` count instances with at least one
    applicable triple; ``triples`` and ``nonzero`` count checked triples and
    those whose bracket representative is nonzero.
    """
    lengths = (L,) if L else (2, 3, 4, 5)
    stats = {"instances": 0, "applicable": 0, "pass": 0, "fail": 0,
             "triples": 0, "nonzero": 0, "failures": []}
    for seed, A in corpus(seeds, dim=dim, lengths=lengths, start=start):
        stats["instances"] += 1
        rs = [1] if e1 else range(1, rmax + 1)
        hit = bad = False
        for r in rs:
            cands = detected_classes(A, 1 if e1 else r)
            checked = 0
            for trip in itertools.islice(itertools.product(cands, repeat=3), max_examined):
                if checked >= max_triples:
                    break
                rep = oracle_verify_e1(A, trip) if e1 else oracle_verify_moss(A, r, trip)
                if not rep.applicable:
                    continue
                checked += 1
                hit = True
                stats["triples"] += 1
                got = rep.e1_bracket if e1 else rep.massey
                stats["nonzero"] += int(bool(np.asarray(got.representative).any()))
                if not rep.passed:
                    bad = True
                    stats["failures"].append((seed, r, str(rep)))
        if hit:
            stats["applicable"] += 1
            stats["fail" if bad else "pass"] += 1
    return stats


def fact_base_for_triple(A: FilteredDGA, trip):
    """Fact base over A knowing only what the comparison rule needs about one triple.

    Each input detects a fresh atom; a zero product is asserted exactly when
    the chain-level product is null in homology.
    """
    from .deduce import Detects, FactBase, Vocabulary, ZeroProductHomotopy

    texts = [a.format() for _, _, a in trip]
    atoms = {}
    for t in texts:
        atoms.setdefault(t, f"h{len(atoms) + 1}")
    base = FactBase(A, Vocabulary(list(atoms.values())))
    for (k, _, a), t in zip(trip, texts):
        base.assert_fact(Detects(t, atoms[t], k[1]))
    for (_, x, _), (_, y, _), tx, ty in ((trip[0], trip[1], texts[0], texts[1]),
                                         (trip[1], trip[2], texts[1], texts[2])):
        g = key_add(x.grade, y.grade)
        if not A.homology(g, 0).project(A.mul(x.chain, y.chain)).any():
            base.assert_fact(ZeroProductHomotopy(atoms[tx], atoms[ty]))
    return base, texts


def rule_agrees_with_oracle(A: FilteredDGA, r: int, trip):
    """Run the E_r rule and the oracle on one triple; ``(agrees, deduction, report)``.

    They agree when the rule derives exactly on applicable triples, the
    oracle's containments hold there, and both name the same coset.
    """
    from .deduce import rule_moss_r

    base, texts = fact_base_for_triple(A, trip)
    ded = rule_moss_r(base, *texts, r=r)
    rep = oracle_verify_moss(A, r, trip)
    if ded.derived != rep.applicable:
        return False, ded, rep
    if not ded.derived:
        return True, ded, rep
    M = rep.massey
    same = ded.conclusions[0].fields["strict"] == M.strict and (
        not M.strict or ded.conclusions[0].fields["representative"] == _ambient_text(M))
    return bool(rep.passed and same), ded, rep


def rule_e1_agrees_with_oracle(A: FilteredDGA, trip):
    """The E_1 rule against the E_1 oracle on one triple; ``(agrees, deduction, report)``."""
    from .deduce import rule_moss_e1

    base, texts = fact_base_for_triple(A, trip)
    ded = rule_moss_e1(base, *texts)
    rep = oracle_verify_e1(A, trip)
    if ded.derived != rep.applicable:
        return False, ded, rep
    if not ded.derived:
        return True, ded, rep
    E = rep.e1_bracket
    strict = ded.mode == "strict"
    if strict != E.strict:
        return False, ded, rep
    if strict:
        rep_text = "0"
        if E.representative.any():
            from .coset import format_element

            S = _source(A)
            (k1, _, _), (k2, _, _), (k3, _, _) = trip
            ko = key_add(k1, k2, k3)
            ko = (ko[0] + 1,) + tuple(ko[1:])
            rep_text = format_element(E.homology.section(E.representative)[S.ambient_index(ko)],
                                      S.ambient_names(ko))
        got = [c.fields["element"] for c in ded.conclusions if c.kind == "PermanentCycle"]
        if (got[0] if got else "0") != rep_text:
            return False, ded, rep
    return bool(rep.passed), ded, rep


def _ambient_text(M) -> str:
    from .coset import format_element

    G = M.page.groups.get(M.key)
    if G is None or not M.representative.any():
        return "0"
    return format_element(G.section(M.representative), G.ambient_names)
