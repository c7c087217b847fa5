import itertools
import json

import numpy as np
import pytest

from mosskit.dga import FilteredDGA, Generator, random_instance
from mosskit.fixtures import fixtures, free_associative, hz2n, toy_dga
from mosskit.linalg import Modulus, PreconditionError, in_span, span_size
from mosskit.oracle import corpus, crossing_diff_oracle, lemma_checks, massey_enumeration_check, page_equivalence
from mosskit.sseq import (
    MasseyUndefined,
    boundaries_Br,
    crossing_check,
    cycles_Zr,
    detects,
    dr_tilde,
    e1_from_filtered,
    er_page,
    massey_enumerate,
    massey_on_page,
    permanent_cycle_status,
    same_page,
    turn_page,
    ztilde,
)

F2 = Modulus(2, 1)


@pytest.fixture(scope="module")
def charts():
    return fixtures()


@pytest.fixture(scope="module")
def slice_chart(charts):
    return charts["slice-fragment"]


def trivially_filtered(seed=7):
    """Everything in filtration 0: E_1 is H(A) and nothing happens after."""
    A = random_instance(seed, dim=10, L=3, p=2, k=2)
    gens = [Generator(g.name, g.degree, 0, g.weight) for g in A.generators]
    return FilteredDGA(A.modulus, gens, A.d, A.mult, unit=A.unit, length=1)


def long_differential(length=3):
    """dz = w with z in filtration 0 and w in filtration ``length``."""
    return free_associative(F2, [("z", 1, 0, ()), ("w", 0, length, ())], {"z": [(1, ("w",))]},
                            max_len=1, length=length + 1, name="long")


def gr_order(A, grade, f):
    """|F_f H / F_{f+1} H| by span counting in the whole complex."""
    B = A.homology(grade, 0).boundary_generators()
    base = span_size(B, A.modulus)

    def filt(s):
        Z = A.homology(grade, s).cycle_generators()
        return span_size(np.concatenate([Z, B]) if len(Z) else B, A.modulus) // base

    return filt(f) // filt(f + 1)


# -- E_1 ---------------------------------------------------------------------

def test_e1_trivial_filtration_is_homology():
    A = trivially_filtered()
    P = e1_from_filtered(A)
    for g in A.present_grades():
        key = (g[0], 0) + tuple(g[1:])
        G = P.groups.get(key)
        assert (G.size if G else 1) == A.homology(g).size
    for r in range(2, 5):
        assert same_page(er_page(A, r), P.turn() if r == 2 else turn_page(er_page(A, r - 1))) == []


def test_e1_toy():
    P = e1_from_filtered(toy_dga())
    assert {k: P.groups[k].orders for k in P.nonzero_keys()} == {
        (0, 0): (3,), (1, 1): (3,), (2, 2): (3,), (3, 0): (3,), (4, 1): (3, 3), (6, 0): (3,)}


def test_z1_everything_b1_zero():
    for _, A in corpus(6, dim=12):
        E1 = e1_from_filtered(A)
        for key, G in E1.groups.items():
            Z = cycles_Zr(A, key, 1)
            assert all(in_span(Z, z, A.modulus) for z in G.Z)
            assert not any(G.project(b).any() for b in boundaries_Br(A, key, 1))


def test_br_literal_vanishes_below_r_minus_1():
    A = random_instance(11, dim=14, L=5, p=2, k=1)
    E1 = e1_from_filtered(A)
    for key, G in E1.groups.items():
        for r in range(2, 6):
            if key[1] < r - 1:
                assert not any(G.project(b).any() for b in boundaries_Br(A, key, r, literal=True))


def test_r_must_be_positive():
    A = toy_dga()
    with pytest.raises(ValueError):
        er_page(A, 0)
    with pytest.raises(ValueError):
        cycles_Zr(A, (1, 1), 0)
    with pytest.raises(ValueError):
        cycles_Zr(A, (1, 1), 1, method="other")


# -- structural lemmas on a small corpus -------------------------------------

@pytest.mark.parametrize("seed,A", list(corpus(12, dim=12)))
def test_lemmas_small_corpus(seed, A):
    res = lemma_checks(A, rmax=3)
    assert res["checked"] > 0
    assert res["failures"] == []


@pytest.mark.parametrize("seed,A", list(corpus(20, dim=14)))
def test_er_page_matches_turned(seed, A):
    assert page_equivalence(A, 6) == []


def test_large_r_is_graded_homology():
    for _, A in corpus(8, dim=12):
        P = er_page(A, A.L + 1)
        for g in A.present_grades():
            for f in range(A.L):
                key = (g[0], f) + tuple(g[1:])
                G = P.groups.get(key)
                assert (G.size if G else 1) == gr_order(A, g, f)


def test_toy_pages():
    A = toy_dga()
    assert er_page(A, 2).nonzero_keys() == [(0, 0), (1, 1), (2, 2), (3, 0), (4, 1), (6, 0)]
    assert er_page(A, 3).nonzero_keys() == [(0, 0), (1, 1), (4, 1), (6, 0)]
    P = er_page(A, 2)
    y = P.generators((3, 0))[0]
    x = P.generators((1, 1))[0]
    assert P.d(y) == P.mul(x, x)


def test_turning_slice_kills_rho2_tau_alpha1(slice_chart):
    P = e1_from_filtered(slice_chart)
    Q = P.turn()
    assert (-1, 1, -2) in P.nonzero_keys()
    assert (-1, 1, -2) not in Q.nonzero_keys()
    # only 2τ² survives at τ²'s bidegree
    assert P.groups[(0, 0, -2)].orders == (4,)
    assert Q.groups[(0, 0, -2)].orders == (2,)


def test_turn_refuses_unknown_differential():
    doc = json.loads(json.dumps(_slice_dict()))
    doc["complete_through"] = 0
    doc["differentials"] = []
    from mosskit.chart import parse_chart

    C = parse_chart(json.dumps(doc))
    P = e1_from_filtered(C)
    with pytest.raises(PreconditionError, match="d_1 is not known"):
        P.turn()


def _slice_dict():
    from mosskit.fixtures import fixture_path

    return json.loads(fixture_path("slice-fragment").read_text(encoding="utf-8"))


# -- Z~_r and d~_r ------------------------------------------------------------

def test_ztilde_order_matches_zr():
    A = toy_dga()
    E1 = e1_from_filtered(A)
    for key, G in E1.groups.items():
        for r in (1, 2, 3):
            sq, win, iso = ztilde(A, key, r)
            Z = cycles_Zr(A, key, r)
            imgs = np.array([G.project(z) for z in Z]).reshape(-1, G.ngens)
            assert sq.size == span_size(imgs, A.modulus) if len(imgs) else sq.size == 1


def test_dr_tilde_toy():
    A = toy_dga()
    sq, win, iso = ztilde(A, (3, 0), 2)
    chain = np.zeros(A.dim, dtype=np.int64)
    chain[win] = sq.gens[0]
    out = dr_tilde(A, (3, 0), 2, chain)
    assert (out == A.basis_vector("x²")).all() or (out == (2 * A.basis_vector("x²")) % 3).all()


def test_dr_tilde_rejects_non_cycle():
    A = toy_dga()
    with pytest.raises(PreconditionError):
        dr_tilde(A, (3, 0), 3, A.basis_vector("y"))


# -- Massey products on a page -----------------------------------------------

def test_massey_zero_input_gives_zero():
    A = toy_dga()
    P = er_page(A, 2)
    x = P.generators((1, 1))[0]
    zero = P.element((1, 1))
    C = massey_on_page(P, x, zero, x)
    assert not C.representative.any()


def test_massey_toy_xxx():
    A = toy_dga()
    P = er_page(A, 2)
    x = P.generators((1, 1))[0]
    C = massey_on_page(P, x, x, x)
    assert C.key == (4, 1)
    assert C.format() == "xy + yx"
    assert C.strict
    assert {tuple(v) for v in C.elements()} == massey_enumerate(P, x, x, x)


def test_massey_slice_value(slice_chart):
    P = e1_from_filtered(slice_chart)
    C = massey_on_page(P, P.named("2"), P.named("ρ²"), P.named("τα₁"))
    assert C.format() == "2τ²"
    assert C.strict


def test_massey_requires_cycles(slice_chart):
    P = e1_from_filtered(slice_chart)
    with pytest.raises(PreconditionError):
        massey_on_page(P, P.named("τ²"), P.named("2"), P.named("2"))


def test_massey_undefined_names_product():
    A = toy_dga()
    P = er_page(A, 1)
    x = P.generators((1, 1))[0]
    with pytest.raises(MasseyUndefined) as e:
        massey_on_page(P, x, x, x)
    assert "x²" in str(e.value)


@pytest.mark.parametrize("seed,A", list(corpus(8, dim=12)))
def test_massey_matches_enumeration(seed, A):
    res = massey_enumeration_check(A, rmax=2, max_triples=15)
    assert res["failures"] == []


def test_massey_invariant_under_basis_permutation():
    A = random_instance(21, dim=12, L=3, p=2, k=2)
    perm = np.random.default_rng(0).permutation(A.dim)
    B = FilteredDGA(A.modulus, [A.generators[i] for i in perm], A.d[np.ix_(perm, perm)],
                    A.mult[np.ix_(perm, perm, perm)], unit=A.unit, length=A.L)
    seen = 0
    for r in (1, 2):
        P, Q = er_page(A, r), er_page(B, r)
        assert [P.groups[k].orders for k in P.nonzero_keys()] == [Q.groups[k].orders for k in Q.nonzero_keys()]
        cyc = [g for k in P.nonzero_keys() for g in P.generators(k) if P.d(g).is_zero()][:5]
        for a, b, c in itertools.product(cyc, repeat=3):
            try:
                Cp = massey_on_page(P, a, b, c)
            except MasseyUndefined:
                continue
            Cq = massey_on_page(Q, *(_move(P, Q, x, perm) for x in (a, b, c)))
            seen += 1
            assert Cp.indeterminacy_size == Cq.indeterminacy_size
            moved = {_move(Cp.page, Cq.page, Cp.page.element(Cp.key, v), perm).coords.tobytes()
                     for v in Cp.elements()}
            assert moved == {np.asarray(v, dtype=np.int64).tobytes() for v in Cq.elements()}
    assert seen


def _move(P, Q, x, perm):
    """The same element after renumbering the basis by ``perm``."""
    full = np.zeros(len(perm), dtype=np.int64)
    full[P.source.ambient_index(x.key)] = x.ambient()
    return Q.from_ambient(x.key, full[perm][Q.source.ambient_index(x.key)])


# -- crossing and permanence -------------------------------------------------

def test_crossing_vacuous():
    A = long_differential()
    res = crossing_check(A, (0, 1), 1)
    assert res.holds and res.vacuous
    assert str(res) == "holds (vacuous)"


def test_crossing_holds_without_differentials():
    A = free_associative(F2, [("z", 1, 0, ()), ("w", 0, 3, ())], {}, max_len=1, length=4)
    res = crossing_check(A, (0, 2), 1)
    assert res.holds and not res.vacuous


def test_crossing_fails_on_long_differential():
    A = long_differential(3)
    res = crossing_check(A, (0, 2), 1)
    assert res.status == "fails"
    assert "z" in res.witness
    assert str(res).startswith("fails: ")


def test_crossing_e1_ranges():
    A = long_differential(3)
    assert crossing_check(A, (0, 1), 0).status == "fails"
    assert crossing_check(A, (0, 0), 0).vacuous


@pytest.mark.parametrize("seed,A", list(corpus(15, dim=14)))
def test_crossing_differential_oracle(seed, A):
    assert crossing_diff_oracle(A, 3)["failures"] == []


def test_permanence_slice(slice_chart):
    P = e1_from_filtered(slice_chart)
    st = permanent_cycle_status(slice_chart, P.named("τ²"))
    assert st.kind == "dies" and st.page == 1
    assert str(st) == "dies(page 1: d_1(τ²) = ρ²τα₁)"
    assert permanent_cycle_status(slice_chart, P.named("α_{2/2}")).permanent
    assert detects(slice_chart, P.named("α_{2/2}")) == "ν"
    assert permanent_cycle_status(slice_chart, P.element((0, 0, 0))).permanent


def test_permanence_dga():
    A = long_differential(3)
    P = e1_from_filtered(A)
    z = P.generators((1, 0))[0]
    st = permanent_cycle_status(A, z)
    assert st.kind == "dies" and st.page == 3
    w = P.generators((0, 3))[0]
    assert permanent_cycle_status(A, w).permanent


def test_hz2n_pages():
    A = hz2n(3)
    P = e1_from_filtered(A)
    assert P.groups[(0, 0, -1)].orders == (2,)


# -- export ------------------------------------------------------------------

def test_page_json_export(slice_chart):
    P = e1_from_filtered(slice_chart)
    doc = P.to_json()
    assert doc["r"] == 1
    assert set(doc) >= {"groups", "differentials"}
    assert json.loads(P.dumps()) == json.loads(json.dumps(doc, ensure_ascii=False))
    assert P.dumps() == e1_from_filtered(slice_chart).dumps()
