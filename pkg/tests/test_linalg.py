import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mosskit.linalg import (
    Modulus,
    PreconditionError,
    howell_form,
    howell_rows,
    in_span,
    same_span,
    solve,
    span_size,
    subquotient_presentation,
)

from oracles import abelian_invariants, howell_by_enumeration, quotient_size, span_elements

M4 = Modulus(2, 2)
M8 = Modulus(2, 3)

# Frozen from howell_by_enumeration on default_rng(1).integers(0, 8, (6, 6)).
SEED1_HOWELL = [[1, 0, 0, 0, 3, 1], [0, 1, 0, 0, 2, 1], [0, 0, 1, 0, 4, 0],
                [0, 0, 0, 1, 1, 0], [0, 0, 0, 0, 0, 2]]


def matrices(m, max_rows=3, max_cols=3):
    return st.integers(1, max_rows).flatmap(
        lambda r: st.integers(1, max_cols).flatmap(
            lambda c: st.lists(st.lists(st.integers(0, m - 1), min_size=c, max_size=c),
                               min_size=r, max_size=r))).map(lambda x: np.array(x, dtype=np.int64))


def test_modulus_rejects_composite():
    with pytest.raises(ValueError):
        Modulus(4, 1)
    with pytest.raises(ValueError):
        Modulus(2, 0)


def test_howell_identity():
    H, U = howell_form(np.eye(3, dtype=np.int64), M4)
    assert (H == np.eye(3)).all() and (U == np.eye(3)).all()


def test_howell_keeps_nonunit_row():
    H, _ = howell_form(np.array([[2]]), M4)
    assert H.tolist() == [[2]]


def test_howell_seed1_against_enumeration():
    M = np.random.default_rng(1).integers(0, 8, (6, 6))
    H, U = howell_form(M, M8)
    nz = H[H.any(axis=1)]
    assert nz.tolist() == SEED1_HOWELL
    assert (howell_by_enumeration(M, 2, 3) == nz).all()
    assert (H == (U[:, :M.shape[0]] @ M) % 8).all()


def test_howell_saturates_nonsaturated_span():
    # span of (2, 1) over Z/4 contains (0, 2) = 2·(2, 1); Howell lists it
    H = howell_rows(np.array([[2, 1]]), M4)
    assert H.tolist() == [[2, 1], [0, 2]]


@settings(max_examples=150, deadline=None)
@given(matrices(4))
def test_howell_matches_enumeration(M):
    assert (howell_rows(M, M4) == howell_by_enumeration(M, 2, 2)).all()


@settings(max_examples=100, deadline=None)
@given(matrices(9))
def test_howell_idempotent_and_span_preserving(M):
    mod = Modulus(3, 2)
    H, U = howell_form(M, mod)
    H2, _ = howell_form(H, mod)
    assert (H2[:H.shape[0]] == H).all()
    assert same_span(H, M, mod)
    for r in M:
        assert in_span(H, r, mod)
    assert round(abs(np.linalg.det(U))) % 3 != 0


def test_solve_zero_map():
    x0, K = solve(np.zeros((2, 2), dtype=np.int64), [0, 0], M4)
    assert not x0.any()
    assert span_size(K, M4) == 16


def test_solve_unsolvable():
    assert solve(np.array([[2]]), [1], M4) is None


def test_solve_example():
    x0, K = solve(np.array([[2]]), [2], M4)
    assert x0.tolist() == [1]
    assert K.tolist() == [[2]]


def test_solve_dimension_mismatch():
    with pytest.raises(ValueError):
        solve(np.eye(2, dtype=np.int64), [1, 2, 3], M4)


@settings(max_examples=150, deadline=None)
@given(matrices(4), st.lists(st.integers(0, 3), min_size=3, max_size=3))
def test_solve_exhaustive(M, v):
    v = np.array(v[:M.shape[0]])
    sols = {x for x in itertools.product(range(4), repeat=M.shape[1]) if not ((M @ x - v) % 4).any()}
    res = solve(M, v, M4)
    if res is None:
        assert not sols
        return
    x0, K = res
    assert not ((M @ x0 - v) % 4).any()
    for k in K:
        assert not ((M @ k) % 4).any()
    got = {tuple((x0 + y) % 4) for y in span_elements(K, 4)} if len(K) else {tuple(x0 % 4)}
    assert got == sols


def test_subquotient_trivial():
    S = subquotient_presentation(np.eye(3, dtype=np.int64), np.zeros((0, 3), dtype=np.int64), Modulus(2, 1))
    assert S.orders == (2, 2, 2)
    for c in itertools.product(range(2), repeat=3):
        assert S.project(S.section(c)).tolist() == list(c)


def test_subquotient_z4_mod_2():
    S = subquotient_presentation(np.array([[1]]), np.array([[2]]), M4)
    assert S.orders == (2,)


def test_subquotient_seed2_nested():
    rng = np.random.default_rng(2)
    Z = rng.integers(0, 8, (3, 4))
    B = (rng.integers(0, 8, (3, 3)) @ Z) % 8
    S = subquotient_presentation(Z, B, M8)
    assert S.orders == abelian_invariants(Z, B, 8) == (4,)


def test_subquotient_rejects_b_outside_z():
    with pytest.raises(PreconditionError):
        subquotient_presentation(np.array([[2, 0]]), np.array([[1, 0]]), M4)


@settings(max_examples=80, deadline=None)
@given(matrices(8, 3, 4), matrices(8, 3, 3))
def test_subquotient_orders_by_enumeration(Z, C):
    B = (C[:, :Z.shape[0]] @ Z) % 8 if C.shape[1] >= Z.shape[0] else np.zeros((0, Z.shape[1]), dtype=np.int64)
    S = subquotient_presentation(Z, B, M8, ambient_dim=Z.shape[1])
    assert S.size == quotient_size(Z, B, 8)
    assert S.orders == abelian_invariants(Z, B, 8)
    for z in span_elements(Z, 8)[:20]:
        assert S.project(S.section(S.project(z))).tolist() == S.project(z).tolist()
