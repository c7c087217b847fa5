import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mosskit.chart import parse_chart
from mosskit.deduce import (
    AuxiliaryRuleError,
    BracketContains,
    ConsistencyError,
    Detects,
    Fact,
    FactBase,
    FactError,
    HiddenExtension,
    PermanentCycle,
    Vocabulary,
    ZeroProductHomotopy,
    explain,
    premise_sweep,
    replay,
    rule_moss_e1,
    rule_moss_r,
    rule_shuffle,
)
from mosskit.dga import homology_product, toda_bracket
from mosskit.fixtures import fixtures, free_associative, hz2n, toy_instances
from mosskit.linalg import Modulus
from mosskit.oracle import (
    corpus,
    detected_classes,
    rule_agrees_with_oracle,
    rule_e1_agrees_with_oracle,
)

PLAN_SUMMARIES = [
    "2α_{2/2} is a permanent cycle; ⟨η, ω, η⟩ contains ων (ων detected by 2α_{2/2})",
    "τα₁ is a permanent cycle; ⟨ρ, ω, η⟩ contains τη (τη detected by τα₁)",
    "⟨2, ρ², τα₁⟩ = {2τ²} (strict); 2τ² is a permanent cycle; ⟨ω, ρ², τη⟩ contains ωτ² (ωτ² detected by 2τ²)",
    "⟨η, ω, ρ⟩ contains τη (by symmetry of ⟨ρ, ω, η⟩)",
    "⟨η, ω, ρ²⟩ contains ρτη (from ⟨η, ω, ρ⟩·ρ)",
    "η·ωτ² = ρ(τη)²",
]


@pytest.fixture(scope="module")
def chart():
    return fixtures()["slice-fragment"]


@pytest.fixture
def base(chart):
    return FactBase.from_chart(chart, auxiliary=True)


@pytest.fixture(scope="module")
def ran(chart):
    b = FactBase.from_chart(chart, auxiliary=True)
    for step in chart.plan:
        b.run_step(step)
    return b


# -- vocabulary --------------------------------------------------------------

@pytest.mark.parametrize("text,canon", [
    ("ρτητη", "ρ(τη)²"),
    ("ρτηρτη", "ρ²(τη)²"),
    ("ρ(τη)^2", "ρ(τη)²"),
    ("ηωτ²", "ηωτ²"),
    ("1", "1"),
    ("0", "0"),
    ("ρρρν", "ρ³ν"),
])
def test_vocabulary_canon(text, canon):
    v = Vocabulary(["ω", "η", "ρ", "ν", "τη", "ωτ²"])
    assert v.canon(text) == canon


def test_vocabulary_mul_and_divides():
    v = Vocabulary(["ρ", "ν", "τη"])
    assert v.mul("ρ", "τη", "ρ") == "ρ²τη"
    assert v.divides("ρ²τη", "ρ³ντη")
    assert not v.divides("ρ²τη", "ρντη")
    assert v.mul("ρ", "0") == "0"


def test_vocabulary_rejects_unknown_atom():
    with pytest.raises(ValueError):
        Vocabulary(["ρ"]).parse("κ")


# -- facts -------------------------------------------------------------------

def test_axioms_load(base):
    kinds = [f.kind for f in base.facts.values()]
    assert kinds.count("Detects") == 8
    assert kinds.count("ZeroProductHomotopy") == 3
    assert kinds.count("BracketContains") == 1
    assert kinds.count("MasseyContains") == 2
    assert all(f.is_axiom for f in base.facts.values())


def test_assert_and_query(base):
    n = len(base.facts)
    i = base.assert_fact(PermanentCycle("α₁"))
    assert base.assert_fact(PermanentCycle("α₁")) == i
    assert len(base.facts) == n + 1
    assert base.query("PermanentCycle", element="α₁") == [(i, base.facts[i])]
    assert [f.fields["homotopy"] for _, f in base.query("Detects", element="α_{2/2}")] == ["ν"]


def test_detects_unknown_class(base):
    with pytest.raises(FactError):
        base.assert_fact(Detects("β₁", "x", 1))


def test_detects_wrong_filtration(base):
    with pytest.raises(FactError):
        base.assert_fact(Detects("α₁", "η", 2))


def test_fact_json_round_trip(ran):
    recs = ran.facts_json()
    fresh = FactBase(ran.chart, Vocabulary(ran.vocab.atoms))
    fresh.load_facts(recs)
    assert [f.ident() for f in fresh.facts.values()] == [f.ident() for f in ran.facts.values()]
    for r in recs:
        assert Fact.from_json(r).ident() == ran.facts[r["id"]].ident()


def test_consistency_permanent_cycle_that_dies(base):
    with pytest.raises(ConsistencyError) as e:
        base.assert_fact(PermanentCycle("τ²"))
    assert "d_1(τ²) = ρ²τα₁" in str(e.value)


def test_consistency_zero_product_vs_hidden_extension(ran):
    b = ran.copy_without([])
    with pytest.raises(ConsistencyError):
        b.assert_fact(ZeroProductHomotopy("η", "ωτ²"))
    c = FactBase.from_chart(ran.chart)
    c.assert_fact(ZeroProductHomotopy("η", "ωτ²"))
    with pytest.raises(ConsistencyError):
        c.assert_fact(HiddenExtension("η", "ωτ²", "ρ(τη)²"))


# -- the fixture plan --------------------------------------------------------

def test_plan_conclusions(ran):
    assert [d.summary() for d in ran.deductions.values()] == PLAN_SUMMARIES
    assert [d.mode for d in ran.deductions.values()] == [
        "strict", "strict", "strict", "containment", "containment", "equality"]


def test_nu_example_conclusion(base):
    d = base.apply("moss-e1", a="α₁", a2="2", a3="α₁")
    assert d.derived
    assert base.query("PermanentCycle", element="2α_{2/2}")
    (_, f), = base.query("BracketContains", inputs=["η", "ω", "η"])
    assert f.fields["element"] == "ων"


def test_ta1_example_conclusion(base):
    d = base.apply("moss-e1", a="ρ", a2="2", a3="α₁")
    assert d.summary().startswith("τα₁ is a permanent cycle; ⟨ρ, ω, η⟩ contains τη")


def test_massey_step(base):
    d = base.apply("moss-r", a="2", a2="ρ²", a3="τα₁", r=1)
    assert d.conclusions[0].fields["coset"] == "{2τ²}" and d.conclusions[0].fields["strict"]


def test_explain_cites_rule_and_crossing(ran):
    t = explain(ran, 3)
    assert "rule: comparison theorem at E_r" in t
    assert "crossing at" in t
    assert "permanence of 2" in t
    with pytest.raises(KeyError):
        explain(ran, 99)


def test_shuffle_marked_auxiliary(ran):
    d = ran.deductions[6]
    assert d.auxiliary
    assert "note: auxiliary rule" in explain(ran, 6)
    (i,) = d.conclusion_ids
    assert ran.facts[i].provenance["auxiliary"] is True


# -- gating, refusal, withholding --------------------------------------------

def test_auxiliary_rules_need_flag(chart):
    b = FactBase.from_chart(chart)
    for rule, args in (("shuffle", {"x": "η", "bracket": ["ω", "ρ²", "τη"]}),
                       ("symmetry", {"bracket": ["ρ", "ω", "η"]}),
                       ("juggle", {"bracket": ["η", "ω", "ρ"], "by": "ρ"})):
        with pytest.raises(AuxiliaryRuleError):
            b.apply(rule, **args)


def test_unknown_rule(base):
    with pytest.raises(KeyError):
        base.apply("moss-z", a="2")


def test_shuffle_with_zero(base):
    base.assert_fact(BracketContains(["ω", "ρ²", "τη"], "ωτ²"))
    d = rule_shuffle(base, "0", ["ω", "ρ²", "τη"])
    assert d.derived and d.mode == "trivial"
    assert d.conclusions[0].fields["by"] == "0"


def test_shuffle_without_indeterminacy_is_containment(ran):
    b = ran.copy_without([i for i, f in ran.facts.items() if f.kind == "BracketContains" and f.is_axiom])
    d = rule_shuffle(b, "η", ["ω", "ρ²", "τη"])
    assert d.derived and d.mode == "containment"
    assert d.conclusions[0].fields["exact"] is False


def test_refused_when_product_nonzero_on_e1(base):
    # τη·ρ² = 0 and ρ²·ω = 0 in homotopy, but τα₁·ρ² survives on E_1
    d = rule_moss_e1(base, "τα₁", "ρ²", "2")
    assert d.status == "refused"
    assert d.reason == "τα₁·ρ² = ρ²τα₁ ≠ 0 on E_1"


def test_refused_on_dying_input(base):
    d = rule_moss_r(base, "τ²", "2", "2")
    assert d.status == "refused"
    assert "d_1(τ²) = ρ²τα₁" in d.reason


def crossing_fail_chart():
    """⟨x, 2, x⟩ on E_1 with z at (1, 0) supporting d_2 z = w across filtration 1."""
    return parse_chart({
        "name": "crossing-fail", "prime": 2, "exponent": 2, "complete_through": 2, "unit": "1",
        "classes": [
            {"name": "1", "stem": 0, "filtration": 0, "order": 4},
            {"name": "x", "stem": 0, "filtration": 1, "order": 2},
            {"name": "z", "stem": 1, "filtration": 0, "order": 2},
            {"name": "w", "stem": 0, "filtration": 2, "order": 2},
            {"name": "y", "stem": 1, "filtration": 2, "order": 2},
        ],
        "differentials": [{"page": 2, "source": "z", "target": "w", "coefficient": 1}],
        "products": [{"left": "x", "right": "x", "result": "w", "coefficient": 0}],
        "detections": [{"element": "2", "homotopy": "ω"}, {"element": "x", "homotopy": "h"}],
        "homotopy": {"atoms": ["ω", "h"], "zero_products": [["ω", "h"]]},
        "e1_brackets": [{"inputs": ["x", "2", "x"], "contains": "y", "strict": True}],
    })


def test_crossing_failure_refuses_with_witness():
    b = FactBase.from_chart(crossing_fail_chart())
    d = rule_moss_e1(b, "x", "2", "x")
    assert d.status == "refused"
    assert "crossing hypothesis fails" in d.reason
    assert "d_2(z) = w" in d.reason
    b.commit(d)
    t = explain(b, d.id)
    assert "refused: crossing hypothesis fails" in t
    assert "z" in t


def test_withheld_names_unknown_premise(chart):
    b = FactBase(chart, Vocabulary(chart.homotopy["atoms"]))
    d = b.apply("moss-e1", a="α₁", a2="2", a3="α₁")
    assert d.status == "withheld"
    assert "α₁" in d.reason
    t = explain(b, d.id)
    assert t.splitlines()[-1].startswith("withheld: ")
    assert "α₁" in t.splitlines()[-1]


def test_withheld_without_zero_product(chart):
    b = FactBase.from_chart(chart)
    for i, f in list(b.facts.items()):
        if f.kind == "ZeroProductHomotopy" and f.fields["factors"] == ["ω", "η"]:
            b = b.copy_without([i])
    d = b.apply("moss-e1", a="α₁", a2="2", a3="α₁")
    assert d.status == "withheld"
    assert d.reason == "η·ω = 0 in homotopy is not known"


# -- soundness gates ---------------------------------------------------------

def test_premise_deletion_sweep(ran):
    for did, d in ran.deductions.items():
        assert d.premises, did
        for p, status, same in premise_sweep(ran, did):
            assert not same, (did, p, status)


def test_replay_bit_for_bit(ran, chart):
    assert replay(chart, ran.log) == []


def test_replay_detects_tampering(ran, chart):
    lines = list(ran.log)
    rec = json.loads(lines[2])
    rec["conclusions"][0]["coset"] = "{τ²}"
    lines[2] = json.dumps(rec, ensure_ascii=False, sort_keys=True)
    assert replay(chart, lines) == [3]


def test_log_is_json_lines(ran, tmp_path):
    p = tmp_path / "log.jsonl"
    ran.write_log(p)
    recs = [json.loads(line) for line in p.read_text(encoding="utf-8").splitlines()]
    assert [r["rule"] for r in recs] == ["moss-e1", "moss-e1", "moss-r", "symmetry", "juggle", "shuffle"]
    assert all(set(r) >= {"rule", "premises", "checks", "conclusions"} for r in recs)


@st.composite
def adversarial_charts(draw):
    """Charts whose classes may support differentials past complete_through."""
    ct = draw(st.integers(1, 3))
    n = draw(st.integers(1, 6))
    cells = draw(st.lists(st.tuples(st.integers(-2, 2), st.integers(0, 5)), min_size=n, max_size=n, unique=True))
    classes = [{"name": f"c{i}", "stem": s, "filtration": f, "order": 2} for i, (s, f) in enumerate(cells)]
    regions = []
    if draw(st.booleans()):
        regions.append({"stems": [draw(st.integers(-3, 3)), None], "filtrations": [draw(st.integers(0, 6)), None]})
    return {"prime": 2, "exponent": 1, "complete_through": ct, "classes": classes, "known_regions": regions}


@settings(max_examples=150, deadline=None)
@given(adversarial_charts())
def test_permanence_never_claimed_past_bound(doc):
    C = parse_chart(doc)
    S = C.source()
    ct = doc["complete_through"]
    cls = {c["name"]: (c["stem"], c["filtration"]) for c in doc["classes"]}
    for name, (s, f) in cls.items():
        v = np.zeros(len(S.ambient_names((s, f))), dtype=np.int64)
        v[S.ambient_names((s, f)).index(name)] = 1
        st_ = S.permanence((s, f), v, 1, detections=False)
        # some class could still receive a d_R from it with R beyond the bound
        open_target = any(t[0] == s - 1 and t[1] - f > ct for t in cls.values())
        if open_target:
            assert st_.kind != "permanent", (name, str(st_))


def test_adversarial_unbounded_target():
    doc = {"prime": 2, "exponent": 1, "complete_through": 1,
           "classes": [{"name": "x", "stem": 1, "filtration": 0}, {"name": "y", "stem": 0, "filtration": 4}],
           "known_regions": [{"stems": [0, 0], "filtrations": [0, 3]}]}
    C = parse_chart(doc)
    st_ = C.source().permanence((1, 0), np.array([1]), 1, detections=False)
    assert st_.kind == "unknown"
    b = FactBase(C, Vocabulary([]))
    with pytest.raises(FactError):
        b.assert_fact(Detects("z", "h", 0))
    assert b.assert_fact(PermanentCycle("x"))  # consistent, but never derived by the engine


# -- rules against the oracle ------------------------------------------------

@pytest.mark.parametrize("seed,A", list(corpus(10, dim=14)))
def test_moss_r_rule_agrees_with_oracle(seed, A):
    for r in (1, 2):
        cands = detected_classes(A, r)
        for trip in itertools.islice(itertools.product(cands, repeat=3), 60):
            ok, ded, rep = rule_agrees_with_oracle(A, r, trip)
            assert ok, (r, ded.summary(), str(rep))


@pytest.mark.parametrize("seed,A", list(corpus(10, dim=14)))
def test_moss_e1_rule_agrees_with_oracle(seed, A):
    cands = detected_classes(A, 1)
    for trip in itertools.islice(itertools.product(cands, repeat=3), 60):
        ok, ded, rep = rule_e1_agrees_with_oracle(A, trip)
        assert ok, (ded.summary(), str(rep))


def test_rules_on_toy_instances():
    derived = 0
    for A in toy_instances():
        for r in range(1, A.L + 1):
            cands = detected_classes(A, r)
            for trip in itertools.islice(itertools.product(cands, repeat=3), 30):
                ok, ded, rep = rule_agrees_with_oracle(A, r, trip)
                assert ok, (A.name, r, ded.summary(), str(rep))
                derived += ded.derived
    assert derived > 0


def test_hz2n_e1_rule():
    # ⟨ρ, 2, 4⟩ = {4τ} over Z/8
    base = FactBase(hz2n(3), Vocabulary(["hρ", "h2", "h4"]))
    for e, h in (("ρ", "hρ"), ("2", "h2"), ("4", "h4")):
        base.assert_fact(Detects(e, h, 0))
    base.assert_fact(ZeroProductHomotopy("hρ", "h2"))
    base.assert_fact(ZeroProductHomotopy("h2", "h4"))
    d = rule_moss_e1(base, "ρ", "2", "4")
    assert d.derived and d.mode == "strict"
    assert [c.fields["element"] for c in d.conclusions if c.kind == "PermanentCycle"] == ["4τ"]


def test_trivial_filtration_e1_rule():
    # d v = ab with everything in filtration 0: the E_1 rule is the Toda bracket in H(A)
    g = [("a", 1, 0, ()), ("b", 1, 0, ()), ("v", 3, 0, ()), ("w", 3, 0, ())]
    A = free_associative(Modulus(3, 1), g, {"v": [(1, ("a", "b"))], "w": [(1, ("b", "a"))]},
                         max_len=3, length=1)
    base = FactBase(A, Vocabulary(["ha", "hb"]))
    base.assert_fact(Detects("a", "ha", 0))
    base.assert_fact(Detects("b", "hb", 0))
    base.assert_fact(ZeroProductHomotopy("ha", "hb"))
    base.assert_fact(ZeroProductHomotopy("hb", "ha"))
    d = rule_moss_e1(base, "a", "b", "a")
    assert d.derived and d.mode == "strict"
    assert d.conclusions[0].fields["element"] == "aw + va"
    cl = {n: A.cls(A.basis_vector(n), 0, None, (1,)) for n in "ab"}
    assert toda_bracket(cl["a"], cl["b"], cl["a"]).format() == "[aw + va]"


# -- shuffle against an exhaustive bracket computation ------------------------

@pytest.mark.parametrize("p", [2, 3])
def test_shuffle_matches_dga(p):
    g = [("a", 1, 0, ()), ("b", 1, 0, ()), ("v", 3, 0, ()), ("w", 3, 0, ())]
    A = free_associative(Modulus(p, 1), g, {"v": [(1, ("a", "b"))], "w": [(1, ("b", "a"))]},
                         max_len=3, length=1)
    cl = {n: A.cls(A.basis_vector(n), 0, None, (1,)) for n in "ab"}
    L = toda_bracket(cl["a"], cl["b"], cl["a"])
    R = toda_bracket(cl["b"], cl["a"], cl["b"])
    assert L.strict and R.strict
    base = FactBase(A, Vocabulary(["a", "b", "e", "f"]), auxiliary=True)
    base.assert_fact(BracketContains(["a", "b", "a"], "e"))
    base.assert_fact(BracketContains(["b", "a", "b"], "f", indeterminacy=[]))
    d = rule_shuffle(base, "b", ["a", "b", "a"])
    assert d.derived and d.mode == "equality"
    h = d.conclusions[0].fields
    assert (h["x"], h["y"], h["by"]) == ("b", "e", base.vocab.mul("f", "a"))
    e = A.cls(L.homology.section(L.representative), 0, None, L.homology.grade)
    f = A.cls(R.homology.section(R.representative), 0, None, R.homology.grade)
    lhs = homology_product(cl["b"], e).coords
    rhs = homology_product(f, cl["a"]).coords
    assert lhs.any()
    assert (lhs == rhs).all() or (lhs == (-rhs) % A.m).all()
