"""A fact base over a chart and checked inference rules for brackets.

Facts are tagged records with provenance (axiom, or the deduction that
produced them).  Rules read the base, run their checks, and propose a
:class:`Deduction`; only ``derived`` deductions are committed.  A rule never
fires on an unknown premise: it is ``withheld`` and the trace names what is
missing.  A false premise makes it ``refused``.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coset import Coset, format_element
from .linalg import PreconditionError
from .sseq import (
    MasseyUndefined,
    _source,
    crossing_check,
    er_page,
    key_add,
    massey_on_page,
    parse_element,
)

__all__ = [
    "Vocabulary",
    "Fact",
    "Deduction",
    "FactBase",
    "FactError",
    "ConsistencyError",
    "AuxiliaryRuleError",
    "PermanentCycle",
    "Detects",
    "ZeroProductHomotopy",
    "ZeroProductPage",
    "BracketContains",
    "MasseyContains",
    "HiddenExtension",
    "rule_moss_r",
    "rule_moss_e1",
    "rule_shuffle",
    "rule_symmetry",
    "rule_juggle",
    "explain",
    "replay",
    "premise_sweep",
    "RULES",
    "AUXILIARY",
]


class FactError(ValueError):
    """A fact that does not make sense against the chart."""


class ConsistencyError(ValueError):
    def __init__(self, message, facts=()):
        super().__init__(message)
        self.facts = list(facts)


class AuxiliaryRuleError(ValueError):
    pass


# -- homotopy names ----------------------------------------------------------

_SUP = "⁰¹²³⁴⁵⁶⁷⁸⁹"
_SUP_MAP = {c: str(i) for i, c in enumerate(_SUP)}


def _sup(n: int) -> str:
    return "".join(_SUP[int(c)] for c in str(n))


class Vocabulary:
    """Monomials in named homotopy classes, printed in a fixed atom order.

    Atoms are matched greedily (longest first), so an atom like ``ωτ²`` is
    read as one name even though it ends in a superscript.
    """

    def __init__(self, atoms=()):
        self.atoms = list(atoms)

    def add(self, atom: str):
        if atom not in self.atoms:
            self.atoms.append(atom)

    def parse(self, text: str):
        """``None`` for zero, else a sorted tuple of (atom, exponent)."""
        text = str(text).replace(" ", "").replace("·", "")
        if text == "0":
            return None
        if text in ("", "1"):
            return ()
        counts, i = self._parse_seq(text, 0, top=True)
        return self._canon(counts)

    def _parse_seq(self, text, i, top):
        counts = Counter()
        while i < len(text):
            if text[i] == ")":
                if top:
                    raise FactError(f"unbalanced parenthesis in {text!r}")
                return counts, i
            if text[i] == "(":
                inner, j = self._parse_seq(text, i + 1, top=False)
                if j >= len(text) or text[j] != ")":
                    raise FactError(f"unbalanced parenthesis in {text!r}")
                i = j + 1
                e, i = self._exponent(text, i)
                for a, c in inner.items():
                    counts[a] += c * e
                continue
            best = None
            for a in self.atoms:
                if text.startswith(a, i) and (best is None or len(a) > len(best)):
                    best = a
            if best is None:
                raise FactError(f"unknown homotopy name at {text[i:]!r} in {text!r}")
            i += len(best)
            e, i = self._exponent(text, i)
            counts[best] += e
        if not top:
            raise FactError(f"unbalanced parenthesis in {text!r}")
        return counts, i

    @staticmethod
    def _exponent(text, i):
        j = i
        if j < len(text) and text[j] == "^":
            j += 1
            k = j
            while k < len(text) and text[k].isdigit():
                k += 1
            return int(text[j:k] or 1), k
        digits = ""
        while j < len(text) and text[j] in _SUP_MAP:
            digits += _SUP_MAP[text[j]]
            j += 1
        return (int(digits) if digits else 1), j

    def _canon(self, counts):
        order = {a: t for t, a in enumerate(self.atoms)}
        return tuple(sorted(((a, c) for a, c in counts.items() if c), key=lambda ac: order[ac[0]]))

    def format(self, mono) -> str:
        if mono is None:
            return "0"
        if not mono:
            return "1"
        out = []
        for a, e in mono:
            base = re.sub(r"[⁰-⁹_{}/0-9₀-₉]", "", a)
            if e == 1:
                out.append(a)
            elif len(base) > 1 or a[-1] in _SUP:
                out.append(f"({a}){_sup(e)}")
            else:
                out.append(a + _sup(e))
        return "".join(out)

    def canon(self, text: str) -> str:
        return self.format(self.parse(text))

    def mul(self, *texts) -> str:
        tot = Counter()
        for t in texts:
            m = self.parse(t)
            if m is None:
                return "0"
            for a, e in m:
                tot[a] += e
        return self.format(self._canon(tot))

    def divides(self, small: str, big: str) -> bool:
        s, b = self.parse(small), self.parse(big)
        if b is None:
            return True
        if s is None:
            return False
        bd = dict(b)
        return all(bd.get(a, 0) >= e for a, e in s)


# -- facts -------------------------------------------------------------------

@dataclass
class Fact:
    kind: str
    fields: dict
    provenance: dict = field(default_factory=lambda: {"axiom": True})

    def ident(self) -> str:
        return json.dumps([self.kind, self.fields], ensure_ascii=False, sort_keys=True)

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.fields, "provenance": self.provenance}

    @classmethod
    def from_json(cls, d: dict) -> "Fact":
        d = dict(d)
        kind = d.pop("kind")
        prov = d.pop("provenance", {"axiom": True})
        d.pop("id", None)
        if kind not in _KINDS:
            raise FactError(f"unknown fact kind {kind!r}")
        return cls(kind, _KINDS[kind](**d).fields, prov)

    @property
    def is_axiom(self) -> bool:
        return bool(self.provenance.get("axiom"))

    def __str__(self):
        f = self.fields
        k = self.kind
        if k == "PermanentCycle":
            return f"PermanentCycle({f['element']})"
        if k == "Detects":
            return f"Detects({f['element']}, {f['homotopy']}, filtration {f['filtration']})"
        if k == "ZeroProductHomotopy":
            return f"ZeroProductHomotopy({'·'.join(f['factors'])} = 0)"
        if k == "ZeroProductPage":
            return f"ZeroProductPage({f['a']}·{f['b']} = 0 on E_{f['page']})"
        if k == "BracketContains":
            br = _bracket_text(f["inputs"])
            parts = []
            if f["element"] is not None:
                parts.append(f"{br} ∋ {f['element']}")
                if f["witness"]:
                    parts.append(f["witness"])
            elif f["witness"]:
                parts.append(f"{br} ∋ an element {f['witness']}")
            else:
                parts.append(f"{br} defined")
            if f["indeterminacy"] is not None:
                ind = ", ".join(f["indeterminacy"]) if f["indeterminacy"] else "0"
                parts.append(f"indeterminacy ⟨{ind}⟩")
            return f"BracketContains({'; '.join(parts)})"
        if k == "MasseyContains":
            br = _bracket_text(f["inputs"])
            where = "E_1 Toda bracket" if f["bracket"] == "toda-e1" else f"E_{f['page']}"
            strict = " (strict)" if f["strict"] else ""
            return f"MasseyContains({br} on {where}: {f['coset']}{strict})"
        if k == "HiddenExtension":
            rel = "=" if f["exact"] else "∈"
            return f"HiddenExtension({f['x']}·{f['y']} {rel} {f['by']})"
        return f"{k}({f})"


def _bracket_text(inputs) -> str:
    return "⟨" + ", ".join(inputs) + "⟩"


def PermanentCycle(element: str) -> Fact:
    return Fact("PermanentCycle", {"element": element})


def Detects(element: str, homotopy: str, filtration: int) -> Fact:
    return Fact("Detects", {"element": element, "homotopy": homotopy, "filtration": int(filtration)})


def ZeroProductHomotopy(*factors, **kw) -> Fact:
    if "factors" in kw:
        factors = kw["factors"]
    if len(factors) == 1 and isinstance(factors[0], (list, tuple)):
        factors = factors[0]
    return Fact("ZeroProductHomotopy", {"factors": list(factors)})


def ZeroProductPage(a: str, b: str, page: int) -> Fact:
    return Fact("ZeroProductPage", {"a": a, "b": b, "page": int(page)})


def BracketContains(inputs, element: Optional[str] = None, witness: str = "",
                    indeterminacy=None) -> Fact:
    return Fact("BracketContains", {"inputs": list(inputs), "element": element, "witness": witness,
                                    "indeterminacy": None if indeterminacy is None else list(indeterminacy)})


def MasseyContains(inputs, page: int, coset: str, strict: bool, representative: str = "",
                   bracket: str = "massey") -> Fact:
    return Fact("MasseyContains", {"inputs": list(inputs), "page": int(page), "coset": coset,
                                   "representative": representative or coset.strip("{}"),
                                   "strict": bool(strict), "bracket": bracket})


def HiddenExtension(x: str, y: str, by: str, exact: bool = True) -> Fact:
    return Fact("HiddenExtension", {"x": x, "y": y, "by": by, "exact": bool(exact)})


_KINDS = {
    "PermanentCycle": PermanentCycle,
    "Detects": Detects,
    "ZeroProductHomotopy": ZeroProductHomotopy,
    "ZeroProductPage": ZeroProductPage,
    "BracketContains": BracketContains,
    "MasseyContains": MasseyContains,
    "HiddenExtension": HiddenExtension,
}


# -- deductions --------------------------------------------------------------

RULES = {
    "moss-r": "comparison theorem at E_r: a Massey product of permanent cycles, formed on E_r "
              "under the crossing hypothesis, contains a permanent cycle converging to an element "
              "of the Toda bracket",
    "moss-e1": "comparison theorem at E_1: an E_1-page Toda bracket of permanent cycles, under the "
               "crossing hypothesis at E_0, contains a permanent cycle converging to an element "
               "of the Toda bracket",
    "shuffle": "auxiliary rule (cited, not proved): shuffle x⟨a,b,c⟩ = ⟨x,a,b⟩c",
    "symmetry": "auxiliary rule: bracket symmetry ⟨a,b,c⟩ = ±⟨c,b,a⟩ (signs not tracked)",
    "juggle": "auxiliary rule: juggling ⟨a,b,c⟩d ⊆ ⟨a,b,cd⟩",
}
AUXILIARY = {"shuffle", "symmetry", "juggle"}


@dataclass
class Deduction:
    rule: str
    args: dict
    status: str = "derived"              # derived | refused | withheld
    premises: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    conclusions: list = field(default_factory=list)
    reason: str = ""
    mode: str = ""
    id: Optional[int] = None
    conclusion_ids: list = field(default_factory=list)

    @property
    def derived(self) -> bool:
        return self.status == "derived"

    @property
    def auxiliary(self) -> bool:
        return self.rule in AUXILIARY

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "rule": self.rule,
            "args": self.args,
            "status": self.status,
            "mode": self.mode,
            "auxiliary": self.auxiliary,
            "premises": list(self.premises),
            "checks": [list(c) for c in self.checks],
            "conclusions": [dict(c.to_json(), id=i) for c, i in
                            zip(self.conclusions, self.conclusion_ids or [None] * len(self.conclusions))],
            "reason": self.reason,
        }

    def summary(self) -> str:
        if not self.derived:
            return f"{self.rule}: {self.status}: {self.reason}"
        return "; ".join(_conclusion_text(c) for c in self.conclusions)


def _conclusion_text(f: Fact) -> str:
    d = f.fields
    if f.kind == "HiddenExtension":
        return f"{d['x']}·{d['y']} {'=' if d['exact'] else '∈'} {d['by']}"
    if f.kind == "BracketContains" and d["element"] is None and d["witness"]:
        return f"{_bracket_text(d['inputs'])} contains an element {d['witness']}"
    if f.kind == "BracketContains" and d["element"] is not None:
        return f"{_bracket_text(d['inputs'])} contains {d['element']}" + (f" ({d['witness']})" if d["witness"] else "")
    if f.kind == "MasseyContains":
        return f"{_bracket_text(d['inputs'])} = {d['coset']}" + (" (strict)" if d["strict"] else "")
    if f.kind == "PermanentCycle":
        return f"{d['element']} is a permanent cycle"
    return str(f)


class _Refuse(Exception):
    pass


class _Withhold(Exception):
    pass


# -- the fact base -----------------------------------------------------------

class FactBase:
    """Facts about one chart (or filtered DGA), with deductions and a log."""

    def __init__(self, chart=None, vocabulary: Optional[Vocabulary] = None, auxiliary: bool = False):
        self.chart = chart
        self.source = _source(chart) if chart is not None else None
        self.vocab = vocabulary or Vocabulary()
        self.auxiliary = auxiliary
        self.facts = {}
        self.deductions = {}
        self._ident = {}
        self._next = 1
        self.log = []

    # construction
    @classmethod
    def from_chart(cls, doc, auxiliary: bool = False) -> "FactBase":
        hom = doc.homotopy or {}
        base = cls(doc, Vocabulary(hom.get("atoms", [])), auxiliary=auxiliary)
        for d in doc.detections:
            key, _ = parse_element(base.source, d.element)
            base.assert_fact(Detects(d.element, d.homotopy, key[1]))
        for z in hom.get("zero_products", []):
            base.assert_fact(ZeroProductHomotopy(z))
        for b in hom.get("brackets", []):
            base.assert_fact(BracketContains(b["inputs"], b.get("contains"), b.get("witness", ""),
                                             b.get("indeterminacy")))
        for b in doc.e1_brackets:
            base.assert_fact(MasseyContains(b["inputs"], 1, "{" + b["contains"] + "}" if b.get("strict")
                                            else b["contains"], bool(b.get("strict")), b["contains"],
                                            bracket="toda-e1"))
        return base

    def copy_without(self, drop) -> "FactBase":
        """A fresh base holding the same facts minus ``drop`` and everything derived from them."""
        gone = set(drop)
        changed = True
        while changed:
            changed = False
            for i, f in self.facts.items():
                if i in gone or f.is_axiom:
                    continue
                if set(f.provenance.get("premises", [])) & gone:
                    gone.add(i)
                    changed = True
        new = FactBase(self.chart, Vocabulary(self.vocab.atoms), self.auxiliary)
        for i, f in self.facts.items():
            if i in gone:
                continue
            new.facts[i] = f
            new._ident[f.ident()] = i
        new._next = self._next
        return new

    # canonical forms
    def canon_element(self, text) -> str:
        if self.source is None:
            return str(text)
        try:
            key, v = parse_element(self.source, text)
        except (KeyError, ValueError) as e:
            raise FactError(f"{text!r} is not an element of the chart: {e}") from None
        if not v.any():
            return "0"
        return format_element(v, self.source.ambient_names(key))

    def element_key(self, text):
        return parse_element(self.source, text)

    def canon_h(self, text) -> str:
        return self.vocab.canon(text)

    def _normalize(self, fact: Fact) -> Fact:
        f = dict(fact.fields)
        k = fact.kind
        if k in ("PermanentCycle", "Detects"):
            f["element"] = self.canon_element(f["element"])
            if k == "Detects":
                f["homotopy"] = self.canon_h(f["homotopy"])
                key, _ = self.element_key(f["element"]) if f["element"] != "0" else ((0, f["filtration"]), None)
                if int(f["filtration"]) != key[1]:
                    raise FactError(f"{f['element']} has filtration {key[1]}, not {f['filtration']}")
        elif k == "ZeroProductHomotopy":
            f["factors"] = [self.canon_h(x) for x in f["factors"]]
            if len(f["factors"]) < 2:
                raise FactError("a zero product needs at least two factors")
        elif k == "ZeroProductPage":
            f["a"], f["b"] = self.canon_element(f["a"]), self.canon_element(f["b"])
        elif k == "BracketContains":
            f["inputs"] = [self.canon_h(x) for x in f["inputs"]]
            if f["element"] is not None:
                f["element"] = self.canon_h(f["element"])
            if f["indeterminacy"] is not None:
                f["indeterminacy"] = [self.canon_h(x) for x in f["indeterminacy"]]
        elif k == "MasseyContains":
            f["inputs"] = [self.canon_element(x) for x in f["inputs"]]
            if f["bracket"] == "toda-e1":
                f["representative"] = self.canon_element(f["representative"])
        elif k == "HiddenExtension":
            f["x"], f["y"], f["by"] = self.canon_h(f["x"]), self.canon_h(f["y"]), self.canon_h(f["by"])
        if k in ("BracketContains", "MasseyContains") and len(f["inputs"]) != 3:
            raise FactError("brackets take exactly three inputs")
        return Fact(k, f, fact.provenance)

    # storage
    def assert_fact(self, fact: Fact, provenance: Optional[dict] = None) -> int:
        if fact.kind not in _KINDS:
            raise FactError(f"unknown fact kind {fact.kind!r}")
        fact = self._normalize(fact)
        if provenance is not None:
            fact.provenance = provenance
        ident = fact.ident()
        if ident in self._ident:
            return self._ident[ident]
        self._check_consistent(fact)
        i = self._next
        self._next += 1
        self.facts[i] = fact
        self._ident[ident] = i
        return i

    def find(self, fact: Fact) -> Optional[int]:
        return self._ident.get(self._normalize(fact).ident())

    def query(self, kind: Optional[str] = None, **pattern) -> list:
        """``[(id, fact)]`` matching the kind and every given field."""
        out = []
        for i, f in self.facts.items():
            if kind is not None and f.kind != kind:
                continue
            if all(f.fields.get(k) == v for k, v in pattern.items()):
                out.append((i, f))
        return out

    def _check_consistent(self, fact: Fact):
        k, f = fact.kind, fact.fields
        S = self.source
        if k in ("PermanentCycle", "Detects") and S is not None and f["element"] != "0":
            key, v = self.element_key(f["element"])
            st = S.permanence(key, v, 1, detections=False)
            if st.kind == "dies":
                raise ConsistencyError(f"{fact} contradicts the recorded differential {st.witness}", [str(fact)])
        if k == "ZeroProductHomotopy":
            prod = self.vocab.mul(*f["factors"])
            for i, h in self.query("HiddenExtension", exact=True):
                if h.fields["by"] != "0" and self.vocab.divides(prod, self.vocab.mul(h.fields["x"], h.fields["y"])):
                    raise ConsistencyError(f"{fact} contradicts #{i} {h}", [str(fact), f"#{i}"])
        if k == "HiddenExtension" and f["exact"] and f["by"] != "0":
            prod = self.vocab.mul(f["x"], f["y"])
            for i, z in self.query("ZeroProductHomotopy"):
                if self.vocab.divides(self.vocab.mul(*z.fields["factors"]), prod):
                    raise ConsistencyError(f"{fact} contradicts #{i} {z}", [str(fact), f"#{i}"])

    # deductions
    def propose(self, rule: str, **args) -> Deduction:
        fn = _RULE_FUNCS.get(rule)
        if fn is None:
            raise KeyError(f"unknown rule {rule!r}; choose from {sorted(_RULE_FUNCS)}")
        return fn(self, **args)

    def commit(self, ded: Deduction) -> Deduction:
        ded.id = len(self.deductions) + 1
        if ded.derived:
            prov = {"rule": ded.rule, "deduction": ded.id, "premises": list(ded.premises)}
            if ded.auxiliary:
                prov["auxiliary"] = True
            ids = []
            for c in ded.conclusions:
                ids.append(self.assert_fact(Fact(c.kind, c.fields), dict(prov)))
            ded.conclusion_ids = ids
        self.deductions[ded.id] = ded
        self.log.append(json.dumps(ded.to_json(), ensure_ascii=False, sort_keys=True))
        return ded

    def apply(self, rule: str, **args) -> Deduction:
        return self.commit(self.propose(rule, **args))

    def run_step(self, step: dict) -> Deduction:
        step = dict(step)
        rule = step.pop("rule")
        if rule in ("moss-r", "moss-e1"):
            a, a2, a3 = step.pop("inputs")
            args = {"a": a, "a2": a2, "a3": a3}
            if rule == "moss-r":
                args["r"] = int(step.pop("page", 1))
            return self.apply(rule, **args)
        return self.apply(rule, **step)

    def write_log(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.log:
                fh.write(line + "\n")

    def facts_json(self) -> list:
        return [dict(f.to_json(), id=i) for i, f in self.facts.items()]

    def load_facts(self, records) -> list:
        """Assert a JSON array of tagged fact records as axioms."""
        return [self.assert_fact(Fact.from_json(r), {"axiom": True}) for r in records]


# -- premise helpers ---------------------------------------------------------

class _Ctx:
    def __init__(self, base: FactBase, rule: str, args: dict):
        self.base = base
        self.ded = Deduction(rule, args)

    def premise(self, i):
        if i not in self.ded.premises:
            self.ded.premises.append(i)

    def check(self, name, outcome):
        self.ded.checks.append((name, str(outcome)))

    def refuse(self, why):
        raise _Refuse(why)

    def withhold(self, why):
        raise _Withhold(why)

    # page-level
    def permanent(self, elem: str):
        b = self.base
        # a detection is also needed for the homotopy name, so prefer it
        for i, f in b.query("Detects", element=elem):
            self.premise(i)
            self.check(f"permanence of {elem}", f"permanent: detects {f.fields['homotopy']} (fact #{i})")
            return
        for i, f in b.query("PermanentCycle", element=elem):
            self.premise(i)
            self.check(f"permanence of {elem}", f"permanent (fact #{i})")
            return
        if b.source is not None and elem != "0":
            key, v = b.element_key(elem)
            st = b.source.permanence(key, v, 1, detections=False)
            self.check(f"permanence of {elem}", st)
            if st.kind == "dies":
                self.refuse(f"{elem} is not a permanent cycle: {st.witness}")
            if st.kind == "permanent":
                return
        self.withhold(f"permanence of {elem} is unknown (no PermanentCycle or Detects fact)")

    def detected(self, elem: str) -> str:
        for i, f in self.base.query("Detects", element=elem):
            self.premise(i)
            self.check(f"detection of {elem}", f"{f.fields['homotopy']} (fact #{i})")
            return f.fields["homotopy"]
        self.withhold(f"no Detects fact names the homotopy class detected by {elem}")

    def name_of(self, elem: str) -> Optional[str]:
        """Homotopy name for a conclusion element; naming only, not a premise."""
        for i, f in self.base.query("Detects", element=elem):
            self.check(f"name of the class detected by {elem}", f"{f.fields['homotopy']} (fact #{i})")
            return f.fields["homotopy"]
        return None

    # homotopy-level
    def zero_product(self, *factors, required=True) -> bool:
        b = self.base
        prod = b.vocab.mul(*factors)
        label = "·".join(factors)
        if prod == "0":
            self.check(f"{label} = 0", "a factor is zero")
            return True
        for i, z in b.query("ZeroProductHomotopy"):
            zp = b.vocab.mul(*z.fields["factors"])
            if b.vocab.divides(zp, prod):
                self.premise(i)
                how = "" if zp == prod else f" (contains {'·'.join(z.fields['factors'])})"
                self.check(f"{label} = 0 in homotopy", f"fact #{i}{how}")
                return True
        for i, h in b.query("HiddenExtension", exact=True):
            if b.vocab.mul(h.fields["x"], h.fields["y"]) == prod and h.fields["by"] != "0":
                self.refuse(f"{label} = {h.fields['by']} ≠ 0 (fact #{i})")
        if required:
            self.withhold(f"{label} = 0 in homotopy is not known")
        self.check(f"{label} = 0 in homotopy", "unknown")
        return False

    def crossing(self, key, r, label):
        res = crossing_check(self.base.chart, key, r)
        detail = str(res)
        if res.checked:
            detail += " [" + "; ".join(f"E_{R}{k}: {s}" for k, R, s in res.checked) + "]"
        self.check(f"crossing at {label} {key[:2]} on E_{r}" if r else f"crossing at {label} {key[:2]} on E_0", detail)
        if res.status == "fails":
            self.refuse(f"crossing hypothesis fails at {key[:2]}: {res.differential}")
        if res.status == "unknown":
            self.withhold(f"crossing hypothesis at {key[:2]} is unknown: {res.witness}")


def _finish(ctx: _Ctx, body) -> Deduction:
    try:
        body()
        ctx.ded.status = "derived"
    except _Refuse as e:
        ctx.ded.status, ctx.ded.reason, ctx.ded.conclusions = "refused", str(e), []
    except _Withhold as e:
        ctx.ded.status, ctx.ded.reason, ctx.ded.conclusions = "withheld", str(e), []
    return ctx.ded


def _coset_text(C: Coset) -> str:
    rep = C.format()
    if C.strict:
        return "{" + (rep or "0") + "}"
    gens = [format_element(g, C.names) for g in C.subgroup_rows if C.group.reduce(g).any()]
    return f"{rep or '0'} + ⟨{', '.join(gens)}⟩"


def _page_element(ctx, P, text):
    try:
        return P.named(text)
    except (KeyError, ValueError) as e:
        raise FactError(f"{text!r} is not an element of the chart: {e}") from None


# -- rules -------------------------------------------------------------------

def rule_moss_r(base: FactBase, a: str, a2: str, a3: str, r: int = 1) -> Deduction:
    """Massey product on E_r of permanent cycles -> element of the Toda bracket."""
    r = int(r)
    ins = [base.canon_element(x) for x in (a, a2, a3)]
    ctx = _Ctx(base, "moss-r", {"a": ins[0], "a2": ins[1], "a3": ins[2], "r": r})

    def body():
        for e in ins:
            ctx.permanent(e)
        hs = [ctx.detected(e) for e in ins]
        ctx.zero_product(hs[0], hs[1])
        ctx.zero_product(hs[1], hs[2])
        P = er_page(base.chart, r)
        els = [_page_element(ctx, P, e) for e in ins]
        for e, x in zip(ins, els):
            try:
                dx = P.d(x)
            except PreconditionError as err:
                ctx.withhold(f"d_{r}({e}) is unknown: {err}")
            if not dx.is_zero():
                ctx.refuse(f"{e} is not a d_{r}-cycle: d_{r}({e}) = {dx.format()}")
        try:
            p12, p23 = P.mul(els[0], els[1]), P.mul(els[1], els[2])
        except PreconditionError as err:
            ctx.withhold(str(err))
        try:
            C = massey_on_page(P, *els)
        except MasseyUndefined as err:
            ctx.refuse(f"{err}")
        except PreconditionError as err:
            ctx.withhold(str(err))
        ctx.check(f"{ins[0]}·{ins[1]} hit by d_{r}", f"yes ({p12.format()})")
        ctx.check(f"{ins[1]}·{ins[2]} hit by d_{r}", f"yes ({p23.format()})")
        ctx.crossing(key_add(els[0].key, els[1].key), r, f"{ins[0]}·{ins[1]}")
        ctx.crossing(key_add(els[1].key, els[2].key), r, f"{ins[1]}·{ins[2]}")
        text = _coset_text(C)
        ctx.check(f"Massey product on E_{r}", f"{_bracket_text(ins)} = {text} in E_{r + 1}")
        G = C.page.groups.get(C.key)
        rep_amb = "0"
        if G is not None and C.representative.any():
            rep_amb = format_element(G.section(C.representative), G.ambient_names)
        concl = [MasseyContains(ins, r + 1, text, C.strict, rep_amb)]
        if C.strict and rep_amb == "0":
            concl.append(BracketContains(hs, None, f"of filtration above {C.key[1]}"))
        elif C.strict:
            name = ctx.name_of(rep_amb)
            wit = f"{name} detected by {rep_amb}" if name else f"detected by {rep_amb}"
            concl.append(PermanentCycle(rep_amb))
            concl.append(BracketContains(hs, name, wit))
        else:
            concl.append(BracketContains(hs, None, f"detected by a permanent cycle in {text}"))
        ctx.ded.conclusions = concl
        ctx.ded.mode = "strict" if C.strict else "existential"

    return _finish(ctx, body)


def rule_moss_e1(base: FactBase, a: str, a2: str, a3: str) -> Deduction:
    """E_1-page Toda bracket of permanent cycles -> element of the Toda bracket."""
    ins = [base.canon_element(x) for x in (a, a2, a3)]
    ctx = _Ctx(base, "moss-e1", {"a": ins[0], "a2": ins[1], "a3": ins[2]})

    def body():
        for e in ins:
            ctx.permanent(e)
        hs = [ctx.detected(e) for e in ins]
        ctx.zero_product(hs[0], hs[1])
        ctx.zero_product(hs[1], hs[2])
        P = er_page(base.chart, 1)
        els = [_page_element(ctx, P, e) for e in ins]
        try:
            p12, p23 = P.mul(els[0], els[1]), P.mul(els[1], els[2])
        except PreconditionError as err:
            ctx.withhold(str(err))
        for (x, y), p in (((0, 1), p12), ((1, 2), p23)):
            if not p.is_zero():
                ctx.refuse(f"{ins[x]}·{ins[y]} = {p.format()} ≠ 0 on E_1")
            ctx.check(f"{ins[x]}·{ins[y]} = 0 on E_1", "yes")
        facts = base.query("MasseyContains", inputs=ins, bracket="toda-e1")
        if not facts:
            facts = _computed_e1_bracket(base, ctx, ins, els)
        if not facts:
            ctx.withhold(f"no E_1 Toda bracket fact for {_bracket_text(ins)}")
        i, fb = facts[0]
        if i is not None:
            ctx.premise(i)
            ctx.check(f"E_1 Toda bracket {_bracket_text(ins)}", f"{fb.fields['coset']} (fact #{i})")
        ctx.crossing(key_add(els[0].key, els[1].key), 0, f"{ins[0]}·{ins[1]}")
        ctx.crossing(key_add(els[1].key, els[2].key), 0, f"{ins[1]}·{ins[2]}")
        rep = fb.fields["representative"]
        concl = []
        if fb.fields["strict"] and rep == "0":
            f_out = els[0].key[1] + els[1].key[1] + els[2].key[1]
            concl.append(BracketContains(hs, None, f"of filtration above {f_out}"))
            ctx.ded.mode = "strict"
        elif fb.fields["strict"]:
            name = ctx.name_of(rep)
            wit = f"{name} detected by {rep}" if name else f"detected by {rep}"
            concl.append(PermanentCycle(rep))
            concl.append(BracketContains(hs, name, wit))
            ctx.ded.mode = "strict"
        else:
            concl.append(BracketContains(hs, None, f"detected by a permanent cycle in "
                                                   f"the E_1 bracket {fb.fields['coset']}"))
            ctx.ded.mode = "existential"
        ctx.ded.conclusions = concl

    return _finish(ctx, body)


def _computed_e1_bracket(base, ctx, ins, els):
    """Over a filtered DGA: the E_1 Toda bracket, computed on the associated graded."""
    from .dga import BracketUndefined, FilteredDGA

    A = base.chart
    if not isinstance(A, FilteredDGA):
        return []
    gr = getattr(A, "_gr", None)
    if gr is None:
        from .sseq import associated_graded

        gr = A._gr = associated_graded(A)
    S = base.source
    xs = []
    for x in els:
        c = np.zeros(A.dim, dtype=np.int64)
        c[S.ambient_index(x.key)] = x.ambient()
        xs.append(gr.cls(c, 0, None, (x.key[0],) + tuple(x.key[2:]) + (x.key[1],)))
    from .dga import toda_bracket

    try:
        E = toda_bracket(*xs)
    except BracketUndefined as err:
        ctx.refuse(f"E_1 Toda bracket {_bracket_text(ins)} is undefined: {err}")
    ko = key_add(els[0].key, els[1].key, els[2].key)
    ko = (ko[0] + 1,) + tuple(ko[1:])
    names = S.ambient_names(ko)
    rep = "0"
    if E.representative.any():
        rep = format_element(E.homology.section(E.representative)[S.ambient_index(ko)], names)
    text = "{" + rep + "}" if E.strict else f"{rep} + indeterminacy of order {E.indeterminacy_size}"
    ctx.check(f"E_1 Toda bracket {_bracket_text(ins)}", f"{text} (computed on the associated graded)")
    return [(None, MasseyContains(ins, 1, text, E.strict, rep, bracket="toda-e1"))]


def _need_aux(base, rule):
    if not base.auxiliary:
        raise AuxiliaryRuleError(f"{rule} is an auxiliary rule; enable auxiliary rules to use it")


def _bracket_fact(ctx, inputs, with_element=True):
    b = ctx.base
    for i, f in b.query("BracketContains", inputs=inputs):
        if with_element and f.fields["element"] is None:
            continue
        if not with_element and f.fields["indeterminacy"] is None:
            continue
        return i, f
    return None, None


def rule_symmetry(base: FactBase, bracket) -> Deduction:
    """⟨a,b,c⟩ ∋ e gives ⟨c,b,a⟩ ∋ e (up to sign)."""
    _need_aux(base, "symmetry")
    ins = [base.canon_h(x) for x in bracket]
    ctx = _Ctx(base, "symmetry", {"bracket": ins})

    def body():
        i, f = _bracket_fact(ctx, ins)
        if i is None:
            ctx.withhold(f"no element of {_bracket_text(ins)} is known")
        ctx.premise(i)
        ctx.check(f"{_bracket_text(ins)} ∋ {f.fields['element']}", f"fact #{i}")
        rev = list(reversed(ins))
        ctx.ded.conclusions = [BracketContains(rev, f.fields["element"], f"by symmetry of {_bracket_text(ins)}",
                                               f.fields["indeterminacy"])]
        ctx.ded.mode = "containment"

    return _finish(ctx, body)


def rule_juggle(base: FactBase, bracket, by: str) -> Deduction:
    """⟨a,b,c⟩ ∋ e gives ⟨a,b,cd⟩ ∋ ed."""
    _need_aux(base, "juggle")
    ins = [base.canon_h(x) for x in bracket]
    d = base.canon_h(by)
    ctx = _Ctx(base, "juggle", {"bracket": ins, "by": d})

    def body():
        i, f = _bracket_fact(ctx, ins)
        if i is None:
            ctx.withhold(f"no element of {_bracket_text(ins)} is known")
        ctx.premise(i)
        ctx.check(f"{_bracket_text(ins)} ∋ {f.fields['element']}", f"fact #{i}")
        v = base.vocab
        out = [ins[0], ins[1], v.mul(ins[2], d)]
        ctx.ded.conclusions = [BracketContains(out, v.mul(f.fields["element"], d),
                                               f"from {_bracket_text(ins)}·{d}")]
        ctx.ded.mode = "containment"

    return _finish(ctx, body)


def rule_shuffle(base: FactBase, x: str, bracket) -> Deduction:
    """x·⟨a,b,c⟩ = ⟨x,a,b⟩·c; equality only when the right side is a single element."""
    _need_aux(base, "shuffle")
    v = base.vocab
    x = base.canon_h(x)
    ins = [base.canon_h(t) for t in bracket]
    ctx = _Ctx(base, "shuffle", {"x": x, "bracket": ins})

    def body():
        i, f = _bracket_fact(ctx, ins)
        if i is None:
            ctx.withhold(f"no element of {_bracket_text(ins)} is known")
        ctx.premise(i)
        e = f.fields["element"]
        ctx.check(f"{_bracket_text(ins)} ∋ {e}", f"fact #{i}")
        left = [x, ins[0], ins[1]]
        if x == "0":
            ctx.check(f"{_bracket_text(left)}", "contains 0 since x = 0")
            ctx.ded.conclusions = [HiddenExtension("0", e, "0", exact=True)]
            ctx.ded.mode = "trivial"
            return
        j, g = _bracket_fact(ctx, left)
        if j is None:
            ctx.withhold(f"no element of {_bracket_text(left)} is known")
        ctx.premise(j)
        e2 = g.fields["element"]
        ctx.check(f"{_bracket_text(left)} ∋ {e2}", f"fact #{j}")
        rhs = v.mul(e2, ins[2])
        # equality needs the right-hand side to be a single element
        exact = False
        k, h = _bracket_fact(ctx, left, with_element=False)
        if k is None:
            ctx.check(f"indeterminacy of {_bracket_text(left)}", "unknown: containment only")
        else:
            ctx.premise(k)
            gens = h.fields["indeterminacy"]
            ctx.check(f"indeterminacy of {_bracket_text(left)}",
                      f"generated by {', '.join(gens) if gens else 'nothing'} (fact #{k})")
            exact = all(ctx.zero_product(gen, ins[2], required=False) for gen in gens)
            if not exact:
                ctx.check(f"indeterminacy annihilated by {ins[2]}", "not established: containment only")
            else:
                ctx.check(f"indeterminacy annihilated by {ins[2]}", "yes")
        ctx.ded.conclusions = [HiddenExtension(x, e, rhs, exact=exact)]
        ctx.ded.mode = "equality" if exact else "containment"

    return _finish(ctx, body)


_RULE_FUNCS = {
    "moss-r": rule_moss_r,
    "moss-e1": rule_moss_e1,
    "shuffle": rule_shuffle,
    "symmetry": rule_symmetry,
    "juggle": rule_juggle,
}


# -- traces and replay -------------------------------------------------------

def explain(base: FactBase, did: int) -> str:
    """Human-readable trace of one deduction."""
    if did not in base.deductions:
        raise KeyError(f"no deduction #{did}")
    d = base.deductions[did]
    lines = [f"deduction #{d.id}: {d.rule} [{d.status}]"]
    lines.append(f"rule: {RULES[d.rule]}")
    if d.auxiliary:
        lines.append("note: auxiliary rule")
    args = ", ".join(f"{k}={_argtext(v)}" for k, v in d.args.items())
    lines.append(f"inputs: {args}")
    lines.append("premises:")
    for i in d.premises:
        f = base.facts.get(i)
        origin = "axiom" if f is None or f.is_axiom else f"from deduction #{f.provenance.get('deduction')}"
        lines.append(f"  #{i} {f} [{origin}]")
    if not d.premises:
        lines.append("  (none)")
    lines.append("checks:")
    for name, outcome in d.checks:
        lines.append(f"  {name}: {outcome}")
    if d.derived:
        lines.append("conclusion:")
        for c, i in zip(d.conclusions, d.conclusion_ids or [None] * len(d.conclusions)):
            lines.append(f"  #{i} {c}")
        lines.append(f"  {d.summary()}")
    else:
        lines.append(f"{d.status}: {d.reason}")
    return "\n".join(lines) + "\n"


def _argtext(v):
    if isinstance(v, list):
        return _bracket_text(v)
    return str(v)


def replay(chart, log_lines, auxiliary: bool = True) -> list:
    """Re-run a deduction log from the chart's axioms; returns mismatching deduction ids."""
    base = FactBase.from_chart(chart, auxiliary=auxiliary)
    bad = []
    for line in log_lines:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        ded = base.apply(rec["rule"], **rec["args"])
        if json.dumps(ded.to_json(), ensure_ascii=False, sort_keys=True) != json.dumps(rec, ensure_ascii=False, sort_keys=True):
            bad.append(rec["id"])
    return bad


def premise_sweep(base: FactBase, did: int) -> list:
    """For each premise of a deduction: whether removing it stops the conclusion.

    Returns ``[(premise id, new status, same conclusion?)]``.
    """
    d = base.deductions[did]
    snap_ids = [i for i in base.facts if i not in d.conclusion_ids and _older(base, i, did)]
    out = []
    for p in d.premises:
        trimmed = base.copy_without([i for i in base.facts if i not in snap_ids] + [p])
        try:
            again = trimmed.propose(d.rule, **d.args)
        except AuxiliaryRuleError:
            raise
        same = again.derived and [c.ident() for c in _norm_all(trimmed, again.conclusions)] == \
            [c.ident() for c in _norm_all(base, d.conclusions)]
        out.append((p, again.status, same))
    return out


def _older(base, fid, did) -> bool:
    f = base.facts[fid]
    dd = f.provenance.get("deduction")
    return dd is None or dd < did


def _norm_all(base, facts):
    return [base._normalize(Fact(f.kind, f.fields)) for f in facts]
