"""Chart documents: spectral sequence fragments stored as JSON.

A chart lists E_1 classes by bidegree ``(stem, filtration, *weights)`` with
their group orders, the differentials and products that are known, convergence
annotations, and homotopy-level axioms.  ``complete_through`` bounds the pages
on which the recorded differentials are the whole story; past it the engine
answers ``unknown`` unless a known-empty region settles the question.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .linalg import Modulus, PreconditionError, in_span
from .sseq import (
    PermanenceStatus,
    d_target,
    er_page,
    key_add,
    parse_element,
)
from .coset import format_element

__all__ = [
    "ChartClass",
    "ChartDifferential",
    "ChartProduct",
    "Detection",
    "Region",
    "ChartDocument",
    "ChartSchemaError",
    "ChartConsistencyError",
    "ChartSource",
    "parse_chart",
    "serialize_chart",
    "load_any",
]


class ChartSchemaError(ValueError):
    """Raised with a list of ``(json path, message)`` problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


class ChartConsistencyError(ValueError):
    pass


@dataclass(frozen=True)
class ChartClass:
    name: str
    stem: int
    filtration: int
    weights: tuple = ()
    order: int = 2

    @property
    def key(self) -> tuple:
        return (self.stem, self.filtration) + tuple(self.weights)


@dataclass(frozen=True)
class ChartDifferential:
    page: int
    source: str
    target: str
    coefficient: int = 1


@dataclass(frozen=True)
class ChartProduct:
    left: str
    right: str
    result: Optional[str]          # None records a zero product
    coefficient: int = 1


@dataclass(frozen=True)
class Detection:
    element: str                   # page element text, e.g. "2τ²"
    homotopy: str                  # homotopy name, e.g. "ωτ²"


@dataclass(frozen=True)
class Region:
    """Stems and filtrations (inclusive, None = unbounded) where every E_1 class is listed."""

    stems: tuple = (None, None)
    filtrations: tuple = (None, None)

    def contains(self, stem: int, filtration: int) -> bool:
        def inside(v, lo_hi):
            lo, hi = lo_hi
            return (lo is None or v >= lo) and (hi is None or v <= hi)

        return inside(stem, self.stems) and inside(filtration, self.filtrations)


@dataclass
class ChartDocument:
    name: str = ""
    prime: int = 2
    exponent: int = 1
    gradings: tuple = ("stem", "filtration")
    complete_through: int = 0
    unit: Optional[str] = None
    classes: list = field(default_factory=list)
    differentials: list = field(default_factory=list)
    products: list = field(default_factory=list)
    detections: list = field(default_factory=list)
    known_regions: list = field(default_factory=list)
    homotopy: dict = field(default_factory=dict)
    e1_brackets: list = field(default_factory=list)
    plan: list = field(default_factory=list)

    @property
    def modulus(self) -> Modulus:
        return Modulus(self.prime, self.exponent)

    def by_name(self) -> dict:
        return {c.name: c for c in self.classes}

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "prime": self.prime,
            "exponent": self.exponent,
            "gradings": list(self.gradings),
            "complete_through": self.complete_through,
        }
        if self.unit is not None:
            out["unit"] = self.unit
        out["classes"] = [
            {"name": c.name, "stem": c.stem, "filtration": c.filtration,
             **({"weights": list(c.weights)} if c.weights else {}), "order": c.order}
            for c in self.classes
        ]
        out["differentials"] = [
            {"page": d.page, "source": d.source, "target": d.target, "coefficient": d.coefficient}
            for d in self.differentials
        ]
        out["products"] = [
            {"left": p.left, "right": p.right, "result": p.result, "coefficient": p.coefficient}
            for p in self.products
        ]
        out["detections"] = [{"element": d.element, "homotopy": d.homotopy} for d in self.detections]
        out["known_regions"] = [
            {"stems": list(r.stems), "filtrations": list(r.filtrations)} for r in self.known_regions
        ]
        if self.homotopy:
            out["homotopy"] = self.homotopy
        if self.e1_brackets:
            out["e1_brackets"] = self.e1_brackets
        if self.plan:
            out["plan"] = self.plan
        return out

    def source(self) -> "ChartSource":
        cache = getattr(self, "_source", None)
        if cache is None:
            cache = self._source = ChartSource(self)
        return cache

    def as_source(self) -> "ChartSource":
        return self.source()


# -- parsing -----------------------------------------------------------------

def _int(v, path, errors, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        errors.append((path, f"expected an integer, got {v!r}"))
        return None
    if lo is not None and v < lo:
        errors.append((path, f"must be >= {lo}"))
        return None
    return v


def _pair(v, path, errors):
    if not isinstance(v, list) or len(v) != 2 or any(x is not None and not isinstance(x, int) for x in v):
        errors.append((path, "expected [lo, hi] with integers or null"))
        return (None, None)
    return tuple(v)


def _from_dict(doc: dict) -> ChartDocument:
    errors = []
    if not isinstance(doc, dict):
        raise ChartSchemaError([("$", "chart must be a JSON object")])
    known = {"name", "prime", "exponent", "gradings", "complete_through", "unit", "classes",
             "differentials", "products", "detections", "known_regions", "homotopy",
             "e1_brackets", "plan"}
    for k in doc:
        if k not in known:
            errors.append((f"$.{k}", "unknown field"))
    prime = _int(doc.get("prime", 2), "$.prime", errors, lo=2)
    exponent = _int(doc.get("exponent", 1), "$.exponent", errors, lo=1)
    ct = _int(doc.get("complete_through", 0), "$.complete_through", errors, lo=0)
    gradings = doc.get("gradings", ["stem", "filtration"])
    if not isinstance(gradings, list) or len(gradings) < 2 or not all(isinstance(g, str) for g in gradings):
        errors.append(("$.gradings", "expected a list of at least two grading names"))
        gradings = ["stem", "filtration"]
    nw = len(gradings) - 2
    mod = None
    if prime is not None and exponent is not None:
        try:
            mod = Modulus(prime, exponent)
        except ValueError as e:
            errors.append(("$.prime", str(e)))

    classes = []
    names = {}
    for i, c in enumerate(doc.get("classes", [])):
        path = f"$.classes[{i}]"
        if not isinstance(c, dict) or not isinstance(c.get("name"), str) or not c.get("name"):
            errors.append((path, "class needs a non-empty string name"))
            continue
        stem = _int(c.get("stem"), path + ".stem", errors)
        fil = _int(c.get("filtration"), path + ".filtration", errors, lo=0)
        w = c.get("weights", [])
        if not isinstance(w, list) or len(w) != nw or not all(isinstance(x, int) for x in w):
            errors.append((path + ".weights", f"expected {nw} integer weight(s)"))
            w = [0] * nw
        order = _int(c.get("order", prime), path + ".order", errors, lo=1)
        if order is not None and mod is not None and mod.m % order:
            errors.append((path + ".order", f"order {order} does not divide {mod.m}"))
        if c["name"] in names:
            errors.append((path + ".name", f"duplicate class {c['name']!r}"))
            continue
        if stem is None or fil is None or order is None:
            continue
        cls = ChartClass(c["name"], stem, fil, tuple(w), order)
        names[cls.name] = cls
        classes.append(cls)

    unit = doc.get("unit")
    if unit is not None and unit not in names:
        errors.append(("$.unit", f"unit {unit!r} is not a class"))

    diffs = []
    for i, d in enumerate(doc.get("differentials", [])):
        path = f"$.differentials[{i}]"
        if not isinstance(d, dict):
            errors.append((path, "expected an object"))
            continue
        r = _int(d.get("page"), path + ".page", errors, lo=1)
        src, tgt = d.get("source"), d.get("target")
        coef = _int(d.get("coefficient", 1), path + ".coefficient", errors)
        bad = False
        for fld, nm in (("source", src), ("target", tgt)):
            if nm not in names:
                errors.append((f"{path}.{fld}", f"unknown class {nm!r}"))
                bad = True
        if bad or r is None or coef is None:
            continue
        want = d_target(names[src].key, r)
        if names[tgt].key != want:
            errors.append((path, f"d_{r} from {src} at {names[src].key} must land in {want}; "
                                 f"{tgt} is at {names[tgt].key}"))
            continue
        diffs.append(ChartDifferential(r, src, tgt, coef))

    prods = []
    for i, p in enumerate(doc.get("products", [])):
        path = f"$.products[{i}]"
        if not isinstance(p, dict):
            errors.append((path, "expected an object"))
            continue
        left, right, res = p.get("left"), p.get("right"), p.get("result")
        coef = _int(p.get("coefficient", 1), path + ".coefficient", errors)
        bad = False
        for fld, nm in (("left", left), ("right", right)):
            if nm not in names:
                errors.append((f"{path}.{fld}", f"unknown class {nm!r}"))
                bad = True
        if res is not None and res not in names:
            errors.append((path + ".result", f"unknown class {res!r}"))
            bad = True
        if bad or coef is None:
            continue
        if res is not None:
            want = key_add(names[left].key, names[right].key)
            if names[res].key != want:
                errors.append((path, f"{left}·{right} must land in {want}; {res} is at {names[res].key}"))
                continue
        prods.append(ChartProduct(left, right, res, coef))

    dets = []
    for i, d in enumerate(doc.get("detections", [])):
        path = f"$.detections[{i}]"
        if not isinstance(d, dict) or not isinstance(d.get("element"), str) or not isinstance(d.get("homotopy"), str):
            errors.append((path, "expected {element, homotopy} strings"))
            continue
        dets.append(Detection(d["element"], d["homotopy"]))

    regions = []
    for i, r in enumerate(doc.get("known_regions", [])):
        path = f"$.known_regions[{i}]"
        if not isinstance(r, dict):
            errors.append((path, "expected an object"))
            continue
        regions.append(Region(_pair(r.get("stems", [None, None]), path + ".stems", errors),
                              _pair(r.get("filtrations", [None, None]), path + ".filtrations", errors)))

    homotopy = doc.get("homotopy", {})
    if not isinstance(homotopy, dict):
        errors.append(("$.homotopy", "expected an object"))
        homotopy = {}
    for lst in ("e1_brackets", "plan"):
        if not isinstance(doc.get(lst, []), list):
            errors.append((f"$.{lst}", "expected a list"))
    if errors:
        raise ChartSchemaError(errors)
    out = ChartDocument(
        name=str(doc.get("name", "")), prime=prime, exponent=exponent, gradings=tuple(gradings),
        complete_through=ct, unit=unit, classes=classes, differentials=diffs, products=prods,
        detections=dets, known_regions=regions, homotopy=homotopy,
        e1_brackets=list(doc.get("e1_brackets", [])), plan=list(doc.get("plan", [])),
    )
    # element texts must parse against the classes
    S = out.source()
    for i, d in enumerate(dets):
        try:
            parse_element(S, d.element)
        except (KeyError, ValueError) as e:
            errors.append((f"$.detections[{i}].element", str(e).strip('"')))
    if errors:
        raise ChartSchemaError(errors)
    return out


def parse_chart(source) -> ChartDocument:
    """Parse a chart from a path, JSON text, bytes or dict; raises ChartSchemaError."""
    if isinstance(source, dict):
        return _from_dict(source)
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ChartSchemaError([("$", f"invalid JSON: {e}")]) from None
    return _from_dict(doc)


def serialize_chart(doc: ChartDocument) -> bytes:
    return (json.dumps(doc.to_dict(), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def load_any(source):
    """A ChartDocument or FilteredDGA from a fixture name, path or JSON text."""
    from .dga import load_dga
    from .fixtures import fixture_path, FIXTURES

    if isinstance(source, str) and source in FIXTURES:
        source = str(fixture_path(source))
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ChartSchemaError([("$", f"invalid JSON: {e}")]) from None
    if isinstance(data, dict) and "generators" in data:
        return load_dga(data)
    return parse_chart(data)


# -- the chart as a spectral-sequence source ----------------------------------

class ChartSource:
    """Pages of a chart: E_1 is the free module on the listed classes modulo their orders."""

    has_pairing = True

    def __init__(self, doc: ChartDocument):
        self.doc = doc
        self.mod = doc.modulus
        self.m = self.mod.m
        self.complete_through = doc.complete_through
        self.unit_name = doc.unit or "1"
        self.classes = {c.name: c for c in doc.classes}
        at = {}
        for c in doc.classes:
            at.setdefault(c.key, []).append(c.name)
        self._at = at
        self.all_keys = sorted(at)
        self._diff = {}
        for d in doc.differentials:
            self._diff.setdefault((d.page, d.source), []).append((d.coefficient, d.target))
        self._prod = {}
        for p in doc.products:
            self._prod[(p.left, p.right)] = (p.coefficient, p.result)
        self._detect = {}
        for d in doc.detections:
            try:
                key, v = parse_element(self, d.element)
            except (KeyError, ValueError):
                continue  # reported by the schema check
            self._detect[(key, tuple(int(x) for x in v))] = d.homotopy

    # ambient
    def ambient_names(self, key):
        return list(self._at.get(tuple(key), []))

    def named_vector(self, name):
        c = self.classes.get(name)
        if c is None:
            raise KeyError(f"no class named {name!r}")
        names = self._at[c.key]
        v = np.zeros(len(names), dtype=np.int64)
        v[names.index(name)] = 1
        return c.key, v

    def known_empty(self, key) -> bool:
        key = tuple(key)
        if key in self._at:
            return False
        return any(r.contains(key[0], key[1]) for r in self.doc.known_regions)

    def e1(self, key):
        names = self._at[key]
        n = len(names)
        Z = np.eye(n, dtype=np.int64)
        B = np.array([[self.classes[nm].order if i == j else 0 for j in range(n)] for i, nm in enumerate(names)],
                     dtype=np.int64) % self.m
        return Z, B

    # differentials
    def recorded_d(self, key, v, r: int) -> np.ndarray:
        """Ambient image of v under the recorded d_r (linear on the listed classes)."""
        tk = d_target(key, r)
        tnames = self.ambient_names(tk)
        out = np.zeros(len(tnames), dtype=np.int64)
        for c, nm in zip(np.asarray(v).tolist(), self.ambient_names(key)):
            if not c:
                continue
            for coef, tgt in self._diff.get((r, nm), []):
                out[tnames.index(tgt)] += c * coef
        return out % self.m

    def page_differential(self, page, key):
        G = page.groups[key]
        tk = d_target(key, page.r)
        tg = page.groups.get(tk)
        if tg is None:
            if page.r <= self.complete_through or self.known_empty(tk):
                return np.zeros((G.ngens, 0), dtype=np.int64)
            return None
        if page.r > self.complete_through:
            return None
        out = np.zeros((G.ngens, tg.ngens), dtype=np.int64)
        for i, gen in enumerate(G.gens):
            out[i] = tg.project(self.recorded_d(key, gen, page.r))
        return out

    # products
    def _basis_product(self, a: str, b: str):
        """(coefficient, result name or None) for a·b, or raise if not known."""
        if a == self.unit_name and a in self.classes:
            return 1, b
        if b == self.unit_name and b in self.classes:
            return 1, a
        if (a, b) in self._prod:
            return self._prod[(a, b)]
        if (b, a) in self._prod:
            c, res = self._prod[(b, a)]
            ka, kb = self.classes[a].key, self.classes[b].key
            sign = -1 if (ka[0] * kb[0]) % 2 else 1
            return sign * c, res
        k3 = key_add(self.classes[a].key, self.classes[b].key)
        if self.known_empty(k3):
            return 0, None
        raise PreconditionError(f"the product {a}·{b} is not recorded in the chart")

    def ambient_product(self, k1, v1, k2, v2):
        k3 = key_add(k1, k2)
        names3 = self.ambient_names(k3)
        out = np.zeros(len(names3), dtype=np.int64)
        n1, n2 = self.ambient_names(k1), self.ambient_names(k2)
        for c1, a in zip(np.asarray(v1).tolist(), n1):
            if not c1 % self.m:
                continue
            for c2, b in zip(np.asarray(v2).tolist(), n2):
                if not c2 % self.m:
                    continue
                coef, res = self._basis_product(a, b)
                if res is not None and coef:
                    out[names3.index(res)] += c1 * c2 * coef
        return out % self.m

    # convergence
    def detects(self, key, v):
        return self._detect.get((tuple(key), tuple(int(x) % self.m for x in v)))

    def _detected(self, key, v) -> Optional[str]:
        """A detection annotation covering v: exact, or every class in its support."""
        h = self.detects(key, v)
        if h is not None:
            return h
        names = self.ambient_names(key)
        hits = []
        for c, nm in zip(np.asarray(v).tolist(), names):
            if not c % self.m:
                continue
            e = np.zeros(len(names), dtype=np.int64)
            e[names.index(nm)] = 1
            h = self.detects(key, e)
            if h is None:
                return None
            hits.append(h)
        return " + ".join(hits) if hits else None

    def _later_targets_vanish(self, key, r0: int) -> bool:
        """Whether every d_R target with R >= r0 lies in a known-empty region."""
        n, f = key[0] - 1, key[1] + r0
        for reg in self.doc.known_regions:
            lo, hi = reg.filtrations
            s_lo, s_hi = reg.stems
            if (s_lo is None or n >= s_lo) and (s_hi is None or n <= s_hi) \
                    and (lo is None or lo <= f) and hi is None:
                # every target cell must also be free of listed classes
                if not any(k[0] == n and k[1] >= f and k[2:] == tuple(key[2:]) for k in self._at):
                    return True
        return False

    def permanence(self, key, v, page_r: int = 1, detections: bool = True) -> PermanenceStatus:
        """Three-valued permanence; ``detections=False`` ignores convergence annotations."""
        key = tuple(key)
        v = np.asarray(v, dtype=np.int64) % self.m
        src = format_element(v, self.ambient_names(key))
        ct = self.complete_through
        for R in range(max(1, page_r), ct + 1):
            P = er_page(self.doc, R)
            G = P.groups.get(key)
            if G is None:
                break
            if not in_span(G.Z, v, self.mod):
                break
            e = P.from_ambient(key, v)
            if e.is_zero():
                return PermanenceStatus("permanent", reason=f"zero on E_{R}", element=src)
            de = P.d(e)
            if not de.is_zero():
                return PermanenceStatus("dies", page=R, witness=f"d_{R}({src}) = {de.format()}",
                                        reason="supports", element=src)
        h = self._detected(key, v) if detections else None
        if h is not None:
            return PermanenceStatus("permanent", reason=f"detects {h}", element=src)
        if self._later_targets_vanish(key, max(ct + 1, page_r)):
            return PermanenceStatus("permanent", reason="every later target vanishes", element=src)
        return PermanenceStatus("unknown", page=max(ct + 1, page_r),
                                reason=f"the chart is complete only through E_{ct}", element=src)

    def crossing_degree(self, key, R: int) -> PermanenceStatus:
        """Whether every element of E_R at key is a permanent cycle."""
        key = tuple(key)
        if key not in self._at:
            if self.known_empty(key):
                return PermanenceStatus("permanent", reason="empty")
            return PermanenceStatus("unknown", page=R, reason=f"E_1 at {key} is outside the chart")
        names = self._at[key]
        eye = np.eye(len(names), dtype=np.int64)
        statuses = [self.permanence(key, e, 1) for e in eye]
        if all(s.permanent for s in statuses):
            return PermanenceStatus("permanent", reason="every E_1 class there is permanent")
        if R - 1 > self.complete_through:
            bad = next(s for s in statuses if not s.permanent)
            if bad.kind == "dies":
                return bad
            return PermanenceStatus("unknown", page=R, reason=f"E_{R} at {key} lies past the completeness bound")
        P = er_page(self.doc, R)
        G = P.groups.get(key)
        worst = PermanenceStatus("permanent", reason=f"E_{R} generators are permanent")
        for gen in (G.gens if G is not None else []):
            s = self.permanence(key, gen, R)
            if s.kind == "dies":
                return s
            if s.kind == "unknown":
                worst = s
        return worst

    def check_consistency(self) -> list:
        """Detection annotations on classes that support a recorded differential."""
        problems = []
        for d in self.doc.detections:
            key, v = parse_element(self, d.element)
            for R in range(1, self.complete_through + 1):
                P = er_page(self.doc, R)
                G = P.groups.get(key)
                if G is None or not in_span(G.Z, v, self.mod):
                    break
                e = P.from_ambient(key, v)
                if not e.is_zero() and not P.d(e).is_zero():
                    problems.append(f"{d.element} is annotated as detecting {d.homotopy} "
                                    f"but supports d_{R}({d.element}) = {P.d(e).format()}")
                    break
        return problems
