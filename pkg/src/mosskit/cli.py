"""Command-line driver: ``mosskit <command> TARGET [options]``.

TARGET is a fixture name (``slice-fragment``, ``hz2n``, ``toy-dga``) or a
path to a chart or DGA JSON file.  Exit status is 0 on success, 1 when a
rule refuses or validation fails, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .chart import ChartDocument, ChartSchemaError, load_any
from .dga import FilteredDGA, validate
from .deduce import AuxiliaryRuleError, ConsistencyError, FactBase, FactError, _coset_text, explain, replay
from .fixtures import FIXTURES
from .linalg import PreconditionError
from .sseq import MasseyUndefined, crossing_check, er_page, massey_on_page

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load(target):
    try:
        return load_any(target)
    except ChartSchemaError:
        raise
    except FileNotFoundError:
        raise UsageError(f"no fixture or file named {target!r} (fixtures: {', '.join(sorted(FIXTURES))})")
    except (KeyError, TypeError, ValueError) as e:
        raise ChartSchemaError([("$", f"cannot read {target!r}: {e}")]) from None


def _element(P, text):
    try:
        return P.named(text)
    except (KeyError, ValueError) as e:
        raise UsageError(f"{text!r} is not an element: {e}") from None


# -- commands ----------------------------------------------------------------

def cmd_validate(args, out):
    obj = _load(args.target)
    if isinstance(obj, FilteredDGA):
        rep = validate(obj)
        print(str(rep), file=out)
        return OK if rep.ok else FAILED
    problems = obj.source().check_consistency()
    try:
        FactBase.from_chart(obj)
    except (ConsistencyError, FactError) as e:
        problems.append(str(e))
    if problems:
        for p in problems:
            print(p, file=out)
        return FAILED
    print(f"valid: {len(obj.classes)} classes, {len(obj.differentials)} differentials", file=out)
    return OK


def cmd_pages(args, out):
    obj = _load(args.target)
    if args.max_page < 1:
        raise UsageError("--max-page must be at least 1")
    for r in range(1, args.max_page + 1):
        P = er_page(obj, r)
        print(f"E_{r}", file=out)
        keys = P.nonzero_keys()
        if not keys:
            print("  0", file=out)
        for key in keys:
            G = P.groups[key]
            gens = P.generators(key)
            body = " ⊕ ".join(f"Z/{o}·{g.format()}" for g, o in zip(gens, G.orders))
            print(f"  {key}: {body}", file=out)
        for key in keys:
            for g in P.generators(key):
                try:
                    dg = P.d(g)
                except PreconditionError:
                    print(f"  d_{r} at {key}: unknown", file=out)
                    break
                if not dg.is_zero():
                    print(f"  d_{r}({g.format()}) = {dg.format()}", file=out)
    return OK


def cmd_massey(args, out):
    obj = _load(args.target)
    P = er_page(obj, args.page)
    els = [_element(P, t) for t in (args.a, args.a2, args.a3)]
    names = ", ".join(e.format() for e in els)
    try:
        C = massey_on_page(P, *els)
    except MasseyUndefined as e:
        print(f"⟨{names}⟩ is not defined on E_{args.page}: {e}", file=out)
        return FAILED
    except PreconditionError as e:
        print(f"⟨{names}⟩ on E_{args.page}: {e}", file=out)
        return FAILED
    text = _coset_text(C)
    print(f"⟨{names}⟩ = {text}" + (" (strict)" if C.strict else f" (indeterminacy of order {C.indeterminacy_size})"),
          file=out)
    return OK


def cmd_crossing(args, out):
    obj = _load(args.target)
    key = (args.stem, args.filtration) + tuple(args.weight or ())
    res = crossing_check(obj, key, args.page)
    print(str(res), file=out)
    for k, R, status in res.checked:
        print(f"  E_{R} at {k}: {status}", file=out)
    return FAILED if res.status == "fails" else OK


def _base(args, obj):
    if isinstance(obj, ChartDocument):
        base = FactBase.from_chart(obj, auxiliary=args.auxiliary)
    else:
        base = FactBase(obj, auxiliary=args.auxiliary)
    if args.facts:
        with open(args.facts, encoding="utf-8") as fh:
            records = json.load(fh)
        for r in records:
            for a in r.get("atoms", []):
                base.vocab.add(a)
        base.load_facts([r for r in records if "kind" in r])
    return base


def cmd_deduce(args, out):
    obj = _load(args.target)
    try:
        base = _base(args, obj)
    except (ConsistencyError, FactError) as e:
        print(f"inconsistent facts: {e}", file=out)
        return FAILED
    if args.replay:
        if not isinstance(obj, ChartDocument):
            raise UsageError("--replay needs a chart")
        with open(args.replay, encoding="utf-8") as fh:
            bad = replay(obj, fh.readlines(), auxiliary=args.auxiliary)
        print("replay: ok" if not bad else f"replay: mismatch at deductions {bad}", file=out)
        return OK if not bad else FAILED
    rules = args.rule or []
    if args.inputs:
        if len(rules) != 1:
            raise UsageError("--inputs needs exactly one --rule")
        steps = [_step(rules[0], args)]
        shown = set(range(len(steps)))
    else:
        plan = list(getattr(obj, "plan", None) or [])
        if not plan:
            raise UsageError("the target has no deduction plan; give --rule and --inputs")
        if rules:
            last = max((i for i, s in enumerate(plan) if s["rule"] in rules), default=None)
            if last is None:
                raise UsageError(f"the plan has no step using {', '.join(rules)}")
            plan = plan[:last + 1]
            shown = {i for i, s in enumerate(plan) if s["rule"] in rules}
        else:
            shown = set(range(len(plan)))
        steps = plan
    status = OK
    for i, step in enumerate(steps):
        try:
            ded = base.run_step(dict(step))
        except AuxiliaryRuleError as e:
            print(f"{e} (pass --auxiliary)", file=out)
            return FAILED
        except (FactError, KeyError, ValueError) as e:
            raise UsageError(str(e)) from None
        if i not in shown:
            continue
        print(f"[{ded.id}] {ded.rule} {ded.status}: {ded.summary()}", file=out)
        if args.explain:
            print(explain(base, ded.id), file=out)
        if not ded.derived:
            status = FAILED
    if args.log:
        base.write_log(args.log)
    return status


def _step(rule, args):
    ins = args.inputs
    if rule in ("moss-r", "moss-e1"):
        if len(ins) != 3:
            raise UsageError(f"{rule} takes three inputs")
        step = {"rule": rule, "inputs": ins}
        if rule == "moss-r":
            step["page"] = args.page
        return step
    if rule == "shuffle":
        if not args.x or len(ins) != 3:
            raise UsageError("shuffle takes --x and three bracket inputs")
        return {"rule": rule, "x": args.x, "bracket": ins}
    if rule == "juggle":
        if not args.by or len(ins) != 3:
            raise UsageError("juggle takes --by and three bracket inputs")
        return {"rule": rule, "bracket": ins, "by": args.by}
    if len(ins) != 3:
        raise UsageError(f"{rule} takes three bracket inputs")
    return {"rule": rule, "bracket": ins}


def cmd_oracle(args, out):
    from .oracle import moss_campaign

    if args.seeds < 1 or args.dim < 1:
        raise UsageError("--seeds and --dim must be positive")
    st = moss_campaign(seeds=args.seeds, dim=args.dim, L=args.filtration_len, rmax=args.max_page,
                       e1=args.e1, start=args.start)
    print(f"applicable: {st['applicable']}, pass: {st['pass']}, fail: {st['fail']}", file=out)
    print(f"instances: {st['instances']}, triples checked: {st['triples']}, nonzero: {st['nonzero']}", file=out)
    for f in st["failures"][:10]:
        print(f"  failure: seed {f[0]}, r={f[1]}: {f[2]}", file=out)
    return OK if not st["fail"] else FAILED


def cmd_render(args, out):
    from .render import render_ascii, render_svg

    obj = _load(args.target)
    text = render_svg(obj, args.page) if args.format == "svg" else render_ascii(obj, args.page)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    return OK


def cmd_report(args, out):
    obj = _load(args.target)
    if not isinstance(obj, ChartDocument):
        raise UsageError("report needs a chart")
    base = FactBase.from_chart(obj, auxiliary=args.auxiliary)
    lines = [f"# {obj.name or args.target}", ""]
    lines.append(f"Coefficients {obj.modulus}; {len(obj.classes)} classes; "
                 f"differentials complete through E_{obj.complete_through}.")
    lines += ["", "## Axioms", ""]
    for i, f in base.facts.items():
        lines.append(f"- #{i} {f}")
    lines += ["", "## Deductions", ""]
    status = OK
    for step in obj.plan:
        try:
            ded = base.run_step(dict(step))
        except AuxiliaryRuleError:
            lines.append(f"- {step['rule']}: skipped (auxiliary rule; pass --auxiliary)")
            continue
        lines.append(f"- [{ded.id}] **{ded.rule}** {ded.status}: {ded.summary()}")
        if not ded.derived:
            status = FAILED
    lines += ["", "## Traces", ""]
    for did in base.deductions:
        lines += ["```", explain(base, did).rstrip(), "```", ""]
    out.write("\n".join(lines).rstrip() + "\n")
    return status


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mosskit", description="Spectral sequences, Massey products and Toda brackets.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def target(sp):
        sp.add_argument("target", help="fixture name or chart/DGA JSON path")

    sp = sub.add_parser("validate", help="check a chart or DGA")
    target(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("pages", help="print E_r groups and differentials")
    target(sp)
    sp.add_argument("--max-page", type=int, default=2)
    sp.set_defaults(func=cmd_pages)

    sp = sub.add_parser("massey", help="Massey product on a page")
    target(sp)
    sp.add_argument("--page", type=int, default=1)
    sp.add_argument("--a", required=True)
    sp.add_argument("--a2", required=True)
    sp.add_argument("--a3", required=True)
    sp.set_defaults(func=cmd_massey)

    sp = sub.add_parser("crossing", help="crossing-differentials check at a degree")
    target(sp)
    sp.add_argument("--page", type=int, default=1)
    sp.add_argument("--stem", type=int, required=True)
    sp.add_argument("--filtration", type=int, required=True)
    sp.add_argument("--weight", type=int, action="append")
    sp.set_defaults(func=cmd_crossing)

    sp = sub.add_parser("deduce", help="run inference rules and write a deduction log")
    target(sp)
    sp.add_argument("--rule", action="append", choices=["moss-r", "moss-e1", "shuffle", "symmetry", "juggle"])
    sp.add_argument("--inputs", nargs="+")
    sp.add_argument("--page", type=int, default=1)
    sp.add_argument("--x")
    sp.add_argument("--by")
    sp.add_argument("--facts", help="JSON array of extra fact records")
    sp.add_argument("--log", help="write the deduction log (JSON lines) here")
    sp.add_argument("--replay", help="replay a deduction log against the chart")
    sp.add_argument("--auxiliary", action="store_true", help="allow auxiliary rules")
    sp.add_argument("--explain", action="store_true")
    sp.set_defaults(func=cmd_deduce)

    sp = sub.add_parser("oracle", help="seeded verification campaign")
    sp.add_argument("--seeds", type=int, default=100)
    sp.add_argument("--dim", type=int, default=16)
    sp.add_argument("--filtration-len", type=int, choices=[2, 3, 4, 5])
    sp.add_argument("--max-page", type=int, default=2)
    sp.add_argument("--start", type=int, default=0)
    sp.add_argument("--e1", action="store_true", help="E_1 variant")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("render", help="draw a page")
    target(sp)
    sp.add_argument("--format", choices=["ascii", "svg"], default="ascii")
    sp.add_argument("--page", type=int, default=1)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("report", help="markdown summary of facts and deductions")
    target(sp)
    sp.add_argument("--auxiliary", action="store_true")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args, out)
    except UsageError as e:
        print(f"mosskit {args.command}: {e}", file=sys.stderr)
        return USAGE
    except ChartSchemaError as e:
        for path, msg in e.errors:
            print(f"{path}: {msg}", file=out)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
