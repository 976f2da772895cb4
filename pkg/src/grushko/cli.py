"""Command-line front end.

Exit codes: 0 success, 1 domain or validation failure, 2 usage error."""

import argparse
import json
import sys

from .errors import GrushkoError
from .fileio import (
    format_tree,
    read_lines,
    read_presentation,
    read_tree,
    write_tree,
)
from .tree import comb_length, standard_rose
from .whitehead import LineCollection, default_budget, vertex_whitehead, whitehead_reduce
from .words import parse_word


class UsageError(Exception):
    pass


def _dump(doc, out):
    out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _presentation(args):
    if getattr(args, "tree", None):
        return read_tree(args.tree).presentation
    if getattr(args, "presentation", None):
        return read_presentation(args.presentation)
    raise UsageError("need --presentation or --tree")


def _tree(args, p):
    if getattr(args, "tree", None):
        return read_tree(args.tree)
    return standard_rose(p)


def _lines(args, p):
    words = []
    if getattr(args, "word", None):
        words += [parse_word(w, p) for w in args.word]
    if getattr(args, "lines", None):
        words += read_lines(args.lines, p)
    if not words:
        raise UsageError("need --word or --lines")
    return words


def _word(args, p):
    ws = _lines(args, p)
    if len(ws) != 1:
        raise UsageError("this command takes a single element")
    return ws[0]


def _vertex(T, name):
    for v in T.vertices:
        if T.vertex_name(v) == name or str(v) == name:
            return v
    raise UsageError(f"no vertex named {name!r}")


# -- subcommands ------------------------------------------------------------------


def cmd_parse(args, out):
    from .words import cyclically_reduce

    p = _presentation(args)
    rows = []
    for w in _lines(args, p):
        conj, core = cyclically_reduce(w)
        rows.append({"word": str(w), "conjugator": str(conj), "core": str(core)})
    _dump({"presentation": {"k": p.k, "N": p.N, "xi": p.xi, "sporadic": p.sporadic},
           "words": rows}, out)


def cmd_length(args, out):
    p = _presentation(args)
    T = _tree(args, p)
    _dump({"lengths": {str(w): comb_length(T, w) for w in _lines(args, p)}}, out)


def cmd_whitehead(args, out):
    p = _presentation(args)
    T = _tree(args, p)
    W = vertex_whitehead(T, LineCollection(_lines(args, p)), _vertex(T, args.vertex))
    if args.dot:
        dot = W.to_dot()
        if args.dot == "-":
            out.write(dot)
        else:
            with open(args.dot, "w") as fh:
                fh.write(dot)
        return
    _dump({"vertex": args.vertex, "vertices": [W.name(x) for x in W.vertices],
           "edges": [list(e) for e in W.edge_multiset()],
           "connected": W.is_connected(), "circle": W.is_circle(),
           "cut_vertices": [W.name(x) for x in W.cut_vertices()]}, out)


def cmd_reduce(args, out):
    p = _presentation(args)
    T = _tree(args, p)
    red = whitehead_reduce(T, LineCollection(_lines(args, p)))
    if args.out:
        write_tree(red.tree, args.out)
    doc = {"verdict": red.outcome, "moves": [m.kind for m in red.moves],
           "lengths": red.lengths, "tree": format_tree(red.tree)}
    if red.edge is not None:
        doc["uncrossed_edge"] = red.tree.edge_name(red.edge)
    _dump(doc, out)


def cmd_simple(args, out):
    from .classify import is_simple

    p = _presentation(args)
    g = _word(args, p)
    v = is_simple(p, g)
    doc = {"verdict": "simple" if v.is_simple else "not-simple",
           "moves": [m.kind for m in v.reduction.moves],
           "witness": format_tree(v.splitting if v.is_simple else v.tree)}
    _dump(doc, out)


def cmd_quadratic(args, out):
    from .classify import is_quadratic

    p = _presentation(args)
    q = is_quadratic(p, _word(args, p))
    T = q.tree
    _dump({"verdict": "quadratic" if q.is_quadratic else "not-quadratic",
           "witness": format_tree(T),
           "crossings": {T.edge_name(e): c for e, c in sorted(q.crossings.items())},
           "circles": {T.vertex_name(v): c for v, c in sorted(q.circles.items())}}, out)


def cmd_cutpair(args, out):
    from .classify import extract_short_element, find_short_cut_pair

    p = _presentation(args)
    g = _word(args, p)
    if args.extract:
        a, info = extract_short_element(p, g, parse_word(args.extract, p), budget=args.budget)
        _dump({"verdict": "extracted", "witness": {"a": str(a), **info}}, out)
        return
    cands = find_short_cut_pair(p, g, args.R, depth=args.depth, budget=args.budget,
                                max_candidates=args.max_candidates)
    _dump({"verdict": "found" if cands else "none",
           "witness": [{"a": str(c.a), "length": c.comb_length, "components": c.components}
                       for c in cands]}, out)


def cmd_certify(args, out):
    from .classify import certificate_from_json, certify_projection, check_certificate

    if args.check:
        with open(args.check) as fh:
            cert = certificate_from_json(json.load(fh))
        check_certificate(cert)
        _dump({"verdict": "valid", "length": cert.length, "bound": cert.bound}, out)
        return
    if not (args.tree0 and args.tree1):
        raise UsageError("certify needs --tree0 and --tree1 (or --check)")
    T0, T1 = read_tree(args.tree0), read_tree(args.tree1)
    p = T0.presentation
    g = _word(args, p)
    supplied = [read_tree(f) for f in args.supplied] if args.supplied else None
    cert = certify_projection(p, g, T0, T1, supplied, args.R)
    doc = cert.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            _dump(doc, fh)
    _dump(doc, out)


def cmd_survey(args, out):
    from .harness import SurveyConfig, run_survey

    p = _presentation(args)
    cfg = SurveyConfig(p, list(args.word or []), args.random, args.max_length, args.L, args.R,
                       args.budget, args.seed, args.steps, args.workers)
    rep = run_survey(cfg, timings=not args.no_timings)
    if args.out:
        with open(args.out, "w") as fh:
            _dump(rep, fh)
    _dump(rep, out)


def build_parser() -> argparse.ArgumentParser:
    from .harness import default_seed

    ap = argparse.ArgumentParser(prog="grushko", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(sp, tree=True, lines=True):
        sp.add_argument("--presentation", help="presentation file")
        if tree:
            sp.add_argument("--tree", help="tree file (defaults to the standard rose)")
        if lines:
            sp.add_argument("--word", action="append", help="element (repeatable)")
            sp.add_argument("--lines", help="file with one element per line")
        sp.add_argument("--budget", type=int, default=default_budget())
        sp.add_argument("--seed", type=int, default=default_seed())

    common(sub.add_parser("parse", help="normalize words"), tree=False)
    common(sub.add_parser("length", help="combinatorial length in a tree"))
    sp = sub.add_parser("whitehead", help="Whitehead graph at a vertex")
    common(sp)
    sp.add_argument("--vertex", default="v0")
    sp.add_argument("--dot", help="write DOT to this path ('-' for stdout)")
    sp = sub.add_parser("reduce", help="Whitehead reduction")
    common(sp)
    sp.add_argument("--out", help="write the final tree here")
    common(sub.add_parser("simple", help="decide simplicity"), tree=False)
    common(sub.add_parser("quadratic", help="decide quadraticity"), tree=False)
    sp = sub.add_parser("cutpair", help="search for short cut pairs")
    common(sp, tree=False)
    sp.add_argument("--R", type=int, default=3)
    sp.add_argument("--depth", type=int, default=1)
    sp.add_argument("--max-candidates", type=int)
    sp.add_argument("--extract", metavar="H", help="extract a short element along the axis of H")
    sp = sub.add_parser("certify", help="produce or check a path certificate")
    common(sp, tree=False)
    sp.add_argument("--tree0")
    sp.add_argument("--tree1")
    sp.add_argument("--supplied", action="append", help="supplied Z-splitting file")
    sp.add_argument("--R", type=int)
    sp.add_argument("--out")
    sp.add_argument("--check", metavar="CERT", help="re-validate a certificate JSON file")
    sp = sub.add_parser("survey", help="classify many elements")
    common(sp, tree=False, lines=False)
    sp.add_argument("--word", action="append")
    sp.add_argument("--random", type=int, default=0)
    sp.add_argument("--max-length", type=int, default=6)
    sp.add_argument("--L", type=int, default=0)
    sp.add_argument("--R", type=int, default=3)
    sp.add_argument("--steps", type=int, default=3)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--no-timings", action="store_true", help="omit timings for byte-stable output")
    sp.add_argument("--out")
    return ap


COMMANDS = {
    "parse": cmd_parse, "length": cmd_length, "whitehead": cmd_whitehead,
    "reduce": cmd_reduce, "simple": cmd_simple, "quadratic": cmd_quadratic,
    "cutpair": cmd_cutpair, "certify": cmd_certify, "survey": cmd_survey,
}


def cli_main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as ex:
        return 0 if ex.code == 0 else 2
    if getattr(args, "budget", 1) <= 0:
        print("error: budget must be positive", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.cmd](args, out)
    except UsageError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except OSError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except GrushkoError as ex:
        _dump({"error": ex.code, "message": str(ex)}, out)
        return 1
    return 0


def main():
    sys.exit(cli_main())
