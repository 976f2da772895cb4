"""Text formats for presentations, trees, splittings and line lists.

A tree file looks like::

    presentation { factors = [free:1]; free_rank = 2; alias a = a1.1; alias b = x1 }
    vertices { v0 label=factor0 }
    base = v0
    edges { b: v0 -> v0; c: v0 -> v0 }
    marking { a = loop([a]); b = loop(b); c = loop(c) }
    unmarking { b = b; c = c; conj v0 = 1; z = 1 }

The unmarking block stores the images of edges and vertex conjugators that
turn loops back into words.  Files without it load as unverified trees.
Splittings write ``kind = splitting``, vertex groups as ``gens=[w | w]`` and
one ``edge_group(e) = <word>`` line per cyclic edge group.
"""

import re

from .errors import ParseError
from .tree import GrushkoTree, ZSplitting, ZVertex
from .words import (
    ABELIAN,
    FREE,
    FactorElement,
    FactorSpec,
    FreeProductPresentation,
    NormalWord,
    parse_word,
)

_BLOCK = re.compile(r"(\w+)\s*\{([^{}]*)\}", re.S)


def _strip_comments(text):
    return "\n".join(line.split("#", 1)[0] for line in text.splitlines())


def _statements(body):
    return [s.strip() for s in re.split(r"[;\n]", body) if s.strip()]


def _sections(text):
    text = _strip_comments(text)
    blocks = {}
    for m in _BLOCK.finditer(text):
        if m.group(1) in blocks:
            raise ParseError(f"duplicate block {m.group(1)}")
        blocks[m.group(1)] = _statements(m.group(2))
    rest = _BLOCK.sub("\n", text)
    return blocks, _statements(rest)


# -- presentations --------------------------------------------------------------


def _parse_presentation_block(stmts):
    factors, free_rank, aliases = None, 0, []
    for s in stmts:
        if s.startswith("alias"):
            m = re.fullmatch(r"alias\s+(\S+)\s*=\s*(\S+)", s)
            if not m:
                raise ParseError(f"bad alias: {s}")
            aliases.append((m.group(1), m.group(2)))
            continue
        key, _, val = s.partition("=")
        key, val = key.strip(), val.strip()
        if key == "factors":
            inner = val.strip()
            if not (inner.startswith("[") and inner.endswith("]")):
                raise ParseError("factors must be a bracketed list")
            factors = []
            for item in filter(None, (x.strip() for x in inner[1:-1].split(","))):
                kind, _, rank = item.partition(":")
                kind = kind.strip()
                if kind in ("abelian", "free-abelian", "free_abelian"):
                    kind = ABELIAN
                elif kind == "free":
                    kind = FREE
                else:
                    raise ParseError(f"unknown factor kind {kind!r}")
                try:
                    factors.append(FactorSpec(kind, int(rank)))
                except ValueError:
                    raise ParseError(f"bad rank in {item!r}") from None
        elif key == "free_rank":
            try:
                free_rank = int(val)
            except ValueError:
                raise ParseError(f"bad free rank {val!r}") from None
        else:
            raise ParseError(f"unknown presentation field {key!r}")
    if factors is None:
        factors = []
    return FreeProductPresentation(tuple(factors), free_rank, tuple(aliases))


def parse_presentation(text: str) -> FreeProductPresentation:
    blocks, _ = _sections(text)
    if "presentation" not in blocks:
        raise ParseError("missing presentation block")
    return _parse_presentation_block(blocks["presentation"])


def format_presentation(p: FreeProductPresentation) -> str:
    kinds = ", ".join(f"{'free' if f.kind == FREE else 'abelian'}:{f.rank}" for f in p.factors)
    parts = [f"factors = [{kinds}]", f"free_rank = {p.free_rank}"]
    parts += [f"alias {a} = {t}" for a, t in p.aliases]
    return "presentation { " + "; ".join(parts) + " }\n"


def read_presentation(path) -> FreeProductPresentation:
    with open(path, encoding="utf-8") as fh:
        return parse_presentation(fh.read())


def parse_lines(text: str, p) -> list:
    """One word per line; blank lines and comments ignored."""
    out = []
    for line in _strip_comments(text).splitlines():
        if line.strip():
            out.append(parse_word(line, p))
    return out


def read_lines(path, p) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh.read(), p)


# -- trees and splittings -----------------------------------------------------------


def _fmt_word(w) -> str:
    return str(w)


def _fmt_element(a, p) -> str:
    if a is None:
        return "1"
    if isinstance(a, FactorElement):
        return a.format(p)
    return _fmt_word(a)


def _fmt_loop(S, items) -> str:
    p = S.presentation
    toks = []
    for i, x in enumerate(items):
        if i % 2 == 0:
            if x is not None:
                toks.append(f"[{_fmt_element(x, p)}]")
        else:
            toks.append(S.edge_name(x) + ("" if x > 0 else "^-1"))
    return "loop(" + " ".join(toks) + ")"


def format_tree(S) -> str:
    """Serialize a GrushkoTree or ZSplitting."""
    p = S.presentation
    split = isinstance(S, ZSplitting)
    out = [format_presentation(p).rstrip()]
    if split:
        out.append("kind = splitting")
    vl = []
    verts = sorted(S.vertices) if split else S.vertices
    for v in verts:
        name = S.vertex_name(v)
        if split:
            z = S.vertices[v]
            fac = ",".join(str(i) for i in z.factors)
            gens = " | ".join(_fmt_word(g) for g in z.gens)
            vl.append(f"{name} factors={fac} gens=[{gens}]")
        else:
            lab = S.labels[v]
            vl.append(name if lab is None else f"{name} label=factor{lab}")
    out.append("vertices { " + "; ".join(vl) + " }")
    out.append(f"base = {S.vertex_name(S.base)}")
    el = [f"{S.edge_name(e)}: {S.vertex_name(o)} -> {S.vertex_name(t)}"
          for e, (o, t) in sorted(S.edges.items())]
    out.append("edges { " + "; ".join(el) + " }")
    ml = []
    for name, ref in p.canonical_generators():
        ml.append(f"{p.display(ref)} = {_fmt_loop(S, S.marking[name])}")
    out.append("marking { " + "; ".join(ml) + " }")
    ew = S.ewords
    if ew is not None:
        ul = [f"{S.edge_name(e)} = {_fmt_word(ew[e])}" for e in sorted(ew) if e in S.edges]
        conj = getattr(S, "conj", None) or {}
        ul += [f"conj {S.vertex_name(v)} = {_fmt_word(c)}" for v, c in sorted(conj.items())]
        ul.append(f"z = {_fmt_word(S.zword)}")
        out.append("unmarking { " + "; ".join(ul) + " }")
    if split:
        for e in sorted(S.edge_groups):
            out.append(f"edge_group({S.edge_name(e)}) = {_fmt_word(S.edge_groups[e])}")
    return "\n".join(out) + "\n"


def _parse_loop(text, p, edge_ids, split, labels, edges, base):
    m = re.fullmatch(r"loop\((.*)\)", text.strip())
    if not m:
        raise ParseError(f"bad loop expression {text!r}")
    body = m.group(1)
    toks = re.findall(r"\[[^\]]*\]|[^\s\[\]]+", body)
    items = [None]
    v = base
    for tok in toks:
        if tok.startswith("["):
            w = parse_word(tok[1:-1], p)
            if split:
                val = None if w.is_identity() else w
            else:
                if w.is_identity():
                    val = None
                elif len(w.syllables) != 1 or not isinstance(w.syllables[0], FactorElement):
                    raise ParseError(f"vertex element {tok} is not a factor element")
                else:
                    val = w.syllables[0]
                    if labels.get(v) != val.factor:
                        raise ParseError(f"element {tok} does not belong to the vertex group")
            if items[-1] is not None:
                raise ParseError("two vertex elements in a row")
            items[-1] = val
        else:
            name, sign = tok, 1
            if tok.endswith("^-1"):
                name, sign = tok[:-3], -1
            if name not in edge_ids:
                raise ParseError(f"unknown edge {name!r}")
            e = sign * edge_ids[name]
            o, t = edges[abs(e)] if e > 0 else edges[abs(e)][::-1]
            if o != v:
                raise ParseError(f"loop is not a path at edge {name}")
            items.extend([e, None])
            v = t
    if v != base:
        raise ParseError("loop does not close up")
    return tuple(items)


def parse_tree(text: str):
    """Parse a tree or splitting file."""
    blocks, top = _sections(text)
    for need in ("presentation", "vertices", "edges", "marking"):
        if need not in blocks:
            raise ParseError(f"missing {need} block")
    p = _parse_presentation_block(blocks["presentation"])
    settings = {}
    groups_raw = []
    for s in top:
        m = re.fullmatch(r"edge_group\((\S+)\)\s*=\s*(.+)", s)
        if m:
            groups_raw.append((m.group(1), m.group(2)))
            continue
        key, eq, val = s.partition("=")
        if not eq:
            raise ParseError(f"cannot read statement {s!r}")
        settings[key.strip()] = val.strip()
    split = settings.get("kind") == "splitting"
    vids, vnames, labels, zverts = {}, {}, {}, {}
    for i, s in enumerate(blocks["vertices"]):
        parts = s.split(None, 1)
        name = parts[0]
        mnum = re.fullmatch(r"v(\d+)", name)
        vid = int(mnum.group(1)) if mnum else 1000 + i
        if name in vids or vid in vnames:
            raise ParseError(f"duplicate vertex {name}")
        vids[name] = vid
        vnames[vid] = name
        rest = parts[1] if len(parts) > 1 else ""
        if split:
            mf = re.search(r"factors=([\d,]*)", rest)
            mg = re.search(r"gens=\[([^\]]*)\]", rest)
            fac = tuple(int(x) for x in mf.group(1).split(",") if x) if mf else ()
            gens = tuple(parse_word(g, p) for g in mg.group(1).split("|") if g.strip()) if mg else ()
            zverts[vid] = ZVertex(fac, gens)
            labels[vid] = fac[0] if len(fac) == 1 else None
        else:
            ml = re.fullmatch(r"label\s*=\s*factor(\d+)", rest.strip()) if rest.strip() else None
            if rest.strip() and not ml:
                raise ParseError(f"bad vertex attribute {rest!r}")
            labels[vid] = int(ml.group(1)) if ml else None
    if not vids:
        raise ParseError("no vertices")
    base_name = settings.get("base", next(iter(vids)))
    if base_name not in vids:
        raise ParseError(f"unknown base vertex {base_name}")
    base = vids[base_name]
    edge_ids, edges, enames = {}, {}, {}
    for i, s in enumerate(blocks["edges"]):
        m = re.fullmatch(r"(\S+)\s*:\s*(\S+)\s*->\s*(\S+)", s)
        if not m:
            raise ParseError(f"bad edge {s!r}")
        name, o, t = m.groups()
        if o not in vids or t not in vids:
            raise ParseError(f"edge {name} uses an unknown vertex")
        me = re.fullmatch(r"e(\d+)", name)
        eid = int(me.group(1)) if me else i + 1
        while eid in edges:
            eid += 1
        edge_ids[name] = eid
        edges[eid] = (vids[o], vids[t])
        if not me or int(me.group(1)) != eid:
            enames[eid] = name
    marking = {}
    for s in blocks["marking"]:
        name, eq, val = s.partition("=")
        if not eq:
            raise ParseError(f"bad marking entry {s!r}")
        ref = p.lookup(name.strip())
        canon = dict((r, n) for n, r in p.canonical_generators())[ref]
        marking[canon] = _parse_loop(val, p, edge_ids, split, labels, edges, base)
    missing = [n for n, _ in p.canonical_generators() if n not in marking]
    if missing:
        raise ParseError(f"marking lacks {', '.join(missing)}")
    ewords = conj = zword = None
    if "unmarking" in blocks:
        ewords, conj = {}, {}
        zword = p.identity()
        for s in blocks["unmarking"]:
            key, eq, val = s.partition("=")
            key = key.strip()
            w = parse_word(val, p)
            if key == "z":
                zword = w
            elif key.startswith("conj"):
                vname = key[4:].strip()
                if vname not in vids:
                    raise ParseError(f"unknown vertex {vname}")
                conj[vids[vname]] = w
            else:
                if key not in edge_ids:
                    raise ParseError(f"unknown edge {key}")
                ewords[edge_ids[key]] = w
    if split:
        groups = {}
        for ename, word in groups_raw:
            if ename not in edge_ids:
                raise ParseError(f"unknown edge {ename}")
            groups[edge_ids[ename]] = parse_word(word, p)
        return ZSplitting(p, zverts, edges, groups, ewords or {}, base, marking, zword,
                          enames, vnames)
    if groups_raw:
        raise ParseError("edge groups need kind = splitting")
    if conj is not None:
        for v, lab in labels.items():
            if lab is not None:
                conj.setdefault(v, p.identity())
    T = GrushkoTree(p, labels, edges, base, marking, ewords, conj, zword, enames, vnames,
                    verified=ewords is not None)
    if T.verified and not T.check_marking():
        T.verified = False
    return T


def read_tree(path):
    with open(path, encoding="utf-8") as fh:
        return parse_tree(fh.read())


def write_tree(S, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_tree(S))
