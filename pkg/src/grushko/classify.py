"""Decision procedures and certificates built on the reduction loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

from .errors import (
    EllipticElement,
    IdentityWord,
    MissingSuppliedSplitting,
    NotACutPair,
    SimpleElement,
    SporadicPresentation,
    ValidationFailure,
)
from .tree import (
    CommonElliptic,
    Compatible,
    GrushkoTree,
    check_witness,
    collapse,
    compute_bounds,
    cyclic_core,
    einv,
    emul,
    half_key,
    is_elliptic,
    loop_to_word,
    path_concat,
    normalize_degree2,
    path_inverse,
    reduce_path,
    standard_rose,
    turns_of_core,
    word_loop_items,
    zf_adjacent,
)
from .whitehead import (
    LineCollection,
    annular_whitehead,
    as_lines,
    elem_key,
    find_admissible_cut,
    vertex_whitehead,
    whitehead_reduce,
)
from .words import NormalWord, is_peripheral, root


def _check_element(p, g):
    if p.sporadic:
        raise SporadicPresentation(f"(k, N) = ({p.k}, {p.N}) is sporadic")
    if g.is_identity():
        raise IdentityWord("the identity has no axis")
    if is_peripheral(g) is not None:
        raise EllipticElement(f"{g} is peripheral")


# -- simplicity ------------------------------------------------------------------


@dataclass
class SimplicityVerdict:
    is_simple: bool
    reduction: object
    splitting: object = None
    elliptic: object = None

    @property
    def tree(self):
        return self.reduction.tree

    def revalidate(self, g) -> bool:
        if self.is_simple:
            return is_elliptic(self.splitting, g)[0]
        T = self.reduction.tree
        lines = as_lines(g)
        return all(find_admissible_cut(vertex_whitehead(T, lines, v)) is None
                   for v in T.vertices)


def is_simple(p, g: NormalWord, T: Optional[GrushkoTree] = None) -> SimplicityVerdict:
    """Simple iff reduction from the rose reaches an uncrossed edge."""
    _check_element(p, g)
    T = standard_rose(p) if T is None else T
    red = whitehead_reduce(T, LineCollection([g]))
    if red.outcome == "uncrossed":
        ok, wit = is_elliptic(red.splitting, g)
        if not ok:
            raise ValidationFailure("element is not elliptic in the produced free splitting")
        return SimplicityVerdict(True, red, red.splitting, wit)
    return SimplicityVerdict(False, red)


@dataclass
class ConnectivityVerdict:
    connected: bool
    reduction: object


def decomposition_connected(p, lines, T: Optional[GrushkoTree] = None) -> ConnectivityVerdict:
    lines = as_lines(lines)
    for g in lines.generators:
        _check_element(p, g)
    T = standard_rose(p) if T is None else T
    red = whitehead_reduce(T, lines)
    return ConnectivityVerdict(red.outcome == "reduced", red)


# -- quadraticity -------------------------------------------------------------------


@dataclass
class QuadraticityVerdict:
    is_quadratic: bool
    tree: GrushkoTree
    crossings: dict
    circles: dict


def edge_crossings(T, g) -> dict:
    counts = {e: 0 for e in T.edges}
    for core in as_lines(g).cores(T):
        for e, _ in core:
            counts[abs(e)] += 1
    return counts


def is_quadratic(p, g: NormalWord) -> QuadraticityVerdict:
    verdict = is_simple(p, g)
    if verdict.is_simple:
        raise SimpleElement(f"{g} is simple")
    T = verdict.tree
    lines = as_lines(g)
    crossings = edge_crossings(T, g)
    circles = {v: vertex_whitehead(T, lines, v).is_cycle_union() for v in T.vertices}
    by_edges = all(c == 2 for c in crossings.values())
    by_graphs = all(circles.values())
    if by_edges != by_graphs:
        raise ValidationFailure("edge-crossing and circle criteria disagree")
    return QuadraticityVerdict(by_edges, T, crossings, circles)


# -- axes and cut pairs ------------------------------------------------------------


def _core_code(core):
    return tuple((e, elem_key(c)) for e, c in core)


def _invert_core(core):
    n = len(core)
    return tuple((-core[(i) % n][0], einv(core[(i - 1) % n][1])) for i in range(n - 1, -1, -1))


def _primitive(code):
    n = len(code)
    for d in range(1, n + 1):
        if n % d == 0 and code == code[:d] * (n // d):
            return code[:d]
    return code


def core_axis_key(core) -> tuple:
    best = None
    for c in (tuple(core), _invert_core(core)):
        code = _primitive(_core_code(c))
        for i in range(len(code)):
            rot = code[i:] + code[:i]
            if best is None or rot < best:
                best = rot
    return best


def axis_key(T: GrushkoTree, a: NormalWord) -> tuple:
    """Identifier of the axis of a, invariant under conjugation, powers and inversion."""
    _, core = cyclic_core(word_loop_items(T, a))
    if not core:
        raise EllipticElement(f"{a} is elliptic")
    return core_axis_key(core)


@dataclass
class CutPairCandidate:
    a: NormalWord
    comb_length: int
    components: Optional[int]
    axis_key: tuple


def _spanning_paths(T):
    tau = {T.base: (None,)}
    queue = [T.base]
    while queue:
        u = queue.pop(0)
        for e in sorted(T.edges):
            o, t = T.edges[e]
            for h, a, b in ((e, o, t), (-e, t, o)):
                if a == u and b not in tau:
                    tau[b] = tau[u] + (h, None)
                    queue.append(b)
    return tau


def core_word(T, core, tau=None) -> NormalWord:
    """An element whose cyclic core is ``core``."""
    tau = tau or _spanning_paths(T)
    start = T.o(core[0][0])
    items = list(tau[start])
    for e, c in core:
        items.extend([e, c])
    items = tuple(items) + path_inverse(tau[start])[1:]
    return loop_to_word(T, reduce_path(items))


def decorations(T, lines, depth: int = 1) -> dict:
    """Per labeled vertex: nontrivial factor elements from Whitehead labels, products to depth."""
    out = {}
    for v in T.vertices:
        if T.labels[v] is None:
            continue
        W = vertex_whitehead(T, lines, v)
        base = set()
        for e in W.edges:
            if e.label is not None:
                base.add(e.label)
                base.add(e.label.inverse())
        spec = T.spec(v)
        from .words import FactorElement

        for j in range(spec.rank):
            x = FactorElement.gen(T.labels[v], spec, j)
            base.add(x)
            base.add(x.inverse())
        elems = set(base)
        layer = set(base)
        for _ in range(depth - 1):
            layer = {emul(x, y) for x in layer for y in base} - {None}
            elems |= layer
        out[v] = sorted(elems, key=lambda a: a.sort_key())
    return out


def enumerate_cores(T, R: int, decos: dict):
    """Cyclically reduced cores of length <= R in canonical order."""
    halves = {v: T.half_edges(v) for v in T.vertices}
    for n in range(1, R + 1):
        def extend(path):
            if len(path) == n:
                yield tuple(path)
                return
            v = T.t(path[-1]) if path else None
            choices = [h for u in T.vertices for h in halves[u]] if not path else halves[v]
            for h in choices:
                yield from extend(path + [h])

        for edges in extend([]):
            if T.t(edges[-1]) != T.o(edges[0]):
                continue
            slots = []
            for i, e in enumerate(edges):
                v = T.t(e)
                nxt = edges[(i + 1) % n]
                opts = [None] if T.labels[v] is None else [None] + decos.get(v, [])
                if nxt == -e:
                    opts = [c for c in opts if c is not None]
                slots.append(opts)
            for cs in product(*slots):
                yield tuple(zip(edges, cs))


def find_short_cut_pair(p, g: NormalWord, R: int, depth: int = 1, budget=None,
                        max_candidates: Optional[int] = None) -> list:
    """Axes of length <= R whose annular Whitehead graph is disconnected."""
    if R < 1:
        raise ValueError("R must be at least 1")
    verdict = is_simple(p, g)
    if verdict.is_simple:
        raise SimpleElement(f"{g} is simple")
    T = verdict.tree
    lines = as_lines(g)
    decos = decorations(T, lines, depth)
    tau = _spanning_paths(T)
    seen = set()
    out = []
    tried = 0
    for core in enumerate_cores(T, R, decos):
        key = core_axis_key(core)
        if key in seen:
            continue
        seen.add(key)
        if len(key) != len(core):
            continue  # a proper power; its root is enumerated separately
        tried += 1
        if max_candidates is not None and tried > max_candidates:
            break
        a = core_word(T, core, tau)
        if is_peripheral(a) is not None:
            continue
        rep = annular_whitehead(T, lines, a, budget)
        if rep.count is None or rep.count >= 2:
            out.append(CutPairCandidate(a, len(core), rep.count, key))
    return out


def extract_short_element(p, g: NormalWord, h: NormalWord, T: Optional[GrushkoTree] = None,
                          budget=None):
    """Find a short element whose annular graph is at least as split as h's.

    Walks pairs of edges in the same signed orbit along the axis of h, closes the
    segment between them into a loop and keeps the first one that validates.
    Returns (a, info)."""
    from .tree import comb_length

    if T is None:
        verdict = is_simple(p, g)
        if verdict.is_simple:
            raise SimpleElement(f"{g} is simple")
        T = verdict.tree
    lines = as_lines(g)
    rep = annular_whitehead(T, lines, h, budget)
    c = rep.count
    if c is None or c < 2:
        shown = "infinitely many" if c is None else c
        raise NotACutPair(f"annular graph along {h} has {shown} components")
    L = lines.length(T)
    bounds = compute_bounds(L, p.xi, c)
    prefix, hcore = cyclic_core(word_loop_items(T, root(h)))
    n = len(hcore)

    def P(I):
        items = list(prefix)
        for m in range(I):
            items.extend(hcore[m % n])
        return tuple(items)

    seen = {}
    for I in range(bounds.R0):
        edge = hcore[I % n][0]
        for I0 in seen.get(edge, []):
            a = loop_to_word(T, path_concat(P(I), path_inverse(P(I0))))
            if a.is_identity() or is_peripheral(a) is not None:
                continue
            length = comb_length(T, a)
            if length > bounds.R0:
                continue
            ca = annular_whitehead(T, lines, a, budget).count
            if ca is not None and ca < c:
                continue
            return a, {"I0": I0, "I1": I, "c": c, "L": L, "R0": bounds.R0,
                       "length": length, "components": ca}
        seen.setdefault(edge, []).append(I)
    raise ValidationFailure("no validated repeat found within R0")


# -- path certificates --------------------------------------------------------------


@dataclass
class Step:
    witness: object
    weight: int = 1
    supplied: bool = False


@dataclass
class PathCertificate:
    nodes: list
    steps: list
    bound: int
    case: str
    L: int
    element: NormalWord
    notes: list = field(default_factory=list)

    @property
    def length(self) -> int:
        return sum(s.weight for s in self.steps)

    def to_json(self) -> dict:
        from .fileio import format_tree

        return {
            "verdict": self.case,
            "witness": {"nodes": [format_tree(S) for S in self.nodes],
                        "steps": [_witness_json(s) for s in self.steps]},
            "moves": [s.witness.kind for s in self.steps],
            "bound": {"L": self.L, "D": self.bound, "length": self.length},
            "element": str(self.element),
        }


def _witness_json(step):
    from .fileio import format_tree

    w = step.witness
    if isinstance(w, CommonElliptic):
        return {"kind": w.kind, "g": str(w.g), "weight": step.weight, "supplied": step.supplied}
    return {"kind": w.kind, "refinement": format_tree(w.refinement),
            "collapse0": sorted(w.refinement.edge_name(e) for e in w.collapse0),
            "collapse1": sorted(w.refinement.edge_name(e) for e in w.collapse1),
            "weight": step.weight, "supplied": step.supplied}


def _is_subdivision(T0, T1) -> bool:
    """T1 is T0 with transient degree-2 vertices removed (same point of ZF)."""
    if not isinstance(T0, GrushkoTree):
        return False
    N, _ = normalize_degree2(T0)
    from .tree import equivalent

    return equivalent(N, T1)


def _reduction_chain(T, lines):
    """Nodes and steps from T to the free splitting found by reduction."""
    red = whitehead_reduce(T, lines)
    nodes, steps = [T], []
    first = red.moves[0].before if red.moves else red.tree
    if first is not T:
        nodes.append(first)
        steps.append(Step(Compatible(T, frozenset(), frozenset(set(T.edges) - set(first.edges))),
                          0))
    for m in red.moves:
        nodes.append(m.after)
        steps.append(Step(m.witness))
    return red, nodes, steps


def _reverse(nodes, steps):
    rs = []
    for s in reversed(steps):
        w = s.witness
        if isinstance(w, Compatible):
            w = Compatible(w.refinement, w.collapse1, w.collapse0)
        rs.append(Step(w, s.weight, s.supplied))
    return list(reversed(nodes)), rs


def certify_projection(p, g: NormalWord, T0: GrushkoTree, T1: GrushkoTree, supplied=None,
                       R: Optional[int] = None) -> PathCertificate:
    """Build a validated path in the Z-factor graph from T0 to T1."""
    _check_element(p, g)
    from .tree import comb_length

    lines = LineCollection([g])
    L = max(comb_length(T0, g), comb_length(T1, g))
    bounds = compute_bounds(L, p.xi)
    red0, n0, s0 = _reduction_chain(T0, lines)
    red1, n1, s1 = _reduction_chain(T1, lines)
    if red0.outcome == "uncrossed" and red1.outcome == "uncrossed":
        n0.append(red0.splitting)
        s0.append(Step(red0.witness))
        n1.append(red1.splitting)
        s1.append(Step(red1.witness))
        middle = [Step(CommonElliptic(g, is_elliptic(red0.splitting, g)[1],
                                      is_elliptic(red1.splitting, g)[1]))]
        case, bound = "simple", bounds.D0
    else:
        if not supplied:
            raise MissingSuppliedSplitting("non-simple element needs supplied Z-splittings")
        Z0, Z1 = supplied[0], supplied[-1]
        for red, nodes, steps, Z in ((red0, n0, s0, Z0), (red1, n1, s1, Z1)):
            if red.outcome == "uncrossed":
                nodes.append(red.splitting)
                steps.append(Step(red.witness))
            w = zf_adjacent(nodes[-1], Z, hint=g)
            if w is None:
                raise ValidationFailure("supplied splitting is not adjacent to the reduced tree")
            nodes.append(Z)
            steps.append(Step(w, 1, True))
        w = zf_adjacent(Z0, Z1, hint=g)
        if w is None:
            raise ValidationFailure("supplied splittings are not adjacent")
        middle = [Step(w, 1 if w.kind != "compatible" or Z0 is not Z1 else 0, True)]
        try:
            quad = is_quadratic(p, g).is_quadratic
        except Exception:
            quad = False
        if quad:
            case, bound = "quadratic", bounds.D1
        else:
            Rr = bounds.R0 if R is None else R
            case, bound = "z-simple", 2 * L + 2 * Rr + 5
    rn, rs = _reverse(n1, s1)
    nodes = n0 + rn
    steps = s0 + middle + rs
    cert = PathCertificate(nodes, steps, bound, case, L, g)
    check_certificate(cert)
    return cert


def certificate_from_json(doc) -> PathCertificate:
    """Rebuild a certificate from its JSON form for offline checking."""
    from .fileio import parse_tree
    from .words import parse_word

    nodes = [parse_tree(t) for t in doc["witness"]["nodes"]]
    p = nodes[0].presentation
    steps = []
    for w in doc["witness"]["steps"]:
        if w["kind"] == "common-elliptic":
            wit = CommonElliptic(parse_word(w["g"], p))
        else:
            R = parse_tree(w["refinement"])
            ids = {R.edge_name(e): e for e in R.edges}
            try:
                c0 = frozenset(ids[n] for n in w["collapse0"])
                c1 = frozenset(ids[n] for n in w["collapse1"])
            except KeyError as ex:
                raise ValidationFailure(f"unknown edge {ex} in witness") from None
            wit = Compatible(R, c0, c1)
        steps.append(Step(wit, w["weight"], w.get("supplied", False)))
    b = doc["bound"]
    return PathCertificate(nodes, steps, b["D"], doc["verdict"], b["L"],
                           parse_word(doc["element"], p))


def check_certificate(cert: PathCertificate) -> bool:
    """Independent re-validation; raises ValidationFailure on any defect."""
    if len(cert.steps) != len(cert.nodes) - 1:
        raise ValidationFailure("step count does not match node count")
    for i, s in enumerate(cert.steps):
        A, B = cert.nodes[i], cert.nodes[i + 1]
        if s.weight == 0:
            ok = _is_subdivision(A, B) or _is_subdivision(B, A) or (
                isinstance(s.witness, Compatible) and check_witness(s.witness, A, B)
                and not s.witness.collapse0 and not s.witness.collapse1)
            if not ok:
                raise ValidationFailure(f"step {i} is not a subdivision")
            continue
        if s.weight != 1:
            raise ValidationFailure(f"step {i} has weight {s.weight}")
        if not check_witness(s.witness, A, B):
            raise ValidationFailure(f"step {i} does not validate")
    from .tree import comb_length

    L = max(comb_length(cert.nodes[0], cert.element), comb_length(cert.nodes[-1], cert.element))
    if L != cert.L:
        raise ValidationFailure(f"stated L = {cert.L} but the endpoints give {L}")
    expected = {"simple": 2 * L + 3, "quadratic": 2 * L + 5}.get(cert.case)
    if expected is not None and cert.bound != expected:
        raise ValidationFailure(f"bound {cert.bound} does not match the {cert.case} case")
    if cert.length > cert.bound:
        raise ValidationFailure(f"length {cert.length} exceeds bound {cert.bound}")
    return True


def verdict_json(kind: str, value, **extra) -> str:
    doc = {"verdict": kind, "witness": value}
    doc.update(extra)
    return json.dumps(doc, sort_keys=True, indent=2)
