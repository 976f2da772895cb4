"""Grushko trees as marked graphs of groups with trivial edge groups.

Conventions used throughout:

* Quotient edges have integer ids >= 1.  An oriented edge is a signed id and
  ``-e`` is its reverse.  A half-edge at ``v`` is an oriented edge with origin
  ``v``; the direction class ``Y<name>+`` is the origin half of an edge and
  ``Y<name>-`` its terminal half.
* A path is a tuple ``(g0, e1, g1, ..., en, gn)`` alternating vertex elements
  and oriented edges.  A vertex element is a FactorElement at a labeled vertex
  or ``None`` (trivial).  In a ZSplitting vertex elements are NormalWords.
* The marking sends each canonical generator name to a loop at the basepoint.
  The unmarking (edge words ``w_e``, vertex conjugators ``c_u`` and a global
  conjugator ``z``) is the inverse map back to G:
  ``psi(g0 e1 g1 ...) = z * c(g0) * w_e1 * c(g1) * ... * z^-1``.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional

from .errors import (
    EllipticElement,
    InvalidCut,
    InvalidTree,
    NonForestCollapse,
    NothingLeft,
    PresentationMismatch,
    SporadicComplexity,
    SporadicPresentation,
)
from .words import (
    ABELIAN,
    FREE,
    FactorElement,
    FreePower,
    FreeProductPresentation,
    NormalWord,
    factor_word,
    invert,
    multiply,
    word_log,
)

Turn = namedtuple("Turn", "in_half vertex label out_half")


# -- vertex elements -----------------------------------------------------------


def emul(a, b):
    if a is None:
        return b
    if b is None:
        return a
    r = a * b
    if isinstance(r, FactorElement):
        return None if r.is_trivial() else r
    return None if r.is_identity() else r


def einv(a):
    return None if a is None else a.inverse()


def ecanon(a):
    if a is None:
        return None
    if isinstance(a, FactorElement):
        return None if a.is_trivial() else a
    return None if a.is_identity() else a


def half_key(h: int):
    return (abs(h), h < 0)


# -- paths ---------------------------------------------------------------------


class PathBuilder:
    """Accumulates a reduced path.  ``cancel(e, x)`` decides whether the
    sub-path ``e x -e`` is trivial and may fold ``x`` into the neighbours."""

    def __init__(self, g0=None, cancel=None):
        self.items = [ecanon(g0)]
        self.cancel = cancel

    def element(self, g):
        self.items[-1] = emul(self.items[-1], g)

    def edge(self, e: int):
        it = self.items
        if len(it) >= 3 and it[-2] == -e:
            x = it[-1]
            if x is None:
                it.pop()
                it.pop()
                return
            if self.cancel is not None:
                y = self.cancel(-e, x)
                if y is not None:
                    it.pop()
                    it.pop()
                    it[-1] = emul(it[-1], y)
                    return
        it.append(e)
        it.append(None)

    def extend(self, items):
        self.element(items[0])
        for i in range(1, len(items), 2):
            self.edge(items[i])
            self.element(items[i + 1])
        return self

    def result(self) -> tuple:
        return tuple(self.items)


def reduce_path(items, cancel=None) -> tuple:
    return PathBuilder(cancel=cancel).extend(items).result()


def path_inverse(items) -> tuple:
    out = []
    for x in reversed(items):
        out.append(-x if isinstance(x, int) else einv(x))
    return tuple(out)


def path_concat(*paths, cancel=None) -> tuple:
    b = PathBuilder(cancel=cancel)
    for p in paths:
        b.extend(p)
    return b.result()


def path_edges(items) -> tuple:
    return tuple(items[1::2])


@dataclass(frozen=True)
class Loop:
    base: int
    items: tuple
    reduced: bool = True

    @property
    def edges(self):
        return path_edges(self.items)

    def __len__(self):
        return len(self.items) // 2


# -- the tree ------------------------------------------------------------------


class GrushkoTree:
    """A marked graph of groups with trivial edge groups."""

    def __init__(self, p: FreeProductPresentation, labels: Dict[int, Optional[int]],
                 edges: Dict[int, tuple], base: int, marking: Dict[str, tuple],
                 ewords=None, conj=None, zword=None, edge_names=None,
                 vertex_names=None, verified=True):
        self.presentation = p
        self.labels = dict(labels)
        self.edges = dict(edges)
        self.base = base
        self.marking = dict(marking)
        self.ewords = dict(ewords) if ewords is not None else None
        self.conj = dict(conj) if conj is not None else None
        self.zword = zword if zword is not None else NormalWord(p, ())
        self.edge_names = dict(edge_names or {})
        self.vertex_names = dict(vertex_names or {})
        self.verified = verified
        self._halves = None
        self._gen_loops = {}

    # graph structure

    @property
    def vertices(self):
        return sorted(self.labels)

    def o(self, e: int) -> int:
        return self.edges[e][0] if e > 0 else self.edges[-e][1]

    def t(self, e: int) -> int:
        return self.edges[e][1] if e > 0 else self.edges[-e][0]

    def half_edges(self, v: int) -> list:
        if self._halves is None:
            halves = {u: [] for u in self.labels}
            for e in sorted(self.edges):
                o, t = self.edges[e]
                halves[o].append(e)
                halves[t].append(-e)
            for u in halves:
                halves[u].sort(key=half_key)
            self._halves = halves
        return self._halves[v]

    def degree(self, v: int) -> int:
        return len(self.half_edges(v))

    def label(self, v: int) -> Optional[int]:
        return self.labels[v]

    def spec(self, v: int):
        i = self.labels[v]
        return None if i is None else self.presentation.factors[i]

    def factor_vertex(self, i: int) -> int:
        for v, lab in self.labels.items():
            if lab == i:
                return v
        raise InvalidTree(f"no vertex carries factor {i}")

    def edge_name(self, e: int) -> str:
        return self.edge_names.get(abs(e), f"e{abs(e)}")

    def vertex_name(self, v: int) -> str:
        return self.vertex_names.get(v, f"v{v}")

    def half_name(self, h: int) -> str:
        return f"Y{self.edge_name(h)}{'+' if h > 0 else '-'}"

    def transient_vertices(self) -> list:
        return [v for v in self.vertices if self.labels[v] is None and self.degree(v) <= 2]

    def copy_with(self, **kw) -> "GrushkoTree":
        args = dict(p=self.presentation, labels=self.labels, edges=self.edges, base=self.base,
                    marking=self.marking, ewords=self.ewords, conj=self.conj,
                    zword=self.zword, edge_names=self.edge_names,
                    vertex_names=self.vertex_names, verified=self.verified)
        args.update(kw)
        return GrushkoTree(**args)

    def new_edge_id(self) -> int:
        return max(self.edges, default=0) + 1

    def new_vertex_id(self) -> int:
        return max(self.labels, default=-1) + 1

    def __repr__(self):
        return f"GrushkoTree(V={len(self.labels)}, E={len(self.edges)})"

    # marking

    def generator_loop(self, ref) -> tuple:
        """Loop of the canonical generator ``ref`` (see canonical_generators)."""
        return self._gen_loops_table()[ref]

    def _gen_loops_table(self):
        if not self._gen_loops:
            p = self.presentation
            for name, ref in p.canonical_generators():
                self._gen_loops[ref] = self.marking[name]
        return self._gen_loops

    def elem_word(self, v: int, a) -> NormalWord:
        """phi_v(a) = c_v a c_v^-1 as an element of G."""
        p = self.presentation
        if a is None:
            return NormalWord(p, ())
        w = factor_word(p, a)
        c = self.conj.get(v) if self.conj else None
        if c is None or c.is_identity():
            return w
        return multiply(multiply(c, w), invert(c))

    def edge_word(self, e: int) -> NormalWord:
        w = self.ewords.get(abs(e), NormalWord(self.presentation, ()))
        return w if e > 0 else invert(w)

    def check_marking(self) -> bool:
        """True when the unmarking inverts the marking on every generator."""
        if self.ewords is None:
            return False
        p = self.presentation
        for name, ref in p.canonical_generators():
            g = p.generators()[[r for _, r in p.canonical_generators()].index(ref)]
            if loop_to_word(self, self.marking[name]) != g:
                return False
        return True


def _labels_ok(T: GrushkoTree):
    p = T.presentation
    seen = sorted(lab for lab in T.labels.values() if lab is not None)
    if seen != list(range(p.k)):
        raise InvalidTree("each factor must label exactly one vertex")
    betti = len(T.edges) - len(T.labels) + 1
    if betti != p.free_rank:
        raise InvalidTree(f"first Betti number {betti} differs from free rank {p.free_rank}")


def validate_tree(T: GrushkoTree):
    """Structural checks: labels, Betti number, connectivity, marking shape."""
    _labels_ok(T)
    seen = {T.base}
    stack = [T.base]
    while stack:
        u = stack.pop()
        for h in T.half_edges(u):
            w = T.t(h)
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != len(T.labels):
        raise InvalidTree("quotient graph is disconnected")
    for name, _ in T.presentation.canonical_generators():
        if name not in T.marking:
            raise InvalidTree(f"marking misses generator {name}")
        _check_loop(T, T.marking[name])
    return True


def _check_loop(T, items):
    v = T.base
    for i in range(0, len(items), 2):
        g = items[i]
        if g is not None:
            lab = T.labels[v]
            if lab is None or g.factor != lab:
                raise InvalidTree("vertex element at a vertex with the wrong label")
        if i + 1 < len(items):
            e = items[i + 1]
            if T.o(e) != v:
                raise InvalidTree("loop is not an edge path")
            v = T.t(e)
    if v != T.base:
        raise InvalidTree("loop does not close up")


def standard_rose(p: FreeProductPresentation) -> GrushkoTree:
    """The rose: one vertex per factor (merged with the base when k = 1),
    spokes from an unlabeled base when k >= 2, and a loop per free generator."""
    if p.sporadic:
        raise SporadicPresentation(f"(k, N) = ({p.k}, {p.N}) is sporadic")
    k, N = p.k, p.N
    labels, edges, marking, ewords, names = {}, {}, {}, {}, {}
    if k == 1:
        labels[0] = 0
    else:
        labels[0] = None
        for i in range(k):
            labels[i + 1] = i
            edges[i + 1] = (0, i + 1)
            ewords[i + 1] = NormalWord(p, ())
    first = len(edges) + 1
    for m in range(N):
        e = first + m
        edges[e] = (0, 0)
        ewords[e] = NormalWord(p, (FreePower(m, 1),))
        names[e] = p.display(("x", m))
    for name, ref in p.canonical_generators():
        if ref[0] == "x":
            marking[name] = (None, first + ref[1], None)
        else:
            _, i, j = ref
            a = FactorElement.gen(i, p.factors[i], j)
            if k == 1:
                marking[name] = (a,)
            else:
                marking[name] = (None, i + 1, a, -(i + 1), None)
    conj = {v: NormalWord(p, ()) for v, lab in labels.items() if lab is not None}
    return GrushkoTree(p, labels, edges, 0, marking, ewords, conj, None, names)


# -- elements as loops ---------------------------------------------------------


def _factor_letters(a: FactorElement):
    if a.kind == FREE:
        for x in a.payload:
            yield abs(x) - 1, (1 if x > 0 else -1)
    else:
        for j, n in enumerate(a.payload):
            for _ in range(abs(n)):
                yield j, (1 if n > 0 else -1)


def word_loop_items(T: GrushkoTree, w: NormalWord) -> tuple:
    if w.presentation != T.presentation:
        raise PresentationMismatch("word and tree use different presentations")
    b = PathBuilder()
    for s in w.syllables:
        if isinstance(s, FreePower):
            L = T.generator_loop(("x", s.m))
            L = L if s.t > 0 else path_inverse(L)
            for _ in range(abs(s.t)):
                b.extend(L)
        else:
            for j, sign in _factor_letters(s):
                L = T.generator_loop(("a", s.factor, j))
                b.extend(L if sign > 0 else path_inverse(L))
    return b.result()


def word_to_loop(T: GrushkoTree, w: NormalWord) -> Loop:
    return Loop(T.base, word_loop_items(T, w))


def loop_to_word(T: GrushkoTree, items) -> NormalWord:
    """Apply the unmarking psi to a loop at the basepoint."""
    if isinstance(items, Loop):
        items = items.items
    if T.ewords is None:
        raise InvalidTree("tree carries no unmarking")
    p = T.presentation
    acc = list(T.zword.syllables)
    acc_w = NormalWord(p, tuple(acc))
    v = T.base
    for i in range(0, len(items), 2):
        g = items[i]
        if g is not None:
            acc_w = multiply(acc_w, T.elem_word(v, g))
        if i + 1 < len(items):
            e = items[i + 1]
            acc_w = multiply(acc_w, T.edge_word(e))
            v = T.t(e)
    return multiply(acc_w, invert(T.zword))


def path_word(T: GrushkoTree, start: int, items) -> NormalWord:
    """Raw value of a path (no global conjugation)."""
    p = T.presentation
    acc = NormalWord(p, ())
    v = start
    for i in range(0, len(items), 2):
        g = items[i]
        if g is not None:
            acc = multiply(acc, T.elem_word(v, g))
        if i + 1 < len(items):
            e = items[i + 1]
            acc = multiply(acc, T.edge_word(e))
            v = T.t(e)
    return acc


def cyclic_core(items) -> tuple:
    """Split a reduced loop as P . C . P^-1.

    Returns (P, C) where P is a path from the basepoint ending in an element
    and C = ((e1, c1), ..., (en, cn)) is the cyclically reduced core; c_i is
    the vertex element after e_i.  C is empty for elliptic loops.
    """
    prefix = PathBuilder()
    cur = list(items)
    while True:
        n = len(cur) // 2
        if n == 0:
            prefix.element(cur[0])
            return prefix.result(), ()
        g0, gn = cur[0], cur[-1]
        if n >= 2 and cur[-2] == -cur[1] and emul(gn, g0) is None:
            prefix.element(g0)
            prefix.edge(cur[1])
            cur = cur[2:-2]
            continue
        prefix.element(g0)
        core = []
        for i in range(1, len(cur), 2):
            c = cur[i + 1]
            if i + 2 >= len(cur):
                c = emul(c, g0)
            core.append((cur[i], c))
        return prefix.result(), tuple(core)


def _loop_of(T, g):
    if isinstance(g, NormalWord):
        return word_loop_items(T, g)
    if isinstance(g, Loop):
        return g.items
    return tuple(g)


def cyclic_loop(T: GrushkoTree, g) -> tuple:
    """Cyclically reduced core of g's loop; EllipticElement when g is elliptic."""
    _, core = cyclic_core(_loop_of(T, g))
    if not core:
        raise EllipticElement(f"{g} is elliptic")
    return core


def comb_length(T: GrushkoTree, g) -> int:
    return len(cyclic_loop(T, g))


def turns_of_core(core) -> list:
    n = len(core)
    out = []
    for k in range(n):
        e, c = core[k]
        nxt = core[(k + 1) % n][0]
        out.append((-e, c, nxt))
    return out


def axis_turns(T: GrushkoTree, g) -> list:
    core = cyclic_loop(T, g)
    return [Turn(h1, T.t(core[k][0]), c, h2) for k, (h1, c, h2) in enumerate(turns_of_core(core))]


# -- rewriters -----------------------------------------------------------------


class Rewriter:
    """Maps loops at the source basepoint to loops at the target basepoint."""

    def __init__(self, source, target, fn: Callable[[tuple], tuple]):
        self.source = source
        self.target = target
        self.fn = fn

    def loop(self, items) -> tuple:
        if isinstance(items, Loop):
            items = items.items
        return self.fn(tuple(items))

    def word(self, w: NormalWord) -> tuple:
        return self.fn(word_loop_items(self.source, w))

    def then(self, other: "Rewriter") -> "Rewriter":
        return Rewriter(self.source, other.target, lambda items: other.fn(self.fn(items)))

    @staticmethod
    def identity(T):
        return Rewriter(T, T, lambda items: tuple(items))


def _rewrite_marking(T, fn):
    return {name: fn(items) for name, items in T.marking.items()}


def _visits(items):
    """Yield (index of element, in_half, out_half); halves are None at the ends."""
    n = len(items)
    for i in range(0, n, 2):
        h1 = -items[i - 1] if i > 0 else None
        h2 = items[i + 1] if i + 1 < n else None
        yield i, h1, h2


# -- vertex splitting (blow-up) ------------------------------------------------


def split_vertex(T: GrushkoTree, v: int, U: Iterable[int], twists=None):
    """Move the half-edges U at v to a new unlabeled vertex n joined to v by a
    new edge f: v -> n.  ``twists`` re-chooses the lift of some directions at a
    labeled v.  Returns (T', rewriter, f, n)."""
    U = frozenset(U)
    twists = {h: a for h, a in (twists or {}).items() if ecanon(a) is not None}
    halves = set(T.half_edges(v))
    if not U <= halves:
        raise InvalidCut("U contains half-edges not at the vertex")
    if twists and T.labels[v] is None:
        raise InvalidCut("twists at an unlabeled vertex")
    if not set(twists) <= halves:
        raise InvalidCut("twist on a half-edge not at the vertex")
    n = T.new_vertex_id()
    f = T.new_edge_id()
    labels = dict(T.labels)
    labels[n] = None
    edges = {}
    for e, (o, t) in T.edges.items():
        edges[e] = (n if e in U else o, n if -e in U else t)
    edges[f] = (v, n)

    def tw(h):
        return twists.get(h) if h is not None else None

    def rewrite(items):
        b = PathBuilder()
        for i, h1, h2 in _visits(items):
            if i > 0:
                b.edge(items[i - 1])
            at_v = (T.t(items[i - 1]) if i > 0 else T.base) == v
            a = items[i]
            if not at_v:
                b.element(a)
                continue
            a2 = emul(emul(tw(h1), a), einv(tw(h2)))
            in_u = h1 in U
            out_u = h2 in U
            if in_u and out_u:
                if a2 is not None:
                    b.edge(-f)
                    b.element(a2)
                    b.edge(f)
            elif in_u:
                b.edge(-f)
                b.element(a2)
            elif out_u:
                b.element(a2)
                b.edge(f)
            else:
                b.element(a2)
        return b.result()

    ewords = None
    if T.ewords is not None:
        ewords = dict(T.ewords)
        for e in T.edges:
            w = ewords.get(e, NormalWord(T.presentation, ()))
            if e in twists:
                w = multiply(T.elem_word(v, twists[e]), w)
            if -e in twists:
                w = multiply(w, invert(T.elem_word(v, twists[-e])))
            ewords[e] = w
        ewords[f] = NormalWord(T.presentation, ())
    T2 = T.copy_with(labels=labels, edges=edges, marking=_rewrite_marking(T, rewrite),
                     ewords=ewords)
    return T2, Rewriter(T, T2, rewrite), f, n


# -- collapse ------------------------------------------------------------------


def _components(vertices, edges, C):
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in sorted(C):
        o, t = edges[e]
        ro, rt = find(o), find(t)
        if ro != rt:
            parent[max(ro, rt)] = min(ro, rt)
    comps = {}
    for v in vertices:
        comps.setdefault(find(v), []).append(v)
    return {v: find(v) for v in vertices}, comps


def collapse(T: GrushkoTree, C: Iterable[int], allow_cycles: bool = False):
    """Collapse the quotient edges C.  Returns (result, rewriter) where result is
    a GrushkoTree, or a ZSplitting when some collapsed component carries a cycle
    or more than one label."""
    C = {abs(e) for e in C}
    if not C:
        return T, Rewriter.identity(T)
    if not C <= set(T.edges):
        raise InvalidTree("unknown edge in collapse set")
    if C >= set(T.edges):
        raise NothingLeft("collapse would remove every edge")
    comp_of, comps = _components(T.vertices, T.edges, C)
    inner = {}
    for e in C:
        inner.setdefault(comp_of[T.edges[e][0]], []).append(e)
    cyclic = {K for K, vs in comps.items() if len(inner.get(K, ())) >= len(vs)}
    if cyclic and not allow_cycles:
        raise NonForestCollapse("collapse set contains a cycle")
    labeled = {K: [v for v in vs if T.labels[v] is not None] for K, vs in comps.items()}
    as_splitting = bool(cyclic) or any(len(ws) > 1 for ws in labeled.values())

    # roots and tree paths inside each component
    root, tau, tree_edges = {}, {}, set()
    for K, vs in comps.items():
        if T.base in vs:
            r = T.base
        elif len(labeled[K]) == 1:
            r = labeled[K][0]
        else:
            r = min(vs)
        root[K] = r
        tau[r] = (None,)
        queue = [r]
        while queue:
            u = queue.pop(0)
            for h in T.half_edges(u):
                if abs(h) in C and T.t(h) not in tau:
                    tau[T.t(h)] = tau[u] + (h, None)
                    tree_edges.add(abs(h))
                    queue.append(T.t(h))
    new_id = {K: root[K] for K in comps}
    edges = {e: (new_id[comp_of[o]], new_id[comp_of[t]])
             for e, (o, t) in T.edges.items() if e not in C}
    has_unmarking = T.ewords is not None
    p = T.presentation

    def raw(u, items):
        return path_word(T, u, items)

    if as_splitting and not has_unmarking:
        raise InvalidTree("collapsing to a splitting needs the unmarking")

    def seg_value(K, closed):
        r = root[K]
        closed = reduce_path(closed)
        if as_splitting:
            w = raw(r, closed)
            return None if w.is_identity() else w
        found = [x for x in closed[0::2] if x is not None]
        if len(found) > 1:
            raise InvalidTree("collapsed component is not a tree")
        return found[0] if found else None

    def rewrite(items):
        nb = PathBuilder()
        K = comp_of[T.base]
        seg = PathBuilder()
        u = T.base
        for i in range(0, len(items), 2):
            seg.element(items[i])
            if i + 1 < len(items):
                e = items[i + 1]
                if abs(e) in C:
                    seg.edge(e)
                else:
                    seg.extend(path_inverse(tau[T.o(e)]))
                    nb.element(seg_value(K, seg.result()))
                    nb.edge(e)
                    K = comp_of[T.t(e)]
                    seg = PathBuilder().extend(tau[T.t(e)])
                u = T.t(e) if i + 1 < len(items) else u
        seg.extend(path_inverse(tau[u]))
        nb.element(seg_value(K, seg.result()))
        return nb.result()

    ewords = None
    if has_unmarking:
        ewords = {}
        for e, (o, t) in T.edges.items():
            if e not in C:
                ewords[e] = multiply(multiply(raw(root[comp_of[o]], tau[o]), T.ewords.get(e, p.identity())),
                                     invert(raw(root[comp_of[t]], tau[t])))
    marking = _rewrite_marking(T, rewrite)
    names = {e: n for e, n in T.edge_names.items() if e not in C}
    vnames = {new_id[K]: T.vertex_names[new_id[K]] for K in comps if new_id[K] in T.vertex_names}
    if not as_splitting:
        labels, conj = {}, {} if has_unmarking else None
        for K, vs in comps.items():
            lab = labeled[K]
            labels[new_id[K]] = T.labels[lab[0]] if lab else None
            if lab and has_unmarking:
                w = lab[0]
                c = T.conj.get(w) or p.identity()
                conj[new_id[K]] = multiply(raw(root[K], tau[w]), c)
        T2 = T.copy_with(labels=labels, edges=edges, marking=marking, ewords=ewords,
                         conj=conj, edge_names=names, vertex_names=vnames)
        return T2, Rewriter(T, T2, rewrite)

    vertices = {}
    for K, vs in comps.items():
        r = root[K]
        gens = []
        for w in labeled[K]:
            spec = p.factors[T.labels[w]]
            c = multiply(raw(r, tau[w]), T.conj.get(w) or p.identity())
            for j in range(spec.rank):
                a = factor_word(p, FactorElement.gen(T.labels[w], spec, j))
                gens.append(multiply(multiply(c, a), invert(c)))
        for e in sorted(inner.get(K, ())):
            if e not in tree_edges:
                o, t = T.edges[e]
                loop = tau[o] + (e,) + path_inverse(tau[t])
                gens.append(raw(r, reduce_path(loop)))
        factors = tuple(sorted(T.labels[w] for w in labeled[K]))
        vertices[new_id[K]] = ZVertex(factors, tuple(gens))
    S = ZSplitting(p, vertices, edges, {}, ewords, T.base, marking, T.zword, names, vnames)
    return S, Rewriter(T, S, rewrite)


def normalize_degree2(T: GrushkoTree):
    """Remove unlabeled vertices of degree at most two by collapsing one of
    their edges.  Returns (T', rewriter)."""
    rw = Rewriter.identity(T)
    while True:
        cand = None
        for u in T.transient_vertices():
            hs = T.half_edges(u)
            if len(hs) == 2 and abs(hs[0]) == abs(hs[1]):
                continue
            if hs and len(T.edges) > 1:
                cand = hs[0]
                break
        if cand is None:
            return T, rw
        T, step = collapse(T, {abs(cand)})
        rw = rw.then(step)


# -- unfold --------------------------------------------------------------------


def unfold(T: GrushkoTree, v: int, hY: int, U: Iterable[int], twists=None):
    """Pull the directions U - {hY} at v off along a copy E' of the edge of hY.

    Every line that enters v through hY and turns (with trivial label) into
    U - {hY} is rerouted along E' to the new vertex n.  Returns
    (T', rewriter, E', n) before degree-2 normalization.
    """
    U = frozenset(U)
    if hY not in U:
        raise InvalidCut("cut vertex must lie in U")
    Up = U - {hY}
    if not Up:
        raise InvalidCut("U has no directions besides the cut vertex")
    twists = {h: a for h, a in (twists or {}).items() if ecanon(a) is not None}
    halves = set(T.half_edges(v))
    if not U <= halves:
        raise InvalidCut("U contains half-edges not at the vertex")
    if twists and T.labels[v] is None:
        raise InvalidCut("twists at an unlabeled vertex")
    E = abs(hY)
    sg = 1 if hY > 0 else -1
    n = T.new_vertex_id()
    Ep = T.new_edge_id()
    labels = dict(T.labels)
    labels[n] = None
    edges = {}
    for e, (o, t) in T.edges.items():
        edges[e] = (n if e in Up else o, n if -e in Up else t)
    far = edges[E][1] if hY > 0 else edges[E][0]
    edges[Ep] = (n, far) if hY > 0 else (far, n)

    def tw(h):
        return twists.get(h) if h is not None else None

    def copy_of(e):
        return sg * Ep if e == sg * E else -sg * Ep

    def rewrite(items):
        items = list(items)
        nvis = len(items) // 2 + 1
        at_v = []
        u = T.base
        for i in range(0, len(items), 2):
            at_v.append(u == v)
            if i + 1 < len(items):
                u = T.t(items[i + 1])
        # decide which traversals of E move to E'
        switched = set()
        for k in range(nvis):
            if not at_v[k]:
                continue
            i = 2 * k
            h1 = -items[i - 1] if i > 0 else None
            h2 = items[i + 1] if i + 1 < len(items) else None
            a2 = emul(emul(tw(h1), items[i]), einv(tw(h2)))
            if a2 is None:
                if h1 == hY and h2 in Up:
                    switched.add(i - 1)
                if h2 == hY and h1 in Up:
                    switched.add(i + 1)
        b = PathBuilder()
        for k in range(nvis):
            i = 2 * k
            if i > 0:
                e = items[i - 1]
                b.edge(copy_of(e) if i - 1 in switched else e)
            if not at_v[k]:
                b.element(items[i])
                continue
            h1 = -items[i - 1] if i > 0 else None
            h2 = items[i + 1] if i + 1 < len(items) else None
            a2 = emul(emul(tw(h1), items[i]), einv(tw(h2)))
            # a switched traversal reaches n only at its hY end
            in_n = h1 in Up or ((i - 1) in switched and h1 == hY)
            out_n = h2 in Up or ((i + 1) in switched and h2 == hY)
            if in_n and out_n and a2 is None:
                continue
            if in_n:
                b.edge(sg * Ep)
                b.edge(-sg * E)
            b.element(a2)
            if out_n:
                b.edge(sg * E)
                b.edge(-sg * Ep)
        return b.result()

    ewords = None
    if T.ewords is not None:
        ewords = dict(T.ewords)
        for e in T.edges:
            w = ewords.get(e, NormalWord(T.presentation, ()))
            if e in twists:
                w = multiply(T.elem_word(v, twists[e]), w)
            if -e in twists:
                w = multiply(w, invert(T.elem_word(v, twists[-e])))
            ewords[e] = w
        ewords[Ep] = ewords[E]
    T2 = T.copy_with(labels=labels, edges=edges, marking=_rewrite_marking(T, rewrite),
                     ewords=ewords)
    return T2, Rewriter(T, T2, rewrite), Ep, n


# -- Z-splittings --------------------------------------------------------------


@dataclass(frozen=True)
class ZVertex:
    factors: tuple
    gens: tuple


class ZSplitting:
    """Graph of groups with trivial or cyclic edge groups.

    Vertex elements in loops are NormalWords in the frame of the vertex (the
    unmarking applies no vertex conjugator).  ``edge_groups[e]`` generates the
    stabilizer of e inside the group of o(e).
    """

    def __init__(self, p, vertices, edges, edge_groups, ewords, base, marking,
                 zword=None, edge_names=None, vertex_names=None):
        self.presentation = p
        self.vertices = dict(vertices)
        self.edges = dict(edges)
        self.edge_groups = {e: c for e, c in (edge_groups or {}).items()
                            if c is not None and not c.is_identity()}
        self.ewords = dict(ewords) if ewords is not None else {}
        self.base = base
        self.marking = dict(marking)
        self.zword = zword if zword is not None else p.identity()
        self.edge_names = dict(edge_names or {})
        self.vertex_names = dict(vertex_names or {})
        self._gen_loops = {}

    def o(self, e):
        return self.edges[e][0] if e > 0 else self.edges[-e][1]

    def t(self, e):
        return self.edges[e][1] if e > 0 else self.edges[-e][0]

    def edge_name(self, e):
        return self.edge_names.get(abs(e), f"e{abs(e)}")

    def vertex_name(self, v):
        return self.vertex_names.get(v, f"v{v}")

    @property
    def labels(self):
        return {v: (z.factors[0] if len(z.factors) == 1 and len(z.gens) == sum(
            self.presentation.factors[i].rank for i in z.factors) else None)
            for v, z in self.vertices.items()}

    def is_free(self) -> bool:
        return not self.edge_groups

    def edge_word(self, e):
        w = self.ewords.get(abs(e), self.presentation.identity())
        return w if e > 0 else invert(w)

    def generator_loop(self, ref):
        if not self._gen_loops:
            for name, r in self.presentation.canonical_generators():
                self._gen_loops[r] = self.marking[name]
        return self._gen_loops[ref]

    def cancel(self, d: int, x):
        """Value of the sub-path d x d^-1 at o(d) when it is trivial in the tree."""
        e = abs(d)
        c = self.edge_groups.get(e)
        if c is None:
            return None
        w = self.edge_word(e)
        stab = c if d < 0 else multiply(multiply(invert(w), c), w)
        if word_log(x, stab) is None:
            return None
        wd = self.edge_word(d)
        return multiply(multiply(wd, x), invert(wd))

    def reduce(self, items) -> tuple:
        return reduce_path(items, cancel=self.cancel)

    def word_loop(self, w: NormalWord) -> tuple:
        if w.presentation != self.presentation:
            raise PresentationMismatch("word and splitting use different presentations")
        b = PathBuilder(cancel=self.cancel)
        for s in w.syllables:
            if isinstance(s, FreePower):
                L = self.generator_loop(("x", s.m))
                L = L if s.t > 0 else path_inverse(L)
                for _ in range(abs(s.t)):
                    b.extend(L)
            else:
                for j, sign in _factor_letters(s):
                    L = self.generator_loop(("a", s.factor, j))
                    b.extend(L if sign > 0 else path_inverse(L))
        return b.result()

    def path_value(self, items) -> NormalWord:
        acc = self.presentation.identity()
        for i in range(0, len(items), 2):
            if items[i] is not None:
                acc = multiply(acc, items[i])
            if i + 1 < len(items):
                acc = multiply(acc, self.edge_word(items[i + 1]))
        return acc

    def loop_to_word(self, items) -> NormalWord:
        return multiply(multiply(self.zword, self.path_value(items)), invert(self.zword))

    def __repr__(self):
        return f"ZSplitting(V={len(self.vertices)}, E={len(self.edges)})"


def as_splitting(T: GrushkoTree) -> ZSplitting:
    """View a Grushko tree as a free splitting (vertex elements become words)."""
    if T.ewords is None:
        raise InvalidTree("tree carries no unmarking")
    p = T.presentation
    vertices = {}
    for v in T.vertices:
        lab = T.labels[v]
        gens = ()
        if lab is not None:
            spec = p.factors[lab]
            gens = tuple(T.elem_word(v, FactorElement.gen(lab, spec, j)) for j in range(spec.rank))
        vertices[v] = ZVertex(() if lab is None else (lab,), gens)

    def conv(items):
        out = []
        u = T.base
        for i in range(0, len(items), 2):
            g = items[i]
            out.append(None if g is None else T.elem_word(u, g))
            if i + 1 < len(items):
                out.append(items[i + 1])
                u = T.t(items[i + 1])
        return tuple(out)

    marking = {name: conv(items) for name, items in T.marking.items()}
    return ZSplitting(p, vertices, T.edges, {}, T.ewords, T.base, marking, T.zword,
                      T.edge_names, T.vertex_names)


@dataclass(frozen=True)
class EllipticWitness:
    vertex: int
    conjugator: NormalWord
    element: object


def _cyclic_reduce_in(S, items):
    """Cyclic reduction with edge-group cancellation; returns (prefix, loop)."""
    cancel = S.cancel if isinstance(S, ZSplitting) else None
    pre = PathBuilder()
    cur = reduce_path(items, cancel)
    while len(cur) >= 3:
        g0, gn = cur[0], cur[-1]
        e1, en = cur[1], cur[-2]
        x = emul(gn, g0)
        if en != -e1:
            break
        y = None if x is None else (cancel(en, x) if cancel else None)
        if x is not None and y is None:
            break
        pre.element(g0)
        pre.edge(e1)
        mid = list(cur[2:-2])
        mid[-1] = emul(mid[-1], y)
        cur = reduce_path(mid, cancel)
    return pre.result(), cur


def is_elliptic(S, g: NormalWord):
    """(True, witness) when g fixes a vertex of the splitting S."""
    if isinstance(S, GrushkoTree):
        S = as_splitting(S)
    pre, cur = _cyclic_reduce_in(S, S.word_loop(g))
    if len(cur) > 1:
        return False, None
    v = S.base
    for e in path_edges(pre):
        v = S.t(e)
    conj = multiply(S.zword, S.path_value(pre))
    return True, EllipticWitness(v, conj, cur[0])


def translation_length(S, g: NormalWord) -> int:
    """Number of edges in a fundamental domain of g's axis (0 when elliptic)."""
    if isinstance(S, GrushkoTree):
        _, core = cyclic_core(word_loop_items(S, g))
        return len(core)
    _, cur = _cyclic_reduce_in(S, S.word_loop(g))
    return len(cur) // 2


# -- comparing splittings ------------------------------------------------------


def _test_words(p):
    gens = p.generators()
    words = list(gens)
    for i, x in enumerate(gens):
        for j, y in enumerate(gens):
            if i < j:
                words.append(multiply(x, y))
                words.append(multiply(x, invert(y)))
    for i in range(len(gens)):
        x, y, z = gens[i], gens[(i + 1) % len(gens)], gens[(i + 2) % len(gens)]
        words.append(multiply(multiply(x, y), multiply(z, z)))
        words.append(multiply(multiply(x, x), multiply(invert(y), z)))
    return [w for w in words if not w.is_identity()]


def _quotient_graph(S):
    import networkx as nx

    G = nx.MultiGraph()
    if isinstance(S, GrushkoTree):
        for v in S.vertices:
            G.add_node(v, factors=() if S.labels[v] is None else (S.labels[v],))
    else:
        for v, z in S.vertices.items():
            G.add_node(v, factors=z.factors)
    for e, (o, t) in S.edges.items():
        cyc = isinstance(S, ZSplitting) and e in S.edge_groups
        G.add_edge(o, t, cyclic=cyc)
    return G


def equivalent(S0, S1) -> bool:
    """Heuristic equality of splittings: isomorphic labeled quotients and equal
    translation lengths on a fixed family of test words."""
    import networkx as nx
    from networkx.algorithms.isomorphism import categorical_edge_match, categorical_node_match

    if S0.presentation != S1.presentation:
        return False
    G0, G1 = _quotient_graph(S0), _quotient_graph(S1)
    if not nx.is_isomorphic(G0, G1, node_match=categorical_node_match("factors", ()),
                            edge_match=categorical_edge_match("cyclic", False)):
        return False
    return all(translation_length(S0, w) == translation_length(S1, w)
               for w in _test_words(S0.presentation))


# -- adjacency witnesses -------------------------------------------------------


@dataclass
class Compatible:
    refinement: object
    collapse0: frozenset
    collapse1: frozenset
    kind: str = "compatible"


@dataclass
class CommonElliptic:
    g: NormalWord
    witness0: Optional[EllipticWitness] = None
    witness1: Optional[EllipticWitness] = None
    kind: str = "common-elliptic"


def _collapse_any(S, C):
    if not C:
        return S
    if isinstance(S, GrushkoTree):
        return collapse(S, C, allow_cycles=True)[0]
    return collapse_splitting(S, C)


def check_witness(W, S0, S1) -> bool:
    """Re-validate an adjacency witness between S0 and S1."""
    from .words import is_peripheral

    if isinstance(W, CommonElliptic):
        if W.g.is_identity() or is_peripheral(W.g) is not None:
            return False
        return is_elliptic(S0, W.g)[0] and is_elliptic(S1, W.g)[0]
    if isinstance(W, Compatible):
        try:
            A = _collapse_any(W.refinement, W.collapse0)
            B = _collapse_any(W.refinement, W.collapse1)
        except Exception:
            return False
        return equivalent(A, S0) and equivalent(B, S1)
    return False


def zf_adjacent(S0, S1, hint: Optional[NormalWord] = None, max_edges: int = 10):
    """Search for an adjacency witness; None when nothing is found."""
    from itertools import combinations

    from .words import is_peripheral

    if equivalent(S0, S1):
        return Compatible(S0, frozenset(), frozenset())
    if hint is not None and not hint.is_identity() and is_peripheral(hint) is None:
        e0, w0 = is_elliptic(S0, hint)
        e1, w1 = is_elliptic(S1, hint)
        if e0 and e1:
            return CommonElliptic(hint, w0, w1)
    for A, B, flip in ((S0, S1, False), (S1, S0, True)):
        edges = sorted(A.edges)
        if len(edges) > max_edges:
            continue
        for r in range(1, len(edges)):
            for C in combinations(edges, r):
                try:
                    if equivalent(_collapse_any(A, set(C)), B):
                        C = frozenset(C)
                        return Compatible(A, C, frozenset()) if flip else Compatible(A, frozenset(), C)
                except Exception:
                    continue
    return None


def collapse_splitting(S: ZSplitting, C) -> ZSplitting:
    """Collapse edges of a splitting whose collapsed edges all have trivial groups."""
    C = {abs(e) for e in C}
    if C >= set(S.edges):
        raise NothingLeft("collapse would remove every edge")
    if any(e in S.edge_groups for e in C):
        raise NonForestCollapse("collapsing an edge with nontrivial edge group")
    p = S.presentation
    comp_of, comps = _components(list(S.vertices), S.edges, C)
    root, tau = {}, {}
    for K, vs in comps.items():
        r = S.base if S.base in vs else min(vs)
        root[K] = r
        tau[r] = (None,)
        queue = [r]
        while queue:
            u = queue.pop(0)
            for e in sorted(C):
                o, t = S.edges[e]
                for h, a, b in ((e, o, t), (-e, t, o)):
                    if a == u and b not in tau:
                        tau[b] = tau[u] + (h, None)
                        queue.append(b)
    val = lambda items: S.path_value(items)
    vertices = {}
    tree_edges = set()
    for v, path in tau.items():
        tree_edges.update(abs(e) for e in path_edges(path))
    for K, vs in comps.items():
        gens, factors = [], []
        for u in vs:
            c = val(tau[u])
            gens += [multiply(multiply(c, x), invert(c)) for x in S.vertices[u].gens]
            factors += S.vertices[u].factors
        for e in C:
            o, t = S.edges[e]
            if comp_of[o] == K and e not in tree_edges:
                gens.append(val(reduce_path(tau[o] + (e,) + path_inverse(tau[t]))))
        vertices[root[K]] = ZVertex(tuple(sorted(factors)), tuple(gens))
    edges, ewords, groups = {}, {}, {}
    for e, (o, t) in S.edges.items():
        if e in C:
            continue
        edges[e] = (root[comp_of[o]], root[comp_of[t]])
        co = val(tau[o])
        ewords[e] = multiply(multiply(co, S.edge_word(e)), invert(val(tau[t])))
        if e in S.edge_groups:
            groups[e] = multiply(multiply(co, S.edge_groups[e]), invert(co))

    def rewrite(items):
        nb = PathBuilder()
        seg = PathBuilder()
        u = S.base
        for i in range(0, len(items), 2):
            seg.element(items[i])
            if i + 1 < len(items):
                e = items[i + 1]
                if abs(e) in C:
                    seg.edge(e)
                else:
                    seg.extend(path_inverse(tau[S.o(e)]))
                    x = val(seg.result())
                    nb.element(None if x.is_identity() else x)
                    nb.edge(e)
                    seg = PathBuilder().extend(tau[S.t(e)])
                u = S.t(e)
        seg.extend(path_inverse(tau[u]))
        x = val(seg.result())
        nb.element(None if x.is_identity() else x)
        return nb.result()

    marking = {name: rewrite(items) for name, items in S.marking.items()}
    names = {e: n for e, n in S.edge_names.items() if e not in C}
    return ZSplitting(p, vertices, edges, groups, ewords, S.base, marking, S.zword, names,
                      S.vertex_names)


# -- bounds --------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionBounds:
    L: int
    xi: int
    c: int
    D0: int
    D1: int
    R0: int
    R: int
    D2: int


def compute_bounds(L: int, xi: int, c: Optional[int] = None) -> ProjectionBounds:
    if xi < 3:
        raise SporadicComplexity(f"complexity {xi} < 3")
    if L < 1:
        raise ValueError("L must be positive")
    if c is None:
        c = L
    R0 = 2 * xi * c ** L + 1
    return ProjectionBounds(L, xi, c, 2 * L + 3, 2 * L + 5, R0, R0, 2 * L + 2 * R0 + 5)
