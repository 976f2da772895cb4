"""Labeled Whitehead graphs, admissible cuts and the reduction loop.

A Whitehead graph at a vertex v is a voltage graph: vertices are half-edges
at v, and a turn (h1, a, h2) of a line gives an edge h1 -> h2 labeled a.  The
derived graph T_v(L) has vertices (h, s) for s in Stab(v) and edges
(h1, s) -- (h2, s a).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import networkx as nx

from .errors import (
    DisconnectedSubgraph,
    NoValidMove,
    PeripheralElement,
    SporadicPresentation,
)
from .tree import (
    Compatible,
    GrushkoTree,
    Turn,
    collapse,
    cyclic_loop,
    ecanon,
    einv,
    emul,
    half_key,
    normalize_degree2,
    split_vertex,
    turns_of_core,
    unfold,
)
from .words import FactorSpec, NormalWord, factor_subgroup, is_peripheral, root

TRIVIAL = "trivial"
INFINITE = "infinite"


def elem_key(a):
    return () if a is None else a.sort_key()


def fmt_elem(a, p=None) -> str:
    return "1" if a is None else a.format(p)


# -- line collections ----------------------------------------------------------


class LineCollection:
    """Conjugacy representatives of non-peripheral elements, stored as roots."""

    def __init__(self, generators):
        gens = list(generators)
        if not gens:
            raise ValueError("empty line collection")
        roots = []
        for g in gens:
            if g.is_identity() or is_peripheral(g) is not None:
                raise PeripheralElement(f"{g} is peripheral")
            roots.append(root(g))
        self.generators = tuple(gens)
        self.roots = tuple(roots)
        self.presentation = gens[0].presentation
        self._cache = {}

    def cores(self, T) -> list:
        key = id(T)
        hit = self._cache.get(key)
        if hit is None or hit[0] is not T:
            hit = (T, [cyclic_loop(T, r) for r in self.roots])
            self._cache = {key: hit}
        return hit[1]

    def length(self, T) -> int:
        return sum(len(c) for c in self.cores(T))

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


def as_lines(lines) -> LineCollection:
    if isinstance(lines, LineCollection):
        return lines
    if isinstance(lines, NormalWord):
        return LineCollection([lines])
    return LineCollection(lines)


def line_turns(T, lines) -> list:
    """[(j, k, Turn)] for every turn of every line."""
    out = []
    for j, core in enumerate(as_lines(lines).cores(T)):
        for k, (h1, c, h2) in enumerate(turns_of_core(core)):
            out.append((j, k, Turn(h1, T.t(core[k][0]), c, h2)))
    return out


# -- graphs ----------------------------------------------------------------------


@dataclass(frozen=True)
class WEdge:
    u: object
    v: object
    label: object = None
    line: Optional[int] = None
    turn: Optional[int] = None
    info: tuple = ()


@dataclass
class WhiteheadGraph:
    vertices: list
    edges: list
    names: dict = field(default_factory=dict)
    at: object = None
    factor: Optional[int] = None
    spec: Optional[FactorSpec] = None
    presentation: object = None
    kind: str = "vertex"
    extra: dict = field(default_factory=dict)

    def name(self, x) -> str:
        return self.names.get(x, str(x))

    def to_networkx(self, vertices=None) -> nx.MultiGraph:
        G = nx.MultiGraph()
        vs = self.vertices if vertices is None else vertices
        G.add_nodes_from(vs)
        keep = set(vs)
        for i, e in enumerate(self.edges):
            if e.u in keep and e.v in keep:
                G.add_edge(e.u, e.v, key=i)
        return G

    def components(self, vertices=None) -> list:
        G = self.to_networkx(vertices)
        order = {x: i for i, x in enumerate(self.vertices)}
        comps = [sorted(c, key=order.get) for c in nx.connected_components(G)]
        comps.sort(key=lambda c: order[c[0]])
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def cut_vertices(self) -> list:
        G = nx.Graph(self.to_networkx())
        G.remove_edges_from(list(nx.selfloop_edges(G)))
        order = {x: i for i, x in enumerate(self.vertices)}
        return sorted(nx.articulation_points(G), key=order.get)

    def degree(self, x) -> int:
        return sum((e.u == x) + (e.v == x) for e in self.edges)

    def is_circle(self) -> bool:
        if not self.vertices or not self.edges:
            return False
        if any(self.degree(x) != 2 for x in self.vertices):
            return False
        return self.is_connected()

    def is_cycle_union(self) -> bool:
        """Every vertex has degree two; the quotient may still fall apart at a
        vertex with nontrivial stabilizer (each piece then lifts to lines)."""
        return bool(self.vertices) and all(self.degree(x) == 2 for x in self.vertices)

    def edge_multiset(self) -> list:
        out = []
        for e in self.edges:
            a, b = self.name(e.u), self.name(e.v)
            out.append(tuple(sorted((a, b))))
        return sorted(out)

    def to_dot(self) -> str:
        p = self.presentation
        lines = ["graph whitehead {"]
        for x in self.vertices:
            lines.append(f'  "{self.name(x)}";')
        for e in self.edges:
            lab = e.label if isinstance(e.label, (int, str)) else fmt_elem(e.label, p)
            prov = "" if e.line is None else f' line="{e.line}:{e.turn}"'
            lines.append(f'  "{self.name(e.u)}" -- "{self.name(e.v)}" [label="{lab}"{prov}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def vertex_whitehead(T: GrushkoTree, lines, v: int) -> WhiteheadGraph:
    """Wh_T(L, v) built from the axis turns of the lines at v."""
    lines = as_lines(lines)
    verts = list(T.half_edges(v))
    edges = [WEdge(t.in_half, t.out_half, t.label, j, k)
             for j, k, t in line_turns(T, lines) if t.vertex == v]
    names = {h: T.half_name(h) for h in verts}
    return WhiteheadGraph(verts, edges, names, v, T.labels[v], T.spec(v), T.presentation)


# -- monodromy -----------------------------------------------------------------


def potentials(W: WhiteheadGraph, sub, edges=None, rootv=None):
    """Spanning-tree potentials p with p(w) = p(u) a along edges u -a-> w.

    Returns (p, cotree generators p(u) a p(w)^-1)."""
    sub = list(sub)
    keep = set(sub)
    if edges is None:
        edges = [e for e in W.edges if e.u in keep and e.v in keep]
    adj = {x: [] for x in sub}
    for i, e in enumerate(edges):
        adj[e.u].append((i, e.v, e.label))
        adj[e.v].append((i, e.u, einv(e.label)))
    r = sub[0] if rootv is None else rootv
    p = {r: None}
    used = set()
    queue = [r]
    while queue:
        u = queue.pop(0)
        for i, w, a in adj[u]:
            if w not in p:
                p[w] = emul(p[u], a)
                used.add(i)
                queue.append(w)
    if len(p) != len(keep):
        raise DisconnectedSubgraph("subgraph is not connected")
    gens = []
    for i, e in enumerate(edges):
        if i not in used:
            gens.append(emul(emul(p[e.u], e.label), einv(p[e.v])))
    return p, gens


def _subgroup(W, gens):
    gens = [g for g in gens if g is not None]
    if W.factor is None:
        return factor_subgroup([], None, None)
    if not gens:
        return factor_subgroup([], W.factor, W.spec)
    return factor_subgroup(gens, W.factor, W.spec)


def monodromy(W: WhiteheadGraph, sub=None, edges=None):
    """Mon(sub) as a FactorSubgroupReport (based at the first vertex of sub)."""
    if sub is None:
        sub = W.vertices
    _, gens = potentials(W, sub, edges)
    return _subgroup(W, gens)


# -- admissible cuts -----------------------------------------------------------


@dataclass(frozen=True)
class AdmissibleCut:
    kind: str  # "i" or "ii"
    vertex: int
    U: frozenset
    V: frozenset
    cut_vertex: Optional[int] = None
    twists: tuple = ()

    @property
    def twist_map(self) -> dict:
        return dict(self.twists)


def _twists(p):
    return tuple(sorted(((h, a) for h, a in p.items() if a is not None),
                        key=lambda t: half_key(t[0])))


def find_admissible_cut(W: WhiteheadGraph, stab_kind: Optional[str] = None):
    """First admissible cut in canonical order, or None.  Type i first."""
    if stab_kind is None:
        stab_kind = TRIVIAL if W.factor is None else INFINITE
    allv = frozenset(W.vertices)
    comps = W.components()
    ranked = sorted(comps, key=lambda c: (len(c) == 1, W.vertices.index(c[0])))
    for c in ranked:
        V = allv - set(c)
        if stab_kind == TRIVIAL and not V:
            continue
        p, gens = potentials(W, c)
        if _subgroup(W, gens).is_trivial:
            return AdmissibleCut("i", W.at, frozenset(c), V, None, _twists(p))
    # Y need not be an articulation point: a loop at Y can make up V on its own
    arts = W.cut_vertices()
    for Y in arts + [x for x in W.vertices if x not in arts]:
        comp = next(c for c in comps if Y in c)
        rest = [x for x in comp if x != Y]
        pieces = W.components(rest) if rest else []
        if not pieces:
            continue
        good = []
        for P in pieces:
            sub = [Y] + list(P)
            keep = set(P)
            edges = [e for e in W.edges if (e.u in keep or e.v in keep)
                     and e.u in keep | {Y} and e.v in keep | {Y}]
            p, gens = potentials(W, sub, edges, rootv=Y)
            if _subgroup(W, gens).is_trivial:
                good.append((P, p))
        while good:
            U = {Y}.union(*[set(P) for P, _ in good])
            V = (allv - U) | {Y}
            if any(e.u in V and e.v in V for e in W.edges):
                break
            good.pop()
        if good:
            tw = {}
            for _, p in good:
                tw.update(p)
            return AdmissibleCut("ii", W.at, frozenset(U), frozenset(V), Y, _twists(tw))
    return None


# -- moves ---------------------------------------------------------------------


@dataclass
class Move:
    kind: str
    vertex: int
    cut: AdmissibleCut
    before: GrushkoTree
    after: GrushkoTree
    witness: Compatible
    rewriter: object = None


def blow_up(T: GrushkoTree, v: int, cut: AdmissibleCut):
    """Type i move.  Returns (T', collapse_back) where collapse_back = {f}."""
    if cut.kind != "i":
        from .errors import InvalidCut

        raise InvalidCut("blow_up needs a type i cut")
    T2, rw, f, _ = split_vertex(T, v, cut.U, cut.twist_map)
    return T2, frozenset({f}), rw


def unfold_move(T: GrushkoTree, v: int, cut: AdmissibleCut):
    """Type ii move followed by degree-2 normalization.

    Returns (T', witness, rewriter).  The witness refines both trees: blow up
    the far end of the copied edge so that the edge and its copy become
    parallel; collapsing them gives T, collapsing the new edge (and the
    normalization edges) gives T'."""
    if cut.kind != "ii":
        from .errors import InvalidCut

        raise InvalidCut("unfold needs a type ii cut")
    hY = cut.cut_vertex
    T1, rw1, Ep, n = unfold(T, v, hY, cut.U, cut.twist_map)
    T2, rw2 = normalize_degree2(T1)
    removed = set(T1.edges) - set(T2.edges)
    sg = 1 if hY > 0 else -1
    far = T1.t(hY)
    R, _, g, _ = split_vertex(T1, far, {-hY, -sg * Ep})
    witness = Compatible(R, frozenset({abs(hY), Ep}), frozenset({g}) | removed)
    return T2, witness, rw1.then(rw2)


def crossed_edges(T, lines) -> set:
    out = set()
    for core in as_lines(lines).cores(T):
        out.update(abs(e) for e, _ in core)
    return out


@dataclass
class Reduction:
    outcome: str  # "uncrossed" or "reduced"
    tree: GrushkoTree
    moves: list
    edge: Optional[int] = None
    splitting: object = None
    witness: object = None
    rewriter: object = None
    lengths: list = field(default_factory=list)

    @property
    def reduced(self) -> bool:
        return self.outcome == "reduced"


def free_splitting_for(T, e):
    """Collapse every edge except e."""
    C = set(T.edges) - {e}
    S, _ = collapse(T, C, allow_cycles=True)
    return S, Compatible(T, frozenset(), frozenset(C))


def whitehead_reduce(T: GrushkoTree, lines, max_moves: Optional[int] = None) -> Reduction:
    """Apply admissible-cut moves until an edge is uncrossed or no cut exists."""
    from .tree import Rewriter

    if T.presentation.sporadic:
        raise SporadicPresentation("sporadic presentation")
    lines = as_lines(lines)
    T, rw = normalize_degree2(T)
    moves, lengths = [], [lines.length(T)]
    limit = lengths[0] if max_moves is None else max_moves
    while True:
        unc = sorted(set(T.edges) - crossed_edges(T, lines))
        if unc:
            S, wit = free_splitting_for(T, unc[0])
            return Reduction("uncrossed", T, moves, unc[0], S, wit, rw, lengths)
        found = None
        for v in T.vertices:
            W = vertex_whitehead(T, lines, v)
            cut = find_admissible_cut(W)
            if cut is not None:
                found = (v, cut)
                break
        if found is None:
            return Reduction("reduced", T, moves, rewriter=rw, lengths=lengths)
        if len(moves) >= limit:
            raise NoValidMove("reduction exceeded its move bound")
        v, cut = found
        if cut.kind == "i":
            T2, back, step = blow_up(T, v, cut)
            witness = Compatible(T2, back, frozenset())
            kind = "blow-up"
        else:
            T2, witness, step = unfold_move(T, v, cut)
            kind = "unfold"
        moves.append(Move(kind, v, cut, T, T2, witness, step))
        rw = rw.then(step) if isinstance(rw, Rewriter) else step
        T = T2
        lengths.append(lines.length(T))


# -- derived graphs --------------------------------------------------------------


def default_budget() -> int:
    import os

    try:
        return max(1, int(os.environ.get("GW_BUDGET", "100000")))
    except ValueError:
        return 100000


@dataclass
class QuotientComponent:
    vertices: list
    mon: object
    index: Optional[int]  # number of derived components; None when infinite
    potentials: dict
    kind: str  # finite | line | one-ended | many-ended


@dataclass
class InfinitePiece:
    component: int
    coset: object
    kind: str
    ends: tuple
    sources: list
    translation: object = None


@dataclass
class ComponentReport:
    quotient: list
    finite: list = field(default_factory=list)
    infinite: list = field(default_factory=list)
    untouched: list = field(default_factory=list)
    removed: frozenset = frozenset()
    _engine: object = field(default=None, repr=False)

    @property
    def count(self) -> Optional[int]:
        n = len(self.finite) + len(self.infinite)
        for _, c, _ in self.untouched:
            if c is None:
                return None
            n += c
        return n

    @property
    def finite_vertices(self) -> set:
        out = set()
        for c in self.finite:
            out |= c
        return out

    def has_infinitely_many_finite(self) -> bool:
        return any(fin and c is None for _, c, fin in self.untouched)

    def kinds(self) -> dict:
        out = {}
        for piece in self.infinite:
            out[piece.kind] = out.get(piece.kind, 0) + 1
        for K, c, fin in self.untouched:
            kind = self.quotient[K].kind
            out[kind] = out.get(kind, 0) + (c if c is not None else float("inf"))
        out["finite"] = out.get("finite", 0) + len(self.finite)
        return out

    def component_of(self, node):
        return self._engine.component_of(node)


class _Derived:
    def __init__(self, W: WhiteheadGraph):
        if W.factor is None:
            from .errors import TrivialStabilizer

            raise TrivialStabilizer("derived graphs need a labeled vertex")
        self.W = W
        self.adj = {x: [] for x in W.vertices}
        for e in W.edges:
            self.adj[e.u].append((e.v, e.label))
            self.adj[e.v].append((e.u, einv(e.label)))
        self.quotient = []
        self.comp_of = {}
        for i, c in enumerate(W.components()):
            p, gens = potentials(W, c)
            mon = _subgroup(W, gens)
            for x in c:
                self.comp_of[x] = i
            if mon.is_trivial:
                kind = "finite"
            elif mon.rank == 1:
                kind = "line"
            elif mon.kind == "abelian":
                kind = "one-ended"
            else:
                kind = "many-ended"
            self.quotient.append(QuotientComponent(c, mon, mon.index, p, kind))

    def neighbors(self, node):
        h, s = node
        for y, a in self.adj[h]:
            yield (y, emul(s, a))

    def coset(self, node):
        h, s = node
        K = self.comp_of[h]
        return K, emul(s, einv(self.quotient[K].potentials[h]))

    def same_coset(self, K, x, y) -> bool:
        return self.quotient[K].mon.contains(emul(einv(x), y))


def _node_key(node):
    h, s = node
    return (half_key(h) if isinstance(h, int) else h, elem_key(s))


def derived_components(W: WhiteheadGraph) -> ComponentReport:
    D = _Derived(W)
    untouched = [(i, q.index, q.kind == "finite") for i, q in enumerate(D.quotient)]
    rep = ComponentReport(D.quotient, untouched=untouched)
    rep._engine = _Classifier(D, frozenset(), default_budget())
    return rep


class _Classifier:
    def __init__(self, D: _Derived, removed, budget):
        self.D = D
        self.R = removed
        self.budget = budget
        self.by_class = {}
        for h, s in removed:
            self.by_class.setdefault(h, []).append(s)
        self.pieces = []  # [visited set, closed, K, coset, info]
        self.parent = []

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        i, j = self.find(i), self.find(j)
        if i != j:
            self.parent[max(i, j)] = min(i, j)

    def explore(self, src, cap):
        prev = {src: None}
        queue = [src]
        head = 0
        while head < len(queue):
            if len(prev) > cap:
                return prev, queue, False
            u = queue[head]
            head += 1
            for y in self.D.neighbors(u):
                if y in self.R or y in prev:
                    continue
                prev[y] = u
                queue.append(y)
        return prev, queue, True

    def _path(self, prev, x):
        out = []
        while x is not None:
            out.append(x)
            x = prev[x]
        return out

    def _avoids(self, nodes, g) -> bool:
        from .words import factor_log

        for h, s in nodes:
            for r in self.by_class.get(h, ()):
                n = factor_log(emul(r, einv(s)), g)
                if n is not None and n >= 1:
                    return False
        return True

    def certificate(self, prev, order):
        seen = {}
        for node in order:
            seen.setdefault(node[0], [])
            if len(seen[node[0]]) < 8:
                seen[node[0]].append(node)
        for h in sorted(seen, key=half_key):
            vs = seen[h]
            for i in range(len(vs)):
                for j in range(i + 1, len(vs)):
                    for x, y in ((vs[i], vs[j]), (vs[j], vs[i])):
                        g = emul(y[1], einv(x[1]))
                        if g is None:
                            continue
                        nodes = self._path(prev, x) + self._path(prev, y)
                        if self._avoids(nodes, g):
                            return g
        return None

    def run(self, sources):
        from .errors import BudgetExceeded

        assigned = {}
        for src in sources:
            if src in assigned:
                continue
            K, cos = self.D.coset(src)
            cap = 64
            while True:
                prev, order, closed = self.explore(src, min(cap, self.budget))
                if closed:
                    g = None
                    break
                g = self.certificate(prev, order)
                if g is not None:
                    break
                if cap >= self.budget:
                    raise BudgetExceeded(f"no certificate within {self.budget} vertices")
                cap *= 4
            idx = len(self.pieces)
            self.pieces.append([set(prev), closed, K, cos, g, [src]])
            self.parent.append(idx)
            for other in sources:
                if other in prev and other not in assigned:
                    assigned[other] = idx
                    if other != src:
                        self.pieces[idx][5].append(other)
                elif other in prev and other in assigned:
                    self.union(idx, assigned[other])
            assigned[src] = idx
        self._merge_ends()
        return assigned

    def end_sign(self, piece):
        from .words import factor_log

        _, _, K, cos, g, _ = piece
        q = self.D.quotient[K]
        m = q.mon.generator_if_cyclic()
        k = factor_log(emul(emul(einv(cos), g), cos), m)
        if k is None or k == 0:
            raise AssertionError("translation outside the component stabilizer")
        return 1 if k > 0 else -1

    def _merge_ends(self):
        for i, a in enumerate(self.pieces):
            if a[1]:
                continue
            for j in range(i):
                b = self.pieces[j]
                if b[1] or a[2] != b[2] or not self.D.same_coset(a[2], a[3], b[3]):
                    continue
                kind = self.D.quotient[a[2]].kind
                if kind == "one-ended":
                    self.union(i, j)
                elif kind == "line" and self.end_sign(a) == self.end_sign(b):
                    self.union(i, j)

    def report(self) -> ComponentReport:
        D = self.D
        groups = {}
        for i in range(len(self.pieces)):
            groups.setdefault(self.find(i), []).append(i)
        finite, infinite = [], []
        touched = {}
        for r in sorted(groups):
            members = [self.pieces[i] for i in groups[r]]
            K, cos = members[0][2], members[0][3]
            lst = touched.setdefault(K, [])
            if not any(D.same_coset(K, cos, c) for c in lst):
                lst.append(cos)
            if members[0][1]:
                finite.append(frozenset(members[0][0]))
                continue
            kind = D.quotient[K].kind
            ends = ()
            if kind == "line":
                ends = tuple(sorted({self.end_sign(m) for m in members}))
                kind = "line" if len(ends) == 2 else "ray"
            sources = sorted({s for m in members for s in m[5]}, key=_node_key)
            infinite.append(InfinitePiece(K, cos, kind, ends, sources, members[0][4]))
        for h, s in self.R:
            K, cos = D.coset((h, s))
            lst = touched.setdefault(K, [])
            if not any(D.same_coset(K, cos, c) for c in lst):
                lst.append(cos)
        untouched = []
        for K, q in enumerate(D.quotient):
            n = len(touched.get(K, ()))
            c = None if q.index is None else q.index - n
            untouched.append((K, c, q.kind == "finite"))
        finite.sort(key=lambda c: min(_node_key(x) for x in c))
        rep = ComponentReport(D.quotient, finite, infinite, untouched, frozenset(self.R))
        rep._engine = self
        return rep

    def component_of(self, node):
        """A hashable id of the component of T_v - R containing node."""
        if node in self.R:
            return None
        K, cos = self.D.coset(node)
        for i, piece in enumerate(self.pieces):
            if node in piece[0]:
                return ("piece", self.find(i))
        touched = any(self.D.same_coset(K, cos, self.pieces[i][3])
                      for i in range(len(self.pieces)) if self.pieces[i][2] == K)
        touched = touched or any(self.D.coset(r) == (K, cos) or (
            self.D.coset(r)[0] == K and self.D.same_coset(K, cos, self.D.coset(r)[1]))
            for r in self.R)
        if not touched:
            return ("untouched", K, self._coset_id(K, cos))
        prev, _, _ = self.explore(node, self.budget)
        for i, piece in enumerate(self.pieces):
            if not piece[1] and any(x in piece[0] for x in prev):
                return ("piece", self.find(i))
        return ("unresolved", node)

    def _coset_id(self, K, cos):
        """Canonical representative of the coset cos * Mon_K."""
        q = self.D.quotient[K]
        reps = getattr(self, "_reps", {})
        self._reps = reps
        lst = reps.setdefault(K, [])
        for i, c in enumerate(lst):
            if self.D.same_coset(K, c, cos):
                return i
        lst.append(cos)
        return len(lst) - 1


def classify_components_minus(W: WhiteheadGraph, removed, budget: Optional[int] = None
                              ) -> ComponentReport:
    """Components of T_v(L) minus finitely many derived vertices."""
    removed = frozenset((h, ecanon(s)) for h, s in removed)
    D = _Derived(W)
    C = _Classifier(D, removed, budget or default_budget())
    if not removed:
        rep = derived_components(W)
        rep._engine = C
        return rep
    sources = set()
    for r in removed:
        for y in D.neighbors(r):
            if y not in removed:
                sources.add(y)
    C.run(sorted(sources, key=_node_key))
    return C.report()


# -- subtree Whitehead graphs ------------------------------------------------------
#
# A lift of a vertex of T is written as a tuple q of steps (s, h): apply the
# stabilizer element s at the current vertex, then cross the half-edge h.  The
# empty tuple is the chosen lift of the base vertex.  Directions at q are pairs
# (h, s) read in q's local frame.

_LETTERS = "YZUVRSPQ"
_HATS = "vwuxyzrs"


def _qvertex(T, base, q):
    return base if not q else T.t(q[-1][1])


def step(q: tuple, d) -> tuple:
    """Neighbour of q in direction d, with the direction back at the neighbour."""
    h, s = d
    if q and s is None and h == -q[-1][1]:
        s0, e0 = q[-1]
        return q[:-1], (e0, s0)
    return q + ((s, h),), (-h, None)


def lift_vertex(T, base, q) -> int:
    """Quotient vertex of the lift q."""
    return _qvertex(T, base, q)


@dataclass(frozen=True)
class SubtreeSpec:
    """A finite subtree X: whole vertices, half-edge stubs and an optional midpoint.

    vertices: lifts q (connected, edges between adjacent vertices included)
    stubs: (q, (h, s)) half-edges from a vertex of X to a midpoint
    midpoint: (q, (h, s)) when X is a single edge midpoint
    """

    vertices: tuple = ()
    stubs: tuple = ()
    midpoint: Optional[tuple] = None
    base: int = 0
    letters: tuple = ()  # (q, letter, hat) overrides

    def names_for(self, q, i):
        for qq, letter, hat in self.letters:
            if qq == q:
                return letter, hat
        letter = _LETTERS[i] if i < len(_LETTERS) else f"Y{i}"
        hat = _HATS[i] if i < len(_HATS) else f"v{i}"
        return letter, hat


def _canon_dir(d):
    return (d[0], ecanon(d[1]))


def _prefix(s, p) -> str:
    return "" if s is None else f"{fmt_elem(s, p)}."


def _info(e: WEdge, tag, default=()):
    for k, v in e.info:
        if k == tag:
            return v
    return default


class _XEngine:
    """Whitehead graph of T - X for a finite or periodic X.

    nodes: list of vertex ids of X; qv[x] their quotient vertices; removed[x]
    maps each direction at x meeting X to ('move', x', arrival, shift) or
    ('stub', vertex id).
    """

    def __init__(self, T, lines, nodes, qv, removed, budget=None):
        self.T = T
        self.p = T.presentation
        self.lines = as_lines(lines)
        self.nodes = list(nodes)
        self.qv = qv
        self.removed = {x: {_canon_dir(d): r for d, r in removed.get(x, {}).items()}
                        for x in self.nodes}
        self.budget = budget
        self.turns = {}
        self.at = {}
        for j, k, t in line_turns(T, self.lines):
            self.turns.setdefault(j, {})[k] = (t.in_half, t.label, t.out_half)
            self.at.setdefault(t.vertex, []).append((j, k, t.in_half, t.label, t.out_half))
        self.turns = {j: [d[k] for k in range(len(d))] for j, d in self.turns.items()}
        self.finite = {}
        self.reports = {}
        self._wh = {}
        for x in self.nodes:
            if T.labels[qv[x]] is None:
                continue
            W = self._vertex_graph(qv[x])
            rep = classify_components_minus(W, list(self.removed[x]), budget)
            if rep.has_infinitely_many_finite():
                from .errors import NotReduced

                raise NotReduced(f"a component of the Whitehead graph at "
                                 f"{T.vertex_name(qv[x])} has trivial monodromy")
            self.reports[x] = rep
            self.finite[x] = rep.finite_vertices

    def _vertex_graph(self, v):
        if v not in self._wh:
            self._wh[v] = vertex_whitehead(self.T, self.lines, v)
        return self._wh[v]

    def labeled(self, x) -> bool:
        return self.T.labels[self.qv[x]] is not None

    def vertex_of(self, x, d):
        h, s = d
        if not self.labeled(x):
            return ("dir", x, h, None)
        if d in self.finite[x]:
            return ("dir", x, h, s)
        return ("hat", x)

    def local_vertices(self, x) -> list:
        if self.labeled(x):
            fin = sorted(self.finite[x], key=_node_key)
            return [("dir", x, h, s) for h, s in fin] + [("hat", x)]
        return [("dir", x, h, None) for h in self.T.half_edges(self.qv[x])
                if (h, None) not in self.removed[x]]

    def local_edges(self, x) -> list:
        out = []
        rem = self.removed[x]
        turns = self.at.get(self.qv[x], [])
        if not self.labeled(x):
            for j, k, h1, b, h2 in turns:
                if (h1, None) not in rem and (h2, None) not in rem:
                    out.append(WEdge(("dir", x, h1, None), ("dir", x, h2, None), None, j, k,
                                     (("path", (x,)),)))
            return out
        for h, s in sorted(self.finite[x], key=_node_key):
            for j, k, h1, b, h2 in turns:
                if h1 != h:
                    continue
                other = (h2, emul(s, b))
                if other in rem:
                    continue
                out.append(WEdge(("dir", x, h, s), self.vertex_of(x, other), None, j, k,
                                 (("path", (x,)),)))
        return out

    def instances(self, x, d):
        h, s = d
        for j, k, h1, b, h2 in self.at.get(self.qv[x], []):
            if h1 == h:
                yield j, k, s
            if h2 == h:
                yield j, k, emul(s, einv(b))

    def trace(self, x, j, i, sig, bound=None):
        """Follow one line instance through X; None if it never leaves."""
        turns = self.turns[j]
        n = len(turns)
        steps = 0
        while True:
            h1, b, h2 = turns[i]
            r = self.removed[x].get((h1, sig))
            if r is None or r[0] != "move":
                break
            _, x2, (ah, at), _ = r
            i = (i - 1) % n
            sig = emul(at, einv(turns[i][1]))
            x = x2
            steps += 1
            if bound is not None and steps > bound:
                return None
        key = (j, x, i, elem_key(sig))
        cross = []
        h1, b, h2 = turns[i]
        r = self.removed[x].get((h1, sig))
        if r is None:
            end0 = self.vertex_of(x, (h1, sig))
        else:
            end0 = r[1]
            cross.append((end0, (j, i)))
        path = [x]
        shift = 0
        start_turn = i
        steps = 0
        while True:
            h1, b, h2 = turns[i]
            dep = (h2, emul(sig, b))
            r = self.removed[x].get(dep)
            if r is not None and r[0] == "move":
                _, x2, (ah, at), sh = r
                shift += sh
                i = (i + 1) % n
                sig = at
                x = x2
                path.append(x)
                steps += 1
                if bound is not None and steps > bound:
                    return None
                continue
            if r is not None:
                end1 = r[1]
                cross.append((end1, (j, (i + 1) % n)))
            else:
                end1 = self.vertex_of(x, dep)
            break
        info = (("path", tuple(path)), ("cross", tuple(cross)), ("shift", shift))
        return key, WEdge(end0, end1, shift if shift else None, j, start_turn, info)

    def traced_edges(self, bound_fn=None) -> list:
        seen = {}
        for x in self.nodes:
            for d in sorted(self.removed[x], key=_node_key):
                for j, k, sig in self.instances(x, d):
                    bound = None if bound_fn is None else bound_fn(j)
                    res = self.trace(x, j, k, sig, bound)
                    if res is None:
                        continue
                    key, e = res
                    seen.setdefault(key, e)
        return list(seen.values())


def _edge_sort(W):
    def key(e):
        a, b = sorted((W.name(e.u), W.name(e.v)))
        return (a, b, -1 if e.line is None else e.line, -1 if e.turn is None else e.turn)

    W.edges.sort(key=key)
    return W


def _drop_hat_loops(edges):
    return [e for e in edges if not (e.u == e.v and e.u[0] == "hat")]


def _midpoint_graph(T, lines, X: SubtreeSpec) -> WhiteheadGraph:
    q, d = X.midpoint
    d = _canon_dir(tuple(q and () or ()) or d)
    q = tuple(q)
    q2, back = step(q, d)
    A, B = ("stub", q, d[0], d[1]), ("stub", q2, back[0], back[1])
    p = T.presentation
    names = {A: f"{_prefix(d[1], p)}W{T.edge_name(d[0])}{'+' if d[0] > 0 else '-'}",
             B: f"{_prefix(back[1], p)}W{T.edge_name(back[0])}{'+' if back[0] > 0 else '-'}"}
    lines = as_lines(lines)
    v = _qvertex(T, X.base, q)
    edges = []
    for j, k, t in line_turns(T, lines):
        if t.vertex != v:
            continue
        n = len(lines.cores(T)[j])
        # arriving through d crosses core edge k, leaving through d crosses k + 1
        for h, kk in ((t.in_half, k), (t.out_half, (k + 1) % n)):
            if h == d[0]:
                info = (("path", ()), ("cross", ((A, (j, kk)), (B, (j, kk)))), ("shift", 0))
                edges.append(WEdge(A, B, None, j, kk, info))
    W = WhiteheadGraph([A, B], edges, names, X, None, None, p, "subtree", {})
    return _edge_sort(W)


def subtree_whitehead(T: GrushkoTree, lines, X: SubtreeSpec, budget=None) -> WhiteheadGraph:
    """Wh_T(L, X) for a finite subtree X (T must be reduced for L)."""
    if X.midpoint is not None and not X.vertices:
        return _midpoint_graph(T, lines, X)
    verts = [tuple(q) for q in X.vertices]
    vset = set(verts)
    if len(vset) != len(verts) or not verts:
        raise ValueError("X needs distinct vertices")
    qv = {q: _qvertex(T, X.base, q) for q in verts}
    removed = {q: {} for q in verts}
    for q in verts:
        for q2 in verts:
            if len(q2) == len(q) + 1 and q2[:-1] == q:
                s, h = q2[-1]
                removed[q][(h, s)] = ("move", q2, (-h, None), 0)
                removed[q2][(-h, None)] = ("move", q, (h, s), 0)
    seen = set()
    for q in verts:
        todo = [v for v in verts if v != q]
        if not todo:
            break
    # connectivity
    comp = {verts[0]}
    grow = [verts[0]]
    while grow:
        q = grow.pop()
        for _, r in removed[q].items():
            if r[1] not in comp:
                comp.add(r[1])
                grow.append(r[1])
    if comp != vset:
        raise ValueError("X is not connected")
    stub_ids = []
    p = T.presentation
    names = {}
    for q, d in X.stubs:
        q = tuple(q)
        d = _canon_dir(d)
        if q not in vset:
            raise ValueError("stub attached outside X")
        sid = ("stub", q, d[0], d[1])
        if d in removed[q]:
            raise ValueError("stub overlaps X")
        removed[q][d] = ("stub", sid)
        stub_ids.append(sid)
        nm = f"{_prefix(d[1], p)}W{T.edge_name(d[0])}{'+' if d[0] > 0 else '-'}"
        while nm in seen:
            nm += "'"
        seen.add(nm)
        names[sid] = nm
    eng = _XEngine(T, lines, verts, qv, removed, budget)
    vertices = []
    for i, q in enumerate(verts):
        letter, hat = X.names_for(q, i)
        for v in eng.local_vertices(q):
            vertices.append(v)
            if v[0] == "hat":
                names[v] = f"{hat}hat"
            else:
                _, _, h, s = v
                names[v] = f"{_prefix(s, p)}{letter}{T.edge_name(h)}{'+' if h > 0 else '-'}"
    vertices.extend(stub_ids)
    edges = []
    for q in verts:
        edges.extend(eng.local_edges(q))
    edges.extend(eng.traced_edges())
    edges = _drop_hat_loops(edges)
    W = WhiteheadGraph(vertices, edges, names, X, None, None, p, "subtree",
                       {"reports": eng.reports})
    return _edge_sort(W)


def splice(A: WhiteheadGraph, ya, B: WhiteheadGraph, yb) -> WhiteheadGraph:
    """Remove [ya] from A and [yb] from B and join the loose ends line by line."""
    from .errors import PairingMismatch

    def ends(W, y):
        out = {}
        for e in W.edges:
            if y not in (e.u, e.v):
                continue
            if e.u == e.v:
                raise PairingMismatch("loop at a splice vertex")
            keys = [k for v, k in _info(e, "cross") if v == y]
            if len(keys) != 1:
                raise PairingMismatch("loose end without a crossing record")
            if keys[0] in out:
                raise PairingMismatch(f"crossing {keys[0]} repeated")
            out[keys[0]] = e
        return out

    ea, eb = ends(A, ya), ends(B, yb)
    if set(ea) != set(eb):
        raise PairingMismatch("loose ends do not match")
    vertices = [x for x in A.vertices if x != ya] + [x for x in B.vertices if x != yb]
    names = {**A.names, **B.names}
    names.pop(ya, None)
    names.pop(yb, None)
    edges = [e for e in A.edges if ya not in (e.u, e.v)]
    edges += [e for e in B.edges if yb not in (e.u, e.v)]
    for key in sorted(ea):
        a, b = ea[key], eb[key]
        ua = a.v if a.u == ya else a.u
        vb = b.v if b.u == yb else b.u
        cross = tuple(c for c in _info(a, "cross") + _info(b, "cross") if c[0] not in (ya, yb))
        info = (("path", tuple(_info(a, "path")) + tuple(_info(b, "path"))), ("cross", cross),
                ("shift", 0))
        edges.append(WEdge(ua, vb, None, a.line, a.turn, info))
    W = WhiteheadGraph(vertices, _drop_hat_loops(edges), names, None, None, None,
                       A.presentation, "subtree", {})
    return _edge_sort(W)


# -- periodic graphs along an axis ---------------------------------------------------


@dataclass
class AnnularReport:
    graph: WhiteheadGraph
    count: Optional[int]  # None when infinite
    periods: list  # per quotient component: generator of its voltage subgroup (0 = trivial)


def _voltage_count(W: WhiteheadGraph):
    """Components of the Z-cover of a voltage graph with integer labels."""
    from math import gcd

    adj = {x: [] for x in W.vertices}
    for e in W.edges:
        sh = e.label or 0
        adj[e.u].append((e.v, sh))
        adj[e.v].append((e.u, -sh))
    pot = {}
    periods = []
    for r in W.vertices:
        if r in pot:
            continue
        pot[r] = 0
        d = 0
        stack = [r]
        while stack:
            u = stack.pop()
            for w, sh in adj[u]:
                if w not in pot:
                    pot[w] = pot[u] + sh
                    stack.append(w)
                else:
                    d = gcd(d, abs(pot[u] + sh - pot[w]))
        periods.append(d)
    count = None if any(d == 0 for d in periods) else sum(periods)
    return count, periods


def annular_whitehead(T: GrushkoTree, lines, a, budget=None) -> AnnularReport:
    """Wh_T(L, T_a) as a voltage graph over <a> and its number of components."""
    core = cyclic_loop(T, root(a) if isinstance(a, NormalWord) else a)
    n = len(core)
    lines = as_lines(lines)
    nodes = list(range(n))
    qv = {p: T.t(core[p][0]) for p in nodes}
    removed = {p: {} for p in nodes}
    for p in nodes:
        nxt = (p + 1) % n
        dep = (core[nxt][0], core[p][1])
        removed[p][dep] = ("move", nxt, (-core[nxt][0], None), 1 if p == n - 1 else 0)
        removed[nxt][(-core[nxt][0], None)] = ("move", p, dep, -1 if p == n - 1 else 0)
    eng = _XEngine(T, lines, nodes, qv, removed, budget)
    cores = lines.cores(T)
    pr = T.presentation
    names = {}
    vertices = []
    for p in nodes:
        for v in eng.local_vertices(p):
            vertices.append(v)
            if v[0] == "hat":
                names[v] = f"vhat@{p}"
            else:
                _, _, h, s = v
                names[v] = f"{_prefix(s, pr)}Y{T.edge_name(h)}{'+' if h > 0 else '-'}@{p}"
    edges = []
    for p in nodes:
        edges.extend(eng.local_edges(p))
    edges.extend(eng.traced_edges(lambda j: n + len(cores[j]) + 2))
    edges = [e for e in edges if not (e.u == e.v and e.u[0] == "hat" and not e.label)]
    W = WhiteheadGraph(vertices, edges, names, ("axis", core), None, None, pr, "annular",
                       {"reports": eng.reports})
    _edge_sort(W)
    count, periods = _voltage_count(W)
    return AnnularReport(W, count, periods)


# -- edge cut sets -------------------------------------------------------------------


def edge_hat_spec(T: GrushkoTree, lines, e: int) -> SubtreeSpec:
    """The subtree e-hat: a lift of e plus the half-edges of each crossing line next to it."""
    from .errors import NoLinesCrossE

    e = abs(e)
    lines = as_lines(lines)
    q0 = ()
    q1 = ((None, e),)
    stubs = {q0: [], q1: []}
    crossings = []
    for j, core in enumerate(lines.cores(T)):
        n = len(core)
        turns = turns_of_core(core)
        for k, (ek, _) in enumerate(core):
            if abs(ek) != e:
                continue
            h1p, bp, _ = turns[(k - 1) % n]
            _, bk, h2k = turns[k]
            before = (h1p, einv(bp))
            after = (h2k, bk)
            if ek > 0:
                stubs[q0].append(before)
                stubs[q1].append(after)
            else:
                stubs[q1].append(before)
                stubs[q0].append(after)
            crossings.append((j, k))
    if not crossings:
        raise NoLinesCrossE(f"no line crosses {T.edge_name(e)}")
    out = []
    for q in (q0, q1):
        for d in sorted(set(_canon_dir(d) for d in stubs[q]), key=_node_key):
            out.append((q, d))
    return SubtreeSpec((q0, q1), tuple(out), None, T.o(e))


@dataclass
class EdgeCutReport:
    count: int
    graph: WhiteheadGraph
    crossing: list  # edges of the graph that belong to lines through e
    reconnects: bool  # adding back any one crossing edge joins everything


def edge_cut_components(T: GrushkoTree, lines, e: int, budget=None) -> EdgeCutReport:
    X = edge_hat_spec(T, lines, e)
    W = subtree_whitehead(T, lines, X, budget)
    q0, q1 = X.vertices
    through = [x for x in W.edges if q0 in _info(x, "path") and q1 in _info(x, "path")]
    rest = [x for x in W.edges if x not in through]
    G = nx.MultiGraph()
    G.add_nodes_from(W.vertices)
    G.add_edges_from((x.u, x.v) for x in rest)
    count = nx.number_connected_components(G)
    ok = True
    for x in through:
        H = G.copy()
        H.add_edge(x.u, x.v)
        ok = ok and nx.number_connected_components(H) == 1
    return EdgeCutReport(count, W, through, ok)


# -- reducedness and peripheral cut points ----------------------------------------------


def is_whitehead_reduced(T: GrushkoTree, lines) -> bool:
    """No admissible cut at any vertex and every edge crossed."""
    lines = as_lines(lines)
    if crossed_edges(T, lines) != set(T.edges):
        return False
    for v in T.vertices:
        W = vertex_whitehead(T, lines, v)
        if find_admissible_cut(W) is not None:
            return False
    return True


def peripheral_cut_points(T: GrushkoTree, lines, check: bool = True) -> list:
    """Labeled vertices whose Whitehead graph is disconnected or has small monodromy."""
    from .errors import NotReduced

    if check and not is_whitehead_reduced(T, lines):
        raise NotReduced("tree is not Whitehead reduced for these lines")
    out = []
    for v in T.vertices:
        if T.labels[v] is None:
            continue
        W = vertex_whitehead(T, lines, v)
        if not W.is_connected() or not monodromy(W).equals_whole_factor:
            out.append(v)
    return out
