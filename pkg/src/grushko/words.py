"""Normal forms and arithmetic in G = A_1 * ... * A_k * F_N.

Peripheral factors are finitely generated free or free abelian groups.
Generators have canonical names ``a<i>.<j>`` (factor i, generator j) and
``x<m>`` (free generator m), all 1-based; a presentation may also declare
aliases such as ``a`` for ``a1.1``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .errors import (
    IdentityWord,
    InvalidPresentation,
    MixedFactors,
    ParseError,
    PresentationMismatch,
    UnknownGenerator,
)

FREE = "free"
ABELIAN = "abelian"

# returned by is_peripheral for the identity
PERIPHERAL_TRIVIAL = -1

_SPORADIC = {(0, 0), (1, 0), (0, 1), (2, 0), (1, 1)}


@dataclass(frozen=True)
class FactorSpec:
    kind: str
    rank: int

    def __post_init__(self):
        if self.kind not in (FREE, ABELIAN):
            raise InvalidPresentation(f"unknown factor kind {self.kind!r}")
        if self.rank < 1:
            raise InvalidPresentation("factor rank must be positive")


@dataclass(frozen=True)
class FreeProductPresentation:
    factors: tuple
    free_rank: int
    aliases: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "aliases", tuple(sorted(self.aliases)))
        if self.free_rank < 0:
            raise InvalidPresentation("free rank must be non-negative")
        if not self.factors and self.free_rank == 0:
            raise InvalidPresentation("trivial group")
        canon = {name for name, _ in self.canonical_generators()}
        seen = set()
        for alias, target in self.aliases:
            if target not in canon:
                raise InvalidPresentation(f"alias {alias} -> unknown {target}")
            if alias in canon or alias in seen:
                raise InvalidPresentation(f"duplicate generator name {alias}")
            seen.add(alias)

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def N(self) -> int:
        return self.free_rank

    @property
    def xi(self) -> int:
        return 2 * self.k + 3 * self.N - 3

    @property
    def sporadic(self) -> bool:
        return (self.k, self.N) in _SPORADIC

    def canonical_generators(self):
        """List of (name, ref) in canonical order; ref is ('a', i, j) or ('x', m)."""
        out = []
        for i, spec in enumerate(self.factors):
            for j in range(spec.rank):
                out.append((f"a{i + 1}.{j + 1}", ("a", i, j)))
        for m in range(self.free_rank):
            out.append((f"x{m + 1}", ("x", m)))
        return out

    def lookup(self, name: str):
        table = _name_table(self)
        try:
            return table[name]
        except KeyError:
            raise UnknownGenerator(name) from None

    def display(self, ref) -> str:
        return _display_table(self)[ref]

    def generator(self, name: str) -> "NormalWord":
        return normalize([(name, 1)], self)

    def generators(self) -> list:
        return [NormalWord(self, (_ref_syllable(self, ref, 1),))
                for _, ref in self.canonical_generators()]

    def generator_names(self) -> list:
        return [self.display(ref) for _, ref in self.canonical_generators()]

    def identity(self) -> "NormalWord":
        return NormalWord(self, ())


_TABLES: dict = {}


def _name_table(p):
    key = (p, "names")
    if key not in _TABLES:
        table = {name: ref for name, ref in p.canonical_generators()}
        for alias, target in p.aliases:
            table[alias] = table[target]
        _TABLES[key] = table
    return _TABLES[key]


def _display_table(p):
    key = (p, "display")
    if key not in _TABLES:
        canon = dict(p.canonical_generators())
        table = {ref: name for name, ref in canon.items()}
        for alias, target in p.aliases:
            table[canon[target]] = alias
        _TABLES[key] = table
    return _TABLES[key]


def complexity(p: FreeProductPresentation):
    return p.xi, p.sporadic


def _free_reduce(letters: Iterable[int]) -> tuple:
    out = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


@dataclass(frozen=True, order=True)
class FactorElement:
    """Element of a peripheral factor.

    Free kind: payload is a freely reduced tuple of signed 1-based letters.
    Abelian kind: payload is the exponent vector.
    """

    factor: int
    kind: str = field(compare=True)
    rank: int = field(compare=True)
    payload: tuple = ()

    @classmethod
    def identity(cls, factor: int, spec: FactorSpec) -> "FactorElement":
        payload = () if spec.kind == FREE else (0,) * spec.rank
        return cls(factor, spec.kind, spec.rank, payload)

    @classmethod
    def gen(cls, factor: int, spec: FactorSpec, j: int, e: int = 1) -> "FactorElement":
        if spec.kind == FREE:
            letter = j + 1 if e > 0 else -(j + 1)
            payload = (letter,) * abs(e)
        else:
            payload = tuple(e if t == j else 0 for t in range(spec.rank))
        return cls(factor, spec.kind, spec.rank, payload)

    def is_trivial(self) -> bool:
        if self.kind == FREE:
            return not self.payload
        return not any(self.payload)

    def _check(self, other):
        if other.factor != self.factor:
            raise MixedFactors(f"factors {self.factor} and {other.factor}")

    def __mul__(self, other: "FactorElement") -> "FactorElement":
        self._check(other)
        if self.kind == FREE:
            payload = _free_reduce(self.payload + other.payload)
        else:
            payload = tuple(x + y for x, y in zip(self.payload, other.payload))
        return FactorElement(self.factor, self.kind, self.rank, payload)

    def inverse(self) -> "FactorElement":
        if self.kind == FREE:
            payload = tuple(-x for x in reversed(self.payload))
        else:
            payload = tuple(-x for x in self.payload)
        return FactorElement(self.factor, self.kind, self.rank, payload)

    def __pow__(self, n: int) -> "FactorElement":
        base = self if n >= 0 else self.inverse()
        out = FactorElement(self.factor, self.kind, self.rank,
                            () if self.kind == FREE else (0,) * self.rank)
        for _ in range(abs(n)):
            out = out * base
        return out

    def sort_key(self):
        if self.kind == FREE:
            return (self.factor, len(self.payload), tuple(_letter_key(x) for x in self.payload))
        return (self.factor, sum(abs(x) for x in self.payload), self.payload)

    def tokens(self, p: Optional[FreeProductPresentation] = None) -> list:
        def name(j):
            ref = ("a", self.factor, j)
            return p.display(ref) if p is not None else f"a{self.factor + 1}.{j + 1}"

        out = []
        if self.kind == FREE:
            i = 0
            while i < len(self.payload):
                x = self.payload[i]
                n = 1
                while i + n < len(self.payload) and self.payload[i + n] == x:
                    n += 1
                out.append(_token(name(abs(x) - 1), n if x > 0 else -n))
                i += n
        else:
            for j, e in enumerate(self.payload):
                if e:
                    out.append(_token(name(j), e))
        return out

    def format(self, p: Optional[FreeProductPresentation] = None) -> str:
        return " ".join(self.tokens(p)) or "1"

    def __str__(self):
        return self.format()


def _letter_key(x):
    return (abs(x), x < 0)


def _token(name, e):
    return name if e == 1 else f"{name}^{e}"


@dataclass(frozen=True, order=True)
class FreePower:
    m: int
    t: int


Syllable = Union[FactorElement, FreePower]


def _syllable_key(s: Syllable):
    if isinstance(s, FactorElement):
        return (0,) + s.sort_key()
    return (1, s.m, abs(s.t), s.t < 0)


def _mergeable(s: Syllable, t: Syllable) -> bool:
    if isinstance(s, FactorElement):
        return isinstance(t, FactorElement) and s.factor == t.factor
    return isinstance(t, FreePower) and s.m == t.m


def _merge(s: Syllable, t: Syllable) -> Optional[Syllable]:
    if isinstance(s, FactorElement):
        r = s * t
        return None if r.is_trivial() else r
    e = s.t + t.t
    return FreePower(s.m, e) if e else None


def _inv_syllable(s: Syllable) -> Syllable:
    if isinstance(s, FactorElement):
        return s.inverse()
    return FreePower(s.m, -s.t)


def _push(out: list, s: Syllable):
    if out and _mergeable(out[-1], s):
        r = _merge(out.pop(), s)
        if r is not None:
            out.append(r)
    else:
        out.append(s)


@dataclass(frozen=True, repr=False)
class NormalWord:
    """Element of G in free-product normal form.  Identity is ``()``."""

    presentation: FreeProductPresentation = field(compare=False, repr=False)
    syllables: tuple = ()

    def is_identity(self) -> bool:
        return not self.syllables

    def __len__(self):
        return len(self.syllables)

    def __mul__(self, other: "NormalWord") -> "NormalWord":
        return multiply(self, other)

    def inverse(self) -> "NormalWord":
        return invert(self)

    def __pow__(self, n: int) -> "NormalWord":
        base = self if n >= 0 else invert(self)
        out = []
        for _ in range(abs(n)):
            for s in base.syllables:
                _push(out, s)
        return NormalWord(self.presentation, tuple(out))

    def tokens(self) -> list:
        p = self.presentation
        out = []
        for s in self.syllables:
            if isinstance(s, FactorElement):
                out.extend(s.tokens(p))
            else:
                out.append(_token(p.display(("x", s.m)), s.t))
        return out

    def letter_length(self) -> int:
        n = 0
        for s in self.syllables:
            if isinstance(s, FreePower):
                n += abs(s.t)
            elif s.kind == FREE:
                n += len(s.payload)
            else:
                n += sum(abs(x) for x in s.payload)
        return n

    def sort_key(self):
        return (len(self.syllables), tuple(_syllable_key(s) for s in self.syllables))

    def __str__(self):
        return " ".join(self.tokens()) or "1"

    def __repr__(self):
        return f"NormalWord({self})"


def _ref_syllable(p, ref, e) -> Syllable:
    if ref[0] == "x":
        return FreePower(ref[1], e)
    _, i, j = ref
    return FactorElement.gen(i, p.factors[i], j, e)


def from_syllables(p: FreeProductPresentation, syllables: Iterable[Syllable]) -> NormalWord:
    out: list = []
    for s in syllables:
        if isinstance(s, FactorElement) and s.is_trivial():
            continue
        _push(out, s)
    return NormalWord(p, tuple(out))


def factor_word(p: FreeProductPresentation, a: Optional[FactorElement]) -> NormalWord:
    if a is None or a.is_trivial():
        return NormalWord(p, ())
    return NormalWord(p, (a,))


def normalize(raw: Union[str, Sequence], p: FreeProductPresentation) -> NormalWord:
    """Normal form of a raw word: a string or a sequence of (name, exponent)."""
    if isinstance(raw, str):
        return parse_word(raw, p)
    out: list = []
    for item in raw:
        if isinstance(item, str):
            name, e = item, 1
        else:
            name, e = item
        if e == 0:
            continue
        s = _ref_syllable(p, p.lookup(name), e)
        _push(out, s)
    return NormalWord(p, tuple(out))


_TOKEN = re.compile(r"\s*(?:(\()|(\))|([A-Za-z_][A-Za-z0-9_.]*)|(\^\s*[-+]?\d+)|(1(?![0-9])))")


def parse_word(text: str, p: FreeProductPresentation) -> NormalWord:
    """Parse ``name``, ``name^e`` tokens, with parentheses allowed for grouping."""
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"cannot parse word near {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.group(1):
            toks.append("(")
        elif m.group(2):
            toks.append(")")
        elif m.group(3):
            toks.append(("name", m.group(3)))
        elif m.group(4):
            toks.append(("exp", int(m.group(4)[1:].strip())))
        else:
            toks.append(("one",))

    def expr(i):
        acc = NormalWord(p, ())
        while i < len(toks) and toks[i] != ")":
            if toks[i] == "(":
                val, i = expr(i + 1)
                if i >= len(toks) or toks[i] != ")":
                    raise ParseError("unbalanced parentheses")
                i += 1
            elif toks[i][0] == "name":
                val = normalize([(toks[i][1], 1)], p)
                i += 1
            elif toks[i][0] == "one":
                val = NormalWord(p, ())
                i += 1
            else:
                raise ParseError("exponent without base")
            if i < len(toks) and toks[i] != "(" and toks[i] != ")" and toks[i][0] == "exp":
                val = val ** toks[i][1]
                i += 1
            acc = multiply(acc, val)
        return acc, i

    w, i = expr(0)
    if i != len(toks):
        raise ParseError("unbalanced parentheses")
    return w


def multiply(u: NormalWord, v: NormalWord) -> NormalWord:
    if u.presentation != v.presentation:
        raise PresentationMismatch("words over different presentations")
    out = list(u.syllables)
    for s in v.syllables:
        _push(out, s)
    return NormalWord(u.presentation, tuple(out))


def invert(u: NormalWord) -> NormalWord:
    return NormalWord(u.presentation, tuple(_inv_syllable(s) for s in reversed(u.syllables)))


def conjugate(u: NormalWord, c: NormalWord) -> NormalWord:
    """c u c^-1."""
    return multiply(multiply(c, u), invert(c))


def cyclically_reduce(w: NormalWord):
    """Return (c, core) with w = c core c^-1 and core cyclically reduced."""
    if w.is_identity():
        raise IdentityWord("cannot cyclically reduce the identity")
    p = w.presentation
    conj = NormalWord(p, ())
    core = list(w.syllables)
    while len(core) >= 2 and _mergeable(core[0], core[-1]):
        last = core.pop()
        conj = multiply(conj, NormalWord(p, (_inv_syllable(last),)))
        rest = core
        core = []
        _push(core, last)
        for s in rest:
            _push(core, s)
    return conj, NormalWord(p, tuple(core))


def is_peripheral(w: NormalWord) -> Optional[int]:
    if w.is_identity():
        return PERIPHERAL_TRIVIAL
    _, core = cyclically_reduce(w)
    if len(core.syllables) == 1 and isinstance(core.syllables[0], FactorElement):
        return core.syllables[0].factor
    return None


def root(w: NormalWord) -> NormalWord:
    """Cyclically reduced core of the indivisible root of w (up to conjugacy)."""
    _, core = cyclically_reduce(w)
    syl = core.syllables
    n = len(syl)
    if n == 1 and isinstance(syl[0], FreePower):
        return NormalWord(w.presentation, (FreePower(syl[0].m, 1 if syl[0].t > 0 else -1),))
    for d in range(1, n):
        if n % d == 0 and syl[:d] * (n // d) == syl:
            return NormalWord(w.presentation, syl[:d])
    return core


# -- subgroups of a factor ---------------------------------------------------


class _FoldedGraph:
    """Stallings graph of a subgroup of a free group, based at vertex 0."""

    def __init__(self, words: Iterable[tuple]):
        self.parent = {0: 0}
        self.out: dict = {0: {}}
        count = 1
        pending = []
        for w in words:
            if not w:
                continue
            prev = 0
            for idx, x in enumerate(w):
                if idx == len(w) - 1:
                    nxt = 0
                else:
                    nxt = count
                    count += 1
                    self.parent[nxt] = nxt
                    self.out[nxt] = {}
                pending.append((prev, x, nxt))
                prev = nxt
        self._fold(pending)

    def find(self, v):
        while self.parent[v] != v:
            self.parent[v] = self.parent[self.parent[v]]
            v = self.parent[v]
        return v

    def _fold(self, pending):
        while pending:
            u, x, w = pending.pop()
            u, w = self.find(u), self.find(w)
            cur = self.out[u].get(x)
            if cur is not None:
                cur = self.find(cur)
                if cur == w:
                    continue
                # identify cur and w, keeping the smaller label (base stays 0)
                a, b = sorted((cur, w))
                self.parent[b] = a
                for y, t in self.out.pop(b).items():
                    pending.append((a, y, t))
                continue
            self.out[u][x] = w
            pending.append((w, -x, u))

    def vertices(self):
        return sorted(v for v in self.out if self.find(v) == v)

    def edges(self):
        es = set()
        for u in self.vertices():
            for x, w in self.out[u].items():
                if x > 0:
                    es.add((u, x, self.find(w)))
        return sorted(es)

    def read(self, w: tuple):
        v = 0
        for x in w:
            t = self.out[v].get(x)
            if t is None:
                return None
            v = self.find(t)
        return v


@dataclass
class FactorSubgroupReport:
    factor: Optional[int]
    generators: tuple
    is_trivial: bool
    equals_whole_factor: bool
    rank: int
    index: Optional[int]  # None when the index is infinite
    kind: Optional[str] = None
    basis: tuple = ()
    _graph: object = field(default=None, repr=False, compare=False)

    def contains(self, a: Optional[FactorElement]) -> bool:
        if a is None or a.is_trivial():
            return True
        if self.factor is None or a.factor != self.factor:
            return False
        if self.is_trivial:
            return False
        if self.kind == FREE:
            return self._graph.read(a.payload) == 0
        return _hnf(list(self.basis) + [a.payload], a.rank) == self.basis

    def cyclic_generator(self) -> Optional[FactorElement]:
        """Generator of the subgroup when the factor is infinite cyclic."""
        if self.kind is None or not self.generators:
            return None
        g0 = self.generators[0]
        if g0.rank != 1:
            return None
        if self.is_trivial:
            return FactorElement.identity(g0.factor, FactorSpec(g0.kind, 1))
        if self.kind == ABELIAN:
            return FactorElement(g0.factor, ABELIAN, 1, self.basis[0])
        d = len(self._graph.vertices())
        return FactorElement(g0.factor, FREE, 1, (1,) * d)

    def generator_if_cyclic(self) -> Optional[FactorElement]:
        """A generator when the subgroup is infinite cyclic, else None."""
        if self.is_trivial or self.rank != 1:
            return None
        g0 = self.generators[0]
        if self.kind == ABELIAN:
            return FactorElement(g0.factor, ABELIAN, g0.rank, self.basis[0])
        graph = self._graph
        # spanning tree from the base; the single cotree edge closes the cycle
        path = {0: ()}
        queue = [0]
        tree = set()
        while queue:
            u = queue.pop(0)
            for x, w in sorted(graph.out[u].items()):
                w = graph.find(w)
                if w not in path:
                    path[w] = _free_reduce(path[u] + (x,))
                    tree.add((u, x, w))
                    tree.add((w, -x, u))
                    queue.append(w)
        for u, x, w in graph.edges():
            if (u, x, w) not in tree:
                word = path[u] + (x,) + tuple(-y for y in reversed(path[w]))
                return FactorElement(g0.factor, FREE, g0.rank, _free_reduce(word))
        return None

    def describe(self, p: Optional[FreeProductPresentation] = None) -> str:
        if self.is_trivial:
            return "1"
        if self.equals_whole_factor:
            return f"A{self.factor + 1}"
        if self.kind == ABELIAN:
            gens = [FactorElement(self.factor, ABELIAN, len(b), b) for b in self.basis]
        else:
            gens = [g for g in self.generators if not g.is_trivial()]
            c = self.cyclic_generator()
            if c is not None:
                gens = [c]
        return "<" + ", ".join(g.format(p) for g in gens) + ">"


def _hnf(vectors, rank):
    """Column Hermite normal form basis of the lattice spanned by vectors."""
    from sympy import Matrix
    from sympy.matrices.normalforms import hermite_normal_form

    vecs = [tuple(v) for v in vectors if any(v)]
    if not vecs:
        return ()
    H = hermite_normal_form(Matrix(vecs).T)
    return tuple(tuple(int(x) for x in H.col(j)) for j in range(H.cols))


def factor_subgroup(gens: Sequence[FactorElement], factor: Optional[int] = None,
                    spec: Optional[FactorSpec] = None) -> FactorSubgroupReport:
    gens = tuple(gens)
    factors = {g.factor for g in gens}
    if len(factors) > 1:
        raise MixedFactors(f"generators from factors {sorted(factors)}")
    if factors:
        factor = factors.pop()
        kind, rank = gens[0].kind, gens[0].rank
    elif spec is not None:
        kind, rank = spec.kind, spec.rank
    else:
        return FactorSubgroupReport(factor, gens, True, False, 0, None)
    trivial = all(g.is_trivial() for g in gens)
    if kind == FREE:
        graph = _FoldedGraph(g.payload for g in gens)
        verts = graph.vertices()
        edges = graph.edges()
        sub_rank = len(edges) - len(verts) + 1 if not trivial else 0
        whole = all(graph.read((j,)) == 0 for j in range(1, rank + 1))
        complete = all(len(graph.out[v]) == 2 * rank for v in verts)
        index = len(verts) if complete and not trivial else None
        if trivial and rank == 0:
            index = 1
        return FactorSubgroupReport(factor, gens, trivial, whole, sub_rank, index,
                                    kind, (), graph)
    basis = _hnf([g.payload for g in gens], rank)
    index = None
    if len(basis) == rank:
        det = 1
        for j in range(rank):
            det *= basis[j][j]
        index = abs(det)
    return FactorSubgroupReport(factor, gens, trivial, index == 1, len(basis), index,
                                kind, basis)


def factor_log(z: Optional[FactorElement], g: FactorElement) -> Optional[int]:
    """Return n with z = g^n, or None.  g must be nontrivial."""
    if z is None or z.is_trivial():
        return 0
    if z.factor != g.factor:
        return None
    if g.kind == ABELIAN:
        n = None
        for a, b in zip(z.payload, g.payload):
            if b == 0:
                if a != 0:
                    return None
                continue
            if a % b:
                return None
            if n is None:
                n = a // b
            elif n != a // b:
                return None
        return n
    # g = u c u^-1 with c cyclically reduced, so g^n = u c^n u^-1 without cancellation
    w = g.payload
    k = 0
    while k < len(w) - 1 - k and w[k] == -w[len(w) - 1 - k]:
        k += 1
    u, c = w[:k], w[k:len(w) - k]
    zp = z.payload
    uinv = tuple(-x for x in reversed(u))
    if len(zp) < 2 * k or zp[:k] != u or zp[len(zp) - k:] != uinv:
        return None
    mid = zp[k:len(zp) - k]
    if len(mid) % len(c):
        return None
    n = len(mid) // len(c)
    if mid == c * n:
        return n
    cinv = tuple(-x for x in reversed(c))
    if mid == cinv * n:
        return -n
    return None


def word_log(x: NormalWord, c: NormalWord) -> Optional[int]:
    """Return n with x = c^n, or None.  c must be nontrivial."""
    if x.is_identity():
        return 0
    bound = x.letter_length() + 1
    for n in range(1, bound + 1):
        for m in (n, -n):
            if c ** m == x:
                return m
    return None
