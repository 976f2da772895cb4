"""The ten acceptance criteria, one test each.  A summary line per criterion is
printed at the end of the run (see conftest.pytest_terminal_summary)."""

import random
import time
from contextlib import contextmanager

from conftest import ACCEPTANCE, apow, ex9, ex41, free_group
from oracles import annular_count, cyclic_words, is_simple_classical, to_text
from test_whitehead import _compare_with_window, _key, _random_decomposition, _two_vertex_specs
from grushko.classify import (
    axis_key,
    certify_projection,
    check_certificate,
    extract_short_element,
    find_short_cut_pair,
    is_quadratic,
    is_simple,
)
from grushko.errors import GrushkoError
from grushko.harness import random_tree_in_OL, random_word
from grushko.tree import comb_length, compute_bounds, standard_rose
from grushko.whitehead import (
    LineCollection,
    classify_components_minus,
    crossed_edges,
    derived_components,
    fmt_elem,
    is_whitehead_reduced,
    monodromy,
    splice,
    subtree_whitehead,
    vertex_whitehead,
    whitehead_reduce,
)
from grushko.words import FREE, ABELIAN, FactorSpec, is_peripheral, parse_word

G41 = "b a c b^-1 a^3 c^-1"


@contextmanager
def criterion(n, title, limit):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        ACCEPTANCE.append((n, title, False, time.perf_counter() - t0))
        raise
    dt = time.perf_counter() - t0
    ACCEPTANCE.append((n, title, dt < limit, dt))
    assert dt < limit, f"criterion {n} took {dt:.1f}s (limit {limit}s)"


def _ex41():
    p = ex41()
    return p, standard_rose(p), parse_word(G41, p)


def test_criterion_01_vertex_graph():
    with criterion(1, "vertex Whitehead graph is a 4-cycle with monodromy <a^4>", 1):
        p, T, g = _ex41()
        W = vertex_whitehead(T, g, 0)
        assert W.is_circle() and len(W.vertices) == 4
        assert sorted(fmt_elem(e.label, p) for e in W.edges) == ["1", "1", "a", "a^3"]
        assert monodromy(W).describe(p) == "<a^4>"


def test_criterion_02_derived_lines():
    with criterion(2, "derived graph has one quotient component and four lines", 1):
        p, T, g = _ex41()
        r = derived_components(vertex_whitehead(T, g, 0))
        assert len(r.quotient) == 1
        assert r.quotient[0].mon.describe(p) == "<a^4>"
        assert r.count == 4 and r.kinds() == {"line": 4, "finite": 0}


def test_criterion_03_two_vertex_subtree():
    with criterion(3, "six components after deletion, V_X sets and the 8-cycle", 5):
        p, T, g = _ex41()
        r = classify_components_minus(vertex_whitehead(T, g, 0), [(-1, apow(p, -1)), (1, None)])
        assert r.count == 6
        assert r.kinds() == {"line": 3, "ray": 2, "finite": 1}
        v, w, X, _, _ = _two_vertex_specs(p)
        W = subtree_whitehead(T, g, X)
        vx = {}
        for x in W.vertices:
            if x[0] != "stub":
                vx.setdefault(x[1], set()).add(W.name(x))
        assert vx[v] == {"Yc+", "vhat"}
        assert vx[w] == {"a^-3.Zb+", "a^-3.Zc+", "what"}
        assert W.is_circle() and len(W.vertices) == 8


def test_criterion_04_splicing():
    with criterion(4, "splice reproduces the 8-cycle; 100 random decompositions cohere", 30):
        p, T, g = _ex41()
        v, w, X, Z, Zp = _two_vertex_specs(p)
        WA, WB = subtree_whitehead(T, g, Z), subtree_whitehead(T, g, Zp)
        assert WA.is_circle() and len(WA.edges) == 4
        assert WB.is_circle() and len(WB.edges) == 6
        S = splice(WA, ("stub", v, 1, None), WB, ("stub", w, -1, None))
        assert S.edge_multiset() == subtree_whitehead(T, g, X).edge_multiset()
        elems = [None] + [apow(p, n) for n in (-4, -3, -2, -1, 1, 2, 3)]
        rng = random.Random(2)
        done = 0
        while done < 100:
            r = _random_decomposition(rng, T, elems)
            if r is None:
                continue
            full, SA, SB, ya, yb = r
            W = subtree_whitehead(T, g, full)
            S = splice(subtree_whitehead(T, g, SA), ya, subtree_whitehead(T, g, SB), yb)
            assert _key(W) == _key(S) and set(W.vertices) == set(S.vertices)
            done += 1


def test_criterion_05_reduction_bound():
    with criterion(5, "reduction terminates within |L| moves on 200 random instances", 120):
        pres = [ex41(), free_group(2), free_group(3), ex9()]
        rng = random.Random(5)
        done = 0
        while done < 200:
            p = pres[done % len(pres)]
            T = random_tree_in_OL(p, p.generators()[-1], 3, rng.randrange(10 ** 6), rng.randint(0, 3))
            words = [random_word(p, rng, 6) for _ in range(rng.randint(1, 2))]
            if any(w.is_identity() or is_peripheral(w) is not None for w in words):
                continue
            lines = LineCollection(words)
            if lines.length(T) > 12:
                continue
            r = whitehead_reduce(T, lines)
            assert len(r.moves) <= r.lengths[0]
            assert all(a >= b for a, b in zip(r.lengths, r.lengths[1:]))
            if r.outcome == "uncrossed":
                assert r.edge in r.tree.edges
                assert r.edge not in crossed_edges(r.tree, lines)
            else:
                assert r.outcome == "reduced"
                assert is_whitehead_reduced(r.tree, lines)
            done += 1


def test_criterion_06_classical_descent():
    with criterion(6, "simplicity agrees with classical Whitehead descent", 300):
        for N, maxlen in ((2, 6), (3, 5)):
            al = list("abc"[:N])
            q = free_group(N)
            for n in range(1, maxlen + 1):
                for ws in cyclic_words(al, n):
                    w = to_text(ws)
                    assert is_simple(q, parse_word(w, q)).is_simple == is_simple_classical(ws, al), w


def test_criterion_07_projection_certificates():
    with criterion(7, "50 certificates within 2L+3 for simple elements", 120):
        p = ex41()
        simple = [parse_word(w, p) for w in ("b", "c", "b c", "a b")]
        for s in range(50):
            g = simple[s % len(simple)]
            assert is_simple(p, g).is_simple
            L = 4
            T0 = random_tree_in_OL(p, g, L, s, 4)
            T1 = random_tree_in_OL(p, g, L, 1000 + s, 4)
            cert = certify_projection(p, g, T0, T1)
            assert check_certificate(cert)
            assert cert.L <= L
            assert cert.length <= 2 * cert.L + 3


def test_criterion_08_quadratic():
    with criterion(8, "quadraticity examples and agreement of both criteria", 120):
        p = ex41()
        assert is_quadratic(p, parse_word(G41, p)).is_quadratic
        q = ex9()
        assert is_quadratic(q, parse_word("d^-1 a b c d c^-1 e", q)).is_quadratic
        f2 = free_group(2)
        assert not is_quadratic(f2, parse_word("a^2 b^3", f2)).is_quadratic
        rng = random.Random(8)
        pres = [ex41(), f2, free_group(3)]
        done = 0
        while done < 100:
            p = pres[done % 3]
            g = random_word(p, rng, 8)
            if g.is_identity() or is_peripheral(g) is not None or is_simple(p, g).is_simple:
                continue
            v = is_quadratic(p, g)  # raises when the two criteria disagree
            assert v.is_quadratic == all(c == 2 for c in v.crossings.values())
            assert v.is_quadratic == all(v.circles.values())
            done += 1


def test_criterion_09_cut_pair_pipeline():
    with criterion(9, "cut pair along a^2 b^2 is found and a short element extracted", 120):
        q = free_group(3)
        R = standard_rose(q)
        g = parse_word("a^2 b^2 a^2 b^2 c^2", q)
        h = parse_word("a^2 b^2", q)
        cands = find_short_cut_pair(q, g, 4)
        assert axis_key(R, h) in {c.axis_key for c in cands}
        a, info = extract_short_element(q, g, h)
        L = comb_length(R, g)
        B = compute_bounds(L, q.xi, info["c"])
        assert info["R0"] == B.R0 == 2 * q.xi * info["c"] ** L + 1
        assert comb_length(R, a) <= B.R0
        assert info["c"] >= 2
        assert annular_count(str(g), str(a), list("abc")) >= info["c"]
        assert axis_key(R, a) == axis_key(R, h)


def test_criterion_10_voltage_oracle():
    with criterion(10, "voltage components agree with unrolled windows on 100 graphs", 120):
        rng = random.Random(10)
        for i in range(100):
            spec = FactorSpec(FREE, 1) if i % 2 == 0 else FactorSpec(ABELIAN, 2)
            _compare_with_window(rng, spec)
