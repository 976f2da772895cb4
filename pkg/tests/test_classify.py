import json

import pytest

from conftest import ex9, free_group
from oracles import annular_count, cyclic_words, is_simple_classical, to_text
from grushko.classify import (
    axis_key,
    certificate_from_json,
    certify_projection,
    check_certificate,
    decomposition_connected,
    extract_short_element,
    find_short_cut_pair,
    is_quadratic,
    is_simple,
    verdict_json,
)
from grushko.errors import (
    EllipticElement,
    MissingSuppliedSplitting,
    NotACutPair,
    SimpleElement,
    ValidationFailure,
)
from grushko.harness import random_tree_in_OL
from grushko.tree import comb_length, standard_rose
from grushko.whitehead import LineCollection, vertex_whitehead, whitehead_reduce
from grushko.words import parse_word

G41 = "b a c b^-1 a^3 c^-1"


def test_example_word_not_simple(p41):
    g = parse_word(G41, p41)
    v = is_simple(p41, g)
    assert not v.is_simple
    assert v.revalidate(g)


def test_generator_is_simple(p41):
    v = is_simple(p41, p41.generator("b"))
    assert v.is_simple
    assert v.revalidate(p41.generator("b"))
    assert is_simple(p41, parse_word("b^2", p41)).is_simple


def test_peripheral_rejected(p41):
    with pytest.raises(EllipticElement):
        is_simple(p41, p41.generator("a"))


def test_example_word_quadratic(p41):
    q = is_quadratic(p41, parse_word(G41, p41))
    assert q.is_quadratic
    assert q.crossings == {1: 2, 2: 2}


def test_two_factor_word_quadratic():
    p = ex9()
    q = is_quadratic(p, parse_word("d^-1 a b c d c^-1 e", p))
    assert q.is_quadratic
    assert set(q.crossings.values()) == {2}
    assert all(q.circles.values())


def test_quadratic_with_split_vertex_graph(p41):
    # a^2 (c^-1 b c)^2 c^-1 a^-2 c bounds a one-crosscap surface glued to a^2 twice;
    # the quotient graph at the labeled vertex is a triangle plus a loop
    g = parse_word("a^2 c^-1 b^2 a^-2 c", p41)
    q = is_quadratic(p41, g)
    assert q.is_quadratic
    W = vertex_whitehead(q.tree, g, q.tree.vertices[0])
    assert not W.is_connected()
    assert W.is_cycle_union()


def test_not_quadratic(f2):
    assert not is_quadratic(f2, parse_word("a^2 b^3", f2)).is_quadratic


def test_quadratic_needs_non_simple(p41):
    with pytest.raises(SimpleElement):
        is_quadratic(p41, p41.generator("b"))


@pytest.mark.parametrize("N, maxlen", [(2, 5), (3, 4)])
def test_simplicity_matches_classical_descent(N, maxlen):
    al = list("abc"[:N])
    q = free_group(N)
    for n in range(1, maxlen + 1):
        for ws in cyclic_words(al, n):
            w = to_text(ws)
            assert is_simple(q, parse_word(w, q)).is_simple == is_simple_classical(ws, al), w


def test_decomposition_connected(f2):
    conn = lambda *ws: decomposition_connected(f2, [parse_word(w, f2) for w in ws]).connected
    assert conn("a b a^-1 b^-1")
    assert conn("a^2 b^2")
    assert not conn("a", "b")
    assert not conn("a", "a b a^-1")


G2 = "a^2 b^2 a^2 b^2 c^2"


def test_axis_key_ignores_orientation_and_shift(f3):
    R = standard_rose(f3)
    assert axis_key(R, parse_word("a^2 b^2", f3)) == axis_key(R, parse_word("b^-2 a^-2 b^-2 a^-2", f3))
    assert axis_key(R, parse_word("a b", f3)) != axis_key(R, parse_word("a b^-1", f3))


def test_short_cut_pairs(f3):
    g = parse_word(G2, f3)
    cands = find_short_cut_pair(f3, g, 2)
    assert [str(c.a) for c in cands] == ["a", "b", "c", "a b", "a b^-1"]
    for c in cands:
        assert c.components >= 2
        assert c.components == annular_count(G2, str(c.a), list("abc"))
    wider = {str(c.a) for c in find_short_cut_pair(f3, g, 4)}
    assert {"a^2 b", "a b^2"} <= wider
    with pytest.raises(ValueError):
        find_short_cut_pair(f3, g, 0)


def test_extract_short_element(f3):
    g = parse_word(G2, f3)
    a, info = extract_short_element(f3, g, parse_word("a^2 b^2", f3))
    assert str(a) == "a^2 b^2"
    assert info["c"] == 3
    assert info["components"] == 3
    assert info["length"] <= info["R0"]
    a, info = extract_short_element(f3, g, parse_word("a", f3))
    assert str(a) == "a" and info["c"] == 2


def test_extract_needs_cut_pair(f3):
    g = parse_word(G2, f3)
    with pytest.raises(NotACutPair):
        extract_short_element(f3, g, parse_word("a^2 b^2 c^2", f3))


# certificates


def test_certificate_rose_to_reduced(p41):
    T0 = standard_rose(p41)
    T1 = whitehead_reduce(T0, LineCollection([parse_word(G41, p41)])).tree
    cert = certify_projection(p41, p41.generator("b"), T0, T1)
    assert cert.case == "simple"
    assert cert.length == 3
    assert cert.bound == 5
    assert [s.witness.kind for s in cert.steps] == ["compatible", "common-elliptic", "compatible"]
    assert check_certificate(cert)


def test_certificate_non_simple_needs_splittings(p41):
    T = standard_rose(p41)
    with pytest.raises(MissingSuppliedSplitting):
        certify_projection(p41, parse_word(G41, p41), T, T)


def test_certificate_json_round_trip_and_tamper(p41):
    b = p41.generator("b")
    T0 = standard_rose(p41)
    T1 = random_tree_in_OL(p41, b, 4, 7, 4)
    cert = certify_projection(p41, b, T0, T1)
    doc = json.loads(json.dumps(cert.to_json()))
    again = certificate_from_json(doc)
    assert check_certificate(again)
    assert (again.length, again.bound) == (cert.length, cert.bound)
    assert cert.bound == 2 * cert.L + 3
    assert cert.L >= max(comb_length(T0, b), comb_length(T1, b))
    doc["witness"]["steps"][1]["g"] = "a"
    with pytest.raises(ValidationFailure):
        check_certificate(certificate_from_json(doc))


@pytest.mark.parametrize("seed", range(10))
def test_certificates_on_random_trees(p41, seed):
    b = p41.generator("b")
    T0 = random_tree_in_OL(p41, b, 4, seed, 4)
    T1 = random_tree_in_OL(p41, b, 4, 1000 + seed, 4)
    cert = certify_projection(p41, b, T0, T1)
    assert check_certificate(cert)
    assert cert.length <= cert.bound


def test_verdict_json():
    doc = json.loads(verdict_json("simple", {"x": 1}, moves=2))
    assert doc == {"verdict": "simple", "witness": {"x": 1}, "moves": 2}
