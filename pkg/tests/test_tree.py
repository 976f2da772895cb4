import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import ex41, free_group
from grushko.errors import EllipticElement, NonForestCollapse, NothingLeft, SporadicComplexity
from grushko.harness import random_tree_in_OL, random_word
from grushko.tree import (
    ZSplitting,
    as_splitting,
    axis_turns,
    check_witness,
    collapse,
    comb_length,
    compute_bounds,
    cyclic_core,
    equivalent,
    is_elliptic,
    loop_to_word,
    normalize_degree2,
    split_vertex,
    standard_rose,
    translation_length,
    unfold,
    validate_tree,
    word_loop_items,
    zf_adjacent,
)
from grushko.words import ABELIAN, FREE, FactorElement, FactorSpec, FreeProductPresentation, parse_word


def test_rose_single_factor(p41):
    T = standard_rose(p41)
    validate_tree(T)
    assert T.check_marking()
    assert T.vertices == [0]
    assert T.labels == {0: 0}
    assert len(T.edges) == 2


def test_rose_two_factors_has_spokes():
    p = FreeProductPresentation((FactorSpec(FREE, 1), FactorSpec(ABELIAN, 2)), 1)
    T = standard_rose(p)
    validate_tree(T)
    assert T.check_marking()
    assert T.labels[0] is None
    assert T.edges == {1: (0, 1), 2: (0, 2), 3: (0, 0)}


def test_rose_free_group(f2):
    T = standard_rose(f2)
    assert T.labels == {0: None}
    assert len(T.edges) == 2


def test_lengths_in_rose(p41):
    T = standard_rose(p41)
    g = parse_word("b a c b^-1 a^3 c^-1", p41)
    assert comb_length(T, g) == 4
    assert comb_length(T, p41.generator("b")) == 1
    assert comb_length(T, parse_word("b c", p41)) == 2
    with pytest.raises(EllipticElement):
        comb_length(T, p41.generator("a"))


def test_axis_turn_labels(p41):
    T = standard_rose(p41)
    g = parse_word("b a c b^-1 a^3 c^-1", p41)
    labels = sorted(str(t.label) for t in axis_turns(T, g))
    assert labels == sorted(["None", "None", "a1.1", "a1.1^3"])


def test_loop_round_trip(p41):
    T = standard_rose(p41)
    g = parse_word("b a c b^-1 a^3 c^-1", p41)
    assert loop_to_word(T, word_loop_items(T, g)) == g


def test_split_then_collapse_restores(p41):
    T = standard_rose(p41)
    g = parse_word("b a c b^-1 a^3 c^-1", p41)
    tw = {1: FactorElement.gen(0, p41.factors[0], 0, 2)}
    T3, rw, f, n = split_vertex(T, 0, {1, -1, 2}, tw)
    validate_tree(T3)
    assert T3.check_marking()
    assert rw.word(g) == word_loop_items(T3, g)
    T4, _ = collapse(T3, {f})
    assert T4.check_marking()
    assert comb_length(T4, g) == 4
    assert equivalent(T, T4)


def test_split_changes_lengths(p41):
    T = standard_rose(p41)
    g = parse_word("b a c b^-1 a^3 c^-1", p41)
    T2, _, _, _ = split_vertex(T, 0, {1, -1})
    assert comb_length(T2, p41.generator("b")) == 1
    assert comb_length(T2, g) == 8
    assert not equivalent(T, T2)


def test_collapse_of_loop_needs_flag(p41):
    T = standard_rose(p41)
    with pytest.raises(NonForestCollapse):
        collapse(T, {2})


def test_collapse_everything_rejected(p41):
    T = standard_rose(p41)
    T2, _, f, _ = split_vertex(T, 0, {1, -1})
    with pytest.raises(NothingLeft):
        collapse(T2, set(T2.edges), allow_cycles=True)


def test_collapse_to_splitting_and_ellipticity(p41):
    T = standard_rose(p41)
    g = parse_word("b a c b^-1 a^3 c^-1", p41)
    b, c, a = (p41.generator(x) for x in "bca")
    T2, _, f, _ = split_vertex(T, 0, {1, -1})
    S, _ = collapse(T2, {1, f}, allow_cycles=True)
    assert isinstance(S, ZSplitting)
    assert is_elliptic(S, b)[0]
    assert not is_elliptic(S, c)[0]
    assert not is_elliptic(as_splitting(T), b)[0]
    assert is_elliptic(T, a)[0]
    assert S.loop_to_word(S.word_loop(g)) == g
    assert translation_length(S, g) == 2


def test_unfold_and_normalize(f2):
    R = standard_rose(f2)
    w = parse_word("a^2 b", f2)
    R2, rw, Ep, n = unfold(R, 0, 1, {1, -2})
    validate_tree(R2)
    assert R2.check_marking()
    assert comb_length(R2, w) == 3
    R3, rwn = normalize_degree2(R2)
    validate_tree(R3)
    assert R3.check_marking()
    assert len(R3.edges) == 2
    assert comb_length(R3, w) == 2
    assert cyclic_core(rw.then(rwn).word(w))[1] == cyclic_core(word_loop_items(R3, w))[1]


def test_zf_adjacent_witnesses(p41):
    T = standard_rose(p41)
    T2, _, f, _ = split_vertex(T, 0, {1, -1})
    W = zf_adjacent(T2, T)
    assert W.kind == "compatible"
    assert check_witness(W, T2, T)
    S, _ = collapse(T2, {1, f}, allow_cycles=True)
    W2 = zf_adjacent(as_splitting(T2), S)
    assert W2 is not None
    assert check_witness(W2, as_splitting(T2), S)


def test_bounds_small():
    b = compute_bounds(4, 5, 2)
    assert (b.D0, b.D1, b.R0) == (11, 13, 161)
    b = compute_bounds(1, 3, 1)
    assert (b.R0, b.D2) == (7, 21)
    assert compute_bounds(2, 3).R0 == 25


def test_bounds_reject():
    with pytest.raises(SporadicComplexity):
        compute_bounds(3, 2)
    with pytest.raises(ValueError):
        compute_bounds(0, 4)


PRESENTATIONS = [ex41(), free_group(2), free_group(3),
                 FreeProductPresentation((FactorSpec(FREE, 1), FactorSpec(ABELIAN, 2)), 1)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, len(PRESENTATIONS) - 1), st.integers(0, 10 ** 6), st.integers(0, 4))
def test_random_tree_marking(pi, seed, steps):
    p = PRESENTATIONS[pi]
    rng = random.Random(seed)
    g = p.generators()[-1]
    T = random_tree_in_OL(p, g, 6, seed, steps)
    validate_tree(T)
    assert T.check_marking()
    for _ in range(5):
        w = random_word(p, rng, 8)
        assert loop_to_word(T, word_loop_items(T, w)) == w


@settings(max_examples=40, deadline=None)
@given(st.integers(0, len(PRESENTATIONS) - 1), st.integers(0, 10 ** 6))
def test_length_conjugation_invariant(pi, seed):
    p = PRESENTATIONS[pi]
    rng = random.Random(seed)
    T = random_tree_in_OL(p, p.generators()[-1], 6, seed, 3)
    w = random_word(p, rng, 6)
    u = random_word(p, rng, 4)
    if w.is_identity() or is_elliptic(T, w)[0]:
        return
    n = comb_length(T, w)
    assert comb_length(T, u * w * u.inverse()) == n
    assert comb_length(T, w * w) == 2 * n
    assert comb_length(T, w.inverse()) == n
