import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import ex41
from grushko.errors import InvalidPresentation, ParseError, UnknownGenerator
from grushko.words import (
    ABELIAN,
    FREE,
    FactorElement,
    FactorSpec,
    FreeProductPresentation,
    NormalWord,
    complexity,
    cyclically_reduce,
    factor_log,
    factor_subgroup,
    invert,
    is_peripheral,
    multiply,
    normalize,
    parse_word,
    root,
)


def w(text, p=None):
    return parse_word(text, p or ex41())


def test_free_cancellation():
    assert str(w("b a a^-1 c")) == "b c"


def test_same_factor_merge():
    assert str(w("a^3 a")) == "a^4"


def test_full_cancellation_canonical_names():
    assert w("x1 a1.1 x1^-1 x1 a1.1^-1 x1^-1").is_identity()


def test_multiply_and_invert():
    assert multiply(w("b a"), w("a^-1 c")) == w("b c")
    assert str(invert(w("b a c"))) == "c^-1 a^-1 b^-1"
    assert multiply(w("1"), w("b a")) == w("b a")


def test_parentheses_and_powers():
    p = FreeProductPresentation((), 3, (("a", "x1"), ("b", "x2"), ("c", "x3")))
    assert parse_word("(a^2 b^2)^2 c^2", p) == parse_word("a^2 b^2 a^2 b^2 c^2", p)


def test_cyclically_reduce_examples():
    conj, core = cyclically_reduce(w("b a b^-1"))
    assert (conj, core) == (w("b"), w("a"))
    g = w("b a c b^-1 a^3 c^-1")
    assert cyclically_reduce(g) == (w("1"), g)
    h = w("c b c^-1 b^-1")
    assert cyclically_reduce(h) == (w("1"), h)


def test_is_peripheral():
    assert is_peripheral(w("a^5")) == 0
    assert is_peripheral(w("b a b^-1")) == 0
    assert is_peripheral(w("b a c b^-1 a^3 c^-1")) is None
    assert is_peripheral(w("b")) is None


def test_complexity_values():
    assert complexity(ex41()) == (5, False)
    assert complexity(FreeProductPresentation((), 1)) == (0, True)
    two = FreeProductPresentation((FactorSpec(FREE, 1), FactorSpec(FREE, 1)), 0)
    assert complexity(two) == (1, True)


def test_factor_subgroup_examples():
    p = ex41()
    a4 = FactorElement.gen(0, p.factors[0], 0, 4)
    rep = factor_subgroup([a4])
    assert not rep.is_trivial and not rep.equals_whole_factor
    assert factor_subgroup([], 0, p.factors[0]).is_trivial
    spec = FactorSpec(FREE, 2)
    gens = [FactorElement.gen(0, spec, 0), FactorElement.gen(0, spec, 1)]
    assert factor_subgroup(gens).equals_whole_factor


def test_abelian_subgroup_index():
    spec = FactorSpec(ABELIAN, 2)
    rep = factor_subgroup([FactorElement.gen(0, spec, 0, 2), FactorElement.gen(0, spec, 1, 3)])
    assert rep.index == 6


def test_errors():
    with pytest.raises(UnknownGenerator):
        w("q")
    with pytest.raises(ParseError):
        w("a^")
    with pytest.raises(InvalidPresentation):
        FreeProductPresentation((), 0)


def test_root_and_log():
    assert root(w("b c b c")) == w("b c")
    spec = FactorSpec(FREE, 2)
    g = FactorElement.gen(0, spec, 0) * FactorElement.gen(0, spec, 1)
    assert factor_log(g ** -3, g) == -3
    assert factor_log(FactorElement.gen(0, spec, 0), g) is None


# -- properties -------------------------------------------------------------------

LETTERS = ["a", "a^-1", "b", "b^-1", "c", "c^-1", "a^2", "a^-3"]
words = st.lists(st.sampled_from(LETTERS), max_size=12).map(lambda xs: " ".join(xs) or "1")


@settings(max_examples=200, deadline=None)
@given(words, words, words)
def test_multiplication_is_associative(x, y, z):
    a, b, c = w(x), w(y), w(z)
    assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))


@settings(max_examples=200, deadline=None)
@given(words)
def test_inverse_law(x):
    a = w(x)
    assert multiply(a, invert(a)).is_identity()
    assert invert(invert(a)) == a


@settings(max_examples=200, deadline=None)
@given(words)
def test_cyclic_reduction_reassembles(x):
    a = w(x)
    assume(not a.is_identity())
    conj, core = cyclically_reduce(a)
    assert multiply(multiply(conj, core), invert(conj)) == a


@settings(max_examples=200, deadline=None)
@given(words)
def test_parse_of_str_is_identity(x):
    a = w(x)
    assert w(str(a)) == a
