import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from grushko.words import ABELIAN, FREE, FactorElement, FactorSpec, FreeProductPresentation

DATA = os.path.join(os.path.dirname(__file__), "data")


def ex41():
    return FreeProductPresentation((FactorSpec(FREE, 1),), 2, (("a", "a1.1"), ("b", "x1"), ("c", "x2")))


def free_group(n):
    names = "abcde"[:n]
    return FreeProductPresentation((), n, tuple((x, f"x{i + 1}") for i, x in enumerate(names)))


def ex9():
    # factors <a,b> free of rank two and <e>; free letters c, d
    return FreeProductPresentation(
        (FactorSpec(FREE, 2), FactorSpec(FREE, 1)), 2,
        (("a", "a1.1"), ("b", "a1.2"), ("e", "a2.1"), ("c", "x1"), ("d", "x2")))


def apow(p, n, factor=0, j=0):
    return FactorElement.gen(factor, p.factors[factor], j, n) if n else None


@pytest.fixture
def p41():
    return ex41()


@pytest.fixture
def f2():
    return free_group(2)


@pytest.fixture
def f3():
    return free_group(3)


@pytest.fixture
def data_dir():
    return DATA


# (number, title, passed, seconds) rows filled in by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, dt in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title} ({dt:.2f}s)")
