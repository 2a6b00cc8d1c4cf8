import random

import pytest

from kripke import make_kripke


@pytest.fixture
def rng():
    return random.Random(20141)


@pytest.fixture
def toggle():
    """s0 {} <-> s1 {a}, s1 may also stay"""
    return make_kripke(['s0', 's1'], 's0',
                       [('s0', 's1'), ('s1', 's0'), ('s1', 's1')],
                       ['a'], {'s0': [], 's1': ['a']})


@pytest.fixture
def branching():
    """s0 {} branches into two self-looping sinks: l {o} and r {o, h}"""
    return make_kripke(['s0', 'l', 'r'], 's0',
                       [('s0', 'l'), ('s0', 'r'), ('l', 'l'), ('r', 'r')],
                       ['o', 'h'], {'s0': [], 'l': ['o'], 'r': ['o', 'h']})


@pytest.fixture
def leaky():
    """The low output copies the secret chosen in the first step"""
    return make_kripke(['s0', 'h0', 'h1'], 's0',
                       [('s0', 'h0'), ('s0', 'h1'), ('h0', 'h0'), ('h1', 'h1')],
                       ['h', 'o'], {'s0': [], 'h0': [], 'h1': ['h', 'o']})


@pytest.fixture
def knowledge_model():
    """s0 {} leads into a {o, x}, b {o} or c {}, each looping forever"""
    return make_kripke(['s0', 'a', 'b', 'c'], 's0',
                       [('s0', 'a'), ('s0', 'b'), ('s0', 'c'), ('a', 'a'), ('b', 'b'), ('c', 'c')],
                       ['o', 'x'], {'s0': [], 'a': ['o', 'x'], 'b': ['o'], 'c': []})
