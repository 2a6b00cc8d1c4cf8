"""
Reference evaluators for cross-checking the engines

Everything here works directly from definitions: fixpoints over the
positions of a joint lasso, brute-force quantification over bounded
lassos, and a pair-graph search for SecLTL systems.
"""
import itertools
import math
from typing import Dict, List, Optional, Sequence

import networkx as nx

from automata import LassoWord
from formula import (And, Atom, Eventually, FalseConst, Formula, Globally, Iff, Implies, Next, Not,
                     Or, Release, TrueConst, Until, WeakUntil, Exists, Forall, indexed_props,
                     split_prefix)
from kripke import KripkeStructure, Lasso, enumerate_lassos, make_kripke
from qptl import PROP_INDEX, ExistsProp, ForallProp
from secprops import MOVE, InterpretedSystem, make_interpreted


# ==========================================
# LTL OVER LASSOS
# ==========================================

def _fixpoint(step, n: int, start: bool):
    values = [start] * n
    while True:
        updated = [step(i, values) for i in range(n)]
        if updated == values:
            return values
        values = updated


def ltl_table(f: Formula, paths: Dict[str, Lasso]):
    """Truth value of f at every position of the joint lasso of paths, plus the index map"""
    stem = max(len(p.stem) for p in paths.values())
    period = math.lcm(*(len(p.loop) for p in paths.values()))
    n = stem + period

    def succ(i):
        return i + 1 if i + 1 < n else stem

    def table(g):
        if isinstance(g, Atom):
            return [g.prop in paths[g.var].valuation(i) for i in range(n)]
        if isinstance(g, TrueConst):
            return [True] * n
        if isinstance(g, FalseConst):
            return [False] * n
        if isinstance(g, Not):
            return [not x for x in table(g.body)]
        if isinstance(g, (And, Or, Implies, Iff, Until, WeakUntil, Release)):
            left, right = table(g.left), table(g.right)
            if isinstance(g, And):
                return [x and y for x, y in zip(left, right)]
            if isinstance(g, Or):
                return [x or y for x, y in zip(left, right)]
            if isinstance(g, Implies):
                return [(not x) or y for x, y in zip(left, right)]
            if isinstance(g, Iff):
                return [x == y for x, y in zip(left, right)]
            if isinstance(g, Until):
                return _fixpoint(lambda i, v: right[i] or (left[i] and v[succ(i)]), n, False)
            if isinstance(g, WeakUntil):
                return _fixpoint(lambda i, v: right[i] or (left[i] and v[succ(i)]), n, True)
            return _fixpoint(lambda i, v: right[i] and (left[i] or v[succ(i)]), n, True)
        if isinstance(g, Next):
            body = table(g.body)
            return [body[succ(i)] for i in range(n)]
        if isinstance(g, Eventually):
            body = table(g.body)
            return _fixpoint(lambda i, v: body[i] or v[succ(i)], n, False)
        if isinstance(g, Globally):
            body = table(g.body)
            return _fixpoint(lambda i, v: body[i] and v[succ(i)], n, True)
        raise TypeError(f"not a quantifier-free formula: {g!r}")

    def index(t):
        return t if t < n else stem + (t - stem) % period

    return table(f), index


def ltl_holds(f: Formula, paths: Dict[str, Lasso], time: int = 0) -> bool:
    values, index = ltl_table(f, paths)
    return values[index(time)]


def word_lasso(word: LassoWord) -> Lasso:
    """A lasso word as a lasso over a single dummy state"""
    return Lasso(tuple(('w', frozenset(l)) for l in word.stem),
                 tuple(('w', frozenset(l)) for l in word.loop))


def word_holds(f: Formula, word: LassoWord, var: str = '') -> bool:
    return ltl_holds(f, {var: word_lasso(word)})


# ==========================================
# BOUNDED QUANTIFICATION
# ==========================================

def bounded_prenex(k: KripkeStructure, f: Formula, stem_bound: int, loop_bound: int,
                   free: Optional[Dict[str, frozenset]] = None) -> bool:
    """Prenex formula with every quantifier ranging over the bounded lassos from s0"""
    prefix, matrix = split_prefix(f)
    free = free or {}
    domains = {var: list(enumerate_lassos(k, k.init, free.get(var, ()), stem_bound, loop_bound,
                                          distinct=True))
               for _, var in prefix}

    def walk(depth, bound):
        if depth == len(prefix):
            return ltl_holds(matrix, bound)
        polarity, var = prefix[depth]
        results = (walk(depth + 1, {**bound, var: p}) for p in domains[var])
        return any(results) if polarity == 'E' else all(results)

    return walk(0, {})


# ==========================================
# RANDOM INPUTS
# ==========================================

def random_kripke(rng, n_states=3, aps=('a', 'b'), max_out=2) -> KripkeStructure:
    states = [f"s{i}" for i in range(n_states)]
    edges = []
    for s in states:
        for t in rng.sample(states, rng.randint(1, max_out)):
            edges.append((s, t))
    labels = {s: [a for a in aps if rng.random() < 0.5] for s in states}
    return make_kripke(states, 's0', edges, aps, labels)


ALL_KINDS = ('and', 'or', 'not', 'next', 'until', 'release', 'eventually', 'globally', 'weak')
SAFETY_KINDS = ('and', 'or', 'next', 'release', 'globally', 'weak')
COSAFETY_KINDS = ('and', 'or', 'next', 'until', 'eventually')


def random_ltl(rng, depth: int, props, variables, kinds=ALL_KINDS) -> Formula:
    """Random formula; without 'not' in kinds negation appears on atoms only"""
    if depth == 0 or rng.random() < 0.2:
        atom = Atom(rng.choice(list(props)), rng.choice(list(variables)))
        return atom if rng.random() < 0.7 else Not(atom)
    kind = rng.choice(list(kinds))

    def sub():
        return random_ltl(rng, depth - 1, props, variables, kinds)

    if kind == 'and':
        return And(sub(), sub())
    if kind == 'or':
        return Or(sub(), sub())
    if kind == 'not':
        return Not(sub())
    if kind == 'next':
        return Next(sub())
    if kind == 'until':
        return Until(sub(), sub())
    if kind == 'release':
        return Release(sub(), sub())
    if kind == 'weak':
        return WeakUntil(sub(), sub())
    if kind == 'eventually':
        return Eventually(sub())
    return Globally(sub())


def random_qptl(rng, max_quantifiers: int = 3, depth: int = 2) -> Formula:
    """
    Closed prenex QPTL formula with at most one quantifier alternation

    With an alternation the matrix is safety below an existential inner
    block and co-safety below a universal one, so the block complement
    stays on safety automata.
    """
    names = ['p', 'q', 'r'][:rng.randint(1, max_quantifiers)]
    outer = rng.choice('EA')
    split = rng.randint(1, len(names))
    inner = outer if split == len(names) else ('A' if outer == 'E' else 'E')
    polarities = [outer] * split + [inner] * (len(names) - split)
    if outer == inner:
        kinds = ALL_KINDS
    else:
        kinds = SAFETY_KINDS if inner == 'E' else COSAFETY_KINDS
    body = random_ltl(rng, depth, names, [PROP_INDEX], kinds)
    for polarity, name in reversed(list(zip(polarities, names))):
        body = ExistsProp(name, body) if polarity == 'E' else ForallProp(name, body)
    return body


def random_word(rng, props, max_stem=3, max_loop=3) -> LassoWord:
    def letter():
        return frozenset(p for p in props if rng.random() < 0.5)
    stem = tuple(letter() for _ in range(rng.randint(0, max_stem)))
    loop = tuple(letter() for _ in range(rng.randint(1, max_loop)))
    return LassoWord(stem, loop)


def all_words(props, max_stem: int, max_loop: int):
    letters = [frozenset(c) for r in range(len(props) + 1) for c in itertools.combinations(sorted(props), r)]
    for s in range(max_stem + 1):
        for l in range(1, max_loop + 1):
            for stem in itertools.product(letters, repeat=s):
                for loop in itertools.product(letters, repeat=l):
                    yield LassoWord(stem, loop)


def quantify(prefix, matrix: Formula) -> Formula:
    for polarity, var in reversed(prefix):
        matrix = Exists(var, matrix) if polarity == 'E' else Forall(var, matrix)
    return matrix


# ==========================================
# SECLTL
# ==========================================

def secltl_hidden_forever_fails(m) -> bool:
    """
    Some main path and one of its alternative paths differ on the outputs

    Searches the graph of edge pairs: the first pair agrees on the visible
    inputs, later pairs on all inputs; a mismatch counts only if the pair
    run can continue forever.
    """
    visible = m.inputs - m.high
    graph = nx.DiGraph()
    start = ('start',)
    graph.add_node(start)
    frontier = [start]
    seen = {start}

    def pairs(node):
        if node == start:
            src, alt, flag, agree = m.init, m.init, False, visible
        else:
            src, alt, flag = node
            agree = m.inputs
        for _, val, dst in m.outgoing(src):
            for _, alt_val, alt_dst in m.outgoing(alt):
                if val & agree == alt_val & agree:
                    yield (dst, alt_dst, flag or (val & m.outputs != alt_val & m.outputs))

    while frontier:
        node = frontier.pop()
        for succ in pairs(node):
            graph.add_edge(node, succ)
            if succ not in seen:
                seen.add(succ)
                frontier.append(succ)
    cyclic = set()
    for component in nx.strongly_connected_components(graph):
        if len(component) > 1 or any(graph.has_edge(v, v) for v in component):
            cyclic |= component
    alive = set(cyclic)
    for node in cyclic:
        alive |= nx.ancestors(graph, node)
    return any(node != start and node[2] for node in alive)


# ==========================================
# KNOWLEDGE
# ==========================================

def prefix_lassos(k: KripkeStructure, length: int) -> List[Lasso]:
    """
    One lasso per path prefix of the given length from the initial state

    Each prefix continues along a shortest route to a state with a
    self-loop, a move state when the structure has them, and stays there.
    Formulas that only look at the first `length` positions are decided
    exactly over this set.
    """
    graph = nx.DiGraph(list(k.edges()))
    graph.add_nodes_from(k.states)
    settled: Dict[str, tuple] = {}

    def settle(state):
        if state not in settled:
            routes = nx.single_source_shortest_path(graph, state)
            looping = [s for s in routes if graph.has_edge(s, s)]
            moving = [s for s in looping if MOVE in k.label(s)]
            target = min(moving or looping, key=lambda s: (len(routes[s]), s))
            settled[state] = tuple(routes[target])
        return settled[state]

    lassos = []
    stack = [(k.init,)]
    while stack:
        seq = stack.pop()
        if len(seq) < length:
            stack.extend(seq + (s,) for s in sorted(k.successors(seq[-1]), reverse=True))
            continue
        route = settle(seq[-1])
        states = seq + route[1:-1]
        lassos.append(Lasso(tuple((s, k.label(s)) for s in states), ((route[-1], k.label(route[-1])),)))
    return lassos


def marked_lassos(base: Lasso, prop: str, length: int) -> List[Lasso]:
    """base carrying prop on every subset of its first `length` positions"""
    out = []
    for bits in itertools.product((False, True), repeat=length):
        stem = tuple((s, v | {prop}) if i < length and bits[i] else (s, v)
                     for i, (s, v) in enumerate(base.stem))
        out.append(Lasso(stem, base.loop))
    return out


class VariableDomain:
    """Explicit path sets per path variable, each taken as complete"""

    def __init__(self, default: Sequence[Lasso], per_var: Optional[Dict[str, Sequence[Lasso]]] = None):
        self.default = tuple(default)
        self.per_var = {v: tuple(ps) for v, ps in (per_var or {}).items()}

    def paths(self, state, var=None):
        return tuple(p for p in self.per_var.get(var, self.default) if p.state(0) == state)

    def exhaustive(self, state, var=None):
        return True


def elimination_domain(k: KripkeStructure, f: Formula, length: int) -> VariableDomain:
    """
    Paths for a formula whose fresh propositions live on their own paths

    Ordinary variables range over prefix_lassos; a variable carrying a
    proposition outside the structure ranges over one base path with that
    proposition on every subset of the first `length` positions.
    """
    base = prefix_lassos(k, length)
    carried = {var: prop for prop, var in indexed_props(f) if prop not in k.aps}
    return VariableDomain(base, {var: marked_lassos(base[0], prop, length)
                                 for var, prop in carried.items()})


def random_interpreted(rng, visible_moves: bool = True) -> InterpretedSystem:
    """
    Two agents with binary observations; every point may repeat itself

    With visible_moves, each step to another point changes what agent 1
    observes.
    """
    observations = ('0', '1')
    points = list(itertools.product(observations, repeat=2))
    initial = rng.sample(points, rng.randint(1, 2))
    steps = []
    for p in points:
        steps.append((p, p))
        others = [q for q in points if q != p and (q[0] != p[0] or not visible_moves)]
        steps.extend((p, q) for q in rng.sample(others, rng.randint(1, 2)))
    labels = {p: ['a'] for p in points if rng.random() < 0.5}
    return make_interpreted(2, observations, ['a'], initial, steps, labels)
