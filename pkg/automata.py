"""
Nondeterministic Buchi automata over indexed-proposition alphabets

Letter predicates are cubes: consistent sets of (proposition, value) literals.
A proposition the cube does not mention is unconstrained, so an edge stands
for every letter that agrees with its literals.
"""
import logging
from collections import deque
from dataclasses import dataclass
from itertools import product as cartesian
from typing import (Callable, Dict, FrozenSet, Hashable, Iterable, Iterator, List, Optional,
                    Sequence, Set, Tuple)

import networkx as nx

import config
from errors import HyperscopeError, OverlapError, ResourceError, UnknownPropError
from formula import (And, Atom, Exists, FalseConst, Forall, Formula, Knows, Next, Not, Or,
                     Release, TrueConst, Until, print_formula, subformulas)
from kripke import KripkeStructure, tag

logger = logging.getLogger(__name__)

Literal = Tuple[str, bool]
Cube = FrozenSet[Literal]
Letter = FrozenSet[str]
StateId = Hashable

TRUE_CUBE: Cube = frozenset()
PRE_INIT = None


class QuantifierFoundError(HyperscopeError):
    pass


# ==========================================
# CUBES
# ==========================================

def cube_and(a: Cube, b: Cube) -> Optional[Cube]:
    """Conjunction of two cubes, None when they contradict"""
    if not a:
        return b
    if not b:
        return a
    for prop, value in b:
        if (prop, not value) in a:
            return None
    return a | b


def cube_holds(cube: Cube, letter: Letter) -> bool:
    return all((prop in letter) == value for prop, value in cube)


def cube_letter(cube: Cube) -> Letter:
    """Smallest letter satisfying the cube"""
    return frozenset(prop for prop, value in cube if value)


def cube_props(cube: Cube) -> Set[str]:
    return {prop for prop, _ in cube}


def cube_str(cube: Cube) -> str:
    if not cube:
        return 'true'
    return ' & '.join(p if v else f"!{p}" for p, v in sorted(cube))


def _cube_key(cube: Cube):
    return tuple(sorted(cube))


def _state_key(state: StateId) -> str:
    return repr(state)


def letter_regions(guards: Iterable[Cube]) -> List[Cube]:
    """Disjoint cubes covering every letter, each deciding every guard"""
    regions: List[Cube] = [TRUE_CUBE]
    for guard in sorted(set(guards), key=_cube_key):
        refined = []
        for region in regions:
            if cube_and(region, guard) is None:
                refined.append(region)
                continue
            undecided = [lit for lit in sorted(guard) if lit not in region]
            current = region
            for prop, value in undecided:
                refined.append(current | {(prop, not value)})
                current = current | {(prop, value)}
            refined.append(current)
        regions = refined
    return regions


# ==========================================
# AUTOMATON
# ==========================================

Edge = Tuple[Cube, StateId]


@dataclass(frozen=True, eq=False)
class BuchiAutomaton:
    states: Tuple[StateId, ...]
    init: FrozenSet[StateId]
    alphabet: FrozenSet[str]
    edges: Dict[StateId, Tuple[Edge, ...]]
    accepting: FrozenSet[StateId]

    def successors(self, state: StateId) -> Tuple[Edge, ...]:
        return self.edges.get(state, ())

    @property
    def delta(self) -> Iterator[Tuple[StateId, Cube, StateId]]:
        for state in self.states:
            for cube, dst in self.successors(state):
                yield state, cube, dst

    @property
    def edge_count(self) -> int:
        return sum(len(e) for e in self.edges.values())

    @property
    def all_accepting(self) -> bool:
        return len(self.accepting) == len(self.states)

    def __len__(self):
        return len(self.states)


def _explore(init: Iterable[StateId], expand: Callable[[StateId], Iterable[Edge]],
             is_accepting: Callable[[StateId], bool], alphabet: Iterable[str],
             cap: Optional[int], what: str) -> BuchiAutomaton:
    """Breadth-first construction of the reachable part of an automaton"""
    cap = config.state_cap() if cap is None else cap
    init = sorted(set(init), key=_state_key)
    order = list(init)
    seen = set(init)
    edges: Dict[StateId, Tuple[Edge, ...]] = {}
    queue = deque(init)
    while queue:
        state = queue.popleft()
        out = sorted(set(expand(state)), key=lambda e: (_cube_key(e[0]), _state_key(e[1])))
        edges[state] = tuple(out)
        for _, dst in out:
            if dst not in seen:
                seen.add(dst)
                order.append(dst)
                if len(order) > cap:
                    raise ResourceError(f"{what} exceeded the state cap", cap)
                queue.append(dst)
    automaton = BuchiAutomaton(
        states=tuple(order),
        init=frozenset(init),
        alphabet=frozenset(alphabet),
        edges=edges,
        accepting=frozenset(s for s in order if is_accepting(s)),
    )
    logger.debug("%s: %d states, %d edges", what, len(automaton), automaton.edge_count)
    return automaton


def universal(alphabet: Iterable[str] = ()) -> BuchiAutomaton:
    return BuchiAutomaton((0,), frozenset({0}), frozenset(alphabet),
                          {0: ((TRUE_CUBE, 0),)}, frozenset({0}))


def empty(alphabet: Iterable[str] = ()) -> BuchiAutomaton:
    return BuchiAutomaton((0,), frozenset({0}), frozenset(alphabet), {0: ()}, frozenset())


def relabel(a: BuchiAutomaton) -> BuchiAutomaton:
    """Rename states to 0..n-1 in construction order"""
    index = {s: i for i, s in enumerate(a.states)}
    return BuchiAutomaton(
        states=tuple(range(len(a.states))),
        init=frozenset(index[s] for s in a.init),
        alphabet=a.alphabet,
        edges={index[s]: tuple((c, index[d]) for c, d in a.successors(s)) for s in a.states},
        accepting=frozenset(index[s] for s in a.accepting),
    )


# ==========================================
# LTL TO BUCHI
# ==========================================

def atom_key(atom: Atom) -> str:
    """Alphabet name of an indexed proposition a_pi"""
    return tag(atom.prop, atom.var)


def _expand_obligations(obligations: FrozenSet[Formula], key: Callable[[Atom], str]):
    """Tableau expansion: (cube, next obligations, postponed untils) per consistent branch"""
    results = []
    stack = [(list(obligations), TRUE_CUBE, frozenset(), frozenset(), frozenset())]
    while stack:
        todo, cube, nxt, postponed, done = stack.pop()
        alive = True
        while todo and alive:
            f = todo.pop()
            if f in done:
                continue
            done = done | {f}
            if isinstance(f, TrueConst):
                continue
            if isinstance(f, FalseConst):
                alive = False
            elif isinstance(f, Atom) or (isinstance(f, Not) and isinstance(f.body, Atom)):
                atom = f if isinstance(f, Atom) else f.body
                merged = cube_and(cube, frozenset({(key(atom), isinstance(f, Atom))}))
                if merged is None:
                    alive = False
                else:
                    cube = merged
            elif isinstance(f, And):
                todo.extend([f.right, f.left])
            elif isinstance(f, Or):
                stack.append((todo + [f.right], cube, nxt, postponed, done))
                todo.append(f.left)
            elif isinstance(f, Next):
                nxt = nxt | {f.body}
            elif isinstance(f, Until):
                stack.append((todo + [f.left], cube, nxt | {f}, postponed | {f}, done))
                todo.append(f.right)
            elif isinstance(f, Release):
                stack.append((todo + [f.right], cube, nxt | {f}, postponed, done))
                todo.extend([f.right, f.left])
            elif isinstance(f, (Exists, Forall, Knows)) or (isinstance(f, Not) and isinstance(f.body, (Exists, Knows))):
                raise QuantifierFoundError(f"expected a quantifier-free NNF formula, found {print_formula(f)}")
            else:
                raise ValueError(f"formula is not in negation normal form: {print_formula(f)}")
        if alive:
            results.append((cube, frozenset(nxt - {TrueConst()}), postponed))
    return results


def ltl_to_nba(theta: Formula, key: Callable[[Atom], str] = atom_key,
               cap: Optional[int] = None) -> BuchiAutomaton:
    """
    Tableau translation of a quantifier-free NNF formula

    States are obligation sets (subsets of the closure) paired with a
    counter over the until-formulas used to degeneralize acceptance.
    """
    untils = sorted({f for f in subformulas(theta) if isinstance(f, Until)}, key=print_formula)
    alphabet = {key(f) for f in subformulas(theta) if isinstance(f, Atom)}
    k = len(untils)
    expansions: Dict[FrozenSet[Formula], list] = {}

    def expand(state):
        obligations, counter = state
        if obligations not in expansions:
            expansions[obligations] = _expand_obligations(obligations, key)
        for cube, nxt, postponed in expansions[obligations]:
            c = 0 if counter == k else counter
            while c < k and untils[c] not in postponed:
                c += 1
            yield cube, (nxt, c)

    start = frozenset({theta}) - {TrueConst()}
    raw = _explore([(start, 0)], expand, lambda s: s[1] == k, alphabet, cap, 'ltl_to_nba')
    return relabel(raw)


# ==========================================
# PATH AUTOMATA
# ==========================================

def var_automaton(k: KripkeStructure, var: str, free: Iterable[str] = ()) -> BuchiAutomaton:
    """Label sequences of paths from s0, propositions tagged with var, free ones unconstrained"""
    free = frozenset(free)
    overlap = free & k.aps
    if overlap:
        raise OverlapError(f"free propositions overlap the structure's: {', '.join(sorted(overlap))}")
    guards = {s: frozenset((tag(a, var), a in k.label(s)) for a in k.aps) for s in k.states}
    edges = {PRE_INIT: ((guards[k.init], k.init),)}
    for s in k.states:
        edges[s] = tuple((guards[t], t) for t in k.successors(s))
    states = (PRE_INIT,) + tuple(k.states)
    return BuchiAutomaton(
        states=states,
        init=frozenset({PRE_INIT}),
        alphabet=frozenset(tag(a, var) for a in k.aps | free),
        edges=edges,
        accepting=frozenset(states),
    )


# ==========================================
# PRODUCT, PROJECTION
# ==========================================

@dataclass(frozen=True)
class LazyAutomaton:
    """Automaton given by its successor function, explored on demand"""
    init: Tuple[StateId, ...]
    expand: Callable[[StateId], Iterable[Edge]]
    accepting: Callable[[StateId], bool]
    alphabet: FrozenSet[str]
    all_accepting: bool = False


def lazy(a: BuchiAutomaton) -> LazyAutomaton:
    return LazyAutomaton(
        init=tuple(sorted(a.init, key=_state_key)),
        expand=a.successors,
        accepting=a.accepting.__contains__,
        alphabet=a.alphabet,
        all_accepting=a.all_accepting,
    )


def lazy_intersect(a: LazyAutomaton, b: LazyAutomaton) -> LazyAutomaton:
    """Two-phase Buchi product; states are (qa, qb, phase)"""
    plain = a.all_accepting or b.all_accepting

    def expand(state):
        qa, qb, phase = state
        if plain:
            nxt_phase = 0
        elif phase == 0:
            nxt_phase = 1 if a.accepting(qa) else 0
        else:
            nxt_phase = 0 if b.accepting(qb) else 1
        right = tuple(b.expand(qb))
        for cube_a, da in a.expand(qa):
            for cube_b, db in right:
                cube = cube_and(cube_a, cube_b)
                if cube is not None:
                    yield cube, (da, db, nxt_phase)

    def accepting(state):
        qa, qb, phase = state
        if b.all_accepting:
            return a.accepting(qa)
        if a.all_accepting:
            return b.accepting(qb)
        return phase == 0 and a.accepting(qa)

    return LazyAutomaton(
        init=tuple((qa, qb, 0) for qa in a.init for qb in b.init),
        expand=expand,
        accepting=accepting,
        alphabet=a.alphabet | b.alphabet,
        all_accepting=a.all_accepting and b.all_accepting,
    )


def materialize(a: LazyAutomaton, cap: Optional[int] = None, what: str = 'product') -> BuchiAutomaton:
    return _explore(a.init, a.expand, a.accepting, a.alphabet, cap, what)


def intersect(a: BuchiAutomaton, b: BuchiAutomaton, cap: Optional[int] = None) -> BuchiAutomaton:
    """Reachable two-phase product; states are (qa, qb, phase)"""
    return materialize(lazy_intersect(lazy(a), lazy(b)), cap, 'intersect')


def project(a: BuchiAutomaton, props: Iterable[str]) -> BuchiAutomaton:
    """Existentially quantify props away"""
    props = frozenset(props)
    unknown = props - a.alphabet
    if unknown:
        raise UnknownPropError(f"cannot project untracked propositions {', '.join(sorted(unknown))}")
    edges = {}
    for state in a.states:
        out = {(frozenset(l for l in cube if l[0] not in props), dst) for cube, dst in a.successors(state)}
        edges[state] = tuple(sorted(out, key=lambda e: (_cube_key(e[0]), _state_key(e[1]))))
    return BuchiAutomaton(a.states, a.init, a.alphabet - props, edges, a.accepting)


# ==========================================
# EMPTINESS
# ==========================================

@dataclass(frozen=True)
class LassoWord:
    """Ultimately periodic word; `run` holds the accepting run's edges when known"""
    stem: Tuple[Letter, ...]
    loop: Tuple[Letter, ...]
    run_stem: Tuple[Tuple[StateId, StateId], ...] = ()
    run_loop: Tuple[Tuple[StateId, StateId], ...] = ()

    def letter(self, i: int) -> Letter:
        if i < len(self.stem):
            return self.stem[i]
        return self.loop[(i - len(self.stem)) % len(self.loop)]

    def __len__(self):
        return len(self.stem) + len(self.loop)

    def __str__(self):
        def show(letter):
            return '{' + ','.join(sorted(letter)) + '}'
        return ' '.join(show(l) for l in self.stem) + ' (' + ' '.join(show(l) for l in self.loop) + ')^w'


def _graph(a: BuchiAutomaton) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(a.states)
    for src, _, dst in a.delta:
        graph.add_edge(src, dst)
    return graph


def _bfs_path(a: BuchiAutomaton, sources: Sequence[StateId], target: StateId,
              allowed: Optional[Set[StateId]] = None):
    """Shortest edge list (src, cube, dst) from any source to target"""
    parent = {}
    queue = deque()
    for s in sources:
        if allowed is None or s in allowed:
            queue.append(s)
            parent.setdefault(s, None)
    while queue:
        state = queue.popleft()
        if state == target:
            break
        for cube, dst in a.successors(state):
            if dst not in parent and (allowed is None or dst in allowed):
                parent[dst] = (state, cube)
                queue.append(dst)
    if target not in parent:
        return None
    path = []
    node = target
    while parent[node] is not None:
        src, cube = parent[node]
        path.append((src, cube, node))
        node = src
    path.reverse()
    return path


def accepting_cycle_states(a: BuchiAutomaton) -> List[StateId]:
    """Reachable accepting states lying on a cycle"""
    graph = _graph(a)
    reachable = set()
    for s in a.init:
        reachable |= nx.descendants(graph, s) | {s}
    sub = graph.subgraph(reachable)
    result = []
    for component in nx.strongly_connected_components(sub):
        nontrivial = len(component) > 1 or any(sub.has_edge(q, q) for q in component)
        if nontrivial:
            result.extend(q for q in component if q in a.accepting)
    return sorted(result, key=_state_key)


def is_empty(a: BuchiAutomaton) -> Optional[LassoWord]:
    """None when L(a) is empty, otherwise an accepting lasso word with its run"""
    graph = _graph(a)
    reachable = set()
    for s in a.init:
        reachable |= nx.descendants(graph, s) | {s}
    sub = graph.subgraph(reachable)
    for component in sorted(nx.strongly_connected_components(sub),
                            key=lambda c: min(_state_key(q) for q in c)):
        nontrivial = len(component) > 1 or any(sub.has_edge(q, q) for q in component)
        targets = sorted((q for q in component if q in a.accepting), key=_state_key)
        if not nontrivial or not targets:
            continue
        target = targets[0]
        stem = _bfs_path(a, sorted(a.init, key=_state_key), target)
        loop = None
        for cube, dst in a.successors(target):
            if dst not in component:
                continue
            back = [] if dst == target else _bfs_path(a, [dst], target, allowed=set(component))
            if back is not None:
                candidate = [(target, cube, dst)] + back
                if loop is None or len(candidate) < len(loop):
                    loop = candidate
        return LassoWord(
            stem=tuple(cube_letter(c) for _, c, _ in stem),
            loop=tuple(cube_letter(c) for _, c, _ in loop),
            run_stem=tuple((s, d) for s, _, d in stem),
            run_loop=tuple((s, d) for s, _, d in loop),
        )
    return None


def find_accepting_lasso(a: LazyAutomaton, cap: Optional[int] = None) -> Optional[LassoWord]:
    """
    Nested depth-first emptiness check on a lazily explored automaton

    Stops at the first accepting lasso, so a nonempty product is usually
    left mostly unexplored.
    """
    cap = config.state_cap() if cap is None else cap
    expansions: Dict[StateId, Tuple[Edge, ...]] = {}

    def edges(state):
        if state not in expansions:
            expansions[state] = tuple(sorted(set(a.expand(state)),
                                             key=lambda e: (_cube_key(e[0]), _state_key(e[1]))))
            if len(expansions) > cap:
                raise ResourceError("on-the-fly product exceeded the state cap", cap)
        return expansions[state]

    flagged: Set[StateId] = set()

    def cycle_through(seed):
        stack = [(seed, iter(edges(seed)), None)]
        while stack:
            state, it, _ = stack[-1]
            for cube, dst in it:
                if dst == seed:
                    path = [(stack[i - 1][0], stack[i][2], stack[i][0]) for i in range(1, len(stack))]
                    return path + [(state, cube, dst)]
                if dst not in flagged:
                    flagged.add(dst)
                    stack.append((dst, iter(edges(dst)), cube))
                    break
            else:
                stack.pop()
        return None

    def edge_list(frames, upto):
        return [(frames[i - 1][0], frames[i][2], frames[i][0]) for i in range(1, upto)]

    def lasso(stem, loop):
        logger.debug("nested search: lasso found after %d states", len(expansions))
        return LassoWord(
            stem=tuple(cube_letter(c) for _, c, _ in stem),
            loop=tuple(cube_letter(c) for _, c, _ in loop),
            run_stem=tuple((s, d) for s, _, d in stem),
            run_loop=tuple((s, d) for s, _, d in loop),
        )

    visited: Set[StateId] = set()
    for root in a.init:
        if root in visited:
            continue
        visited.add(root)
        stack = [(root, iter(edges(root)), None)]
        depth = {root: 0}
        accepting_depths = [0] if a.accepting(root) else []
        while stack:
            state, it, _ = stack[-1]
            for cube, dst in it:
                if dst in depth and accepting_depths and accepting_depths[-1] >= depth[dst]:
                    # back edge closing a cycle through an accepting state on the stack
                    j = depth[dst]
                    loop = edge_list(stack, len(stack))[j:] + [(state, cube, dst)]
                    return lasso(edge_list(stack, j + 1), loop)
                if dst not in visited:
                    visited.add(dst)
                    depth[dst] = len(stack)
                    if a.accepting(dst):
                        accepting_depths.append(len(stack))
                    stack.append((dst, iter(edges(dst)), cube))
                    break
            else:
                if a.accepting(state):
                    loop = cycle_through(state)
                    if loop is not None:
                        return lasso(edge_list(stack, len(stack)), loop)
                stack.pop()
                del depth[state]
                if accepting_depths and accepting_depths[-1] == len(stack):
                    accepting_depths.pop()
    logger.debug("nested search: empty after %d states", len(expansions))
    return None


def membership(a: BuchiAutomaton, word: LassoWord) -> bool:
    """w in L(a), via Buchi emptiness of a times the lasso graph of w"""
    if not word.loop:
        raise ValueError("lasso word loop must be nonempty")
    n = len(word)
    stem_len = len(word.stem)

    def after(i):
        return i + 1 if i + 1 < n else stem_len

    graph = nx.DiGraph()
    start = [(q, 0) for q in a.init]
    graph.add_nodes_from(start)
    stack = list(start)
    seen = set(start)
    while stack:
        q, i = stack.pop()
        letter = word.letter(i)
        for cube, dst in a.successors(q):
            if cube_holds(cube, letter):
                node = (dst, after(i))
                graph.add_edge((q, i), node)
                if node not in seen:
                    seen.add(node)
                    stack.append(node)
    for component in nx.strongly_connected_components(graph):
        if any(q in a.accepting for q, _ in component):
            if len(component) > 1 or any(graph.has_edge(v, v) for v in component):
                return True
    return False


# ==========================================
# TRIMMING AND COMPLEMENTATION
# ==========================================

def trim(a: BuchiAutomaton) -> BuchiAutomaton:
    """Drop states that are unreachable or cannot reach an accepting cycle"""
    graph = _graph(a)
    good = set(accepting_cycle_states(a))
    useful = set(good)
    for q in good:
        useful |= nx.ancestors(graph, q)
    reachable = set()
    for s in a.init:
        reachable |= nx.descendants(graph, s) | {s}
    useful &= reachable
    if not useful:
        return empty(a.alphabet)
    states = tuple(s for s in a.states if s in useful)
    edges = {s: tuple((c, d) for c, d in a.successors(s) if d in useful) for s in states}
    return BuchiAutomaton(states, frozenset(a.init & useful), a.alphabet, edges,
                          frozenset(a.accepting & useful))


def _enabled(a: BuchiAutomaton, states: Iterable[StateId], region: Cube):
    """(src, dst) pairs enabled under a region that decides every guard"""
    for src in states:
        for cube, dst in a.successors(src):
            if cube_and(cube, region) is not None:
                yield src, dst


def _complement_safety(a: BuchiAutomaton, cap: Optional[int]) -> BuchiAutomaton:
    """Subset construction; the empty macro-state is the only accepting one"""

    def expand(macro):
        guards = [c for q in macro for c, _ in a.successors(q)]
        for region in letter_regions(guards):
            succ = tuple(sorted({d for _, d in _enabled(a, macro, region)}, key=_state_key))
            yield region, succ

    init = tuple(sorted(a.init, key=_state_key))
    return _explore([init], expand, lambda m: len(m) == 0, a.alphabet, cap, 'complement/subset')


def _is_tight(ranking) -> bool:
    """Maximum rank odd and every odd rank below it in use"""
    ranks = {r for _, r in ranking}
    if not ranks:
        return True
    top = max(ranks)
    return top % 2 == 1 and all(r in ranks for r in range(1, top + 1, 2))


def _tight_rankings(a: BuchiAutomaton, states: Sequence[StateId], bound: Dict[StateId, int]):
    choices = []
    for q in states:
        ranks = range(bound[q] + 1)
        choices.append([r for r in ranks if r % 2 == 0] if q in a.accepting else list(ranks))
    for combo in cartesian(*choices):
        ranking = tuple(zip(states, combo))
        if _is_tight(ranking):
            yield ranking


def _complement_ranked(a: BuchiAutomaton, cap: Optional[int]) -> BuchiAutomaton:
    """
    Rank-based complementation with tight level rankings

    The automaton first tracks plain subsets, then guesses the point from
    which the ranking is tight; ranked states with an empty breakpoint set
    are accepting.
    """

    def expand(state):
        if state[0] == 'S':
            macro = state[1]
            guards = [c for q in macro for c, _ in a.successors(q)]
            for region in letter_regions(guards):
                succ = tuple(sorted({d for _, d in _enabled(a, macro, region)}, key=_state_key))
                yield region, ('S', succ)
                limit = max(2 * len(succ) - 1, 0)
                for ranking in _tight_rankings(a, succ, {q: limit for q in succ}):
                    yield region, ('R', ranking, ())
            return
        _, ranking, owing = state
        rank_of = dict(ranking)
        guards = [c for q in rank_of for c, _ in a.successors(q)]
        for region in letter_regions(guards):
            bound: Dict[StateId, int] = {}
            for src, dst in _enabled(a, rank_of, region):
                bound[dst] = min(bound.get(dst, rank_of[src]), rank_of[src])
            targets = sorted(bound, key=_state_key)
            owing_succ = {d for _, d in _enabled(a, owing, region)} if owing else None
            for new_ranking in _tight_rankings(a, targets, bound):
                evens = {q for q, r in new_ranking if r % 2 == 0}
                new_owing = evens if owing_succ is None else owing_succ & evens
                yield region, ('R', new_ranking, tuple(sorted(new_owing, key=_state_key)))

    init = ('S', tuple(sorted(a.init, key=_state_key)))
    return _explore([init], expand, lambda s: s[0] == 'R' and len(s[2]) == 0, a.alphabet, cap,
                    'complement/rank')


def complement(a: BuchiAutomaton, cap: Optional[int] = None) -> BuchiAutomaton:
    """Automaton for the complement language over the same alphabet"""
    trimmed = trim(a)
    if not trimmed.accepting:
        return universal(a.alphabet)
    if trimmed.all_accepting:
        result = _complement_safety(trimmed, cap)
    else:
        result = _complement_ranked(trimmed, cap)
    return relabel(result)


# ==========================================
# DEBUG DUMP
# ==========================================

def dump(a: BuchiAutomaton) -> str:
    """Human-readable listing; `*` marks accepting states, `>` initial ones"""
    lines = [f"alphabet {' '.join(sorted(a.alphabet))}".rstrip()]
    for state in a.states:
        mark = ('>' if state in a.init else ' ') + ('*' if state in a.accepting else ' ')
        lines.append(f"{mark} {state!r}")
        for cube, dst in a.successors(state):
            lines.append(f"    -> {dst!r} [{cube_str(cube)}]")
    return '\n'.join(lines) + '\n'
