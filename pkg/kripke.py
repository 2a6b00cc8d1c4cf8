"""
Finite Kripke structures: text format, validation, free propositions,
self-composition and bounded lasso enumeration
"""
import itertools
import logging
import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Sequence, Tuple

from errors import HyperscopeError, OverlapError

logger = logging.getLogger(__name__)

State = str
Valuation = FrozenSet[str]
Position = Tuple[State, Valuation]


class KripkeError(HyperscopeError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class KripkeValidationError(HyperscopeError):
    def __init__(self, violations: List[str]):
        super().__init__('; '.join(violations))
        self.violations = violations


@dataclass(frozen=True, eq=False)
class KripkeStructure:
    """K = (S, s0, delta, AP, L) with a total successor relation"""
    states: Tuple[State, ...]
    init: State
    trans: Dict[State, Tuple[State, ...]]
    aps: FrozenSet[str]
    labels: Dict[State, FrozenSet[str]]

    def successors(self, state: State) -> Tuple[State, ...]:
        return self.trans.get(state, ())

    def label(self, state: State) -> FrozenSet[str]:
        return self.labels.get(state, frozenset())

    @property
    def edge_count(self) -> int:
        return sum(len(succ) for succ in self.trans.values())

    def edges(self) -> Iterator[Tuple[State, State]]:
        for state in self.states:
            for succ in self.successors(state):
                yield state, succ


def make_kripke(states: Iterable[State], init: State, edges: Iterable[Tuple[State, State]],
                aps: Iterable[str], labels: Dict[State, Iterable[str]],
                check: bool = True) -> KripkeStructure:
    """Build a structure from plain collections; duplicate edges collapse"""
    ordered = sorted(dict.fromkeys(states))
    trans: Dict[State, set] = {s: set() for s in ordered}
    for src, dst in edges:
        trans.setdefault(src, set()).add(dst)
    k = KripkeStructure(
        states=tuple(ordered),
        init=init,
        trans={s: tuple(sorted(succ)) for s, succ in trans.items()},
        aps=frozenset(aps),
        labels={s: frozenset(labels.get(s, ())) for s in ordered},
    )
    if check:
        violations = validate(k)
        if violations:
            raise KripkeValidationError(violations)
    return k


def validate(k: KripkeStructure) -> List[str]:
    """All invariant violations of k; an empty list means the structure is valid"""
    violations = []
    known = set(k.states)
    if k.init not in known:
        violations.append(f"initial state {k.init} is not a state")
    for state in k.states:
        if not k.successors(state):
            violations.append(f"{state} has no successor")
        undeclared = sorted(k.label(state) - k.aps)
        if undeclared:
            violations.append(f"{state} is labeled with undeclared proposition(s) {', '.join(undeclared)}")
    for src, succ in k.trans.items():
        if src not in known:
            violations.append(f"edge source {src} is not a state")
        for dst in succ:
            if dst not in known:
                violations.append(f"edge target {dst} is not a state")
    return violations


def size(k: KripkeStructure) -> int:
    """|K| = |S| * |AP| + |delta|"""
    return len(k.states) * len(k.aps) + k.edge_count


# ==========================================
# TEXT FORMAT
# ==========================================

_STATE_LINE = re.compile(r'^state\s+(\S+)\s*\{([^}]*)\}$')
_INIT_LINE = re.compile(r'^init\s+(\S+)$')
_EDGE_LINE = re.compile(r'^edge\s+(\S+)\s+(\S+)$')
_APS_LINE = re.compile(r'^aps(\s+.*)?$')


def parse_kripke(text: str) -> KripkeStructure:
    """
    Parse the line-based Kripke format

    `aps a b c` first, then `state s {a b}`, `init s`, `edge s t` in any order;
    `#` starts a comment.
    """
    aps = None
    states: List[State] = []
    labels: Dict[State, List[str]] = {}
    edges = []
    init = None
    for number, raw in enumerate(text.split('\n'), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if aps is None:
            match = _APS_LINE.match(line)
            if not match:
                raise KripkeError("the first declaration must be 'aps'", number)
            aps = (match.group(1) or '').split()
            continue
        match = _STATE_LINE.match(line)
        if match:
            name = match.group(1)
            if name in labels:
                raise KripkeError(f"state {name} declared twice", number)
            states.append(name)
            labels[name] = match.group(2).replace(',', ' ').split()
            continue
        match = _INIT_LINE.match(line)
        if match:
            if init is not None:
                raise KripkeError("init declared twice", number)
            init = match.group(1)
            continue
        match = _EDGE_LINE.match(line)
        if match:
            edges.append((match.group(1), match.group(2)))
            continue
        raise KripkeError(f"cannot parse {line!r}", number)
    if aps is None:
        raise KripkeError("missing 'aps' header")
    if init is None:
        raise KripkeError("missing 'init' declaration")
    for src, dst in edges:
        for name in (src, dst):
            if name not in labels:
                raise KripkeError(f"edge mentions undeclared state {name}")
    k = make_kripke(states, init, edges, aps, labels, check=True)
    logger.debug("parsed Kripke structure: %d states, %d edges", len(k.states), k.edge_count)
    return k


def format_kripke(k: KripkeStructure) -> str:
    lines = [f"aps {' '.join(sorted(k.aps))}".rstrip()]
    for state in k.states:
        lines.append(f"state {state} {{{' '.join(sorted(k.label(state)))}}}")
    lines.append(f"init {k.init}")
    for src, dst in k.edges():
        lines.append(f"edge {src} {dst}")
    return '\n'.join(lines) + '\n'


# ==========================================
# PATH UNIVERSES AND PRODUCTS
# ==========================================

@dataclass(frozen=True, eq=False)
class PathUniverse:
    """Paths of a structure whose positions may additionally carry any subset of `free`"""
    kripke: KripkeStructure
    free: FrozenSet[str]

    @property
    def choices_per_position(self) -> int:
        return 2 ** len(self.free)

    def valuations(self, state: State) -> List[Valuation]:
        base = self.kripke.label(state)
        return [base | extra for extra in subsets(self.free)]


def subsets(props: Iterable[str]) -> List[FrozenSet[str]]:
    """All subsets, ordered by size then lexicographically"""
    items = sorted(props)
    result = []
    for r in range(len(items) + 1):
        result.extend(frozenset(c) for c in itertools.combinations(items, r))
    return result


def extend_free_props(k: KripkeStructure, extra: Iterable[str]) -> PathUniverse:
    extra = frozenset(extra)
    overlap = extra & k.aps
    if overlap:
        raise OverlapError(f"free propositions overlap the structure's: {', '.join(sorted(overlap))}")
    return PathUniverse(k, extra)


def tag(prop: str, index) -> str:
    return f"{prop}@{index}"


def self_composition(k: KripkeStructure, m: int) -> KripkeStructure:
    """m-fold synchronous product with propositions tagged a@1 .. a@m"""
    if m < 1:
        raise ValueError("self-composition needs m >= 1")

    def name(parts: Sequence[State]) -> State:
        return '(' + ','.join(parts) + ')'

    tuples = list(itertools.product(k.states, repeat=m))
    labels = {}
    edges = []
    for parts in tuples:
        labels[name(parts)] = {tag(a, i + 1) for i, s in enumerate(parts) for a in k.label(s)}
        for succ in itertools.product(*(k.successors(s) for s in parts)):
            edges.append((name(parts), name(succ)))
    aps = {tag(a, i) for a in k.aps for i in range(1, m + 1)}
    product = make_kripke([name(t) for t in tuples], name([k.init] * m), edges, aps, labels, check=False)
    logger.debug("self-composition x%d: %d states, %d edges", m, len(product.states), product.edge_count)
    return product


def reachable_states(k: KripkeStructure, start: State = None) -> List[State]:
    start = k.init if start is None else start
    seen = {start}
    stack = [start]
    while stack:
        state = stack.pop()
        for succ in k.successors(state):
            if succ not in seen:
                seen.add(succ)
                stack.append(succ)
    return sorted(seen)


def is_deterministic(k: KripkeStructure, start: State = None) -> bool:
    """Every state reachable from start has exactly one successor"""
    return all(len(k.successors(s)) == 1 for s in reachable_states(k, start))


# ==========================================
# LASSOS
# ==========================================

@dataclass(frozen=True)
class Lasso:
    """Ultimately periodic path: stem followed by loop repeated forever"""
    stem: Tuple[Position, ...]
    loop: Tuple[Position, ...]

    def __post_init__(self):
        if not self.loop:
            raise ValueError("lasso loop must be nonempty")

    def index(self, i: int) -> int:
        """Position in stem+loop that represents position i of the infinite path"""
        if i < len(self.stem):
            return i
        return len(self.stem) + (i - len(self.stem)) % len(self.loop)

    def at(self, i: int) -> Position:
        j = self.index(i)
        return self.stem[j] if j < len(self.stem) else self.loop[j - len(self.stem)]

    def state(self, i: int) -> State:
        return self.at(i)[0]

    def valuation(self, i: int) -> Valuation:
        return self.at(i)[1]

    @property
    def positions(self) -> Tuple[Position, ...]:
        return self.stem + self.loop

    def violations(self, k: KripkeStructure, free: Iterable[str] = ()) -> List[str]:
        """Transition and valuation consistency of this lasso against k"""
        free = frozenset(free)
        issues = []
        seq = self.positions
        for i, (state, val) in enumerate(seq):
            if val & k.aps != k.label(state):
                issues.append(f"position {i}: valuation disagrees with label of {state}")
            if val - k.aps - free:
                issues.append(f"position {i}: undeclared propositions {sorted(val - k.aps - free)}")
        for i in range(len(seq)):
            nxt = seq[i + 1] if i + 1 < len(seq) else self.loop[0]
            if nxt[0] not in k.successors(seq[i][0]):
                issues.append(f"position {i}: no edge {seq[i][0]} -> {nxt[0]}")
        return issues

    def __str__(self):
        def show(pos):
            return f"{pos[0]}{{{','.join(sorted(pos[1]))}}}"
        return ' '.join(show(p) for p in self.stem) + ' (' + ' '.join(show(p) for p in self.loop) + ')^w'


def _state_sequences(k: KripkeStructure, start: State, length: int) -> Iterator[Tuple[State, ...]]:
    """Transition-respecting state sequences of the given length, lexicographic order"""
    if length == 0:
        return
    stack = [(start,)]
    while stack:
        seq = stack.pop()
        if len(seq) == length:
            yield seq
            continue
        for succ in reversed(k.successors(seq[-1])):
            stack.append(seq + (succ,))


def _is_minimal(stem: Tuple[Position, ...], loop: Tuple[Position, ...]) -> bool:
    if stem and stem[-1] == loop[-1]:
        return False
    n = len(loop)
    for period in range(1, n):
        if n % period == 0 and loop == loop[:period] * (n // period):
            return False
    return True


def enumerate_lassos(k: KripkeStructure, start: State, free: Iterable[str],
                     stem_bound: int, loop_bound: int, distinct: bool = False) -> Iterator[Lasso]:
    """
    Lassos rooted at start with |stem| <= stem_bound and 1 <= |loop| <= loop_bound

    Ordered by stem length, loop length, then lexicographically by states and
    valuations. With distinct=True only the shortest representation of each
    infinite path is produced.
    """
    if stem_bound < 0 or loop_bound < 1:
        raise ValueError("need stem_bound >= 0 and loop_bound >= 1")
    universe = extend_free_props(k, free)
    for stem_len in range(stem_bound + 1):
        for loop_len in range(1, loop_bound + 1):
            for seq in _state_sequences(k, start, stem_len + loop_len):
                if seq[stem_len] not in k.successors(seq[-1]):
                    continue
                choices = [universe.valuations(s) for s in seq]
                for vals in itertools.product(*choices):
                    positions = tuple(zip(seq, vals))
                    stem, loop = positions[:stem_len], positions[stem_len:]
                    if distinct and not _is_minimal(stem, loop):
                        continue
                    yield Lasso(stem, loop)
