"""
Security and coding properties as HyperCTL formulas, plus encoders from
state machines, SecLTL transition systems and interpreted systems into
Kripke structures
"""
import itertools
import logging
import re
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import config
from checker import KNOWLEDGE_MODES, ModeError
from errors import HyperscopeError
from formula import (TRUE, And, Atom, Exists, Forall, Formula, Globally, Iff, Implies, Knows, Next,
                     Not, Or, PathVar, Until, WeakUntil, Eventually, _fresh, all_vars, children,
                     conj, disj, eq_globally, eq_now, free_vars, has_knowledge, has_quantifier,
                     index_formula, neq_globally, neq_now, props_of, rebuild, rename_index, to_nnf)
from kripke import KripkeStructure, State, make_kripke

logger = logging.getLogger(__name__)


class ModelFileError(HyperscopeError):
    """Malformed state-machine, SecLTL or interpreted-system description"""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class SizeCapError(HyperscopeError):
    pass


class PropertyError(HyperscopeError):
    """A property builder was called outside its domain"""
    pass


# ==========================================
# PROPERTY BUILDERS
# ==========================================

def _fresh_name(base: str, used: Set[str]) -> str:
    return base if base not in used else _fresh(base, used)


def _one_path(release: Formula, var: PathVar, what: str) -> Formula:
    """Check that release talks about a single path and index it to var"""
    if has_quantifier(release) or has_knowledge(release):
        raise PropertyError(f"{what} must be quantifier-free")
    others = free_vars(release)
    if len(others) > 1:
        raise PropertyError(f"{what} refers to several paths: {', '.join(sorted(others))}")
    return index_formula(release, var)


def _noninterference(inputs, outputs, release: Optional[Formula], v1: PathVar, v2: PathVar) -> Formula:
    excuse = neq_now(inputs, v1, v2)
    if release is not None:
        excuse = Or(excuse, release)
    return Forall(v1, Forall(v2, WeakUntil(eq_now(outputs, v1, v2), excuse)))


def noninterference_basic(inputs: Iterable[str], outputs: Iterable[str],
                          v1: PathVar = 'pi1', v2: PathVar = 'pi2') -> Formula:
    """Outputs stay equal until the public inputs differ"""
    inputs, outputs = frozenset(inputs), frozenset(outputs)
    if not inputs or not outputs:
        raise PropertyError("noninterference needs nonempty input and output sets")
    return _noninterference(inputs, outputs, None, v1, v2)


def declassification(inputs: Iterable[str], outputs: Iterable[str], release: Formula,
                     v1: PathVar = 'pi1', v2: PathVar = 'pi2') -> Formula:
    """Noninterference that is lifted once the release condition holds on the first path"""
    inputs, outputs = frozenset(inputs), frozenset(outputs)
    if not inputs or not outputs:
        raise PropertyError("declassification needs nonempty input and output sets")
    return _noninterference(inputs, outputs, _one_path(release, v1, "release condition"), v1, v2)


def hamming_at_most(props: Iterable[str], d: int, v1: PathVar, v2: PathVar) -> Formula:
    """The two paths differ on props at no more than d positions"""
    if d < 0:
        raise PropertyError("Hamming distance must be non-negative")
    props = frozenset(props)
    result = eq_globally(props, v1, v2)
    for _ in range(d):
        result = WeakUntil(eq_now(props, v1, v2), And(neq_now(props, v1, v2), Next(result)))
    return result


def min_distance_spec(inputs: Iterable[str], codeword: Iterable[str], d: int,
                      v1: PathVar = 'pi1', v2: PathVar = 'pi2') -> Formula:
    """Distinct input streams are encoded by codeword streams at Hamming distance >= d"""
    if d < 1:
        raise PropertyError("minimal distance must be at least 1")
    body = Implies(neq_globally(inputs, v1, v2), Not(hamming_at_most(codeword, d - 1, v1, v2)))
    return Forall(v1, Forall(v2, body))


def edit_insertion(props: Iterable[str], v1: PathVar, v2: PathVar) -> Formula:
    """v2 is v1 with at most one position inserted"""
    props = frozenset(props)
    shifted = conj([Iff(Atom(a, v1), Next(Atom(a, v2))) for a in sorted(props)])
    return WeakUntil(eq_now(props, v1, v2), Globally(shifted))


def qif_min_entropy_bound(inputs: Iterable[str], outputs: Iterable[str], n: int,
                          max_n: Optional[int] = None) -> Formula:
    """
    At most n bits leak: no 2^n + 1 paths agree on inputs yet have
    pairwise distinguishable outputs
    """
    cap = config.qif_max_n() if max_n is None else max_n
    if n < 0:
        raise PropertyError("leak bound must be non-negative")
    if n > cap:
        raise SizeCapError(f"leak bound {n} exceeds the cap {cap} ({2 ** n + 1} path quantifiers)")
    inputs, outputs = frozenset(inputs), frozenset(outputs)
    names = [f"pi{i}" for i in range(2 ** n + 1)]
    same_input = [eq_globally(inputs, v, names[0]) for v in names[1:]]
    distinct = [neq_globally(outputs, a, b) for a, b in itertools.combinations(names, 2)]
    body = conj(same_input + distinct)
    for v in reversed(names):
        body = Exists(v, body)
    return Not(body)


def observational_determinism(low_inputs: Iterable[str], low_outputs: Iterable[str],
                              v1: PathVar = 'pi1', v2: PathVar = 'pi2') -> Formula:
    """Executions that agree on low inputs are indistinguishable on low outputs"""
    body = Implies(eq_globally(low_inputs, v1, v2), eq_globally(low_outputs, v1, v2))
    return Forall(v1, Forall(v2, body))


def lattice_noninterference(levels: Sequence[Tuple[Iterable[str], Iterable[str]]]) -> Formula:
    """
    Information flows only upward through an ordered list of security levels

    levels[k] = (inputs, outputs) of level k, lowest first. The outputs of
    each level may depend on inputs of that level and the ones below it.
    """
    if not levels:
        raise PropertyError("a security lattice needs at least one level")
    statements = []
    seen_inputs: Set[str] = set()
    for inputs, outputs in levels:
        seen_inputs |= set(inputs)
        outputs = frozenset(outputs)
        if outputs:
            statements.append(_noninterference(frozenset(seen_inputs), outputs, None, 'pi1', 'pi2'))
    if not statements:
        raise PropertyError("no level declares outputs")
    return conj(statements)


def secltl_hide(high: Iterable[str], outputs: Iterable[str], inputs: Iterable[str],
                release: Formula = TRUE, v: PathVar = 'pi') -> Formula:
    """
    The hide modality at the start of v on an edge-label encoding

    Alternative paths agree with v on the visible inputs of the first step
    and on all inputs afterwards; outputs must then coincide from the first
    step on until the release condition holds.
    """
    high, inputs, outputs = frozenset(high), frozenset(inputs), frozenset(outputs)
    if not high <= inputs:
        raise PropertyError(f"hidden variables {', '.join(sorted(high - inputs))} are not inputs")
    phi = _one_path(release, v, "release condition")
    alt = _fresh_name(f"{v}_alt", all_vars(phi) | {v})
    alternative = And(Next(eq_now(inputs - high, v, alt)), Next(Next(Globally(eq_now(inputs, v, alt)))))
    kept = Or(phi, Next(WeakUntil(eq_now(outputs, v, alt), phi)))
    return Forall(alt, Implies(alternative, kept))


def secltl_property(high: Iterable[str], outputs: Iterable[str], inputs: Iterable[str],
                    release: Formula = TRUE, v: PathVar = 'pi') -> Formula:
    """Every path from the initial state satisfies the hide modality"""
    return Forall(v, secltl_hide(high, outputs, inputs, release, v))


# ==========================================
# GOGUEN-MESEGUER STATE MACHINES
# ==========================================

Command = Tuple[str, str]


@dataclass(frozen=True, eq=False)
class GmStateMachine:
    """Deterministic machine driven by (user, command) pairs, observed per user"""
    states: Tuple[str, ...]
    users: Tuple[str, ...]
    commands: Tuple[str, ...]
    outputs: Tuple[str, ...]
    do: Dict[Tuple[str, str, str], str]
    out: Dict[Tuple[str, str], str]
    init: str

    def violations(self) -> List[str]:
        issues = []
        known = set(self.states)
        if self.init not in known:
            issues.append(f"initial state {self.init} is not a state")
        for s, u, c in itertools.product(self.states, self.users, self.commands):
            target = self.do.get((s, u, c))
            if target is None:
                issues.append(f"do is undefined for ({s}, {u}, {c})")
            elif target not in known:
                issues.append(f"do({s}, {u}, {c}) = {target} is not a state")
        for s, u in itertools.product(self.states, self.users):
            value = self.out.get((s, u))
            if value is None:
                issues.append(f"out is undefined for ({s}, {u})")
            elif value not in self.outputs:
                issues.append(f"out({s}, {u}) = {value} is not a declared output")
        return issues

    def run(self, word: Iterable[Command], start: Optional[str] = None) -> str:
        state = self.init if start is None else start
        for user, command in word:
            state = self.do[(state, user, command)]
        return state

    def observe(self, word: Iterable[Command], group: Iterable[str]) -> Tuple[str, ...]:
        """out(w, G): what the users of group see after w"""
        state = self.run(word)
        return tuple(self.out[(state, u)] for u in sorted(group))


def purge(word: Iterable[Command], group: Iterable[str]) -> Tuple[Command, ...]:
    """Drop every command issued by a user in group"""
    group = frozenset(group)
    return tuple((u, c) for u, c in word if u not in group)


def make_gm(states, users, commands, outputs, do, out, init) -> GmStateMachine:
    m = GmStateMachine(tuple(states), tuple(users), tuple(commands), tuple(outputs),
                       dict(do), dict(out), init)
    issues = m.violations()
    if issues:
        raise ModelFileError('; '.join(issues))
    return m


def cmd_prop(user: str, command: str) -> str:
    return f"cmd_{user}_{command}"


def out_prop(user: str, value: str) -> str:
    return f"out_{user}_{value}"


def _gm_state(s: str, u: str, c: str) -> State:
    return f"({s},{u},{c})"


def encode_gm(m: GmStateMachine) -> KripkeStructure:
    """
    States remember the last command and who issued it

    The initial state carries only the observations; every other state is
    (s, u, c) for the machine state s reached by command c of user u.
    Only states reachable from the initial one are built.
    """
    def observations(s: str) -> Set[str]:
        return {out_prop(u, m.out[(s, u)]) for u in m.users}

    labels = {m.init: observations(m.init)}
    machine_state = {m.init: m.init}
    edges = []
    queue = deque([m.init])
    while queue:
        node = queue.popleft()
        current = machine_state[node]
        for u, c in itertools.product(m.users, m.commands):
            target = m.do[(current, u, c)]
            succ = _gm_state(target, u, c)
            edges.append((node, succ))
            if succ not in labels:
                labels[succ] = {cmd_prop(u, c)} | observations(target)
                machine_state[succ] = target
                queue.append(succ)
    aps = {cmd_prop(u, c) for u in m.users for c in m.commands}
    aps |= {out_prop(u, v) for u in m.users for v in m.outputs}
    k = make_kripke(labels.keys(), m.init, edges, aps, labels)
    logger.debug("state machine encoded: %d states, %d edges", len(k.states), k.edge_count)
    return k


def gm_noninterference(m: GmStateMachine, high: Iterable[str], low: Iterable[str],
                       v1: PathVar = 'pi1', v2: PathVar = 'pi2') -> Formula:
    """
    Users in high do not interfere with users in low, on encode_gm(m)

    v2 runs like v1 with one high command removed: the paths agree on low
    commands up to the step before the removed command, and afterwards v2
    follows v1 one step behind. From that step on the low observations of
    v1, one step ahead, must match those of v2.
    """
    high, low = frozenset(high), frozenset(low)
    unknown = (high | low) - set(m.users)
    if unknown:
        raise PropertyError(f"unknown user(s): {', '.join(sorted(unknown))}")
    low_cmds = [cmd_prop(u, c) for u in m.users if u not in high for c in m.commands]
    high_cmds = [cmd_prop(u, c) for u in sorted(high) for c in m.commands]
    low_outs = [out_prop(u, v) for u in sorted(low) for v in m.outputs]

    def same(props, ahead: bool) -> Formula:
        def left(a):
            return Next(Atom(a, v1)) if ahead else Atom(a, v1)
        return conj([Iff(left(a), Atom(a, v2)) for a in props])

    removed = And(disj([Atom(a, v1) for a in high_cmds]), Globally(same(low_cmds, ahead=True)))
    obligation = Implies(Next(removed), Globally(same(low_outs, ahead=True)))
    body = WeakUntil(same(low_cmds, ahead=False), And(Next(Not(same(low_cmds, ahead=False))), obligation))
    return Forall(v1, Forall(v2, body))


def gm_interference(m: GmStateMachine, high: Iterable[str], low: Iterable[str],
                    max_length: int) -> Optional[Tuple[Command, ...]]:
    """A command word of length <= max_length whose low view changes when high commands are removed"""
    high, low = frozenset(high), frozenset(low)
    alphabet = list(itertools.product(m.users, m.commands))
    for length in range(max_length + 1):
        for word in itertools.product(alphabet, repeat=length):
            if m.observe(word, low) != m.observe(purge(word, high), low):
                return word
    return None


def password_checker(hash_len: int = 2, leaky: bool = False) -> GmStateMachine:
    """
    Account of user A, queried by user B

    A changes the password with `chg<bits>`, B tries `login<bits>`. B sees
    whether the last login attempt succeeded; a leaky machine also shows B
    the first password bit.
    """
    if hash_len < 1:
        raise PropertyError("hash length must be at least 1")
    words = [''.join(bits) for bits in itertools.product('01', repeat=hash_len)]
    states = [f"p{w}{flag}" for w in words for flag in ('in', 'out')]
    commands = [f"chg{w}" for w in words] + [f"login{w}" for w in words]
    outputs = ['none', 'granted', 'denied', 'bit0', 'bit1']
    do, out = {}, {}
    for w in words:
        for flag in ('in', 'out'):
            s = f"p{w}{flag}"
            for x in words:
                do[(s, 'A', f"chg{x}")] = f"p{x}out"
                do[(s, 'A', f"login{x}")] = s
                do[(s, 'B', f"chg{x}")] = s
                do[(s, 'B', f"login{x}")] = f"p{w}in" if x == w else f"p{w}out"
            out[(s, 'A')] = 'none'
            if leaky and flag == 'out':
                out[(s, 'B')] = f"bit{w[0]}"
            else:
                out[(s, 'B')] = 'granted' if flag == 'in' else 'denied'
    return make_gm(states, ['A', 'B'], commands, outputs, do, out, f"p{words[0]}out")


def password_guess_free(hash_len: int, v: PathVar) -> Formula:
    """B never logs in with the current password before A changes it"""
    words = [''.join(bits) for bits in itertools.product('01', repeat=hash_len)]
    change = disj([Atom(cmd_prop('A', f"chg{w}"), v) for w in words])
    initial = WeakUntil(Not(Atom(cmd_prop('B', f"login{words[0]}"), v)), change)
    later = conj([Implies(Atom(cmd_prop('A', f"chg{w}"), v),
                          Next(WeakUntil(Not(Atom(cmd_prop('B', f"login{w}"), v)), change)))
                  for w in words])
    return And(initial, Globally(later))


def password_noninterference(m: GmStateMachine, hash_len: int,
                             v1: PathVar = 'pi1', v2: PathVar = 'pi2') -> Formula:
    """A does not interfere with B on paths where B never guesses the password"""
    ni = gm_noninterference(m, ['A'], ['B'], v1, v2)
    matrix = ni.body.body
    assumption = And(password_guess_free(hash_len, v1), password_guess_free(hash_len, v2))
    return Forall(v1, Forall(v2, Implies(assumption, matrix)))


# ==========================================
# SECLTL TRANSITION SYSTEMS
# ==========================================

Edge = Tuple[str, FrozenSet[str], str]


@dataclass(frozen=True, eq=False)
class SecLtlSystem:
    """Transition system whose edges carry the set of variables that are true on them"""
    states: Tuple[str, ...]
    init: str
    edges: Tuple[Edge, ...]
    variables: FrozenSet[str]
    inputs: FrozenSet[str]
    high: FrozenSet[str]
    outputs: FrozenSet[str]

    def outgoing(self, state: str) -> List[Edge]:
        return [e for e in self.edges if e[0] == state]

    def violations(self) -> List[str]:
        issues = []
        known = set(self.states)
        if self.init not in known:
            issues.append(f"initial state {self.init} is not a state")
        for state in self.states:
            if not self.outgoing(state):
                issues.append(f"{state} has no outgoing edge")
        for src, val, dst in self.edges:
            if src not in known or dst not in known:
                issues.append(f"edge {src} -> {dst} mentions an unknown state")
            if val - self.variables:
                issues.append(f"edge {src} -> {dst} sets undeclared {', '.join(sorted(val - self.variables))}")
        if not self.high <= self.inputs:
            issues.append("hidden variables must be inputs")
        if not (self.inputs | self.outputs) <= self.variables:
            issues.append("inputs and outputs must be declared variables")
        return issues


def make_secltl(states, init, edges, variables, inputs, high, outputs) -> SecLtlSystem:
    m = SecLtlSystem(tuple(dict.fromkeys(states)), init,
                     tuple((s, frozenset(v), t) for s, v, t in edges),
                     frozenset(variables), frozenset(inputs), frozenset(high), frozenset(outputs))
    issues = m.violations()
    if issues:
        raise ModelFileError('; '.join(issues))
    return m


SECLTL_INIT = 'init'


def _secltl_state(state: str, valuation: FrozenSet[str]) -> State:
    return f"{state}:{'.'.join(sorted(valuation))}"


def encode_secltl(m: SecLtlSystem) -> KripkeStructure:
    """
    Move edge labels onto the states they lead into

    A fresh initial state labeled with the empty set precedes the system's
    initial state, so position 1 of a path carries the first edge label.
    """
    labels: Dict[State, FrozenSet[str]] = {SECLTL_INIT: frozenset()}
    origin = {SECLTL_INIT: m.init}
    edges = []
    queue = deque([SECLTL_INIT])
    while queue:
        node = queue.popleft()
        for _, valuation, dst in m.outgoing(origin[node]):
            succ = _secltl_state(dst, valuation)
            edges.append((node, succ))
            if succ not in labels:
                labels[succ] = valuation
                origin[succ] = dst
                queue.append(succ)
    k = make_kripke(labels.keys(), SECLTL_INIT, edges, m.variables, labels)
    logger.debug("SecLTL system encoded: %d states, %d edges", len(k.states), k.edge_count)
    return k


# ==========================================
# INTERPRETED SYSTEMS
# ==========================================

Point = Tuple[str, ...]

STUTTER = 'stutter'
MOVE = 'move'


@dataclass(frozen=True, eq=False)
class InterpretedSystem:
    """Runs of m agents generated by a relation on observation tuples"""
    agents: int
    observations: Tuple[str, ...]
    aps: FrozenSet[str]
    initial: Tuple[Point, ...]
    steps: Dict[Point, Tuple[Point, ...]]
    labels: Dict[Point, FrozenSet[str]]

    def reachable(self) -> List[Point]:
        seen = list(dict.fromkeys(self.initial))
        queue = deque(seen)
        known = set(seen)
        while queue:
            point = queue.popleft()
            for succ in self.steps.get(point, ()):
                if succ not in known:
                    known.add(succ)
                    seen.append(succ)
                    queue.append(succ)
        return seen

    def violations(self) -> List[str]:
        issues = []
        if self.agents < 1:
            issues.append("an interpreted system needs at least one agent")
        if not self.initial:
            issues.append("no initial point")
        q = set(self.observations)
        points = set(self.initial) | set(self.steps) | {t for succ in self.steps.values() for t in succ}
        for point in sorted(points):
            if len(point) != self.agents or not set(point) <= q:
                issues.append(f"{_point_name(point)} is not a tuple of {self.agents} observations")
        for point in self.reachable():
            if not self.steps.get(point):
                issues.append(f"{_point_name(point)} has no successor")
            extra = self.labels.get(point, frozenset()) - self.aps
            if extra:
                issues.append(f"{_point_name(point)} is labeled with undeclared {', '.join(sorted(extra))}")
        return issues


def make_interpreted(agents, observations, aps, initial, steps, labels) -> InterpretedSystem:
    relation: Dict[Point, List[Point]] = {}
    for src, dst in steps:
        relation.setdefault(tuple(src), []).append(tuple(dst))
    i = InterpretedSystem(agents, tuple(observations), frozenset(aps),
                          tuple(tuple(p) for p in initial),
                          {p: tuple(dict.fromkeys(succ)) for p, succ in relation.items()},
                          {tuple(p): frozenset(v) for p, v in labels.items()})
    issues = i.violations()
    if issues:
        raise ModelFileError('; '.join(issues))
    return i


def _point_name(point: Point) -> str:
    return '(' + ','.join(point) + ')'


def obs_prop(agent: int, observation: str) -> str:
    return f"obs{agent}_{observation}"


def clock_prop(step: int) -> str:
    return f"clk{step}"


def observer_props(i: InterpretedSystem, agent: int, clock: Optional[int] = None) -> FrozenSet[str]:
    """Propositions that make up what agent (1-based) observes in encode_interpreted(i)"""
    if not 1 <= agent <= i.agents:
        raise PropertyError(f"agent {agent} out of range 1..{i.agents}")
    props = {obs_prop(agent, q) for q in i.observations}
    if clock is not None:
        props |= {clock_prop(n) for n in range(clock + 1)}
    return frozenset(props)


INTERPRETED_INIT = 'init'


def encode_interpreted(i: InterpretedSystem, stuttering: bool = False,
                       clock: Optional[int] = None) -> KripkeStructure:
    """
    Kripke structure of an interpreted system

    A fresh initial state leads to the initial points. Each state carries
    the system labels plus every agent's local observation. With `clock`,
    states are paired with the step number, saturating at `clock`, so that
    all agents observe time. With `stuttering`, every state is split into a
    stutter and a move copy: moves enter move copies, and each state may
    stutter into its own stutter copy.
    """
    def name(point: Point, step: Optional[int]) -> State:
        return _point_name(point) if step is None else f"{_point_name(point)}@{step}"

    def observed(point: Point, step: Optional[int]) -> Set[str]:
        props = set(i.labels.get(point, ())) | {obs_prop(a + 1, q) for a, q in enumerate(point)}
        if step is not None:
            props.add(clock_prop(step))
        return props

    first = None if clock is None else 0
    labels: Dict[State, Set[str]] = {INTERPRETED_INIT: set()}
    edges = []
    queue = deque()
    for point in i.initial:
        node = name(point, first)
        edges.append((INTERPRETED_INIT, node))
        if node not in labels:
            labels[node] = observed(point, first)
            queue.append((point, first))
    while queue:
        point, step = queue.popleft()
        nxt = None if step is None else min(step + 1, clock)
        for succ in i.steps[point]:
            node = name(succ, nxt)
            edges.append((name(point, step), node))
            if node not in labels:
                labels[node] = observed(succ, nxt)
                queue.append((succ, nxt))
    aps = set(i.aps) | {obs_prop(a + 1, q) for a in range(i.agents) for q in i.observations}
    if clock is not None:
        aps |= {clock_prop(n) for n in range(clock + 1)}
    k = make_kripke(labels.keys(), INTERPRETED_INIT, edges, aps, labels)
    if stuttering:
        k = stutter_extension(k)
    logger.debug("interpreted system encoded: %d states, %d edges", len(k.states), k.edge_count)
    return k


def stutter_extension(k: KripkeStructure) -> KripkeStructure:
    """S x {stutter, move}; moves follow k, and every state may repeat itself as a stutter step"""
    clash = {STUTTER, MOVE} & k.aps
    if clash:
        raise PropertyError(f"structure already uses {', '.join(sorted(clash))}")

    def name(state: State, marker: str) -> State:
        return f"{state}~{marker}"

    states, edges, labels = [], [], {}
    for state in k.states:
        for marker in (STUTTER, MOVE):
            node = name(state, marker)
            states.append(node)
            labels[node] = set(k.label(state)) | {marker}
            edges.append((node, name(state, STUTTER)))
            edges.extend((node, name(succ, MOVE)) for succ in k.successors(state))
    return make_kripke(states, name(k.init, STUTTER), edges, set(k.aps) | {STUTTER, MOVE}, labels)


# ==========================================
# KNOWLEDGE ELIMINATION
# ==========================================

Prefix = List[Tuple[str, PathVar]]


def _leading_prefix(f: Formula) -> Tuple[Prefix, Formula]:
    node = to_nnf(f)
    prefix: Prefix = []
    while True:
        if isinstance(node, Exists):
            prefix.append(('E', node.var))
            node = node.body
        elif isinstance(node, Not) and isinstance(node.body, Exists):
            prefix.append(('A', node.body.var))
            node = to_nnf(Not(node.body.body))
        else:
            break
    if has_quantifier(node):
        raise PropertyError("knowledge elimination needs every path quantifier in front")
    return prefix, node


def _innermost_knowledge(f: Formula) -> Tuple[Formula, bool]:
    """An occurrence K_P psi (or its negation) whose psi has no knowledge; flag says negated"""
    for node, parent in _postorder(f, None):
        if isinstance(node, Knows) and not has_knowledge(node.body):
            if isinstance(parent, Not):
                return parent, True
            return node, False
    raise PropertyError("no knowledge operator left")


def _postorder(f: Formula, parent: Optional[Formula]):
    for child in children(f):
        yield from _postorder(child, f)
    yield f, parent


def _replace_once(f: Formula, target: Formula, replacement: Formula) -> Formula:
    done = False

    def walk(node: Formula) -> Formula:
        nonlocal done
        if done:
            return node
        if node is target:
            done = True
            return replacement
        kids = children(node)
        if not kids:
            return node
        return rebuild(node, [walk(c) for c in kids])

    return walk(f)


def progress(v: PathVar) -> Formula:
    """The path does not stutter forever"""
    return Globally(Eventually(Atom(MOVE, v)))


def synch(props: Iterable[str], v1: PathVar, v2: PathVar, within: Optional[Formula] = None) -> Formula:
    """Observations on props change on v1 exactly when they change on v2, on steps into `within` if given"""
    def changes(v):
        return Not(conj([Iff(Atom(a, v), Next(Atom(a, v))) for a in sorted(props)]))
    step = Iff(changes(v1), changes(v2))
    if within is not None:
        step = Implies(Next(within), step)
    return Globally(step)


def eliminate_knowledge(f: Formula, mode: str = 'sync',
                        kripke: Optional[KripkeStructure] = None) -> Formula:
    """
    Replace every K_P operator by fresh propositions and path quantifiers

    Each occurrence becomes a proposition u on a new existential path; a
    universally chosen marker path fixes, through the prefix on which its
    proposition t holds, how far the observed path is compared with an
    alternative one. Occurrences are removed innermost first. In 'async'
    mode the alternative paths must keep moving and, on the compared prefix,
    change observations in step with the observed path; this needs a
    stutter-extended structure.
    """
    if mode not in KNOWLEDGE_MODES:
        raise ModeError(f"unknown knowledge mode {mode!r}")
    if mode == 'async' and kripke is not None and MOVE not in kripke.aps:
        raise ModeError("asynchronous knowledge needs a stutter-extended structure")
    if not has_knowledge(f):
        return f
    prefix, matrix = _leading_prefix(f)
    if not prefix:
        raise PropertyError("knowledge needs a quantified path to observe")
    subject = prefix[-1][1]
    used_props = set(props_of(f)) | (set(kripke.aps) if kripke is not None else set())
    used_vars = set(all_vars(f))

    def fresh(base: str, used: Set[str]) -> str:
        name = _fresh_name(base, used)
        used.add(name)
        return name

    while has_knowledge(matrix):
        target, negated = _innermost_knowledge(matrix)
        knows = target.body if negated else target
        t = fresh('t', used_props)
        u = fresh('u', used_props)
        label = fresh('pi_u', used_vars)
        picker = fresh('pi_t', used_vars)
        other = fresh('pi_k', used_vars)
        marked, chosen = Atom(t, picker), Atom(u, label)
        psi = rename_index(knows.body, subject, other)
        agree = Globally(Implies(marked, eq_now(knows.props, subject, other)))
        if mode == 'async':
            in_step = synch(knows.props, subject, other, within=marked)
            agree = And(And(progress(other), in_step), agree)
        if negated:
            last = And(marked, Next(Globally(Not(marked))))
            guard = Until(marked, And(last, chosen))
            check = Implies(guard, And(agree, Eventually(And(last, Not(psi)))))
            inner = 'E'
        else:
            guard = Until(marked, Globally(Not(marked)))
            check = Implies(guard, Implies(agree, Globally(Implies(And(marked, chosen), psi))))
            inner = 'A'
        matrix = And(_replace_once(matrix, target, chosen), check)
        prefix = prefix + [('E', label), ('A', picker), (inner, other)]
        logger.debug("eliminated %s knowledge of %s", 'negated' if negated else 'positive',
                     ','.join(sorted(knows.props)))

    result = matrix
    for polarity, var in reversed(prefix):
        result = Exists(var, result) if polarity == 'E' else Forall(var, result)
    return result


# ==========================================
# DESCRIPTION FILES
# ==========================================

_NAME = r'[A-Za-z0-9]+'
_GM_DO = re.compile(rf'^do\s+({_NAME})\s+({_NAME})\s+({_NAME})\s*->\s*({_NAME})$')
_GM_OUT = re.compile(rf'^out\s+({_NAME})\s+({_NAME})\s*->\s*({_NAME})$')
_LIST = re.compile(r'^(states|init|users|commands|outputs|vars|inputs|high|agents|obs|aps)\b(.*)$')
_SECLTL_EDGE = re.compile(rf'^edge\s+({_NAME})\s*\{{([^}}]*)\}}\s*({_NAME})$')
_ASSIGN = re.compile(rf'^({_NAME})\s*=\s*([01])$')
_POINT = r'\(([^)]*)\)'
_IS_STEP = re.compile(rf'^step\s+{_POINT}\s*->\s*{_POINT}$')
_IS_INIT = re.compile(rf'^init\s+{_POINT}$')
_IS_LABEL = re.compile(rf'^label\s+{_POINT}\s*\{{([^}}]*)\}}$')
_NAME_ONLY = re.compile(rf'^{_NAME}$')


def _lines(text: str):
    for number, raw in enumerate(text.split('\n'), start=1):
        line = raw.split('#', 1)[0].strip()
        if line:
            yield number, line


def _names(rest: str, number: int) -> List[str]:
    names = rest.replace(',', ' ').split()
    for name in names:
        if not _NAME_ONLY.match(name):
            raise ModelFileError(f"invalid name {name!r} (letters and digits only)", number)
    return names


def _declare(lists: Dict[str, List[str]], key: str, rest: str, number: int):
    if key in lists:
        raise ModelFileError(f"'{key}' declared twice", number)
    lists[key] = _names(rest, number)


def _required(lists: Dict[str, List[str]], *keys: str):
    for key in keys:
        if key not in lists:
            raise ModelFileError(f"missing '{key}' declaration")


def parse_gm(text: str) -> GmStateMachine:
    """
    Parse a state-machine description

    `states`, `init`, `users`, `commands`, `outputs` list names;
    `do s u c -> s'` and `out s u -> v` define the two functions.
    """
    lists: Dict[str, List[str]] = {}
    do, out = {}, {}
    for number, line in _lines(text):
        match = _GM_DO.match(line)
        if match:
            s, u, c, target = match.groups()
            if (s, u, c) in do:
                raise ModelFileError(f"do({s}, {u}, {c}) defined twice", number)
            do[(s, u, c)] = target
            continue
        match = _GM_OUT.match(line)
        if match:
            s, u, value = match.groups()
            if (s, u) in out:
                raise ModelFileError(f"out({s}, {u}) defined twice", number)
            out[(s, u)] = value
            continue
        match = _LIST.match(line)
        if match and match.group(1) in ('states', 'init', 'users', 'commands', 'outputs'):
            _declare(lists, match.group(1), match.group(2), number)
            continue
        raise ModelFileError(f"cannot parse {line!r}", number)
    _required(lists, 'states', 'init', 'users', 'commands', 'outputs')
    if len(lists['init']) != 1:
        raise ModelFileError("'init' names exactly one state")
    m = make_gm(lists['states'], lists['users'], lists['commands'], lists['outputs'],
                do, out, lists['init'][0])
    logger.debug("parsed state machine: %d states, %d users, %d commands",
                 len(m.states), len(m.users), len(m.commands))
    return m


def format_gm(m: GmStateMachine) -> str:
    lines = [f"states {' '.join(m.states)}", f"init {m.init}", f"users {' '.join(m.users)}",
             f"commands {' '.join(m.commands)}", f"outputs {' '.join(m.outputs)}"]
    for (s, u, c), target in m.do.items():
        lines.append(f"do {s} {u} {c} -> {target}")
    for (s, u), value in m.out.items():
        lines.append(f"out {s} {u} -> {value}")
    return '\n'.join(lines) + '\n'


def parse_secltl(text: str) -> SecLtlSystem:
    """
    Parse a SecLTL transition system

    `vars`, `inputs`, `high`, `outputs`, `init` and an optional `states`
    list; `edge s {x=1,y=0} t` adds an edge, unmentioned variables are 0.
    """
    lists: Dict[str, List[str]] = {}
    edges = []
    for number, line in _lines(text):
        match = _SECLTL_EDGE.match(line)
        if match:
            src, body, dst = match.groups()
            true_vars = set()
            for item in filter(None, (p.strip() for p in body.split(','))):
                assign = _ASSIGN.match(item)
                if not assign:
                    raise ModelFileError(f"invalid assignment {item!r}", number)
                if assign.group(2) == '1':
                    true_vars.add(assign.group(1))
            edges.append((src, true_vars, dst, number))
            continue
        match = _LIST.match(line)
        if match and match.group(1) in ('states', 'init', 'vars', 'inputs', 'high', 'outputs'):
            _declare(lists, match.group(1), match.group(2), number)
            continue
        raise ModelFileError(f"cannot parse {line!r}", number)
    _required(lists, 'vars', 'inputs', 'outputs', 'init')
    if len(lists['init']) != 1:
        raise ModelFileError("'init' names exactly one state")
    variables = set(lists['vars'])
    for src, true_vars, dst, number in edges:
        if true_vars - variables:
            raise ModelFileError(f"undeclared variable(s) {', '.join(sorted(true_vars - variables))}", number)
    states = list(lists.get('states', []))
    states += [lists['init'][0]] + [n for src, _, dst, _ in edges for n in (src, dst)]
    return make_secltl(states, lists['init'][0], [(s, v, t) for s, v, t, _ in edges],
                       variables, lists['inputs'], lists.get('high', []), lists['outputs'])


def _point(body: str, number: int) -> Point:
    return tuple(_names(body, number))


def parse_interpreted(text: str) -> InterpretedSystem:
    """
    Parse an interpreted system

    `agents m`, `obs q1 q2 ...` (local observations), `aps ...`,
    `init (q,..)` per initial point, `step (q,..) -> (q',..)` per pair of
    the generating relation, `label (q,..) {a b}`.
    """
    lists: Dict[str, List[str]] = {}
    initial, steps, labels = [], [], {}
    for number, line in _lines(text):
        match = _IS_INIT.match(line)
        if match:
            initial.append(_point(match.group(1), number))
            continue
        match = _IS_STEP.match(line)
        if match:
            steps.append((_point(match.group(1), number), _point(match.group(2), number)))
            continue
        match = _IS_LABEL.match(line)
        if match:
            point = _point(match.group(1), number)
            if point in labels:
                raise ModelFileError(f"{_point_name(point)} labeled twice", number)
            labels[point] = _names(match.group(2), number)
            continue
        match = _LIST.match(line)
        if match and match.group(1) in ('agents', 'obs', 'aps'):
            _declare(lists, match.group(1), match.group(2), number)
            continue
        raise ModelFileError(f"cannot parse {line!r}", number)
    _required(lists, 'agents', 'obs')
    if len(lists['agents']) != 1 or not lists['agents'][0].isdigit():
        raise ModelFileError("'agents' takes a single number")
    return make_interpreted(int(lists['agents'][0]), lists['obs'], lists.get('aps', []),
                            initial, steps, labels)
