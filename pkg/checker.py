"""
Model-checking engines

The automata engine decides prenex specifications exactly by eliminating
quantifier blocks innermost-first. The bounded engine evaluates the
satisfaction relation directly over lasso-shaped paths and handles
everything else (quantifiers under temporal operators, knowledge).
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import config
from automata import (LassoWord, complement, find_accepting_lasso, intersect, lazy,
                      lazy_intersect, ltl_to_nba, project, var_automaton)
from errors import HyperscopeError, NotPrenexError
from formula import (And, Atom, Exists, FalseConst, Formula, Iff, Implies, Knows, Next, Not,
                     NotPrenexable, Or, Release, Specification, TrueConst, UnboundVariableError,
                     Until, free_vars, has_knowledge, indexed_props, prenex, print_formula,
                     props_of, split_prefix, to_nnf)
from kripke import (KripkeStructure, Lasso, State, enumerate_lassos, is_deterministic, tag)

logger = logging.getLogger(__name__)


class Outcome(str, Enum):
    HOLDS = 'holds'
    FAILS = 'fails'
    UNKNOWN = 'unknown'


class ModeError(HyperscopeError):
    pass


KNOWLEDGE_MODES = ('sync', 'async')
ENGINES = ('auto', 'automata', 'bounded')


@dataclass(frozen=True)
class CheckOptions:
    engine: str = 'auto'
    stem_bound: Optional[int] = None
    loop_bound: Optional[int] = None
    assume_complete: bool = False
    knowledge_mode: str = 'async'
    state_cap: Optional[int] = None
    jobs: int = 1

    def bounds(self) -> Tuple[int, int]:
        stem = config.stem_bound() if self.stem_bound is None else self.stem_bound
        loop = config.loop_bound() if self.loop_bound is None else self.loop_bound
        return stem, loop


@dataclass(frozen=True)
class Verdict:
    """Outcome of checking one formula (or a whole specification)"""
    outcome: Outcome
    engine: str
    witness: Optional[Tuple[Lasso, ...]] = None
    witness_vars: Tuple[str, ...] = ()
    bounds: Optional[Tuple[int, int]] = None
    formula: str = ''
    elapsed_ms: float = 0.0
    note: str = ''
    leaves: Tuple['Verdict', ...] = ()

    @property
    def holds(self) -> bool:
        return self.outcome is Outcome.HOLDS


# ==========================================
# KLEENE LOGIC
# ==========================================

Truth = Optional[bool]


def k_not(a: Truth) -> Truth:
    return None if a is None else not a


def k_and(a: Truth, b: Truth) -> Truth:
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def k_or(a: Truth, b: Truth) -> Truth:
    return k_not(k_and(k_not(a), k_not(b)))


def to_outcome(value: Truth) -> Outcome:
    if value is None:
        return Outcome.UNKNOWN
    return Outcome.HOLDS if value else Outcome.FAILS


def to_truth(outcome: Outcome) -> Truth:
    if outcome is Outcome.UNKNOWN:
        return None
    return outcome is Outcome.HOLDS


# ==========================================
# PATH ASSIGNMENTS AND DOMAINS
# ==========================================

@dataclass(frozen=True)
class PathAssignment:
    """
    Tuple of bound paths plus the current time

    Each path remembers the time it was bound at; its position at time t
    is t - start, so shifting the tuple is just advancing `time`.
    """
    vars: Tuple[str, ...] = ()
    paths: Tuple[Lasso, ...] = ()
    starts: Tuple[int, ...] = ()
    time: int = 0

    def bind(self, var: str, path: Lasso) -> 'PathAssignment':
        return PathAssignment(self.vars + (var,), self.paths + (path,), self.starts + (self.time,), self.time)

    def shift(self, n: int = 1) -> 'PathAssignment':
        return replace(self, time=self.time + n)

    def rebind_last(self, path: Lasso) -> 'PathAssignment':
        return replace(self, paths=self.paths[:-1] + (path,))

    def lookup(self, var: str) -> int:
        for i in range(len(self.vars) - 1, -1, -1):
            if self.vars[i] == var:
                return i
        raise UnboundVariableError(f"path variable {var!r} is not bound")

    def position(self, i: int) -> int:
        return self.time - self.starts[i]

    def state(self, var: str) -> State:
        i = self.lookup(var)
        return self.paths[i].state(self.position(i))

    def valuation(self, var: str) -> FrozenSet[str]:
        i = self.lookup(var)
        return self.paths[i].valuation(self.position(i))

    def signature(self) -> Tuple[int, ...]:
        """Normalized positions: equal signatures have equal futures"""
        return tuple(p.index(self.time - s) for p, s in zip(self.paths, self.starts))


class LassoDomain:
    """Bounded lassos of a structure, enumerated once per start state"""

    def __init__(self, k: KripkeStructure, free: Iterable[str], stem_bound: int, loop_bound: int,
                 assume_complete: bool = False, var_free: Optional[Dict[str, FrozenSet[str]]] = None):
        if stem_bound < 0 or loop_bound < 1:
            raise ValueError("bounds must be at least (0, 1)")
        self.k = k
        self.free = frozenset(free)
        self.stem_bound = stem_bound
        self.loop_bound = loop_bound
        self.assume_complete = assume_complete
        self.var_free = var_free
        self._paths: Dict[Tuple[State, FrozenSet[str]], Tuple[Lasso, ...]] = {}

    def free_for(self, var: Optional[str]) -> FrozenSet[str]:
        """Free propositions a path bound to var may carry"""
        if self.var_free is None or var is None:
            return self.free
        return self.var_free.get(var, frozenset())

    def paths(self, state: State, var: Optional[str] = None) -> Tuple[Lasso, ...]:
        free = self.free_for(var)
        key = (state, free)
        if key not in self._paths:
            self._paths[key] = tuple(enumerate_lassos(self.k, state, free, self.stem_bound,
                                                      self.loop_bound, distinct=True))
            logger.debug("domain from %s over %s: %d lassos", state, sorted(free), len(self._paths[key]))
        return self._paths[key]

    def exhaustive(self, state: State, var: Optional[str] = None) -> bool:
        """Every path from state is represented"""
        if self.assume_complete:
            return True
        return not self.free_for(var) and is_deterministic(self.k, state) and bool(self.paths(state, var))


class ExplicitDomain:
    """A fixed set of paths; treated as the complete path set"""

    def __init__(self, paths: Sequence[Lasso]):
        self._all = tuple(paths)

    def paths(self, state: State, var: Optional[str] = None) -> Tuple[Lasso, ...]:
        return tuple(p for p in self._all if p.state(0) == state)

    def exhaustive(self, state: State, var: Optional[str] = None) -> bool:
        return True


# ==========================================
# DIRECT SEMANTICS
# ==========================================

def trace_positions(valuations: Sequence[FrozenSet[str]], props: Iterable[str]) -> List[int]:
    """Positions kept when collapsing consecutive repeats of the P-restricted valuation"""
    props = frozenset(props)
    kept = []
    last = None
    for i, val in enumerate(valuations):
        view = val & props
        if i == 0 or view != last:
            kept.append(i)
        last = view
    return kept


def observed_trace(path: Lasso, upto: int, props: Iterable[str]) -> Tuple[FrozenSet[str], ...]:
    props = frozenset(props)
    vals = [path.valuation(j) & props for j in range(upto + 1)]
    return tuple(vals[j] for j in trace_positions(vals, props))


class Evaluator:
    """
    Three-valued evaluation of NNF formulas over path assignments

    True and False are definite; None means the bounded domain could not
    settle a quantifier or knowledge operator.
    """

    def __init__(self, k: KripkeStructure, domain, knowledge_mode: str = 'async',
                 history_window: int = 32):
        if knowledge_mode not in KNOWLEDGE_MODES:
            raise ModeError(f"unknown knowledge mode {knowledge_mode!r}")
        self.k = k
        self.domain = domain
        self.knowledge_mode = knowledge_mode
        self.history_window = history_window
        self._memo: Dict[tuple, Truth] = {}
        self._historic: Dict[int, bool] = {}
        self._keep: List[Formula] = []

    def _is_historic(self, f: Formula) -> bool:
        """Knowledge depends on the whole prefix, not just the normalized position"""
        key = id(f)
        if key not in self._historic:
            self._historic[key] = has_knowledge(f)
        return self._historic[key]

    def _key(self, f: Formula, assign: PathAssignment):
        if not assign.paths:
            return (id(f),)
        if self._is_historic(f):
            return (id(f), tuple(id(p) for p in assign.paths), assign.starts, assign.time)
        return (id(f), tuple(id(p) for p in assign.paths), assign.signature())

    def evaluate(self, f: Formula, assign: PathAssignment) -> Truth:
        if isinstance(f, Atom):
            return f.prop in assign.valuation(f.var)
        if isinstance(f, TrueConst):
            return True
        if isinstance(f, FalseConst):
            return False
        key = self._key(f, assign)
        if key in self._memo:
            return self._memo[key]
        self._keep.append(f)
        value = self._evaluate(f, assign)
        self._memo[key] = value
        return value

    def _evaluate(self, f: Formula, assign: PathAssignment) -> Truth:
        if isinstance(f, Not):
            return k_not(self.evaluate(f.body, assign))
        if isinstance(f, And):
            left = self.evaluate(f.left, assign)
            if left is False:
                return False
            return k_and(left, self.evaluate(f.right, assign))
        if isinstance(f, Or):
            left = self.evaluate(f.left, assign)
            if left is True:
                return True
            return k_or(left, self.evaluate(f.right, assign))
        if isinstance(f, Next):
            return self.evaluate(f.body, assign.shift())
        if isinstance(f, Until):
            return self._until(f.left, f.right, assign, release=False)
        if isinstance(f, Release):
            return self._until(f.left, f.right, assign, release=True)
        if isinstance(f, Exists):
            return self._exists(f, assign)
        if isinstance(f, Knows):
            return self._knows(f, assign)
        raise ValueError(f"not an NNF formula node: {print_formula(f)}")

    def _until(self, left: Formula, right: Formula, assign: PathAssignment, release: bool) -> Truth:
        """
        Walk forward until the joint position repeats; R is the dual of U

        With knowledge inside, positions that repeat may still differ in
        history, so the walk runs `history_window` extra steps and gives up
        with None if the answer is still open.
        """
        historic = bool(assign.paths) and (self._is_historic(left) or self._is_historic(right))
        result: Truth = False
        prefix: Truth = True
        seen = set()
        extra = 0
        current = assign
        while True:
            sig = current.signature()
            if sig in seen:
                if not historic:
                    break
                extra += 1
                if extra > self.history_window:
                    result = k_or(result, k_and(prefix, None))
                    break
            seen.add(sig)
            goal = self.evaluate(right, current)
            if release:
                goal = k_not(goal)
            result = k_or(result, k_and(prefix, goal))
            if result is True:
                break
            hold = self.evaluate(left, current)
            if release:
                hold = k_not(hold)
            prefix = k_and(prefix, hold)
            if prefix is False:
                break
            current = current.shift()
        return k_not(result) if release else result

    def _branch_state(self, assign: PathAssignment) -> State:
        if not assign.paths:
            return self.k.init
        return assign.paths[-1].state(assign.position(len(assign.paths) - 1))

    def _exists(self, f: Exists, assign: PathAssignment) -> Truth:
        start = self._branch_state(assign)
        result: Truth = False
        for path in self.domain.paths(start, f.var):
            value = self.evaluate(f.body, assign.bind(f.var, path))
            if value is True:
                return True
            if value is None:
                result = None
        if result is False and not self.domain.exhaustive(start, f.var):
            return None
        return result

    def witness(self, f: Exists, assign: PathAssignment) -> Optional[Lasso]:
        for path in self.domain.paths(self._branch_state(assign), f.var):
            if self.evaluate(f.body, assign.bind(f.var, path)) is True:
                return path
        return None

    def _indistinguishable(self, path: Lasso, other: Lasso, upto: int, props: FrozenSet[str]) -> bool:
        if self.knowledge_mode == 'sync':
            return all(path.valuation(j) & props == other.valuation(j) & props for j in range(upto + 1))
        return observed_trace(path, upto, props) == observed_trace(other, upto, props)

    def _knows(self, f: Knows, assign: PathAssignment) -> Truth:
        if not assign.paths:
            raise UnboundVariableError("knowledge operator needs a bound path")
        last = len(assign.paths) - 1
        path = assign.paths[last]
        upto = assign.position(last)
        start = path.state(0)
        var = assign.vars[last]
        candidates = list(self.domain.paths(start, var))
        if path not in candidates:
            candidates.append(path)
        result: Truth = True
        for other in candidates:
            if not self._indistinguishable(path, other, upto, f.props):
                continue
            value = self.evaluate(f.body, assign.rebind_last(other))
            if value is False:
                return False
            if value is None:
                result = None
        if result is True and not self.domain.exhaustive(start, var):
            return None
        return result


def _bind_all(assign: Optional[PathAssignment], f: Formula) -> PathAssignment:
    assign = assign or PathAssignment()
    missing = free_vars(f) - set(assign.vars)
    if missing:
        raise UnboundVariableError(f"unbound path variable(s): {', '.join(sorted(missing))}")
    return assign


def evaluate_semantics(assign: PathAssignment, f: Formula, k: KripkeStructure, domain,
                       knowledge_mode: str = 'async') -> bool:
    """Satisfaction of f under assign, quantifiers ranging over domain taken as complete"""
    assign = _bind_all(assign, f)
    evaluator = Evaluator(k, _Complete(domain), knowledge_mode)
    return bool(evaluator.evaluate(to_nnf(f), assign))


def evaluate_knowledge(assign: PathAssignment, f: Formula, k: KripkeStructure, domain,
                       mode: str = 'async') -> bool:
    """Satisfaction of a formula with K_P operators; mode picks positionwise or trace equivalence"""
    if mode not in KNOWLEDGE_MODES:
        raise ModeError(f"unknown knowledge mode {mode!r}")
    return evaluate_semantics(assign, f, k, domain, knowledge_mode=mode)


class _Complete:
    def __init__(self, domain):
        self._domain = domain

    def paths(self, state, var=None):
        return self._domain.paths(state, var)

    def exhaustive(self, state, var=None):
        return True


# ==========================================
# BOUNDED ENGINE
# ==========================================

def _bounded_witness(evaluator: Evaluator, nnf: Formula, value: Truth):
    """Paths for the leading quantifier chain: witnesses for exists, counterexamples for forall"""
    node = nnf
    if value is False and isinstance(node, Not) and isinstance(node.body, Exists):
        node = node.body
    elif value is not True or not isinstance(node, Exists):
        return None, ()
    paths, names = [], []
    assign = PathAssignment()
    while isinstance(node, Exists):
        path = evaluator.witness(node, assign)
        if path is None:
            break
        paths.append(path)
        names.append(node.var)
        assign = assign.bind(node.var, path)
        node = node.body
    return (tuple(paths), tuple(names)) if paths else (None, ())


def check_bounded(k: KripkeStructure, f: Formula, free: Iterable[str] = (),
                  stem_bound: Optional[int] = None, loop_bound: Optional[int] = None,
                  options: Optional[CheckOptions] = None) -> Verdict:
    """Direct evaluation with quantifiers ranging over bounded lassos"""
    options = options or CheckOptions()
    default_stem, default_loop = options.bounds()
    stem_bound = default_stem if stem_bound is None else stem_bound
    loop_bound = default_loop if loop_bound is None else loop_bound
    if stem_bound < 1 or loop_bound < 1:
        raise ValueError("bounded engine needs bounds >= (1, 1)")
    started = time.perf_counter()
    free = frozenset(free)
    var_free: Dict[str, set] = {}
    for prop, var in indexed_props(f):
        if prop in free:
            var_free.setdefault(var, set()).add(prop)
    domain = LassoDomain(k, free, stem_bound, loop_bound, options.assume_complete,
                         var_free={v: frozenset(ps) for v, ps in var_free.items()})
    evaluator = Evaluator(k, domain, options.knowledge_mode)
    nnf = to_nnf(f)
    value = evaluator.evaluate(nnf, PathAssignment())
    witness, names = _bounded_witness(evaluator, nnf, value)
    if value is None:
        logger.warning("bounded engine inconclusive at bounds (%d, %d): %s",
                       stem_bound, loop_bound, print_formula(f))
    return Verdict(
        outcome=to_outcome(value),
        engine='bounded',
        witness=witness,
        witness_vars=names,
        bounds=(stem_bound, loop_bound),
        formula=print_formula(f),
        elapsed_ms=(time.perf_counter() - started) * 1000.0,
    )


# ==========================================
# AUTOMATA ENGINE
# ==========================================

def _blocks(prefix: Sequence[Tuple[str, str]]) -> List[Tuple[str, List[str]]]:
    blocks: List[Tuple[str, List[str]]] = []
    for polarity, var in prefix:
        if blocks and blocks[-1][0] == polarity:
            blocks[-1][1].append(var)
        else:
            blocks.append((polarity, [var]))
    return blocks


def _decode_witness(k: KripkeStructure, word: LassoWord, variables: Sequence[str],
                    free: Dict[str, FrozenSet[str]]) -> Tuple[Lasso, ...]:
    """Recover one Kripke lasso per variable from a run of the nested product"""

    def states_of(run_state):
        result = {}
        node = run_state
        for var in reversed(variables):
            node, kripke_state, _ = node
            result[var] = kripke_state
        return result

    def positions(edges, letters, var):
        out = []
        for (_, dst), letter in zip(edges, letters):
            s = states_of(dst)[var]
            extra = {p for p in free[var] if tag(p, var) in letter}
            out.append((s, k.label(s) | frozenset(extra)))
        return tuple(out)

    return tuple(Lasso(positions(word.run_stem, word.stem, v), positions(word.run_loop, word.loop, v))
                 for v in variables)


def check_prenex(k: KripkeStructure, f: Formula, free: Iterable[str] = (),
                 cap: Optional[int] = None) -> Verdict:
    """
    Exact check of a prenex formula by quantifier elimination

    Each maximal same-polarity block costs one product and one projection;
    complementation happens only between blocks. A single-block prefix is
    decided on the fly without building the product.
    """
    started = time.perf_counter()
    prefix, matrix = split_prefix(f)
    if not prefix:
        raise NotPrenexError("formula has no leading quantifier", f)
    matrix = to_nnf(matrix)
    leftover = prenex(matrix)
    if isinstance(leftover, NotPrenexable) or split_prefix(leftover)[0]:
        raise NotPrenexError("matrix is not quantifier-free", matrix)
    free = frozenset(free)
    used = indexed_props(matrix)
    var_free = {v: frozenset(p for p, w in used if w == v and p in free) for _, v in prefix}
    blocks = _blocks(prefix)

    innermost = blocks[-1][0]
    body = matrix if innermost == 'E' else to_nnf(Not(matrix))
    current = ltl_to_nba(body, cap=cap)
    word = None
    for depth in range(len(blocks) - 1, -1, -1):
        polarity, variables = blocks[depth]
        if depth < len(blocks) - 1:
            current = complement(current, cap=cap)
        if depth == 0:
            stage = lazy(current)
            for v in variables:
                stage = lazy_intersect(stage, lazy(var_automaton(k, v, var_free[v])))
            word = find_accepting_lasso(stage, cap=cap)
            break
        for v in variables:
            current = intersect(current, var_automaton(k, v, var_free[v]), cap=cap)
        block_props = {tag(a, v) for v in variables for a in k.aps | var_free[v]}
        current = project(current, block_props & current.alphabet)
        logger.debug("block %s%s eliminated: %d states", polarity, ','.join(variables), len(current))

    outer_polarity, outer_vars = blocks[0]
    nonempty = word is not None
    holds = nonempty if outer_polarity == 'E' else not nonempty
    witness = _decode_witness(k, word, outer_vars, var_free) if word is not None else None
    return Verdict(
        outcome=Outcome.HOLDS if holds else Outcome.FAILS,
        engine='automata',
        witness=witness,
        witness_vars=tuple(outer_vars) if witness else (),
        formula=print_formula(f),
        elapsed_ms=(time.perf_counter() - started) * 1000.0,
    )


# ==========================================
# SPECIFICATIONS
# ==========================================

def _check_leaf(k: KripkeStructure, leaf: Formula, options: CheckOptions) -> Verdict:
    free = props_of(leaf) - k.aps
    if options.engine not in ENGINES:
        raise ModeError(f"unknown engine {options.engine!r}")
    if options.engine != 'bounded':
        pulled = prenex(leaf)
        if not isinstance(pulled, NotPrenexable):
            logger.info("automata engine: %s", print_formula(leaf))
            verdict = check_prenex(k, pulled, free, cap=options.state_cap)
            return replace(verdict, formula=print_formula(leaf))
        if options.engine == 'automata':
            raise NotPrenexError(str(pulled), pulled.node)
        logger.info("bounded engine (%s): %s", pulled.reason, print_formula(leaf))
    return check_bounded(k, leaf, free, options=options)


def _check_leaf_job(args):
    return _check_leaf(*args)


def _combine(node: Formula, leaf_verdicts: Dict[Formula, Verdict]) -> Tuple[Truth, Optional[Verdict]]:
    """Kleene value of a specification node plus the leaf verdict that explains it"""
    if node in leaf_verdicts:
        verdict = leaf_verdicts[node]
        return to_truth(verdict.outcome), verdict
    if isinstance(node, Not):
        value, source = _combine(node.body, leaf_verdicts)
        return k_not(value), source
    if isinstance(node, Implies):
        return _combine(Or(Not(node.left), node.right), leaf_verdicts)
    if isinstance(node, Iff):
        left, _ = _combine(node.left, leaf_verdicts)
        right, _ = _combine(node.right, leaf_verdicts)
        return k_or(k_and(left, right), k_and(k_not(left), k_not(right))), None
    if isinstance(node, (And, Or)):
        left, left_src = _combine(node.left, leaf_verdicts)
        right, right_src = _combine(node.right, leaf_verdicts)
        if isinstance(node, And):
            value = k_and(left, right)
            decisive = False
        else:
            value = k_or(left, right)
            decisive = True
        if value is decisive:
            source = left_src if left is decisive else right_src
        else:
            source = left_src if left_src is not None and left_src.witness else right_src
        return value, source
    raise NotPrenexError(f"not a specification node: {print_formula(node)}", node)


def check(k: KripkeStructure, spec: Specification, options: Optional[CheckOptions] = None) -> Verdict:
    """Check every leaf of a specification and combine the verdicts in Kleene logic"""
    options = options or CheckOptions()
    started = time.perf_counter()
    jobs = [(k, leaf, options) for leaf in spec.leaves]
    if options.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=options.jobs) as pool:
            verdicts = list(pool.map(_check_leaf_job, jobs))
    else:
        verdicts = [_check_leaf(*job) for job in jobs]
    leaf_verdicts = dict(zip(spec.leaves, verdicts))
    value, source = _combine(spec.tree, leaf_verdicts)
    engines = sorted({v.engine for v in verdicts})
    return Verdict(
        outcome=to_outcome(value),
        engine=engines[0] if len(engines) == 1 else 'mixed',
        witness=source.witness if source is not None else None,
        witness_vars=source.witness_vars if source is not None else (),
        formula=print_formula(spec.tree),
        elapsed_ms=(time.perf_counter() - started) * 1000.0,
        leaves=tuple(verdicts),
    )
