"""
Quantified propositional temporal logic

Formulas reuse the connectives of module formula; a proposition p is an
Atom(p, PROP_INDEX) and the binders are ExistsProp / ForallProp.
Satisfiability goes through module automata: projection implements
existential quantification, complementation handles alternation.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError

from automata import LassoWord, complement, is_empty, ltl_to_nba, project
from errors import HyperscopeError, NotPrenexError
from formula import (_BINARY_TOKENS, _UNARY_TOKENS, BINARY, FALSE, TRUE, UNARY, And, Atom, Eventually,
                     Exists, FalseConst, Forall, Formula, Globally, Iff, Implies, Next, Not,
                     NotPrenexable, Or, Release, TrueConst, Until, WeakUntil, _fresh, _syntax_error,
                     children, conj, disj, prenex, rebuild, split_prefix, to_nnf)
from kripke import KripkeStructure, make_kripke, tag

logger = logging.getLogger(__name__)

PROP_INDEX = ''


@dataclass(frozen=True)
class ExistsProp(Formula):
    prop: str
    body: Formula


@dataclass(frozen=True)
class ForallProp(Formula):
    prop: str
    body: Formula


PROP_QUANTIFIERS = (ExistsProp, ForallProp)


def prop(name: str) -> Atom:
    return Atom(name, PROP_INDEX)


def qptl_children(f: Formula) -> Tuple[Formula, ...]:
    if isinstance(f, PROP_QUANTIFIERS):
        return (f.body,)
    return children(f)


def qptl_rebuild(f: Formula, kids: Sequence[Formula]) -> Formula:
    if isinstance(f, PROP_QUANTIFIERS):
        return type(f)(f.prop, kids[0])
    return rebuild(f, kids)


def qptl_subformulas(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(qptl_children(node)))


def has_prop_quantifier(f: Formula) -> bool:
    return any(isinstance(node, PROP_QUANTIFIERS) for node in qptl_subformulas(f))


def free_props(f: Formula) -> Set[str]:
    if isinstance(f, Atom):
        return {f.prop}
    if isinstance(f, PROP_QUANTIFIERS):
        return free_props(f.body) - {f.prop}
    result = set()
    for child in qptl_children(f):
        result |= free_props(child)
    return result


def all_props(f: Formula) -> Set[str]:
    names = set()
    for node in qptl_subformulas(f):
        if isinstance(node, Atom):
            names.add(node.prop)
        elif isinstance(node, PROP_QUANTIFIERS):
            names.add(node.prop)
    return names


def substitute(f: Formula, mapping: Dict[str, Formula]) -> Formula:
    """Replace free occurrences of propositions by formulas"""
    if isinstance(f, Atom):
        return mapping.get(f.prop, f)
    if isinstance(f, PROP_QUANTIFIERS):
        inner = {p: g for p, g in mapping.items() if p != f.prop}
        return type(f)(f.prop, substitute(f.body, inner))
    return qptl_rebuild(f, [substitute(c, mapping) for c in qptl_children(f)])


def print_qptl(f: Formula) -> str:
    if isinstance(f, Atom):
        return f.prop
    if isinstance(f, TrueConst):
        return 'true'
    if isinstance(f, FalseConst):
        return 'false'
    if isinstance(f, ExistsProp):
        return f"(Exists {f.prop}. {print_qptl(f.body)})"
    if isinstance(f, ForallProp):
        return f"(Forall {f.prop}. {print_qptl(f.body)})"
    if isinstance(f, BINARY):
        return f"({print_qptl(f.left)} {_BINARY_TOKENS[type(f)]} {print_qptl(f.right)})"
    if isinstance(f, UNARY):
        return f"({_UNARY_TOKENS[type(f)]} {print_qptl(f.body)})"
    raise TypeError(f"not a QPTL node: {f!r}")


# ==========================================
# PARSER
# ==========================================

QPTL_GRAMMAR = r"""
    ?start: expr

    ?expr: iff_expr
         | quant

    ?quant: "Exists" IDENT "." expr                 -> exists_p
          | "Forall" IDENT "." expr                 -> forall_p

    ?iff_expr: imp_expr
             | imp_expr "<->" (iff_expr | quant)   -> iff

    ?imp_expr: or_expr
             | or_expr "->" (imp_expr | quant)     -> implies

    ?or_expr: and_expr
            | and_expr "|" (or_expr | quant)       -> or_

    ?and_expr: temporal
             | temporal "&" (and_expr | quant)     -> and_

    ?temporal: unary
             | unary "U" (temporal | quant)        -> until
             | unary "W" (temporal | quant)        -> weak_until
             | unary "R" (temporal | quant)        -> release

    ?unary: "!" (unary | quant)                    -> not_
          | "X" (unary | quant)                    -> next
          | "F" (unary | quant)                    -> eventually
          | "G" (unary | quant)                    -> globally
          | primary

    ?primary: IDENT                                -> prop
            | "true"                               -> true
            | "false"                              -> false
            | "(" expr ")"

    IDENT: /[a-zA-Z_][a-zA-Z0-9_@]*(#[0-9]+)?/
    COMMENT: /(?<![A-Za-z0-9_@])#[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

_PARSER = None


def _parser() -> Lark:
    global _PARSER
    if _PARSER is None:
        _PARSER = Lark(QPTL_GRAMMAR, parser='lalr', propagate_positions=True)
    return _PARSER


@v_args(inline=True)
class _ToQptl(Transformer):
    def prop(self, name):
        return prop(str(name))

    def true(self):
        return TRUE

    def false(self):
        return FALSE

    def not_(self, body):
        return Not(body)

    def next(self, body):
        return Next(body)

    def eventually(self, body):
        return Eventually(body)

    def globally(self, body):
        return Globally(body)

    def and_(self, left, right):
        return And(left, right)

    def or_(self, left, right):
        return Or(left, right)

    def implies(self, left, right):
        return Implies(left, right)

    def iff(self, left, right):
        return Iff(left, right)

    def until(self, left, right):
        return Until(left, right)

    def weak_until(self, left, right):
        return WeakUntil(left, right)

    def release(self, left, right):
        return Release(left, right)

    def exists_p(self, name, body):
        return ExistsProp(str(name), body)

    def forall_p(self, name, body):
        return ForallProp(str(name), body)


def alpha_rename_props(f: Formula, avoid: Sequence[str] = ()) -> Formula:
    """Give every binder a distinct name, distinct from the free propositions and `avoid`"""
    used = set(free_props(f)) | set(avoid)
    taken = all_props(f) | used

    def walk(node: Formula, env: Dict[str, str]) -> Formula:
        if isinstance(node, Atom):
            return prop(env.get(node.prop, node.prop))
        if isinstance(node, PROP_QUANTIFIERS):
            name = node.prop if node.prop not in used else _fresh(node.prop, taken | used)
            used.add(name)
            inner = dict(env)
            inner[node.prop] = name
            return type(node)(name, walk(node.body, inner))
        return qptl_rebuild(node, [walk(c, env) for c in qptl_children(node)])

    return walk(f, {})


def parse_qptl(text: str) -> Formula:
    """Parse QPTL: bare propositions, `Exists p.` / `Forall p.` binders"""
    try:
        tree = _parser().parse(text)
    except UnexpectedInput as e:
        raise _syntax_error(e, text)
    try:
        ast = _ToQptl().transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, HyperscopeError):
            raise e.orig_exc
        raise
    return alpha_rename_props(ast)


# ==========================================
# NORMAL FORMS
# ==========================================

def qptl_nnf(f: Formula) -> Formula:
    """Negation normal form; a negated binder flips to its dual"""

    def nnf(node: Formula, neg: bool) -> Formula:
        if not has_prop_quantifier(node):
            return to_nnf(Not(node) if neg else node)
        if isinstance(node, ExistsProp):
            kind = ForallProp if neg else ExistsProp
            return kind(node.prop, nnf(node.body, neg))
        if isinstance(node, ForallProp):
            kind = ExistsProp if neg else ForallProp
            return kind(node.prop, nnf(node.body, neg))
        if isinstance(node, Not):
            return nnf(node.body, not neg)
        if isinstance(node, And):
            kind = Or if neg else And
            return kind(nnf(node.left, neg), nnf(node.right, neg))
        if isinstance(node, Or):
            kind = And if neg else Or
            return kind(nnf(node.left, neg), nnf(node.right, neg))
        if isinstance(node, Implies):
            return nnf(Or(Not(node.left), node.right), neg)
        if isinstance(node, Iff):
            both = And(node.left, node.right)
            neither = And(Not(node.left), Not(node.right))
            return nnf(Or(both, neither), neg)
        if isinstance(node, Next):
            return Next(nnf(node.body, neg))
        if isinstance(node, Until):
            kind = Release if neg else Until
            return kind(nnf(node.left, neg), nnf(node.right, neg))
        if isinstance(node, Release):
            kind = Until if neg else Release
            return kind(nnf(node.left, neg), nnf(node.right, neg))
        if isinstance(node, Eventually):
            return nnf(Until(TRUE, node.body), neg)
        if isinstance(node, Globally):
            return nnf(Release(FALSE, node.body), neg)
        if isinstance(node, WeakUntil):
            return nnf(Release(node.right, Or(node.left, node.right)), neg)
        raise TypeError(f"not a QPTL node: {node!r}")

    return nnf(f, False)


Prefix = List[Tuple[str, str]]


def qptl_prenex(f: Formula) -> Tuple[Prefix, Formula]:
    """
    Pull binders out of Boolean connectives and next

    Returns the prefix as ('E' | 'A', prop) pairs and a binder-free NNF
    matrix. Raises NotPrenexError when a binder sits below U or R.
    """
    used: Set[str] = set(free_props(f))

    def pull(node: Formula) -> Tuple[Prefix, Formula]:
        if isinstance(node, PROP_QUANTIFIERS):
            name, body = node.prop, node.body
            if name in used:
                fresh = _fresh(name, used | all_props(body))
                body = substitute(body, {name: prop(fresh)})
                name = fresh
            used.add(name)
            inner, matrix = pull(body)
            return [('E' if isinstance(node, ExistsProp) else 'A', name)] + inner, matrix
        if isinstance(node, (And, Or)):
            left_prefix, left = pull(node.left)
            right_prefix, right = pull(node.right)
            return left_prefix + right_prefix, type(node)(left, right)
        if isinstance(node, Next):
            inner, matrix = pull(node.body)
            return inner, Next(matrix)
        if has_prop_quantifier(node):
            raise NotPrenexError(f"proposition quantifier below a temporal operator: {print_qptl(node)}",
                                 node)
        return [], node

    return pull(qptl_nnf(f))


def close_existentially(f: Formula) -> Formula:
    for name in sorted(free_props(f), reverse=True):
        f = ExistsProp(name, f)
    return f


# ==========================================
# SATISFIABILITY
# ==========================================

@dataclass(frozen=True)
class QptlResult:
    sat: bool
    witness: Optional[LassoWord] = None

    def __bool__(self):
        return self.sat


def _prop_key(atom: Atom) -> str:
    return atom.prop


def _blocks(prefix: Prefix) -> List[Tuple[str, List[str]]]:
    blocks: List[Tuple[str, List[str]]] = []
    for polarity, name in prefix:
        if blocks and blocks[-1][0] == polarity:
            blocks[-1][1].append(name)
        else:
            blocks.append((polarity, [name]))
    return blocks


def qptl_sat(psi: Formula, cap: Optional[int] = None) -> QptlResult:
    """
    Decide whether some word satisfies psi (free propositions read existentially)

    The witness ranges over the free propositions and the outermost
    existential block.
    """
    prefix, matrix = qptl_prenex(psi)
    blocks = _blocks(prefix)
    if not blocks:
        word = is_empty(ltl_to_nba(matrix, key=_prop_key, cap=cap))
        return QptlResult(word is not None, word)
    innermost = blocks[-1][0]
    body = matrix if innermost == 'E' else to_nnf(Not(matrix))
    current = ltl_to_nba(body, key=_prop_key, cap=cap)
    for depth in range(len(blocks) - 1, -1, -1):
        polarity, names = blocks[depth]
        if depth < len(blocks) - 1:
            current = complement(current, cap=cap)
        if depth == 0 and polarity == 'E':
            word = is_empty(current)
            return QptlResult(word is not None, word)
        current = project(current, set(names) & current.alphabet)
        logger.debug("QPTL block %s%s eliminated: %d states", polarity, ','.join(names), len(current))
    if not current.alphabet:
        # one-letter alphabet: the complement is nonempty iff current is empty
        if is_empty(current) is None:
            return QptlResult(True, LassoWord((), (frozenset(),)))
        return QptlResult(False)
    word = is_empty(complement(current, cap=cap))
    return QptlResult(word is not None, word)


# ==========================================
# HYPERCTL MODEL CHECKING TO QPTL
# ==========================================

def until_encoding(left: Formula, right: Formula, t: str) -> Formula:
    """Constraint G(t <-> b | (a & X t)) & G(t -> F b): t holds exactly where a U b does"""
    marker = prop(t)
    step = Globally(Iff(marker, Or(right, And(left, Next(marker)))))
    return And(step, Globally(Implies(marker, Eventually(right))))


def encode_untils(f: Formula, used: Set[str], polarity: str = 'E') -> Formula:
    """
    Replace every until by a fresh marker bound in front of f

    Untils are replaced innermost first. Each marker is pinned down by its
    constraint, so the binders may take either polarity: 'E' conjoins the
    constraints under existential binders, 'A' assumes them under
    universal ones.
    """
    markers: List[Tuple[str, Formula]] = []

    def walk(node: Formula) -> Formula:
        if isinstance(node, Until):
            left, right = walk(node.left), walk(node.right)
            t = _fresh('t', used)
            used.add(t)
            markers.append((t, until_encoding(left, right, t)))
            return prop(t)
        kids = qptl_children(node)
        if not kids:
            return node
        return qptl_rebuild(node, [walk(c) for c in kids])

    body = walk(f)
    if not markers:
        return f
    constraints = conj([c for _, c in markers])
    body = And(constraints, body) if polarity == 'E' else Implies(constraints, body)
    kind = ExistsProp if polarity == 'E' else ForallProp
    for t, _ in reversed(markers):
        body = kind(t, body)
    return body


def state_prop(k: KripkeStructure, state: str, var: str) -> str:
    return tag(f"at{k.states.index(state)}", var)


def structure_constraint(k: KripkeStructure, var: str) -> Formula:
    """One-hot encoding of the paths of k from s0 over copy `var` of the propositions"""
    at = {s: prop(state_prop(k, s, var)) for s in k.states}
    one_hot = And(disj([at[s] for s in k.states]),
                  conj([Not(And(at[s], at[t])) for i, s in enumerate(k.states) for t in k.states[i + 1:]]))
    moves = conj([Implies(at[s], Next(disj([at[t] for t in k.successors(s)]))) for s in k.states])
    labels = conj([Implies(at[s], conj([prop(tag(a, var)) if a in k.label(s) else Not(prop(tag(a, var)))
                                        for a in sorted(k.aps)]))
                   for s in k.states])
    return conj([at[k.init], Globally(one_hot), Globally(moves), Globally(labels)])


def _index_to_props(f: Formula) -> Formula:
    if isinstance(f, Atom):
        return prop(tag(f.prop, f.var))
    return rebuild(f, [_index_to_props(c) for c in children(f)])


def hyperctl_mc_to_qptl(k: KripkeStructure, f: Formula, encode_until: bool = True) -> Formula:
    """
    QPTL formula satisfiable iff k satisfies the prenex formula f

    Each path variable gets its own copy of the propositions plus one-hot
    state propositions; exists binds the copy, forall guards the body with
    the structure constraint.
    """
    pulled = prenex(f)
    if isinstance(pulled, NotPrenexable):
        raise NotPrenexError(str(pulled), pulled.node)
    prefix, matrix = split_prefix(pulled)
    body = _index_to_props(matrix)
    copies: Dict[str, List[str]] = {}
    for _, var in prefix:
        extra = {a.prop for a in _atoms(matrix) if a.var == var} - k.aps
        copies[var] = sorted({tag(a, var) for a in k.aps | extra} |
                             {state_prop(k, s, var) for s in k.states})
    if encode_until:
        used = set(all_props(body))
        for names in copies.values():
            used |= set(names)
        body = encode_untils(body, used, polarity=prefix[-1][0])
    for polarity, var in reversed(prefix):
        constraint = structure_constraint(k, var)
        body = And(constraint, body) if polarity == 'E' else Implies(constraint, body)
        kind = ExistsProp if polarity == 'E' else ForallProp
        for name in reversed(copies[var]):
            body = kind(name, body)
    return body


def _atoms(f: Formula) -> Iterator[Atom]:
    for node in qptl_subformulas(f):
        if isinstance(node, Atom):
            yield node


# ==========================================
# QPTL SATISFIABILITY TO HYPERCTL MODEL CHECKING
# ==========================================

def two_state_structure() -> KripkeStructure:
    """Fully connected s0, s1 with p on s1 only"""
    return make_kripke(['s0', 's1'], 's0',
                       [('s0', 's0'), ('s0', 's1'), ('s1', 's0'), ('s1', 's1')],
                       ['p'], {'s0': [], 's1': ['p']})


def shift(f: Formula) -> Formula:
    """Replace every proposition q by X q"""
    if isinstance(f, Atom):
        return Next(f)
    return qptl_rebuild(f, [shift(c) for c in qptl_children(f)])


def qptl_sat_to_hyperctl_mc(psi: Formula) -> Tuple[KripkeStructure, Formula]:
    """
    Structure and formula such that psi is satisfiable iff the structure satisfies it

    The m-th binder t becomes path variable pi<m> and t becomes p[pi<m>];
    propositions are shifted one step since every path starts in s0.
    """
    if free_props(psi):
        raise NotPrenexError(f"QPTL formula is not closed: {', '.join(sorted(free_props(psi)))}", psi)
    prefix, matrix = qptl_prenex(psi)
    names = {name: f"pi{m}" for m, (_, name) in enumerate(prefix, start=1)}

    def to_atoms(node: Formula) -> Formula:
        if isinstance(node, Atom):
            return Atom('p', names[node.prop])
        return rebuild(node, [to_atoms(c) for c in children(node)])

    result = to_atoms(shift(matrix))
    for polarity, name in reversed(prefix):
        result = Exists(names[name], result) if polarity == 'E' else Forall(names[name], result)
    return two_state_structure(), result


# ==========================================
# QPTL EMBEDDING
# ==========================================

def qptl_to_hyperctl(psi: Formula, var: str = 'pi', avoid: Sequence[str] = ()) -> Formula:
    """
    HyperCTL formula that a structure satisfies iff all its paths satisfy psi

    Bound propositions are renamed away from `avoid` (typically the
    structure's propositions); each binder over p becomes a path quantifier
    over pi_p reading p on that path.
    """
    renamed = alpha_rename_props(psi, avoid=avoid)

    def walk(node: Formula, env: Dict[str, str]) -> Formula:
        if isinstance(node, Atom):
            return Atom(node.prop, env.get(node.prop, var))
        if isinstance(node, PROP_QUANTIFIERS):
            path_var = f"{var}_{node.prop}"
            inner = dict(env)
            inner[node.prop] = path_var
            kind = Exists if isinstance(node, ExistsProp) else Forall
            return kind(path_var, walk(node.body, inner))
        return rebuild(node, [walk(c, env) for c in children(node)])

    return Forall(var, walk(renamed, {}))
