"""
HyperCTL formulas: abstract syntax, concrete syntax, and syntactic transformations
"""
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple, Union

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from errors import HyperscopeError, NotPrenexError

logger = logging.getLogger(__name__)

PathVar = str


class FormulaSyntaxError(HyperscopeError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class UnboundVariableError(HyperscopeError):
    pass


class CaptureError(HyperscopeError):
    pass


# ==========================================
# ABSTRACT SYNTAX
# ==========================================

class Formula:
    """Base class of all HyperCTL syntax nodes"""
    __slots__ = ()

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Atom(Formula):
    prop: str
    var: PathVar


@dataclass(frozen=True)
class TrueConst(Formula):
    pass


@dataclass(frozen=True)
class FalseConst(Formula):
    pass


TRUE = TrueConst()
FALSE = FalseConst()


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    body: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class WeakUntil(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    body: Formula


@dataclass(frozen=True)
class Globally(Formula):
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: PathVar
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: PathVar
    body: Formula


@dataclass(frozen=True)
class Knows(Formula):
    """Knowledge operator K_P: the observer of propositions P knows body"""
    props: FrozenSet[str]
    body: Formula


UNARY = (Not, Next, Eventually, Globally)
BINARY = (And, Or, Implies, Iff, Until, WeakUntil, Release)
QUANTIFIERS = (Exists, Forall)


def children(f: Formula) -> Tuple[Formula, ...]:
    if isinstance(f, BINARY):
        return (f.left, f.right)
    if isinstance(f, UNARY) or isinstance(f, QUANTIFIERS) or isinstance(f, Knows):
        return (f.body,)
    return ()


def rebuild(f: Formula, kids: Sequence[Formula]) -> Formula:
    """Return a node of the same kind as f with the given children"""
    if isinstance(f, BINARY):
        return type(f)(kids[0], kids[1])
    if isinstance(f, UNARY):
        return type(f)(kids[0])
    if isinstance(f, QUANTIFIERS):
        return type(f)(f.var, kids[0])
    if isinstance(f, Knows):
        return Knows(f.props, kids[0])
    return f


def subformulas(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal"""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def conj(parts: Sequence[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return TRUE
    result = parts[-1]
    for part in reversed(parts[:-1]):
        result = And(part, result)
    return result


def disj(parts: Sequence[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return FALSE
    result = parts[-1]
    for part in reversed(parts[:-1]):
        result = Or(part, result)
    return result


def simplify(f: Formula) -> Formula:
    """Fold Boolean and temporal constants bottom-up"""
    kids = [simplify(c) for c in children(f)]
    node = rebuild(f, kids) if kids else f
    if isinstance(node, Not):
        if isinstance(node.body, TrueConst):
            return FALSE
        if isinstance(node.body, FalseConst):
            return TRUE
        if isinstance(node.body, Not):
            return node.body.body
        return node
    if isinstance(node, And):
        if FALSE in (node.left, node.right):
            return FALSE
        if node.left == TRUE:
            return node.right
        if node.right == TRUE:
            return node.left
        return node
    if isinstance(node, Or):
        if TRUE in (node.left, node.right):
            return TRUE
        if node.left == FALSE:
            return node.right
        if node.right == FALSE:
            return node.left
        return node
    if isinstance(node, Implies):
        if node.left == FALSE or node.right == TRUE:
            return TRUE
        if node.left == TRUE:
            return node.right
        if node.right == FALSE:
            return simplify(Not(node.left))
        return node
    if isinstance(node, Iff):
        for const, other in ((node.left, node.right), (node.right, node.left)):
            if const == TRUE:
                return other
            if const == FALSE:
                return simplify(Not(other))
        return node
    if isinstance(node, (Next, Eventually, Globally)):
        return node.body if node.body in (TRUE, FALSE) else node
    if isinstance(node, (Until, WeakUntil)):
        if node.right == TRUE:
            return TRUE
        if isinstance(node, WeakUntil) and node.left == TRUE:
            return TRUE
        if node.right == FALSE:
            return FALSE if isinstance(node, Until) else simplify(Globally(node.left))
        return node
    if isinstance(node, Release):
        if node.right in (TRUE, FALSE):
            return node.right
        return node
    return node


def eq_now(props, v1: PathVar, v2: PathVar) -> Formula:
    """v1[0] =_P v2[0]"""
    return conj([Iff(Atom(a, v1), Atom(a, v2)) for a in sorted(props)])


def neq_now(props, v1: PathVar, v2: PathVar) -> Formula:
    return Not(eq_now(props, v1, v2))


def eq_globally(props, v1: PathVar, v2: PathVar) -> Formula:
    """v1 =_P v2, positionwise equality forever"""
    return Globally(eq_now(props, v1, v2))


def neq_globally(props, v1: PathVar, v2: PathVar) -> Formula:
    return Not(eq_globally(props, v1, v2))


def index_formula(f: Formula, var: PathVar) -> Formula:
    """[f]_var: re-index every atom of f to var"""
    if isinstance(f, Atom):
        return Atom(f.prop, var)
    return rebuild(f, [index_formula(c, var) for c in children(f)])


def free_vars(f: Formula) -> Set[PathVar]:
    if isinstance(f, Atom):
        return {f.var}
    if isinstance(f, QUANTIFIERS):
        return free_vars(f.body) - {f.var}
    result = set()
    for child in children(f):
        result |= free_vars(child)
    return result


def all_vars(f: Formula) -> Set[PathVar]:
    names = set()
    for node in subformulas(f):
        if isinstance(node, Atom):
            names.add(node.var)
        elif isinstance(node, QUANTIFIERS):
            names.add(node.var)
    return names


def props_of(f: Formula) -> Set[str]:
    return {node.prop for node in subformulas(f) if isinstance(node, Atom)}


def indexed_props(f: Formula) -> Set[Tuple[str, PathVar]]:
    return {(node.prop, node.var) for node in subformulas(f) if isinstance(node, Atom)}


def has_quantifier(f: Formula) -> bool:
    return any(isinstance(node, QUANTIFIERS) for node in subformulas(f))


def has_knowledge(f: Formula) -> bool:
    return any(isinstance(node, Knows) for node in subformulas(f))


def size(f: Formula) -> int:
    return sum(1 for _ in subformulas(f))


# ==========================================
# PRINTER
# ==========================================

_BINARY_TOKENS = {
    And: '&', Or: '|', Implies: '->', Iff: '<->',
    Until: 'U', WeakUntil: 'W', Release: 'R',
}
_UNARY_TOKENS = {Not: '!', Next: 'X', Eventually: 'F', Globally: 'G'}


def print_formula(f: Formula) -> str:
    """Fully parenthesized concrete syntax; parse_formula reads it back"""
    if isinstance(f, Atom):
        return f"{f.prop}[{f.var}]"
    if isinstance(f, TrueConst):
        return 'true'
    if isinstance(f, FalseConst):
        return 'false'
    if isinstance(f, BINARY):
        return f"({print_formula(f.left)} {_BINARY_TOKENS[type(f)]} {print_formula(f.right)})"
    if isinstance(f, UNARY):
        return f"({_UNARY_TOKENS[type(f)]} {print_formula(f.body)})"
    if isinstance(f, Exists):
        return f"(exists {f.var}. {print_formula(f.body)})"
    if isinstance(f, Forall):
        return f"(forall {f.var}. {print_formula(f.body)})"
    if isinstance(f, Knows):
        return f"(K{{{','.join(sorted(f.props))}}} {print_formula(f.body)})"
    raise TypeError(f"not a formula node: {f!r}")


# ==========================================
# PARSER
# ==========================================

FORMULA_GRAMMAR = r"""
    ?start: expr

    ?expr: iff_expr
         | quant

    ?quant: "exists" IDENT "." expr                 -> exists_q
          | "forall" IDENT "." expr                 -> forall_q

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
          | "K" propset (unary | quant)            -> knows
          | primary

    ?primary: IDENT "[" IDENT "]"                  -> atom
            | IDENT "=" propset IDENT              -> eq_globally
            | IDENT "==" propset IDENT             -> eq_now
            | IDENT "!=" propset IDENT             -> neq_globally
            | IDENT "!==" propset IDENT            -> neq_now
            | "true"                               -> true
            | "false"                              -> false
            | "(" expr ")"

    propset: "{" [prop ("," prop)*] "}"
    ?prop: IDENT | STAR

    STAR: "*"
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
        _PARSER = Lark(FORMULA_GRAMMAR, parser='lalr', propagate_positions=True)
    return _PARSER


@v_args(inline=True)
class _ToAst(Transformer):
    """Builds AST nodes; equality sugar is expanded against declared props"""

    def __init__(self, declared: Optional[Sequence[str]]):
        super().__init__()
        self.declared = declared

    def atom(self, name, var):
        return Atom(str(name), str(var))

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

    def knows(self, props, body):
        return Knows(frozenset(props), body)

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

    def exists_q(self, var, body):
        return Exists(str(var), body)

    def forall_q(self, var, body):
        return Forall(str(var), body)

    def propset(self, *props):
        names = []
        for prop in props:
            if prop is None:
                continue
            if str(prop) == '*':
                if self.declared is None:
                    raise FormulaSyntaxError("'*' needs a 'props' header declaring the proposition set",
                                             prop.line, prop.column)
                names.extend(self.declared)
            else:
                names.append(str(prop))
        return sorted(set(names))

    def eq_globally(self, v1, props, v2):
        return eq_globally(props, str(v1), str(v2))

    def eq_now(self, v1, props, v2):
        return eq_now(props, str(v1), str(v2))

    def neq_globally(self, v1, props, v2):
        return neq_globally(props, str(v1), str(v2))

    def neq_now(self, v1, props, v2):
        return neq_now(props, str(v1), str(v2))


def _fresh(name: str, used: Set[str]) -> str:
    base = name.split('#')[0]
    k = 1
    while f"{base}#{k}" in used:
        k += 1
    return f"{base}#{k}"


def alpha_rename(f: Formula) -> Formula:
    """Rename binders so that every binder in f carries a distinct name"""
    used = set(free_vars(f))

    def walk(node: Formula, env: Dict[str, str]) -> Formula:
        if isinstance(node, Atom):
            return Atom(node.prop, env.get(node.var, node.var))
        if isinstance(node, QUANTIFIERS):
            name = node.var if node.var not in used else _fresh(node.var, used | all_vars(f))
            used.add(name)
            inner = dict(env)
            inner[node.var] = name
            return type(node)(name, walk(node.body, inner))
        return rebuild(node, [walk(c, env) for c in children(node)])

    return walk(f, {})


def _syntax_error(exc: UnexpectedInput, text: str) -> FormulaSyntaxError:
    if isinstance(exc, UnexpectedEOF) or (
            isinstance(exc, UnexpectedToken) and exc.token.type == '$END'):
        lines = text.split('\n')
        return FormulaSyntaxError("unexpected end of input", len(lines), len(lines[-1]) + 1)
    if isinstance(exc, UnexpectedCharacters):
        return FormulaSyntaxError(f"unexpected character {text[exc.pos_in_stream]!r}",
                                  exc.line, exc.column)
    token = getattr(exc, 'token', None)
    return FormulaSyntaxError(f"unexpected token {str(token)!r}", exc.line, exc.column)


def parse_formula(text: str, strict: bool = True,
                  declared_props: Optional[Sequence[str]] = None) -> Formula:
    """
    Parse HyperCTL concrete syntax

    Args:
        text: formula text (atoms `a[pi]`, quantifiers `exists pi.` / `forall pi.`)
        strict: reject atoms whose index is never quantified
        declared_props: proposition set substituted for `*` in equality sugar

    Returns:
        Formula with pairwise distinct binder names
    """
    try:
        tree = _parser().parse(text)
    except UnexpectedInput as e:
        raise _syntax_error(e, text)
    try:
        ast = _ToAst(declared_props).transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, HyperscopeError):
            raise e.orig_exc
        raise
    ast = alpha_rename(ast)
    if strict:
        unbound = free_vars(ast)
        if unbound:
            raise UnboundVariableError(f"path variable(s) never quantified: {', '.join(sorted(unbound))}")
    return ast


# ==========================================
# SPECIFICATIONS
# ==========================================

@dataclass(frozen=True)
class Specification:
    """Boolean combination of closed, quantifier-rooted formulas"""
    tree: Formula
    leaves: Tuple[Formula, ...]
    declared_props: Tuple[str, ...] = ()


_SPEC_CONNECTIVES = (Not, And, Or, Implies, Iff)


def spec_leaves(f: Formula) -> List[Formula]:
    if isinstance(f, QUANTIFIERS):
        return [f]
    if isinstance(f, _SPEC_CONNECTIVES):
        result = []
        for child in children(f):
            result.extend(spec_leaves(child))
        return result
    raise NotPrenexError(f"specification leaf must begin with a quantifier: {print_formula(f)}", f)


def make_specification(f: Formula, declared_props: Sequence[str] = ()) -> Specification:
    if free_vars(f):
        raise UnboundVariableError(f"specification is not closed: {', '.join(sorted(free_vars(f)))}")
    leaves = []
    for leaf in spec_leaves(f):
        if leaf not in leaves:
            leaves.append(leaf)
    return Specification(f, tuple(leaves), tuple(declared_props))


def parse_specification(text: str) -> Specification:
    """Parse a spec file: optional `props a b c` header, then one formula"""
    declared: List[str] = []
    body_lines = []
    for line in text.split('\n'):
        stripped = line.strip()
        if not body_lines and stripped.startswith('props') and (len(stripped) == 5 or stripped[5].isspace()):
            declared.extend(stripped.split('#')[0].split()[1:])
            body_lines.append('')  # keep line numbers
            continue
        body_lines.append(line)
    f = parse_formula('\n'.join(body_lines), strict=True,
                      declared_props=declared if declared else None)
    return make_specification(f, declared)


# ==========================================
# DESUGARING
# ==========================================

def _true_witness(node: Formula, scope: Sequence[PathVar], fallback_prop: str) -> Formula:
    """`true` realized as a_pi | !a_pi over an atom whose index is in scope"""
    for sub in subformulas(node):
        if isinstance(sub, Atom) and sub.var in scope:
            atom = sub
            return Or(atom, Not(atom))
    if scope:
        atom = Atom(fallback_prop, scope[-1])
        return Or(atom, Not(atom))
    atom = Atom(fallback_prop, '_true')
    return Exists('_true', Or(atom, Not(atom)))


def desugar_to_core(f: Formula) -> Formula:
    """Rewrite into Atom, Not, Or, Next, Until, Exists only (knowledge nodes pass through)"""
    fallback = next(iter(sorted(props_of(f))), 'a')

    def walk(node: Formula, scope: Tuple[PathVar, ...]) -> Formula:
        if isinstance(node, Atom):
            return node
        if isinstance(node, TrueConst):
            return _true_witness(node, scope, fallback)
        if isinstance(node, FalseConst):
            return Not(_true_witness(node, scope, fallback))
        if isinstance(node, Not):
            return Not(walk(node.body, scope))
        if isinstance(node, Or):
            return Or(walk(node.left, scope), walk(node.right, scope))
        if isinstance(node, Next):
            return Next(walk(node.body, scope))
        if isinstance(node, Until):
            return Until(walk(node.left, scope), walk(node.right, scope))
        if isinstance(node, Exists):
            return Exists(node.var, walk(node.body, scope + (node.var,)))
        if isinstance(node, Forall):
            return Not(Exists(node.var, Not(walk(node.body, scope + (node.var,)))))
        if isinstance(node, Knows):
            return Knows(node.props, walk(node.body, scope))
        if isinstance(node, And):
            return Not(Or(Not(walk(node.left, scope)), Not(walk(node.right, scope))))
        if isinstance(node, Implies):
            return Or(Not(walk(node.left, scope)), walk(node.right, scope))
        if isinstance(node, Iff):
            left, right = walk(node.left, scope), walk(node.right, scope)
            forward = Or(Not(left), right)
            backward = Or(Not(right), left)
            return Not(Or(Not(forward), Not(backward)))
        if isinstance(node, Eventually):
            return Until(_true_witness(node.body, scope, fallback), walk(node.body, scope))
        if isinstance(node, Globally):
            return Not(Until(_true_witness(node.body, scope, fallback), Not(walk(node.body, scope))))
        if isinstance(node, Release):
            return Not(Until(Not(walk(node.left, scope)), Not(walk(node.right, scope))))
        if isinstance(node, WeakUntil):
            left, right = walk(node.left, scope), walk(node.right, scope)
            always = Not(Until(_true_witness(node.left, scope, fallback), Not(left)))
            return Or(Until(left, right), always)
        raise TypeError(f"not a formula node: {node!r}")

    return walk(f, tuple(sorted(free_vars(f))))


# ==========================================
# NEGATION NORMAL FORM
# ==========================================

def to_nnf(f: Formula) -> Formula:
    """Push negations to labels, quantifiers and knowledge operators"""

    def nnf(node: Formula, neg: bool) -> Formula:
        if isinstance(node, Atom):
            return Not(node) if neg else node
        if isinstance(node, TrueConst):
            return FALSE if neg else TRUE
        if isinstance(node, FalseConst):
            return TRUE if neg else FALSE
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
            if neg:
                return Or(And(nnf(node.left, False), nnf(node.right, True)),
                          And(nnf(node.left, True), nnf(node.right, False)))
            return Or(And(nnf(node.left, False), nnf(node.right, False)),
                      And(nnf(node.left, True), nnf(node.right, True)))
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
        if isinstance(node, Exists):
            inner = Exists(node.var, nnf(node.body, False))
            return Not(inner) if neg else inner
        if isinstance(node, Forall):
            inner = Exists(node.var, nnf(node.body, True))
            return inner if neg else Not(inner)
        if isinstance(node, Knows):
            inner = Knows(node.props, nnf(node.body, False))
            return Not(inner) if neg else inner
        raise TypeError(f"not a formula node: {node!r}")

    return nnf(f, False)


def is_nnf(f: Formula) -> bool:
    for node in subformulas(f):
        if isinstance(node, (Implies, Iff, WeakUntil, Eventually, Globally, Forall)):
            return False
        if isinstance(node, Not) and not isinstance(node.body, (Atom, Exists, Knows)):
            return False
    return True


def quantifier_polarity(node: Formula) -> Optional[str]:
    """'E' or 'A' for quantifier nodes (negated ones included), else None"""
    if isinstance(node, Exists):
        return 'E'
    if isinstance(node, Forall):
        return 'A'
    if isinstance(node, Not) and isinstance(node.body, Exists):
        return 'A'
    if isinstance(node, Not) and isinstance(node.body, Forall):
        return 'E'
    return None


def alternation_depth(f: Formula) -> int:
    """1 + quantifier polarity switches along any syntax-tree path, U and R counting one each"""
    if not has_quantifier(f):
        return 1

    def walk(node: Formula, last: Optional[str]) -> int:
        polarity = quantifier_polarity(node)
        if polarity is not None:
            switch = 1 if last is not None and last != polarity else 0
            body = node.body.body if isinstance(node, Not) else node.body
            return switch + walk(body, polarity)
        extra = 1 if isinstance(node, (Until, Release)) else 0
        kids = children(node)
        return extra + (max(walk(k, last) for k in kids) if kids else 0)

    return 1 + walk(f, None)


# ==========================================
# INDEX RENAMING AND PRENEX FORM
# ==========================================

def rename_index(f: Formula, source: PathVar, target: PathVar) -> Formula:
    """[f]_{source -> target} on free atoms"""
    if target in all_vars(f):
        raise CaptureError(f"path variable {target!r} already occurs in the formula")

    def walk(node: Formula) -> Formula:
        if isinstance(node, Atom):
            return Atom(node.prop, target) if node.var == source else node
        if isinstance(node, QUANTIFIERS) and node.var == source:
            return node
        return rebuild(node, [walk(c) for c in children(node)])

    return walk(f)


@dataclass(frozen=True)
class NotPrenexable:
    """Report returned by prenex() when a quantifier is trapped below a temporal operator"""
    node: Formula
    reason: str

    def __str__(self):
        return f"{self.reason}: {print_formula(self.node)}"


Prefix = List[Tuple[str, PathVar]]


def _pull(f: Formula, used: Set[PathVar]) -> Tuple[Prefix, Formula]:
    polarity = quantifier_polarity(f)
    if polarity is not None:
        if isinstance(f, Not):
            q = f.body
            body = to_nnf(Not(q.body))
        else:
            q = f
            body = f.body
        var = q.var
        if var in used:
            fresh = _fresh(var, used | all_vars(body))
            body = rename_index(body, var, fresh)
            var = fresh
        used.add(var)
        prefix, matrix = _pull(body, used)
        return [(polarity, var)] + prefix, matrix
    if isinstance(f, (And, Or)):
        left_prefix, left = _pull(f.left, used)
        right_prefix, right = _pull(f.right, used)
        return left_prefix + right_prefix, type(f)(left, right)
    if has_quantifier(f):
        raise NotPrenexError("quantifier below a temporal operator", f)
    if has_knowledge(f):
        raise NotPrenexError("knowledge operator in the matrix", f)
    return [], f


def prenex(f: Formula) -> Union[Formula, NotPrenexable]:
    """
    Pull quantifiers through Boolean connectives

    Returns the prenex formula (Exists/Forall prefix over a quantifier-free
    NNF matrix), or a NotPrenexable report naming the blocking node.
    """
    nnf = f if is_nnf(f) else to_nnf(f)
    try:
        prefix, matrix = _pull(nnf, set())
    except NotPrenexError as e:
        logger.debug("not prenexable: %s", e)
        return NotPrenexable(e.node, str(e))
    result = matrix
    for polarity, var in reversed(prefix):
        result = Exists(var, result) if polarity == 'E' else Forall(var, result)
    return result


def split_prefix(f: Formula) -> Tuple[Prefix, Formula]:
    """Split a prenex formula into its quantifier prefix and matrix"""
    prefix: Prefix = []
    node = f
    while True:
        if isinstance(node, Exists):
            prefix.append(('E', node.var))
            node = node.body
        elif isinstance(node, Forall):
            prefix.append(('A', node.var))
            node = node.body
        else:
            break
    if has_quantifier(node):
        raise NotPrenexError("formula is not in prenex form", node)
    return prefix, node
