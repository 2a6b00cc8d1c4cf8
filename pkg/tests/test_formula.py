import pytest

from errors import NotPrenexError
from formula import (FALSE, TRUE, And, Atom, CaptureError, Eventually, Exists, Forall, FormulaSyntaxError,
                     Globally, Iff, Implies, Knows, Next, Not, NotPrenexable, Or, Release,
                     UnboundVariableError, Until, WeakUntil, alternation_depth, desugar_to_core,
                     free_vars, is_nnf, make_specification, parse_formula, parse_specification,
                     prenex, print_formula, props_of, rename_index, simplify, size, split_prefix,
                     subformulas, to_nnf)
from oracles import ltl_holds, random_ltl, random_word, word_lasso


def a(var='pi'):
    return Atom('a', var)


def b(var='pi'):
    return Atom('b', var)


class TestParser:

    def test_globally_implies_next(self):
        f = parse_formula("forall pi. G (a[pi] -> X b[pi])")
        assert f == Forall('pi', Globally(Implies(a(), Next(b()))))

    def test_and_binds_tighter_than_or(self):
        f = parse_formula("exists pi. a[pi] & b[pi] | c[pi]")
        assert f == Exists('pi', Or(And(a(), b()), Atom('c', 'pi')))

    def test_until_is_right_associative(self):
        f = parse_formula("exists pi. a[pi] U b[pi] U c[pi]")
        assert f == Exists('pi', Until(a(), Until(b(), Atom('c', 'pi'))))

    def test_unary_binds_tighter_than_binary(self):
        f = parse_formula("exists pi. !a[pi] U X b[pi] & F a[pi]")
        assert f == Exists('pi', And(Until(Not(a()), Next(b())), Eventually(a())))

    def test_quantifier_scope_extends_right(self):
        f = parse_formula("exists p. a[p] & forall q. b[q]")
        assert f == Exists('p', And(a('p'), Forall('q', b('q'))))

    def test_weak_until_and_release(self):
        f = parse_formula("forall pi. (a[pi] W b[pi]) & (a[pi] R b[pi])")
        assert f == Forall('pi', And(WeakUntil(a(), b()), Release(a(), b())))

    def test_knowledge_operator(self):
        f = parse_formula("forall pi. K{o} x[pi]")
        assert f == Forall('pi', Knows(frozenset({'o'}), Atom('x', 'pi')))

    def test_equality_sugar(self):
        f = parse_formula("forall p. forall q. p ={a,b} q")
        expected = Globally(And(Iff(a('p'), a('q')), Iff(b('p'), b('q'))))
        assert f == Forall('p', Forall('q', expected))

    def test_pointwise_inequality_sugar(self):
        f = parse_formula("forall p. forall q. p !=={a} q")
        assert f == Forall('p', Forall('q', Not(Iff(a('p'), a('q')))))

    def test_star_needs_props_header(self):
        with pytest.raises(FormulaSyntaxError):
            parse_formula("forall p. forall q. p ={*} q")

    def test_star_expands_declared_props(self):
        spec = parse_specification("props a b\nforall p. forall q. p ={*} q\n")
        assert spec.declared_props == ('a', 'b')
        assert spec.tree == parse_formula("forall p. forall q. p ={a,b} q")

    def test_comments_are_ignored(self):
        f = parse_formula("exists pi. a[pi]  # witness for a")
        assert f == Exists('pi', a())

    def test_unexpected_end_of_input(self):
        with pytest.raises(FormulaSyntaxError, match="unexpected end of input"):
            parse_formula("exists pi. a[pi] &")

    def test_unexpected_character_position(self):
        with pytest.raises(FormulaSyntaxError) as info:
            parse_formula("exists pi. a[pi] $")
        assert info.value.line == 1
        assert info.value.column == 18

    def test_unbound_variable_rejected_when_strict(self):
        with pytest.raises(UnboundVariableError):
            parse_formula("a[pi]")
        assert parse_formula("a[pi]", strict=False) == a()

    def test_shadowed_binder_is_renamed(self):
        f = parse_formula("exists pi. exists pi. a[pi]")
        assert f == Exists('pi', Exists('pi#1', Atom('a', 'pi#1')))

    @pytest.mark.parametrize("text", [
        "forall pi. G (a[pi] -> X b[pi])",
        "exists p. forall q. (a[p] U b[q]) | !(b[q] R a[p])",
        "forall pi. K{o,x} (x[pi] W false)",
        "exists pi. true & F G !a[pi]",
    ])
    def test_printed_form_parses_back(self, text):
        f = parse_formula(text)
        assert parse_formula(print_formula(f)) == f

    def test_random_formulas_parse_back(self, rng):
        for _ in range(40):
            f = Exists('pi', random_ltl(rng, 4, ['a', 'b'], ['pi']))
            assert parse_formula(print_formula(f)) == f


class TestTransformations:

    def test_nnf_is_nnf_and_equivalent(self, rng):
        for _ in range(60):
            f = random_ltl(rng, 4, ['a', 'b'], [''])
            g = to_nnf(f)
            assert is_nnf(g)
            for _ in range(4):
                path = word_lasso(random_word(rng, ['a', 'b']))
                assert ltl_holds(f, {'': path}) == ltl_holds(g, {'': path})

    def test_core_uses_only_core_connectives(self, rng):
        core = (Atom, Not, Or, Next, Until, Exists)
        for _ in range(40):
            f = random_ltl(rng, 4, ['a', 'b'], [''])
            g = desugar_to_core(f)
            assert all(isinstance(node, core) for node in subformulas(g))
            for _ in range(4):
                path = word_lasso(random_word(rng, ['a', 'b']))
                assert ltl_holds(f, {'': path}) == ltl_holds(g, {'': path})

    def test_nnf_of_forall_negates_exists(self):
        g = to_nnf(Forall('pi', a()))
        assert g == Not(Exists('pi', Not(a())))

    def test_simplify_folds_constants(self):
        x = a()
        assert simplify(And(TRUE, x)) == x
        assert simplify(Or(x, TRUE)) == TRUE
        assert simplify(Not(Not(x))) == x
        assert simplify(Implies(x, FALSE)) == Not(x)
        assert simplify(Until(x, FALSE)) == FALSE
        assert simplify(WeakUntil(x, FALSE)) == Globally(x)
        assert simplify(WeakUntil(TRUE, x)) == TRUE
        assert simplify(Next(Globally(TRUE))) == TRUE
        assert simplify(Release(x, FALSE)) == FALSE

    def test_simplify_is_equivalent(self, rng):
        for _ in range(40):
            f = random_ltl(rng, 3, ['a'], [''])
            f = Or(And(f, TRUE), Until(FALSE, f))
            path = word_lasso(random_word(rng, ['a']))
            assert ltl_holds(simplify(f), {'': path}) == ltl_holds(f, {'': path})

    def test_prenex_pulls_through_boolean_connectives(self):
        f = parse_formula("forall p. a[p] & exists q. b[q]")
        assert prenex(f) == Forall('p', Exists('q', And(a('p'), b('q'))))

    def test_prenex_renames_clashing_binders(self):
        f = And(Exists('p', a('p')), Exists('p', b('p')))
        prefix, matrix = split_prefix(prenex(f))
        assert prefix == [('E', 'p'), ('E', 'p#1')]
        assert matrix == And(a('p'), b('p#1'))

    def test_quantifier_below_temporal_operator_is_reported(self):
        result = prenex(parse_formula("forall p. G exists q. a[q]"))
        assert isinstance(result, NotPrenexable)
        assert 'temporal' in result.reason

    def test_knowledge_is_not_prenexable(self):
        assert isinstance(prenex(parse_formula("forall pi. K{o} x[pi]")), NotPrenexable)

    def test_split_prefix_rejects_nested_quantifiers(self):
        with pytest.raises(NotPrenexError):
            split_prefix(parse_formula("exists p. F exists q. a[q]"))

    @pytest.mark.parametrize("text, depth", [
        ("exists p. a[p]", 1),
        ("exists p. exists q. a[p] & b[q]", 1),
        ("exists p. exists q. a[p] U b[q]", 2),
        ("forall p. exists q. G (a[p] <-> a[q])", 2),
        ("exists p. forall q. exists r. a[p] & a[q] & a[r]", 3),
    ])
    def test_alternation_depth(self, text, depth):
        assert alternation_depth(parse_formula(text)) == depth

    def test_rename_index(self):
        f = And(a('p'), b('q'))
        assert rename_index(f, 'p', 'r') == And(a('r'), b('q'))
        with pytest.raises(CaptureError):
            rename_index(f, 'p', 'q')

    def test_free_vars_props_and_size(self):
        f = parse_formula("exists p. a[p] U b[q]", strict=False)
        assert free_vars(f) == {'q'}
        assert props_of(f) == {'a', 'b'}
        assert size(f) == 4


class TestSpecifications:

    def test_leaves_of_a_boolean_combination(self):
        spec = parse_specification("(forall p. a[p]) & !(exists q. b[q])")
        assert spec.leaves == (Forall('p', a('p')), Exists('q', b('q')))

    def test_repeated_leaf_counted_once(self):
        leaf = Exists('p', a('p'))
        spec = make_specification(Or(leaf, Not(leaf)))
        assert spec.leaves == (leaf,)

    def test_leaf_must_start_with_a_quantifier(self):
        with pytest.raises(NotPrenexError):
            make_specification(TRUE)

    def test_open_specification_rejected(self):
        with pytest.raises(UnboundVariableError):
            make_specification(a())
