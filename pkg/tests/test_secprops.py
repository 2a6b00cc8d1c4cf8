import math

import pytest

from checker import (CheckOptions, ExplicitDomain, ModeError, Outcome, PathAssignment, check,
                     evaluate_knowledge, evaluate_semantics)
from formula import (FALSE, And, Atom, Exists, Forall, Implies, Knows, Next, Not, Or, WeakUntil, eq_now,
                     make_specification, neq_now, parse_formula, print_formula, subformulas)
from kripke import Lasso, make_kripke
from oracles import (all_words, elimination_domain, ltl_holds, prefix_lassos, random_interpreted,
                     random_ltl, secltl_hidden_forever_fails, word_lasso)
from secprops import (INTERPRETED_INIT, MOVE, SECLTL_INIT, STUTTER, ModelFileError, PropertyError,
                      SizeCapError, cmd_prop, declassification, edit_insertion, eliminate_knowledge,
                      encode_gm, encode_interpreted, encode_secltl, format_gm, gm_interference,
                      gm_noninterference, hamming_at_most, lattice_noninterference, make_gm,
                      make_interpreted, make_secltl, min_distance_spec, noninterference_basic,
                      obs_prop, observational_determinism, observer_props, out_prop, parse_gm,
                      parse_interpreted, parse_secltl, password_checker, password_noninterference,
                      purge, qif_min_entropy_bound, secltl_hide, secltl_property, stutter_extension)

NONINTERFERING_GM = """
# H flips a bit that L never sees
states s0 s1
init s0
users H L
commands a
outputs zero one
do s0 H a -> s1
do s1 H a -> s0
do s0 L a -> s0
do s1 L a -> s1
out s0 H -> zero
out s1 H -> one
out s0 L -> zero
out s1 L -> zero
"""

COPYING_SECLTL = """
vars h l o
inputs h l
high h
outputs o
init q0
edge q0 {h=1, o=1} q0
edge q0 {h=0} q0
"""

COUNTER_SYSTEM = """
agents 1
obs x y
aps p
init (x)
step (x) -> (y)
step (y) -> (y)
label (y) {p}
"""


def holds(k, f, **options):
    return check(k, make_specification(f), CheckOptions(**options)).holds


@pytest.fixture
def leaky_with_low():
    """leaky plus a low input that is never set"""
    return make_kripke(['s0', 'h0', 'h1'], 's0',
                       [('s0', 'h0'), ('s0', 'h1'), ('h0', 'h0'), ('h1', 'h1')],
                       ['h', 'l', 'o'], {'s0': [], 'h0': [], 'h1': ['h', 'o']})


def differences(p: Lasso, q: Lasso, props) -> float:
    stem = max(len(p.stem), len(q.stem))
    period = math.lcm(len(p.loop), len(q.loop))
    diff = [i for i in range(stem + period) if p.valuation(i) & props != q.valuation(i) & props]
    if any(i >= stem for i in diff):
        return math.inf
    return len(diff)


def random_gm(rng):
    states = ['s0', 's1']
    users, commands, outputs = ['H', 'L'], ['a', 'b'], ['zero', 'one']
    do = {(s, u, c): rng.choice(states) for s in states for u in users for c in commands}
    out = {(s, u): rng.choice(outputs) for s in states for u in users}
    return make_gm(states, users, commands, outputs, do, out, 's0')


def random_secltl(rng):
    states = ['q0', 'q1']
    edges = []
    for s in states:
        for _ in range(rng.randint(1, 2)):
            valuation = {v for v in 'hlo' if rng.random() < 0.5}
            edges.append((s, valuation, rng.choice(states)))
    return make_secltl(states, 'q0', edges, 'hlo', 'hl', 'h', 'o')


def pair_search_sweep(rng, rounds):
    for _ in range(rounds):
        m = random_secltl(rng)
        f = secltl_property(m.high, m.outputs, m.inputs, release=FALSE)
        assert holds(encode_secltl(m), f) == (not secltl_hidden_forever_fails(m))


class TestInformationFlow:

    def test_noninterference_shape(self):
        f = noninterference_basic(['l'], ['o'])
        expected = WeakUntil(eq_now({'o'}, 'pi1', 'pi2'), neq_now({'l'}, 'pi1', 'pi2'))
        assert f == Forall('pi1', Forall('pi2', expected))

    def test_noninterference_needs_inputs_and_outputs(self):
        with pytest.raises(PropertyError):
            noninterference_basic([], ['o'])
        with pytest.raises(PropertyError):
            declassification(['l'], [], parse_formula("h[x]", strict=False))

    def test_secret_dependent_output(self, leaky_with_low):
        assert not holds(leaky_with_low, noninterference_basic(['l'], ['o']))
        assert holds(leaky_with_low, noninterference_basic(['h'], ['o']))
        assert not holds(leaky_with_low, observational_determinism(['l'], ['o']))

    def test_release_at_the_start_excuses_everything(self, leaky_with_low):
        release = parse_formula("!h[x] & !o[x]", strict=False)
        f = declassification(['l'], ['o'], release)
        released = And(Not(Atom('h', 'pi1')), Not(Atom('o', 'pi1')))
        assert f.body.body.right == Or(neq_now({'l'}, 'pi1', 'pi2'), released)
        assert holds(leaky_with_low, f)

    def test_release_must_talk_about_one_path(self):
        with pytest.raises(PropertyError):
            declassification(['l'], ['o'], parse_formula("h[x] & h[y]", strict=False))
        with pytest.raises(PropertyError):
            declassification(['l'], ['o'], parse_formula("exists x. h[x]"))

    def test_lattice_is_a_conjunction(self):
        f = lattice_noninterference([(['l'], ['o']), (['h'], ['x'])])
        assert f == And(noninterference_basic(['l'], ['o']), noninterference_basic(['h', 'l'], ['x']))
        with pytest.raises(PropertyError):
            lattice_noninterference([])
        with pytest.raises(PropertyError):
            lattice_noninterference([(['l'], [])])

    def test_min_entropy_bound(self, leaky):
        assert not holds(leaky, qif_min_entropy_bound([], ['o'], 0))
        assert holds(leaky, qif_min_entropy_bound([], ['o'], 1))

    def test_low_echo_is_noninterfering(self):
        k = make_kripke(['s0', 'l0', 'l1'], 's0',
                        [('s0', 'l0'), ('s0', 'l1'), ('l0', 'l0'), ('l1', 'l1')],
                        ['l', 'o'], {'s0': [], 'l0': [], 'l1': ['l', 'o']})
        assert holds(k, noninterference_basic(['l'], ['o']))

    def test_two_secret_bits_leak_two_bits(self):
        echoes = {'e00': [], 'e01': ['o2'], 'e10': ['o1'], 'e11': ['o1', 'o2']}
        edges = [('s0', e) for e in echoes] + [(e, e) for e in echoes]
        k = make_kripke(['s0', *echoes], 's0', edges, ['o1', 'o2'], {'s0': [], **echoes})
        assert not holds(k, qif_min_entropy_bound([], ['o1', 'o2'], 1))
        options = CheckOptions(engine='bounded', stem_bound=2, loop_bound=1, assume_complete=True)
        verdict = check(k, make_specification(qif_min_entropy_bound([], ['o1', 'o2'], 2)), options)
        assert verdict.outcome is Outcome.HOLDS

    def test_min_entropy_bound_limits(self):
        with pytest.raises(SizeCapError):
            qif_min_entropy_bound(['l'], ['o'], 3, max_n=2)
        with pytest.raises(PropertyError):
            qif_min_entropy_bound(['l'], ['o'], -1)


class TestCodingProperties:

    def test_hamming_distance_counts_differences(self):
        words = [word_lasso(w) for w in all_words(['a'], 1, 2)]
        for d in range(3):
            f = hamming_at_most(['a'], d, 'p', 'q')
            for p in words:
                for q in words:
                    assert ltl_holds(f, {'p': p, 'q': q}) == (differences(p, q, {'a'}) <= d)

    def test_min_distance(self):
        words = [word_lasso(w) for w in all_words(['i', 'c'], 1, 1)]
        matrix = min_distance_spec(['i'], ['c'], 2).body.body
        for p in words:
            for q in words:
                inputs_differ = differences(p, q, {'i'}) > 0
                expected = not inputs_differ or differences(p, q, {'c'}) >= 2
                assert ltl_holds(matrix, {'pi1': p, 'pi2': q}) == expected

    def test_three_difference_encoder(self):
        states = ['s0', 'a0', 'a1', 'a2', 'b0', 'b1', 'b2', 'z']
        edges = [('s0', 'a0'), ('a0', 'a1'), ('a1', 'a2'), ('a2', 'z'),
                 ('s0', 'b0'), ('b0', 'b1'), ('b1', 'b2'), ('b2', 'z'), ('z', 'z')]
        labels = {'b0': ['i', 'c'], 'b1': ['c'], 'b2': ['c']}
        k = make_kripke(states, 's0', edges, ['i', 'c'], {s: labels.get(s, []) for s in states})
        assert holds(k, min_distance_spec(['i'], ['c'], 3))
        verdict = check(k, make_specification(min_distance_spec(['i'], ['c'], 4)))
        assert verdict.outcome is Outcome.FAILS
        p, q = verdict.witness
        assert p.valuation(1) != q.valuation(1)

    def test_distance_bounds(self):
        with pytest.raises(PropertyError):
            min_distance_spec(['i'], ['c'], 0)
        with pytest.raises(PropertyError):
            hamming_at_most(['a'], -1, 'p', 'q')

    def test_single_insertion(self):
        def lasso(*stem):
            return Lasso(tuple(('w', frozenset(v)) for v in stem), (('w', frozenset()),))

        f = edit_insertion(['a'], 'p', 'q')
        original = lasso('a', '', 'a')
        assert ltl_holds(f, {'p': original, 'q': lasso('a', 'a', '', 'a')})
        assert ltl_holds(f, {'p': original, 'q': original})
        assert not ltl_holds(f, {'p': original, 'q': lasso('a', 'a', 'a')})


class TestStateMachines:

    def test_parse_and_format(self):
        m = parse_gm(NONINTERFERING_GM)
        assert m.users == ('H', 'L')
        assert m.run([('H', 'a'), ('L', 'a')]) == 's1'
        assert m.observe([('H', 'a')], ['L']) == ('zero',)
        assert format_gm(parse_gm(format_gm(m))) == format_gm(m)

    def test_incomplete_machine(self):
        text = NONINTERFERING_GM.replace("do s1 L a -> s1\n", "")
        with pytest.raises(ModelFileError, match=r"do is undefined for \(s1, L, a\)"):
            parse_gm(text)

    def test_unparseable_line(self):
        with pytest.raises(ModelFileError) as info:
            parse_gm("states s0\ninit s0\ndo s0 H -> s0\n")
        assert info.value.line == 3

    def test_purge(self):
        assert purge([('H', 'a'), ('L', 'b'), ('H', 'c')], ['H']) == (('L', 'b'),)

    def test_encoding(self):
        m = parse_gm(NONINTERFERING_GM)
        k = encode_gm(m)
        assert k.label('s0') == frozenset({out_prop('H', 'zero'), out_prop('L', 'zero')})
        assert k.label('(s1,H,a)') == frozenset({cmd_prop('H', 'a'), out_prop('H', 'one'),
                                                 out_prop('L', 'zero')})
        for state in k.states:
            assert len(k.successors(state)) == 2

    def test_noninterfering_machine(self):
        m = parse_gm(NONINTERFERING_GM)
        assert gm_interference(m, ['H'], ['L'], 4) is None
        assert holds(encode_gm(m), gm_noninterference(m, ['H'], ['L']))

    def test_interfering_machine(self):
        m = parse_gm(NONINTERFERING_GM.replace("out s1 L -> zero", "out s1 L -> one"))
        assert gm_interference(m, ['H'], ['L'], 4) == (('H', 'a'),)
        assert not holds(encode_gm(m), gm_noninterference(m, ['H'], ['L']))

    def test_unknown_user(self):
        with pytest.raises(PropertyError):
            gm_noninterference(parse_gm(NONINTERFERING_GM), ['H'], ['M'])

    @pytest.mark.slow
    def test_formula_agrees_with_word_search(self, rng):
        for _ in range(100):
            m = random_gm(rng)
            expected = gm_interference(m, ['H'], ['L'], 4) is None
            assert holds(encode_gm(m), gm_noninterference(m, ['H'], ['L'])) == expected

    def test_password_checker_leaks_through_login(self):
        m = password_checker(1)
        word = gm_interference(m, ['A'], ['B'], 2)
        assert word is not None
        with pytest.raises(PropertyError):
            password_checker(0)

    @pytest.mark.slow
    def test_password_noninterference(self):
        safe, leaky = password_checker(1), password_checker(1, leaky=True)
        assert holds(encode_gm(safe), password_noninterference(safe, 1))
        assert not holds(encode_gm(leaky), password_noninterference(leaky, 1))
        assert not holds(encode_gm(safe), gm_noninterference(safe, ['A'], ['B']))


class TestSecLtl:

    def test_encoding_moves_labels_onto_states(self):
        m = parse_secltl(COPYING_SECLTL)
        k = encode_secltl(m)
        assert k.init == SECLTL_INIT
        assert k.label(SECLTL_INIT) == frozenset()
        assert set(k.successors(SECLTL_INIT)) == {'q0:h.o', 'q0:'}
        assert k.label('q0:h.o') == frozenset({'h', 'o'})

    def test_output_copying_the_secret_is_caught(self):
        m = parse_secltl(COPYING_SECLTL)
        f = secltl_property(m.high, m.outputs, m.inputs, release=FALSE)
        assert not holds(encode_secltl(m), f)

    def test_agrees_with_pair_search(self, rng):
        pair_search_sweep(rng, 10)

    @pytest.mark.slow
    def test_pair_search_sweep(self, rng):
        pair_search_sweep(rng, 60)

    def test_secret_released_by_a_low_input(self):
        # the first h is remembered and shown on o only after l was set
        m = make_secltl(['q0', 'a0', 'a1', 'r0', 'r1'], 'q0',
                        [('q0', {'h'}, 'a1'), ('q0', set(), 'a0'),
                         ('a1', set(), 'a1'), ('a1', {'l'}, 'r1'),
                         ('a0', set(), 'a0'), ('a0', {'l'}, 'r0'),
                         ('r1', {'o'}, 'r1'), ('r0', set(), 'r0')],
                        'hlo', 'hl', 'h', 'o')
        k = encode_secltl(m)
        assert secltl_hidden_forever_fails(m)
        assert not holds(k, secltl_property(m.high, m.outputs, m.inputs, release=FALSE))
        assert holds(k, secltl_property(m.high, m.outputs, m.inputs, release=Atom('l', 'pi')))
        assert not holds(k, secltl_property(m.high, m.outputs, m.inputs, release=Atom('o', 'pi')))

    def test_alternatives_with_other_low_inputs_are_not_compared(self):
        m = make_secltl(['q0', 'q1', 'q2'], 'q0',
                        [('q0', {'l'}, 'q1'), ('q0', set(), 'q2'),
                         ('q1', {'o'}, 'q1'), ('q2', set(), 'q2')],
                        'hlo', 'hl', 'h', 'o')
        assert not secltl_hidden_forever_fails(m)
        assert holds(encode_secltl(m), secltl_property(m.high, m.outputs, m.inputs, release=FALSE))

    def test_release_is_read_on_the_main_path(self):
        f = secltl_hide(['h'], ['o'], ['h', 'l'], parse_formula("o[x]", strict=False))
        assert isinstance(f, Forall) and f.var == 'pi_alt'
        assert isinstance(f.body, Implies)
        assert f.body.right.left == Atom('o', 'pi')

    def test_hidden_variables_must_be_inputs(self):
        with pytest.raises(PropertyError):
            secltl_hide(['o'], ['o'], ['h'])

    def test_undeclared_variable_on_edge(self):
        with pytest.raises(ModelFileError) as info:
            parse_secltl(COPYING_SECLTL + "edge q0 {z=1} q0\n")
        assert info.value.line == 9

    def test_state_without_edge(self):
        with pytest.raises(ModelFileError, match="q1 has no outgoing edge"):
            make_secltl(['q0', 'q1'], 'q0', [('q0', {'h'}, 'q1')], 'hlo', 'hl', 'h', 'o')


class TestInterpretedSystems:

    def test_parse(self):
        i = parse_interpreted(COUNTER_SYSTEM)
        assert i.agents == 1
        assert i.initial == (('x',),)
        assert i.steps[('x',)] == (('y',),)

    def test_agent_count_must_be_a_number(self):
        with pytest.raises(ModelFileError):
            parse_interpreted(COUNTER_SYSTEM.replace("agents 1", "agents one"))

    def test_points_must_match_agent_count(self):
        with pytest.raises(ModelFileError, match="not a tuple of 2 observations"):
            make_interpreted(2, ['x'], [], [('x',)], [(('x',), ('x',))], {})

    def test_encoding(self):
        k = encode_interpreted(parse_interpreted(COUNTER_SYSTEM))
        assert k.init == INTERPRETED_INIT
        assert k.successors(INTERPRETED_INIT) == ('(x)',)
        assert k.label('(y)') == frozenset({'p', 'obs1_y'})
        assert k.aps == frozenset({'p', 'obs1_x', 'obs1_y'})

    def test_clock_saturates(self):
        k = encode_interpreted(parse_interpreted(COUNTER_SYSTEM), clock=1)
        assert k.label('(x)@0') == frozenset({'obs1_x', 'clk0'})
        assert k.successors('(y)@1') == ('(y)@1',)
        assert observer_props(parse_interpreted(COUNTER_SYSTEM), 1, clock=1) == \
            frozenset({'obs1_x', 'obs1_y', 'clk0', 'clk1'})

    def test_observer_out_of_range(self):
        with pytest.raises(PropertyError):
            observer_props(parse_interpreted(COUNTER_SYSTEM), 2)

    def test_stutter_extension(self, toggle):
        k = stutter_extension(toggle)
        assert len(k.states) == 4
        assert k.init == 's0~stutter'
        assert set(k.successors('s0~move')) == {'s0~stutter', 's1~move'}
        assert k.label('s1~stutter') == frozenset({'a', STUTTER})
        assert MOVE in k.aps
        with pytest.raises(PropertyError):
            stutter_extension(k)

    def test_stuttering_encoding(self):
        k = encode_interpreted(parse_interpreted(COUNTER_SYSTEM), stuttering=True)
        assert k.init == f"{INTERPRETED_INIT}~{STUTTER}"
        assert len(k.states) == 6


class TestKnowledgeElimination:

    @pytest.mark.parametrize("text, expected", [
        ("forall pi. X (o[pi] -> K{o} o[pi])", Outcome.HOLDS),
        ("forall pi. X (o[pi] -> K{o} x[pi])", Outcome.FAILS),
        ("forall pi. X !K{o} x[pi]", Outcome.HOLDS),
        ("forall pi. X !K{o} o[pi]", Outcome.FAILS),
    ])
    def test_eliminated_formula_agrees(self, knowledge_model, text, expected):
        options = CheckOptions(engine='bounded', assume_complete=True, stem_bound=2, loop_bound=1,
                               knowledge_mode='sync')
        f = parse_formula(text)
        g = eliminate_knowledge(f, 'sync', knowledge_model)
        assert not any(isinstance(node, Knows) for node in subformulas(g))
        assert check(knowledge_model, make_specification(f), options).outcome is expected
        assert check(knowledge_model, make_specification(g), options).outcome is expected

    def test_alternatives_only_keep_in_step_on_the_compared_prefix(self):
        # the observed path sees p only after r; the other branch never does
        k = stutter_extension(make_kripke(
            ['s0', 'a1', 'a2', 'b1'], 's0',
            [('s0', 'a1'), ('a1', 'a2'), ('a2', 'a2'), ('s0', 'b1'), ('b1', 'b1')],
            ['p', 'q', 'r'], {'a1': ['q', 'r'], 'a2': ['p', 'q']}))
        f = parse_formula("exists pi. F (r[pi] & K{p} q[pi])")
        g = eliminate_knowledge(f, 'async', k)
        direct = evaluate_knowledge(PathAssignment(), f, k, ExplicitDomain(prefix_lassos(k, 3)), 'async')
        assert direct is False
        assert evaluate_semantics(PathAssignment(), g, k, elimination_domain(k, g, 3)) is False

    @pytest.mark.slow
    @pytest.mark.parametrize("mode", ['sync', 'async'])
    def test_eliminated_formula_agrees_on_interpreted_systems(self, rng, mode):
        props = [obs_prop(2, '0'), obs_prop(2, '1'), 'a']
        for _ in range(20):
            system = random_interpreted(rng, visible_moves=(mode == 'async'))
            if mode == 'sync':
                k = encode_interpreted(system, clock=2)
                observer = observer_props(system, 1, clock=2)
            else:
                k = encode_interpreted(system, stuttering=True)
                observer = observer_props(system, 1)
            base = ExplicitDomain(prefix_lassos(k, 3))
            psi = random_ltl(rng, 1, props, ['pi'], kinds=('and', 'or'))
            for f in (Forall('pi', Next(Next(Knows(observer, psi)))),
                      Exists('pi', Next(Next(Not(Knows(observer, psi)))))):
                g = eliminate_knowledge(f, mode, k)
                expected = evaluate_knowledge(PathAssignment(), f, k, base, mode)
                actual = evaluate_semantics(PathAssignment(), g, k, elimination_domain(k, g, 3))
                assert actual == expected, print_formula(f)

    def test_without_knowledge_is_unchanged(self):
        f = parse_formula("forall pi. G o[pi]")
        assert eliminate_knowledge(f) is f

    def test_async_needs_stutter_extension(self, knowledge_model):
        f = parse_formula("forall pi. K{o} o[pi]")
        with pytest.raises(ModeError):
            eliminate_knowledge(f, 'async', knowledge_model)
        with pytest.raises(ModeError):
            eliminate_knowledge(f, 'eventual')

    def test_async_adds_progress_and_synchrony(self, knowledge_model):
        k = stutter_extension(knowledge_model)
        g = eliminate_knowledge(parse_formula("forall pi. K{o} o[pi]"), 'async', k)
        assert any(isinstance(node, Atom) and node.prop == MOVE for node in subformulas(g))

    def test_quantifier_below_knowledge_is_rejected(self):
        with pytest.raises(PropertyError):
            eliminate_knowledge(parse_formula("forall pi. X exists q. K{o} o[q]"))
