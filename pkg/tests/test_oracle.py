"""Denotational semantics: shortest-match paths, the three satisfaction
relations, scope anchoring."""

import random

import pytest

from treepolicy import nested_word as nw
from treepolicy import oracle
from treepolicy import regex as rx
from treepolicy.errors import NotRooted
from treepolicy.policy import parse_policy

from conftest import random_rooted_word, word_from_str

PDE = ("P", "D", "E")


def reg(text, alphabet=PDE):
    return rx.parse_regex(text, alphabet)


def inner_of(text):
    return parse_policy(text).policies[0].inner


def policy_of(text):
    return parse_policy(text).policies[0]


class TestFirstMatch:
    def test_shortest_match_excludes_extensions(self, payment_word):
        got = oracle.first_match(payment_word, reg("P D*"), PDE)
        assert [nw.calls_projection(p) for p in got] == [("P",)]

    def test_empty_regex(self, payment_word):
        assert oracle.first_match(payment_word, rx.EMPTY, PDE) == ()

    def test_both_branches_match(self, payment_word):
        got = oracle.first_match(payment_word, reg("P D"), PDE)
        assert {tuple(a.index for a in p) for p in got} == {(1, 2), (1, 6)}

    def test_not_rooted(self):
        n = nw.build_nested_word([nw.call("P"), nw.call("D")])
        with pytest.raises(NotRooted):
            oracle.first_match(n, reg("P"), PDE)


class TestAllPath:
    def test_payment_word_satisfies(self, payment_word):
        p = inner_of("alphabet P, D, E;\nstart {P}: match (P D*) all-path (star);\n")
        assert oracle.sat_hierarchical(payment_word, p, PDE)

    def test_vacuous_on_leaf(self):
        n = word_from_str("<P P>")
        p = inner_of("alphabet P, D, E;\nstart {P}: match (P) all-path (empty);\n")
        assert oracle.sat_hierarchical(n, p, PDE)

    def test_leaf_constraint(self, payment_word):
        p = inner_of("alphabet P, D, E;\nstart {P}: match (P {D}) all-path ({E} star);\n")
        assert oracle.sat_hierarchical(payment_word, p, PDE)
        # the sole D additionally calls P first -> a leaf path starts with P
        mutated = word_from_str("<P <D <P P> <E E> D> P>")
        assert not oracle.sat_hierarchical(mutated, p, PDE)
        # with a second healthy D branch the existential match retries there
        two_branch = word_from_str("<P <D <P P> <E E> D> <D <E E> D> P>")
        assert oracle.sat_hierarchical(two_branch, p, PDE)

    def test_retry_other_branch(self):
        p = inner_of("alphabet P, D, E;\nstart {P}: match (P D) all-path (E star);\n")
        # first D's subtree fails (leaf D has child P), second D's succeeds
        n = word_from_str("<P <D <P P> D> <D <E E> D> P>")
        assert oracle.sat_hierarchical(n, p, PDE)


class TestAllChildren:
    def test_every_child_checked(self):
        p = inner_of(
            "alphabet T, A, P;\n"
            "start {T}: match (T) all-children (match (star P) all-path (star));\n"
        )
        alpha = ("T", "A", "P")
        good = word_from_str("<T <A <P P> A> <A <P P> A> T>")
        bad = word_from_str("<T <A <P P> A> <A A> T>")
        assert oracle.sat_hierarchical(good, p, alpha)
        assert not oracle.sat_hierarchical(bad, p, alpha)

    def test_vacuous_without_children(self):
        p = inner_of("alphabet A;\nstart {A}: match (A) all-children (match (A) all-path (empty));\n")
        assert oracle.sat_hierarchical(word_from_str("<A A>"), p, ("A",))


class TestExistsChild:
    ALPHA = ("T", "O", "L")
    P = (
        "alphabet T, O, L;\n"
        "start {T}: match (T) exists-child (match (O) all-path (eps))"
        " then (match (L) all-path (eps));\n"
    )

    def test_order_respected(self):
        p = inner_of(self.P)
        assert oracle.sat_hierarchical(word_from_str("<T <O O> <L L> T>"), p, self.ALPHA)
        assert not oracle.sat_hierarchical(word_from_str("<T <L L> <O O> T>"), p, self.ALPHA)

    def test_intervening_children_allowed(self):
        p = inner_of(self.P)
        n = word_from_str("<T <L L> <O O> <T T> <L L> T>")
        assert oracle.sat_hierarchical(n, p, self.ALPHA)

    def test_single_subpolicy(self):
        p = inner_of("alphabet T, O, L;\nstart {T}: match (T) exists-child (match (O) all-path (star));\n")
        assert oracle.sat_hierarchical(word_from_str("<T <O O> T>"), p, self.ALPHA)
        assert not oracle.sat_hierarchical(word_from_str("<T T>"), p, self.ALPHA)


class TestCallSeq:
    def test_payment_sequence(self, payment_word):
        p = inner_of("alphabet P, D, E;\nstart {P}: call-seq P (D E)*;\n")
        assert oracle.sat_linear(payment_word, p, PDE)

    def test_single_pair(self):
        p = inner_of("alphabet A;\nstart {A}: call-seq A;\n")
        assert oracle.sat_linear(word_from_str("<A A>"), p, ("A",))

    def test_interleaved_stars(self, payment_word):
        p = inner_of("alphabet P, D, E;\nstart {P}: call-seq P star D star;\n")
        assert oracle.sat_linear(payment_word, p, PDE)

    def test_rejects(self, payment_word):
        p = inner_of("alphabet P, D, E;\nstart {P}: call-seq P D* ;\n")
        assert not oracle.sat_linear(payment_word, p, PDE)


class TestStartPolicy:
    def test_vacuous_when_start_absent(self):
        pol = policy_of("alphabet F, P, D;\nstart {P}: call-seq empty;\n")
        n = word_from_str("<F <D D> F>")
        assert oracle.sat_policy(n, pol, ("F", "P", "D"))

    def test_nested_subtree_checked(self):
        alpha = ("F", "P", "D", "E")
        pol = policy_of("alphabet F, P, D, E;\nstart {P}: match (P {D}) all-path ({E} star);\n")
        n = word_from_str("<F <P <D <E E> D> <D <E E> D> P> F>")
        assert oracle.sat_policy(n, pol, alpha)
        bad = word_from_str("<F <P <D <F F> D> P> F>")
        assert not oracle.sat_policy(bad, pol, alpha)

    def test_first_encounter_barrier(self):
        # outer A's subtree must satisfy the sequence; the nested A is not
        # independently checked (it would fail alone)
        alpha = ("A", "B", "C")
        pol = policy_of("alphabet A, B, C;\nstart {A}: call-seq A B (A C + eps);\n")
        n = word_from_str("<A <B B> <A <C C> A> A>")
        assert oracle.sat_policy(n, pol, alpha)

    def test_inner_start_violation_counts_inside_outer(self):
        alpha = ("A", "B", "C")
        pol = policy_of("alphabet A, B, C;\nstart {A}: call-seq A (!C)*;\n")
        n = word_from_str("<A <B B> <A <C C> A> A>")
        assert not oracle.sat_policy(n, pol, alpha)

    def test_sibling_subtrees_each_checked(self):
        alpha = ("F", "A", "B")
        pol = policy_of("alphabet F, A, B;\nstart {A}: call-seq A B*;\n")
        good = word_from_str("<F <A <B B> A> <A A> F>")
        bad = word_from_str("<F <A <B B> A> <A <F F> A> F>")
        assert oracle.sat_policy(good, pol, alpha)
        assert not oracle.sat_policy(bad, pol, alpha)


class TestProperties:
    def test_vacuity_property(self):
        rng = random.Random(77)
        pol = policy_of("alphabet A, B, S;\nstart {S}: call-seq empty;\n")
        for _ in range(100):
            n = random_rooted_word(rng, 8, ("A", "B"))  # never contains S
            assert oracle.sat_policy(n, pol, ("A", "B", "S"))

    def test_round_trip_stability(self):
        rng = random.Random(78)
        pol = policy_of("alphabet A, B;\nstart {A}: match (A) all-path (B star + eps);\n")
        for _ in range(100):
            n = random_rooted_word(rng, 7, ("A", "B"))
            rebuilt = nw.build_nested_word(nw.parse_trace(nw.serialize_trace(n)))
            assert oracle.sat_policy(n, pol, ("A", "B")) == oracle.sat_policy(
                rebuilt, pol, ("A", "B")
            )

    def test_exists_order_flips_on_permutation(self):
        alpha = ("T", "O", "L")
        p = inner_of(TestExistsChild.P)
        ordered = word_from_str("<T <O O> <L L> T>")
        swapped = word_from_str("<T <L L> <O O> T>")
        assert oracle.sat_hierarchical(ordered, p, alpha)
        assert not oracle.sat_hierarchical(swapped, p, alpha)
