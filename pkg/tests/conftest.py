"""Shared helpers: reference words, hand-built automata, random trees."""

from __future__ import annotations

import random

import pytest

from treepolicy import nested_word as nw
from treepolicy.vpa import BOTTOM, Vpa, complete_with_sink


def events_from_str(text: str) -> list[nw.TaggedSymbol]:
    """Compact trace notation: "<P <D D> P>" means call P, call D, ret D, ret P."""
    events = []
    for token in text.split():
        if token.startswith("<"):
            events.append(nw.call(token[1:]))
        elif token.endswith(">"):
            events.append(nw.ret(token[:-1]))
        else:
            raise ValueError(f"bad token {token!r}")
    return events


def word_from_str(text: str) -> nw.NestedWord:
    return nw.build_nested_word(events_from_str(text))


@pytest.fixture
def payment_word() -> nw.NestedWord:
    """P calls D twice; each D calls E once. Ten symbols, five matched pairs."""
    return word_from_str("<P <D <E E> D> <D <E E> D> P>")


def two_state_vpa() -> Vpa:
    """Hand-built two-state automaton over one endpoint: q0 --call Appt/q0--> q1,
    q1 --ret Appt, q0--> q0; q0 initial and final.  Sink-completed."""
    base = Vpa(
        states=frozenset({"q0", "q1"}),
        initial="q0",
        finals=frozenset({"q0"}),
        alphabet=("Appt",),
        stack_alphabet=frozenset({BOTTOM, "q0"}),
        delta_call={("q0", "Appt"): ("q1", "q0")},
        delta_return={("q1", "q0", "Appt"): "q0"},
    )
    return complete_with_sink(base)


def payment_chain_vpa() -> Vpa:
    """Hand-built chain automaton: start --call P/q_P--> q_P --call D/q_D--> q_D
    --call E/q_DL--> q_DL, with the matching pops walking back.  Start is both
    initial and final.  Sink-completed."""
    base = Vpa(
        states=frozenset({"start", "q_P", "q_D", "q_DL"}),
        initial="start",
        finals=frozenset({"start"}),
        alphabet=("P", "D", "E"),
        stack_alphabet=frozenset({BOTTOM, "q_P", "q_D", "q_DL"}),
        delta_call={
            ("start", "P"): ("q_P", "q_P"),
            ("q_P", "D"): ("q_D", "q_D"),
            ("q_D", "E"): ("q_DL", "q_DL"),
        },
        delta_return={
            ("q_DL", "q_DL", "E"): "q_D",
            ("q_D", "q_D", "D"): "q_P",
            ("q_P", "q_P", "P"): "start",
        },
    )
    return complete_with_sink(base)


def random_tree(rng: random.Random, n_calls: int, alphabet: tuple[str, ...]):
    """A labeled ordered tree with exactly n_calls nodes (not uniform, fine
    for coverage)."""
    label = rng.choice(alphabet)
    if n_calls == 1:
        return (label, ())
    remaining = n_calls - 1
    sizes = []
    while remaining > 0:
        k = rng.randint(1, remaining)
        sizes.append(k)
        remaining -= k
    return (label, tuple(random_tree(rng, k, alphabet) for k in sizes))


def random_rooted_word(rng: random.Random, max_calls: int, alphabet: tuple[str, ...]) -> nw.NestedWord:
    return nw.word_from_tree(random_tree(rng, rng.randint(1, max_calls), alphabet))
