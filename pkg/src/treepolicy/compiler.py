"""Compile policies into deterministic, complete visibly pushdown automata.

Each policy form has its own construction.  The common scheme: simulate the
match regex's DFA on call symbols while pushing the pre-call DFA state, so
that return symbols can backtrack the simulation and retry other branches;
once the shortest match is found, hand the subtree to the inner check
(a second DFA for leaf-path constraints, or an embedded sub-automaton),
and record the verdict in absorbing satisfied/rejected bookkeeping states.

Transition tables are materialized family by family.  Families that encode
behaviour are added first and must never disagree on a key (a disagreement
is a compiler bug and raises).  Reject-valued families and the final
completion sweep only fill holes, never overwrite.

Sub-automata are embedded by prefix-renaming every state and stack symbol,
which keeps state spaces disjoint without global bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import regex as rx
from .errors import CompilerInternalError, EpsilonMatchRegex
from .nested_word import Endpoint
from .policy import (
    AllChildren,
    AllPath,
    CallSeq,
    ExistsChild,
    InnerPolicy,
    Policy,
    PolicyDocument,
    depth,
    fanout,
    header_bits,
    max_dfa_states,
    start_anchor_regex,
)
from .vpa import BOTTOM, Vpa, check_well_formed

# Conventional role names within one construction; embedding renames them.
BEG = "beg"
END = "end"
SAT = "sat"
REJ = "rej"
EXISTS = "exists"


def _aug(state: str) -> str:
    return f"aug({state})"


@dataclass(frozen=True)
class _DfaFrag:
    """A minimal DFA relabeled with string state names for embedding."""

    states: tuple[str, ...]
    initial: str
    finals: frozenset[str]
    nonfinals: tuple[str, ...]
    delta: dict[tuple[str, Endpoint], str]


def _frag(d: rx.Dfa, tag: str) -> _DfaFrag:
    name = {q: f"{tag}{q}" for q in d.states}
    states = tuple(name[q] for q in d.states)
    finals = frozenset(name[q] for q in d.finals)
    delta = {(name[q], s): name[t] for (q, s), t in d.transition.items()}
    return _DfaFrag(
        states,
        name[d.initial],
        finals,
        tuple(q for q in states if q not in finals),
        delta,
    )


def _frag_fresh_initial(d: rx.Dfa, tag: str) -> _DfaFrag:
    """Like ``_frag`` but with a duplicated, non-reentrant initial state.

    The start construction resumes the anchor DFA when a checked subtree
    returns, guarded by "the popped state is not the initial one"; giving
    the DFA an initial state that is never re-entered (and hence never
    pushed) keeps that guard vacuous instead of wrong.
    """
    base = _frag(d, tag)
    init = f"{tag}init"
    delta = dict(base.delta)
    for s in d.alphabet:
        delta[(init, s)] = base.delta[(base.initial, s)]
    return _DfaFrag(
        (init,) + base.states,
        init,
        base.finals,
        (init,) + base.nonfinals,
        delta,
    )


class _Build:
    """Accumulates transition families with conflict detection.

    ``fallback=True`` marks reject-flavoured completion families: they fill
    only undefined keys.  Primary families must agree wherever they overlap.
    Tuples whose source state or stack symbol falls outside the automaton
    are silently dropped (the source rules quantify over larger sets);
    destinations must always land inside.
    """

    def __init__(self, states: set[str], initial: str, final: str, reject: str,
                 alphabet: Sequence[Endpoint], gamma: set[str]):
        self.states = states
        self.initial = initial
        self.final = final
        self.reject = reject
        self.alphabet = tuple(alphabet)
        self.gamma = gamma  # pushable symbols; BOTTOM handled separately
        self.calls: dict[tuple[str, str], tuple[str, str]] = {}
        self.returns: dict[tuple[str, str, str], str] = {}

    def call(self, family: str, src: str, sym: str, dst: str, push: str,
             fallback: bool = False):
        if src not in self.states:
            return
        assert dst in self.states, f"{family}: call target {dst!r} unknown"
        assert push in self.gamma, f"{family}: pushes undeclared symbol {push!r}"
        key = (src, sym)
        if key in self.calls:
            if fallback:
                return
            if self.calls[key] != (dst, push):
                raise CompilerInternalError(
                    f"{family}: call conflict at {key}: "
                    f"{self.calls[key]} vs {(dst, push)}"
                )
            return
        self.calls[key] = (dst, push)

    def ret(self, family: str, src: str, pop: str, sym: str, dst: str,
            fallback: bool = False):
        if src not in self.states or pop not in self.gamma:
            return
        assert dst in self.states, f"{family}: return target {dst!r} unknown"
        key = (src, pop, sym)
        if key in self.returns:
            if fallback:
                return
            if self.returns[key] != dst:
                raise CompilerInternalError(
                    f"{family}: return conflict at {key}: "
                    f"{self.returns[key]} vs {dst}"
                )
            return
        self.returns[key] = dst

    def finish(self) -> Vpa:
        """Complete both tables into the reject state and freeze."""
        for q in self.states:
            for s in self.alphabet:
                self.calls.setdefault((q, s), (self.reject, self.reject))
        stack_alphabet = set(self.gamma) | {BOTTOM}
        for q in self.states:
            for g in stack_alphabet:
                for s in self.alphabet:
                    self.returns.setdefault((q, g, s), self.reject)
        assert self.reject in self.gamma
        return Vpa(
            frozenset(self.states),
            self.initial,
            frozenset({self.final}),
            self.alphabet,
            frozenset(stack_alphabet),
            self.calls,
            self.returns,
        )


def _rename_vpa(v: Vpa, prefix: str) -> Vpa:
    def st(q: str) -> str:
        return prefix + q

    def sy(g: str) -> str:
        return g if g == BOTTOM else prefix + g

    return Vpa(
        frozenset(st(q) for q in v.states),
        st(v.initial),
        frozenset(st(q) for q in v.finals),
        v.alphabet,
        frozenset(sy(g) for g in v.stack_alphabet),
        {(st(q), s): (st(q2), sy(g)) for (q, s), (q2, g) in v.delta_call.items()},
        {(st(q), sy(g), s): st(q2) for (q, g, s), q2 in v.delta_return.items()},
    )


def _single_final(v: Vpa) -> str:
    assert len(v.finals) == 1
    return next(iter(v.finals))


def _require_no_epsilon(reg: rx.Regex):
    if rx.matches_epsilon(reg):
        raise EpsilonMatchRegex("match regex must not accept the empty string")


# -- linear sequence construction --------------------------------------------


def compile_callseq(reg: rx.Regex, alphabet: Iterable[Endpoint]) -> Vpa:
    """Run the regex DFA over call symbols only; returns keep the state.
    The root's return (recognized by its begin-marker stack symbol) accepts
    iff the DFA sits in a final state."""
    alpha = tuple(alphabet)
    a1 = _frag(rx.to_dfa(reg, alpha), "a")
    states = {BEG, END, REJ, *a1.states}
    gamma = set(states)  # the whole state set doubles as the stack alphabet
    b = _Build(states, BEG, END, REJ, alpha, gamma)

    for s in alpha:
        b.call("c-sim", BEG, s, a1.delta[(a1.initial, s)], BEG)
        for q in a1.states:
            b.call("c-sim", q, s, a1.delta[(q, s)], q)

    for s in alpha:
        for f in a1.finals:
            b.ret("r-accept", f, BEG, s, END)
        for q in a1.states:
            for g in a1.states:
                b.ret("r-skip", q, g, s, q)

    return b.finish()


# -- all-path construction ----------------------------------------------------


def compile_allpath(reg1: rx.Regex, reg2: rx.Regex, alphabet: Iterable[Endpoint]) -> Vpa:
    """Find the shortest path matching reg1 (DFA A1, pushing pre-call
    states for backtracking), then check every leaf path of the matched
    subtree against reg2 (DFA A2, with augmented copies of A2 states used
    as resume points after each completed child)."""
    _require_no_epsilon(reg1)
    alpha = tuple(alphabet)
    a1 = _frag(rx.to_dfa(reg1, alpha), "a")
    a2 = _frag(rx.to_dfa(reg2, alpha), "b")
    augs = {q: _aug(q) for q in a2.states}

    states = {BEG, END, SAT, REJ, *a1.states, *a2.states, *augs.values()}
    gamma = {BEG, SAT, REJ, *a1.nonfinals, *augs.values()}
    b = _Build(states, BEG, END, REJ, alpha, gamma)

    # c1: simulate A1 while searching for the matched path.
    for s in alpha:
        b.call("c1", BEG, s, a1.delta[(a1.initial, s)], BEG)
        for q in a1.nonfinals:
            b.call("c1", q, s, a1.delta[(q, s)], q)

    # c2: simulate A2 inside the matched subtree, pushing augmented states.
    for s in alpha:
        for f in a1.finals:
            b.call("c2", f, s, a2.delta[(a2.initial, s)], augs[a2.initial])
        for q in a2.states:
            b.call("c2", q, s, a2.delta[(q, s)], augs[q])
            b.call("c2", augs[q], s, a2.delta[(q, s)], augs[q])

    # c3: absorbing bookkeeping states.
    for s in alpha:
        b.call("c3", SAT, s, SAT, SAT)
        b.call("c3", REJ, s, REJ, REJ)
        b.call("c3", END, s, REJ, REJ)

    # r1: backtrack A1; a rejected subtree resumes the search.
    for s in alpha:
        for q in a1.nonfinals:
            for g in a1.nonfinals:
                b.ret("r1", q, g, s, g)
            b.ret("r1", q, BEG, s, q)
            b.ret("r1", REJ, q, s, q)

    # r2: transitions into the satisfied marker and into acceptance.
    for s in alpha:
        for f in a1.finals:
            for g in a1.nonfinals:
                b.ret("r2", f, g, s, SAT)  # matched node was a leaf
            b.ret("r2", f, BEG, s, END)
        for g in (*a1.nonfinals, *augs.values(), SAT, REJ):
            b.ret("r2", SAT, g, s, SAT)
        for g in a1.nonfinals:
            if a1.delta[(g, s)] in a1.finals:
                b.ret("r2", augs[a2.initial], g, s, SAT)  # matched subtree done
        b.ret("r2", augs[a2.initial], BEG, s, END)
        b.ret("r2", SAT, BEG, s, END)

    # r3: backtrack A2 within the matched subtree.
    for s in alpha:
        for q in a2.finals:
            for g in augs.values():
                b.ret("r3", q, g, s, g)  # leaf path accepted by A2
        for q in a2.states:
            for g in a1.nonfinals:
                b.ret("r3", q, g, s, g)
        for q in augs.values():
            for g in augs.values():
                b.ret("r3", q, g, s, g)
        for g in a1.nonfinals:
            if a1.delta[(g, s)] not in a1.finals:
                b.ret("r3", augs[a2.initial], g, s, g)
        for q in a2.states:
            if q != a2.initial:
                for g in a1.nonfinals:
                    b.ret("r3", augs[q], g, s, g)

    # r4: reject-valued completion family.
    for s in alpha:
        for q in a1.states:
            b.ret("r4", q, SAT, s, REJ, fallback=True)
            b.ret("r4", q, REJ, s, REJ, fallback=True)
            for g in augs.values():
                b.ret("r4", q, g, s, REJ, fallback=True)
        for q in a2.nonfinals:
            for g in augs.values():
                b.ret("r4", q, g, s, REJ, fallback=True)  # leaf path failed A2
        for q in a2.states:
            for g in (BEG, SAT, REJ):
                b.ret("r4", q, g, s, REJ, fallback=True)
        for q in augs.values():
            for g in (SAT, REJ):
                b.ret("r4", q, g, s, REJ, fallback=True)
            if q != augs[a2.initial]:
                b.ret("r4", q, BEG, s, REJ, fallback=True)
        for g in (REJ, SAT, BEG, *augs.values()):
            b.ret("r4", REJ, g, s, REJ, fallback=True)
        for g in gamma:
            b.ret("r4", BEG, g, s, REJ, fallback=True)
            b.ret("r4", END, g, s, REJ, fallback=True)

    return b.finish()


# -- all-children construction ------------------------------------------------


def compile_allchildren(reg: rx.Regex, child: Vpa, alphabet: Iterable[Endpoint]) -> Vpa:
    """Find the shortest path matching reg, then run the child automaton on
    every child subtree of the matched node, restarting it from its initial
    behaviour each time it accepts; one failing subtree rejects."""
    _require_no_epsilon(reg)
    alpha = tuple(alphabet)
    a1 = _frag(rx.to_dfa(reg, alpha), "a")
    c = _rename_vpa(child, "c.")
    cbeg = c.initial
    cend = _single_final(c)
    cgamma = c.stack_alphabet - {BOTTOM}
    cstates = c.states

    states = {BEG, END, SAT, REJ, *cstates, *a1.states}
    gamma = set(cgamma) | {BEG, SAT, REJ, *a1.nonfinals}
    b = _Build(states, BEG, END, REJ, alpha, gamma)

    # c1: simulate A1.
    for s in alpha:
        b.call("c1", BEG, s, a1.delta[(a1.initial, s)], BEG)
        for q in a1.nonfinals:
            b.call("c1", q, s, a1.delta[(q, s)], q)

    # c2: child transitions; the matched node and the child's accept state
    # both behave like the child's initial state on calls.
    for (q, s), (dst, push) in c.delta_call.items():
        if q == cbeg:
            for f in a1.finals:
                b.call("c2", f, s, dst, push)
            b.call("c2", cend, s, dst, push)
            b.call("c2", cbeg, s, dst, push)
        elif q != cend:
            b.call("c2", q, s, dst, push)

    # c3: absorbing bookkeeping.
    for s in alpha:
        b.call("c3", SAT, s, SAT, SAT)
        b.call("c3", REJ, s, REJ, REJ)
        b.call("c3", END, s, REJ, REJ)

    # r1: child transitions, except that a child subtree completing in a
    # non-accepting child state rejects (recognized by the child's begin
    # marker on the stack).
    for (q, g, s), dst in c.delta_return.items():
        if q == cend or g == BOTTOM:
            continue
        if g == cbeg and dst not in c.finals:
            b.ret("r1", q, g, s, REJ)
        else:
            b.ret("r1", q, g, s, dst)

    # r2: A1 backtracking and retry.
    for s in alpha:
        for g in a1.nonfinals:
            if a1.delta[(g, s)] not in a1.finals:
                b.ret("r2", cend, g, s, g)
            b.ret("r2", REJ, g, s, g)
            for q in (*a1.nonfinals, *(q for q in cstates if q not in c.finals)):
                b.ret("r2", q, g, s, g)
        for q in a1.nonfinals:
            b.ret("r2", q, BEG, s, q)

    # r3: satisfied marker.
    for s in alpha:
        for g in a1.nonfinals:
            if a1.delta[(g, s)] in a1.finals:
                b.ret("r3", cend, g, s, SAT)
        for g in (*a1.nonfinals, *cgamma, SAT, REJ):
            b.ret("r3", SAT, g, s, SAT)
        for f in a1.finals:
            for g in a1.nonfinals:
                b.ret("r3", f, g, s, SAT)

    # r4: acceptance at the root's return.
    for s in alpha:
        for f in a1.finals:
            b.ret("r4", f, BEG, s, END)
        b.ret("r4", cend, BEG, s, END)
        b.ret("r4", SAT, BEG, s, END)

    # r5: reject-valued completion family.
    for s in alpha:
        for g in (*cgamma, BEG, SAT, REJ):
            b.ret("r5", REJ, g, s, REJ, fallback=True)
        for q in a1.states:
            b.ret("r5", q, SAT, s, REJ, fallback=True)
            b.ret("r5", q, REJ, s, REJ, fallback=True)
            for g in cgamma:
                b.ret("r5", q, g, s, REJ, fallback=True)
        for q in cstates:
            b.ret("r5", q, SAT, s, REJ, fallback=True)
            b.ret("r5", q, REJ, s, REJ, fallback=True)
            if q not in c.finals:
                b.ret("r5", q, BEG, s, REJ, fallback=True)
        for g in gamma:
            b.ret("r5", BEG, g, s, REJ, fallback=True)
            b.ret("r5", END, g, s, REJ, fallback=True)

    return b.finish()


# -- exists-child construction ------------------------------------------------


def compile_exists(reg: rx.Regex, subpolicies: Sequence[Vpa],
                   alphabet: Iterable[Endpoint]) -> Vpa:
    """Find the shortest path matching reg, then thread the sub-automata
    over the matched node's child subtrees: each accepted subtree advances
    to the next sub-automaton, each rejected subtree retries the current
    one on the following sibling."""
    _require_no_epsilon(reg)
    assert subpolicies, "exists-child needs at least one subpolicy"
    alpha = tuple(alphabet)
    a1 = _frag(rx.to_dfa(reg, alpha), "a")
    subs = [_rename_vpa(v, f"c{i + 1}.") for i, v in enumerate(subpolicies)]
    k = len(subs)
    begs = [v.initial for v in subs]
    ends = [_single_final(v) for v in subs]
    gammas = [v.stack_alphabet - {BOTTOM} for v in subs]
    all_sub_states = set().union(*(v.states for v in subs))

    states = {BEG, END, REJ, EXISTS, SAT, *a1.states, *all_sub_states}
    gamma = {BEG, REJ, EXISTS, SAT, *a1.nonfinals}.union(*gammas)
    b = _Build(states, BEG, END, REJ, alpha, gamma)

    # c1: simulate A1; the matched node hands over to the first sub-automaton.
    for s in alpha:
        b.call("c1", BEG, s, a1.delta[(a1.initial, s)], BEG)
        for q in a1.nonfinals:
            b.call("c1", q, s, a1.delta[(q, s)], q)
    for (q, s), (dst, push) in subs[0].delta_call.items():
        if q == begs[0]:
            for f in a1.finals:
                b.call("c1", f, s, dst, push)

    # c2: sub-automata transitions; an accept state behaves like the next
    # sub-automaton's initial state.
    for i, v in enumerate(subs):
        for (q, s), (dst, push) in v.delta_call.items():
            if q == ends[i]:
                continue
            b.call("c2", q, s, dst, push)
        if i + 1 < k:
            for (q, s), (dst, push) in subs[i + 1].delta_call.items():
                if q == begs[i + 1]:
                    b.call("c2", ends[i], s, dst, push)

    # c3: bookkeeping; once all k subtrees are found the run coasts in the
    # exists marker.
    for s in alpha:
        b.call("c3", ends[k - 1], s, EXISTS, EXISTS)
        b.call("c3", EXISTS, s, EXISTS, EXISTS)
        b.call("c3", SAT, s, SAT, SAT)
        b.call("c3", REJ, s, REJ, REJ)
        b.call("c3", END, s, REJ, REJ)

    # r1: sub-automata transitions with retry: a subtree failing the current
    # sub-policy resets to that sub-policy's initial state.
    for i, v in enumerate(subs):
        for (q, g, s), dst in v.delta_return.items():
            if g == BOTTOM:
                continue
            if g == begs[i] and dst not in v.finals:
                b.ret("r1", q, g, s, begs[i])
            else:
                b.ret("r1", q, g, s, dst)

    # r2: A1 backtracking.
    for s in alpha:
        for g in a1.nonfinals:
            for q in all_sub_states:
                if q != ends[k - 1]:
                    b.ret("r2", q, g, s, g)
            for q in a1.states:
                b.ret("r2", q, g, s, g)
            b.ret("r2", REJ, g, s, g)
            if a1.delta[(g, s)] not in a1.finals:
                b.ret("r2", ends[k - 1], g, s, g)

    # r3: satisfied/exists markers.
    for s in alpha:
        for g in a1.nonfinals:
            if a1.delta[(g, s)] in a1.finals:
                b.ret("r3", ends[k - 1], g, s, SAT)
                b.ret("r3", EXISTS, g, s, SAT)
        for g in gamma - {BEG}:
            b.ret("r3", SAT, g, s, SAT)
        for g in gamma - set(a1.nonfinals) - {BEG}:
            b.ret("r3", EXISTS, g, s, EXISTS)

    # r5: acceptance at the root's return.
    for s in alpha:
        b.ret("r5", SAT, BEG, s, END)
        b.ret("r5", ends[k - 1], BEG, s, END)
        b.ret("r5", EXISTS, BEG, s, END)

    # r4: reject-valued completion family.
    for s in alpha:
        for q in a1.states:
            b.ret("r4", q, BEG, s, REJ, fallback=True)
        for g in gamma - set(a1.nonfinals):
            b.ret("r4", REJ, g, s, REJ, fallback=True)
        for q in states - {SAT, EXISTS}:
            b.ret("r4", q, REJ, s, REJ, fallback=True)
        for g in gamma:
            b.ret("r4", BEG, g, s, REJ, fallback=True)
            b.ret("r4", END, g, s, REJ, fallback=True)
        for g in a1.nonfinals:
            if a1.delta[(g, s)] not in a1.finals:
                b.ret("r4", EXISTS, g, s, REJ, fallback=True)
        for q in subs[k - 1].states:
            if q != ends[k - 1]:
                b.ret("r4", q, BEG, s, REJ, fallback=True)
        for i in range(k - 1):
            for q in subs[i].states:
                b.ret("r4", q, BEG, s, REJ, fallback=True)
        for i, v in enumerate(subs):
            other = set().union(*(gammas[j] for j in range(k) if j != i)) if k > 1 else set()
            for q in v.states:
                for g in (*other, BEG, EXISTS, SAT):
                    b.ret("r4", q, g, s, REJ, fallback=True)

    return b.finish()


# -- start construction --------------------------------------------------------


def compile_start(start_set: Iterable[Endpoint], inner: Vpa,
                  alphabet: Iterable[Endpoint]) -> Vpa:
    """Anchor the inner automaton at first-encounter start endpoints.

    The anchor DFA recognizes paths ending at a start endpoint with no
    earlier start endpoint; reaching its final state coincides with an
    S-node's call, which jumps straight into the inner automaton's
    post-initial behaviour while pushing the pre-call anchor state.  The
    matching return resumes the anchor from that popped state if the inner
    automaton would accept, and rejects otherwise.  The anchor DFA's final
    states and the inner automaton's initial/final states are fused away.
    """
    alpha = tuple(alphabet)
    sset = frozenset(start_set)
    assert sset and sset <= set(alpha)
    a1 = _frag_fresh_initial(rx.to_dfa(start_anchor_regex(sset), alpha), "a")
    inn = _rename_vpa(inner, "in.")
    ibeg = inn.initial
    iend = _single_final(inn)
    imid = inn.states - {ibeg} - inn.finals

    states = {BEG, END, REJ, *a1.nonfinals, *imid}
    gamma = states - {END}
    b = _Build(states, BEG, END, REJ, alpha, gamma)

    def inner_initial_call(s: Endpoint) -> tuple[str, str]:
        dst, push = inn.delta_call[(ibeg, s)]
        assert push == ibeg, "inner automaton must push its begin marker first"
        return dst, push

    def inner_accepting_return(q: str, s: Endpoint) -> bool:
        return inn.delta_return[(q, ibeg, s)] == iend

    # c1: simulate the anchor DFA; on reaching an S endpoint, enter the
    # inner automaton instead (two cases: root call, deeper call).
    for s in alpha:
        t = a1.delta[(a1.initial, s)]
        if t not in a1.finals:
            b.call("c1", BEG, s, t, BEG)
        else:
            dst, _ = inner_initial_call(s)
            b.call("c1", BEG, s, dst, BEG)
        for q in a1.nonfinals:
            t = a1.delta[(q, s)]
            if t not in a1.finals:
                b.call("c1", q, s, t, q)
            else:
                dst, _ = inner_initial_call(s)
                b.call("c1", q, s, dst, q)

    # c2: inner transitions between its middle states.
    for (q, s), (dst, push) in inn.delta_call.items():
        if q == ibeg or q == iend:
            continue
        b.call("c2", q, s, dst, push)
    for s in alpha:
        b.call("c-rej", REJ, s, REJ, REJ)

    # r1: acceptance at the root's return (anchor still scanning, or the
    # root itself was the S node and its subtree satisfied the inner check).
    for s in alpha:
        t = a1.delta[(a1.initial, s)]
        if t not in a1.finals:
            b.ret("r1", t, BEG, s, END)
        else:
            for q in imid:
                if inner_accepting_return(q, s):
                    b.ret("r1", q, BEG, s, END)

    # r2: anchor backtracking, and resuming the anchor when an S subtree
    # completes successfully.
    for s in alpha:
        for q in a1.nonfinals:
            for g in a1.nonfinals:
                b.ret("r2", q, g, s, g)
        for g in a1.nonfinals:
            if g != a1.initial and a1.delta[(g, s)] in a1.finals:
                for q in imid:
                    if inner_accepting_return(q, s):
                        b.ret("r2", q, g, s, g)

    # r3: inner transitions between its middle states.
    for (q, g, s), dst in inn.delta_return.items():
        if q == ibeg or q == iend or g == BOTTOM:
            continue
        b.ret("r3", q, g, s, dst)

    # r4: reject-valued family (inner violation at an S subtree's return,
    # plus the absorbing reject).
    for s in alpha:
        for g in a1.nonfinals:
            if a1.delta[(g, s)] in a1.finals:
                for q in imid:
                    if not inner_accepting_return(q, s):
                        b.ret("r4", q, g, s, REJ, fallback=True)
        for g in gamma:
            b.ret("r4", REJ, g, s, REJ, fallback=True)

    return b.finish()


# -- whole-policy compilation ---------------------------------------------------


def compile_inner(inner: InnerPolicy, alphabet: Sequence[Endpoint]) -> tuple[Vpa, dict[str, rx.Dfa]]:
    """Compile an inner policy bottom-up; returns the automaton and the
    component DFAs keyed by their position in the policy tree."""
    alpha = tuple(alphabet)
    if isinstance(inner, CallSeq):
        return compile_callseq(inner.reg, alpha), {"seq": rx.to_dfa(inner.reg, alpha)}
    if isinstance(inner, AllPath):
        dfas = {"match": rx.to_dfa(inner.reg1, alpha), "leaves": rx.to_dfa(inner.reg2, alpha)}
        return compile_allpath(inner.reg1, inner.reg2, alpha), dfas
    if isinstance(inner, AllChildren):
        child_vpa, child_dfas = compile_inner(inner.child, alpha)
        dfas = {"match": rx.to_dfa(inner.reg, alpha)}
        dfas.update({f"child.{k}": d for k, d in child_dfas.items()})
        return compile_allchildren(inner.reg, child_vpa, alpha), dfas
    if isinstance(inner, ExistsChild):
        sub_vpas = []
        dfas = {"match": rx.to_dfa(inner.reg, alpha)}
        for i, sub in enumerate(inner.subpolicies, start=1):
            v, sub_dfas = compile_inner(sub, alpha)
            sub_vpas.append(v)
            dfas.update({f"sub{i}.{k}": d for k, d in sub_dfas.items()})
        return compile_exists(inner.reg, sub_vpas, alpha), dfas
    raise TypeError(f"not an inner policy: {inner!r}")


@dataclass(frozen=True)
class Metrics:
    depth: int
    fanout: int
    max_dfa_states: int
    state_count: int
    header_bits: int


@dataclass(frozen=True)
class CompilationArtifacts:
    policy_id: str
    policy: Policy
    vpa: Vpa
    component_dfas: dict[str, rx.Dfa]
    metrics: Metrics
    state_order: tuple[str, ...]  # canonical ordering for header encoding
    reject_states: frozenset[str]  # absorbing states usable for early blocking


def compile_policy(policy: Policy, alphabet: Sequence[Endpoint],
                   policy_id: str = "pol0") -> CompilationArtifacts:
    alpha = tuple(alphabet)
    inner_vpa, inner_dfas = compile_inner(policy.inner, alpha)
    vpa = compile_start(policy.start_set, inner_vpa, alpha)
    report = check_well_formed(vpa)
    if not report.ok:
        raise CompilerInternalError(
            f"compiled automaton is not well-formed: {report.problems[:3]}"
        )
    dfas = {"start": rx.to_dfa(start_anchor_regex(policy.start_set), alpha)}
    dfas.update({f"inner.{k}": d for k, d in inner_dfas.items()})
    metrics = Metrics(
        depth=depth(policy),
        fanout=fanout(policy),
        max_dfa_states=max_dfa_states(policy, alpha),
        state_count=len(vpa.states),
        header_bits=header_bits(len(vpa.states)),
    )
    # Only the linear form has absorbing rejection: its DFA advances on calls
    # and never backtracks, so landing in the reject bookkeeping states or in
    # a DFA state that cannot reach a final state dooms the word, and a
    # monitor may block as soon as a call gets there.
    reject_states: frozenset[str] = frozenset()
    if isinstance(policy.inner, CallSeq):
        seq_dfa = dfas["inner.seq"]
        doomed = _dead_dfa_states(seq_dfa)
        reject_states = frozenset(
            {REJ, f"in.{REJ}"} | {f"in.a{q}" for q in doomed}
        )
    return CompilationArtifacts(
        policy_id=policy_id,
        policy=policy,
        vpa=vpa,
        component_dfas=dfas,
        metrics=metrics,
        state_order=tuple(sorted(vpa.states)),
        reject_states=reject_states & vpa.states,
    )


def compile(doc: PolicyDocument) -> list[CompilationArtifacts]:  # noqa: A001
    return [
        compile_policy(pol, doc.alphabet, policy_id=f"pol{i}")
        for i, pol in enumerate(doc.policies)
    ]


def _dead_dfa_states(d: rx.Dfa) -> set[int]:
    """States from which no final state is reachable."""
    reverse: dict[int, set[int]] = {q: set() for q in d.states}
    for (q, _s), t in d.transition.items():
        reverse[t].add(q)
    alive = set(d.finals)
    todo = list(alive)
    while todo:
        q = todo.pop()
        for p in reverse[q]:
            if p not in alive:
                alive.add(p)
                todo.append(p)
    return set(d.states) - alive


def check_state_bound(a: CompilationArtifacts) -> bool:
    """State count against the analytic bound (k+1)^d * (R+5)."""
    m = a.metrics
    return m.state_count <= (m.fanout + 1) ** m.depth * (m.max_dfa_states + 5)
