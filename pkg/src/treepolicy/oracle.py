"""Reference decision procedure for policies on nested words.

Evaluates the set-comprehension semantics directly over paths and subtrees,
with regex membership decided by the derivative matcher.  Nothing here
touches the automaton pipeline, so this module is the independent ground
truth that compiled automata are tested against.  It favours clarity over
speed and is not a monitor.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from . import regex as rx
from .errors import NotRooted
from .nested_word import Endpoint, NestedWord, Path, calls_projection
from .policy import (
    AllChildren,
    AllPath,
    CallSeq,
    ExistsChild,
    Hierarchical,
    InnerPolicy,
    Policy,
    start_anchor_regex,
)


def first_match(n: NestedWord, reg: rx.Regex, alphabet: Iterable[Endpoint]) -> tuple[Path, ...]:
    """Paths whose call projection matches ``reg`` with no matching proper
    prefix (the shortest-match paths)."""
    alpha = tuple(alphabet)
    out = []
    for path in n.seq():
        word = calls_projection(path)
        if not rx.matches(reg, word, alpha):
            continue
        if any(rx.matches(reg, word[:j], alpha) for j in range(1, len(word))):
            continue
        out.append(path)
    return tuple(out)


def _matched_subtree(n: NestedWord, path: Path) -> NestedWord:
    """Slice rooted at the path's terminal call (its matched return exists
    on every rooted well-matched word)."""
    a_i = path[-1]
    x = n.matching.return_of(a_i.index)
    return n.sub_word(a_i.index, int(x))


def sat_hierarchical(n: NestedWord, p: Hierarchical, alphabet: Iterable[Endpoint]) -> bool:
    alpha = tuple(alphabet)
    if isinstance(p, AllPath):
        for path in first_match(n, p.reg1, alpha):
            sub = _matched_subtree(n, path)
            if all(
                rx.matches(p.reg2, calls_projection(leaf_path), alpha)
                for t in sub.subtrees()
                for leaf_path in t.seq_leaf()
            ):
                return True
        return False
    if isinstance(p, AllChildren):
        for path in first_match(n, p.reg, alpha):
            sub = _matched_subtree(n, path)
            if all(sat_hierarchical(t, p.child, alpha) for t in sub.subtrees()):
                return True
        return False
    if isinstance(p, ExistsChild):
        for path in first_match(n, p.reg, alpha):
            sub = _matched_subtree(n, path)
            if _ordered_selection(sub.subtrees(), p.subpolicies, alpha):
                return True
        return False
    raise TypeError(f"not a hierarchical policy: {p!r}")


def _ordered_selection(
    subtrees: Sequence[NestedWord],
    subpolicies: Sequence[Hierarchical],
    alphabet: tuple[Endpoint, ...],
) -> bool:
    """Can subpolicies p1..pk be matched to distinct subtrees in
    left-to-right order?"""

    def go(j: int, pos: int) -> bool:
        if j == len(subpolicies):
            return True
        for t_idx in range(pos, len(subtrees)):
            if sat_hierarchical(subtrees[t_idx], subpolicies[j], alphabet):
                if go(j + 1, t_idx + 1):
                    return True
        return False

    return go(0, 0)


def sat_linear(n: NestedWord, p: CallSeq, alphabet: Iterable[Endpoint]) -> bool:
    if not n.is_rooted():
        raise NotRooted("linear policies are evaluated on rooted words")
    return rx.matches(p.reg, n.call_sequence(), tuple(alphabet))


def sat_inner(n: NestedWord, p: InnerPolicy, alphabet: Iterable[Endpoint]) -> bool:
    if isinstance(p, CallSeq):
        return sat_linear(n, p, alphabet)
    return sat_hierarchical(n, p, alphabet)


def sat_policy(n: NestedWord, pol: Policy, alphabet: Iterable[Endpoint]) -> bool:
    """Every first-encounter subtree rooted in the start set satisfies the
    inner policy; vacuously true when no start endpoint is reachable."""
    alpha = tuple(alphabet)
    anchor = start_anchor_regex(pol.start_set)
    for path in first_match(n, anchor, alpha):
        sub = _matched_subtree(n, path)
        if not sat_inner(sub, pol.inner, alpha):
            return False
    return True
