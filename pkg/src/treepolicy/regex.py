"""Regular expressions over the endpoint alphabet.

Two independent evaluation routes are kept deliberately separate:

* ``to_dfa`` runs the compiler pipeline (Thompson NFA, subset construction,
  Hopcroft minimization, completion with a dead state) and feeds the
  automaton constructions;
* ``matches`` decides membership directly on the syntax tree with Brzozowski
  derivatives and serves as the reference route for the denotational
  semantics and for differential tests.

Sugar nodes (``any``, set literals, complements) desugar against the declared
alphabet before either route runs.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import PolicySyntaxError, UnknownEndpoint
from .nested_word import Endpoint


class Regex:
    """Base class for regex syntax nodes. Nodes are frozen and hashable."""

    __slots__ = ()


@dataclass(frozen=True)
class Symbol(Regex):
    name: Endpoint


@dataclass(frozen=True)
class Epsilon(Regex):
    pass


@dataclass(frozen=True)
class Empty(Regex):
    pass


@dataclass(frozen=True)
class Union(Regex):
    left: Regex
    right: Regex


@dataclass(frozen=True)
class Concat(Regex):
    left: Regex
    right: Regex


@dataclass(frozen=True)
class Star(Regex):
    inner: Regex


# Sugar: resolved against the declared alphabet by desugar().


@dataclass(frozen=True)
class SetLiteral(Regex):
    """One symbol drawn from the given set, e.g. ``{A, B}``."""

    members: frozenset[Endpoint]


@dataclass(frozen=True)
class Complement(Regex):
    """One symbol drawn from the alphabet minus the given set, e.g. ``!A``."""

    members: frozenset[Endpoint]


@dataclass(frozen=True)
class Any(Regex):
    """One arbitrary symbol of the alphabet."""


EPSILON = Epsilon()
EMPTY = Empty()
ANY = Any()


def union_all(parts: Sequence[Regex]) -> Regex:
    if not parts:
        return EMPTY
    out = parts[0]
    for p in parts[1:]:
        out = Union(out, p)
    return out


def symbol_set(names: Iterable[Endpoint]) -> Regex:
    return union_all([Symbol(n) for n in sorted(names)])


@functools.lru_cache(maxsize=None)
def _desugar(r: Regex, alphabet: tuple[Endpoint, ...]) -> Regex:
    if isinstance(r, (Symbol, Epsilon, Empty)):
        return r
    if isinstance(r, Union):
        return Union(_desugar(r.left, alphabet), _desugar(r.right, alphabet))
    if isinstance(r, Concat):
        return Concat(_desugar(r.left, alphabet), _desugar(r.right, alphabet))
    if isinstance(r, Star):
        return Star(_desugar(r.inner, alphabet))
    if isinstance(r, SetLiteral):
        return symbol_set(r.members)
    if isinstance(r, Complement):
        return symbol_set(set(alphabet) - r.members)
    if isinstance(r, Any):
        return symbol_set(alphabet)
    raise TypeError(f"not a regex node: {r!r}")


def desugar(r: Regex, alphabet: Iterable[Endpoint]) -> Regex:
    """Rewrite sugar nodes into the six-core syntax over the alphabet."""
    return _desugar(r, tuple(alphabet))


def matches_epsilon(r: Regex) -> bool:
    """True iff the empty word is in the language."""
    if isinstance(r, Epsilon):
        return True
    if isinstance(r, (Symbol, Empty, SetLiteral, Complement, Any)):
        return False
    if isinstance(r, Union):
        return matches_epsilon(r.left) or matches_epsilon(r.right)
    if isinstance(r, Concat):
        return matches_epsilon(r.left) and matches_epsilon(r.right)
    if isinstance(r, Star):
        return True
    raise TypeError(f"not a regex node: {r!r}")


# -- structural matcher (Brzozowski derivatives) ---------------------------


def _mk_union(a: Regex, b: Regex) -> Regex:
    if isinstance(a, Empty):
        return b
    if isinstance(b, Empty):
        return a
    if a == b:
        return a
    return Union(a, b)


def _mk_concat(a: Regex, b: Regex) -> Regex:
    if isinstance(a, Empty) or isinstance(b, Empty):
        return EMPTY
    if isinstance(a, Epsilon):
        return b
    if isinstance(b, Epsilon):
        return a
    return Concat(a, b)


@functools.lru_cache(maxsize=None)
def _derivative(r: Regex, s: Endpoint) -> Regex:
    if isinstance(r, Symbol):
        return EPSILON if r.name == s else EMPTY
    if isinstance(r, (Epsilon, Empty)):
        return EMPTY
    if isinstance(r, Union):
        return _mk_union(_derivative(r.left, s), _derivative(r.right, s))
    if isinstance(r, Concat):
        d = _mk_concat(_derivative(r.left, s), r.right)
        if matches_epsilon(r.left):
            d = _mk_union(d, _derivative(r.right, s))
        return d
    if isinstance(r, Star):
        return _mk_concat(_derivative(r.inner, s), r)
    raise TypeError(f"derivative needs a core regex, got {r!r}")


def matches(r: Regex, word: Sequence[Endpoint], alphabet: Iterable[Endpoint]) -> bool:
    """Membership by repeated derivation; independent of the DFA pipeline."""
    state = desugar(r, alphabet)
    for s in word:
        state = _derivative(state, s)
        if isinstance(state, Empty):
            return False
    return matches_epsilon(state)


# -- parsing ----------------------------------------------------------------
#
# Concrete syntax: endpoint identifiers, juxtaposition for concatenation,
# `+` for union, postfix `*`, `any` (one arbitrary endpoint), `star`
# (= any sequence), `!X` / `!{A,B}` (complement classes), `{A,B}` (set
# literal), `eps`, `empty`, parentheses.  Policy keywords terminate a regex.

RESERVED = {
    "alphabet", "start", "match", "all-path", "all-children", "exists-child",
    "then", "call-seq", "any", "star", "eps", "empty",
}

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789-")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "keyword", or a punctuation literal
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c in _IDENT_START:
            j = i + 1
            while j < n and text[j] in _IDENT_CONT:
                j += 1
            word = text[i:j]
            kind = "keyword" if word in RESERVED else "ident"
            tokens.append(Token(kind, word, i))
            i = j
            continue
        if c in "(){},;+*!:":
            tokens.append(Token(c, c, i))
            i += 1
            continue
        raise PolicySyntaxError(f"unexpected character {c!r} at offset {i}")
    return tokens


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise PolicySyntaxError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise PolicySyntaxError(f"expected {want!r}, found {tok.text!r} at offset {tok.pos}")
        return tok


# Tokens that can begin a regex atom; used to detect juxtaposition.
_ATOM_STARTERS = {"ident", "(", "{", "!"}
_ATOM_KEYWORDS = {"any", "star", "eps", "empty"}


def _parse_set_body(ts: TokenStream, alphabet: frozenset[Endpoint]) -> frozenset[Endpoint]:
    names = []
    while True:
        tok = ts.expect("ident")
        if tok.text not in alphabet:
            raise UnknownEndpoint(f"endpoint {tok.text!r} not in declared alphabet")
        names.append(tok.text)
        nxt = ts.next()
        if nxt.kind == "}":
            return frozenset(names)
        if nxt.kind != ",":
            raise PolicySyntaxError(f"expected ',' or '}}' at offset {nxt.pos}")


def _parse_atom(ts: TokenStream, alphabet: frozenset[Endpoint]) -> Regex:
    tok = ts.next()
    if tok.kind == "ident":
        if tok.text not in alphabet:
            raise UnknownEndpoint(f"endpoint {tok.text!r} not in declared alphabet")
        return Symbol(tok.text)
    if tok.kind == "keyword":
        if tok.text == "eps":
            return EPSILON
        if tok.text == "empty":
            return EMPTY
        if tok.text == "any":
            return ANY
        if tok.text == "star":
            return Star(ANY)
        raise PolicySyntaxError(f"keyword {tok.text!r} cannot start a regex atom")
    if tok.kind == "(":
        inner = _parse_union(ts, alphabet)
        ts.expect(")")
        return inner
    if tok.kind == "{":
        return SetLiteral(_parse_set_body(ts, alphabet))
    if tok.kind == "!":
        nxt = ts.next()
        if nxt.kind == "ident":
            if nxt.text not in alphabet:
                raise UnknownEndpoint(f"endpoint {nxt.text!r} not in declared alphabet")
            return Complement(frozenset({nxt.text}))
        if nxt.kind == "{":
            return Complement(_parse_set_body(ts, alphabet))
        raise PolicySyntaxError(f"expected endpoint or set after '!' at offset {tok.pos}")
    raise PolicySyntaxError(f"unexpected token {tok.text!r} at offset {tok.pos}")


def _parse_postfix(ts: TokenStream, alphabet: frozenset[Endpoint]) -> Regex:
    node = _parse_atom(ts, alphabet)
    while True:
        tok = ts.peek()
        if tok is not None and tok.kind == "*":
            ts.next()
            node = Star(node)
        else:
            return node


def _starts_atom(tok: Token | None) -> bool:
    if tok is None:
        return False
    if tok.kind in _ATOM_STARTERS:
        return True
    return tok.kind == "keyword" and tok.text in _ATOM_KEYWORDS


def _parse_concat(ts: TokenStream, alphabet: frozenset[Endpoint]) -> Regex:
    node = _parse_postfix(ts, alphabet)
    while _starts_atom(ts.peek()):
        node = Concat(node, _parse_postfix(ts, alphabet))
    return node


def _parse_union(ts: TokenStream, alphabet: frozenset[Endpoint]) -> Regex:
    node = _parse_concat(ts, alphabet)
    while True:
        tok = ts.peek()
        if tok is not None and tok.kind == "+":
            ts.next()
            node = Union(node, _parse_concat(ts, alphabet))
        else:
            return node


def parse_regex_tokens(ts: TokenStream, alphabet: Iterable[Endpoint]) -> Regex:
    return _parse_union(ts, frozenset(alphabet))


def parse_regex(text: str, alphabet: Iterable[Endpoint]) -> Regex:
    ts = TokenStream(tokenize(text))
    node = parse_regex_tokens(ts, alphabet)
    if ts.peek() is not None:
        tok = ts.peek()
        raise PolicySyntaxError(f"trailing input {tok.text!r} at offset {tok.pos}")
    return node


def format_regex(r: Regex) -> str:
    """Canonical text for a regex node; reparsing yields the same tree."""

    def fmt(node: Regex) -> str:
        if isinstance(node, Symbol):
            return node.name
        if isinstance(node, Epsilon):
            return "eps"
        if isinstance(node, Empty):
            return "empty"
        if isinstance(node, Any):
            return "any"
        if isinstance(node, SetLiteral):
            return "{" + ", ".join(sorted(node.members)) + "}"
        if isinstance(node, Complement):
            if len(node.members) == 1:
                return "!" + next(iter(node.members))
            return "!{" + ", ".join(sorted(node.members)) + "}"
        if isinstance(node, Union):
            return f"({fmt(node.left)} + {fmt(node.right)})"
        if isinstance(node, Concat):
            return f"({fmt(node.left)} {fmt(node.right)})"
        if isinstance(node, Star):
            return f"{_atomized(node.inner)}*"
        raise TypeError(f"not a regex node: {node!r}")

    def _atomized(node: Regex) -> str:
        text = fmt(node)
        if isinstance(node, (Union, Concat, Star)):
            # Star output like "x*" needs wrapping so "*" reattaches correctly.
            if not text.startswith("("):
                return f"({text})"
        return text

    return fmt(r)


# -- DFA pipeline -----------------------------------------------------------


@dataclass(frozen=True)
class Dfa:
    """Deterministic complete automaton over the endpoint alphabet.

    States are consecutive ints with 0 initial, numbered breadth-first from
    the initial state in alphabet order, so equal languages over equal
    alphabets produce identical structures.
    """

    n_states: int
    initial: int
    finals: frozenset[int]
    transition: dict[tuple[int, Endpoint], int]
    alphabet: tuple[Endpoint, ...]

    @property
    def states(self) -> range:
        return range(self.n_states)

    def step(self, state: int, symbol: Endpoint) -> int:
        return self.transition[(state, symbol)]


def dfa_accepts(d: Dfa, word: Sequence[Endpoint]) -> bool:
    state = d.initial
    for s in word:
        state = d.transition[(state, s)]
    return state in d.finals


class _Nfa:
    """Thompson construction scratchpad: eps edges plus labeled edges."""

    def __init__(self):
        self.n = 0
        self.eps: list[list[int]] = []
        self.edges: list[dict[Endpoint, list[int]]] = []

    def new_state(self) -> int:
        self.n += 1
        self.eps.append([])
        self.edges.append({})
        return self.n - 1

    def add_eps(self, a: int, b: int):
        self.eps[a].append(b)

    def add_edge(self, a: int, s: Endpoint, b: int):
        self.edges[a].setdefault(s, []).append(b)

    def build(self, r: Regex) -> tuple[int, int]:
        """Return (entry, exit) states for the fragment of ``r``."""
        if isinstance(r, Empty):
            return self.new_state(), self.new_state()
        if isinstance(r, Epsilon):
            a = self.new_state()
            b = self.new_state()
            self.add_eps(a, b)
            return a, b
        if isinstance(r, Symbol):
            a = self.new_state()
            b = self.new_state()
            self.add_edge(a, r.name, b)
            return a, b
        if isinstance(r, Union):
            a1, b1 = self.build(r.left)
            a2, b2 = self.build(r.right)
            a = self.new_state()
            b = self.new_state()
            self.add_eps(a, a1)
            self.add_eps(a, a2)
            self.add_eps(b1, b)
            self.add_eps(b2, b)
            return a, b
        if isinstance(r, Concat):
            a1, b1 = self.build(r.left)
            a2, b2 = self.build(r.right)
            self.add_eps(b1, a2)
            return a1, b2
        if isinstance(r, Star):
            a1, b1 = self.build(r.inner)
            a = self.new_state()
            b = self.new_state()
            self.add_eps(a, a1)
            self.add_eps(a, b)
            self.add_eps(b1, a1)
            self.add_eps(b1, b)
            return a, b
        raise TypeError(f"NFA construction needs a core regex, got {r!r}")

    def closure(self, states: Iterable[int]) -> frozenset[int]:
        seen = set(states)
        todo = list(seen)
        while todo:
            q = todo.pop()
            for t in self.eps[q]:
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        return frozenset(seen)


def _subset_construction(nfa: _Nfa, entry: int, exit_: int, alphabet: tuple[Endpoint, ...]):
    start = nfa.closure([entry])
    subsets = {start: 0}
    order = [start]
    trans: dict[tuple[int, Endpoint], int] = {}
    i = 0
    while i < len(order):
        cur = order[i]
        for s in alphabet:
            nxt = set()
            for q in cur:
                nxt.update(nfa.edges[q].get(s, ()))
            nxt = nfa.closure(nxt)
            if nxt not in subsets:
                subsets[nxt] = len(order)
                order.append(nxt)
            trans[(subsets[cur], s)] = subsets[nxt]
        i += 1
    finals = frozenset(idx for sub, idx in subsets.items() if exit_ in sub)
    return len(order), finals, trans


def _hopcroft(n: int, finals: frozenset[int], trans: dict, alphabet: tuple[Endpoint, ...]):
    """Partition states into equivalence classes; returns state -> class id."""
    non_finals = frozenset(range(n)) - finals
    partition = [s for s in (finals, non_finals) if s]
    work = [s for s in (finals, non_finals) if s]
    preimage: dict[tuple[Endpoint, int], set[int]] = {}
    for (q, s), t in trans.items():
        preimage.setdefault((s, t), set()).add(q)
    while work:
        splitter = work.pop()
        for s in alphabet:
            x = set()
            for t in splitter:
                x |= preimage.get((s, t), set())
            new_partition = []
            for block in partition:
                inter = block & x
                diff = block - x
                if inter and diff:
                    new_partition.extend((inter, diff))
                    if block in work:
                        work.remove(block)
                        work.extend((inter, diff))
                    else:
                        work.append(inter if len(inter) <= len(diff) else diff)
                else:
                    new_partition.append(block)
            partition = new_partition
    class_of = {}
    for cid, block in enumerate(partition):
        for q in block:
            class_of[q] = cid
    return class_of


def to_dfa(r: Regex, alphabet: Iterable[Endpoint]) -> Dfa:
    """Minimal complete DFA with language exactly L(r) over the alphabet."""
    alpha = tuple(alphabet)
    if not alpha:
        raise ValueError("empty alphabet")
    core = desugar(r, alpha)
    nfa = _Nfa()
    entry, exit_ = nfa.build(core)
    n, finals, trans = _subset_construction(nfa, entry, exit_, alpha)
    # Subset construction over total edge sets is already complete (the empty
    # subset acts as the dead state), so minimize directly.
    class_of = _hopcroft(n, finals, trans, alpha)
    # Relabel classes breadth-first from the initial class, alphabet order.
    start_class = class_of[0]
    relabel = {start_class: 0}
    order = [start_class]
    i = 0
    while i < len(order):
        cur = order[i]
        rep = next(q for q in range(n) if class_of[q] == cur)
        for s in alpha:
            nxt = class_of[trans[(rep, s)]]
            if nxt not in relabel:
                relabel[nxt] = len(order)
                order.append(nxt)
        i += 1
    new_trans = {}
    for cid in order:
        rep = next(q for q in range(n) if class_of[q] == cid)
        for s in alpha:
            new_trans[(relabel[cid], s)] = relabel[class_of[trans[(rep, s)]]]
    new_finals = frozenset(relabel[class_of[q]] for q in finals)
    return Dfa(len(order), 0, new_finals, new_trans, alpha)
