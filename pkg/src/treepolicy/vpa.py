"""Visibly pushdown automata: representation, runs, serialization.

The stack action is dictated by the symbol's tag: calls push, returns pop.
Automata here are deterministic and complete: the call table is total over
states x endpoints, the return table over states x stack symbols x
endpoints.  The bottom marker is never pushed; a return arriving with only
the bottom marker on the stack raises ``StackUnderflow`` (impossible on
rooted well-matched input).

Values are immutable; concurrent runs over one automaton are safe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .errors import StackUnderflow, VpaParseError
from .nested_word import Endpoint, NestedWord, TaggedSymbol

BOTTOM = "⊥"

State = str
StackSymbol = str

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Vpa:
    states: frozenset[State]
    initial: State
    finals: frozenset[State]
    alphabet: tuple[Endpoint, ...]
    stack_alphabet: frozenset[StackSymbol]  # includes BOTTOM
    delta_call: Mapping[tuple[State, Endpoint], tuple[State, StackSymbol]]
    delta_return: Mapping[tuple[State, StackSymbol, Endpoint], State]


@dataclass(frozen=True)
class Configuration:
    state: State
    stack: tuple[StackSymbol, ...]

    def __post_init__(self):
        if not self.stack or self.stack[0] != BOTTOM or BOTTOM in self.stack[1:]:
            raise ValueError("stack must hold exactly one bottom marker, at position 0")


def initial_configuration(v: Vpa) -> Configuration:
    return Configuration(v.initial, (BOTTOM,))


def step(v: Vpa, c: Configuration, a: TaggedSymbol) -> Configuration:
    """One transition: a call pushes, a return pops."""
    if a.is_call:
        q, s = v.delta_call[(c.state, a.endpoint)]
        return Configuration(q, c.stack + (s,))
    if len(c.stack) == 1:
        raise StackUnderflow(
            f"return from {a.endpoint!r} with empty stack in state {c.state!r}"
        )
    top = c.stack[-1]
    q = v.delta_return[(c.state, top, a.endpoint)]
    return Configuration(q, c.stack[:-1])


def run(v: Vpa, n: NestedWord, init: Configuration | None = None) -> list[Configuration]:
    """The configuration sequence, starting from ``init`` (length |n|+1)."""
    c = init if init is not None else initial_configuration(v)
    out = [c]
    for a in n.symbols:
        c = step(v, c, a.symbol)
        out.append(c)
    return out


def accepts(v: Vpa, n: NestedWord) -> bool:
    return run(v, n)[-1].state in v.finals


@dataclass(frozen=True)
class WellFormedReport:
    ok: bool
    problems: tuple[str, ...]


def check_well_formed(v: Vpa) -> WellFormedReport:
    """Totality of both transition tables, closure of targets, and the
    no-push-of-bottom rule."""
    problems = []
    if v.initial not in v.states:
        problems.append(f"initial state {v.initial!r} not in states")
    for q in sorted(v.finals - v.states):
        problems.append(f"final state {q!r} not in states")
    if BOTTOM not in v.stack_alphabet:
        problems.append("stack alphabet lacks the bottom marker")
    for q in sorted(v.states):
        for e in v.alphabet:
            if (q, e) not in v.delta_call:
                problems.append(f"missing call transition ({q!r}, {e!r})")
    for (q, e), (q2, s) in v.delta_call.items():
        if q not in v.states or q2 not in v.states:
            problems.append(f"call transition ({q!r}, {e!r}) touches unknown state")
        if s == BOTTOM:
            problems.append(f"call transition ({q!r}, {e!r}) pushes the bottom marker")
        elif s not in v.stack_alphabet:
            problems.append(f"call transition ({q!r}, {e!r}) pushes unknown symbol {s!r}")
    for q in sorted(v.states):
        for s in sorted(v.stack_alphabet):
            for e in v.alphabet:
                if (q, s, e) not in v.delta_return:
                    problems.append(f"missing return transition ({q!r}, {s!r}, {e!r})")
    for (q, s, e), q2 in v.delta_return.items():
        if q not in v.states or q2 not in v.states:
            problems.append(f"return transition ({q!r}, {s!r}, {e!r}) touches unknown state")
    return WellFormedReport(not problems, tuple(problems))


def complete_with_sink(v: Vpa, sink: State = "sink") -> Vpa:
    """Fill missing transitions through an explicit non-final sink state.

    Hand-drawn automata usually omit reject transitions; this restores the
    deterministic-and-complete form the rest of the toolkit assumes.
    """
    states = set(v.states) | {sink}
    stack_alphabet = set(v.stack_alphabet) | {BOTTOM, sink}
    delta_call = dict(v.delta_call)
    delta_return = dict(v.delta_return)
    for q in states:
        for e in v.alphabet:
            delta_call.setdefault((q, e), (sink, sink))
    for q in states:
        for s in stack_alphabet:
            for e in v.alphabet:
                delta_return.setdefault((q, s, e), sink)
    return Vpa(
        frozenset(states),
        v.initial,
        v.finals,
        v.alphabet,
        frozenset(stack_alphabet),
        delta_call,
        delta_return,
    )


# -- serialization -----------------------------------------------------------


def export_vpa(v: Vpa, fmt: str = "json") -> str:
    if fmt == "json":
        return _export_json(v)
    if fmt == "dot":
        return _export_dot(v)
    raise ValueError(f"unknown format {fmt!r}")


def _export_json(v: Vpa) -> str:
    doc = {
        "version": SCHEMA_VERSION,
        "alphabet": list(v.alphabet),
        "states": sorted(v.states),
        "initial": v.initial,
        "finals": sorted(v.finals),
        "stack_alphabet": sorted(v.stack_alphabet),
        "delta_call": [
            {"from": q, "sym": e, "to": q2, "push": s}
            for (q, e), (q2, s) in sorted(v.delta_call.items())
        ],
        "delta_return": [
            {"from": q, "pop": s, "sym": e, "to": q2}
            for (q, s, e), q2 in sorted(v.delta_return.items())
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def import_vpa(text: str) -> Vpa:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise VpaParseError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise VpaParseError("top level must be an object")
    if doc.get("version") != SCHEMA_VERSION:
        raise VpaParseError("missing or unsupported schema version")
    required = {
        "alphabet", "states", "initial", "finals", "stack_alphabet",
        "delta_call", "delta_return",
    }
    missing = required - set(doc)
    if missing:
        raise VpaParseError(f"missing fields: {sorted(missing)}")
    try:
        delta_call = {
            (t["from"], t["sym"]): (t["to"], t["push"]) for t in doc["delta_call"]
        }
        delta_return = {
            (t["from"], t["pop"], t["sym"]): t["to"] for t in doc["delta_return"]
        }
        return Vpa(
            frozenset(doc["states"]),
            doc["initial"],
            frozenset(doc["finals"]),
            tuple(doc["alphabet"]),
            frozenset(doc["stack_alphabet"]),
            delta_call,
            delta_return,
        )
    except (KeyError, TypeError) as exc:
        raise VpaParseError(f"malformed transition table: {exc}") from None


def _dot_quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


def _export_dot(v: Vpa) -> str:
    """Graphviz rendering in the usual convention: doubled circles for
    finals, 'call e / push' on call edges, 'ret e, pop' on return edges."""
    lines = ["digraph vpa {", "  rankdir=LR;"]
    lines.append("  __start [shape=point];")
    for q in sorted(v.states):
        shape = "doublecircle" if q in v.finals else "circle"
        lines.append(f"  {_dot_quote(q)} [shape={shape}];")
    lines.append(f"  __start -> {_dot_quote(v.initial)};")
    for (q, e), (q2, s) in sorted(v.delta_call.items()):
        label = f"call {e} / {s}"
        lines.append(f"  {_dot_quote(q)} -> {_dot_quote(q2)} [label={_dot_quote(label)}];")
    for (q, s, e), q2 in sorted(v.delta_return.items()):
        label = f"ret {e}, {s}"
        lines.append(
            f"  {_dot_quote(q)} -> {_dot_quote(q2)} [label={_dot_quote(label)}, style=dashed];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
