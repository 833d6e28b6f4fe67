"""Distributed monitor extraction and per-service filter specifications.

A deterministic complete automaton splits by endpoint into one sub-monitor
per service: the call rows for that endpoint become its request transition,
the return rows its response transition.  Running the sub-monitors
symbol-locally, with the state carried alongside the request and the pushed
stack symbol stored at the hop that pushed it, reproduces the centralized
run configuration-for-configuration.

Filter specifications are the deployable view of a sub-monitor: an
``on_request`` rule table (state -> state, plus the locally stored symbol)
and an ``on_response`` rule table (state and stored symbol -> state).  The
rendered script form mirrors mesh sidecar callbacks and is byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .errors import StackUnderflow
from .nested_word import Endpoint, NestedWord, TaggedSymbol
from .vpa import Configuration, Vpa

STATE_HEADER = "x-safetree-state"


@dataclass(frozen=True)
class SubMonitor:
    """Call/return transition functions of one endpoint."""

    endpoint: Endpoint
    call_fn: dict[str, tuple[str, str]]  # state -> (state, pushed symbol)
    return_fn: dict[tuple[str, str], str]  # (state, popped symbol) -> state


@dataclass(frozen=True)
class DistributedMonitor:
    alphabet: tuple[Endpoint, ...]
    table: dict[Endpoint, SubMonitor]


def extract_monitor(v: Vpa) -> DistributedMonitor:
    table = {}
    for e in v.alphabet:
        call_fn = {q: target for (q, sym), target in v.delta_call.items() if sym == e}
        return_fn = {(q, s): t for (q, s, sym), t in v.delta_return.items() if sym == e}
        table[e] = SubMonitor(e, call_fn, return_fn)
    return DistributedMonitor(v.alphabet, table)


def dist_step(m: DistributedMonitor, c: Configuration, a: TaggedSymbol) -> Configuration:
    """Apply the symbol's own sub-monitor: calls push, returns pop."""
    sub = m.table[a.endpoint]
    if a.is_call:
        q, s = sub.call_fn[c.state]
        return Configuration(q, c.stack + (s,))
    if len(c.stack) == 1:
        raise StackUnderflow(
            f"return from {a.endpoint!r} with empty stack in state {c.state!r}"
        )
    q = sub.return_fn[(c.state, c.stack[-1])]
    return Configuration(q, c.stack[:-1])


def dist_run(m: DistributedMonitor, init: Configuration, n: NestedWord) -> Configuration:
    c = init
    for a in n.symbols:
        c = dist_step(m, c, a.symbol)
    return c


# -- filter specifications ----------------------------------------------------


@dataclass(frozen=True)
class RequestRule:
    if_state: str
    then_state: str
    push_local: str


@dataclass(frozen=True)
class ResponseRule:
    if_state: str
    if_local: str
    then_state: str


@dataclass(frozen=True)
class FilterSpec:
    endpoint: Endpoint
    on_request: tuple[RequestRule, ...]
    on_response: tuple[ResponseRule, ...]


def emit_filters(m: DistributedMonitor) -> list[FilterSpec]:
    """One spec per endpoint; rule order is deterministic."""
    specs = []
    for e in m.alphabet:
        sub = m.table[e]
        on_request = tuple(
            RequestRule(q, dst, push)
            for q, (dst, push) in sorted(sub.call_fn.items())
        )
        on_response = tuple(
            ResponseRule(q, local, dst)
            for (q, local), dst in sorted(sub.return_fn.items())
        )
        specs.append(FilterSpec(e, on_request, on_response))
    return specs


def monitor_from_filters(specs: Iterable[FilterSpec]) -> DistributedMonitor:
    """Rebuild the sub-monitor tables from filter specifications."""
    table = {}
    order = []
    for spec in specs:
        call_fn = {r.if_state: (r.then_state, r.push_local) for r in spec.on_request}
        return_fn = {(r.if_state, r.if_local): r.then_state for r in spec.on_response}
        table[spec.endpoint] = SubMonitor(spec.endpoint, call_fn, return_fn)
        order.append(spec.endpoint)
    return DistributedMonitor(tuple(order), table)


def filter_spec_to_json(spec: FilterSpec) -> str:
    doc = {
        "version": 1,
        "endpoint": spec.endpoint,
        "on_request": [
            {"if_state": r.if_state, "then_state": r.then_state, "push_local": r.push_local}
            for r in spec.on_request
        ],
        "on_response": [
            {"if_state": r.if_state, "if_local": r.if_local, "then_state": r.then_state}
            for r in spec.on_response
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def filter_spec_from_json(text: str) -> FilterSpec:
    doc = json.loads(text)
    return FilterSpec(
        doc["endpoint"],
        tuple(RequestRule(r["if_state"], r["then_state"], r["push_local"]) for r in doc["on_request"]),
        tuple(ResponseRule(r["if_state"], r["if_local"], r["then_state"]) for r in doc["on_response"]),
    )


def render_filter_script(spec: FilterSpec, header: str = STATE_HEADER) -> str:
    """Deterministic sidecar-callback rendering of one filter.

    The ``state`` value travels in the request header; ``local_stack`` is
    request-scoped proxy memory written by OnRequest and read back by
    OnResponse.  Unmatched states fall through to a violation log.
    """
    lines = [f"-- traffic filter for endpoint {spec.endpoint} (header: {header})"]
    lines.append("callback OnRequest() {")
    kw = "if"
    for r in spec.on_request:
        lines.append(
            f'  {kw} (state == "{r.if_state}") then state = "{r.then_state}"; '
            f'local_stack = "{r.push_local}"'
        )
        kw = "elseif"
    if kw == "if":
        lines.append('  log_violation("no call transition")')
    else:
        lines.append('  else log_violation("no call transition")')
    lines.append("}")
    lines.append("callback OnResponse() {")
    kw = "if"
    for r in spec.on_response:
        lines.append(
            f'  {kw} (state == "{r.if_state}" && local_stack == "{r.if_local}") '
            f'then state = "{r.then_state}"'
        )
        kw = "elseif"
    if kw == "if":
        lines.append('  log_violation("no return transition")')
    else:
        lines.append('  else log_violation("no return transition")')
    lines.append("}")
    return "\n".join(lines) + "\n"
