"""Monitor extraction, single-step and run equivalence, filter emission."""

import random

import pytest

from treepolicy import compiler, monitor, nested_word as nw
from treepolicy.corpus import corpus_documents
from treepolicy.errors import StackUnderflow
from treepolicy.vpa import BOTTOM, Configuration, initial_configuration, run, step

from conftest import (
    payment_chain_vpa,
    random_rooted_word,
    two_state_vpa,
    word_from_str,
)


class TestExtract:
    def test_chain_request_transition(self):
        mon = monitor.extract_monitor(payment_chain_vpa())
        assert mon.table["P"].call_fn["start"] == ("q_P", "q_P")

    def test_two_state_response_transition(self):
        mon = monitor.extract_monitor(two_state_vpa())
        assert mon.table["Appt"].return_fn[("q1", "q0")] == "q0"

    def test_table_keys_are_alphabet(self):
        v = payment_chain_vpa()
        mon = monitor.extract_monitor(v)
        assert tuple(mon.table) == v.alphabet


class TestDistributedRun:
    def test_two_state_golden(self):
        v = two_state_vpa()
        mon = monitor.extract_monitor(v)
        n = word_from_str("<Appt Appt>")
        init = Configuration("q0", (BOTTOM,))
        c1 = monitor.dist_step(mon, init, nw.call("Appt"))
        assert c1 == Configuration("q1", (BOTTOM, "q0"))
        c2 = monitor.dist_step(mon, c1, nw.ret("Appt"))
        assert c2 == Configuration("q0", (BOTTOM,))
        assert monitor.dist_run(mon, init, n) == init

    def test_underflow(self):
        mon = monitor.extract_monitor(two_state_vpa())
        with pytest.raises(StackUnderflow):
            monitor.dist_step(mon, Configuration("q0", (BOTTOM,)), nw.ret("Appt"))

    def test_step_equals_central_step_pointwise(self):
        rng = random.Random(13)
        for doc in corpus_documents("small").values():
            art = compiler.compile(doc)[0]
            v = art.vpa
            mon = monitor.extract_monitor(v)
            for _ in range(50):
                n = random_rooted_word(rng, 10, doc.alphabet)
                c = initial_configuration(v)
                for a in n.symbols:
                    central = step(v, c, a.symbol)
                    dist = monitor.dist_step(mon, c, a.symbol)
                    assert central == dist
                    c = central

    def test_final_configurations_equal(self):
        rng = random.Random(14)
        for doc in corpus_documents("small").values():
            art = compiler.compile(doc)[0]
            mon = monitor.extract_monitor(art.vpa)
            for _ in range(200):
                n = random_rooted_word(rng, 15, doc.alphabet)
                init = initial_configuration(art.vpa)
                assert monitor.dist_run(mon, init, n) == run(art.vpa, n, init)[-1]


class TestFilterSpecs:
    def test_chain_request_rule(self):
        mon = monitor.extract_monitor(payment_chain_vpa())
        specs = {s.endpoint: s for s in monitor.emit_filters(mon)}
        p_rules = {r.if_state: r for r in specs["P"].on_request}
        assert p_rules["start"].then_state == "q_P"
        assert p_rules["start"].push_local == "q_P"
        p_resp = {(r.if_state, r.if_local): r for r in specs["P"].on_response}
        assert p_resp[("q_P", "q_P")].then_state == "start"

    def test_rule_counts_match_tables(self):
        v = payment_chain_vpa()
        mon = monitor.extract_monitor(v)
        for spec in monitor.emit_filters(mon):
            sub = mon.table[spec.endpoint]
            assert len(spec.on_request) == len(sub.call_fn)
            assert len(spec.on_response) == len(sub.return_fn)
            # complete automaton: every state has a request rule
            assert {r.if_state for r in spec.on_request} == set(v.states)

    def test_reconstruction_is_extensionally_equal(self):
        for doc in corpus_documents("small").values():
            art = compiler.compile(doc)[0]
            mon = monitor.extract_monitor(art.vpa)
            rebuilt = monitor.monitor_from_filters(monitor.emit_filters(mon))
            for e in mon.alphabet:
                assert rebuilt.table[e].call_fn == mon.table[e].call_fn
                assert rebuilt.table[e].return_fn == mon.table[e].return_fn

    def test_replay_through_filters_matches_dist_run(self):
        rng = random.Random(15)
        doc = corpus_documents("small")["data-compliance"]
        art = compiler.compile(doc)[0]
        mon = monitor.extract_monitor(art.vpa)
        rebuilt = monitor.monitor_from_filters(monitor.emit_filters(mon))
        for _ in range(200):
            n = random_rooted_word(rng, 12, doc.alphabet)
            init = initial_configuration(art.vpa)
            assert monitor.dist_run(rebuilt, init, n) == monitor.dist_run(mon, init, n)

    def test_json_round_trip(self):
        mon = monitor.extract_monitor(payment_chain_vpa())
        for spec in monitor.emit_filters(mon):
            assert monitor.filter_spec_from_json(monitor.filter_spec_to_json(spec)) == spec


class TestRenderScript:
    def test_chain_filter_structure(self):
        mon = monitor.extract_monitor(payment_chain_vpa())
        spec = next(s for s in monitor.emit_filters(mon) if s.endpoint == "P")
        script = monitor.render_filter_script(spec)
        assert "callback OnRequest()" in script
        assert "callback OnResponse()" in script
        assert 'if (state == "start") then state = "q_P"; local_stack = "q_P"' in script
        assert '(state == "q_P" && local_stack == "q_P") then state = "start"' in script

    def test_empty_rules_fall_through(self):
        spec = monitor.FilterSpec("X", (), ())
        script = monitor.render_filter_script(spec)
        assert script.count("log_violation") == 2

    def test_deterministic_bytes(self):
        doc = corpus_documents("small")["data-proxy"]
        art = compiler.compile(doc)[0]
        mon = monitor.extract_monitor(art.vpa)
        first = [monitor.render_filter_script(s) for s in monitor.emit_filters(mon)]
        second = [monitor.render_filter_script(s) for s in monitor.emit_filters(mon)]
        assert first == second
