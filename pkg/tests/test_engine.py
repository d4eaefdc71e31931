import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabsim.analysis import StateSpace
from stabsim.daemons import RandomSubsetDaemon, ScriptedDaemon, SynchronousDaemon
from stabsim.engine import (BUDGET, DEADLOCK, STABILIZED, STOPPED, GuardConflictError,
                            ProtocolDef, Rule, StepError, activable_set, apply_step,
                            privileged_set, run)
from stabsim.protocols import UnisonParams, make_emss, make_unison
from stabsim.topology import line, ring

EMSS2 = make_emss(line(2))  # alpha=2, K=8, targets (4, 6)
EMSS_R3 = make_emss(ring(3))


def test_activable_both_convergence_steps():
    assert activable_set(EMSS2, (-2, -2)) == {0, 1}
    assert [EMSS2.rules[0][EMSS2.outcome((-2, -2), v).rule].name for v in (0, 1)] == ["CA", "CA"]


@pytest.mark.parametrize("c", range(8))
def test_all_equal_legitimate_all_activable_via_na(c):
    p = EMSS_R3
    config = (c, c, c)
    assert activable_set(p, config) == {0, 1, 2}
    assert {p.rules[v][p.outcome(config, v).rule].name for v in range(3)} == {"NA"}


def test_reset_on_incomparable_neighbor():
    config = (3, 6)
    assert 0 in activable_set(EMSS2, config)
    assert EMSS2.rules[0][EMSS2.outcome(config, 0).rule].name == "RA"
    assert apply_step(EMSS2, config, {0}) == (-2, 6)


def test_apply_step_snapshot():
    assert apply_step(EMSS2, (-2, -2), {0, 1}) == (-1, -1)
    assert apply_step(EMSS2, (-2, -2), {0}) == (-1, -2)


@pytest.mark.parametrize("selected", [set(), {0, 5}])
def test_apply_step_rejects_bad_selection(selected):
    with pytest.raises(StepError):
        apply_step(EMSS2, (-2, -2), selected)


def test_apply_step_rejects_disabled_node():
    # node 1 at 0 waits for its neighbor to leave the initial segment
    assert activable_set(EMSS2, (-1, 0)) == {0}
    with pytest.raises(StepError):
        apply_step(EMSS2, (-1, 0), {1})


configs3 = st.tuples(*[st.integers(-3, 11)] * 3)


@settings(max_examples=200, deadline=None)
@given(configs3, st.data())
def test_frame_rule_and_order_independence(config, data):
    p = EMSS_R3
    act = activable_set(p, config)
    if not act:
        return
    sel = data.draw(st.sets(st.sampled_from(sorted(act)), min_size=1))
    after = apply_step(p, config, sel)
    for v in range(3):
        if v not in sel:
            assert after[v] == config[v]
    merged = list(config)
    for v in sel:
        merged[v] = apply_step(p, config, {v})[v]
    assert tuple(merged) == after


def test_run_lockstep_from_initial_segment():
    trace = run(EMSS2, (-2, -2), SynchronousDaemon(), 5)
    assert [r.config for r in trace.records] == [(-2, -2), (-1, -1), (0, 0), (1, 1), (2, 2)]
    assert trace.final == (3, 3) and trace.status == BUDGET


def test_run_zero_budget():
    trace = run(EMSS2, (4, 6), SynchronousDaemon(), 0)
    assert trace.records == [] and trace.status == BUDGET and trace.final == (4, 6)


def test_run_records_critical_sections():
    trace = run(EMSS2, (4, 6), SynchronousDaemon(), 1)
    rec = trace.records[0]
    assert rec.privileged == (0, 1) and rec.cs == (0, 1)
    # privileged but not selected: no critical section
    trace = run(EMSS2, (4, 4), ScriptedDaemon([[1]]), 1)
    assert trace.records[0].privileged == (0,) and trace.records[0].cs == ()


def test_run_stop_conditions():
    trace = run(EMSS2, (-2, -2), SynchronousDaemon(), 50, stop_when=lambda c: min(c) >= 0)
    assert trace.status == STABILIZED and trace.final == (0, 0) and len(trace) == 2
    trace = run(EMSS2, (-2, -2), ScriptedDaemon([[0], [1]]), 50)
    assert trace.status == STOPPED and trace.final == (-1, -1)


def frozen_protocol(g):
    never = Rule("X", lambda view: False, lambda view: view.value)
    return ProtocolDef("frozen", g, (0, 1), (((never,),) * g.n))


def test_run_deadlock_is_a_status():
    trace = run(frozen_protocol(line(2)), (0, 0), SynchronousDaemon(), 10)
    assert trace.status == DEADLOCK and len(trace) == 0


def test_guard_conflict_detected():
    always = Rule("A", lambda view: True, lambda view: view.value)
    p = ProtocolDef("bad", line(2), (0, 1), (((always, always),) * 2))
    with pytest.raises(GuardConflictError):
        activable_set(p, (0, 0))


@pytest.mark.parametrize("p", [make_emss(line(2)), make_emss(ring(3)),
                               make_unison(ring(3), UnisonParams(1, 4)),
                               make_unison(line(3), UnisonParams(1, 3))],
                         ids=["emss-line2", "emss-ring3", "unison-c3", "unison-line3"])
def test_no_deadlock_and_exclusive_guards_exhaustively(p):
    # building the space evaluates every local view and raises on a guard conflict
    space = StateSpace(p)
    assert (space.act != 0).all()


def test_sync_run_is_deterministic():
    a = run(EMSS_R3, (5, -1, 9), SynchronousDaemon(), 40).to_jsonl()
    b = run(EMSS_R3, (5, -1, 9), SynchronousDaemon(), 40).to_jsonl()
    assert a == b
    c = run(EMSS_R3, (5, -1, 9), RandomSubsetDaemon(3), 40).to_jsonl()
    d = run(EMSS_R3, (5, -1, 9), RandomSubsetDaemon(3), 40).to_jsonl()
    assert c == d


def test_jsonl_format():
    lines = run(EMSS2, (4, 6), SynchronousDaemon(), 2).to_jsonl().splitlines()
    first = json.loads(lines[0])
    assert first == {"step": 0, "selected": [0, 1], "config": [4, 6],
                     "privileged": [0, 1], "cs": [0, 1]}
    assert json.loads(lines[-1])["status"] == "budget"


def test_selected_sets_are_activable_subsets():
    trace = run(EMSS_R3, (5, -1, 9), RandomSubsetDaemon(11), 100)
    for r in trace.records:
        assert r.selected and set(r.selected) <= set(r.activable)
        assert set(r.activable) == activable_set(EMSS_R3, r.config)
        assert set(r.privileged) == privileged_set(EMSS_R3, r.config)


def test_config_validation():
    with pytest.raises(StepError):
        run(EMSS2, (4,), SynchronousDaemon(), 1)
    with pytest.raises(StepError):
        run(EMSS2, (8, 0), SynchronousDaemon(), 1)
