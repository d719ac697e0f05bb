from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cyberweak.env import (
    ActionKind,
    DimensionError,
    UnknownDevice,
    UnknownService,
    action,
    apply_action,
    canonical_actions,
    encode_state,
    feasible_actions,
    goal_reached,
    milestone_reward,
    reset,
    service_reachable,
)
from cyberweak.scenario import AttackerSpec, builtin_scenario

from support import staged_attack


def run(s, steps, st=None):
    st = st or reset(s)
    for a in steps:
        out = apply_action(s, st, a)
        assert out.feasible, a
        st = out.next
    return st


def test_reset(base):
    st = reset(base)
    assert st.current_space == "outer"
    assert not (st.credentials or st.connected or st.dominated or st.info or st.devices_in_use)
    assert st.steps_taken == 0
    assert reset(base) == st


def test_reset_with_initial_credentials(base):
    s = replace(base, attacker=AttackerSpec("outer", frozenset({"FW1_password"}), frozenset({"T1", "D1"})))
    assert reset(s).credentials == {"FW1_password"}


def test_reset_feasible_set_is_moves(base):
    moves = feasible_actions(base, reset(base))
    assert [str(a) for a in moves] == ["Move(P1)", "Move(P2)", "Move(P3)", "Move(P4)"]


def test_canonical_actions(base):
    acts = canonical_actions(base)
    assert len(acts) == 183
    assert acts == canonical_actions(builtin_scenario(0))
    assert [a.global_index for a in acts] == list(range(len(acts)))
    adds = [a.target for a in acts if a.kind is ActionKind.ADD_ACL]
    assert adds == [0, 1, 2]


def test_service_reachable(base):
    st = run(base, [action(base, "Move", "P1"), action(base, "UseDevice", "T1")])
    assert service_reachable(base, st, "T1", "FW1_manager")
    assert not service_reachable(base, st, "T1", "T2_manager")
    st2 = replace(st, acl_added=frozenset({0}))
    assert service_reachable(base, st2, "T1", "T2_manager")
    # the closed network never reaches the servers from the attack devices
    assert not service_reachable(base, st, "T1", "S2_web")
    with pytest.raises(UnknownDevice):
        service_reachable(base, st, "ZZ", "S1_web")
    with pytest.raises(UnknownService):
        service_reachable(base, st, "T1", "nothing")


def test_dominating_fw1_manager_enables_acl(base):
    steps = staged_attack(base)[:6]
    st = run(base, steps)
    assert action(base, "AddAcl", 0) in feasible_actions(base, st)


def test_no_dominate_without_password(open_net):
    s = open_net
    st = run(s, [action(s, "Move", "P1"), action(s, "UseDevice", "T1"), action(s, "Connect", "S1_web", "T1")])
    assert "S1_web" in st.connected
    assert action(s, "Dominate", "S1_web") not in feasible_actions(s, st)
    out = apply_action(s, st, action(s, "Dominate", "S1_web"))
    assert not out.feasible


def test_milestone_rewards(base):
    steps = staged_attack(base)
    st = reset(base)
    rewards = {}
    for a in steps:
        out = apply_action(base, st, a)
        if out.reward:
            rewards[str(a)] = out.reward
        st = out.next
    assert rewards == {
        "Dominate(FW1_manager)": 100.0,
        "Dominate(FW2_manager)": 200.0,
        "Harvest(S1_web_password)": 300.0,
        "Harvest(S2_web_password)": 400.0,
        "ReadInfo(SECRET)": 10000.0,
    }
    assert out.done and goal_reached(base, st)


def test_move_gives_no_reward(base):
    out = apply_action(base, reset(base), action(base, "Move", "P2"))
    assert out.feasible and out.reward == 0.0 and not out.done
    assert out.next.current_space == "P2"


def test_milestone_not_repaid(base):
    prev = run(base, staged_attack(base)[:5])
    a = action(base, "Dominate", "FW1_manager")
    nxt = apply_action(base, prev, a).next
    assert milestone_reward(prev, a, nxt) == 100.0
    assert milestone_reward(nxt, a, nxt) == 0.0


def test_staged_attack_total(base):
    steps = staged_attack(base)
    assert len(steps) == 21
    st, total = reset(base), 0.0
    for a in steps:
        out = apply_action(base, st, a)
        assert out.feasible
        total += out.reward
        st = out.next
    assert total == 11000.0
    assert out.done and st.steps_taken == 21 and st.info == {"SECRET"}


def test_step_cap(base):
    out = apply_action(base, reset(base), action(base, "Move", "P1"), max_steps=1)
    assert out.done and out.feasible
    bad = apply_action(base, reset(base), action(base, "Dominate", "S2_web"), max_steps=1)
    assert bad.done and not bad.feasible


def test_encode_reset(base):
    x = encode_state(base, reset(base))
    assert x.shape == (106,)
    assert x.sum() == 1.0 and x[0] == 1.0


def test_encode_single_flag_change(base):
    before = run(base, [action(base, "Move", "P2")])
    after = apply_action(base, before, action(base, "Harvest", "FW1_password")).next
    diff = np.flatnonzero(encode_state(base, after) != encode_state(base, before))
    assert len(diff) == 1
    assert encode_state(base, after)[diff[0]] == 1.0


def test_encode_dimension_error(base):
    with pytest.raises(DimensionError):
        encode_state(replace(base, state_dim=20), reset(base))


# ---------------------------------------------------------------------------
# properties over random walks


@st.composite
def walks(draw, max_len=40):
    p = draw(st.integers(0, 3))
    s = builtin_scenario(p, draw(st.integers(0, 5)))
    picks = draw(st.lists(st.tuples(st.booleans(), st.integers(0, 10_000)), max_size=max_len))
    return s, picks


@settings(max_examples=60, deadline=None)
@given(walks())
def test_random_walk_invariants(walk):
    s, picks = walk
    acts = canonical_actions(s)
    st = reset(s)
    total = 0.0
    for use_feasible, n in picks:
        feas = feasible_actions(s, st)
        a = feas[n % len(feas)] if use_feasible else acts[n % len(acts)]
        out = apply_action(s, st, a)
        assert out.feasible == (a in feas)
        if not out.feasible:
            assert out.reward == 0.0
            assert out.next == replace(st, steps_taken=st.steps_taken + 1)
        assert [b.global_index for b in feas] == sorted(b.global_index for b in feas)
        assert st.dominated <= st.connected
        x = encode_state(s, out.next)
        assert set(np.unique(x)) <= {0.0, 1.0}
        total += out.reward
        st = out.next
        if out.done:
            assert goal_reached(s, st)
            break
    assert total <= 11000.0


@settings(max_examples=40, deadline=None)
@given(walks(max_len=25))
def test_all_actions_checked_against_feasible_set(walk):
    s, picks = walk
    acts = canonical_actions(s)
    st = reset(s)
    for _, n in picks:
        feas = set(feasible_actions(s, st))
        for a in acts:
            assert apply_action(s, st, a).feasible == (a in feas)
        st = apply_action(s, st, sorted(feas, key=lambda b: b.global_index)[n % len(feas)]).next
