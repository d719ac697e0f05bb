import pytest

from cyberweak.env import ActionKind, apply_action, encode_state, goal_reached, reset
from cyberweak.oracle import StateBudgetExceeded, enumerate_reachable_states, shortest_attack_path
from cyberweak.scenario import AttackerSpec, CyberScenario, Space, builtin_scenario, from_document, scenario_with_rules

from support import L0, L1_BY_POLICY, L2, L3, N0_STATES, N3_STATES

SUBSET_LENGTHS = {
    (): 20,
    (0,): 16, (1,): 19, (2,): 19,
    (0, 1): 15, (0, 2): 15, (1, 2): 15,
    (0, 1, 2): 11,
}


@pytest.fixture(scope="module")
def lengths(base):
    return {c: shortest_attack_path(scenario_with_rules(base, c)).length for c in SUBSET_LENGTHS}


def test_pinned_lengths(lengths):
    assert lengths == SUBSET_LENGTHS
    assert lengths[()] == L0 and lengths[(0, 1, 2)] == L3


def test_more_rules_never_lengthen(lengths):
    for small in lengths:
        for big in lengths:
            if set(small) <= set(big):
                assert lengths[big] <= lengths[small]


@pytest.mark.parametrize("seed", range(6))
def test_builtin_draws(seed):
    s1 = builtin_scenario(1, seed)
    (drawn,) = [i for i, r in enumerate(s1.key_policies) if r in s1.acl_rules]
    assert shortest_attack_path(s1).length == L1_BY_POLICY[drawn]
    assert shortest_attack_path(builtin_scenario(2, seed)).length == L2


def test_closed_network_path_uses_every_rule(base):
    path = shortest_attack_path(base)
    adds = sorted(a.target for a in path.actions if a.kind is ActionKind.ADD_ACL)
    assert adds == [0, 1, 2]


def test_open_network_path_adds_nothing(open_net):
    path = shortest_attack_path(open_net)
    assert path.length == L3
    assert not any(a.kind is ActionKind.ADD_ACL for a in path.actions)


@pytest.mark.parametrize("p", range(4))
def test_replay_reaches_goal_in_length_steps(p):
    s = builtin_scenario(p, 1)
    path = shortest_attack_path(s)
    st = reset(s)
    for n, a in enumerate(path.actions, start=1):
        out = apply_action(s, st, a)
        assert out.feasible
        assert out.done == (n == path.length)
        st = out.next
    assert goal_reached(s, st) and st.steps_taken == path.length


def test_unreachable_goal(doc):
    # without the rule opening S2_web the secret is out of reach
    doc["addable_rules"] = doc["addable_rules"][:2]
    doc["key_policies"] = []
    assert shortest_attack_path(from_document(doc)) is None


def test_budget(base):
    with pytest.raises(StateBudgetExceeded):
        shortest_attack_path(base, max_states=50)
    with pytest.raises(StateBudgetExceeded):
        enumerate_reachable_states(base, max_states=50)


def test_reachable_counts(base, open_net):
    n0, states = enumerate_reachable_states(base)
    assert n0 == N0_STATES == len({s.key() for s in states})
    assert enumerate_reachable_states(base)[0] == n0
    assert enumerate_reachable_states(open_net)[0] == N3_STATES
    assert sum(goal_reached(base, s) for s in states) == 15


def test_zero_action_scenario():
    s = CyberScenario((Space("only"),), (), (), (), (), (), (), (), (), (),
                      AttackerSpec("only", frozenset(), frozenset()), 1)
    n, states = enumerate_reachable_states(s)
    assert n == 1 and states == [reset(s)]


def test_closed_states_embed_in_open_states(base, open_net):
    # forgetting which rules were added maps every closed-network state onto
    # one reachable with all rules pre-active
    _, closed = enumerate_reachable_states(base)
    _, opened = enumerate_reachable_states(open_net)
    open_keys = {s.key() for s in opened}
    for s in closed:
        k = s.key()
        assert k[:-1] + (frozenset(),) in open_keys


def test_encoding_injective_on_reachable_states(base):
    _, states = enumerate_reachable_states(base)
    codes = {encode_state(base, s).tobytes() for s in states}
    assert len(codes) == len(states)

