"""Exact shortest attack paths by breadth-first search over attacker states."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .env import ActionInstance, AttackerState, apply_action, feasible_actions, goal_reached, reset
from .scenario import CyberScenario

DEFAULT_MAX_STATES = 2_000_000


class StateBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class AttackPath:
    length: int
    actions: tuple[ActionInstance, ...]


def shortest_attack_path(s: CyberScenario, max_states: int = DEFAULT_MAX_STATES) -> AttackPath | None:
    """Minimum-length action sequence from reset to holding every info item.

    Every action costs one step. Returns ``None`` when the goal is unreachable.
    """
    start = reset(s)
    if goal_reached(s, start):
        return AttackPath(0, ())
    parent: dict[tuple, tuple[tuple, ActionInstance] | None] = {start.key(): None}
    queue: deque[AttackerState] = deque([start])
    # search states carry no step count, so the episode cap never binds here
    cap = float("inf")
    while queue:
        st = queue.popleft()
        for a in feasible_actions(s, st):
            out = apply_action(s, st, a, max_steps=cap)
            key = out.next.key()
            if key in parent:
                continue
            parent[key] = (st.key(), a)
            if len(parent) > max_states:
                raise StateBudgetExceeded(f"more than {max_states} states visited")
            if goal_reached(s, out.next):
                return AttackPath(*_unwind(parent, key))
            queue.append(_strip(out.next))
    return None


def _strip(st: AttackerState) -> AttackerState:
    return AttackerState(*st.key())


def _unwind(parent: dict, key: tuple) -> tuple[int, tuple[ActionInstance, ...]]:
    actions = []
    while parent[key] is not None:
        key, a = parent[key]
        actions.append(a)
    actions.reverse()
    return len(actions), tuple(actions)


def enumerate_reachable_states(s: CyberScenario, max_states: int = DEFAULT_MAX_STATES) -> tuple[int, list[AttackerState]]:
    """All states reachable from reset via feasible actions, in BFS order.

    States are de-duplicated on their feasibility key and returned with zero
    step count and no milestone bookkeeping. Terminal states are included but
    not expanded.
    """
    start = _strip(reset(s))
    seen = {start.key()}
    order = [start]
    queue = deque([start])
    cap = float("inf")
    while queue:
        st = queue.popleft()
        if goal_reached(s, st):
            continue
        for a in feasible_actions(s, st):
            nxt = apply_action(s, st, a, max_steps=cap).next
            key = nxt.key()
            if key in seen:
                continue
            seen.add(key)
            if len(seen) > max_states:
                raise StateBudgetExceeded(f"more than {max_states} states visited")
            nxt = _strip(nxt)
            order.append(nxt)
            queue.append(nxt)
    return len(order), order
