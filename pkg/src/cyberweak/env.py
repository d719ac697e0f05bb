"""Episodic attacker MDP over a :class:`~cyberweak.scenario.CyberScenario`.

Transitions are deterministic. The feasible action set depends on the
attacker's state; infeasible actions are reported rather than applied.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .scenario import FORWARDING_KINDS, CyberScenario, minimal_state_size

MAX_STEPS = 10000
INFO_REWARD = 10000.0
MILESTONE_REWARDS = {
    "dominate:FW1_manager": 100.0,
    "dominate:FW2_manager": 200.0,
    "credential:S1_web_password": 300.0,
    "credential:S2_web_password": 400.0,
}


class DimensionError(ValueError):
    pass


class UnknownDevice(KeyError):
    pass


class UnknownService(KeyError):
    pass


class ActionKind(str, Enum):
    MOVE = "Move"
    USE_DEVICE = "UseDevice"
    CONNECT = "Connect"
    DOMINATE = "Dominate"
    HARVEST = "Harvest"
    ADD_ACL = "AddAcl"
    READ_INFO = "ReadInfo"


@dataclass(frozen=True)
class ActionInstance:
    kind: ActionKind
    target: str | int  # AddAcl targets an index into addable_rules
    via: str | None
    global_index: int

    def __str__(self) -> str:
        if self.kind is ActionKind.CONNECT:
            return f"Connect({self.target} via {self.via})"
        return f"{self.kind.value}({self.target})"


@dataclass(frozen=True)
class AttackerState:
    current_space: str
    devices_in_use: frozenset[str] = frozenset()
    connected: frozenset[str] = frozenset()
    dominated: frozenset[str] = frozenset()
    credentials: frozenset[str] = frozenset()
    info: frozenset[str] = frozenset()
    acl_added: frozenset[int] = frozenset()
    milestones_awarded: frozenset[str] = frozenset()
    steps_taken: int = 0

    def key(self) -> tuple:
        """Projection that determines all future feasibility."""
        return (
            self.current_space,
            self.devices_in_use,
            self.connected,
            self.dominated,
            self.credentials,
            self.info,
            self.acl_added,
        )


@dataclass(frozen=True)
class StepOutcome:
    next: AttackerState
    reward: float
    done: bool
    feasible: bool


class _EnvModel:
    """Per-scenario lookup tables: canonical actions, reachability, layout."""

    def __init__(self, s: CyberScenario):
        self.s = s
        dev = s.device_by_id
        self.space_ids = s.space_ids
        self.service_ids = tuple(v.id for v in s.services)
        self.usable_by_space: dict[str, tuple[str, ...]] = {
            sp: tuple(d.id for d in s.devices if d.id in s.attacker.initial_devices and d.space == sp)
            for sp in self.space_ids
        }
        # a dominated service on a terminal gives remote control of that terminal
        self.pivot_of = {v.id: v.device for v in s.services if dev[v.device].kind == "terminal"}
        self.vias = tuple(
            d.id for d in s.devices if d.id in s.attacker.initial_devices or d.id in set(self.pivot_of.values())
        )
        self.creds_in_space: dict[str, tuple[str, ...]] = {sp: () for sp in self.space_ids}
        self.creds_on_service: dict[str, tuple[str, ...]] = {v: () for v in self.service_ids}
        for c in s.credentials:
            table = self.creds_in_space if c.location.kind == "space" else self.creds_on_service
            table[c.location.target] = table[c.location.target] + (c.id,)
        self.info_on_service: dict[str, tuple[str, ...]] = {v: () for v in self.service_ids}
        for i in s.info_items:
            self.info_on_service[i.hosted_on] += (i.id,)
        self.managers: dict[int, frozenset[str]] = {
            k: frozenset(v.id for v in s.services if v.device == r.firewall and not v.decoy)
            for k, r in enumerate(s.addable_rules)
        }
        self.baseline = frozenset(s.acl_rules)
        self.password = {v.id: v.password for v in s.services}
        self.info_ids = frozenset(i.id for i in s.info_items)

        self._paths = _gatekeepers(s)
        self.open_always: dict[tuple[str, str], bool] = {}
        self.open_with: dict[tuple[str, str], frozenset[int]] = {}
        for via in self.vias:
            for v in self.service_ids:
                self._admission(via, v)

        acts: list[ActionInstance] = []

        def add(kind: ActionKind, target, via=None) -> None:
            acts.append(ActionInstance(kind, target, via, len(acts)))

        for sp in self.space_ids:
            add(ActionKind.MOVE, sp)
        for d in s.devices:
            if d.id in s.attacker.initial_devices:
                add(ActionKind.USE_DEVICE, d.id)
        for v in self.service_ids:
            for via in self.vias:
                add(ActionKind.CONNECT, v, via)
        for v in self.service_ids:
            add(ActionKind.DOMINATE, v)
        for c in s.credentials:
            add(ActionKind.HARVEST, c.id)
        for k in range(len(s.addable_rules)):
            add(ActionKind.ADD_ACL, k)
        for i in s.info_items:
            add(ActionKind.READ_INFO, i.id)
        self.actions = tuple(acts)
        self.lookup = {(a.kind, a.target, a.via): a for a in acts}

        # state vector layout
        self.dim = s.state_dim
        need = minimal_state_size(s)
        if need > self.dim:
            raise DimensionError(f"layout needs {need} entries, state_dim is {self.dim}")
        off = 0
        self.off_space = {x: off + k for k, x in enumerate(self.space_ids)}
        off += len(self.space_ids)
        self.off_device = {d.id: off + k for k, d in enumerate(s.devices)}
        off += len(s.devices)
        self.off_conn = {v: off + k for k, v in enumerate(self.service_ids)}
        off += len(self.service_ids)
        self.off_dom = {v: off + k for k, v in enumerate(self.service_ids)}
        off += len(self.service_ids)
        self.off_cred = {c.id: off + k for k, c in enumerate(s.credentials)}
        off += len(s.credentials)
        self.off_info = {i.id: off + k for k, i in enumerate(s.info_items)}
        off += len(s.info_items)
        self.off_rule = off
        self.rule_active_base = [r in self.baseline for r in s.addable_rules]

    def _admission(self, via: str, target: str) -> None:
        """Which ACL configurations let ``via`` reach ``target``."""
        always = False
        opening: set[int] = set()
        for gate in self._paths.get((via, target), ()):
            if gate is None:
                always = True
                continue
            if any(r.firewall == gate and via in r.sources and r.dest == target for r in self.baseline):
                always = True
            for k, r in enumerate(self.s.addable_rules):
                if r.firewall == gate and via in r.sources and r.dest == target:
                    opening.add(k)
        self.open_always[(via, target)] = always
        self.open_with[(via, target)] = frozenset(opening)

    def reachable(self, st: AttackerState, via: str, target: str) -> bool:
        key = (via, target)
        if key not in self.open_always:
            self._admission(via, target)
        if self.open_always[key]:
            return True
        return not self.open_with[key].isdisjoint(st.acl_added)

    def controlled(self, st: AttackerState) -> frozenset[str]:
        pivots = {self.pivot_of[v] for v in st.dominated if v in self.pivot_of}
        return st.devices_in_use | pivots if pivots else st.devices_in_use

    def rule_active(self, st: AttackerState, k: int) -> bool:
        return self.rule_active_base[k] or k in st.acl_added


def _gatekeepers(s: CyberScenario) -> dict[tuple[str, str], frozenset[str | None]]:
    """For every (source device, service): the possible gatekeeping firewalls.

    Traffic leaves any port of the source device and follows links through
    forwarding devices (routers, switches, firewalls), visiting each device at
    most once. A route ends on the service's bound port, or on any port of a
    forwarding device that hosts the service. Its gatekeeper is the last
    firewall entered (the hosting device itself if that is a firewall), or
    ``None`` when no firewall stands in the way.
    """
    dev = s.device_by_id
    port_dev = {p.id: p.device for p in s.ports}
    peers: dict[str, list[str]] = {p.id: [] for p in s.ports}
    for ln in s.links:
        peers[ln.a].append(ln.b)
        peers[ln.b].append(ln.a)

    # (source device, target device, arrival port, gatekeeper)
    arrivals: dict[str, set[tuple[str, str, str | None]]] = {}
    for src in s.devices:
        found: set[tuple[str, str, str | None]] = set()

        def walk(port: str, visited: frozenset[str], gate: str | None) -> None:
            for nxt in peers[port]:
                d = port_dev[nxt]
                if d in visited:
                    continue
                kind = dev[d].kind
                found.add((d, nxt, d if kind == "firewall" else gate))
                if kind in FORWARDING_KINDS:
                    g2 = d if kind == "firewall" else gate
                    for out in dev[d].ports:
                        if out != nxt:
                            walk(out, visited | {d}, g2)

        for p in src.ports:
            walk(p, frozenset({src.id}), None)
        arrivals[src.id] = found

    out: dict[tuple[str, str], frozenset[str | None]] = {}
    for src in s.devices:
        for v in s.services:
            if v.device == src.id:
                out[(src.id, v.id)] = frozenset({None})
                continue
            forwarding = dev[v.device].kind in FORWARDING_KINDS
            gates = {
                gate
                for d, port, gate in arrivals[src.id]
                if d == v.device and (forwarding or port == v.bound_port)
            }
            if gates:
                out[(src.id, v.id)] = frozenset(gates)
    return out


def env_model(s: CyberScenario) -> _EnvModel:
    model = s.__dict__.get("_env_model")
    if model is None:
        model = s.__dict__["_env_model"] = _EnvModel(s)
    return model


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def reset(s: CyberScenario) -> AttackerState:
    return AttackerState(current_space=s.attacker.start_space, credentials=frozenset(s.attacker.initial_credentials))


def canonical_actions(s: CyberScenario) -> tuple[ActionInstance, ...]:
    return env_model(s).actions


def action(s: CyberScenario, kind: ActionKind | str, target, via: str | None = None) -> ActionInstance:
    """Look up a canonical action, e.g. ``action(s, "Connect", "S1_web", "T1")``."""
    return env_model(s).lookup[(ActionKind(kind), target, via)]


def service_reachable(s: CyberScenario, st: AttackerState, via: str, target: str) -> bool:
    if via not in s.device_by_id:
        raise UnknownDevice(via)
    if target not in s.service_by_id:
        raise UnknownService(target)
    return env_model(s).reachable(st, via, target)


def feasible_actions(s: CyberScenario, st: AttackerState) -> list[ActionInstance]:
    m = env_model(s)
    look = m.lookup
    out: list[ActionInstance] = []
    for sp in m.space_ids:
        if sp != st.current_space:
            out.append(look[(ActionKind.MOVE, sp, None)])
    for d in m.usable_by_space[st.current_space]:
        if d not in st.devices_in_use:
            out.append(look[(ActionKind.USE_DEVICE, d, None)])
    controlled = m.controlled(st)
    if controlled:
        for v in m.service_ids:
            if v in st.connected:
                continue
            for via in m.vias:
                if via in controlled and m.reachable(st, via, v):
                    out.append(look[(ActionKind.CONNECT, v, via)])
    for v in st.connected - st.dominated:
        pw = m.password[v]
        if pw is None or pw in st.credentials:
            out.append(look[(ActionKind.DOMINATE, v, None)])
    for c in m.creds_in_space[st.current_space]:
        if c not in st.credentials:
            out.append(look[(ActionKind.HARVEST, c, None)])
    for v in st.dominated:
        for c in m.creds_on_service[v]:
            if c not in st.credentials:
                out.append(look[(ActionKind.HARVEST, c, None)])
        for i in m.info_on_service[v]:
            if i not in st.info:
                out.append(look[(ActionKind.READ_INFO, i, None)])
    for k, mgrs in m.managers.items():
        if not m.rule_active(st, k) and not mgrs.isdisjoint(st.dominated):
            out.append(look[(ActionKind.ADD_ACL, k, None)])
    # a credential can sit both in a space and on a service only in odd files
    return sorted(set(out), key=lambda a: a.global_index)


def is_feasible(s: CyberScenario, st: AttackerState, a: ActionInstance) -> bool:
    """Per-action feasibility predicate, written independently of
    :func:`feasible_actions` so the two can be cross-checked."""
    m = env_model(s)
    if not (0 <= a.global_index < len(m.actions)) or m.actions[a.global_index] != a:
        return False
    k, t = a.kind, a.target
    if k is ActionKind.MOVE:
        return t != st.current_space
    if k is ActionKind.USE_DEVICE:
        return t not in st.devices_in_use and s.device_by_id[t].space == st.current_space
    if k is ActionKind.CONNECT:
        return t not in st.connected and a.via in m.controlled(st) and m.reachable(st, a.via, t)
    if k is ActionKind.DOMINATE:
        pw = s.service_by_id[t].password
        return t in st.connected and t not in st.dominated and (pw is None or pw in st.credentials)
    if k is ActionKind.HARVEST:
        if t in st.credentials:
            return False
        loc = s.credential_by_id[t].location
        if loc.kind == "space":
            return loc.target == st.current_space
        return loc.target in st.dominated
    if k is ActionKind.ADD_ACL:
        rule = s.addable_rules[t]
        if rule in m.baseline or t in st.acl_added:
            return False
        return any(v.device == rule.firewall and not v.decoy and v.id in st.dominated for v in s.services)
    if k is ActionKind.READ_INFO:
        return t not in st.info and s.info_by_id[t].hosted_on in st.dominated
    return False


def _achievements(st: AttackerState) -> set[str]:
    tags = {f"dominate:{v}" for v in st.dominated}
    tags.update(f"credential:{c}" for c in st.credentials)
    tags.update(f"info:{i}" for i in st.info)
    return tags


def _tag_reward(tag: str) -> float:
    if tag.startswith("info:"):
        return INFO_REWARD
    return MILESTONE_REWARDS.get(tag, 0.0)


def milestone_reward(previous: AttackerState, a: ActionInstance, next: AttackerState) -> float:
    """Reward for milestones first reached by the transition; each pays once per episode."""
    fresh = _achievements(next) - _achievements(previous) - previous.milestones_awarded
    return float(sum(_tag_reward(t) for t in fresh))


def _new_milestones(previous: AttackerState, next: AttackerState) -> frozenset[str]:
    fresh = _achievements(next) - _achievements(previous) - previous.milestones_awarded
    return frozenset(t for t in fresh if _tag_reward(t) > 0)


def goal_reached(s: CyberScenario, st: AttackerState) -> bool:
    ids = env_model(s).info_ids
    return bool(ids) and ids <= st.info


def apply_action(s: CyberScenario, st: AttackerState, a: ActionInstance, max_steps: int = MAX_STEPS) -> StepOutcome:
    steps = st.steps_taken + 1
    if not is_feasible(s, st, a):
        return StepOutcome(replace(st, steps_taken=steps), 0.0, steps >= max_steps, False)
    k, t = a.kind, a.target
    if k is ActionKind.MOVE:
        nxt = replace(st, current_space=t)
    elif k is ActionKind.USE_DEVICE:
        nxt = replace(st, devices_in_use=st.devices_in_use | {t})
    elif k is ActionKind.CONNECT:
        nxt = replace(st, connected=st.connected | {t})
    elif k is ActionKind.DOMINATE:
        nxt = replace(st, dominated=st.dominated | {t})
    elif k is ActionKind.HARVEST:
        nxt = replace(st, credentials=st.credentials | {t})
    elif k is ActionKind.ADD_ACL:
        nxt = replace(st, acl_added=st.acl_added | {t})
    else:
        nxt = replace(st, info=st.info | {t})
    reward = milestone_reward(st, a, nxt)
    nxt = replace(nxt, milestones_awarded=st.milestones_awarded | _new_milestones(st, nxt), steps_taken=steps)
    done = goal_reached(s, nxt) or steps >= max_steps
    return StepOutcome(nxt, reward, done, True)


def encode_state(s: CyberScenario, st: AttackerState) -> np.ndarray:
    m = env_model(s)
    x = np.zeros(m.dim)
    x[m.off_space[st.current_space]] = 1.0
    for d in st.devices_in_use:
        x[m.off_device[d]] = 1.0
    for v in st.connected:
        x[m.off_conn[v]] = 1.0
    for v in st.dominated:
        x[m.off_dom[v]] = 1.0
    for c in st.credentials:
        x[m.off_cred[c]] = 1.0
    for i in st.info:
        x[m.off_info[i]] = 1.0
    for k in range(len(m.rule_active_base)):
        if m.rule_active(st, k):
            x[m.off_rule + k] = 1.0
    return x
