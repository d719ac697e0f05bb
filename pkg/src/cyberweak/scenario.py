"""Multi-domain cyberspace data model, scenario files and the built-in environment.

A scenario is an immutable description of spaces (physical domain), devices,
ports, links and services (digital domain), credentials (cognitive domain),
firewall ACL rules and the protected information items. Scenarios are
exchanged as strict JSON documents; see :func:`load_scenario` and
:func:`dump_scenario`.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable

DEVICE_KINDS = ("terminal", "firewall", "sensor", "router", "switch", "server")
FORWARDING_KINDS = frozenset({"firewall", "router", "switch"})

TOP_LEVEL_KEYS = (
    "spaces",
    "devices",
    "ports",
    "links",
    "services",
    "credentials",
    "acl_rules",
    "addable_rules",
    "key_policies",
    "info_items",
    "attacker",
    "state_dim",
)


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(ScenarioError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid scenario")


class MissingKeyPolicies(ScenarioError):
    pass


@dataclass(frozen=True)
class Space:
    id: str
    parent: str | None = None


@dataclass(frozen=True)
class Device:
    id: str
    space: str
    ports: tuple[str, ...]
    kind: str


@dataclass(frozen=True)
class Port:
    id: str
    device: str


@dataclass(frozen=True)
class Link:
    a: str
    b: str


@dataclass(frozen=True)
class Service:
    id: str
    device: str
    bound_port: str
    password: str | None = None
    decoy: bool = False


@dataclass(frozen=True)
class Location:
    """Where a credential can be picked up: lying in a space or stored on a service."""

    kind: str  # "space" | "service"
    target: str

    @classmethod
    def in_space(cls, space: str) -> "Location":
        return cls("space", space)

    @classmethod
    def on_service(cls, service: str) -> "Location":
        return cls("service", service)


@dataclass(frozen=True)
class Credential:
    id: str
    unlocks: str
    location: Location


@dataclass(frozen=True)
class AclRule:
    firewall: str
    sources: frozenset[str]
    dest: str

    def __str__(self) -> str:
        return f"{self.firewall}:{{{','.join(sorted(self.sources))}}}->{self.dest}"


@dataclass(frozen=True)
class InfoItem:
    id: str
    hosted_on: str


@dataclass(frozen=True)
class AttackerSpec:
    start_space: str
    initial_credentials: frozenset[str] = frozenset()
    initial_devices: frozenset[str] = frozenset()


@dataclass(frozen=True)
class CyberScenario:
    spaces: tuple[Space, ...]
    devices: tuple[Device, ...]
    ports: tuple[Port, ...]
    links: tuple[Link, ...]
    services: tuple[Service, ...]
    credentials: tuple[Credential, ...]
    acl_rules: tuple[AclRule, ...]
    addable_rules: tuple[AclRule, ...]
    key_policies: tuple[AclRule, ...]
    info_items: tuple[InfoItem, ...]
    attacker: AttackerSpec
    state_dim: int

    # lookup tables, excluded from equality
    @cached_property
    def space_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.spaces)

    @cached_property
    def device_by_id(self) -> dict[str, Device]:
        return {d.id: d for d in self.devices}

    @cached_property
    def port_by_id(self) -> dict[str, Port]:
        return {p.id: p for p in self.ports}

    @cached_property
    def service_by_id(self) -> dict[str, Service]:
        return {s.id: s for s in self.services}

    @cached_property
    def credential_by_id(self) -> dict[str, Credential]:
        return {c.id: c for c in self.credentials}

    @cached_property
    def info_by_id(self) -> dict[str, InfoItem]:
        return {i.id: i for i in self.info_items}

    @property
    def outermost_space(self) -> str:
        return next(s.id for s in self.spaces if s.parent is None)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _duplicates(ids: Iterable[str]) -> list[str]:
    return sorted(k for k, n in Counter(ids).items() if n > 1)


def validate(s: CyberScenario) -> list[str]:
    """Check every structural invariant; returns one message per violation."""
    out: list[str] = []

    all_ids = (
        [("space", x.id) for x in s.spaces]
        + [("device", x.id) for x in s.devices]
        + [("port", x.id) for x in s.ports]
        + [("service", x.id) for x in s.services]
        + [("credential", x.id) for x in s.credentials]
        + [("info item", x.id) for x in s.info_items]
    )
    for kind in ("space", "device", "port", "service", "credential", "info item"):
        for dup in _duplicates(i for k, i in all_ids if k == kind):
            out.append(f"duplicate id: {kind} {dup!r}")

    spaces = {x.id: x for x in s.spaces}
    devices = {x.id: x for x in s.devices}
    ports = {x.id: x for x in s.ports}
    services = {x.id: x for x in s.services}
    credentials = {x.id: x for x in s.credentials}

    roots = [x.id for x in s.spaces if x.parent is None]
    if len(roots) != 1:
        out.append(f"spaces: expected exactly one outermost space, found {len(roots)} {roots}")
    for sp in s.spaces:
        if sp.parent is not None and sp.parent not in spaces:
            out.append(f"space {sp.id!r}: unknown parent {sp.parent!r}")
    # containment cycles never reach a root
    for sp in s.spaces:
        seen = {sp.id}
        cur = sp.parent
        while cur is not None and cur in spaces:
            if cur in seen:
                out.append(f"space {sp.id!r}: containment cycle")
                break
            seen.add(cur)
            cur = spaces[cur].parent

    for d in s.devices:
        if d.space not in spaces:
            out.append(f"device {d.id!r}: unknown space {d.space!r}")
        if d.kind not in DEVICE_KINDS:
            out.append(f"device {d.id!r}: unknown kind {d.kind!r}")
        for p in d.ports:
            if p not in ports:
                out.append(f"device {d.id!r}: unknown port {p!r}")
            elif ports[p].device != d.id:
                out.append(f"device {d.id!r}: port {p!r} belongs to {ports[p].device!r}")
    owners = Counter(p for d in s.devices for p in d.ports)
    for p in s.ports:
        if p.device not in devices:
            out.append(f"port {p.id!r}: unknown device {p.device!r}")
        elif owners[p.id] != 1:
            out.append(f"port {p.id!r}: listed by {owners[p.id]} devices")

    seen_links: set[frozenset[str]] = set()
    for ln in s.links:
        for end in (ln.a, ln.b):
            if end not in ports:
                out.append(f"link {ln.a}-{ln.b}: unknown port {end!r}")
        if ln.a == ln.b:
            out.append(f"link {ln.a}-{ln.b}: self-link")
        key = frozenset((ln.a, ln.b))
        if key in seen_links:
            out.append(f"link {ln.a}-{ln.b}: duplicate link")
        seen_links.add(key)

    for v in s.services:
        if v.device not in devices:
            out.append(f"service {v.id!r}: unknown device {v.device!r}")
        if v.bound_port not in ports:
            out.append(f"service {v.id!r}: unknown port {v.bound_port!r}")
        elif ports[v.bound_port].device != v.device:
            out.append(f"service {v.id!r}: port {v.bound_port!r} is not on device {v.device!r}")
        if v.password is not None and v.password not in credentials:
            out.append(f"service {v.id!r}: unknown credential {v.password!r}")

    for c in s.credentials:
        if c.unlocks not in services:
            out.append(f"credential {c.id!r}: unlocks unknown service {c.unlocks!r}")
        loc = c.location
        if loc.kind == "space":
            if loc.target not in spaces:
                out.append(f"credential {c.id!r}: unknown space {loc.target!r}")
        elif loc.kind == "service":
            if loc.target not in services:
                out.append(f"credential {c.id!r}: unknown service {loc.target!r}")
        else:
            out.append(f"credential {c.id!r}: bad location kind {loc.kind!r}")

    def check_rule(where: str, r: AclRule) -> None:
        if r.firewall not in devices:
            out.append(f"{where} {r}: unknown firewall {r.firewall!r}")
        elif devices[r.firewall].kind != "firewall":
            out.append(f"{where} {r}: device {r.firewall!r} is not a firewall")
        if not r.sources:
            out.append(f"{where} {r}: empty sources")
        for src in sorted(r.sources):
            if src not in devices:
                out.append(f"{where} {r}: unknown source device {src!r}")
        if r.dest not in services:
            out.append(f"{where} {r}: unknown service {r.dest!r}")

    for r in s.acl_rules:
        check_rule("acl rule", r)
    for r in s.addable_rules:
        check_rule("addable rule", r)
    for r in s.key_policies:
        check_rule("key policy", r)
        if r not in s.addable_rules:
            out.append(f"key policy {r}: not among addable rules")
    if len(set(s.addable_rules)) != len(s.addable_rules):
        out.append("addable rules: duplicate rule")
    if s.key_policies and len(s.key_policies) != 3:
        out.append(f"key policies: expected 3 rules or none, found {len(s.key_policies)}")

    for i in s.info_items:
        if i.hosted_on not in services:
            out.append(f"info item {i.id!r}: unknown service {i.hosted_on!r}")

    a = s.attacker
    if a.start_space not in spaces:
        out.append(f"attacker: unknown start space {a.start_space!r}")
    for c in sorted(a.initial_credentials):
        if c not in credentials:
            out.append(f"attacker: unknown credential {c!r}")
    for d in sorted(a.initial_devices):
        if d not in devices:
            out.append(f"attacker: unknown device {d!r}")

    if not isinstance(s.state_dim, int) or isinstance(s.state_dim, bool) or s.state_dim <= 0:
        out.append(f"state_dim: must be a positive integer, got {s.state_dim!r}")
    else:
        need = minimal_state_size(s)
        if s.state_dim < need:
            out.append(f"state_dim: {s.state_dim} is below the minimal layout size {need}")
    return out


def minimal_state_size(s: CyberScenario) -> int:
    return (
        len(s.spaces)
        + len(s.devices)
        + 2 * len(s.services)
        + len(s.credentials)
        + len(s.info_items)
        + len(s.addable_rules)
    )


def key_policies(s: CyberScenario) -> tuple[AclRule, ...]:
    if not s.key_policies:
        raise MissingKeyPolicies("scenario declares no key policies")
    return s.key_policies


def preadded_count(s: CyberScenario) -> int:
    """How many declared key policies are already in the baseline ACLs."""
    baseline = set(s.acl_rules)
    return sum(1 for r in s.key_policies if r in baseline)


# ---------------------------------------------------------------------------
# JSON file format
# ---------------------------------------------------------------------------


def _rule_to_doc(r: AclRule) -> dict[str, Any]:
    return {"firewall": r.firewall, "sources": sorted(r.sources), "dest": r.dest}


def to_document(s: CyberScenario) -> dict[str, Any]:
    def loc(c: Credential) -> dict[str, str]:
        return {"in_space": c.location.target} if c.location.kind == "space" else {"on_service": c.location.target}

    return {
        "spaces": [{"id": x.id, "parent": x.parent} for x in s.spaces],
        "devices": [{"id": x.id, "space": x.space, "ports": list(x.ports), "kind": x.kind} for x in s.devices],
        "ports": [{"id": x.id, "device": x.device} for x in s.ports],
        "links": [{"a": x.a, "b": x.b} for x in s.links],
        "services": [
            {"id": x.id, "device": x.device, "bound_port": x.bound_port, "password": x.password, "decoy": x.decoy}
            for x in s.services
        ],
        "credentials": [{"id": x.id, "unlocks": x.unlocks, "location": loc(x)} for x in s.credentials],
        "acl_rules": [_rule_to_doc(r) for r in s.acl_rules],
        "addable_rules": [_rule_to_doc(r) for r in s.addable_rules],
        "key_policies": [_rule_to_doc(r) for r in s.key_policies],
        "info_items": [{"id": x.id, "hosted_on": x.hosted_on} for x in s.info_items],
        "attacker": {
            "start_space": s.attacker.start_space,
            "initial_credentials": sorted(s.attacker.initial_credentials),
            "initial_devices": sorted(s.attacker.initial_devices),
        },
        "state_dim": s.state_dim,
    }


def dump_scenario(s: CyberScenario) -> str:
    return json.dumps(to_document(s), indent=2) + "\n"


class _Reader:
    """Strict field access over decoded JSON; collects problems instead of raising."""

    def __init__(self) -> None:
        self.problems: list[str] = []

    def obj(self, where: str, raw: Any, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> dict | None:
        if not isinstance(raw, dict):
            self.problems.append(f"{where}: expected an object")
            return None
        for k in sorted(set(raw) - set(required) - set(optional)):
            self.problems.append(f"{where}: unknown key {k!r}")
        missing = [k for k in required if k not in raw]
        for k in missing:
            self.problems.append(f"{where}: missing key {k!r}")
        return None if missing else raw

    def string(self, where: str, value: Any, nullable: bool = False) -> Any:
        if value is None and nullable:
            return None
        if not isinstance(value, str):
            self.problems.append(f"{where}: expected a string, got {value!r}")
        return value

    def strings(self, where: str, value: Any) -> list[str]:
        if not isinstance(value, list):
            self.problems.append(f"{where}: expected a list")
            return []
        return [self.string(where, v) for v in value]

    def array(self, where: str, value: Any) -> list:
        if not isinstance(value, list):
            self.problems.append(f"{where}: expected a list")
            return []
        return value


def _rules_from_doc(rd: _Reader, where: str, raw: Any) -> tuple[AclRule, ...]:
    rules = []
    for n, item in enumerate(rd.array(where, raw)):
        o = rd.obj(f"{where}[{n}]", item, ("firewall", "sources", "dest"))
        if o is None:
            continue
        rules.append(
            AclRule(
                rd.string(f"{where}[{n}].firewall", o["firewall"]),
                frozenset(rd.strings(f"{where}[{n}].sources", o["sources"])),
                rd.string(f"{where}[{n}].dest", o["dest"]),
            )
        )
    return tuple(rules)


def from_document(doc: Any) -> CyberScenario:
    """Build and validate a scenario from decoded JSON."""
    rd = _Reader()
    top = rd.obj("document", doc, TOP_LEVEL_KEYS)
    if top is None:
        raise ValidationError(rd.problems)

    spaces = []
    for n, item in enumerate(rd.array("spaces", top["spaces"])):
        o = rd.obj(f"spaces[{n}]", item, ("id",), ("parent",))
        if o is not None:
            spaces.append(Space(rd.string(f"spaces[{n}].id", o["id"]), rd.string(f"spaces[{n}].parent", o.get("parent"), True)))

    devices = []
    for n, item in enumerate(rd.array("devices", top["devices"])):
        o = rd.obj(f"devices[{n}]", item, ("id", "space", "ports", "kind"))
        if o is not None:
            devices.append(
                Device(
                    rd.string(f"devices[{n}].id", o["id"]),
                    rd.string(f"devices[{n}].space", o["space"]),
                    tuple(rd.strings(f"devices[{n}].ports", o["ports"])),
                    rd.string(f"devices[{n}].kind", o["kind"]),
                )
            )

    ports = []
    for n, item in enumerate(rd.array("ports", top["ports"])):
        o = rd.obj(f"ports[{n}]", item, ("id", "device"))
        if o is not None:
            ports.append(Port(rd.string(f"ports[{n}].id", o["id"]), rd.string(f"ports[{n}].device", o["device"])))

    links = []
    for n, item in enumerate(rd.array("links", top["links"])):
        o = rd.obj(f"links[{n}]", item, ("a", "b"))
        if o is not None:
            links.append(Link(rd.string(f"links[{n}].a", o["a"]), rd.string(f"links[{n}].b", o["b"])))

    services = []
    for n, item in enumerate(rd.array("services", top["services"])):
        o = rd.obj(f"services[{n}]", item, ("id", "device", "bound_port"), ("password", "decoy"))
        if o is None:
            continue
        decoy = o.get("decoy", False)
        if not isinstance(decoy, bool):
            rd.problems.append(f"services[{n}].decoy: expected a boolean")
        services.append(
            Service(
                rd.string(f"services[{n}].id", o["id"]),
                rd.string(f"services[{n}].device", o["device"]),
                rd.string(f"services[{n}].bound_port", o["bound_port"]),
                rd.string(f"services[{n}].password", o.get("password"), True),
                bool(decoy),
            )
        )

    credentials = []
    for n, item in enumerate(rd.array("credentials", top["credentials"])):
        o = rd.obj(f"credentials[{n}]", item, ("id", "unlocks", "location"))
        if o is None:
            continue
        lo = o["location"]
        if isinstance(lo, dict) and len(lo) == 1 and "in_space" in lo:
            loc = Location.in_space(rd.string(f"credentials[{n}].location", lo["in_space"]))
        elif isinstance(lo, dict) and len(lo) == 1 and "on_service" in lo:
            loc = Location.on_service(rd.string(f"credentials[{n}].location", lo["on_service"]))
        else:
            rd.problems.append(f"credentials[{n}].location: expected {{'in_space': id}} or {{'on_service': id}}")
            continue
        credentials.append(
            Credential(rd.string(f"credentials[{n}].id", o["id"]), rd.string(f"credentials[{n}].unlocks", o["unlocks"]), loc)
        )

    info_items = []
    for n, item in enumerate(rd.array("info_items", top["info_items"])):
        o = rd.obj(f"info_items[{n}]", item, ("id", "hosted_on"))
        if o is not None:
            info_items.append(InfoItem(rd.string(f"info_items[{n}].id", o["id"]), rd.string(f"info_items[{n}].hosted_on", o["hosted_on"])))

    attacker = None
    o = rd.obj("attacker", top["attacker"], ("start_space",), ("initial_credentials", "initial_devices"))
    if o is not None:
        attacker = AttackerSpec(
            rd.string("attacker.start_space", o["start_space"]),
            frozenset(rd.strings("attacker.initial_credentials", o.get("initial_credentials", []))),
            frozenset(rd.strings("attacker.initial_devices", o.get("initial_devices", []))),
        )

    state_dim = top["state_dim"]
    if not isinstance(state_dim, int) or isinstance(state_dim, bool):
        rd.problems.append(f"state_dim: expected an integer, got {state_dim!r}")

    scenario = CyberScenario(
        spaces=tuple(spaces),
        devices=tuple(devices),
        ports=tuple(ports),
        links=tuple(links),
        services=tuple(services),
        credentials=tuple(credentials),
        acl_rules=_rules_from_doc(rd, "acl_rules", top["acl_rules"]),
        addable_rules=_rules_from_doc(rd, "addable_rules", top["addable_rules"]),
        key_policies=_rules_from_doc(rd, "key_policies", top["key_policies"]),
        info_items=tuple(info_items),
        attacker=attacker or AttackerSpec(""),
        state_dim=state_dim,
    )
    if rd.problems:
        raise ValidationError(rd.problems)
    violations = validate(scenario)
    if violations:
        raise ValidationError(violations)
    return scenario


def load_scenario(text: str) -> CyberScenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    return from_document(doc)


def load_scenario_file(path: str) -> CyberScenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


# ---------------------------------------------------------------------------
# built-in experiment environment
# ---------------------------------------------------------------------------

BUILTIN_STATE_DIM = 106

# (device, space, kind, ports)
_BUILTIN_DEVICES = (
    ("T1", "P1", "terminal", ("T1_E0",)),
    ("D1", "P2", "sensor", ("D1_E0",)),
    ("T2", "P3", "terminal", ("T2_E0", "T2_S1")),
    ("FW1", "P3", "firewall", ("FW1_E0", "FW1_E1", "FW1_E2", "FW1_E3")),
    ("FW2", "P4", "firewall", ("FW2_E0", "FW2_E2")),
    ("R", "P4", "router", ("R_E0", "R_E1", "R_E2")),
    ("SW", "P4", "switch", ("SW_E0", "SW_E1", "SW_E2")),
    ("S1", "P4", "server", ("S1_E0",)),
    ("S2", "P4", "server", ("S2_E0",)),
)

_BUILTIN_LINKS = (
    ("T1_E0", "FW1_E0"),
    ("D1_E0", "FW1_E1"),
    ("T2_E0", "FW1_E3"),
    ("FW1_E2", "R_E0"),
    ("T2_S1", "R_E1"),
    ("R_E2", "FW2_E2"),
    ("FW2_E0", "SW_E0"),
    ("SW_E1", "S1_E0"),
    ("SW_E2", "S2_E0"),
)

# (service, device, port, password)
SERVICE_TABLE = (
    ("T2_manager", "T2", "T2_E0", None),
    ("FW1_manager", "FW1", "FW1_E2", "FW1_password"),
    ("FW2_manager", "FW2", "FW2_E2", "FW2_password"),
    ("S1_web", "S1", "S1_E0", "S1_web_password"),
    ("S2_web", "S2", "S2_E0", "S2_web_password"),
)

_BUILTIN_CREDENTIALS = (
    ("FW1_password", "FW1_manager", Location.in_space("P2")),
    ("FW2_password", "FW2_manager", Location.on_service("T2_manager")),
    ("S1_web_password", "S1_web", Location.on_service("T2_manager")),
    ("S2_web_password", "S2_web", Location.on_service("S1_web")),
)

_ATTACK_DEVICES = frozenset({"T1", "D1"})

BUILTIN_KEY_POLICIES = (
    AclRule("FW1", _ATTACK_DEVICES, "T2_manager"),
    AclRule("FW2", _ATTACK_DEVICES, "S1_web"),
    AclRule("FW2", _ATTACK_DEVICES, "S2_web"),
)

BUILTIN_BASELINE_RULES = (
    AclRule("FW1", _ATTACK_DEVICES, "FW1_manager"),
    AclRule("FW2", frozenset({"T2"}), "FW2_manager"),
)


def _builtin_decoys(n: int) -> list[Service]:
    # alternate between the two servers; every route there crosses FW2
    return [
        Service(f"decoy_{k:02d}", host, f"{host}_E0", None, True)
        for k, host in enumerate(("S1", "S2") * ((n + 1) // 2), start=1)
    ][:n]


def builtin_scenario(preadded_key_policies: int = 0, seed: int | None = 0) -> CyberScenario:
    """The five-space experiment environment with ``preadded_key_policies``
    of the three key firewall policies merged into the baseline ACLs.

    Which policies get pre-added is a uniform random subset drawn with ``seed``.
    """
    if not 0 <= preadded_key_policies <= 3:
        raise ValueError(f"preadded_key_policies must be in 0..3, got {preadded_key_policies}")
    spaces = [Space("outer")] + [Space(f"P{k}", "outer") for k in range(1, 5)]
    devices = [Device(d, sp, ports, kind) for d, sp, kind, ports in _BUILTIN_DEVICES]
    ports = [Port(p, d.id) for d in devices for p in d.ports]
    links = [Link(a, b) for a, b in _BUILTIN_LINKS]
    services = [Service(v, d, p, pw) for v, d, p, pw in SERVICE_TABLE]
    creds = [Credential(c, u, loc) for c, u, loc in _BUILTIN_CREDENTIALS]

    partial = CyberScenario(
        spaces=tuple(spaces),
        devices=tuple(devices),
        ports=tuple(ports),
        links=tuple(links),
        services=tuple(services),
        credentials=tuple(creds),
        acl_rules=(),
        addable_rules=BUILTIN_KEY_POLICIES,
        key_policies=BUILTIN_KEY_POLICIES,
        info_items=(InfoItem("SECRET", "S2_web"),),
        attacker=AttackerSpec("outer", frozenset(), _ATTACK_DEVICES),
        state_dim=BUILTIN_STATE_DIM,
    )
    # each extra service adds a connected and a dominated flag
    spare = BUILTIN_STATE_DIM - minimal_state_size(partial)
    services += _builtin_decoys(spare // 2)

    chosen = sorted(random.Random(seed).sample(range(3), preadded_key_policies))
    baseline = BUILTIN_BASELINE_RULES + tuple(BUILTIN_KEY_POLICIES[i] for i in chosen)

    scenario = CyberScenario(
        spaces=partial.spaces,
        devices=partial.devices,
        ports=partial.ports,
        links=partial.links,
        services=tuple(services),
        credentials=partial.credentials,
        acl_rules=baseline,
        addable_rules=BUILTIN_KEY_POLICIES,
        key_policies=BUILTIN_KEY_POLICIES,
        info_items=partial.info_items,
        attacker=partial.attacker,
        state_dim=BUILTIN_STATE_DIM,
    )
    assert not validate(scenario), validate(scenario)
    return scenario


def scenario_with_rules(s: CyberScenario, preadded: Iterable[int]) -> CyberScenario:
    """Copy of ``s`` with the given addable rules merged into the baseline."""
    extra = tuple(s.addable_rules[i] for i in sorted(set(preadded)) if s.addable_rules[i] not in s.acl_rules)
    return CyberScenario(**{**_fields(s), "acl_rules": s.acl_rules + extra})


def _fields(s: CyberScenario) -> dict[str, Any]:
    return {name: getattr(s, name) for name in TOP_LEVEL_KEYS}
