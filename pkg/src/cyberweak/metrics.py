"""Configuration weakness: the mean shortest attack path over attackers."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Literal, Sequence

from .agent import AgentConfig, train_agent
from .oracle import DEFAULT_MAX_STATES, shortest_attack_path
from .scenario import AttackerSpec, CyberScenario, preadded_count

FAILURE_LENGTH = 10000
DEFAULT_ATTACKERS = 60

Source = Literal["oracle", "rl"]


class EmptyRecords(ValueError):
    pass


@dataclass(frozen=True)
class AttackRecord:
    attacker_id: int
    source: Source
    length: int
    succeeded: bool

    def __post_init__(self) -> None:
        if self.source not in ("oracle", "rl"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.length < 1:
            raise ValueError("length must be at least 1")
        if not self.succeeded and self.length != FAILURE_LENGTH:
            raise ValueError(f"failed attacks carry length {FAILURE_LENGTH}")

    @classmethod
    def failure(cls, attacker_id: int, source: Source) -> "AttackRecord":
        return cls(attacker_id, source, FAILURE_LENGTH, False)


@dataclass(frozen=True)
class WeaknessReport:
    preadded_policies: int
    n: int
    records: tuple[AttackRecord, ...]
    sec_value: float

    def to_document(self) -> dict:
        return {
            "preadded_policies": self.preadded_policies,
            "n": self.n,
            "sec": self.sec_value,
            "records": [
                {"attacker_id": r.attacker_id, "source": r.source, "length": r.length, "succeeded": r.succeeded}
                for r in self.records
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["preadded_policies", "attacker_id", "source", "length", "succeeded"])
        for r in self.records:
            w.writerow([self.preadded_policies, r.attacker_id, r.source, r.length, str(r.succeeded).lower()])
        source = self.records[0].source if self.records else ""
        w.writerow([self.preadded_policies, "sec", source, f"{self.sec_value:g}", ""])
        return buf.getvalue()


def sec_metric(records: Sequence[AttackRecord]) -> float:
    """Mean attack path length; failed attackers count as the cap length."""
    if not records:
        raise EmptyRecords("sec is undefined without attack records")
    return sum(r.length for r in records) / len(records)


def evaluate_configuration(
    scenario: CyberScenario,
    n: int = DEFAULT_ATTACKERS,
    mode: Source = "oracle",
    config: AgentConfig | None = None,
    seed: int = 0,
    attackers: Sequence[AttackerSpec] | None = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> WeaknessReport:
    """Score a configuration with ``n`` attackers.

    Attacker ``i`` uses ``attackers[i % len(attackers)]`` (the scenario's own
    attacker by default). Oracle mode solves each distinct attacker once. RL
    mode trains one agent per attacker with seed ``seed + i`` and keeps the
    best successful episode length.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if mode not in ("oracle", "rl"):
        raise ValueError(f"unknown mode {mode!r}")
    specs = list(attackers) if attackers else [scenario.attacker]
    config = config or AgentConfig()
    solved: dict[int, AttackRecord] = {}
    records = []
    for i in range(n):
        k = i % len(specs)
        variant = scenario if specs[k] == scenario.attacker else replace(scenario, attacker=specs[k])
        if mode == "oracle":
            if k not in solved:
                path = shortest_attack_path(variant, max_states)
                solved[k] = (AttackRecord.failure(i, "oracle") if path is None
                             else AttackRecord(i, "oracle", path.length, True))
            rec = replace(solved[k], attacker_id=i)
        else:
            best = train_agent(variant, config, seed + i).stats.best_length
            rec = AttackRecord.failure(i, "rl") if best is None else AttackRecord(i, "rl", best, True)
        records.append(rec)
    return WeaknessReport(preadded_count(scenario), n, tuple(records), sec_metric(records))
