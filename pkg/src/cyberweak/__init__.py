"""Multi-domain cyberspace attack modelling and configuration weakness scoring.

Modules:

- ``scenario``: the cyberspace model, JSON I/O and the built-in environment
- ``env``: the attacker MDP (actions, feasibility, rewards, state encoding)
- ``oracle``: exact shortest attack paths by breadth-first search
- ``nn``: numpy actor and critic networks with manual gradients
- ``agent``: the DDPG attacker with masked action selection
- ``metrics``: the weakness score over attackers
- ``cli``: command-line harness
"""

__version__ = "0.1.0"

from .scenario import CyberScenario, builtin_scenario, load_scenario, load_scenario_file, validate
from .env import apply_action, canonical_actions, encode_state, feasible_actions, reset
from .oracle import AttackPath, shortest_attack_path
from .agent import AgentConfig, desk_config, train_agent
from .metrics import AttackRecord, WeaknessReport, evaluate_configuration, sec_metric

__all__ = [
    "AgentConfig",
    "AttackPath",
    "AttackRecord",
    "CyberScenario",
    "WeaknessReport",
    "apply_action",
    "builtin_scenario",
    "canonical_actions",
    "desk_config",
    "encode_state",
    "evaluate_configuration",
    "feasible_actions",
    "load_scenario",
    "load_scenario_file",
    "reset",
    "sec_metric",
    "shortest_attack_path",
    "train_agent",
    "validate",
]
