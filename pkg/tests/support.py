from cyberweak.env import action

# Shortest attack path lengths on the built-in network, by number of pre-added
# key policies (one pre-added policy depends on which one was drawn).
L0, L2, L3 = 20, 15, 11
L1_BY_POLICY = {0: 16, 1: 19, 2: 19}
N0_STATES = 625
N3_STATES = 5860


def staged_attack(s):
    """The hand-written staged attack on the closed built-in network."""
    steps = [
        ("Move", "P2"), ("Harvest", "FW1_password"), ("Move", "P1"), ("UseDevice", "T1"),
        ("Connect", "FW1_manager", "T1"), ("Dominate", "FW1_manager"), ("AddAcl", 0),
        ("Connect", "T2_manager", "T1"), ("Dominate", "T2_manager"),
        ("Harvest", "FW2_password"), ("Harvest", "S1_web_password"),
        ("Connect", "FW2_manager", "T2"), ("Dominate", "FW2_manager"),
        ("AddAcl", 1), ("AddAcl", 2),
        ("Connect", "S1_web", "T1"), ("Dominate", "S1_web"), ("Harvest", "S2_web_password"),
        ("Connect", "S2_web", "T1"), ("Dominate", "S2_web"), ("ReadInfo", "SECRET"),
    ]
    return [action(s, *step) for step in steps]


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
