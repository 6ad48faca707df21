import random
from dataclasses import dataclass

import pytest

from dske import Client, Hub, ReceiverPolicy
from dske.psk import provision_pair


@dataclass
class Deployment:
    alice: Client
    bob: Client
    hubs: dict

    def hub_list(self, n):
        return [f"P{i}" for i in range(1, n + 1)]

    def relay(self, requests):
        """Hand each request to its hub and the instruction to B; returns the instructions."""
        return [self.hubs[name].handle_key_request(req) for req, name in zip(requests, self.hub_list(len(requests)))]


def make_deployment(hubs=3, size=4096, seed=0, kb=1, scheme="shamir"):
    rng = random.Random(seed)
    alice = Client("A", scheme=scheme, randbytes=rng.randbytes)
    bob = Client("B", scheme=scheme, policy=ReceiverPolicy(k_min=kb), randbytes=rng.randbytes)
    table = {}
    for i in range(1, hubs + 1):
        name = f"P{i}"
        hub = Hub(name)
        for client in (alice, bob):
            hub_copy, client_copy = provision_pair(name, client.client_id, size, seed=seed)
            hub.register(client.client_id, hub_copy, record=b"id:" + client.client_id.rstrip(b"\0"))
            client.add_table(client_copy)
        table[name] = hub
    return Deployment(alice, bob, table)


@pytest.fixture
def deployment():
    return make_deployment()


ACCEPTANCE: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        ACCEPTANCE.append(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
