from __future__ import annotations

import pytest

from fairdiffusion.graph import ActionProfile, build_effective_graph
from fairdiffusion.instances import fixture_network


@pytest.fixture(scope="session")
def fixture_net():
    return fixture_network()


@pytest.fixture(scope="session")
def fixture_profile(fixture_net):
    return ActionProfile.truthful(fixture_net)


@pytest.fixture(scope="session")
def fixture_graph(fixture_net, fixture_profile):
    return build_effective_graph(fixture_net, fixture_profile)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} {detail}".rstrip())
        print(ACCEPTANCE_LINES[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
