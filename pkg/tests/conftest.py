from __future__ import annotations

import numpy as np
import pytest

from teamsim.core import Participant
from teamsim.population import synth_population

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_participant(
    pid: str = "p1",
    gender: str = "Female",
    race: str = "White",
    hispanic: bool = False,
    international: bool = False,
    age: int = 25,
    skills: tuple[int, ...] = (3, 3, 3, 3, 3, 3),
) -> Participant:
    return Participant(
        id=pid,
        gender=gender,
        race=race,
        hispanic=hispanic,
        international=international,
        age=age,
        skills=skills,
    )


@pytest.fixture
def participant_factory():
    return make_participant


@pytest.fixture
def mixed_population():
    """32 participants drawn from the default demographic mix."""
    return synth_population(32, rng=np.random.default_rng(2024))


@pytest.fixture
def small_population():
    """8 participants, enough for exactly two teams."""
    return synth_population(8, rng=np.random.default_rng(77))


def clone_population(n: int) -> list[Participant]:
    return [
        make_participant(pid=f"c{i:03d}", gender="Female", race="Asian", age=30, skills=(2,) * 6)
        for i in range(n)
    ]


@pytest.fixture
def clones():
    return clone_population
