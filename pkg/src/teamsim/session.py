"""Run one experimental session under any of the four conditions.

random and algorithmic_diverse assign a partition directly; the agency
conditions (self_assembled, fairness_aware) run invitation rounds over
the assembly state machine with synthetic agents and finish with the
deadline fill. Standardization moments for the agents' choice model are
estimated from a pilot batch of recommendations before the live rounds.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .agents import (
    AgentPolicy,
    ChoiceModelParams,
    Exposure,
    StandardizationMoments,
    agent_step,
    gen_query,
)
from .core import (
    DEFAULT_SCHEMA,
    TEAM_SIZE,
    AttributeSchema,
    DiversityProfile,
    Participant,
    Partition,
    population_lookup,
    team_diversity_profile,
)
from .optimizer import GaConfig, ga_partition, random_partition
from .protocol import AssemblyState, Event
from .recommender import rank_candidates

CONDITIONS = ("random", "algorithmic_diverse", "self_assembled", "fairness_aware")
AGENCY_MODES = {"self_assembled": "fit_only", "fairness_aware": "fairness"}

PILOT_EXPOSURES = 500


@dataclass
class SessionResult:
    condition: str
    session_index: int
    population: list[Participant]
    partition: Partition
    profiles: list[DiversityProfile]
    events: list[Event] = field(default_factory=list)
    moments: StandardizationMoments | None = None
    exposures: list[Exposure] = field(default_factory=list)
    duration_s: float = 0.0

    def team_profiles(self) -> list[tuple[tuple[str, ...], DiversityProfile]]:
        return [
            (team.sorted_ids(), profile)
            for team, profile in zip(self.partition.teams, self.profiles)
        ]


def pilot_moments(
    population: Sequence[Participant],
    policy: AgentPolicy,
    mode: str,
    rng: np.random.Generator,
    *,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    target: int = PILOT_EXPOSURES,
    page_size: int = 10,
) -> StandardizationMoments:
    """Estimate rank/diversity moments from a pre-session recommendation batch.

    Queries are sampled as the live agents would issue them, ranked against
    the all-singleton pool, and the first-page (rank, diversity) pairs are
    pooled until the target count is reached. Constant columns fall back to
    sd 1 so a degenerate population still standardizes (to all-zero scores).
    """
    lookup = population_lookup(population)
    ids = [p.id for p in population]
    ranks: list[float] = []
    divs: list[float] = []
    while len(ranks) < target:
        searcher = ids[int(rng.integers(len(ids)))]
        query = gen_query(searcher, policy, rng)
        recs = rank_candidates(
            query,
            [i for i in ids if i != searcher],
            lookup=lookup,
            mode=mode,
            schema=schema,
            page=1,
            page_size=page_size,
        )
        for rec in recs:
            ranks.append(float(rec.rank))
            divs.append(rec.diversity_score)
    rank_arr = np.asarray(ranks)
    div_arr = np.asarray(divs)
    rank_sd = float(rank_arr.std())
    div_sd = float(div_arr.std())
    return StandardizationMoments(
        rank_mean=float(rank_arr.mean()),
        rank_sd=rank_sd if rank_sd > 0 else 1.0,
        diversity_mean=float(div_arr.mean()),
        diversity_sd=div_sd if div_sd > 0 else 1.0,
    )


def run_assembly(
    population: Sequence[Participant],
    mode: str,
    rng: np.random.Generator,
    *,
    policy: AgentPolicy,
    params: ChoiceModelParams,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    rounds: int = 10,
    team_size: int = TEAM_SIZE,
    page_size: int = 10,
) -> tuple[AssemblyState, Partition, StandardizationMoments, list[Exposure]]:
    """Agent-driven assembly: pilot moments, seeded-order rounds, finalize."""
    lookup = population_lookup(population)
    ids = [p.id for p in population]
    moments = pilot_moments(
        population, policy, mode, rng, schema=schema, page_size=page_size
    )
    sigma = math.sqrt(params.random_intercept_variance)
    u_by_agent = {pid: float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0 for pid in ids}
    state = AssemblyState(ids)
    exposures: list[Exposure] = []
    for _ in range(rounds):
        state.advance_round()
        order = [ids[i] for i in rng.permutation(len(ids))]
        for agent_id in order:
            exposures.extend(
                agent_step(
                    agent_id,
                    state,
                    lookup=lookup,
                    policy=policy,
                    params=params,
                    moments=moments,
                    mode=mode,
                    u=u_by_agent[agent_id],
                    rng=rng,
                    schema=schema,
                    page_size=page_size,
                    team_size=team_size,
                )
            )
    state.advance_round()
    partition = state.finalize(rng, team_size=team_size)
    return state, partition, moments, exposures


def run_session(
    condition: str,
    population: Sequence[Participant],
    *,
    rng: np.random.Generator,
    session_index: int = 0,
    ga: GaConfig | None = None,
    policy: AgentPolicy | None = None,
    params: ChoiceModelParams | None = None,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    rounds: int = 10,
    team_size: int = TEAM_SIZE,
    page_size: int = 10,
) -> SessionResult:
    """Produce a partition plus per-team diversity profiles for one condition."""
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if len(population) < 2 * team_size:
        raise ValueError(f"population must have at least {2 * team_size} participants")
    lookup = population_lookup(population)
    started = time.perf_counter()
    events: list[Event] = []
    moments = None
    exposures: list[Exposure] = []

    if condition == "random":
        partition = random_partition(population, team_size, rng=rng)
    elif condition == "algorithmic_diverse":
        ga_config = ga if ga is not None else GaConfig()
        seed = int(rng.integers(2**63 - 1))
        _, partition = ga_partition(
            population,
            dataclasses.replace(ga_config, rng_seed=seed),
            schema=schema,
            team_size=team_size,
        )
    else:
        state, partition, moments, exposures = run_assembly(
            population,
            AGENCY_MODES[condition],
            rng,
            policy=policy if policy is not None else AgentPolicy(),
            params=params if params is not None else ChoiceModelParams(),
            schema=schema,
            rounds=rounds,
            team_size=team_size,
            page_size=page_size,
        )
        events = state.event_log

    partition.validate(lookup)
    profiles = [team_diversity_profile(team, lookup, schema) for team in partition.teams]
    return SessionResult(
        condition=condition,
        session_index=session_index,
        population=list(population),
        partition=partition,
        profiles=profiles,
        events=events,
        moments=moments,
        exposures=exposures,
        duration_s=time.perf_counter() - started,
    )
