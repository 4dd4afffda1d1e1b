"""Synthetic participants driven by a logistic invitation-choice model.

Each agent issues weighted teammate searches, walks the first page of
recommendations in rank order, and invites the first candidate whose
Bernoulli draw under the choice model succeeds. The model's default
coefficients make low ranks, same-gender candidates, and (under the
fairness treatment) diverse candidates more likely to be chosen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import DEFAULT_SCHEMA, NUM_SKILLS, TEAM_SIZE, AttributeSchema, Participant
from .protocol import AssemblyState
from .recommender import DEMOGRAPHIC_KINDS, Criterion, Query, rank_candidates


@dataclass(frozen=True)
class ChoiceModelParams:
    """Logistic coefficients governing invitation decisions."""

    intercept: float = -3.17
    rank: float = -1.20
    same_gender: float = 0.26
    diversity: float = -0.11
    treatment: float = -0.33
    interaction: float = 0.95
    random_intercept_variance: float = 0.42

    def __post_init__(self) -> None:
        if self.random_intercept_variance < 0:
            raise ValueError("random_intercept_variance must be >= 0")

    def named_fixed_effects(self) -> dict[str, float]:
        return {
            "intercept": self.intercept,
            "rank": self.rank,
            "same_gender": self.same_gender,
            "diversity": self.diversity,
            "treatment": self.treatment,
            "interaction": self.interaction,
        }


@dataclass(frozen=True)
class AgentPolicy:
    """Query-generation and response behavior of one synthetic agent.

    A query draws its criterion count uniformly from criteria_counts;
    each criterion is a skill with probability skill_criterion_prob,
    otherwise a demographic-similarity criterion chosen uniformly.
    Importances are sampled uniformly from importance_choices. Incoming
    invitations are accepted per-member with accept_probability.
    """

    criteria_counts: tuple[int, ...] = (2, 3)
    skill_criterion_prob: float = 0.49
    importance_choices: tuple[int, ...] = (1, 2, 3)
    accept_probability: float = 0.8

    def __post_init__(self) -> None:
        if not self.criteria_counts or any(c < 2 for c in self.criteria_counts):
            raise ValueError("criteria_counts must contain values >= 2")
        if not 0.0 <= self.skill_criterion_prob <= 1.0:
            raise ValueError("skill_criterion_prob must be in [0, 1]")
        if not 0.0 <= self.accept_probability <= 1.0:
            raise ValueError("accept_probability must be in [0, 1]")
        if any(i == 0 or not -3 <= i <= 3 for i in self.importance_choices):
            raise ValueError("importance_choices must be nonzero values in [-3, 3]")


@dataclass(frozen=True)
class StandardizationMoments:
    """Session-level mean/sd used to z-score rank and diversity inputs."""

    rank_mean: float
    rank_sd: float
    diversity_mean: float
    diversity_sd: float

    def __post_init__(self) -> None:
        if self.rank_sd <= 0 or self.diversity_sd <= 0:
            raise ValueError("standardization sd must be > 0")

    def to_dict(self) -> dict:
        return {
            "rank_mean": self.rank_mean,
            "rank_sd": self.rank_sd,
            "diversity_mean": self.diversity_mean,
            "diversity_sd": self.diversity_sd,
        }


@dataclass(frozen=True)
class Exposure:
    """One displayed recommendation and whether the searcher picked it."""

    searcher_id: str
    candidate_id: str
    round: int
    rank: int
    rank_z: float
    same_gender: int
    diversity: float
    diversity_z: float
    treatment: int
    selected: int

    def to_row(self) -> dict:
        return {
            "searcher": self.searcher_id,
            "candidate": self.candidate_id,
            "round": self.round,
            "rank": self.rank,
            "rank_z": self.rank_z,
            "same_gender": self.same_gender,
            "diversity": self.diversity,
            "diversity_z": self.diversity_z,
            "treatment": self.treatment,
            "selected": self.selected,
        }


def standardize(
    moments: StandardizationMoments, raw_rank: float, raw_diversity: float
) -> tuple[float, float]:
    """(rank_z, diversity_z) using the session's pilot moments."""
    return (
        (raw_rank - moments.rank_mean) / moments.rank_sd,
        (raw_diversity - moments.diversity_mean) / moments.diversity_sd,
    )


def choice_probability(
    params: ChoiceModelParams,
    rank_z: float,
    same_gender: int,
    diversity_z: float,
    treatment: int,
    u: float = 0.0,
) -> float:
    """Invitation probability for one standardized recommendation."""
    eta = (
        params.intercept
        + params.rank * rank_z
        + params.same_gender * same_gender
        + params.diversity * diversity_z
        + params.treatment * treatment
        + params.interaction * diversity_z * treatment
        + u
    )
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def gen_query(searcher_id: str, policy: AgentPolicy, rng: np.random.Generator) -> Query:
    """Sample one valid search query; duplicate criteria are redrawn."""
    count = int(policy.criteria_counts[rng.integers(len(policy.criteria_counts))])
    criteria: list[Criterion] = []
    keys: set[tuple] = set()
    while len(criteria) < count:
        importance = int(policy.importance_choices[rng.integers(len(policy.importance_choices))])
        if rng.random() < policy.skill_criterion_prob:
            c = Criterion(kind="skill", importance=importance, skill=int(rng.integers(NUM_SKILLS)))
        else:
            kind = DEMOGRAPHIC_KINDS[rng.integers(len(DEMOGRAPHIC_KINDS))]
            c = Criterion(kind=kind, importance=importance)
        if c.key in keys:
            continue
        keys.add(c.key)
        criteria.append(c)
    return Query(searcher_id=searcher_id, criteria=tuple(criteria))


def query_payload(query: Query) -> dict:
    return {
        "searcher_id": query.searcher_id,
        "criteria": [
            {"kind": c.kind, "skill": c.skill, "importance": c.importance}
            for c in query.criteria
        ],
    }


def agent_step(
    agent_id: str,
    state: AssemblyState,
    *,
    lookup: Mapping[str, Participant],
    policy: AgentPolicy,
    params: ChoiceModelParams,
    moments: StandardizationMoments,
    mode: str,
    u: float,
    rng: np.random.Generator,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    page_size: int = 10,
    team_size: int = TEAM_SIZE,
) -> list[Exposure]:
    """One search-and-invite turn for an agent.

    Walks the first recommendation page in rank order and invites the
    first candidate whose choice-model draw succeeds; recipients then
    answer immediately with per-member acceptance draws. Agents whose
    group is already full do nothing. Returns the walked exposures.
    """
    group = state.group_of(agent_id)
    if len(group) >= team_size:
        return []
    query = gen_query(agent_id, policy, rng)
    state.record_query(agent_id, query_payload(query))
    pool = [m for m in state.members if m not in group]
    recs = rank_candidates(
        query,
        pool,
        lookup=lookup,
        mode=mode,
        searcher_team=group,
        team_of=state.group_of,
        schema=schema,
        team_size=team_size,
        page=1,
        page_size=page_size,
    )
    state.record_recommendations(
        agent_id,
        [
            {
                "candidate_id": r.candidate_id,
                "rank": r.rank,
                "fit": r.fit_score,
                "diversity": r.diversity_score,
                "combined": r.combined_score,
                "match_percent": r.match_percent,
            }
            for r in recs
        ],
    )
    treatment = 1 if mode == "fairness" else 0
    searcher = lookup[agent_id]
    exposures: list[Exposure] = []
    for rec in recs:
        rank_z, div_z = standardize(moments, rec.rank, rec.diversity_score)
        same_gender = int(lookup[rec.candidate_id].gender == searcher.gender)
        p = choice_probability(params, rank_z, same_gender, div_z, treatment, u)
        selected = int(rng.random() < p)
        exposures.append(
            Exposure(
                searcher_id=agent_id,
                candidate_id=rec.candidate_id,
                round=state.round,
                rank=rec.rank,
                rank_z=rank_z,
                same_gender=same_gender,
                diversity=rec.diversity_score,
                diversity_z=div_z,
                treatment=treatment,
                selected=selected,
            )
        )
        if not selected:
            continue
        inv_id = state.send_invitation(agent_id, rec.candidate_id)
        inv = state.invitations[inv_id]
        for member in inv.recipient_group:
            if state.invitations[inv_id].status != "open":
                break
            if inv.responses.get(member) != "pending":
                continue
            response = "accepted" if rng.random() < policy.accept_probability else "declined"
            state.respond(inv_id, member, response)
        break
    return exposures


@dataclass
class ExposureBatch:
    """Synthetic standardized exposures plus outcomes, for model recovery."""

    rank_z: np.ndarray
    same_gender: np.ndarray
    diversity_z: np.ndarray
    treatment: np.ndarray
    selected: np.ndarray

    def design_matrix(self) -> np.ndarray:
        return np.column_stack(
            [
                np.ones(len(self.selected)),
                self.rank_z,
                self.same_gender,
                self.diversity_z,
                self.treatment,
                self.diversity_z * self.treatment,
            ]
        )

    @property
    def column_names(self) -> tuple[str, ...]:
        return ("intercept", "rank", "same_gender", "diversity", "treatment", "interaction")


def simulate_exposures(
    params: ChoiceModelParams,
    n: int,
    rng: np.random.Generator,
    *,
    page_size: int = 10,
    random_intercepts: bool = False,
    n_searchers: int = 200,
    treatment_share: float = 0.5,
) -> ExposureBatch:
    """Draw n independent recommendation exposures straight from the model.

    Raw ranks are uniform over the page, raw diversity uniform on (0, 1);
    both are standardized against the batch's own moments before entering
    the linear predictor, mirroring the live pipeline.
    """
    searcher = rng.integers(n_searchers, size=n)
    u_by_searcher = (
        rng.normal(0.0, math.sqrt(params.random_intercept_variance), size=n_searchers)
        if random_intercepts
        else np.zeros(n_searchers)
    )
    treat_by_searcher = (rng.random(n_searchers) < treatment_share).astype(int)
    raw_rank = rng.integers(1, page_size + 1, size=n).astype(float)
    raw_div = rng.random(n)
    same_gender = rng.integers(0, 2, size=n)
    rank_z = (raw_rank - raw_rank.mean()) / raw_rank.std()
    div_z = (raw_div - raw_div.mean()) / raw_div.std()
    treatment = treat_by_searcher[searcher]
    u = u_by_searcher[searcher]
    eta = (
        params.intercept
        + params.rank * rank_z
        + params.same_gender * same_gender
        + params.diversity * div_z
        + params.treatment * treatment
        + params.interaction * div_z * treatment
        + u
    )
    p = 1.0 / (1.0 + np.exp(-eta))
    selected = (rng.random(n) < p).astype(int)
    return ExposureBatch(
        rank_z=rank_z,
        same_gender=same_gender.astype(float),
        diversity_z=div_z,
        treatment=treatment.astype(float),
        selected=selected,
    )
