"""Domain types and team diversity metrics.

Categorical heterogeneity is measured with the Blau index (1 - sum of
squared category shares) and numeric spread with the coefficient of
variation (population standard deviation over mean). Per-attribute scores
are normalized to [0, 1] and aggregated into surface-level (demographics)
and deep-level (skills) scores.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

GENDERS = ("Male", "Female", "NonBinary")
RACES = ("White", "Asian", "AfricanAmerican", "AmericanIndian", "MultipleRaces", "Other")
SKILL_NAMES = (
    "managing_campaigns",
    "coordinating_people",
    "visual_design",
    "recruiting_volunteers",
    "writing",
    "presenting",
)
NUM_SKILLS = len(SKILL_NAMES)
TEAM_SIZE = 4

_GENDER_INDEX = {g: i for i, g in enumerate(GENDERS)}
_RACE_INDEX = {r: i for i, r in enumerate(RACES)}


@dataclass(frozen=True)
class Participant:
    """One person: categorical demographics, age, and six skill levels (1-5)."""

    id: str
    gender: str
    race: str
    hispanic: bool
    international: bool
    age: int
    skills: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("participant id must be non-empty")
        if self.gender not in _GENDER_INDEX:
            raise ValueError(f"unknown gender {self.gender!r}")
        if self.race not in _RACE_INDEX:
            raise ValueError(f"unknown race {self.race!r}")
        if self.age < 18:
            raise ValueError(f"age must be >= 18, got {self.age}")
        if len(self.skills) != NUM_SKILLS:
            raise ValueError(f"expected {NUM_SKILLS} skills, got {len(self.skills)}")
        if any(not 1 <= s <= 5 for s in self.skills):
            raise ValueError(f"skill levels must be in 1..5, got {self.skills}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "gender": self.gender,
            "race": self.race,
            "hispanic": self.hispanic,
            "international": self.international,
            "age": self.age,
            "skills": list(self.skills),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Participant":
        return cls(
            id=str(d["id"]),
            gender=d["gender"],
            race=d["race"],
            hispanic=bool(d["hispanic"]),
            international=bool(d["international"]),
            age=int(d["age"]),
            skills=tuple(int(s) for s in d["skills"]),
        )


@dataclass(frozen=True)
class Team:
    """A group of 1..4 participant ids."""

    member_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not 1 <= len(self.member_ids) <= TEAM_SIZE:
            raise ValueError(f"team size must be 1..{TEAM_SIZE}, got {len(self.member_ids)}")

    @classmethod
    def of(cls, ids: Iterable[str]) -> "Team":
        ids = list(ids)
        fs = frozenset(ids)
        if len(fs) != len(ids):
            raise ValueError("duplicate member ids in team")
        return cls(fs)

    def sorted_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.member_ids))

    def __len__(self) -> int:
        return len(self.member_ids)


@dataclass(frozen=True)
class Partition:
    """Disjoint split of a population into teams plus solo participants."""

    teams: tuple[Team, ...]
    solos: tuple[str, ...]

    @classmethod
    def build(cls, teams: Iterable[Iterable[str]], solos: Iterable[str] = ()) -> "Partition":
        built = tuple(sorted((Team.of(t) for t in teams), key=Team.sorted_ids))
        return cls(teams=built, solos=tuple(sorted(solos)))

    def all_ids(self) -> set[str]:
        ids: set[str] = set(self.solos)
        for t in self.teams:
            ids |= t.member_ids
        return ids

    def validate(self, population_ids: Iterable[str]) -> None:
        """Check disjointness and exact cover of the population."""
        seen: set[str] = set()
        total = 0
        for t in self.teams:
            seen |= t.member_ids
            total += len(t)
        seen.update(self.solos)
        total += len(self.solos)
        if total != len(seen):
            raise ValueError("partition contains duplicate members")
        expected = set(population_ids)
        if seen != expected:
            missing = expected - seen
            extra = seen - expected
            raise ValueError(f"partition does not cover population (missing={sorted(missing)}, extra={sorted(extra)})")

    def canonical(self) -> tuple:
        return (tuple(t.sorted_ids() for t in self.teams), self.solos)

    def content_hash(self) -> str:
        """Stable hash of the partition content (independent of process hash seed)."""
        return hashlib.sha1(repr(self.canonical()).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AttributeSchema:
    """Category counts and numeric ranges used to normalize diversity metrics.

    Blau scores are divided by their theoretical maximum 1 - 1/k with k taken
    from the schema (not the observed team), so normalization is
    population-independent. CV scores are mapped through cv / (cv + 1).
    """

    gender_k: int = len(GENDERS)
    race_k: int = len(RACES)
    ethnicity_k: int = 2
    international_k: int = 2
    age_min: int = 18
    age_max: int = 80

    def __post_init__(self) -> None:
        for name in ("gender_k", "race_k", "ethnicity_k", "international_k"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if self.age_max <= self.age_min:
            raise ValueError("age_max must exceed age_min")

    @property
    def age_range(self) -> int:
        return self.age_max - self.age_min


DEFAULT_SCHEMA = AttributeSchema()

# Count of normalized metric components in a profile: 4 categorical Blau
# scores + 1 age CV + 6 skill CVs.
METRIC_COUNT = 11


@dataclass(frozen=True)
class DiversityProfile:
    """Per-attribute diversity of one team plus surface/deep/total aggregates.

    Blau fields are already normalized to [0, 1]; age_cv and skill_cvs are
    raw coefficients of variation. surface_score sums the five normalized
    surface components, deep_score averages the six normalized skill
    components, total_score is their sum.
    """

    gender_blau: float
    race_blau: float
    ethnicity_blau: float
    international_blau: float
    age_cv: float
    skill_cvs: tuple[float, ...]
    surface_score: float
    deep_score: float
    total_score: float

    @property
    def component_mean(self) -> float:
        """Mean of all normalized components (the recommender's diversity level)."""
        return (self.surface_score + NUM_SKILLS * self.deep_score) / METRIC_COUNT


def blau(categories: Sequence) -> float:
    """Blau index 1 - sum(p_i^2); 0 iff every member shares one category."""
    n = len(categories)
    if n == 0:
        raise ValueError("empty group")
    counts: dict = {}
    for c in categories:
        counts[c] = counts.get(c, 0) + 1
    return 1.0 - sum((c / n) ** 2 for c in counts.values())


def normalized_blau(categories: Sequence, k: int) -> float:
    """Blau index divided by its theoretical maximum 1 - 1/k."""
    if k < 2:
        raise ValueError(f"category count k must be >= 2, got {k}")
    return blau(categories) / (1.0 - 1.0 / k)


def coefficient_of_variation(values: Sequence[float]) -> float:
    """Population standard deviation (divisor n) over the mean."""
    n = len(values)
    if n == 0:
        raise ValueError("empty group")
    mean = sum(values) / n
    if mean == 0:
        raise ValueError("undefined CV: mean is zero")
    var = sum((x - mean) ** 2 for x in values) / n
    return math.sqrt(var) / mean


def normalize_cv(cv: float) -> float:
    """Map a CV in [0, inf) into [0, 1) via cv / (cv + 1)."""
    return cv / (cv + 1.0)


def attribute_row(p: Participant) -> tuple:
    """Integer-coded attribute tuple for fast repeated team scoring."""
    return (
        _GENDER_INDEX[p.gender],
        _RACE_INDEX[p.race],
        int(p.hispanic),
        int(p.international),
        p.age,
    ) + p.skills


def attribute_rows(participants: Sequence[Participant]) -> list[tuple]:
    return [attribute_row(p) for p in participants]


def _blau_from_codes(codes: Sequence[int], n: int) -> float:
    counts: dict = {}
    for c in codes:
        counts[c] = counts.get(c, 0) + 1
    return 1.0 - sum((c / n) ** 2 for c in counts.values())


def _cv_from_values(values: Sequence[float], n: int) -> float:
    mean = sum(values) / n
    var = sum((x - mean) ** 2 for x in values) / n
    return math.sqrt(var) / mean


def _row_components(rows: Sequence[tuple], schema: AttributeSchema) -> tuple:
    """(gender_b, race_b, eth_b, intl_b, age_cv, skill_cvs) for coded rows."""
    n = len(rows)
    gender_b = _blau_from_codes([r[0] for r in rows], n) / (1.0 - 1.0 / schema.gender_k)
    race_b = _blau_from_codes([r[1] for r in rows], n) / (1.0 - 1.0 / schema.race_k)
    eth_b = _blau_from_codes([r[2] for r in rows], n) / (1.0 - 1.0 / schema.ethnicity_k)
    intl_b = _blau_from_codes([r[3] for r in rows], n) / (1.0 - 1.0 / schema.international_k)
    age_cv = _cv_from_values([r[4] for r in rows], n)
    skill_cvs = tuple(_cv_from_values([r[5 + k] for r in rows], n) for k in range(NUM_SKILLS))
    return gender_b, race_b, eth_b, intl_b, age_cv, skill_cvs


def profile_for_rows(rows: Sequence[tuple], schema: AttributeSchema = DEFAULT_SCHEMA) -> DiversityProfile:
    if not rows:
        raise ValueError("empty group")
    gender_b, race_b, eth_b, intl_b, age_cv, skill_cvs = _row_components(rows, schema)
    surface = gender_b + race_b + eth_b + intl_b + normalize_cv(age_cv)
    deep = sum(normalize_cv(cv) for cv in skill_cvs) / NUM_SKILLS
    return DiversityProfile(
        gender_blau=gender_b,
        race_blau=race_b,
        ethnicity_blau=eth_b,
        international_blau=intl_b,
        age_cv=age_cv,
        skill_cvs=skill_cvs,
        surface_score=surface,
        deep_score=deep,
        total_score=surface + deep,
    )


def profile_for_members(
    members: Sequence[Participant], schema: AttributeSchema = DEFAULT_SCHEMA
) -> DiversityProfile:
    return profile_for_rows(attribute_rows(members), schema)


def surface_deep_rows(
    rows: Sequence[tuple], idxs: Sequence[int], schema: AttributeSchema = DEFAULT_SCHEMA
) -> tuple[float, float]:
    """(surface_score, deep_score) for the row subset, without building a profile.

    Hot path for the genetic optimizer: rows is the precomputed population
    attribute table and idxs selects one team.
    """
    team = [rows[i] for i in idxs]
    gender_b, race_b, eth_b, intl_b, age_cv, skill_cvs = _row_components(team, schema)
    surface = gender_b + race_b + eth_b + intl_b + age_cv / (age_cv + 1.0)
    deep = sum(cv / (cv + 1.0) for cv in skill_cvs) / NUM_SKILLS
    return surface, deep


def team_diversity_profile(
    team: Team,
    lookup: Mapping[str, Participant],
    schema: AttributeSchema = DEFAULT_SCHEMA,
) -> DiversityProfile:
    """DiversityProfile of a team, resolving members through lookup."""
    members = []
    for mid in team.sorted_ids():
        if mid not in lookup:
            raise ValueError(f"unknown member id {mid!r}")
        members.append(lookup[mid])
    return profile_for_members(members, schema)


def population_lookup(participants: Sequence[Participant]) -> dict[str, Participant]:
    """Id -> participant map; rejects duplicate ids."""
    lookup: dict[str, Participant] = {}
    for p in participants:
        if p.id in lookup:
            raise ValueError(f"duplicate participant id {p.id!r}")
        lookup[p.id] = p
    return lookup
