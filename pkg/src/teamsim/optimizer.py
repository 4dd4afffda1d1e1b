"""Partition generators for the non-agency conditions.

random_partition draws uniform teams of four. ga_partition runs a
two-objective genetic search (surface-level and deep-level diversity,
both maximized) built on member-swap mutations, keeps a non-dominated
archive, and picks one front entry with the elbow rule.
brute_force_partition enumerates every partition of a small population
and serves as the validation oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    DEFAULT_SCHEMA,
    TEAM_SIZE,
    AttributeSchema,
    Participant,
    Partition,
    attribute_row,
    attribute_rows,
    population_lookup,
    surface_deep_rows,
)


@dataclass(frozen=True)
class GaConfig:
    """Genetic search knobs.

    generations: improvement passes over the candidate set (default 20).
    population_size: candidate partitions kept per generation.
    swap_attempts: member-swap mutations tried per candidate per
        generation; None means one per participant.
    restarts: independent searches merged into one archive.
    """

    generations: int = 20
    population_size: int = 50
    swap_attempts: int | None = None
    restarts: int = 1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.generations < 1 or self.population_size < 1 or self.restarts < 1:
            raise ValueError("generations, population_size and restarts must be >= 1")
        if self.swap_attempts is not None and self.swap_attempts < 1:
            raise ValueError("swap_attempts must be >= 1")


@dataclass(frozen=True)
class ArchiveEntry:
    partition: Partition
    surface: float
    deep: float


def _dominates(a_surface: float, a_deep: float, b_surface: float, b_deep: float) -> bool:
    """True if objective pair A dominates B (>= on both, > on at least one)."""
    return (
        a_surface >= b_surface
        and a_deep >= b_deep
        and (a_surface > b_surface or a_deep > b_deep)
    )


@dataclass
class ParetoArchive:
    """Non-dominated set of (partition, surface, deep) entries."""

    entries: list[ArchiveEntry] = field(default_factory=list)

    def insert(self, entry: ArchiveEntry) -> bool:
        """Insert unless dominated; evicts entries the newcomer dominates."""
        for e in self.entries:
            if _dominates(e.surface, e.deep, entry.surface, entry.deep):
                return False
            if (
                e.surface == entry.surface
                and e.deep == entry.deep
                and e.partition.canonical() == entry.partition.canonical()
            ):
                return False
        self.entries = [
            e for e in self.entries if not _dominates(entry.surface, entry.deep, e.surface, e.deep)
        ]
        self.entries.append(entry)
        return True

    def check_invariant(self) -> None:
        for a, b in itertools.combinations(self.entries, 2):
            if _dominates(a.surface, a.deep, b.surface, b.deep) or _dominates(
                b.surface, b.deep, a.surface, a.deep
            ):
                raise AssertionError("archive contains a dominated entry")

    def __len__(self) -> int:
        return len(self.entries)


def random_partition(
    population: Sequence[Participant],
    team_size: int = TEAM_SIZE,
    *,
    rng: np.random.Generator,
) -> Partition:
    """Uniformly random teams of team_size; the remainder become solos."""
    if not population:
        raise ValueError("empty population")
    ids = [p.id for p in population]
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_teams = len(order) // team_size
    teams = [order[i * team_size : (i + 1) * team_size] for i in range(n_teams)]
    solos = order[n_teams * team_size :]
    return Partition.build(teams, solos)


def objectives(
    partition: Partition,
    lookup: Mapping[str, Participant],
    schema: AttributeSchema = DEFAULT_SCHEMA,
) -> tuple[float, float]:
    """Mean (surface, deep) diversity over teams; solos are excluded."""
    if not partition.teams:
        raise ValueError("partition has no teams")
    rows_by_id = {pid: attribute_row(p) for pid, p in lookup.items()}
    surface_total = 0.0
    deep_total = 0.0
    for team in partition.teams:
        rows = [rows_by_id[mid] for mid in team.sorted_ids()]
        s, d = surface_deep_rows(rows, range(len(rows)), schema)
        surface_total += s
        deep_total += d
    n = len(partition.teams)
    return surface_total / n, deep_total / n


def elbow_select(archive: ParetoArchive) -> Partition:
    """Front entry farthest (perpendicular) from the chord between extremes.

    Fronts of size <= 2 or collinear fronts fall back to the max
    (surface + deep) entry; ties break by higher surface, then lowest
    partition content hash.
    """
    if not archive.entries:
        raise ValueError("empty archive")

    def _max_sum(entries: list[ArchiveEntry]) -> ArchiveEntry:
        return min(
            entries,
            key=lambda e: (-(e.surface + e.deep), -e.surface, e.partition.content_hash()),
        )

    entries = sorted(archive.entries, key=lambda e: (e.surface, e.deep))
    if len(entries) <= 2:
        return _max_sum(entries).partition
    x1, y1 = entries[0].surface, entries[0].deep
    x2, y2 = entries[-1].surface, entries[-1].deep
    chord_len = math.hypot(x2 - x1, y2 - y1)
    if chord_len == 0.0:
        return _max_sum(entries).partition
    best = None
    best_key = None
    for e in entries:
        dist = abs((y2 - y1) * e.surface - (x2 - x1) * e.deep + x2 * y1 - y2 * x1) / chord_len
        key = (-dist, -e.surface, e.partition.content_hash())
        if best_key is None or key < best_key:
            best, best_key = e, key
    if best_key[0] == 0.0:
        return _max_sum(entries).partition
    return best.partition


class _Candidate:
    """One GA individual: teams as index tuples plus cached team scores."""

    __slots__ = ("teams", "solos", "scores", "surface", "deep")

    def __init__(
        self,
        teams: list[tuple[int, ...]],
        solos: tuple[int, ...],
        rows: list[tuple],
        schema: AttributeSchema,
    ):
        self.teams = teams
        self.solos = solos
        self.scores = [surface_deep_rows(rows, t, schema) for t in teams]
        n = len(teams)
        self.surface = sum(s for s, _ in self.scores) / n
        self.deep = sum(d for _, d in self.scores) / n


def _canonical_teams(teams: Sequence[tuple[int, ...]]) -> tuple:
    return tuple(sorted(tuple(sorted(t)) for t in teams))


class _IndexFront:
    """Non-dominated front over index-coded candidates (cheap GA-internal form).

    Keyed by exact objective pair: the first partition seen at a given
    (surface, deep) point represents it, so flat fitness landscapes (for
    example clone populations, where every swap ties) cannot flood the
    front with equal-objective duplicates.
    """

    __slots__ = ("items",)

    def __init__(self) -> None:
        self.items: dict[tuple[float, float], tuple[tuple, tuple[int, ...]]] = {}

    def insert(self, teams: Sequence[tuple[int, ...]], solos: tuple[int, ...], surface: float, deep: float) -> None:
        key = (surface, deep)
        if key in self.items:
            return
        for s, d in self.items:
            if _dominates(s, d, surface, deep):
                return
        self.items = {
            (s, d): payload
            for (s, d), payload in self.items.items()
            if not _dominates(surface, deep, s, d)
        }
        self.items[key] = (_canonical_teams(teams), solos)


def _materialize(teams: Sequence[tuple[int, ...]], solos: Sequence[int], ids: list[str]) -> Partition:
    return Partition.build(
        ([ids[i] for i in team] for team in teams),
        [ids[i] for i in solos],
    )


def ga_partition(
    population: Sequence[Participant],
    config: GaConfig = GaConfig(),
    schema: AttributeSchema = DEFAULT_SCHEMA,
    team_size: int = TEAM_SIZE,
) -> tuple[ParetoArchive, Partition]:
    """Two-objective genetic partition search.

    Starts from random partitions, proposes swaps of two members between
    two teams, replaces a parent whenever the mutant is not dominated by
    it, and archives every accepted candidate. Returns the final archive
    and the elbow-selected partition. Deterministic per (population,
    config).
    """
    if len(population) < 2 * team_size:
        raise ValueError("need at least two teams")
    ids = [p.id for p in population]
    population_lookup(population)  # id uniqueness check
    rows = attribute_rows(population)
    n = len(ids)
    n_teams = n // team_size
    swap_attempts = config.swap_attempts if config.swap_attempts is not None else n

    front = _IndexFront()
    seed_seq = np.random.SeedSequence(config.rng_seed)
    for child in seed_seq.spawn(config.restarts):
        rng = np.random.default_rng(child)
        candidates: list[_Candidate] = []
        for _ in range(config.population_size):
            order = list(rng.permutation(n))
            teams = [tuple(order[i * team_size : (i + 1) * team_size]) for i in range(n_teams)]
            solos = tuple(order[n_teams * team_size :])
            cand = _Candidate(teams, solos, rows, schema)
            candidates.append(cand)
            front.insert(cand.teams, cand.solos, cand.surface, cand.deep)

        for _ in range(config.generations):
            for cand in candidates:
                for _ in range(swap_attempts):
                    ti, tj = rng.choice(n_teams, size=2, replace=False)
                    mi = int(rng.integers(team_size))
                    mj = int(rng.integers(team_size))
                    team_i = list(cand.teams[ti])
                    team_j = list(cand.teams[tj])
                    team_i[mi], team_j[mj] = team_j[mj], team_i[mi]
                    new_i = tuple(team_i)
                    new_j = tuple(team_j)
                    score_i = surface_deep_rows(rows, new_i, schema)
                    score_j = surface_deep_rows(rows, new_j, schema)
                    new_scores = list(cand.scores)
                    new_scores[ti] = score_i
                    new_scores[tj] = score_j
                    new_surface = sum(s for s, _ in new_scores) / n_teams
                    new_deep = sum(d for _, d in new_scores) / n_teams
                    if _dominates(cand.surface, cand.deep, new_surface, new_deep):
                        continue
                    cand.teams[ti] = new_i
                    cand.teams[tj] = new_j
                    cand.scores[ti] = score_i
                    cand.scores[tj] = score_j
                    cand.surface = new_surface
                    cand.deep = new_deep
                    front.insert(cand.teams, cand.solos, new_surface, new_deep)

    archive = ParetoArchive()
    for (surface, deep), (teams, solos) in sorted(front.items.items()):
        archive.insert(ArchiveEntry(_materialize(teams, solos, ids), surface, deep))
    selected = elbow_select(archive)
    return archive, selected


@dataclass(frozen=True)
class BruteForceResult:
    n_partitions: int
    best_surface: float
    best_surface_partitions: tuple[Partition, ...]
    best_deep: float
    best_deep_partitions: tuple[Partition, ...]
    best_total: float
    best_total_partitions: tuple[Partition, ...]


def _team_splits(idxs: tuple[int, ...], team_size: int):
    """Yield every split of idxs into unordered teams of exactly team_size."""
    if not idxs:
        yield ()
        return
    head = idxs[0]
    rest = idxs[1:]
    for companions in itertools.combinations(rest, team_size - 1):
        team = (head,) + companions
        remaining = tuple(i for i in rest if i not in companions)
        for tail in _team_splits(remaining, team_size):
            yield (team,) + tail


def brute_force_partition(
    population: Sequence[Participant],
    team_size: int = TEAM_SIZE,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    max_population: int = 12,
) -> BruteForceResult:
    """Exhaustive search over all partitions; argmax sets per objective.

    Guarded to small populations: 35 splits at n=8 and 5,775 at n=12
    teams-of-four; anything larger is refused.
    """
    n = len(population)
    if n < team_size:
        raise ValueError("population smaller than one team")
    if n > max_population:
        raise ValueError(f"population too large for exhaustive search (max {max_population})")
    ids = [p.id for p in population]
    rows = attribute_rows(population)
    remainder = n % team_size

    count = 0
    best: dict[str, tuple[float, list[tuple]]] = {
        "surface": (-math.inf, []),
        "deep": (-math.inf, []),
        "total": (-math.inf, []),
    }
    all_idx = tuple(range(n))
    for solo_combo in itertools.combinations(all_idx, remainder):
        team_pool = tuple(i for i in all_idx if i not in solo_combo)
        for split in _team_splits(team_pool, team_size):
            count += 1
            scores = [surface_deep_rows(rows, t, schema) for t in split]
            surface = sum(s for s, _ in scores) / len(split)
            deep = sum(d for _, d in scores) / len(split)
            for key, value in (("surface", surface), ("deep", deep), ("total", surface + deep)):
                cur, holders = best[key]
                if value > cur:
                    best[key] = (value, [(split, solo_combo)])
                elif value == cur:
                    holders.append((split, solo_combo))

    def _parts(key: str) -> tuple[Partition, ...]:
        return tuple(
            _materialize([tuple(t) for t in split], list(solos), ids)
            for split, solos in best[key][1]
        )

    return BruteForceResult(
        n_partitions=count,
        best_surface=best["surface"][0],
        best_surface_partitions=_parts("surface"),
        best_deep=best["deep"][0],
        best_deep_partitions=_parts("deep"),
        best_total=best["total"][0],
        best_total_partitions=_parts("total"),
    )
