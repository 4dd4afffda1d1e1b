from __future__ import annotations

import numpy as np
import pytest

from teamsim.core import Partition, population_lookup
from teamsim.optimizer import (
    ArchiveEntry,
    BruteForceResult,
    GaConfig,
    ParetoArchive,
    brute_force_partition,
    elbow_select,
    ga_partition,
    objectives,
    random_partition,
)
from teamsim.population import synth_population

from conftest import clone_population


def _entry(surface: float, deep: float, tag: str) -> ArchiveEntry:
    return ArchiveEntry(Partition.build([[f"{tag}1", f"{tag}2"]]), surface, deep)


class TestRandomPartition:
    def test_exact_division(self, small_population):
        part = random_partition(small_population, rng=np.random.default_rng(1))
        assert len(part.teams) == 2
        assert part.solos == ()
        part.validate([p.id for p in small_population])

    def test_remainder_becomes_solos(self):
        pop = synth_population(10, rng=np.random.default_rng(2))
        part = random_partition(pop, rng=np.random.default_rng(3))
        assert len(part.teams) == 2
        assert len(part.solos) == 2
        part.validate([p.id for p in pop])

    def test_deterministic_per_seed(self, mixed_population):
        a = random_partition(mixed_population, rng=np.random.default_rng(9))
        b = random_partition(mixed_population, rng=np.random.default_rng(9))
        assert a == b

    def test_empty_population_rejected(self):
        with pytest.raises(ValueError):
            random_partition([], rng=np.random.default_rng(0))


class TestObjectives:
    def test_single_team_equals_profile(self, small_population):
        from teamsim.core import profile_for_members

        team = small_population[:4]
        part = Partition.build([[p.id for p in team]], [p.id for p in small_population[4:]])
        lookup = population_lookup(small_population)
        surface, deep = objectives(part, lookup)
        profile = profile_for_members(sorted(team, key=lambda p: p.id))
        assert surface == pytest.approx(profile.surface_score, abs=1e-12)
        assert deep == pytest.approx(profile.deep_score, abs=1e-12)

    def test_homogeneous_teams_are_zero(self, clones):
        pop = clones(8)
        part = random_partition(pop, rng=np.random.default_rng(4))
        assert objectives(part, population_lookup(pop)) == (0.0, 0.0)

    def test_no_teams_rejected(self, clones):
        pop = clones(3)
        part = Partition.build([], [p.id for p in pop])
        with pytest.raises(ValueError, match="no teams"):
            objectives(part, population_lookup(pop))

    def test_bounds(self):
        rng = np.random.default_rng(5)
        for seed in range(10):
            pop = synth_population(12, rng=rng)
            part = random_partition(pop, rng=np.random.default_rng(seed))
            surface, deep = objectives(part, population_lookup(pop))
            assert 0.0 <= surface <= 5.0
            assert 0.0 <= deep < 1.0


class TestParetoArchive:
    def test_dominated_insert_refused(self):
        archive = ParetoArchive()
        assert archive.insert(_entry(1.0, 1.0, "a"))
        assert not archive.insert(_entry(0.5, 0.5, "b"))
        assert len(archive) == 1

    def test_dominating_insert_evicts(self):
        archive = ParetoArchive()
        archive.insert(_entry(0.5, 0.5, "a"))
        archive.insert(_entry(1.0, 1.0, "b"))
        assert len(archive) == 1
        assert archive.entries[0].surface == 1.0

    def test_incomparable_entries_coexist(self):
        archive = ParetoArchive()
        archive.insert(_entry(1.0, 0.0, "a"))
        archive.insert(_entry(0.0, 1.0, "b"))
        assert len(archive) == 2
        archive.check_invariant()

    def test_random_inserts_never_leave_dominated_entry(self):
        rng = np.random.default_rng(6)
        archive = ParetoArchive()
        for i in range(200):
            archive.insert(_entry(float(rng.random()), float(rng.random()), f"t{i}"))
        archive.check_invariant()


class TestElbowSelect:
    def test_single_entry(self):
        archive = ParetoArchive([_entry(0.3, 0.4, "a")])
        assert elbow_select(archive) == archive.entries[0].partition

    def test_knee_of_three_point_front(self):
        entries = [_entry(0.0, 1.0, "a"), _entry(0.6, 0.9, "b"), _entry(1.0, 0.0, "c")]
        archive = ParetoArchive(list(entries))
        assert elbow_select(archive) == entries[1].partition

    def test_collinear_front_falls_back_to_max_sum(self):
        entries = [_entry(0.0, 1.0, "a"), _entry(0.5, 0.5, "b"), _entry(1.0, 0.0, "c")]
        archive = ParetoArchive(list(entries))
        # all sums equal: falls to higher surface
        assert elbow_select(archive) == entries[2].partition

    def test_two_entries_max_sum(self):
        entries = [_entry(1.0, 0.2, "a"), _entry(0.4, 0.9, "b")]
        archive = ParetoArchive(list(entries))
        assert elbow_select(archive) == entries[1].partition

    def test_empty_archive_rejected(self):
        with pytest.raises(ValueError, match="empty archive"):
            elbow_select(ParetoArchive())


class TestGaPartition:
    def test_too_small_population_rejected(self, clones):
        with pytest.raises(ValueError, match="two teams"):
            ga_partition(clones(7), GaConfig(rng_seed=0))

    def test_deterministic(self, small_population):
        config = GaConfig(generations=5, population_size=10, rng_seed=42)
        archive_a, selected_a = ga_partition(small_population, config)
        archive_b, selected_b = ga_partition(small_population, config)
        assert selected_a == selected_b
        assert [(e.surface, e.deep) for e in archive_a.entries] == [
            (e.surface, e.deep) for e in archive_b.entries
        ]

    def test_selected_weakly_dominates_random_baseline(self, small_population):
        lookup = population_lookup(small_population)
        _, selected = ga_partition(small_population, GaConfig(rng_seed=1))
        base = random_partition(small_population, rng=np.random.default_rng(1))
        gs, gd = objectives(selected, lookup)
        bs, bd = objectives(base, lookup)
        assert gs >= bs and gd >= bd

    def test_clone_population_trivial_landscape(self, clones):
        pop = clones(8)
        archive, selected = ga_partition(
            pop, GaConfig(generations=2, population_size=5, rng_seed=0)
        )
        selected.validate([p.id for p in pop])
        assert all(e.surface == 0.0 and e.deep == 0.0 for e in archive.entries)

    def test_emitted_partitions_valid_and_front_clean(self, mixed_population):
        archive, selected = ga_partition(
            mixed_population, GaConfig(generations=3, population_size=8, rng_seed=5)
        )
        ids = [p.id for p in mixed_population]
        selected.validate(ids)
        for entry in archive.entries:
            entry.partition.validate(ids)
        archive.check_invariant()

    def test_archive_objectives_match_recomputation(self, small_population):
        lookup = population_lookup(small_population)
        archive, _ = ga_partition(small_population, GaConfig(generations=3, rng_seed=11))
        for entry in archive.entries:
            surface, deep = objectives(entry.partition, lookup)
            assert surface == pytest.approx(entry.surface, abs=1e-9)
            assert deep == pytest.approx(entry.deep, abs=1e-9)

    def test_solo_remainder_preserved(self):
        pop = synth_population(10, rng=np.random.default_rng(13))
        _, selected = ga_partition(pop, GaConfig(generations=2, population_size=5, rng_seed=2))
        assert len(selected.teams) == 2
        assert len(selected.solos) == 2
        selected.validate([p.id for p in pop])

    def test_restarts_merge_into_one_archive(self, small_population):
        single = ga_partition(small_population, GaConfig(generations=2, population_size=5, rng_seed=3))
        double = ga_partition(
            small_population,
            GaConfig(generations=2, population_size=5, rng_seed=3, restarts=2),
        )
        double[0].check_invariant()
        assert isinstance(double[1], Partition)
        assert single[1].validate([p.id for p in small_population]) is None

    def test_near_oracle_on_ten_seeds(self, small_population):
        bf = brute_force_partition(small_population)
        lookup = population_lookup(small_population)
        hits = 0
        for seed in range(10):
            _, selected = ga_partition(small_population, GaConfig(rng_seed=seed))
            surface, deep = objectives(selected, lookup)
            if surface + deep >= 0.95 * bf.best_total:
                hits += 1
        assert hits >= 9


class TestBruteForce:
    def test_partition_count_n8(self, small_population):
        assert brute_force_partition(small_population).n_partitions == 35

    def test_partition_count_n12(self):
        pop = synth_population(12, rng=np.random.default_rng(21))
        assert brute_force_partition(pop).n_partitions == 5775

    def test_clones_tie_at_zero(self, clones):
        result = brute_force_partition(clones(8))
        assert result.best_total == 0.0
        assert len(result.best_total_partitions) == 35

    def test_guard_against_blowup(self):
        pop = synth_population(13, rng=np.random.default_rng(22))
        with pytest.raises(ValueError, match="too large"):
            brute_force_partition(pop)

    def test_optimum_bounds_any_ga_result(self, small_population):
        bf = brute_force_partition(small_population)
        lookup = population_lookup(small_population)
        for seed in (0, 5, 9):
            _, selected = ga_partition(small_population, GaConfig(rng_seed=seed))
            surface, deep = objectives(selected, lookup)
            assert surface <= bf.best_surface + 1e-12
            assert deep <= bf.best_deep + 1e-12
            assert surface + deep <= bf.best_total + 1e-12

    def test_result_partitions_are_valid(self, small_population):
        result = brute_force_partition(small_population)
        assert isinstance(result, BruteForceResult)
        ids = [p.id for p in small_population]
        for part in result.best_total_partitions:
            part.validate(ids)
