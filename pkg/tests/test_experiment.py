from __future__ import annotations

import json

import numpy as np
import pytest

from teamsim.agents import ChoiceModelParams, simulate_exposures
from teamsim.experiment import (
    AuditError,
    ExperimentConfig,
    choice_audit,
    load_exposure_rows,
    regenerate_team_rows,
    run_experiment,
)
from teamsim.optimizer import GaConfig


def _tiny_config(**overrides) -> ExperimentConfig:
    base = dict(
        conditions=("random", "self_assembled"),
        sessions_per_condition=2,
        agents_per_session=16,
        rounds=6,
        seed=314,
        ga=GaConfig(generations=4, population_size=8),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="unknown conditions"):
            ExperimentConfig(conditions=("psychic",))
        with pytest.raises(ValueError, match="at least one condition"):
            ExperimentConfig(conditions=())
        with pytest.raises(ValueError):
            ExperimentConfig(sessions_per_condition=0)
        with pytest.raises(ValueError):
            ExperimentConfig(agents_per_session=7)
        with pytest.raises(ValueError):
            ExperimentConfig(team_size=5)

    def test_json_round_trip(self, tmp_path):
        config = _tiny_config(output_dir="somewhere")
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_dict()))
        loaded = ExperimentConfig.from_json_file(path)
        assert loaded == config


@pytest.fixture(scope="module")
def tiny_report():
    return run_experiment(_tiny_config())


class TestRunExperiment:
    def test_team_counts(self, tiny_report):
        # 2 conditions x 2 sessions x (16 agents / 4)
        assert len(tiny_report.team_rows) == 16
        for condition in ("random", "self_assembled"):
            assert len(tiny_report.condition_metric(condition, "surface_score")) == 8

    def test_summary_and_stats_sections(self, tiny_report):
        assert {r["condition"] for r in tiny_report.summary_rows} == {
            "random",
            "self_assembled",
        }
        assert {r["metric"] for r in tiny_report.anova_rows} == {
            "surface_score",
            "deep_score",
            "total_score",
            "gender_blau",
            "race_blau",
            "ethnicity_blau",
            "international_blau",
        }
        assert all(r["group_a"] == "random" for r in tiny_report.pairwise_rows)

    def test_balance_rows_cover_attributes(self, tiny_report):
        assert {r["attribute"] for r in tiny_report.balance_rows} <= {
            "gender",
            "race",
            "ethnicity",
            "international",
        }
        assert len(tiny_report.balance_rows) >= 3

    def test_balance_check_rarely_rejects_equal_specs(self):
        # conditions draw from one spec: the chi-squared check should clear
        # 0.05 in at least 90% of seeds
        from teamsim.core import GENDERS
        from teamsim.population import synth_population
        from teamsim.stats import chi2_independence

        clear = 0
        trials = 40
        for seed in range(trials):
            rng = np.random.default_rng(50_000 + seed)
            pops = [synth_population(32, rng=rng) for _ in range(4)]
            table = [[sum(1 for p in pop if p.gender == g) for pop in pops] for g in GENDERS]
            table = [row for row in table if sum(row) > 0]
            if chi2_independence(table).p_value > 0.05:
                clear += 1
        assert clear >= 0.9 * trials

    def test_single_condition_skips_pairwise(self):
        report = run_experiment(
            _tiny_config(conditions=("random",), sessions_per_condition=1)
        )
        assert report.pairwise_rows == []
        assert report.anova_rows == []
        assert report.summary_rows

    def test_exposures_only_from_agency_sessions(self, tiny_report):
        assert tiny_report.exposure_rows
        assert {r["condition"] for r in tiny_report.exposure_rows} == {"self_assembled"}

    def test_deterministic_rerun(self, tiny_report):
        again = run_experiment(_tiny_config())
        assert again.team_rows == tiny_report.team_rows
        assert again.pairwise_rows == tiny_report.pairwise_rows
        assert again.exposure_rows == tiny_report.exposure_rows


class TestReportFiles:
    def test_written_report_is_reproducible_and_parallel_invariant(self, tmp_path):
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        run_experiment(_tiny_config(output_dir=str(out1)))
        run_experiment(_tiny_config(output_dir=str(out2), workers=2))
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel

    def test_env_var_overrides_output_dir(self, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("TEAMSIM_OUTPUT_DIR", str(target))
        report = run_experiment(_tiny_config(output_dir=str(tmp_path / "ignored")))
        assert report.output_dir == target
        assert (target / "team_metrics.csv").exists()

    def test_regenerated_rows_match_live_report(self, tmp_path):
        out = tmp_path / "run"
        report = run_experiment(
            _tiny_config(
                conditions=("random", "algorithmic_diverse", "fairness_aware"),
                sessions_per_condition=1,
                output_dir=str(out),
            )
        )
        regenerated = regenerate_team_rows(out)
        live = sorted(report.team_rows, key=lambda r: (r["condition"], r["session"], r["team"]))
        rebuilt = sorted(regenerated, key=lambda r: (r["condition"], r["session"], r["team"]))
        assert rebuilt == live

    def test_exposures_csv_round_trips_for_audit(self, tmp_path):
        out = tmp_path / "run"
        report = run_experiment(
            _tiny_config(
                conditions=("self_assembled", "fairness_aware"),
                sessions_per_condition=2,
                rounds=8,
                output_dir=str(out),
            )
        )
        rows = load_exposure_rows(out / "exposures.csv")
        assert len(rows) == len(report.exposure_rows)
        audit = choice_audit(rows)
        assert audit.n_exposures == len(rows)
        assert {r["coefficient"] for r in audit.rows} == {
            "intercept",
            "rank",
            "same_gender",
            "diversity",
            "treatment",
            "interaction",
        }


class TestChoiceAudit:
    def _rows_from_batch(self, batch):
        return [
            {
                "rank_z": batch.rank_z[i],
                "same_gender": batch.same_gender[i],
                "diversity_z": batch.diversity_z[i],
                "treatment": batch.treatment[i],
                "selected": batch.selected[i],
            }
            for i in range(len(batch.selected))
        ]

    def test_refuses_thin_data(self):
        batch = simulate_exposures(ChoiceModelParams(), 200, np.random.default_rng(1))
        with pytest.raises(AuditError, match="at least"):
            choice_audit(self._rows_from_batch(batch))

    def test_recovers_generating_interaction(self):
        batch = simulate_exposures(ChoiceModelParams(), 8000, np.random.default_rng(2))
        audit = choice_audit(self._rows_from_batch(batch))
        assert abs(audit.recovered("interaction") - 0.95) < 0.15
        assert not audit.warnings

    def test_constant_treatment_dropped_with_warning(self):
        batch = simulate_exposures(
            ChoiceModelParams(), 3000, np.random.default_rng(3), treatment_share=0.0
        )
        audit = choice_audit(self._rows_from_batch(batch))
        names = {r["coefficient"] for r in audit.rows}
        assert "treatment" not in names and "interaction" not in names
        assert len(audit.warnings) == 2

    def test_shuffled_outcomes_give_null_slopes(self):
        rng = np.random.default_rng(4)
        batch = simulate_exposures(ChoiceModelParams(), 8000, rng)
        rows = self._rows_from_batch(batch)
        shuffled = [int(batch.selected[i]) for i in rng.permutation(len(rows))]
        for row, y in zip(rows, shuffled):
            row["selected"] = y
        audit = choice_audit(rows)
        for row in audit.rows:
            if row["coefficient"] != "intercept":
                assert abs(row["recovered"]) < 0.12
