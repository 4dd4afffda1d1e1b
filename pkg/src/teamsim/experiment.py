"""End-to-end 2x2 experiment runner, reporting, and the choice-model audit.

Sessions are independent work units seeded from a master seed through a
splittable SeedSequence, so the report is byte-identical at any
parallelism degree. Team-level metrics feed permutation ANOVA, pairwise
comparisons with Benjamini-Hochberg adjustment, and chi-squared
demographic balance checks.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .agents import AgentPolicy, ChoiceModelParams
from .core import (
    GENDERS,
    RACES,
    AttributeSchema,
    Participant,
    Partition,
    population_lookup,
    team_diversity_profile,
)
from .optimizer import GaConfig
from .population import DemographicSpec, synth_population
from .protocol import replay, write_log
from .session import CONDITIONS, SessionResult, run_session
from .stats import LogisticFit, anova_f, chi2_independence, logistic_fit, pairwise_diffs

OUTPUT_DIR_ENV = "TEAMSIM_OUTPUT_DIR"

REPORT_METRICS = (
    "surface_score",
    "deep_score",
    "total_score",
    "gender_blau",
    "race_blau",
    "ethnicity_blau",
    "international_blau",
)

AUDIT_COLUMNS = ("intercept", "rank", "same_gender", "diversity", "treatment", "interaction")
MIN_EXPOSURES_PER_COEFFICIENT = 50


class AuditError(ValueError):
    """The audit cannot run on the provided exposures."""


@dataclass(frozen=True)
class ExperimentConfig:
    conditions: tuple[str, ...] = CONDITIONS
    sessions_per_condition: int = 40
    agents_per_session: int = 32
    rounds: int = 10
    seed: int = 0
    team_size: int = 4
    page_size: int = 10
    workers: int = 1
    output_dir: str | None = None
    ga: GaConfig = field(default_factory=GaConfig)
    policy: AgentPolicy = field(default_factory=AgentPolicy)
    choice_params: ChoiceModelParams = field(default_factory=ChoiceModelParams)
    demographics: DemographicSpec = field(default_factory=DemographicSpec)
    schema: AttributeSchema = field(default_factory=AttributeSchema)

    def __post_init__(self) -> None:
        if not self.conditions:
            raise ValueError("need at least one condition")
        unknown = [c for c in self.conditions if c not in CONDITIONS]
        if unknown:
            raise ValueError(f"unknown conditions {unknown}")
        if len(set(self.conditions)) != len(self.conditions):
            raise ValueError("duplicate conditions")
        if self.sessions_per_condition < 1:
            raise ValueError("sessions_per_condition must be >= 1")
        if self.agents_per_session < 8:
            raise ValueError("agents_per_session must be >= 8")
        if not 2 <= self.team_size <= 4:
            raise ValueError("team_size must be in 2..4")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["conditions"] = list(self.conditions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        kwargs = dict(d)
        if "conditions" in kwargs:
            kwargs["conditions"] = tuple(kwargs["conditions"])
        for key, sub in (
            ("ga", GaConfig),
            ("policy", AgentPolicy),
            ("choice_params", ChoiceModelParams),
            ("demographics", DemographicSpec),
            ("schema", AttributeSchema),
        ):
            if key in kwargs and isinstance(kwargs[key], dict):
                sub_kwargs = dict(kwargs[key])
                for name, value in sub_kwargs.items():
                    if isinstance(value, list):
                        sub_kwargs[name] = tuple(value)
                kwargs[key] = sub(**sub_kwargs)
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _session_spec(config: ExperimentConfig) -> list[tuple[str, int]]:
    return [
        (condition, index)
        for condition in config.conditions
        for index in range(config.sessions_per_condition)
    ]


def _run_one(args: tuple[ExperimentConfig, str, int, int, int]) -> SessionResult:
    config, condition, index, spawn_index, total = args
    child = np.random.SeedSequence(config.seed).spawn(total)[spawn_index]
    pop_seq, run_seq = child.spawn(2)
    population = synth_population(
        config.agents_per_session, config.demographics, rng=np.random.default_rng(pop_seq)
    )
    return run_session(
        condition,
        population,
        rng=np.random.default_rng(run_seq),
        session_index=index,
        ga=config.ga,
        policy=config.policy,
        params=config.choice_params,
        schema=config.schema,
        rounds=config.rounds,
        team_size=config.team_size,
        page_size=config.page_size,
    )


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    sessions: list[SessionResult]
    team_rows: list[dict]
    summary_rows: list[dict]
    anova_rows: list[dict]
    pairwise_rows: list[dict]
    balance_rows: list[dict]
    exposure_rows: list[dict]
    output_dir: Path | None = None

    def condition_metric(self, condition: str, metric: str) -> list[float]:
        return [row[metric] for row in self.team_rows if row["condition"] == condition]

    def pairwise(self, metric: str, group_a: str, group_b: str) -> dict:
        a, b = sorted((group_a, group_b))
        for row in self.pairwise_rows:
            if row["metric"] == metric and row["group_a"] == a and row["group_b"] == b:
                return row
        raise KeyError(f"no pairwise row for {metric} {a} vs {b}")


def _team_rows(sessions: Sequence[SessionResult]) -> list[dict]:
    rows = []
    for s in sessions:
        for team, profile in zip(s.partition.teams, s.profiles):
            rows.append(
                {
                    "condition": s.condition,
                    "session": s.session_index,
                    "team": "+".join(team.sorted_ids()),
                    "size": len(team),
                    "surface_score": profile.surface_score,
                    "deep_score": profile.deep_score,
                    "total_score": profile.total_score,
                    "gender_blau": profile.gender_blau,
                    "race_blau": profile.race_blau,
                    "ethnicity_blau": profile.ethnicity_blau,
                    "international_blau": profile.international_blau,
                    "age_cv": profile.age_cv,
                }
            )
    return rows


def _summary_rows(team_rows: Sequence[dict], conditions: Sequence[str]) -> list[dict]:
    rows = []
    for condition in conditions:
        values_by_metric = {
            m: np.asarray([r[m] for r in team_rows if r["condition"] == condition])
            for m in REPORT_METRICS
        }
        for metric, values in values_by_metric.items():
            rows.append(
                {
                    "condition": condition,
                    "metric": metric,
                    "n_teams": int(values.size),
                    "mean": float(values.mean()) if values.size else float("nan"),
                    "sd": float(values.std()) if values.size else float("nan"),
                }
            )
    return rows


def _metric_groups(team_rows: Sequence[dict], conditions: Sequence[str], metric: str) -> dict:
    return {
        condition: [r[metric] for r in team_rows if r["condition"] == condition]
        for condition in conditions
    }


def _balance_tables(sessions: Sequence[SessionResult], conditions: Sequence[str]) -> list[dict]:
    """Chi-squared demographic balance across conditions.

    Categories absent from every condition are dropped before testing so
    sparse levels (e.g. a race synthesized zero times) cannot zero a
    marginal.
    """
    populations: dict[str, list[Participant]] = {c: [] for c in conditions}
    for s in sessions:
        populations[s.condition].extend(s.population)
    attributes = {
        "gender": (GENDERS, lambda p: p.gender),
        "race": (RACES, lambda p: p.race),
        "ethnicity": (("Hispanic", "NonHispanic"), lambda p: "Hispanic" if p.hispanic else "NonHispanic"),
        "international": (("International", "Domestic"), lambda p: "International" if p.international else "Domestic"),
    }
    rows = []
    for name, (categories, getter) in attributes.items():
        table = np.array(
            [
                [sum(1 for p in populations[c] if getter(p) == category) for c in conditions]
                for category in categories
            ],
            dtype=float,
        )
        table = table[table.sum(axis=1) > 0]
        if table.shape[0] < 2 or len(conditions) < 2:
            continue
        result = chi2_independence(table)
        rows.append(
            {
                "attribute": name,
                "chi2": result.statistic,
                "df": result.df,
                "p_value": result.p_value,
            }
        )
    return rows


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run every configured session, aggregate metrics, run the stats suite,
    and (when an output directory is configured) persist the full report."""
    spec = _session_spec(config)
    total = len(spec)
    jobs = [
        (config, condition, index, spawn_index, total)
        for spawn_index, (condition, index) in enumerate(spec)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            sessions = list(pool.map(_run_one, jobs))
    else:
        sessions = [_run_one(job) for job in jobs]

    team_rows = _team_rows(sessions)
    summary_rows = _summary_rows(team_rows, config.conditions)
    anova_rows: list[dict] = []
    pairwise_rows: list[dict] = []
    if len(config.conditions) >= 2:
        for metric in REPORT_METRICS:
            groups = _metric_groups(team_rows, config.conditions, metric)
            result = anova_f(groups, seed=config.seed)
            anova_rows.append(
                {"metric": metric, "f_stat": result.f_stat, "p_value": result.p_value}
            )
            for diff in pairwise_diffs(groups, seed=config.seed):
                pairwise_rows.append(
                    {
                        "metric": metric,
                        "group_a": diff.group_a,
                        "group_b": diff.group_b,
                        "delta": diff.delta,
                        "p_value": diff.p_value,
                        "p_adjusted": diff.p_adjusted,
                    }
                )
    balance_rows = _balance_tables(sessions, config.conditions)

    exposure_rows = []
    for s in sessions:
        for e in s.exposures:
            row = {"condition": s.condition, "session": s.session_index}
            row.update(e.to_row())
            exposure_rows.append(row)

    report = ExperimentReport(
        config=config,
        sessions=sessions,
        team_rows=team_rows,
        summary_rows=summary_rows,
        anova_rows=anova_rows,
        pairwise_rows=pairwise_rows,
        balance_rows=balance_rows,
        exposure_rows=exposure_rows,
    )
    out_dir = resolve_output_dir(config)
    if out_dir is not None:
        write_report(report, out_dir)
        report.output_dir = out_dir
    return report


def resolve_output_dir(config: ExperimentConfig) -> Path | None:
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    if config.output_dir:
        return Path(config.output_dir)
    return None


def _write_csv(path: Path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report(report: ExperimentReport, out_dir: Path) -> None:
    """Persist tables, manifest, per-session artifacts, and the text summary."""
    out_dir = Path(out_dir)
    (out_dir / "events").mkdir(parents=True, exist_ok=True)
    (out_dir / "populations").mkdir(exist_ok=True)
    (out_dir / "partitions").mkdir(exist_ok=True)

    _write_csv(
        out_dir / "team_metrics.csv",
        report.team_rows,
        ["condition", "session", "team", "size", *REPORT_METRICS, "age_cv"],
    )
    _write_csv(
        out_dir / "condition_summary.csv",
        report.summary_rows,
        ["condition", "metric", "n_teams", "mean", "sd"],
    )
    if report.anova_rows:
        _write_csv(out_dir / "anova.csv", report.anova_rows, ["metric", "f_stat", "p_value"])
    if report.pairwise_rows:
        _write_csv(
            out_dir / "pairwise.csv",
            report.pairwise_rows,
            ["metric", "group_a", "group_b", "delta", "p_value", "p_adjusted"],
        )
    if report.balance_rows:
        _write_csv(out_dir / "balance.csv", report.balance_rows, ["attribute", "chi2", "df", "p_value"])
    if report.exposure_rows:
        _write_csv(
            out_dir / "exposures.csv",
            report.exposure_rows,
            [
                "condition",
                "session",
                "searcher",
                "candidate",
                "round",
                "rank",
                "rank_z",
                "same_gender",
                "diversity",
                "diversity_z",
                "treatment",
                "selected",
            ],
        )

    with open(out_dir / "manifest.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "version", "teamsim": __version__}, sort_keys=True) + "\n")
        # workers and output_dir are execution details with no effect on
        # results; the manifest records only what reproduction needs
        config_dict = report.config.to_dict()
        config_dict.pop("workers", None)
        config_dict.pop("output_dir", None)
        fh.write(json.dumps({"kind": "config", "config": config_dict}, sort_keys=True) + "\n")
        for spawn_index, s in enumerate(report.sessions):
            record = {
                "kind": "session",
                "condition": s.condition,
                "index": s.session_index,
                "spawn_index": spawn_index,
                "n_teams": len(s.partition.teams),
                "n_solos": len(s.partition.solos),
                "moments": s.moments.to_dict() if s.moments else None,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    for s in report.sessions:
        stem = f"{s.condition}_{s.session_index:03d}"
        pop_path = out_dir / "populations" / f"{stem}.jsonl"
        with open(pop_path, "w", encoding="utf-8") as fh:
            for p in s.population:
                fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")
        partition_path = out_dir / "partitions" / f"{stem}.json"
        partition_path.write_text(
            json.dumps(
                {
                    "teams": [list(t.sorted_ids()) for t in s.partition.teams],
                    "solos": list(s.partition.solos),
                },
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        if s.events:
            write_log(out_dir / "events" / f"{stem}.jsonl", [p.id for p in s.population], s.events)

    (out_dir / "report.txt").write_text(render_report_text(report), encoding="utf-8")


def render_report_text(report: ExperimentReport) -> str:
    lines = []
    lines.append("team formation experiment report")
    lines.append(
        f"conditions={','.join(report.config.conditions)} "
        f"sessions={report.config.sessions_per_condition} "
        f"agents={report.config.agents_per_session} seed={report.config.seed}"
    )
    lines.append("")
    lines.append("condition means (teams)")
    for row in report.summary_rows:
        lines.append(
            f"  {row['condition']:<22} {row['metric']:<20} "
            f"n={row['n_teams']:<4} mean={row['mean']:.4f} sd={row['sd']:.4f}"
        )
    if report.anova_rows:
        lines.append("")
        lines.append("one-way permutation ANOVA")
        for row in report.anova_rows:
            lines.append(
                f"  {row['metric']:<20} F={row['f_stat']:.4f} p={row['p_value']:.4f}"
            )
    if report.pairwise_rows:
        lines.append("")
        lines.append("pairwise mean differences (delta = B - A, BH adjusted)")
        for row in report.pairwise_rows:
            lines.append(
                f"  {row['metric']:<20} {row['group_a']} vs {row['group_b']}: "
                f"delta={row['delta']:+.4f} p={row['p_value']:.4f} p_adj={row['p_adjusted']:.4f}"
            )
    if report.balance_rows:
        lines.append("")
        lines.append("demographic balance (chi-squared)")
        for row in report.balance_rows:
            lines.append(
                f"  {row['attribute']:<15} chi2={row['chi2']:.4f} df={row['df']} p={row['p_value']:.4f}"
            )
    lines.append("")
    return "\n".join(lines)


@dataclass
class AuditReport:
    rows: list[dict]
    warnings: list[str]
    n_exposures: int
    fit: LogisticFit

    def recovered(self, name: str) -> float | None:
        for row in self.rows:
            if row["coefficient"] == name:
                return row["recovered"]
        return None


def choice_audit(
    exposure_rows: Sequence[dict],
    params: ChoiceModelParams = ChoiceModelParams(),
    *,
    min_per_coefficient: int = MIN_EXPOSURES_PER_COEFFICIENT,
) -> AuditReport:
    """Fit the invitation model on pooled exposures and compare against the
    generating coefficients.

    Constant predictor columns (for example treatment when only
    self_assembled sessions ran) are dropped with a warning rather than
    producing a singular fit.
    """
    n = len(exposure_rows)
    needed = min_per_coefficient * len(AUDIT_COLUMNS)
    if n < needed:
        raise AuditError(
            f"need at least {needed} exposures ({min_per_coefficient} per coefficient), got {n}; "
            "run more or longer agency sessions"
        )
    rank_z = np.asarray([float(r["rank_z"]) for r in exposure_rows])
    same_gender = np.asarray([float(r["same_gender"]) for r in exposure_rows])
    div_z = np.asarray([float(r["diversity_z"]) for r in exposure_rows])
    treatment = np.asarray([float(r["treatment"]) for r in exposure_rows])
    y = np.asarray([float(r["selected"]) for r in exposure_rows])
    columns = {
        "intercept": np.ones(n),
        "rank": rank_z,
        "same_gender": same_gender,
        "diversity": div_z,
        "treatment": treatment,
        "interaction": div_z * treatment,
    }
    warnings = []
    kept = ["intercept"]
    for name in AUDIT_COLUMNS[1:]:
        if np.ptp(columns[name]) == 0.0:
            warnings.append(f"dropped constant column {name!r}")
        else:
            kept.append(name)
    X = np.column_stack([columns[name] for name in kept])
    fit = logistic_fit(X, y)
    generating = params.named_fixed_effects()
    rows = []
    for i, name in enumerate(kept):
        rows.append(
            {
                "coefficient": name,
                "generating": generating[name],
                "recovered": float(fit.coefficients[i]),
                "se": float(fit.standard_errors[i]),
                "abs_error": abs(float(fit.coefficients[i]) - generating[name]),
            }
        )
    return AuditReport(rows=rows, warnings=warnings, n_exposures=n, fit=fit)


def load_exposure_rows(path) -> list[dict]:
    """Read exposures.csv back into audit-ready rows."""
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def regenerate_team_rows(run_dir) -> list[dict]:
    """Rebuild the team-metrics table from persisted artifacts.

    Agency sessions are replayed from their event logs; other conditions
    load their persisted partitions. Used to check replay equivalence of
    the report.
    """
    from .population import load_population
    from .protocol import read_log

    run_dir = Path(run_dir)
    manifest_sessions = []
    with open(run_dir / "manifest.jsonl", "r", encoding="utf-8") as fh:
        config_dict = None
        for line in fh:
            record = json.loads(line)
            if record["kind"] == "session":
                manifest_sessions.append(record)
            elif record["kind"] == "config":
                config_dict = record["config"]
    if config_dict is None:
        raise ValueError("manifest missing config record")
    schema_dict = dict(config_dict["schema"])
    schema = AttributeSchema(**schema_dict)

    rows = []
    for record in manifest_sessions:
        stem = f"{record['condition']}_{record['index']:03d}"
        population = load_population(run_dir / "populations" / f"{stem}.jsonl")
        lookup = population_lookup(population)
        log_path = run_dir / "events" / f"{stem}.jsonl"
        if log_path.exists():
            members, events = read_log(log_path)
            state = replay(members, events)
            state.check_invariants()
            partition = state.partition()
        else:
            data = json.loads((run_dir / "partitions" / f"{stem}.json").read_text())
            partition = Partition.build(data["teams"], data["solos"])
        partition.validate(lookup)
        for team in partition.teams:
            profile = team_diversity_profile(team, lookup, schema)
            rows.append(
                {
                    "condition": record["condition"],
                    "session": record["index"],
                    "team": "+".join(team.sorted_ids()),
                    "size": len(team),
                    "surface_score": profile.surface_score,
                    "deep_score": profile.deep_score,
                    "total_score": profile.total_score,
                    "gender_blau": profile.gender_blau,
                    "race_blau": profile.race_blau,
                    "ethnicity_blau": profile.ethnicity_blau,
                    "international_blau": profile.international_blau,
                    "age_cv": profile.age_cv,
                }
            )
    return rows
