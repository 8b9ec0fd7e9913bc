"""End-to-end run: activity log -> matrix -> consensus network -> artifacts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .bn.search import SearchParams
from .bootstrap import (
    ConsensusNetwork,
    bootstrap_learn,
    consensus_from_dict,
    read_strengths_csv,
)
from .engagement import EngagementMatrix, build_matrix, exclude_high_access, read_matrix_csv
from .ingest import CourseConfig, load_config, parse_log
from .inference import Query, fit_cpts, parse_query
from .report import summary_report, to_dot

MATRIX_FILE = "matrix.csv"
STRENGTHS_FILE = "strengths.csv"
CONSENSUS_FILE = "consensus.json"
DOT_FILE = "network.dot"
REPORT_FILE = "report.md"
OUTPUT_FILES = (MATRIX_FILE, STRENGTHS_FILE, CONSENSUS_FILE, DOT_FILE, REPORT_FILE)

DEFAULT_QUERIES = (
    "P(sub_6=1 | sub_5=1)",
    "P(sub_8=1 | sub_6=1, sub_7=1)",
    "P(sub_7=1 | vid_7=1)",
    "P(vid_4=1 | vid_3=1)",
    "P(quiz_2=1 | quiz_1=0)",
    "P(quiz_3=1 | quiz_2=0)",
)


class InputError(ValueError):
    """Inputs are readable but cannot drive the pipeline."""


@dataclass(frozen=True)
class LearnSettings:
    iterations: int = 100
    threshold: float = 0.5
    seed: int = 0
    restarts: int = 0
    alpha: float = 1.0
    method: str = "bootstrap"

    def search_params(self) -> SearchParams:
        return SearchParams(restarts=self.restarts, seed=self.seed)


def learn_from_matrix(
    matrix: EngagementMatrix, exclusion_rate: float, settings: LearnSettings, workers: int = 1
):
    learn, excluded = exclude_high_access(matrix, exclusion_rate)
    if len(learn.resources) < 2:
        raise InputError("fewer than two resources left after the high-access exclusion")
    consensus = bootstrap_learn(
        learn, settings.iterations, settings.threshold, settings.search_params(), workers, settings.method
    )
    return learn, excluded, consensus


def consensus_document(consensus: ConsensusNetwork, settings: LearnSettings, extra: dict) -> dict:
    doc = consensus.to_dict()
    doc["settings"] = {
        "iterations": settings.iterations,
        "threshold": settings.threshold,
        "seed": settings.seed,
        "restarts": settings.restarts,
        "alpha": settings.alpha,
        "resampling": settings.method,
        **extra,
    }
    return doc


def render_report(
    matrix: EngagementMatrix,
    consensus: ConsensusNetwork,
    settings: LearnSettings,
    exclusion_rate: float,
    queries: Sequence[Query],
    window_days=None,
) -> str:
    """Report text computed only from the full matrix and the consensus."""
    learn, excluded = exclude_high_access(matrix, exclusion_rate)
    cpts = fit_cpts(learn, consensus.dag, settings.alpha)
    shown = {
        "students": matrix.n_students,
        "window_days": window_days if window_days is not None else "n/a",
        "exclusion_rate": exclusion_rate,
        "iterations": settings.iterations,
        "threshold": settings.threshold,
        "seed": settings.seed,
        "alpha": settings.alpha,
    }
    return summary_report(consensus, cpts, learn, queries, excluded, shown)


def report_from_artifacts(out_dir, queries: Sequence[Query]) -> str:
    out_dir = Path(out_dir)
    doc = json.loads((out_dir / CONSENSUS_FILE).read_text(encoding="utf-8"))
    s = doc["settings"]
    settings = LearnSettings(s["iterations"], s["threshold"], s["seed"], s["restarts"], s["alpha"], s["resampling"])
    strengths = read_strengths_csv(out_dir / STRENGTHS_FILE, s["iterations"])
    consensus = consensus_from_dict(doc, strengths)
    matrix = read_matrix_csv(out_dir / MATRIX_FILE)
    return render_report(matrix, consensus, settings, s["exclusion_rate"], queries, s.get("window_days"))


def load_events(log_path, config: CourseConfig):
    events, diag = parse_log(log_path, config)
    if diag.mapped == 0:
        rules = "; ".join(f"{r.resource}: context~'{r.context}' event~'{r.event}'" for r in config.mapping_rules)
        raise InputError(
            f"no row of {log_path} matched a mapping rule "
            f"({diag.total} rows read). Mapping rules: {rules or 'none declared'}"
        )
    return events, diag


def run_pipeline(
    log_path,
    config_path,
    out_dir,
    *,
    window_days: int | None = None,
    settings: LearnSettings = LearnSettings(),
    workers: int = 1,
    queries: Sequence[str] = DEFAULT_QUERIES,
) -> dict[str, Path]:
    config = load_config(config_path)
    if window_days is not None:
        config = config.with_window(window_days)
    parsed_queries = [parse_query(q) for q in queries]
    events, diag = load_events(log_path, config)
    matrix = build_matrix(events, config.schedule(), config)
    _, excluded, consensus = learn_from_matrix(matrix, config.exclusion_rate, settings, workers)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in OUTPUT_FILES}
    matrix.to_csv(paths[MATRIX_FILE])
    consensus.strengths.to_csv(paths[STRENGTHS_FILE])
    doc = consensus_document(
        consensus,
        settings,
        {
            "window_days": config.window_days,
            "exclusion_rate": config.exclusion_rate,
            "excluded": [[r.name, rate] for r, rate in excluded],
            "ingest": diag.as_dict(),
        },
    )
    paths[CONSENSUS_FILE].write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    paths[DOT_FILE].write_text(to_dot(consensus), encoding="utf-8")
    report = render_report(matrix, consensus, settings, config.exclusion_rate, parsed_queries, config.window_days)
    paths[REPORT_FILE].write_text(report, encoding="utf-8")
    return paths
