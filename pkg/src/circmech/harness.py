"""Scenario dispatch, artifact emission and the run manifest."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import constructs as cg
from .config import ScenarioConfig
from .disclosure import DisclosureConfig, equilibrium_gap, run_to_equilibrium
from .elicitation import (
    CollapseConfig,
    collapse_rows,
    correlation_collapse,
    misreport_dominance,
    terminal_summary,
)
from .enforcement import EnforcementParams, statics_table
from .rng import substream
from .saito import EpochConfig, simulate_epoch

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

OUT_ENV = "CIRCMECH_OUT"


@dataclass
class RunResult:
    status: int
    artifacts: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    message: str = ""


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def render_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class _Writer:
    def __init__(self, out_dir: Path, fmt: str):
        self.out_dir = out_dir
        self.fmt = fmt
        self.paths: list[Path] = []

    def table(self, stem: str, rows: list[dict], columns: list[str]) -> None:
        if self.fmt == "csv":
            self.text(f"{stem}.csv", render_csv(rows, columns))
        else:
            self.text(f"{stem}.json", render_json([{c: r[c] for c in columns} for r in rows]))

    def text(self, name: str, content: str) -> None:
        path = self.out_dir / name
        path.write_text(content, encoding="utf-8")
        self.paths.append(path)


def _enforcement(params: dict) -> EnforcementParams:
    return EnforcementParams(**params["enforcement"])


def _comparative_statics(cfg: ScenarioConfig, w: _Writer) -> tuple[int, dict]:
    params = _enforcement(cfg.params)
    rows = statics_table(params, cfg.params["tau_grid"])
    w.table("comparative_statics", rows, ["tau", "s_star", "cost", "risk", "total"])
    return EXIT_OK, {"points": len(rows)}


def _disclosure(cfg: ScenarioConfig, w: _Writer) -> tuple[int, dict]:
    p = dict(cfg.params)
    params = _enforcement(p)
    loss = p["loss"] if p["loss"] is not None else 0.5 * p["value"]
    bounds = tuple(p["security_bounds"]) if p["security_bounds"] is not None else None
    dc = DisclosureConfig(
        n_agents=p["n_agents"],
        tau=p["tau"],
        tau_spread=p["tau_spread"],
        honesty=p["honesty"],
        value=p["value"],
        surplus_offer=p["surplus_offer"],
        loss=loss,
        initial_security=p["initial_security"],
        target_retreat=p["target_retreat"],
        gain=p["gain"],
        security_bounds=bounds,
        max_rounds=p["max_rounds"],
        params=params,
    )
    trace = run_to_equilibrium(dc, substream(cfg.seed, "disclosure_game", cfg.run_index))
    w.table(
        "disclosure_trace",
        trace.rows(),
        ["round", "security", "retreat_rate", "betrayals", "mean_payoff", "converged"],
    )
    terminal, s_star = equilibrium_gap(trace, params)
    summary = {
        "converged": trace.converged,
        "rounds": len(trace.rounds),
        "terminal_security": terminal,
        "s_star_mean_tau": s_star,
        "relative_gap": (terminal - s_star) / s_star if s_star > 0 else None,
    }
    w.text("disclosure_summary.json", render_json(summary))
    return (EXIT_OK if trace.converged else EXIT_NOT_CONVERGED), summary


def _elicitation(cfg: ScenarioConfig, w: _Writer) -> tuple[int, dict]:
    p = cfg.params
    params = _enforcement(p)
    if p["grid_points"] < 1:
        raise ValueError("grid_points must be >= 1")
    grid = np.linspace(0.0, p["tau_max"], p["grid_points"]).tolist()
    result = misreport_dominance(params, p["n_agents"], grid, p["value"])
    w.table("elicitation", result.rows(), ["true_tau", "reported_tau", "payoff", "best"])
    summary = {
        "verdict": result.verdict,
        "best_reports": [[t, r] for t, r in sorted(result.best_reports.items())],
    }
    w.text("elicitation_summary.json", render_json(summary))
    return EXIT_OK, summary


def _collapse(cfg: ScenarioConfig, w: _Writer) -> tuple[int, dict]:
    cc = CollapseConfig(seed=cfg.seed, **cfg.params)
    trace = correlation_collapse(cc, substream(cfg.seed, "elicitation_experiment", cfg.run_index))
    w.table(
        "correlation_collapse",
        collapse_rows(trace),
        ["round", "marginal_correlation", "exploiter_profit", "mean_signal_weight"],
    )
    summary = terminal_summary(trace)
    w.text("correlation_summary.json", render_json(summary))
    return EXIT_OK, summary


def _saito(cfg: ScenarioConfig, w: _Writer) -> tuple[int, dict]:
    ec = EpochConfig(**cfg.params)
    result = simulate_epoch(ec, substream(cfg.seed, "saito_sim", cfg.run_index))
    w.table(
        "saito_epoch",
        result.rows(),
        [
            "block",
            "producer",
            "fees",
            "burn",
            "attempts",
            "winning_router",
            "miner_payout",
            "router_payout",
            "cum_revision_cost",
        ],
    )
    report = result.conservation_report()
    w.text("conservation.json", render_json(report))
    return EXIT_OK, report


def _construct(cfg: ScenarioConfig, w: _Writer) -> tuple[int, dict]:
    base = cfg.source.parent if cfg.source is not None else Path.cwd()

    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else base / path

    construct = cg.load_construct(resolve(cfg.params["construct"]))
    report = construct_report(construct)
    if cfg.params["taxonomy"] is not None:
        entries = cg.load_taxonomy(resolve(cfg.params["taxonomy"]))
        verdict = cg.classify(construct)
        report["taxonomy_matches"] = [e.name for e in entries if cg.agrees(e, verdict)]
    w.text("construct_report.json", render_json(report))
    w.text("collapsed_construct.txt", cg.serialize_construct(cg.collapse_myerson_chains(construct)))
    return EXIT_OK, report


def construct_report(construct: cg.Construct) -> dict:
    collapsed = cg.collapse_myerson_chains(construct)
    verdict = cg.classify(construct)
    return {
        "layers": len(construct.layers),
        "circular": construct.circular,
        "reducible": cg.is_reducible(construct),
        "collapsed_layers": [layer.id for layer in collapsed.layers],
        "privacy_walls": [list(e) for e in cg.privacy_walls(construct)],
        "classification": {
            "type": verdict.mech_type.value,
            "reducible": verdict.reducible.value,
            "unactionability": verdict.unactionability.value,
        },
    }


DISPATCH = {
    "comparative_statics": _comparative_statics,
    "disclosure_equilibrium": _disclosure,
    "elicitation": _elicitation,
    "correlation_collapse": _collapse,
    "saito_epoch": _saito,
    "construct_analysis": _construct,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def output_dir(cfg: ScenarioConfig) -> Path:
    return Path(os.environ.get(OUT_ENV) or cfg.output_dir)


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Run one scenario and write its artifacts plus ``manifest.json``.

    Exit status: 0 on success, 2 when a feedback run did not settle, 1 on
    error.  Errors are reported in the result, not raised.
    """
    out = output_dir(cfg)
    try:
        out.mkdir(parents=True, exist_ok=True)
        writer = _Writer(out, cfg.output_format)
        status, summary = DISPATCH[cfg.scenario](cfg, writer)
    except (ValueError, OSError, RuntimeError) as exc:
        log.error("scenario %s failed: %s", cfg.scenario, exc)
        return RunResult(EXIT_ERROR, message=f"{cfg.scenario}: {exc}")

    manifest = {
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "scenario": cfg.scenario,
        "artifacts": [{"path": p.name, "sha256": _sha256(p)} for p in writer.paths],
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(render_json(manifest), encoding="utf-8")
    message = "ok" if status == EXIT_OK else "did not converge within max_rounds"
    return RunResult(status, writer.paths + [manifest_path], summary, message)
