"""Configuration, persistence and experiment orchestration."""

from hypslab.runner.config import ExperimentConfig, load_config, parse_config
from hypslab.runner.experiments import SUBCOMMANDS, Check, ExperimentResult, run_experiment
from hypslab.runner.snapshot import SnapshotError, read_snapshot, write_csv, write_snapshot

__all__ = ["ExperimentConfig", "load_config", "parse_config", "SUBCOMMANDS", "Check",
           "ExperimentResult", "run_experiment", "SnapshotError", "read_snapshot",
           "write_snapshot", "write_csv", "write_outputs", "format_report"]


def format_report(res: ExperimentResult) -> str:
    lines = [f"hypslab {res.subcommand}"]
    for c in res.checks:
        lines.append(f"{'PASS' if c.passed else 'FAIL'} [criterion {c.criterion}] {c.name}: {c.detail}")
    for n in res.notes:
        lines.append(f"note: {n}")
    lines.append(f"overall: {'PASS' if res.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def write_outputs(res: ExperimentResult, out_dir) -> list:
    """Write the report, CSV tables and snapshots; returns the paths written."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in sorted(res.tables):
        cols, rows = res.tables[name]
        p = os.path.join(out_dir, f"{name}.csv")
        write_csv(p, cols, rows)
        paths.append(p)
    for name in sorted(res.snapshots):
        grid, fields = res.snapshots[name]
        p = os.path.join(out_dir, f"{name}.hsm")
        write_snapshot(fields, p, grid)
        paths.append(p)
    p = os.path.join(out_dir, "report.txt")
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_report(res))
    paths.append(p)
    return paths
