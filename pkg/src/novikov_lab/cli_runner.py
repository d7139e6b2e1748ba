"""Command line entry point: one subcommand per experiment plus ``verify`` and ``report``.

Exit codes: 0 all checks pass, 2 a check fails or artifacts are missing,
3 blow-up or particle collision, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import EXPERIMENTS, ExperimentConfig, load_config, serialize_config, validate
from .errors import (BlowUpError, CollisionError, ConfigError, ModulationLossError,
                     NovikovError)
from .experiments import (RunResult, check_experiment_config, default_config,
                          run_experiment, verify, with_dx)
from .functionals import write_diagnostics_csv
from .modulation import write_track_csv
from .multipeakon import write_trajectory_csv
from .oracle_suite import format_oracle_report, parse_oracle_report
from .pde_evolve import write_snapshot_dir

EXIT_OK, EXIT_FAIL, EXIT_BLOWUP, EXIT_CONFIG = 0, 2, 3, 4

CONFIG_FILE = "config.txt"
MANIFEST_FILE = "manifest.txt"
REPORT_FILE = "oracle_report.txt"
INFO_FILE = "info.txt"
ERROR_FILE = "error.txt"
SUMMARY_FILE = "summary.txt"

_SNAP = "snapshots/index.csv"
EXPECTED: dict[str, tuple[str, ...]] = {
    "peakon-travel": ("diagnostics.csv", _SNAP, "convergence.csv"),
    "multipeakon": ("diagnostics.csv", "trajectory.csv"),
    "stability": ("diagnostics.csv", _SNAP, "track.csv"),
    "monotonicity": ("diagnostics.csv", _SNAP, "track.csv", "monotonicity.csv"),
    "transport-front": ("diagnostics.csv", _SNAP, "front.csv"),
    "lyapunov": ("diagnostics.csv", _SNAP, "lyapunov.csv"),
    "lemma-oracles": ("corpus.csv",),
    "convergence-study": ("diagnostics.csv", "convergence.csv"),
    "verify": ("corpus.csv",),
}

log = logging.getLogger("novikov_lab")


def expected_artifacts(experiment: str) -> tuple[str, ...]:
    return (CONFIG_FILE,) + EXPECTED[experiment] + (REPORT_FILE, INFO_FILE)


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_artifacts(out: Path, res: RunResult) -> None:
    """Write everything a :class:`RunResult` carries into ``out``."""
    if res.diagnostics:
        write_diagnostics_csv(out / "diagnostics.csv", res.diagnostics)
    if res.snapshots:
        write_snapshot_dir(out / "snapshots", res.snapshots)
    if res.track is not None:
        write_track_csv(out / "track.csv", res.track)
    if res.trajectory is not None:
        write_trajectory_csv(out / "trajectory.csv", res.trajectory)
    for name, (header, rows) in res.tables.items():
        _write_table(out / f"{name}.csv", header, rows)
    (out / INFO_FILE).write_text("".join(f"{k}={v}\n" for k, v in res.info.items()))
    (out / REPORT_FILE).write_text(format_oracle_report(res.checks))


def export_report(out_dir) -> tuple[str, int]:
    """Build ``summary.txt`` from the artifacts in ``out_dir``.

    Returns the summary text and the exit code it implies.
    """
    out = Path(out_dir)
    lines = []
    manifest = out / MANIFEST_FILE
    if manifest.is_file():
        expected = [s for s in manifest.read_text().splitlines() if s]
    else:
        expected = [MANIFEST_FILE]
    experiment = "unknown"
    cfg_path = out / CONFIG_FILE
    if cfg_path.is_file():
        for line in cfg_path.read_text().splitlines():
            if line.startswith("experiment"):
                experiment = line.split("=", 1)[1].strip()
    missing = [name for name in expected if not (out / name).exists()]
    lines.append(f"experiment={experiment}")
    error = out / ERROR_FILE
    status = "error" if error.is_file() else ("partial" if missing else "complete")
    lines.append(f"status={status}")
    if error.is_file():
        lines.append(f"error={error.read_text().strip()}")
    checks = []
    if (out / REPORT_FILE).is_file():
        checks = parse_oracle_report((out / REPORT_FILE).read_text())
    n_pass = sum(c.get("verdict") == "pass" for c in checks)
    lines.append(f"checks={len(checks)}")
    lines.append(f"passed={n_pass}")
    for c in checks:
        name = c.get("name", "?")
        lines.append(f"check.{name}.value={c.get('statistic', '')}")
        lines.append(f"check.{name}.threshold={c.get('threshold', '')}")
        lines.append(f"check.{name}.verdict={c.get('verdict', '')}")
    if (out / INFO_FILE).is_file():
        lines += [f"info.{s}" for s in (out / INFO_FILE).read_text().splitlines() if s]
    lines.append(f"missing={','.join(missing)}")
    ok = not missing and not error.is_file() and n_pass == len(checks) and bool(checks)
    lines.append(f"verdict={'pass' if ok else 'fail'}")
    text = "\n".join(lines) + "\n"
    (out / SUMMARY_FILE).write_text(text)
    if error.is_file() and "blow-up" in error.read_text():
        return text, EXIT_BLOWUP
    return text, EXIT_OK if ok else EXIT_FAIL


def _resolve_config(args) -> ExperimentConfig:
    name = "lemma-oracles" if args.command == "verify" else args.command
    cfg = default_config(name)
    if args.config:
        cfg = load_config(args.config, cfg)
        if cfg.experiment != name:
            raise ConfigError(f"experiment: config names {cfg.experiment!r} "
                              f"but the subcommand is {name!r}")
    if args.dx_override is not None:
        cfg = with_dx(cfg, args.dx_override)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.jobs is not None:
        over["jobs"] = args.jobs
    if args.out is not None:
        over["out_dir"] = args.out
    cfg = replace(cfg, **over)
    validate(cfg)
    check_experiment_config(cfg)
    return cfg


def _run(args) -> int:
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    label = "verify" if args.command == "verify" else cfg.experiment
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for stale in (ERROR_FILE, SUMMARY_FILE):
        (out / stale).unlink(missing_ok=True)
    (out / CONFIG_FILE).write_text(serialize_config(cfg))
    (out / MANIFEST_FILE).write_text("\n".join(expected_artifacts(label)) + "\n")
    try:
        res = verify(cfg) if args.command == "verify" else run_experiment(cfg)
    except (BlowUpError, CollisionError) as exc:
        snaps = getattr(exc, "snapshots", None)
        if snaps:
            write_snapshot_dir(out / "snapshots", snaps)
        (out / ERROR_FILE).write_text(f"blow-up: {exc}\n")
        log.error("%s", exc)
    except ModulationLossError as exc:
        (out / ERROR_FILE).write_text(f"modulation-loss: {exc}\n")
        log.error("%s", exc)
    except NovikovError as exc:
        (out / ERROR_FILE).write_text(f"{type(exc).__name__}: {exc}\n")
        log.error("%s", exc)
    else:
        write_artifacts(out, res)
    text, code = export_report(out)
    if not args.quiet:
        sys.stdout.write(text)
    return code


def _report(args) -> int:
    out = Path(args.out or ".")
    if not out.is_dir():
        print(f"report: no such directory {out}", file=sys.stderr)
        return EXIT_FAIL
    text, code = export_report(out)
    if not args.quiet:
        sys.stdout.write(text)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="novikov-lab",
                                     description="Peakon dynamics experiments and oracles.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("verify", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--dx-override", type=float, dest="dx_override")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.command == "report":
        return _report(args)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
