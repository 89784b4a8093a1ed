"""Command-line runner: ``qmint run | replay | report``.

Exit codes: 0 ok, 1 configuration error, 2 invariant violation, 3 replay divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .errors import InvariantViolation, MissingArtifacts, ScenarioInvalid
from .qnet import Simulation
from .scenario import load

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_DIVERGED = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("qmint")


def _setup_logging() -> None:
    name = os.environ.get("QMINT_LOG_LEVEL", "error").lower()
    level = LOG_LEVELS.get(name, logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    if name not in LOG_LEVELS:
        log.error("QMINT_LOG_LEVEL=%s not in %s; using error", name, sorted(LOG_LEVELS))


def _load(path: str, seed: int | None):
    sc = load(path)
    return sc if seed is None else sc.with_seed(seed)


def cmd_run(config: str, out: str, seed: int | None = None) -> int:
    try:
        sc = _load(config, seed)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioInvalid as exc:
        print(f"config error at {exc.path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim = Simulation(sc)
    try:
        result = sim.run()
    except InvariantViolation as exc:
        (out_dir / "events.jsonl").write_text("".join(line + "\n" for line in sim.net.lines))
        print(f"invariant violation at t={sim.net.now}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    (out_dir / "events.jsonl").write_text(result.text())
    (out_dir / "events.sha256").write_text(result.digest + "\n")
    (out_dir / "ledger.csv").write_text(result.ledger.to_csv())
    (out_dir / "metrics.json").write_text(json.dumps(result.metrics, sort_keys=True, indent=2) + "\n")
    log.info("%s: %d events, digest %s", sc.name, len(result.lines), result.digest)
    print(f"{sc.name}: {len(result.lines)} events, digest {result.digest}")
    return EXIT_OK


def cmd_replay(log_path: str, config: str, seed: int | None = None) -> int:
    try:
        sc = _load(config, seed)
        recorded = Path(log_path).read_text().splitlines()
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioInvalid as exc:
        print(f"config error at {exc.path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        fresh = Simulation(sc).run().lines
    except InvariantViolation as exc:
        print(f"invariant violation during replay: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    for seq, (old, new) in enumerate(zip(recorded, fresh)):
        if old != new:
            print(f"replay diverged at seq {seq}", file=sys.stderr)
            log.debug("recorded: %s", old)
            log.debug("replayed: %s", new)
            return EXIT_DIVERGED
    if len(recorded) != len(fresh):
        print(f"replay diverged at seq {min(len(recorded), len(fresh))} (length mismatch)", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"replay matches: {len(fresh)} events")
    return EXIT_OK


def summarize(out_dir: str | Path) -> list[tuple[str, str]]:
    """Rows of the human-readable report for a run directory."""
    out_dir = Path(out_dir)
    metrics_path, ledger_path = out_dir / "metrics.json", out_dir / "ledger.csv"
    missing = [p.name for p in (metrics_path, ledger_path) if not p.exists()]
    if missing:
        raise MissingArtifacts(f"{out_dir} lacks {', '.join(missing)}")
    m = json.loads(metrics_path.read_text())
    with ledger_path.open() as fh:
        supply = [int(row["m_total_after"]) for row in csv.DictReader(fh)]

    def fmt(x):
        return "-" if x is None else f"{x:.6f}" if isinstance(x, float) else str(x)

    rows = [
        ("scenario", m["scenario"]),
        ("seed", str(m["seed"])),
        ("regime", m["regime"]),
        ("teleports completed / aborted", f"{m['teleports_completed']} / {m['teleports_aborted']}"),
        ("mean teleport fidelity", fmt(m["teleport_fidelity_mean"])),
        ("min teleport fidelity", fmt(min(m["teleport_fidelities"], default=None))),
        ("CHSH values", ", ".join(f"{s:.4f}" for s in m["chsh_values"]) or "-"),
        ("verdicts", ", ".join(m["verdicts"]) or "-"),
        ("attacks injected / detected", f"{m['attacks_injected']} / {m['attack_detections']}"),
        ("false Authentic verdicts", str(m["false_authentic"])),
        ("ledger entries", str(len(supply))),
        ("final M_total", str(m["final_M_total"])),
    ]
    if m["regime"] == "Classical":
        monotone = all(b >= a for a, b in zip(supply, supply[1:]))
        rows.append(("M_total monotone increasing", "yes" if monotone else "NO"))
    else:
        peak = max(supply, default=0)
        rows.append(("peak M_total / minted", f"{peak} / {m['minted_total']}"))
        rows.append(("supply bounded by minted total", "yes" if peak <= m["minted_total"] else "NO"))
    rows.append(("invariant checks passed", str(m["invariant_checks"])))
    return rows


def cmd_report(out_dir: str) -> int:
    try:
        rows = summarize(out_dir)
    except MissingArtifacts as exc:
        print(f"missing artifacts: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmint", description="Quantum money network simulator")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    rp = sub.add_parser("replay", help="re-execute and compare with a recorded event log")
    rp.add_argument("--log", required=True)
    rp.add_argument("--config", required=True)
    rp.add_argument("--seed", type=int)
    rep = sub.add_parser("report", help="summarize a run directory")
    rep.add_argument("--dir", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed)
    if args.command == "replay":
        return cmd_replay(args.log, args.config, args.seed)
    return cmd_report(args.dir)


if __name__ == "__main__":
    sys.exit(main())
