"""Experiment runner: ``run``, ``replicate`` and ``list-families``.

Each sweep writes ``<label>_raw.csv`` (one row per run and level),
``<label>_aggregate.csv`` (means over seeds) and whitespace-delimited
series files ``<label>_<series>_<metric>.dat`` for external plotting.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from statistics import fmean

from .config import FAMILIES, ConfigError, ExperimentConfig, SimConfig, from_dict, load
from .metrics import CSV_COLUMNS

logger = logging.getLogger("jitsim")

KEY_COLUMNS = ("scenario", "policy", "routing", "deadline_s", "level")
VALUE_COLUMNS = tuple(c for c in CSV_COLUMNS if c not in KEY_COLUMNS + ("seed",))
AGGREGATE_COLUMNS = KEY_COLUMNS + ("runs",) + VALUE_COLUMNS
PLOT_METRICS = ("miss_ratio", "drop_ratio", "avg_delay_ms", "avg_hops")

PRESETS: dict[str, dict] = {
    "jits_vs_vms": {
        "topology": "grid",
        "protocols": ["jits_s/gf", "jits_d/gf", "vms_s/gf", "vms_d/gf"],
        "deadline_sweep": [0.5, 2.0, 0.5],
    },
    "sp_vs_gf": {
        "topology": "grid",
        "protocols": ["jits_s/sp", "jits_d/sp", "jits_nl/sp",
                      "jits_s/gf", "jits_d/gf", "jits_nl/gf"],
        "deadlines": [0.3, 0.5, 1.0, 1.5, 2.0],
    },
    "bursty": {
        "topology": "grid",
        "traffic": "bursty",
        "protocols": ["jits_d/gf", "jits_nl/gf", "vms_s/gf"],
        "deadlines": [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
    },
    "random_deploy": {
        "topology": "random",
        "protocols": ["jits_s/gf", "jits_d/gf", "vms_s/gf"],
        "deadline_sweep": [0.5, 2.0, 0.1],
    },
    "two_level": {
        "topology": "grid",
        "traffic": "two_level",
        "protocols": ["vms_s/gf", "jits_d/gf", "jits_nl/gf"],
        "deadlines": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
    },
    "speed_routing": {
        "topology": "grid",
        "traffic": "congestion_flows",
        "protocols": ["fifo/sp", "fifo/gf", "fifo/speed"],
        "deadlines": [0.5, 1.0, 1.5, 2.0],
    },
    "jits_vs_speed": {
        "topology": "grid",
        "traffic": ["load_i", "load_ii", "load_iii"],
        "protocols": ["jits_d/sp", "fifo/speed", "fifo/speed_t", "fifo/speed_s"],
        "deadlines": [1.0],
    },
}


def preset(family: str, seeds: int | None = None) -> ExperimentConfig:
    if family not in PRESETS:
        raise ConfigError(f"unknown figure family {family!r}; try list-families")
    d = dict(PRESETS[family], family=family)
    if seeds is not None:
        d["seeds"] = list(range(1, seeds + 1))
    return from_dict(d)


def thread_cap() -> int:
    raw = os.environ.get("JITS_SIM_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring non-integer JITS_SIM_THREADS=%r", raw)
    return os.cpu_count() or 1


def run_one(cfg: SimConfig) -> tuple[list[dict], str | None]:
    from .network import simulate

    try:
        return simulate(cfg).rows(), None
    except Exception as exc:  # one bad run must not sink the sweep
        return [], f"{cfg.policy_label}/{cfg.routing_label} D={cfg.deadline_s:g} " \
                   f"seed={cfg.seed}: {type(exc).__name__}: {exc}"


def execute(runs: list[SimConfig], threads: int | None = None
            ) -> tuple[list[dict], list[str]]:
    threads = threads or thread_cap()
    rows: list[dict] = []
    errors: list[str] = []
    if threads <= 1 or len(runs) <= 1:
        results = map(run_one, runs)
    else:
        pool = ProcessPoolExecutor(max_workers=min(threads, len(runs)))
        results = pool.map(run_one, runs)
    try:
        for i, (r, err) in enumerate(results, 1):
            if err:
                logger.error("run aborted: %s", err)
                errors.append(err)
            rows.extend(r)
            logger.info("finished %d/%d runs", i, len(runs))
    finally:
        if threads > 1 and len(runs) > 1:
            pool.shutdown()
    return sort_rows(rows), errors


def _row_key(row: dict) -> tuple:
    return (row["scenario"], row["policy"], row["routing"], float(row["deadline_s"]),
            int(row["level"]), int(row.get("seed", 0)))


def sort_rows(rows: list[dict]) -> list[dict]:
    return sorted(rows, key=_row_key)


def aggregate(rows: list[dict]) -> list[dict]:
    """Arithmetic mean over seeds for every (scenario, policy, routing,
    deadline, level) group."""
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for r in rows:
        groups[tuple(str(r[k]) for k in KEY_COLUMNS)].append(r)
    out = []
    for key, members in groups.items():
        agg = dict(zip(KEY_COLUMNS, key))
        agg["runs"] = len(members)
        for col in VALUE_COLUMNS:
            agg[col] = f"{fmean(float(m[col]) for m in members):.6f}"
        out.append(agg)
    return sort_rows(out)


def write_csv(path: Path, rows: list[dict], columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in columns})


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _series_names(rows: list[dict]) -> dict[tuple, str]:
    pairs = {(r["policy"], r["routing"]) for r in rows}
    per_policy = defaultdict(set)
    for pol, rt in pairs:
        per_policy[pol].add(rt)
    ambiguous = any(len(v) > 1 for v in per_policy.values())
    scenarios = {r["scenario"] for r in rows}
    deadlines = {r["deadline_s"] for r in rows}
    by_scenario = len(scenarios) > 1 and len(deadlines) > 1
    names = {}
    for r in rows:
        name = f"{r['policy']}-{r['routing']}" if ambiguous else r["policy"]
        if by_scenario:
            name += "-" + r["scenario"]
        if int(r["level"]):
            name += f"-l{r['level']}"
        names[_series_key(r)] = name
    return names


def _series_key(r: dict) -> tuple:
    return (r["scenario"], r["policy"], r["routing"], r["level"])


def emit_plot_data(aggregate_path: Path, family: str, out_dir: Path | None = None
                   ) -> list[Path]:
    """One ``x value`` file per series and metric.

    The x column is the deadline; a sweep over several scenarios at a
    single deadline (the load-profile family) uses the scenario label.
    """
    aggregate_path = Path(aggregate_path)
    if not aggregate_path.exists():
        raise FileNotFoundError(f"aggregate {aggregate_path} not found; run the sweep first")
    rows = read_csv(aggregate_path)
    out_dir = Path(out_dir or aggregate_path.parent)
    names = _series_names(rows)
    x_is_scenario = len({r["deadline_s"] for r in rows}) == 1 and \
        len({r["scenario"] for r in rows}) > 1
    series: dict[str, list[dict]] = defaultdict(list)
    for r in rows:
        series[names[_series_key(r)]].append(r)
    written = []
    for name in sorted(series):
        pts = series[name]
        if x_is_scenario:
            pts = sorted(pts, key=lambda r: r["scenario"])
        else:
            pts = sorted(pts, key=lambda r: float(r["deadline_s"]))
        for metric in PLOT_METRICS:
            path = out_dir / f"{family}_{name}_{metric}.dat"
            with open(path, "w") as fh:
                fh.write(f"# {'scenario' if x_is_scenario else 'deadline_s'} {metric}\n")
                for r in pts:
                    x = r["scenario"] if x_is_scenario else r["deadline_s"]
                    fh.write(f"{x} {r[metric]}\n")
            written.append(path)
    return written


def run_experiment(exp: ExperimentConfig, out_dir: Path, label: str,
                   threads: int | None = None) -> int:
    runs = exp.expand()
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("%s: %d runs -> %s", label, len(runs), out_dir)
    rows, errors = execute(runs, threads)
    raw = out_dir / f"{label}_raw.csv"
    agg = out_dir / f"{label}_aggregate.csv"
    write_csv(raw, rows, CSV_COLUMNS)
    write_csv(agg, aggregate(rows), AGGREGATE_COLUMNS)
    emit_plot_data(agg, label, out_dir)
    if errors:
        logger.error("%d of %d runs aborted", len(errors), len(runs))
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jitsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run the sweep described by a config file")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, default=None,
                   help="output directory (default: the config's 'out', else ./results)")
    rep = sub.add_parser("replicate", help="run a preset experiment family")
    rep.add_argument("family", choices=FAMILIES)
    rep.add_argument("--out", type=Path, default=Path("results"))
    rep.add_argument("--seeds", type=int, default=None, help="use seeds 1..N")
    sub.add_parser("list-families", help="print the figure family names")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.cmd == "list-families":
        for f in FAMILIES:
            print(f)
        return 0
    try:
        if args.cmd == "run":
            exp = load(args.config)
            label = exp.family or args.config.stem
            out = args.out or Path(exp.out)
        else:
            if args.seeds is not None and args.seeds < 1:
                raise ConfigError("--seeds must be >= 1")
            exp = preset(args.family, args.seeds)
            label, out = args.family, args.out
    except (ConfigError, OSError) as exc:
        print(f"jitsim: config error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(exp, out, label)


if __name__ == "__main__":
    sys.exit(main())
