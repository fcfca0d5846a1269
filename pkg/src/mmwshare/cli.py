"""Scenario runner: configuration files in, CSV/JSON artifacts out.

Subcommands:
  run       execute the closed-loop simulation and write its time series
  oracle    solve the association/coordination problem with true rates
  table2    score the canonical coordination regimes side by side
  baseline  score the closest-BS association

Exit codes: 0 success, 2 configuration error, 3 infeasible instance.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from mmwshare import __version__
from mmwshare import coordination as coord
from mmwshare import hybrid, scenarios
from mmwshare.optimizer import (
    InfeasibleError,
    InstanceTooLargeError,
    oracle_solution,
)
from mmwshare.topology import (
    ConfigError,
    NetworkTopology,
    SimConfig,
    build_manhattan_topology,
    build_toy_topology,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

RUN_KEYS = {"num_cis", "knowledge", "dynamic_events"}
TOPOLOGY_KEYS = {"builder", "seed", "file"}


class CliConfigError(Exception):
    pass


def load_config(path, overrides=None):
    """Parse the YAML config into (SimConfig, topology section, run section).

    Unknown keys anywhere are rejected so a typo cannot silently fall
    back to a default.
    """
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise CliConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise CliConfigError(f"config parse error: {exc}")
    if not isinstance(doc, dict):
        raise CliConfigError("config root must be a mapping")
    unknown = set(doc) - {"sim", "topology", "run"}
    if unknown:
        raise CliConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    sim_section = doc.get("sim", {}) or {}
    valid_fields = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(sim_section) - valid_fields
    if unknown:
        raise CliConfigError(f"unknown sim keys: {sorted(unknown)}")
    topo_section = doc.get("topology", {}) or {}
    unknown = set(topo_section) - TOPOLOGY_KEYS
    if unknown:
        raise CliConfigError(f"unknown topology keys: {sorted(unknown)}")
    run_section = doc.get("run", {}) or {}
    unknown = set(run_section) - RUN_KEYS
    if unknown:
        raise CliConfigError(f"unknown run keys: {sorted(unknown)}")
    sim_section = dict(sim_section)
    sim_section.update(overrides or {})
    try:
        config = SimConfig(**sim_section)
        config.validate()
    except (TypeError, ConfigError) as exc:
        raise CliConfigError(f"invalid sim config: {exc}")
    return config, topo_section, run_section


def build_topology(topo_section, config):
    builder = topo_section.get("builder", "toy")
    if "file" in topo_section:
        return NetworkTopology.from_json(Path(topo_section["file"]).read_text())
    if builder == "toy":
        return build_toy_topology(config)
    if builder == "manhattan":
        rng = np.random.default_rng(topo_section.get("seed", config.seed))
        return build_manhattan_topology(rng, config)
    raise CliConfigError(f"unknown topology builder {builder!r}")


def _collect_overrides(args):
    overrides = {"seed": args.seed} if args.seed is not None else {}
    if getattr(args, "antennas", None):
        if args.antennas == "small":
            overrides.update(n_bs_antennas=8, n_ue_antennas=2)
        else:
            overrides.update(n_bs_antennas=64, n_ue_antennas=16)
    if getattr(args, "budget", None) is not None:
        overrides["max_budget"] = args.budget
    if getattr(args, "roaming", False):
        overrides["roaming"] = True
    if getattr(args, "attribution", None):
        overrides["attribution"] = args.attribution
    return overrides


def _write_manifest(out_dir, scenario, config, seed, files):
    manifest = {
        "scenario": scenario,
        "seed": seed,
        "config": dataclasses.asdict(config),
        "outputs": sorted(files),
        "version": __version__,
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _decision_summary(topology, config, A, C, seed):
    ev = scenarios.evaluate_decision(topology, config, A, C, seed=seed)
    summary = {
        "A": ["".join(map(str, row)) for row in np.asarray(A).tolist()],
        "C": ["".join(map(str, row)) for row in np.asarray(C).tolist()],
        "costs": [float(c) for c in ev["costs"]],
        "rates_gbps": [float(r) / 1e9 for r in ev["rates_bps"]],
        "focus_ue_norm_interference": [
            float(x) for x in ev["focus_norm_interference"]
        ],
    }
    for z in range(1, topology.num_operators + 1):
        summary[f"sum_rate_op{z}_gbps"] = ev[f"sum_rate_op{z}_gbps"]
        summary[f"min_rate_op{z}_gbps"] = ev[f"min_rate_op{z}_gbps"]
    return summary


def cmd_run(args):
    config, topo_section, run_section = load_config(
        args.config, _collect_overrides(args)
    )
    topology = build_topology(topo_section, config)
    events = {}
    for ev in run_section.get("dynamic_events", []) or []:
        events[int(ev["ci"])] = (
            np.array(ev["positions"], dtype=float),
            np.array(ev["operators"], dtype=int),
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = hybrid.run_simulation(
        topology,
        config,
        num_cis=int(run_section.get("num_cis", 10_000)),
        knowledge=run_section.get("knowledge", "full"),
        seed=config.seed,
        dynamic_events=events,
    )
    ts_path = out_dir / "timeseries.csv"
    result.write_csv(ts_path)
    summary_path = out_dir / "summary.json"
    result.write_summary(summary_path)
    files = [ts_path.name, summary_path.name]
    _write_manifest(out_dir, "run", config, config.seed, files)
    print(f"wrote {ts_path}, {summary_path}, manifest.json")
    return EXIT_OK


def cmd_oracle(args):
    config, topo_section, _ = load_config(args.config, _collect_overrides(args))
    topology = build_topology(topo_section, config)
    A, C, trace, spec = oracle_solution(topology, config, seed=config.seed)
    summary = _decision_summary(topology, config, A, C, config.seed)
    summary["objective"] = trace.objectives[-1]
    out = json.dumps(summary, indent=1, sort_keys=True)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "oracle.json").write_text(out + "\n")
        trace.write_csv(out_dir / "oracle_trace.csv")
        _write_manifest(out_dir, "oracle", config, config.seed,
                        ["oracle.json", "oracle_trace.csv"])
    print(out)
    return EXIT_OK


def cmd_table2(args):
    config, topo_section, _ = load_config(args.config, _collect_overrides(args))
    topology = build_topology(topo_section, config)
    rows = scenarios.comparison_table(
        topology,
        config,
        seed=config.seed,
        budget=config.max_budget,
        include_optimal=not args.no_optimal,
        include_roaming=args.roaming,
    )
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "comparison.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(scenarios.TABLE_HEADER)
            writer.writerows(rows)
        _write_manifest(out_dir, "table2", config, config.seed, ["comparison.csv"])
        print(f"wrote {path}")
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(scenarios.TABLE_HEADER)
        writer.writerows(rows)
    return EXIT_OK


def cmd_baseline(args):
    config, topo_section, _ = load_config(args.config, _collect_overrides(args))
    topology = build_topology(topo_section, config)
    ev = scenarios.baseline_summary(topology, config, seed=config.seed)
    summary = _decision_summary(topology, config, ev["A"], ev["C"], config.seed)
    out = json.dumps(summary, indent=1, sort_keys=True)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "baseline.json").write_text(out + "\n")
        _write_manifest(out_dir, "baseline", config, config.seed, ["baseline.json"])
    print(out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmwshare",
        description="multi-operator mmWave spectrum-sharing scenario runner",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML scenario config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--antennas", choices=["small", "large"], default=None)
        p.add_argument("--budget", type=float, default=None)
        p.add_argument("--roaming", action="store_true")
        p.add_argument("--attribution", choices=["ue", "bs"], default=None)

    p_run = sub.add_parser("run", help="execute the closed-loop simulation")
    common(p_run)
    p_run.add_argument("--scenario", default="toy")
    p_run.set_defaults(func=cmd_run)

    p_oracle = sub.add_parser("oracle", help="model-based optimum with true rates")
    common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle)

    p_table = sub.add_parser("table2", help="coordination-regime comparison table")
    common(p_table)
    p_table.add_argument("--no-optimal", action="store_true",
                         help="skip the optimized rows")
    p_table.set_defaults(func=cmd_table2)

    p_base = sub.add_parser("baseline", help="closest-BS association summary")
    common(p_base)
    p_base.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.func is cmd_run and not args.out:
        print("error: run requires --out", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (CliConfigError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, InstanceTooLargeError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
