"""Experiment harness: ``detnet gen | run | report``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .capacity import normalized_sum_rate, sum_capacity_bracket
from .coding import best_coding
from .detmodel import DetNetwork, NetworkError
from .generators import GENERATORS
from .localview import CapExceeded, ConsistencyClass, all_views, default_gain_domain, node_view
from .scheduling import frac_str, schedule_from_view, evaluate_schedule

log = logging.getLogger("detnet")

SUMMARY_VERSION = "detnet-summary v1"
SUMMARY_COLUMNS = ["instance", "strategy", "sum_rate", "alpha", "bracket_lower", "bracket_upper", "bracket_exact", "status"]
STRATEGIES = ("mis", "mir", "mil", "coding", "silent")

DEFAULT_CAPS: Dict[str, int] = {
    "coloring_vertices": 12,
    "mil_vertices": 16,
    "independent_sets": 4096,
    "class_size": 4096,
    "max_block": 2,
    "search_budget": 2000,
}


@dataclass
class ExperimentConfig:
    generator: Dict[str, Any]
    strategies: List[str] = field(default_factory=list)
    gain_domain: Optional[List[int]] = None
    caps: Dict[str, int] = field(default_factory=dict)
    seed: int = 0
    view: str = "union"
    out: str = "results"

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        allowed = {"generator", "strategies", "gain_domain", "caps", "seed", "view", "out"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown config field(s): {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        gen = self.generator
        if not isinstance(gen, dict) or gen.get("name") not in GENERATORS:
            raise ValueError(f"generator.name must be one of {sorted(GENERATORS)}")
        if int(gen.get("count", 1)) < 1:
            raise ValueError("generator.count must be positive")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")
        for key, val in self.caps.items():
            if key not in DEFAULT_CAPS:
                raise ValueError(f"unknown cap {key!r}")
            if int(val) < 1:
                raise ValueError(f"cap {key} must be positive")
        if self.gain_domain is not None and (not self.gain_domain or min(self.gain_domain) < 1):
            raise ValueError("gain_domain must be a nonempty list of positive integers")

    def merged_caps(self) -> Dict[str, int]:
        return {**DEFAULT_CAPS, **{k: int(v) for k, v in self.caps.items()}}


def load_config(path: str, overrides: Sequence[str] = ()) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    caps = dict(data.get("caps", {}))
    for item in overrides:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--cap-override expects key=value, got {item!r}")
        caps[key] = int(val)
    data["caps"] = caps
    return ExperimentConfig.from_dict(data)


def generate(cfg: ExperimentConfig) -> List[DetNetwork]:
    gen = cfg.generator
    make = GENERATORS[gen["name"]]
    params = gen.get("params", {})
    return [make(params, cfg.seed, i) for i in range(int(gen.get("count", 1)))]


def _class_for(network: DetNetwork, cfg: ExperimentConfig, caps: Dict[str, int]) -> ConsistencyClass:
    domain = cfg.gain_domain or default_gain_domain(network.q)
    if cfg.view == "union":
        return ConsistencyClass.from_views(list(all_views(network).values()), domain, caps["class_size"])
    return ConsistencyClass.from_view(node_view(network, cfg.view), domain, caps["class_size"])


def run_instance(args: Tuple[int, DetNetwork, ExperimentConfig]) -> Dict[str, Any]:
    """Everything computed for one instance; pure given its inputs."""
    idx, network, cfg = args
    caps = cfg.merged_caps()
    name = f"inst_{idx:04d}"
    started = time.perf_counter()
    report: Dict[str, Any] = {"instance": name, "network": network.to_dict(), "strategies": {}, "refusals": []}
    bracket = sum_capacity_bracket(network, caps["max_block"], caps["search_budget"], seed=cfg.seed)
    report["bracket"] = bracket.to_dict()
    rows = [[name, "capacity", frac_str(bracket.lower), "", frac_str(bracket.lower), frac_str(bracket.upper), str(bracket.exact).lower(), "ok"]]
    cls = None
    if cfg.strategies:
        try:
            cls = _class_for(network, cfg, caps)
        except (CapExceeded, ValueError, KeyError) as exc:
            report["refusals"].append(f"consistency class: {exc}")
    for strat in cfg.strategies:
        entry: Dict[str, Any] = {}
        status = "ok"
        sum_rate = alpha = ""
        try:
            if cls is None:
                raise CapExceeded("consistency class", 0, caps["class_size"])
            view = node_view(network, network.sources[0])
            if strat == "coding":
                strategy, rep = best_coding(network, caps["max_block"], budget=caps["search_budget"], target=bracket.upper, seed=cfg.seed)
                entry["full_information"] = rep.to_dict()
                entry["strategy"] = strategy.to_dict()
            else:
                sched = schedule_from_view(view, strat, caps)
                rep = evaluate_schedule(sched, network, strat)
                entry["schedule"] = sched.to_dict()
                entry["rates"] = rep.to_dict()
            ar = normalized_sum_rate(strat, cls, caps=caps)
            entry["alpha"] = ar.to_dict()
            sum_rate, alpha = frac_str(rep.sum_rate), frac_str(ar.alpha)
        except (CapExceeded, ValueError) as exc:
            status = f"refused: {exc}"
            report["refusals"].append(f"{strat}: {exc}")
        report["strategies"][strat] = entry
        rows.append([name, strat, sum_rate, alpha, frac_str(bracket.lower), frac_str(bracket.upper), str(bracket.exact).lower(), status])
    elapsed = time.perf_counter() - started
    return {"name": name, "report": report, "rows": rows, "elapsed": elapsed}


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_networks(networks: Sequence[DetNetwork], out: Path) -> None:
    nd = out / "networks"
    nd.mkdir(parents=True, exist_ok=True)
    for i, n in enumerate(networks):
        (nd / f"inst_{i:04d}.json").write_text(_dump(n.to_dict()), encoding="utf-8")


def run_experiment(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> int:
    """Write per-instance reports, networks, summary.csv and timings.csv. Returns the exit code."""
    networks = generate(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_networks(networks, out)
    work = [(i, n, cfg) for i, n in enumerate(networks)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_instance, work))
    else:
        results = [run_instance(w) for w in work]
    rd = out / "instances"
    rd.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# {SUMMARY_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    timing = io.StringIO()
    timing.write("instance,wall_time_s\n")
    refusals = 0
    for res in results:
        (rd / f"{res['name']}.json").write_text(_dump(res["report"]), encoding="utf-8")
        writer.writerows(res["rows"])
        timing.write(f"{res['name']},{res['elapsed']:.3f}\n")
        refusals += len(res["report"]["refusals"])
        for msg in res["report"]["refusals"]:
            log.warning("%s: %s", res["name"], msg)
    (out / "summary.csv").write_text(buf.getvalue(), encoding="utf-8")
    (out / "timings.csv").write_text(timing.getvalue(), encoding="utf-8")
    if refusals:
        print(f"{refusals} refusal(s); see instance reports in {rd}", file=sys.stderr)
        return 2
    return 0


def read_summary(path: Path) -> List[Dict[str, str]]:
    lines = [l for l in path.read_text(encoding="utf-8").splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def summarize(rows: Sequence[Dict[str, str]]) -> str:
    by: Dict[str, List[Dict[str, str]]] = {}
    for r in rows:
        by.setdefault(r["strategy"], []).append(r)
    lines = [f"{'strategy':<10} {'n':>4} {'ok':>4} {'mean_sum_rate':>14} {'min_alpha':>10} {'mean_alpha':>10}"]
    for strat in sorted(by):
        rs = by[strat]
        ok = [r for r in rs if r["status"] == "ok"]
        rates = [Fraction(r["sum_rate"]) for r in ok if r["sum_rate"]]
        alphas = [Fraction(r["alpha"]) for r in ok if r["alpha"]]
        mean_rate = frac_str(sum(rates, Fraction(0)) / len(rates)) if rates else "-"
        min_a = frac_str(min(alphas)) if alphas else "-"
        mean_a = frac_str(sum(alphas, Fraction(0)) / len(alphas)) if alphas else "-"
        lines.append(f"{strat:<10} {len(rs):>4} {len(ok):>4} {mean_rate:>14} {min_a:>10} {mean_a:>10}")
    return "\n".join(lines) + "\n"


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("DETNET_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="detnet", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("gen", "run", "report"):
        p = sub.add_parser(verb)
        p.add_argument("--out", help="output directory (overrides the config)")
        if verb != "report":
            p.add_argument("--config", required=True, help="experiment config JSON")
            p.add_argument("--cap-override", action="append", default=[], metavar="KEY=VALUE")
        if verb == "run":
            p.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        if args.verb == "report":
            out = Path(args.out or "results")
            text = summarize(read_summary(out / "summary.csv"))
            (out / "report.txt").write_text(text, encoding="utf-8")
            sys.stdout.write(text)
            return 0
        cfg = load_config(args.config, args.cap_override)
        out = Path(args.out or cfg.out)
        if args.verb == "gen":
            write_networks(generate(cfg), out)
            return 0
        return run_experiment(cfg, out, max(1, args.jobs))
    except (OSError, ValueError, NetworkError, CapExceeded) as exc:
        print(f"detnet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
