"""Command-line experiment harness.

    uniprice clear --config scenario.json --out outcome.csv
    uniprice ic-sweep --config scenario.json --sizes 10,100,1000 --budget 500 --out eps.csv
    uniprice verify --config scenario.json

Exit codes: 0 success, 2 config error, 3 solver failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version as pkg_version
from pathlib import Path

import numpy as np

from . import analysis
from .errors import ConfigError, InfeasibleError, InputError, SolverError
from .mechanism import clear, price_jacobian_wrt_report
from .model import BidProfile, make_allocation
from .planner import solve_social_choice
from .price_response import population_respond, respond, respond_oracle
from .scenario import ScenarioSpec, generate_population, load_spec
from .verify import run_checks

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4

# fixed column orders of every CSV the CLI writes
COLUMNS = {
    "trajectory": ["agent", "period", "price", "action", "state_before", "state_after"],
    "response": ["period", "price", "action", "oracle_action"],
    "market": ["period", "wholesale", "cap", "price", "dual", "aggregate", "binding"],
    "allocation": ["agent", "period", "action", "state_after"],
    "ic_sweep": ["N", "max_gain", "max_price_shift", "kink_free_price_shift", "eps_bound", "kinked_samples"],
    "price_impact": ["N", "agent", "max_abs_jacobian", "eps1", "n_times_eps1", "differentiable"],
    "verify": ["check", "value", "tolerance", "passed"],
}


def tool_version() -> str:
    try:
        return pkg_version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunRecord:
    scenario_name: str
    command: str
    timestamp: str
    input_digest: str
    outputs: list = field(default_factory=list)
    tool_version: str = field(default_factory=tool_version)
    summary: dict = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest string that round-trips
    return str(v)


def write_csv(path: Path, kind: str, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS[kind])
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}{out.suffix or '.csv'}")


def _market_rows(cfg, prices, duals, aggregate, binding):
    for k in range(cfg.horizon):
        yield (k + 1, cfg.wholesale[k], cfg.caps[k], prices[k], duals[k], aggregate[k], binding[k])


def _allocation_rows(alloc):
    N, K = alloc.actions.shape
    for i in range(N):
        for k in range(K):
            yield (i, k + 1, alloc.actions[i, k], alloc.states[i, k + 1])


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad size list {text!r}", field="--sizes")
    if not sizes or min(sizes) < 1:
        raise ConfigError("sizes must be positive integers", field="--sizes")
    return sizes


def cmd_simulate(spec: ScenarioSpec, args, record: RunRecord) -> int:
    bids = generate_population(spec)
    prices = spec.prices if spec.prices is not None else spec.config.wholesale
    alloc = make_allocation(bids, population_respond(bids, prices, paper_theta1=args.paper_theta1))
    rows = ((i, k + 1, prices[k], alloc.actions[i, k], alloc.states[i, k], alloc.states[i, k + 1])
            for i in range(len(bids)) for k in range(bids.horizon))
    record.outputs.append(str(write_csv(args.out, "trajectory", rows)))
    return EXIT_OK


def cmd_respond(spec: ScenarioSpec, args, record: RunRecord) -> int:
    bids = generate_population(spec)
    if not 0 <= args.agent < len(bids):
        raise ConfigError(f"agent index {args.agent} out of range", field="--agent")
    agent = bids[args.agent]
    prices = spec.prices if spec.prices is not None else spec.config.wholesale
    a = respond(agent, prices, paper_theta1=args.paper_theta1)
    o = respond_oracle(agent, prices)
    rows = ((k + 1, prices[k], a[k], o[k]) for k in range(agent.horizon))
    record.outputs.append(str(write_csv(args.out, "response", rows)))
    record.summary["max_oracle_gap"] = float(np.abs(a - o).max())
    return EXIT_OK


def cmd_planner(spec: ScenarioSpec, args, record: RunRecord) -> int:
    cfg = spec.config
    sol = solve_social_choice(generate_population(spec), cfg)
    rows = _market_rows(cfg, sol.prices, sol.duals, sol.aggregate, sol.duals > 0)
    record.outputs.append(str(write_csv(args.out, "market", rows)))
    record.outputs.append(str(write_csv(_sibling(args.out, "allocation"), "allocation",
                                        _allocation_rows(sol.allocation))))
    record.summary.update(welfare=sol.welfare, kkt_residual=sol.kkt_residual)
    return EXIT_OK


def cmd_clear(spec: ScenarioSpec, args, record: RunRecord) -> int:
    cfg = spec.config
    out = clear(generate_population(spec), cfg, paper_theta1=args.paper_theta1)
    rows = _market_rows(cfg, out.prices, out.prices - cfg.wholesale, out.aggregate, out.binding)
    record.outputs.append(str(write_csv(args.out, "market", rows)))
    record.outputs.append(str(write_csv(_sibling(args.out, "allocation"), "allocation",
                                        _allocation_rows(out.allocation))))
    record.summary.update(welfare_reported=out.welfare_reported, nu_residual=out.nu_residual)
    return EXIT_OK


def cmd_ic_sweep(spec: ScenarioSpec, args, record: RunRecord) -> int:
    sizes = _sizes(args.sizes)
    table = analysis.empirical_epsilon(spec.config, sizes, [spec.seed],
                                       analysis.SearchSpec(args.budget, spec.seed),
                                       agents=args.agents)
    record.outputs.append(str(write_csv(args.out, "ic_sweep", table.rows)))
    record.summary.update(gain_slope=table.gain_slope, shift_slope=table.shift_slope,
                          kinks=sum(r[5] for r in table.rows))
    return EXIT_OK


def cmd_price_impact(spec: ScenarioSpec, args, record: RunRecord) -> int:
    sizes = _sizes(args.sizes)
    base = spec.config.population
    rows = []
    for n in sizes:
        sub = spec.with_population(n)
        bids = generate_population(sub)
        for i in range(min(args.agents, n)):
            jac = price_jacobian_wrt_report(bids, sub.config, i, paper_theta1=args.paper_theta1)
            consts = analysis.estimate_constants(sub.config, bids, probe_agents=[i])
            rows.append((n, i, float(np.abs(jac.finite_difference).max()), consts.eps1,
                         consts.eps1 * n, jac.differentiable))
    record.outputs.append(str(write_csv(args.out, "price_impact", rows)))
    per_n = [max(r[3] for r in rows if r[0] == n) for n in sizes]
    record.summary.update(shift_slope=analysis.loglog_slope(sizes, per_n), base_population=base)
    return EXIT_OK


def cmd_verify(spec: ScenarioSpec, args, record: RunRecord) -> int:
    checks = run_checks(spec, tolerance=args.tolerance, paper_theta1=args.paper_theta1)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:30s} {c.value:.3e} <= {c.tolerance:.1e}")
    if args.out is not None:
        rows = ((c.name, c.value, c.tolerance, c.passed) for c in checks)
        record.outputs.append(str(write_csv(args.out, "verify", rows)))
    record.summary["failed"] = [c.name for c in checks if not c.passed]
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "respond": cmd_respond,
    "planner": cmd_planner,
    "clear": cmd_clear,
    "ic-sweep": cmd_ic_sweep,
    "price-impact": cmd_price_impact,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uniprice", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None if name == "verify" else Path(f"{name}.csv"))
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--paper-theta1", action="store_true",
                       help="use the alternative first-period response slope A/(2 beta B^2)")
        if name in ("ic-sweep", "price-impact"):
            p.add_argument("--sizes", default="10,50,100,500,1000")
            p.add_argument("--agents", type=int, default=3, help="agents probed per population")
        if name == "ic-sweep":
            p.add_argument("--budget", type=int, default=500)
        if name == "respond":
            p.add_argument("--agent", type=int, default=0)
        if name == "verify":
            p.add_argument("--tolerance", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.config)
        if args.seed is not None:
            spec = ScenarioSpec(args.seed, spec.config, spec.sampling, spec.scenario_name, spec.prices)
        record = RunRecord(spec.scenario_name, " ".join(["uniprice", *(argv or sys.argv[1:])]),
                           datetime.now(timezone.utc).isoformat(), spec.digest())
        code = COMMANDS[args.command](spec, args, record)
    except (ConfigError, InputError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, InfeasibleError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace:
            print("residual trace: " + " ".join(f"{r:.3e}" for r in trace), file=sys.stderr)
        return EXIT_SOLVER
    if args.out is not None:
        sidecar = args.out.with_name(args.out.name + ".run.json")
        sidecar.write_text(json.dumps(_jsonable(record.__dict__), indent=2, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
