"""Command-line front end.

Four subcommands: ``run`` drives a Monte Carlo sweep and writes result files,
``validate-config`` loads a config and echoes the resolved values,
``solve-one`` solves a single channel realization and prints the report, and
``selftest`` checks the conic solver against small analytic problems.

Exit codes: 0 success, 1 runtime failure (infeasible instance, unwritable
output, bad config values), 2 usage errors. Set COMP_SWIPT_LOG (e.g. INFO,
DEBUG) to change log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .baselines import (EnumerationCapError, colocated_system,
                        exhaustive_search, full_cooperation)
from .coneprog import ProgramBuilder, SolveStatus
from .harness import (KNOWN_SCHEMES, SWEEPABLE, ExperimentConfig, emit_results,
                      load_config, run_experiment)
from .network import build_topology, sample_channels
from .params import SystemParams, system_params_to_dict
from .report import dump_report
from .reweighted import (InfeasibleInstanceError, SolverBreakdownError,
                         lower_bounds)
from .reweighted import run as run_reweighted
from .sdp import build_sdp, extract_beamformers
from .solver import solve
from .units import mw_to_dbm

logger = logging.getLogger(__name__)


def parse_sweep(text: str) -> tuple[str, list[int]]:
    """Parse "nt=2..8" or "nt=2,4,6" (or a single "nt=4")."""
    try:
        name, _, spec = text.partition("=")
        name = name.strip()
        if name not in SWEEPABLE:
            raise ValueError(f"unknown sweep parameter {name!r}; "
                             f"choose from {sorted(SWEEPABLE)}")
        spec = spec.strip()
        if ".." in spec:
            lo, hi = spec.split("..")
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [int(v) for v in spec.split(",")]
        if not values or any(v < 1 for v in values):
            raise ValueError("sweep values must be positive integers")
    except ValueError as err:
        raise argparse.ArgumentTypeError(
            f"malformed sweep {text!r}: {err}") from None
    return name, values


def _flatten_schemes(tokens: list[str]) -> list[str]:
    out = []
    for tok in tokens:
        out.extend(s for s in tok.split(",") if s)
    return out


def _load_or_default(path) -> tuple[SystemParams, ExperimentConfig]:
    if path is None:
        return SystemParams(), ExperimentConfig()
    return load_config(path)


def _apply_param_overrides(params: SystemParams, args) -> SystemParams:
    kw = {}
    if getattr(args, "delta", None) is not None:
        kw["delta"] = args.delta
    if getattr(args, "eta", None) is not None:
        kw["eta"] = args.eta
    if getattr(args, "iters", None) is not None:
        kw["reweight_iterations"] = args.iters
    return replace(params, **kw) if kw else params


# ------------------------------------------------------------------ run

def cmd_run(args) -> int:
    params, cfg = _load_or_default(args.config)
    params = _apply_param_overrides(params, args)
    kw = {}
    if args.seed is not None:
        kw["master_seed"] = args.seed
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.schemes is not None:
        kw["schemes"] = _flatten_schemes(args.schemes)
    if args.sweep is not None:
        kw["sweep_parameter"], kw["sweep_values"] = args.sweep
    if args.out is not None:
        kw["output_dir"] = args.out
    cfg = replace(cfg, **kw) if kw else cfg

    def progress(rec):
        logger.info("sweep %s trial %d %s: %s", rec.sweep_value, rec.trial_id,
                    rec.scheme, "ok" if rec.feasible else "unsolved")

    records, summaries = run_experiment(params, cfg, progress=progress)
    paths = emit_results(records, summaries, cfg.output_dir)

    print(f"{len(records)} records "
          f"({sum(r.feasible for r in records)} feasible)")
    print(f"{'scheme':>16} {'sweep':>5} {'used':>4} {'max link bh':>12} "
          f"{'tx power':>10}")
    for s in summaries:
        bh = f"{s.mean_max_link_backhaul:.4f}" \
            if np.isfinite(s.mean_max_link_backhaul) else "-"
        tx = f"{s.mean_tx_power_dbm:.2f} dBm" \
            if np.isfinite(s.mean_tx_power_dbm) else "-"
        print(f"{s.scheme:>16} {s.sweep_value:>5} {s.n_used:>4} {bh:>12} "
              f"{tx:>10}")
    for p in paths:
        print(f"wrote {p}")
    return 0


# ------------------------------------------------------- validate-config

def cmd_validate_config(args) -> int:
    params, cfg = _load_or_default(args.config)
    source = args.config if args.config is not None else "built-in defaults"
    print(f"# resolved from {source}")
    for key, value in system_params_to_dict(params).items():
        print(f"{key}: {value}")
    if params.path_loss_ref_db is None:
        print(f"# reference loss defaults to free-space: "
              f"{params.reference_loss_db():.2f} dB")
    print("experiment:")
    print(f"  schemes: [{', '.join(cfg.schemes)}]")
    print(f"  sweep_parameter: {cfg.sweep_parameter}")
    print(f"  sweep_values: {cfg.sweep_values}")
    print(f"  trials: {cfg.trials}")
    print(f"  master_seed: {cfg.master_seed}")
    print(f"  output_dir: {cfg.output_dir}")
    print(f"  solve_tol: {cfg.solve_tol}")
    print(f"  enumeration_cap: {cfg.enumeration_cap}")
    return 0


# ------------------------------------------------------------ solve-one

def _worst_margin(margins) -> tuple[str, float]:
    worst_name, worst = "", np.inf
    for name in ("c1_margin", "c2_margin", "c3_margin",
                 "c4_margin", "c5_margin", "c6_margin"):
        vals = np.atleast_1d(getattr(margins, name))
        if vals.size and float(np.min(vals)) < worst:
            worst = float(np.min(vals))
            worst_name = name[:2]
    return worst_name, worst


def _print_report(rep, params: SystemParams) -> None:
    def arr(a, fmt="{:.4f}"):
        return "[" + ", ".join(fmt.format(float(v)) for v in np.atleast_1d(a)) + "]"

    print(f"solver status      {rep.solver_status} "
          f"({rep.solver_iterations} iterations, gap {rep.gap_rel:.2e})")
    print(f"objective          {rep.objective:.6f}   "
          f"(delta {params.delta} * max link + eta {params.eta} * power)")
    print(f"max link backhaul  {rep.max_link_backhaul:.4f} bit/s/Hz")
    print(f"total backhaul     {rep.total_backhaul:.4f} bit/s/Hz")
    print(f"per-link backhaul  {arr(rep.backhaul_per_link)}")
    print(f"tx power           {rep.tx_power_mw:.3f} mW "
          f"({float(mw_to_dbm(rep.tx_power_mw)):.2f} dBm)")
    print(f"supplies           {arr(rep.supplies, '{:.3f}')} mW")
    if rep.harvested.size:
        print(f"harvested          {arr(rep.harvested, '{:.4f}')} mW")
    print(f"sinr               {arr(10 * np.log10(rep.sinr), '{:.2f}')} dB")
    print(f"rank ratios        {arr(rep.rank_ratios, '{:.2e}')}")
    name, val = _worst_margin(rep.margins)
    print(f"feasible           {'yes' if rep.feasible else 'NO'} "
          f"(worst margin {name} = {val:+.3e} mW)")


def cmd_solve_one(args) -> int:
    params, cfg = _load_or_default(args.config)
    params = _apply_param_overrides(params, args)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0]))
    topo = build_topology(params, rng)
    ch = sample_channels(topo, params, rng)

    trace = None
    if args.scheme == "proposed":
        rep, trace = run_reweighted(ch, params, tol=cfg.solve_tol)
    elif args.scheme == "proposed-10-iter":
        rep, trace = run_reweighted(ch, replace(params, reweight_iterations=10),
                                    tol=cfg.solve_tol)
    elif args.scheme == "full-coop":
        rep = full_cooperation(ch, params, tol=cfg.solve_tol)
    elif args.scheme == "colocated":
        rep = colocated_system(topo, params,
                               np.random.default_rng(
                                   np.random.SeedSequence([args.seed, 1])),
                               tol=cfg.solve_tol)
    else:
        res = exhaustive_search(ch, params, enumeration_cap=cfg.enumeration_cap,
                                tol=cfg.solve_tol,
                                keep_table=args.mask_table)
        rep = res.report
        if args.mask_table:
            print(f"{res.n_assignments} assignments "
                  f"(winner rows marked *, bits are RRH activations per IR)")
            win = res.mask.active
            for row in res.table:
                bits = " ".join("".join("1" if a else "0" for a in user_row)
                                for user_row in row.active)
                mark = "*" if np.array_equal(row.active, win) else " "
                obj = f"{row.objective:.4f}" if np.isfinite(row.objective) \
                    else "-"
                tx = f"{row.tx_power_mw:10.3f}" if np.isfinite(row.tx_power_mw) \
                    else "         -"
                print(f" {mark} {bits}  {row.status:>10} {tx} mW  obj {obj}")
        print(f"searched {res.n_assignments} assignments")

    print(f"scheme             {args.scheme}  (seed {args.seed})")
    _print_report(rep, params)
    if trace is not None:
        print(f"reweighting trace  ({len(trace)} rounds)")
        for i, e in enumerate(trace):
            print(f"  round {i:2d}: max link {e.max_link_backhaul:7.4f}  "
                  f"total {e.total_backhaul:8.4f}  tx {e.tx_power_mw:10.3f} mW  "
                  f"surrogate {e.surrogate_objective:12.6f}  "
                  f"[{e.solver_status}]")
    if args.report is not None:
        dump_report(rep, args.report)
        print(f"wrote {args.report}")
    return 0


# ------------------------------------------------------------- selftest

def _check_lp_vertex():
    pb = ProgramBuilder()
    x1 = pb.add_block("x1", 1)
    x2 = pb.add_block("x2", 1)
    pb.add_objective(x1, np.array([[1.0]]))
    pb.add_objective(x2, np.array([[2.0]]))
    pb.add_constraint("sum", {x1: np.array([[1.0]]), x2: np.array([[1.0]])}, 1.0)
    sol = solve(pb.build(), tol=1e-10)
    assert sol.status is SolveStatus.OPTIMAL, sol.status.value
    assert abs(sol.primal_objective - 1.0) < 1e-8, sol.primal_objective
    assert abs(sol.x[x1][0, 0] - 1.0) < 1e-6


def _check_unit_trace_feasibility():
    pb = ProgramBuilder()
    w = pb.add_block("W", 2)
    pb.add_constraint("trace", {w: np.eye(2)}, 1.0)
    sol = solve(pb.build(), tol=1e-10)
    assert sol.status is SolveStatus.OPTIMAL, sol.status.value
    assert abs(np.trace(sol.x[w]) - 1.0) < 1e-8
    assert np.linalg.eigvalsh(sol.x[w]).min() > -1e-9


def _check_min_eigenvalue():
    c = np.array([[2.0, 1.0], [1.0, 3.0]])
    pb = ProgramBuilder()
    w = pb.add_block("W", 2)
    pb.add_objective(w, c)
    pb.add_constraint("trace", {w: np.eye(2)}, 1.0)
    sol = solve(pb.build(), tol=1e-10)
    want = np.linalg.eigvalsh(c).min()
    assert sol.status is SolveStatus.OPTIMAL, sol.status.value
    assert abs(sol.primal_objective - want) < 1e-8, sol.primal_objective


def _check_infeasible_certificate():
    pb = ProgramBuilder()
    x = pb.add_block("x", 1)
    pb.add_constraint("neg", {x: np.array([[1.0]])}, -1.0)
    sol = solve(pb.build(), tol=1e-10)
    assert sol.status is SolveStatus.INFEASIBLE, sol.status.value


def _check_unbounded_certificate():
    pb = ProgramBuilder()
    x1 = pb.add_block("x1", 1)
    x2 = pb.add_block("x2", 1)
    pb.add_objective(x1, np.array([[-1.0]]))
    pb.add_constraint("tie", {x1: np.array([[1.0]]),
                              x2: np.array([[-1.0]])}, 0.0)
    sol = solve(pb.build(), tol=1e-10)
    assert sol.status is SolveStatus.UNBOUNDED, sol.status.value


def _check_single_receiver_power():
    # budgets sized to the ~10 mW solution so unit normalization stays benign
    params = SystemParams(n_rrh=1, n_ir=1, n_er=0, n_t=2, delta=0.0, eta=1.0,
                          rrh_max_tx_mw=np.inf, noise_mw=1.0,
                          cp_max_supply_mw=100.0, cp_circuit_mw=10.0,
                          rrh_circuit_mw=1.0)
    rng = np.random.default_rng(2024)
    h = (rng.normal(size=(1, 2)) + 1j * rng.normal(size=(1, 2))) / np.sqrt(2)
    from .network import ChannelSet
    ch = ChannelSet(h=h, g=np.zeros((0, 2), dtype=complex), n_rrh=1, n_t=2)
    built = build_sdp(ch, params)
    sol = solve(built.program, tol=1e-10)
    assert sol.status is SolveStatus.OPTIMAL, sol.status.value
    ext = extract_beamformers(built, sol)
    want = float(params.sinr_target[0]) * params.noise_mw \
        / float(np.linalg.norm(h) ** 2)
    got = built.p_unit * sol.primal_objective
    assert abs(got - want) < 1e-6 * want, (got, want)
    assert float(ext.ratios.max()) <= 1e-6, ext.ratios


def _check_backhaul_floor_constants():
    b = lower_bounds(SystemParams(n_ir=5, n_rrh=3))
    assert abs(b.per_link - 10.0558) < 1e-3, b.per_link
    assert abs(b.total - 25.1396) < 1e-3, b.total


_SELFTEST_CHECKS = [
    ("lp vertex optimum", _check_lp_vertex),
    ("psd unit-trace feasibility", _check_unit_trace_feasibility),
    ("psd minimum-eigenvalue optimum", _check_min_eigenvalue),
    ("infeasibility certificate", _check_infeasible_certificate),
    ("unbounded certificate", _check_unbounded_certificate),
    ("single-receiver closed-form power", _check_single_receiver_power),
    ("backhaul floor constants", _check_backhaul_floor_constants),
]


def cmd_selftest(args) -> int:
    failures = 0
    for name, check in _SELFTEST_CHECKS:
        try:
            check()
        except AssertionError as err:
            failures += 1
            print(f"FAIL {name}: {err}")
        else:
            print(f"PASS {name}")
    print(f"{len(_SELFTEST_CHECKS) - failures}/{len(_SELFTEST_CHECKS)} "
          f"checks passed")
    return 1 if failures else 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="comp-swipt",
        description="Sparse beamforming with wireless power transfer: "
                    "experiment runner and diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a Monte Carlo sweep")
    run_p.add_argument("--config", help="YAML config (defaults built in)")
    run_p.add_argument("--seed", type=int, help="master seed override")
    run_p.add_argument("--trials", type=int, help="trials per sweep point")
    run_p.add_argument("--schemes", nargs="+", metavar="SCHEME",
                       help=f"schemes to run (known: {', '.join(KNOWN_SCHEMES)}; "
                            "comma- or space-separated)")
    run_p.add_argument("--sweep", type=parse_sweep, metavar="PARAM=SPEC",
                       help='e.g. "nt=2..8" or "nt=2,4,6"')
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--delta", type=float, help="backhaul weight override")
    run_p.add_argument("--eta", type=float, help="power weight override")
    run_p.add_argument("--iters", type=int,
                       help="reweighting iteration override")
    run_p.set_defaults(func=cmd_run)

    val_p = sub.add_parser("validate-config",
                           help="load a config and print the resolved values")
    val_p.add_argument("config", nargs="?",
                       help="YAML config path (omit for built-in defaults)")
    val_p.set_defaults(func=cmd_validate_config)

    one_p = sub.add_parser("solve-one",
                           help="solve a single seeded channel realization")
    one_p.add_argument("--config", help="YAML config (defaults built in)")
    one_p.add_argument("--seed", type=int, default=0)
    one_p.add_argument("--scheme", default="proposed", choices=KNOWN_SCHEMES)
    one_p.add_argument("--mask-table", action="store_true",
                       help="with --scheme exhaustive: print every assignment")
    one_p.add_argument("--report", metavar="PATH",
                       help="also write the report as JSON")
    one_p.add_argument("--delta", type=float)
    one_p.add_argument("--eta", type=float)
    one_p.add_argument("--iters", type=int)
    one_p.set_defaults(func=cmd_solve_one)

    self_p = sub.add_parser("selftest",
                            help="run analytic solver checks")
    self_p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("COMP_SWIPT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleInstanceError, SolverBreakdownError,
            EnumerationCapError, OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
