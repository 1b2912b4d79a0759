"""Monte Carlo experiment driver: sweeps, schemes, metrics files.

One experiment is a grid of (sweep value, trial) cells. Per cell the driver
derives a child generator from ``SeedSequence([master_seed, sweep_value,
trial, 0])``, draws a topology (user positions re-sampled every trial, RRH
ring fixed by the geometry parameters) and one fading realization, then runs
every requested scheme on that same realization. The co-located scheme gets
its own stream (``[..., trial, 1]``) because it must redraw fading for the
pooled-antenna geometry; this keeps every draw independent of which other
schemes are enabled. Records therefore depend only on (master seed, config),
which is the reproducibility contract: two runs emit identical bytes except
for the wall-clock column.

Output schema (results.csv header, one row per scheme run; results.jsonl
mirrors it with nulls for unavailable values):

    trial_id            0-based trial index within the sweep point
    scheme              proposed | proposed-10-iter | full-coop |
                        exhaustive | colocated
    sweep_value         the swept parameter's value for this cell
    max_link_backhaul   bit/s/Hz, from the solved beams
    total_backhaul      bit/s/Hz
    tx_power_mw         total radiated power
    tx_power_dbm        10*log10 of the mW column
    harvested_power_mw  summed over ERs
    harvested_power_dbm 10*log10 of the mW column
    feasible            "true" iff solved and all constraint margins pass
    rank_failure        "true" iff any extracted block failed the rank test
    wall_clock_ms       scheme runtime (excluded from determinism claims)

Instances the solver certifies infeasible (and scheme runs that break down
numerically, which are logged) produce a row with nan metrics and
feasible=false; they are excluded from summary means and counted in the
summary's n_excluded column. summary.csv has one row per (scheme, sweep
value) with means, 95% normal-approximation confidence half-widths, and the
analytic backhaul lower bounds for overlay plotting; dBm aggregates convert
the mean of the mW column, not the mean of per-trial dBm values.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from math import sqrt
from pathlib import Path

import numpy as np
import yaml

from .baselines import (AssignmentEnumeration, colocated_system,
                        exhaustive_search, full_cooperation)
from .network import build_topology, sample_channels
from .params import SystemParams, system_params_from_dict
from .reweighted import (InfeasibleInstanceError, SolverBreakdownError,
                         lower_bounds, run)
from .units import mw_to_dbm

__all__ = [
    "ExperimentConfig",
    "MetricsRecord",
    "SummaryRow",
    "load_config",
    "swept_params",
    "run_experiment",
    "summarize",
    "emit_results",
    "read_results_csv",
    "stable_csv_bytes",
    "KNOWN_SCHEMES",
    "SWEEPABLE",
]

logger = logging.getLogger("comp_swipt.harness")

KNOWN_SCHEMES = ("proposed", "proposed-10-iter", "full-coop", "exhaustive",
                 "colocated")
SWEEPABLE = {"nt": "n_t", "rrh_count": "n_rrh", "ir_count": "n_ir",
             "er_count": "n_er"}

_CSV_COLUMNS = ["trial_id", "scheme", "sweep_value", "max_link_backhaul",
                "total_backhaul", "tx_power_mw", "tx_power_dbm",
                "harvested_power_mw", "harvested_power_dbm", "feasible",
                "rank_failure", "wall_clock_ms"]

_SUMMARY_COLUMNS = ["scheme", "sweep_value", "n_records", "n_used",
                    "n_excluded", "mean_max_link_backhaul",
                    "ci_max_link_backhaul", "mean_total_backhaul",
                    "ci_total_backhaul", "mean_tx_power_mw", "ci_tx_power_mw",
                    "mean_tx_power_dbm", "mean_harvested_power_mw",
                    "ci_harvested_power_mw", "mean_harvested_power_dbm",
                    "bound_per_link", "bound_total"]


@dataclass
class ExperimentConfig:
    """Everything about an experiment that is not a physical-layer constant."""

    schemes: list[str] = field(
        default_factory=lambda: ["proposed", "full-coop", "colocated"])
    sweep_parameter: str = "nt"
    sweep_values: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6])
    trials: int = 50
    master_seed: int = 1234
    output_dir: str = "results"
    solve_tol: float = 1e-10
    enumeration_cap: int = 100_000

    def __post_init__(self):
        if not self.schemes:
            raise ValueError("schemes must be non-empty")
        unknown = [s for s in self.schemes if s not in KNOWN_SCHEMES]
        if unknown:
            raise ValueError(
                f"unknown scheme(s) {unknown}; known: {list(KNOWN_SCHEMES)}")
        if self.sweep_parameter not in SWEEPABLE:
            raise ValueError(
                f"sweep parameter {self.sweep_parameter!r} not sweepable; "
                f"choose from {sorted(SWEEPABLE)}")
        vals = list(self.sweep_values)
        if not vals or any(int(v) != v or v < 1 for v in vals):
            raise ValueError("sweep_values must be positive integers")
        self.sweep_values = [int(v) for v in vals]
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        self.trials = int(self.trials)
        if int(self.master_seed) < 0:
            raise ValueError("master_seed must be nonnegative")
        self.master_seed = int(self.master_seed)
        if self.solve_tol <= 0:
            raise ValueError("solve_tol must be positive")

    @staticmethod
    def from_dict(cfg: dict) -> "ExperimentConfig":
        known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
        unknown = set(cfg) - known
        if unknown:
            raise KeyError(f"unknown experiment key(s): {sorted(unknown)}")
        return ExperimentConfig(**cfg)


@dataclass
class MetricsRecord:
    trial_id: int
    scheme: str
    sweep_value: int
    max_link_backhaul: float
    total_backhaul: float
    tx_power_mw: float
    tx_power_dbm: float
    harvested_power_mw: float
    harvested_power_dbm: float
    feasible: bool
    rank_failure: bool
    wall_clock_ms: float


@dataclass
class SummaryRow:
    scheme: str
    sweep_value: int
    n_records: int
    n_used: int
    n_excluded: int
    mean_max_link_backhaul: float
    ci_max_link_backhaul: float
    mean_total_backhaul: float
    ci_total_backhaul: float
    mean_tx_power_mw: float
    ci_tx_power_mw: float
    mean_tx_power_dbm: float
    mean_harvested_power_mw: float
    ci_harvested_power_mw: float
    mean_harvested_power_dbm: float
    bound_per_link: float
    bound_total: float


def load_config(path) -> tuple[SystemParams, ExperimentConfig]:
    """One YAML file holds the flat physical-layer keys plus an optional
    ``experiment:`` section; either half may be omitted for defaults."""
    with open(path) as f:
        doc = yaml.safe_load(f) or {}
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a mapping")
    exp = doc.pop("experiment", None) or {}
    return system_params_from_dict(doc), ExperimentConfig.from_dict(exp)


def _uniform_scalar(arr: np.ndarray, name: str) -> float:
    if arr.size and not np.all(arr == arr[0]):
        raise ValueError(f"cannot sweep entity counts with non-uniform {name}")
    return float(arr[0]) if arr.size else 0.0


def swept_params(base: SystemParams, parameter: str, value: int) -> SystemParams:
    """Copy of ``base`` with one swept count replaced.

    Count sweeps require the per-entity arrays to be uniform so they can be
    re-broadcast to the new length (sweeping er_count up from zero gives the
    new ERs a zero harvest floor, since there is no per-ER value to copy).
    """
    fname = SWEEPABLE[parameter]
    kw: dict = {fname: int(value)}
    if fname == "n_rrh":
        kw["rrh_circuit_mw"] = _uniform_scalar(base.rrh_circuit_mw,
                                               "rrh_circuit_mw")
        kw["rrh_max_tx_mw"] = _uniform_scalar(base.rrh_max_tx_mw,
                                              "rrh_max_tx_mw")
    elif fname == "n_ir":
        kw["sinr_target"] = _uniform_scalar(base.sinr_target, "sinr_target")
    elif fname == "n_er":
        kw["min_harvest_mw"] = _uniform_scalar(base.min_harvest_mw,
                                               "min_harvest_mw")
    return replace(base, **kw)


def _dbm(mw: float) -> float:
    with np.errstate(divide="ignore"):
        return float(mw_to_dbm(mw))


def record_from_report(report, trial_id: int, scheme: str, sweep_value: int,
                       wall_clock_ms: float) -> MetricsRecord:
    harvested = float(np.sum(report.harvested))
    return MetricsRecord(
        trial_id=trial_id, scheme=scheme, sweep_value=sweep_value,
        max_link_backhaul=float(report.max_link_backhaul),
        total_backhaul=float(report.total_backhaul),
        tx_power_mw=float(report.tx_power_mw),
        tx_power_dbm=_dbm(report.tx_power_mw),
        harvested_power_mw=harvested,
        harvested_power_dbm=_dbm(harvested),
        feasible=bool(report.feasible),
        rank_failure=bool(report.rank_failure),
        wall_clock_ms=wall_clock_ms)


def _unsolved_record(trial_id, scheme, sweep_value, wall_clock_ms):
    nan = float("nan")
    return MetricsRecord(trial_id, scheme, sweep_value, nan, nan, nan, nan,
                         nan, nan, False, False, wall_clock_ms)


def _run_scheme(scheme, topo, ch, params, cfg, sweep_value, trial):
    if scheme == "proposed":
        report, _ = run(ch, params, tol=cfg.solve_tol)
        return report
    if scheme == "proposed-10-iter":
        report, _ = run(ch, replace(params, reweight_iterations=10),
                        tol=cfg.solve_tol)
        return report
    if scheme == "full-coop":
        return full_cooperation(ch, params, tol=cfg.solve_tol)
    if scheme == "exhaustive":
        return exhaustive_search(ch, params, tol=cfg.solve_tol,
                                 enumeration_cap=cfg.enumeration_cap).report
    if scheme == "colocated":
        rng = np.random.default_rng(
            np.random.SeedSequence([cfg.master_seed, sweep_value, trial, 1]))
        return colocated_system(topo, params, rng, tol=cfg.solve_tol)
    raise ValueError(f"unknown scheme {scheme!r}")


def _enabled_schemes(cfg: ExperimentConfig, params: SystemParams) -> list[str]:
    schemes = list(cfg.schemes)
    if "exhaustive" in schemes:
        count = len(AssignmentEnumeration(params.n_ir, params.n_rrh))
        if count > cfg.enumeration_cap:
            logger.warning(
                "disabling exhaustive scheme: %d assignments exceed cap %d",
                count, cfg.enumeration_cap)
            schemes = [s for s in schemes if s != "exhaustive"]
    return schemes


def run_experiment(params: SystemParams, cfg: ExperimentConfig,
                   progress=None) -> tuple[list[MetricsRecord], list[SummaryRow]]:
    """Run the full sweep grid; never aborts on per-trial solver trouble."""
    records: list[MetricsRecord] = []
    bounds = {}
    for sweep_value in cfg.sweep_values:
        p_sw = swept_params(params, cfg.sweep_parameter, sweep_value)
        bounds[sweep_value] = lower_bounds(p_sw)
        schemes = _enabled_schemes(cfg, p_sw)
        for trial in range(cfg.trials):
            rng = np.random.default_rng(np.random.SeedSequence(
                [cfg.master_seed, sweep_value, trial, 0]))
            topo = build_topology(p_sw, rng)
            ch = sample_channels(topo, p_sw, rng)
            for scheme in schemes:
                t0 = time.perf_counter()
                try:
                    report = _run_scheme(scheme, topo, ch, p_sw, cfg,
                                         sweep_value, trial)
                    wall = (time.perf_counter() - t0) * 1e3
                    rec = record_from_report(report, trial, scheme,
                                             sweep_value, wall)
                except InfeasibleInstanceError:
                    wall = (time.perf_counter() - t0) * 1e3
                    rec = _unsolved_record(trial, scheme, sweep_value, wall)
                except SolverBreakdownError as err:
                    wall = (time.perf_counter() - t0) * 1e3
                    logger.warning("scheme %s sweep %s trial %d broke down: %s",
                                   scheme, sweep_value, trial, err)
                    rec = _unsolved_record(trial, scheme, sweep_value, wall)
                records.append(rec)
                if progress is not None:
                    progress(rec)
    return records, summarize(records, bounds)


def summarize(records: list[MetricsRecord], bounds: dict) -> list[SummaryRow]:
    """Per-(scheme, sweep) means over feasible records, with 95% normal CIs.

    ``bounds`` maps sweep value to the BackhaulBounds of the swept params.
    Rows come out sorted by (scheme, sweep value). A cell with no usable
    record keeps its row with nan means so the grid shape is preserved.
    """
    cells = sorted({(r.scheme, r.sweep_value) for r in records})
    rows = []
    for scheme, sweep_value in cells:
        cell = [r for r in records if r.scheme == scheme
                and r.sweep_value == sweep_value]
        used = [r for r in cell if r.feasible]

        def stats(pull):
            vals = np.array([pull(r) for r in used], dtype=float)
            if vals.size == 0:
                return float("nan"), float("nan")
            mean = float(vals.mean())
            if vals.size == 1:
                return mean, float("nan")
            return mean, float(1.96 * vals.std(ddof=1) / sqrt(vals.size))

        m_bh, ci_bh = stats(lambda r: r.max_link_backhaul)
        m_tot, ci_tot = stats(lambda r: r.total_backhaul)
        m_tx, ci_tx = stats(lambda r: r.tx_power_mw)
        m_h, ci_h = stats(lambda r: r.harvested_power_mw)
        b = bounds[sweep_value]
        rows.append(SummaryRow(
            scheme=scheme, sweep_value=sweep_value, n_records=len(cell),
            n_used=len(used), n_excluded=len(cell) - len(used),
            mean_max_link_backhaul=m_bh, ci_max_link_backhaul=ci_bh,
            mean_total_backhaul=m_tot, ci_total_backhaul=ci_tot,
            mean_tx_power_mw=m_tx, ci_tx_power_mw=ci_tx,
            mean_tx_power_dbm=_dbm(m_tx) if np.isfinite(m_tx) else float("nan"),
            mean_harvested_power_mw=m_h, ci_harvested_power_mw=ci_h,
            mean_harvested_power_dbm=(_dbm(m_h) if np.isfinite(m_h)
                                      else float("nan")),
            bound_per_link=float(b.per_link), bound_total=float(b.total)))
    return rows


# --------------------------------------------------------------- emission

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))  # plain-float repr even for numpy scalars
    return str(v)


def emit_results(records: list[MetricsRecord], summaries: list[SummaryRow],
                 out_dir, formats=("csv", "jsonl")) -> list[Path]:
    """Write results.{csv,jsonl} (per ``formats``) and summary.csv.

    Floats are written with shortest round-trip repr, so files are
    byte-reproducible and parse back to identical IEEE-754 values.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.touch()
        probe.unlink()
    except OSError as err:
        raise OSError(f"output path {out} is not writable: {err}") from err

    written = []
    if "csv" in formats:
        path = out / "results.csv"
        with open(path, "w", newline="\n") as f:
            f.write(",".join(_CSV_COLUMNS) + "\n")
            for r in records:
                f.write(",".join(_fmt(getattr(r, c)) for c in _CSV_COLUMNS)
                        + "\n")
        written.append(path)
    if "jsonl" in formats:
        path = out / "results.jsonl"
        with open(path, "w", newline="\n") as f:
            for r in records:
                doc = {c: getattr(r, c) for c in _CSV_COLUMNS}
                for key, val in doc.items():
                    if isinstance(val, float) and not np.isfinite(val):
                        doc[key] = None
                f.write(json.dumps(doc) + "\n")
        written.append(path)

    path = out / "summary.csv"
    with open(path, "w", newline="\n") as f:
        f.write(",".join(_SUMMARY_COLUMNS) + "\n")
        for s in summaries:
            f.write(",".join(_fmt(getattr(s, c)) for c in _SUMMARY_COLUMNS)
                    + "\n")
    written.append(path)
    return written


def read_results_csv(path) -> list[MetricsRecord]:
    """Parse results.csv back into records (exact float round trip)."""
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header != _CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected results header {header}")
        out = []
        for line in f:
            vals = line.strip().split(",")
            row = dict(zip(_CSV_COLUMNS, vals))
            out.append(MetricsRecord(
                trial_id=int(row["trial_id"]),
                scheme=row["scheme"],
                sweep_value=int(row["sweep_value"]),
                max_link_backhaul=float(row["max_link_backhaul"]),
                total_backhaul=float(row["total_backhaul"]),
                tx_power_mw=float(row["tx_power_mw"]),
                tx_power_dbm=float(row["tx_power_dbm"]),
                harvested_power_mw=float(row["harvested_power_mw"]),
                harvested_power_dbm=float(row["harvested_power_dbm"]),
                feasible=row["feasible"] == "true",
                rank_failure=row["rank_failure"] == "true",
                wall_clock_ms=float(row["wall_clock_ms"])))
    return out


def stable_csv_bytes(path) -> bytes:
    """results.csv content with the wall-clock column removed, for
    comparing two runs byte for byte (wall clock is the one column the
    determinism contract excludes)."""
    lines = Path(path).read_bytes().splitlines()
    return b"\n".join(line.rsplit(b",", 1)[0] for line in lines) + b"\n"
