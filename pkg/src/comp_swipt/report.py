"""Per-trial solution record and its on-disk form.

A SolutionReport collects everything the harness wants to know about one
solved instance: the beamformers, the metrics recomputed from them, the
constraint margins, and solver diagnostics. Records serialize to JSON with
a fixed schema so runs can be archived one file per trial and reloaded:

    schema        "comp-swipt-report-1"
    n_rrh, n_t, n_ir, n_er          geometry
    w_re, w_im                      beamformer rows, RRH-major
    supplies_mw, phi                provisioned line power and epigraph value
    sinr, harvested_mw              receiver-side metrics
    backhaul_per_link, max_link_backhaul, total_backhaul
    tx_power_mw, objective, surrogate_objective
    rank_ratios, rank_failure, feasible
    margins                         c1..c6 signed margins (mW)
    solver_status, solver_iterations, gap_rel

All numbers are plain JSON floats; complex beamformers are split into real
and imaginary parts. Loading rebuilds the arrays but not the channel data,
which lives with the experiment inputs, not the result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .beams import (BeamformerSet, FeasibilityReport, check_feasibility,
                    compute_backhaul, compute_harvested, compute_sinr,
                    evaluate_objective)
from .coneprog import ConeSolution
from .network import ChannelSet
from .params import SystemParams
from .sdp import BuiltSdp, Extraction

__all__ = ["SolutionReport", "make_report", "dump_report", "load_report"]

_SCHEMA = "comp-swipt-report-1"


@dataclass
class SolutionReport:
    beams: BeamformerSet
    supplies: np.ndarray
    phi: float
    sinr: np.ndarray
    harvested: np.ndarray
    backhaul_per_link: np.ndarray
    max_link_backhaul: float
    total_backhaul: float
    tx_power_mw: float
    objective: float             # delta * max-link + eta * transmit power
    surrogate_objective: float   # the SDP's phi + eta * sum Tr(W_k)
    rank_ratios: np.ndarray
    rank_failure: bool
    feasible: bool
    margins: FeasibilityReport
    solver_status: str
    solver_iterations: int
    gap_rel: float


def make_report(built: BuiltSdp, sol: ConeSolution, ext: Extraction,
                ch: ChannelSet, params: SystemParams,
                feas_tol: float = 1e-6) -> SolutionReport:
    """Score an extracted solution; every metric is recomputed from beams."""
    bh = compute_backhaul(ext.beams, params)
    margins = check_feasibility(ext.beams, ext.supplies, ch, params,
                                tol=feas_tol)
    return SolutionReport(
        beams=ext.beams,
        supplies=ext.supplies,
        phi=ext.phi,
        sinr=compute_sinr(ext.beams, ch, params),
        harvested=compute_harvested(ext.beams, ch, params),
        backhaul_per_link=bh.per_link,
        max_link_backhaul=bh.max_link,
        total_backhaul=bh.total,
        tx_power_mw=ext.beams.total_power(),
        objective=evaluate_objective(ext.beams, params),
        surrogate_objective=built.p_unit * sol.primal_objective,
        rank_ratios=ext.ratios,
        rank_failure=bool(ext.rank_flags.any()),
        feasible=margins.all_ok,
        margins=margins,
        solver_status=sol.status.value,
        solver_iterations=sol.iterations,
        gap_rel=sol.gap_rel,
    )


def dump_report(report: SolutionReport, path) -> None:
    r = report
    doc = {
        "schema": _SCHEMA,
        "n_rrh": r.beams.n_rrh,
        "n_t": r.beams.n_t,
        "n_ir": r.beams.n_ir,
        "n_er": int(r.harvested.size),
        "w_re": r.beams.w.real.tolist(),
        "w_im": r.beams.w.imag.tolist(),
        "supplies_mw": r.supplies.tolist(),
        "phi": r.phi,
        "sinr": r.sinr.tolist(),
        "harvested_mw": r.harvested.tolist(),
        "backhaul_per_link": r.backhaul_per_link.tolist(),
        "max_link_backhaul": r.max_link_backhaul,
        "total_backhaul": r.total_backhaul,
        "tx_power_mw": r.tx_power_mw,
        "objective": r.objective,
        "surrogate_objective": r.surrogate_objective,
        "rank_ratios": r.rank_ratios.tolist(),
        "rank_failure": r.rank_failure,
        "feasible": r.feasible,
        "margins": {
            "c1": r.margins.c1_margin.tolist(),
            "c2": r.margins.c2_margin,
            "c3": r.margins.c3_margin.tolist(),
            "c4": r.margins.c4_margin.tolist(),
            "c5": r.margins.c5_margin.tolist(),
            "c6": r.margins.c6_margin.tolist(),
            "tol": r.margins.tol,
        },
        "solver_status": r.solver_status,
        "solver_iterations": r.solver_iterations,
        "gap_rel": r.gap_rel,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_report(path) -> SolutionReport:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != _SCHEMA:
        raise ValueError(f"unrecognized report schema {doc.get('schema')!r}")
    w = np.array(doc["w_re"], dtype=float) \
        + 1j * np.array(doc["w_im"], dtype=float)
    beams = BeamformerSet(w=w, n_rrh=doc["n_rrh"], n_t=doc["n_t"])
    m = doc["margins"]
    margins = FeasibilityReport(
        c1_margin=np.array(m["c1"]), c2_margin=float(m["c2"]),
        c3_margin=np.array(m["c3"]), c4_margin=np.array(m["c4"]),
        c5_margin=np.array(m["c5"]), c6_margin=np.array(m["c6"]),
        tol=float(m["tol"]))
    return SolutionReport(
        beams=beams,
        supplies=np.array(doc["supplies_mw"], dtype=float),
        phi=float(doc["phi"]),
        sinr=np.array(doc["sinr"], dtype=float),
        harvested=np.array(doc["harvested_mw"], dtype=float),
        backhaul_per_link=np.array(doc["backhaul_per_link"], dtype=float),
        max_link_backhaul=float(doc["max_link_backhaul"]),
        total_backhaul=float(doc["total_backhaul"]),
        tx_power_mw=float(doc["tx_power_mw"]),
        objective=float(doc["objective"]),
        surrogate_objective=float(doc["surrogate_objective"]),
        rank_ratios=np.array(doc["rank_ratios"], dtype=float),
        rank_failure=bool(doc["rank_failure"]),
        feasible=bool(doc["feasible"]),
        margins=margins,
        solver_status=str(doc["solver_status"]),
        solver_iterations=int(doc["solver_iterations"]),
        gap_rel=float(doc["gap_rel"]),
    )
