"""Reference allocation schemes the proposed method is compared against.

Three schemes share one building block, a pure power-minimization solve
(delta = 0, eta = 1) of the relaxed SDP under a fixed activation pattern:

* exhaustive_search enumerates every assignment of a nonempty RRH subset to
  each IR, solves the masked power minimization per assignment, and selects
  the winner under the caller's objective weights. With the pattern fixed
  the backhaul term is a constant determined by the mask, so the per-mask
  subproblem is exact and no bilevel solve is needed.
* full_cooperation solves once with every slice allowed and unit weights;
  generically all beamformer slices come back active and every link carries
  the sum of the per-IR rates.
* colocated_system replays the scenario with all antennas pooled in one
  virtual RRH at the centroid of the original RRH sites (fresh fading, same
  user positions), with the radiated-power cap lifted; the single fronthaul
  link then carries every stream.

Selection ties in the exhaustive search are resolved in a fixed order:
objective, then total backhaul, then transmit power, each compared at 1e-9
relative (with a unit absolute floor); anything still tied keeps the
earliest assignment in enumeration order, so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .coneprog import SolveStatus
from .network import ChannelSet, Topology, sample_channels
from .params import SystemParams
from .report import SolutionReport, make_report
from .reweighted import InfeasibleInstanceError, SolverBreakdownError
from .sdp import ActivationMask, build_sdp, extract_beamformers
from .solver import solve

__all__ = [
    "AssignmentEnumeration",
    "EnumerationCapError",
    "MaskOutcome",
    "ExhaustiveResult",
    "assignment_backhaul",
    "exhaustive_search",
    "full_cooperation",
    "colocated_system",
]

_TIE_REL = 1e-9


class EnumerationCapError(RuntimeError):
    """The assignment space is larger than the configured enumeration cap."""


@dataclass
class AssignmentEnumeration:
    """All (2^L - 1)^K ways to give each IR a nonempty set of serving RRHs.

    Iteration order is lexicographic over per-IR subset bitmasks (bit l of
    the mask selects RRH l), with IR 0 varying slowest. The order is part
    of the contract: it is the final tie-breaker of the exhaustive search.
    """

    n_ir: int
    n_rrh: int

    def __len__(self) -> int:
        return (2 ** self.n_rrh - 1) ** self.n_ir

    def __iter__(self):
        subsets = [np.array([(bits >> l) & 1 for l in range(self.n_rrh)],
                            dtype=bool)
                   for bits in range(1, 2 ** self.n_rrh)]
        for combo in product(subsets, repeat=self.n_ir):
            yield ActivationMask(active=np.stack(combo))


def assignment_backhaul(mask: ActivationMask, params: SystemParams) -> np.ndarray:
    """Per-link backhaul implied by an assignment: each active (k, l) pair
    puts IR k's full rate on link l, regardless of how much power the solved
    beams actually place there."""
    return mask.active.T.astype(float) @ params.rate_per_ir


@dataclass
class MaskOutcome:
    """One row of the exhaustive search's per-assignment summary."""

    active: np.ndarray            # (K, L) assignment evaluated
    status: str                   # solver status for its power minimization
    tx_power_mw: float            # nan unless optimal
    backhaul_per_link: np.ndarray  # mask-determined, defined for every row
    objective: float              # caller-weighted; nan unless optimal


@dataclass
class ExhaustiveResult:
    report: SolutionReport
    mask: ActivationMask
    n_assignments: int
    table: list[MaskOutcome] | None


def _min_power_solve(ch: ChannelSet, params: SystemParams,
                     mask: ActivationMask | None, tol: float):
    sub = replace(params, delta=0.0, eta=1.0)
    built = build_sdp(ch, sub, mask=mask)
    return built, solve(built.program, tol=tol), sub


def _strictly_better(cand: tuple, incumbent: tuple) -> bool:
    for a, b in zip(cand, incumbent):
        scale = max(1.0, abs(a), abs(b))
        if a < b - _TIE_REL * scale:
            return True
        if a > b + _TIE_REL * scale:
            return False
    return False


def exhaustive_search(ch: ChannelSet, params: SystemParams, *,
                      enumeration_cap: int = 100_000, tol: float = 1e-10,
                      keep_table: bool = False) -> ExhaustiveResult:
    """Solve the assignment problem exactly by enumeration.

    Every assignment gets a power-minimization solve; the winner minimizes
    the caller's objective evaluated with the mask-determined backhaul and
    the solved transmit power, with ties broken by total backhaul, then
    power, then enumeration order. The winner's report is scored from its
    extracted beams like any other solution, so its backhaul entries can
    sit below the mask's whenever the optimizer left an allowed slice dark.

    Raises EnumerationCapError before solving anything if the assignment
    count exceeds ``enumeration_cap``, and InfeasibleInstanceError if every
    assignment is certified infeasible (equivalently: the full-cooperation
    set is infeasible, since it contains every other one).
    """
    enum = AssignmentEnumeration(n_ir=params.n_ir, n_rrh=params.n_rrh)
    count = len(enum)
    if count > enumeration_cap:
        raise EnumerationCapError(
            f"(2^{params.n_rrh} - 1)^{params.n_ir} = {count} assignments "
            f"exceed enumeration cap {enumeration_cap}")

    table: list[MaskOutcome] = []
    best_keys = None
    best = None
    n_failed = 0
    for mask in enum:
        built, sol, _ = _min_power_solve(ch, params, mask, tol)
        per_link = assignment_backhaul(mask, params)
        if sol.status is not SolveStatus.OPTIMAL:
            if sol.status is not SolveStatus.INFEASIBLE:
                n_failed += 1
            if keep_table:
                table.append(MaskOutcome(mask.active.copy(), sol.status.value,
                                         float("nan"), per_link, float("nan")))
            continue
        ext = extract_beamformers(built, sol)
        power = ext.beams.total_power()
        objective = params.delta * float(per_link.max()) + params.eta * power
        if keep_table:
            table.append(MaskOutcome(mask.active.copy(), sol.status.value,
                                     power, per_link, objective))
        keys = (objective, float(per_link.sum()), power)
        if best_keys is None or _strictly_better(keys, best_keys):
            best_keys = keys
            best = (built, sol, ext, mask)

    if best is None:
        if n_failed:
            raise SolverBreakdownError(
                f"{n_failed} of {count} assignment subproblems failed "
                f"numerically and none solved")
        raise InfeasibleInstanceError(
            f"all {count} RRH assignments are infeasible for "
            f"{params.n_ir} IRs on {params.n_rrh} RRHs")

    built, sol, ext, mask = best
    report = make_report(built, sol, ext, ch, params)
    return ExhaustiveResult(report=report, mask=mask, n_assignments=count,
                            table=table if keep_table else None)


def full_cooperation(ch: ChannelSet, params: SystemParams,
                     tol: float = 1e-10) -> SolutionReport:
    """Minimum total transmit power with every RRH serving every IR.

    The report is scored with delta = 0, eta = 1, so its objective equals
    the transmit power; backhaul columns still reflect the (generically
    dense) beams. This is also the cheapest feasibility probe: its feasible
    set contains that of every masked variant.
    """
    built, sol, sub = _min_power_solve(ch, params, None, tol)
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleInstanceError(
            "full-cooperation power minimization is infeasible: " + sol.message)
    if sol.status is not SolveStatus.OPTIMAL:
        raise SolverBreakdownError(
            f"full-cooperation solve ended {sol.status.value}: {sol.message}")
    ext = extract_beamformers(built, sol)
    return make_report(built, sol, ext, ch, sub)


def colocated_system(topo: Topology, params: SystemParams,
                     rng: np.random.Generator,
                     tol: float = 1e-10) -> SolutionReport:
    """Pool all antennas in one virtual RRH at the centroid of the sites.

    User positions are kept; fading is redrawn from ``rng`` because the
    propagation geometry changes, so comparisons against the distributed
    schemes are distribution-level, not realization-level. The virtual site
    has L * N_T antennas, no radiated-power cap, and the largest per-site
    circuit power; the lone fronthaul link carries every stream.
    """
    virtual = replace(params, n_rrh=1, n_t=params.n_rrh * params.n_t,
                      rrh_max_tx_mw=np.inf,
                      rrh_circuit_mw=float(np.max(params.rrh_circuit_mw)),
                      delta=0.0, eta=1.0)
    center = topo.rrh_xy.mean(axis=0)
    vtopo = Topology(rrh_xy=center[None, :], ir_xy=topo.ir_xy,
                     er_xy=topo.er_xy, disc_radius_m=topo.disc_radius_m,
                     rrh_spacing_m=topo.rrh_spacing_m)
    vch = sample_channels(vtopo, virtual, rng)
    built = build_sdp(vch, virtual)
    sol = solve(built.program, tol=tol)
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleInstanceError(
            "co-located power minimization is infeasible: " + sol.message)
    if sol.status is not SolveStatus.OPTIMAL:
        raise SolverBreakdownError(
            f"co-located solve ended {sol.status.value}: {sol.message}")
    ext = extract_beamformers(built, sol)
    return make_report(built, sol, ext, vch, virtual)
