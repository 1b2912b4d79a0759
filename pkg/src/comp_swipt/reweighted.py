"""Reweighted l1-norm iteration for sparse multi-RRH beamforming.

The group-l0 backhaul cost is approximated by a weighted l2 surrogate and
tightened iteratively: solve the SDP under the current weights, read off
the per-slice powers, then set

    rho_k^l  <-  1 / (||w_k^l||^2 + kappa).

Slices the optimizer keeps small see their weight explode toward 1/kappa
and get priced out of the next round, which is what drives each user's
beam onto few RRHs. Weights start at one (full cooperation) and the loop
runs a fixed number of rounds; the feasible set never changes between
rounds, only the objective's weighting does.

The returned allocation is the minimum-power point over the slice pattern
the loop converged to, not the raw last iterate, which with eta = 0 is
only determined up to large unpriced power shifts; see ``run``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .beams import BeamformerSet, compute_backhaul
from .coneprog import SolveStatus
from .network import ChannelSet
from .params import SystemParams
from .report import SolutionReport, make_report
from .sdp import ActivationMask, WeightMatrix, build_sdp, extract_beamformers
from .solver import solve

__all__ = [
    "InfeasibleInstanceError",
    "SolverBreakdownError",
    "IterationEntry",
    "IterationTrace",
    "BackhaulBounds",
    "update_weights",
    "selection_mask",
    "lower_bounds",
    "run",
]


class InfeasibleInstanceError(RuntimeError):
    """The SDP is infeasible at the first iteration: no allocation exists."""


class SolverBreakdownError(RuntimeError):
    """A solve failed in a way that only numerics explain.

    In the reweighted loop that means any non-optimal exit after round 0:
    the feasible set is identical in every round, so a certified
    infeasibility or a collapse later on is a numerical event, not a
    property of the instance. Whatever partial trace exists rides along
    (empty for single-solve callers).
    """

    def __init__(self, message: str, trace: "IterationTrace | None" = None):
        super().__init__(message)
        self.trace = trace if trace is not None else IterationTrace()


@dataclass
class IterationEntry:
    weights: WeightMatrix
    beams: BeamformerSet
    supplies: np.ndarray
    max_link_backhaul: float
    total_backhaul: float
    tx_power_mw: float
    surrogate_objective: float
    rank_ratios: np.ndarray
    solver_status: str


@dataclass
class IterationTrace:
    entries: list[IterationEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i) -> IterationEntry:
        return self.entries[i]


def update_weights(beams: BeamformerSet, kappa: float) -> WeightMatrix:
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return WeightMatrix(rho=1.0 / (beams.slice_powers() + kappa))


def selection_mask(beams: BeamformerSet, kappa: float) -> ActivationMask:
    """Slices the iteration actually kept, read off the final beams.

    A slice survives if its power clears both the relative accounting
    threshold and an absolute floor of 10 kappa; powers at the regularizer
    scale are iteration residue, not allocation. Each IR always keeps its
    strongest slice so the mask never orphans a served user.
    """
    p = beams.slice_powers()
    pmax = p.max(axis=1, keepdims=True)
    keep = p > np.maximum(1e-6 * pmax, 10.0 * kappa)
    keep |= p == pmax
    return ActivationMask(active=keep)


@dataclass
class BackhaulBounds:
    per_link: float
    total: float
    uniform_targets: bool   # False: bounds fall back to the smallest rate


def lower_bounds(params: SystemParams) -> BackhaulBounds:
    """Backhaul floors: ceil(K/L) streams on some link, K streams shipped.

    Any assignment must put ceil(K/L) users on its busiest link, and every
    user's stream crosses at least one link, so with a uniform per-user
    rate R the max-link and total consumptions are bounded below by
    ceil(K/L)*R and K*R. Non-uniform targets get a conservative bound from
    the smallest rate, flagged via uniform_targets=False.
    """
    rates = np.asarray(params.rate_per_ir, dtype=float)
    uniform = bool(np.all(rates == rates[0]))
    r = float(rates.min())
    k, l = params.n_ir, params.n_rrh
    return BackhaulBounds(per_link=float(np.ceil(k / l)) * r,
                          total=k * r, uniform_targets=uniform)


def run(ch: ChannelSet, params: SystemParams, tol: float = 1e-10,
        early_stop: bool = False, polish: bool = True
        ) -> tuple[SolutionReport, IterationTrace]:
    """Run the reweighting loop and report the converged allocation.

    early_stop is an extension over the fixed-round rule: when the active
    slice pattern and the surrogate objective both settle (relative change
    below 1e-7), remaining rounds are skipped. Off by default so traces
    have the canonical length.

    With eta = 0 the weighted problem is degenerate: slices on links whose
    epigraph row is slack carry no price at all, so an interior-point
    solve parks them at whatever level centers the optimal face instead of
    at zero, and inflates active powers the same way. The polish step
    therefore re-solves a pure power minimization restricted to the slices
    the iteration kept (see ``selection_mask``) and reports that point:
    the cheapest representative of the converged pattern, with dark slices
    exactly zero rather than left at solver residue. The trace always
    records the raw per-round iterates; a polish solve that does not come
    back optimal is discarded in favor of the last raw iterate.
    """
    weights = WeightMatrix.ones(params.n_ir, params.n_rrh)
    trace = IterationTrace()
    built = sol = ext = None
    prev_obj = None
    prev_pattern = None
    for it in range(params.reweight_iterations):
        built = build_sdp(ch, params, weights=weights)
        sol = solve(built.program, tol=tol)
        if sol.status != SolveStatus.OPTIMAL:
            if it == 0 and sol.status == SolveStatus.INFEASIBLE:
                raise InfeasibleInstanceError(
                    f"instance certified infeasible: {sol.message}")
            raise SolverBreakdownError(
                f"solver returned {sol.status.value} at reweighting "
                f"round {it}: {sol.message}", trace)
        ext = extract_beamformers(built, sol)
        bh = compute_backhaul(ext.beams, params)
        surrogate = built.p_unit * sol.primal_objective
        trace.entries.append(IterationEntry(
            weights=weights,
            beams=ext.beams,
            supplies=ext.supplies,
            max_link_backhaul=bh.max_link,
            total_backhaul=bh.total,
            tx_power_mw=ext.beams.total_power(),
            surrogate_objective=surrogate,
            rank_ratios=ext.ratios,
            solver_status=sol.status.value,
        ))
        pattern = ext.beams.slice_powers() > 1e-6 * ext.beams.slice_powers() \
            .max(axis=1, keepdims=True)
        if early_stop and prev_obj is not None \
                and np.array_equal(pattern, prev_pattern) \
                and abs(surrogate - prev_obj) <= 1e-7 * max(1.0, abs(prev_obj)):
            break
        prev_obj, prev_pattern = surrogate, pattern
        weights = update_weights(ext.beams, params.kappa)
    if polish:
        mask = selection_mask(ext.beams, params.kappa)
        sub = replace(params, delta=0.0, eta=1.0)
        built_p = build_sdp(ch, sub, mask=mask)
        sol_p = solve(built_p.program, tol=tol)
        if sol_p.status is SolveStatus.OPTIMAL:
            ext_p = extract_beamformers(built_p, sol_p)
            return make_report(built_p, sol_p, ext_p, ch, params), trace
    report = make_report(built, sol, ext, ch, params)
    return report, trace
