"""Conic encoding of the relaxed allocation problem, and its certificates.

The vector problem is lifted to matrix variables W_k = w_k w_k^H with the
rank constraint dropped. Per information receiver k there is one PSD block
holding the real embedding of W_k; scalar blocks carry the per-RRH supply
E_l, the epigraph variable phi bounding the weighted per-link backhaul, and
the inequality slacks. The delivered-power balance at each RRH,

    E - beta E^2 >= P_circuit + eps * sum_k ||w_k^l||^2,

is quadratic in E with concave left side, so it enters exactly through the
2x2 Schur-complement block [[E - rhs, sqrt(beta) E], [sqrt(beta) E, 1]] >= 0
tied to the scalars by three equality rows.

An activation mask shrinks each W_k to the antenna coordinates of the RRHs
allowed to serve that IR, rather than pinning the forbidden slices to zero
with equality rows. Pinned diagonals would force every feasible W_k to be
singular and leave the masked problem without a strictly feasible point;
on the reduced coordinates the interior is restored and masked solves are
as well conditioned as full ones. Extraction scatters the beams back into
full-length vectors, zero on the removed coordinates.

All power data is normalised by one reference level (the CP supply cap) so
the solver sees O(1) magnitudes regardless of whether the instance is
specified in microwatt or kilowatt scales. Extraction multiplies back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beams import BeamformerSet
from .coneprog import (ConeProgram, ConeSolution, ProgramBuilder,
                       dual_multiplier)
from .embedding import embed_hermitian, hermitize, unembed_symmetric
from .network import ChannelSet
from .params import SystemParams

__all__ = [
    "WeightMatrix",
    "ActivationMask",
    "BuiltSdp",
    "Extraction",
    "SdpDuals",
    "RankCertificate",
    "build_sdp",
    "principal_component",
    "extract_beamformers",
    "sdp_duals",
    "verify_rank_certificate",
]


@dataclass
class WeightMatrix:
    """Per-(IR, RRH) reweighting factors rho_k^l for the backhaul surrogate."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.ndim != 2:
            raise ValueError("rho must be a (n_ir, n_rrh) matrix")
        if not np.isfinite(self.rho).all() or (self.rho < 0).any():
            raise ValueError("weights must be finite and nonnegative")

    @staticmethod
    def ones(n_ir: int, n_rrh: int) -> "WeightMatrix":
        return WeightMatrix(rho=np.ones((n_ir, n_rrh)))


def _check_served(active: np.ndarray):
    unserved = np.flatnonzero(~active.any(axis=1))
    if unserved.size:
        raise ValueError(
            f"mask leaves IR(s) {unserved.tolist()} without any serving RRH")


@dataclass
class ActivationMask:
    """Which (IR, RRH) beamformer slices are allowed to be nonzero."""

    active: np.ndarray

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=bool)
        if self.active.ndim != 2:
            raise ValueError("mask must be a (n_ir, n_rrh) matrix")
        _check_served(self.active)

    @staticmethod
    def full(n_ir: int, n_rrh: int) -> "ActivationMask":
        return ActivationMask(active=np.ones((n_ir, n_rrh), dtype=bool))

    def n_active(self) -> int:
        return int(self.active.sum())


@dataclass
class BuiltSdp:
    """A ConeProgram plus the layout needed to interpret its solution."""

    program: ConeProgram
    p_unit: float                   # mW represented by one solver power unit
    params: SystemParams
    channels: ChannelSet
    weights: WeightMatrix
    mask: ActivationMask
    w_blocks: list[int]
    w_index: list[np.ndarray]       # full-space antenna coords of each W_k
    u_blocks: list[int]
    e_blocks: list[int]
    phi_block: int

    def solution_matrices(self, sol: ConeSolution) -> list[np.ndarray]:
        """Hermitian W_k in mW, scattered back to the full antenna space."""
        n = self.params.n_rrh * self.params.n_t
        out = []
        for j, ix in zip(self.w_blocks, self.w_index):
            full = np.zeros((n, n), dtype=complex)
            full[np.ix_(ix, ix)] = self.p_unit * unembed_symmetric(sol.x[j])
            out.append(full)
        return out

    def dual_slack_matrices(self, sol: ConeSolution) -> list[np.ndarray]:
        """Hermitian dual slack Y_k of each W_k >= 0 (normalised units).

        These live on the reduced antenna coordinates of the block; masked
        out slices have no dual coordinates at all.
        """
        return [2.0 * unembed_symmetric(sol.s[j]) for j in self.w_blocks]


def _power_unit(params: SystemParams) -> float:
    if np.isfinite(params.cp_max_supply_mw):
        return float(params.cp_max_supply_mw)
    caps = np.asarray(params.rrh_max_tx_mw, dtype=float)
    finite = caps[np.isfinite(caps)]
    return float(finite.max()) if finite.size else 1.0


def _coeff(mat: np.ndarray) -> np.ndarray:
    """Real coefficient representing Tr(mat @ W) against an embedded W."""
    return 0.5 * embed_hermitian(hermitize(mat))


def _slice_coeff(n: int, n_t: int, l: int) -> np.ndarray:
    """Coefficient of Tr(B_l W): selects RRH l's diagonal antenna block."""
    d = np.zeros(2 * n)
    d[l * n_t:(l + 1) * n_t] = 0.5
    d[n + l * n_t:n + (l + 1) * n_t] = 0.5
    return np.diag(d)


def build_sdp(ch: ChannelSet, params: SystemParams,
              weights: WeightMatrix | None = None,
              mask: ActivationMask | None = None) -> BuiltSdp:
    k_ir, l_rrh, n_t = params.n_ir, params.n_rrh, params.n_t
    n = l_rrh * n_t
    if ch.n_rrh != l_rrh or ch.n_t != n_t:
        raise ValueError("channel geometry does not match params")
    if ch.h.shape != (k_ir, n) or ch.g.shape != (params.n_er, n):
        raise ValueError("channel array shapes do not match params")
    if weights is None:
        weights = WeightMatrix.ones(k_ir, l_rrh)
    if mask is None:
        mask = ActivationMask.full(k_ir, l_rrh)
    if weights.rho.shape != (k_ir, l_rrh) or mask.active.shape != (k_ir, l_rrh):
        raise ValueError("weights/mask shape does not match params")
    _check_served(mask.active)

    pu = _power_unit(params)
    bld = ProgramBuilder()
    # each W_k lives on the antennas of the RRHs its mask row allows
    act = [np.flatnonzero(mask.active[k]) for k in range(k_ir)]
    idx = [np.concatenate([np.arange(l * n_t, (l + 1) * n_t) for l in ls])
           for ls in act]
    wb = [bld.add_block(f"W{k}", 2 * idx[k].size) for k in range(k_ir)]
    ub = [bld.add_block(f"loss{l}", 2) for l in range(l_rrh)]
    eb = [bld.add_block(f"E{l}", 1) for l in range(l_rrh)]
    phi = bld.add_block("phi", 1)

    bld.add_objective(phi, np.array([[1.0]]))
    if params.eta != 0.0:
        for k, j in enumerate(wb):
            bld.add_objective(j, (params.eta / 2.0) * np.eye(2 * idx[k].size))

    # RRH l's antenna group inside IR k's reduced coordinates
    slice_k = [{l: _slice_coeff(idx[k].size, n_t, i)
                for i, l in enumerate(act[k])} for k in range(k_ir)]
    targets = np.asarray(params.sinr_target, dtype=float)
    rates = np.asarray(params.rate_per_ir, dtype=float)
    circuits = np.asarray(params.rrh_circuit_mw, dtype=float)
    caps = np.asarray(params.rrh_max_tx_mw, dtype=float)
    eps = params.amplifier_inefficiency

    # C1: own-signal over target beats interference plus noise
    for k in range(k_ir):
        coeffs = {}
        for j in range(k_ir):
            hk_on_j = ch.h[k][idx[j]]
            mat = _coeff(np.outer(hk_on_j, hk_on_j.conj()))
            coeffs[wb[j]] = mat / targets[k] if j == k else -mat
        bld.add_constraint(f"sinr{k}", coeffs, params.noise_mw / pu, "ge")

    # C2: CP supply budget over all lines
    bld.add_constraint(
        "cp_budget", {eb[l]: np.array([[1.0]]) for l in range(l_rrh)},
        (params.cp_max_supply_mw - params.cp_circuit_mw) / pu, "le")

    # C3: per-RRH delivered-power balance via the 2x2 Schur block
    beta_n = np.asarray(params.line_loss_beta, dtype=float) * pu
    e00 = np.array([[1.0, 0.0], [0.0, 0.0]])
    e01 = np.array([[0.0, 0.5], [0.5, 0.0]])
    e11 = np.array([[0.0, 0.0], [0.0, 1.0]])
    for l in range(l_rrh):
        coeffs = {ub[l]: e00, eb[l]: np.array([[-1.0]])}
        for k, j in enumerate(wb):
            if l in slice_k[k]:
                coeffs[j] = eps * slice_k[k][l]
        bld.add_constraint(f"loss{l}_bal", coeffs, -circuits[l] / pu, "eq")
        bld.add_constraint(
            f"loss{l}_geo",
            {ub[l]: e01, eb[l]: np.array([[-np.sqrt(beta_n[l])]])}, 0.0, "eq")
        bld.add_constraint(f"loss{l}_one", {ub[l]: e11}, 1.0, "eq")

    # C4: per-RRH radiated power caps; a cap nobody can load needs no row
    for l in range(l_rrh):
        if np.isfinite(caps[l]):
            coeffs = {j: slice_k[k][l] for k, j in enumerate(wb)
                      if l in slice_k[k]}
            if coeffs:
                bld.add_constraint(f"txcap{l}", coeffs, caps[l] / pu, "le")

    # C5: minimum harvested power per energy receiver
    for m in range(params.n_er):
        coeffs = {}
        for k, j in enumerate(wb):
            gm = ch.g[m][idx[k]]
            coeffs[j] = params.rf_efficiency * _coeff(np.outer(gm, gm.conj()))
        bld.add_constraint(f"harvest{m}", coeffs,
                           float(params.min_harvest_mw[m]) / pu, "ge")

    # C7: epigraph rows, one per backhaul link
    for l in range(l_rrh):
        coeffs: dict[int, np.ndarray] = {phi: np.array([[-1.0]])}
        for k in range(k_ir):
            c = params.delta * weights.rho[k, l] * rates[k]
            if c != 0.0 and l in slice_k[k]:
                coeffs[wb[k]] = c * slice_k[k][l]
        bld.add_constraint(f"backhaul{l}", coeffs, 0.0, "le")

    return BuiltSdp(program=bld.build(), p_unit=pu, params=params,
                    channels=ch, weights=weights, mask=mask,
                    w_blocks=wb, w_index=idx, u_blocks=ub, e_blocks=eb,
                    phi_block=phi)


def principal_component(w_mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Leading eigenpair of a Hermitian PSD matrix as a beam vector.

    Returns (sqrt(lam1) * u1, lam2/lam1) with the phase fixed so the
    largest-magnitude entry of the vector is real and nonnegative.
    """
    w_mat = np.asarray(w_mat, dtype=complex)
    vals, vecs = np.linalg.eigh(hermitize(w_mat))
    lam1 = float(vals[-1])
    if lam1 <= 0.0:
        raise ValueError("matrix has no positive eigenvalue to extract")
    lam2 = max(float(vals[-2]), 0.0) if vals.size > 1 else 0.0
    v = vecs[:, -1]
    i = int(np.argmax(np.abs(v)))
    phase = v[i] / abs(v[i])
    return np.sqrt(lam1) * v * np.conj(phase), lam2 / lam1


@dataclass
class Extraction:
    """Rank-one reading of an SDP solution, back in physical units."""

    beams: BeamformerSet
    supplies: np.ndarray        # provisioned E_l per RRH, mW
    phi: float                  # epigraph value (weighted-backhaul bound)
    ratios: np.ndarray          # lam2/lam1 per IR
    rank_tol: float
    rank_flags: np.ndarray = field(init=False)

    def __post_init__(self):
        self.rank_flags = self.ratios > self.rank_tol


def extract_beamformers(built: BuiltSdp, sol: ConeSolution,
                        rank_tol: float = 1e-4) -> Extraction:
    rows, ratios = [], []
    for w_mat in built.solution_matrices(sol):
        w, ratio = principal_component(w_mat)
        rows.append(w)
        ratios.append(ratio)
    beams = BeamformerSet(w=np.array(rows), n_rrh=built.params.n_rrh,
                          n_t=built.params.n_t)
    supplies = built.p_unit * np.array(
        [float(sol.x[j][0, 0]) for j in built.e_blocks])
    phi = built.p_unit * float(sol.x[built.phi_block][0, 0])
    return Extraction(beams=beams, supplies=supplies, phi=phi,
                      ratios=np.array(ratios), rank_tol=rank_tol)


@dataclass
class SdpDuals:
    """Named Lagrange multipliers, signed so inequality duals are >= 0."""

    xi: np.ndarray          # SINR constraints
    lam: float              # CP supply budget
    psi: np.ndarray         # per-RRH delivered-power balance
    theta: np.ndarray       # transmit caps (0 where uncapped)
    tau: np.ndarray         # harvest floors
    chi: np.ndarray         # epigraph rows; sums to 1 when phi* > 0
    omega: np.ndarray       # reduced cost of E_l >= 0
    y_mats: list[np.ndarray]  # dual slack of each W_k >= 0


def sdp_duals(built: BuiltSdp, sol: ConeSolution) -> SdpDuals:
    prog, p = built.program, built.params
    xi = np.array([dual_multiplier(prog, sol, f"sinr{k}")
                   for k in range(p.n_ir)])
    lam = dual_multiplier(prog, sol, "cp_budget")
    psi = np.array([-float(sol.y[prog.row_index(f"loss{l}_bal")])
                    for l in range(p.n_rrh)])
    theta = np.array([
        dual_multiplier(prog, sol, f"txcap{l}")
        if f"txcap{l}" in prog.row_labels else 0.0
        for l in range(p.n_rrh)])
    tau = np.array([dual_multiplier(prog, sol, f"harvest{m}")
                    for m in range(p.n_er)])
    chi = np.array([dual_multiplier(prog, sol, f"backhaul{l}")
                    for l in range(p.n_rrh)])
    omega = np.array([float(sol.s[j][0, 0]) for j in built.e_blocks])
    return SdpDuals(xi=xi, lam=lam, psi=psi, theta=theta, tau=tau, chi=chi,
                    omega=omega, y_mats=built.dual_slack_matrices(sol))


@dataclass
class RankCertificate:
    """Null-space audit of the dual slacks Y_k against the recovered W_k.

    At a strictly complementary optimum each Y_k should show exactly one
    vanishing eigenvalue (the beam direction) and a near-zero product
    Y_k W_k. Counting happens on the full Hermitian matrix: antenna
    slices a mask pins to zero are still ranked in Y_k because the
    pinning rows feed their multipliers into the dual slack, so a sparse
    assignment does not inflate the null count.
    """

    vanishing_counts: np.ndarray
    complementarity: np.ndarray
    lambda_max: np.ndarray
    tol: float
    ok: bool


def verify_rank_certificate(built: BuiltSdp, sol: ConeSolution,
                            tol: float = 1e-6) -> RankCertificate:
    p = built.params
    y_list = built.dual_slack_matrices(sol)
    w_list = [unembed_symmetric(sol.x[j]) for j in built.w_blocks]
    counts, comps, lmaxs = [], [], []
    for k in range(p.n_ir):
        y_k, w_k = y_list[k], w_list[k]
        vals = np.linalg.eigvalsh(hermitize(y_k))
        lmax = float(vals[-1])
        counts.append(int(np.sum(vals < tol * lmax)) if lmax > 0
                      else vals.size)
        y_norm = np.linalg.norm(y_k)
        w_norm = np.linalg.norm(w_k)
        comps.append(float(np.linalg.norm(y_k @ w_k)
                           / ((1.0 + y_norm) * (1.0 + w_norm))))
        lmaxs.append(lmax)
    counts = np.array(counts, dtype=int)
    comps = np.array(comps)
    ok = bool((counts == 1).all() and (comps <= tol).all())
    return RankCertificate(vanishing_counts=counts, complementarity=comps,
                           lambda_max=np.array(lmaxs), tol=tol, ok=ok)
