"""Beamformer containers and the metrics computed from them.

A beamformer for information receiver k is one complex vector of length
L * N_T laid out RRH-major: entries [l*N_T : (l+1)*N_T] belong to RRH l.
Everything downstream (SINR, harvested power, backhaul accounting,
feasibility audits) evaluates these vectors directly against a
ChannelSet, so the same functions score solver output and hand-built
test vectors alike.

Power quantities are in milliwatts throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import ChannelSet
from .params import SystemParams

__all__ = [
    "BeamformerSet",
    "BackhaulReport",
    "FeasibilityReport",
    "compute_sinr",
    "compute_harvested",
    "compute_backhaul",
    "evaluate_objective",
    "check_feasibility",
]


@dataclass
class BeamformerSet:
    """Stacked beamforming vectors, one row per information receiver."""

    w: np.ndarray          # (K, L * N_T) complex
    n_rrh: int
    n_t: int

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        if self.w.ndim != 2 or self.w.shape[1] != self.n_rrh * self.n_t:
            raise ValueError(
                f"beamformer array {self.w.shape} does not match "
                f"{self.n_rrh} RRHs x {self.n_t} antennas")

    @property
    def n_ir(self) -> int:
        return self.w.shape[0]

    def rrh_slice(self, k: int, l: int) -> np.ndarray:
        """Portion of user k's beamformer transmitted by RRH l."""
        return self.w[k, l * self.n_t:(l + 1) * self.n_t]

    def slice_powers(self) -> np.ndarray:
        """(K, L) matrix of per-RRH transmit powers ||w_k^l||^2."""
        k = self.w.shape[0]
        cube = np.abs(self.w.reshape(k, self.n_rrh, self.n_t)) ** 2
        return cube.sum(axis=2)

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))


@dataclass
class BackhaulReport:
    per_link: np.ndarray   # (L,) bits/s/Hz carried by each fronthaul link
    total: float
    max_link: float
    busiest: int           # index of the link attaining max_link


@dataclass
class FeasibilityReport:
    """Signed constraint margins in mW; positive (within tol) means satisfied.

    The SINR requirement is scored in its power-balance form
    signal/target - interference - noise, which has the same sign as
    sinr - target but stays commensurate with the other rows.
    """

    c1_margin: np.ndarray   # signal/target - interference - noise
    c2_margin: float        # CP supply headroom
    c3_margin: np.ndarray   # delivered power minus per-RRH draw
    c4_margin: np.ndarray   # transmit cap headroom (inf when uncapped)
    c5_margin: np.ndarray   # harvested minus required, per ER
    c6_margin: np.ndarray   # supply nonnegativity
    tol: float = 1e-6
    c1_ok: np.ndarray = field(init=False)
    c2_ok: bool = field(init=False)
    c3_ok: np.ndarray = field(init=False)
    c4_ok: np.ndarray = field(init=False)
    c5_ok: np.ndarray = field(init=False)
    c6_ok: np.ndarray = field(init=False)

    def __post_init__(self):
        t = -self.tol
        self.c1_ok = self.c1_margin >= t
        self.c2_ok = bool(self.c2_margin >= t)
        self.c3_ok = self.c3_margin >= t
        self.c4_ok = self.c4_margin >= t
        self.c5_ok = self.c5_margin >= t
        self.c6_ok = self.c6_margin >= t

    @property
    def all_ok(self) -> bool:
        return bool(self.c1_ok.all() and self.c2_ok and self.c3_ok.all()
                    and self.c4_ok.all() and self.c5_ok.all()
                    and self.c6_ok.all())


def compute_sinr(bf: BeamformerSet, ch: ChannelSet,
                 params: SystemParams) -> np.ndarray:
    """Received SINR (linear) at each information receiver."""
    # rx[k, j] = h_k^H w_j; diagonal is signal, off-diagonal interference
    rx = np.abs(ch.h.conj() @ bf.w.T) ** 2
    signal = np.diag(rx).copy()
    interference = rx.sum(axis=1) - signal
    return signal / (interference + params.noise_mw)


def compute_harvested(bf: BeamformerSet, ch: ChannelSet,
                      params: SystemParams) -> np.ndarray:
    """RF power harvested at each energy receiver, in mW."""
    if ch.g.shape[0] == 0:
        return np.zeros(0)
    rx = np.abs(ch.g.conj() @ bf.w.T) ** 2
    return params.rf_efficiency * rx.sum(axis=1)


def _active_slices(bf: BeamformerSet, zero_tol: float | None) -> np.ndarray:
    """Boolean (K, L) map of which RRHs actually carry each user's signal.

    With zero_tol=None a slice counts as active when its power exceeds
    1e-6 of the largest slice power of the same user, so the rule is
    insensitive to the overall beam scale. Passing a float switches to
    that absolute power threshold.
    """
    powers = bf.slice_powers()
    if zero_tol is None:
        thresh = 1e-6 * powers.max(axis=1, keepdims=True)
    else:
        thresh = float(zero_tol)
    return powers > thresh


def compute_backhaul(bf: BeamformerSet, params: SystemParams,
                     zero_tol: float | None = None) -> BackhaulReport:
    """Per-link fronthaul rate: each active user costs its data rate."""
    active = _active_slices(bf, zero_tol)
    rates = np.asarray(params.rate_per_ir)
    per_link = active.T @ rates if active.size else np.zeros(bf.n_rrh)
    per_link = np.asarray(per_link, dtype=float)
    busiest = int(np.argmax(per_link))
    return BackhaulReport(per_link=per_link, total=float(per_link.sum()),
                          max_link=float(per_link[busiest]), busiest=busiest)


def evaluate_objective(bf: BeamformerSet, params: SystemParams,
                       zero_tol: float | None = None) -> float:
    """delta * (largest per-link backhaul) + eta * (total transmit power)."""
    rep = compute_backhaul(bf, params, zero_tol)
    return params.delta * rep.max_link + params.eta * bf.total_power()


def check_feasibility(bf: BeamformerSet, supplies: np.ndarray,
                      ch: ChannelSet, params: SystemParams,
                      tol: float = 1e-6) -> FeasibilityReport:
    """Audit a (beamformer, per-RRH supply) pair against all constraints.

    `supplies` holds the power E_l the central processor provisions for
    each RRH over the lossy line, in mW.
    """
    supplies = np.asarray(supplies, dtype=float)
    if supplies.shape != (params.n_rrh,):
        raise ValueError(f"expected {params.n_rrh} supply values")
    rx = np.abs(ch.h.conj() @ bf.w.T) ** 2
    signal = np.diag(rx).copy()
    interference = rx.sum(axis=1) - signal
    c1 = signal / np.asarray(params.sinr_target) - interference \
        - params.noise_mw

    cp_budget = params.cp_max_supply_mw - params.cp_circuit_mw
    c2 = float(cp_budget - supplies.sum())

    tx = bf.slice_powers().sum(axis=0)          # per-RRH radiated power
    delivered = supplies - params.line_loss_beta * supplies ** 2
    draw = np.asarray(params.rrh_circuit_mw) \
        + params.amplifier_inefficiency * tx
    c3 = delivered - draw

    c4 = np.asarray(params.rrh_max_tx_mw) - tx

    harvested = compute_harvested(bf, ch, params)
    c5 = harvested - np.asarray(params.min_harvest_mw)

    return FeasibilityReport(c1_margin=c1, c2_margin=c2, c3_margin=c3,
                             c4_margin=c4, c5_margin=c5, c6_margin=supplies,
                             tol=tol)
