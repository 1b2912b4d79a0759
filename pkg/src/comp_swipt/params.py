"""System parameter set and its config-file schema.

Internally every power is linear milliwatts and every ratio is linear. The
config file speaks dBm / dB, matching how the defaults are usually quoted:

====================================  =======================================
config key (YAML, flat mapping)       meaning / default
====================================  =======================================
rrh_count                             number of remote radio heads L (3)
ir_count                              number of information receivers K (5)
er_count                              number of energy receivers M (2)
antennas_per_rrh                      N_T per RRH (4)
carrier_frequency_hz                  carrier frequency (1.9e9)
path_loss_exponent                    log-distance exponent (3.6)
noise_dbm                             total receive noise variance (-23)
sinr_target_db                        per-IR SINR target, scalar or list (15)
cp_circuit_power_dbm                  central-processor circuit power (40)
cp_max_supply_dbm                     max CP power supply (50)
rrh_circuit_power_dbm                 per-RRH circuit power, scalar/list (30)
amplifier_efficiency                  power-amplifier efficiency 1/eps (0.38)
rrh_max_tx_dbm                        per-RRH max radiated power (46)
min_harvest_dbm                       per-ER harvest floor, scalar/list (0)
rf_conversion_efficiency              RF-to-DC efficiency mu (0.5)
line_loss_fraction                    power-line loss at full CP supply (0.2)
delta                                 backhaul weight in the objective (1.0)
eta                                   transmit-power weight (0.0)
reweight_kappa                        reweighting regularizer kappa (1e-4)
reweight_iterations                   reweighting iteration count L_max (20)
rrh_spacing_m                         RRH pairwise spacing (500)
disc_radius_m                         user-placement disc radius (1000)
ref_distance_m                        path-loss reference distance (10)
min_distance_m                        distance clamp (10)
path_loss_ref_db                      reference loss at ref_distance; omit or
                                      null for the free-space value
per_link_backhaul_cap                 optional reporting cap, bit/s/Hz (null)
====================================  =======================================

A `experiment:` section (see harness.ExperimentConfig) may sit alongside these
keys in the same file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
import numpy as np

from .units import db_to_linear, dbm_to_mw, fspl_db, linear_to_db, mw_to_dbm


def _per_entity(value, count, name) -> np.ndarray:
    """Broadcast a scalar or length-`count` sequence to a float array."""
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(count, arr.item())
    if arr.shape != (count,):
        raise ValueError(f"{name}: expected scalar or length {count}, got shape {arr.shape}")
    return arr


@dataclass(eq=False)
class SystemParams:
    """All scenario constants: counts, channel model, budgets, algorithm knobs.

    Per-RRH / per-IR / per-ER quantities accept scalars and are broadcast to
    arrays in ``__post_init__``. Do not mutate after construction; derived
    fields (``rate_per_ir``, ``line_loss_beta``) are computed once.
    """

    n_rrh: int = 3
    n_ir: int = 5
    n_er: int = 2
    n_t: int = 4

    frequency_hz: float = 1.9e9
    path_loss_exponent: float = 3.6
    noise_mw: float = float(dbm_to_mw(-23.0))
    sinr_target: np.ndarray = field(default_factory=lambda: db_to_linear(15.0))

    cp_circuit_mw: float = float(dbm_to_mw(40.0))
    cp_max_supply_mw: float = float(dbm_to_mw(50.0))
    rrh_circuit_mw: np.ndarray = field(default_factory=lambda: dbm_to_mw(30.0))
    amplifier_efficiency: float = 0.38
    rrh_max_tx_mw: np.ndarray = field(default_factory=lambda: dbm_to_mw(46.0))
    min_harvest_mw: np.ndarray = field(default_factory=lambda: np.array(1.0))
    rf_efficiency: float = 0.5
    line_loss_fraction: float = 0.2

    delta: float = 1.0
    eta: float = 0.0
    kappa: float = 1e-4
    reweight_iterations: int = 20

    rrh_spacing_m: float = 500.0
    disc_radius_m: float = 1000.0
    ref_distance_m: float = 10.0
    min_distance_m: float = 10.0
    path_loss_ref_db: float | None = None
    per_link_backhaul_cap: float | None = None

    # derived, filled by __post_init__
    rate_per_ir: np.ndarray = field(init=False, repr=False)
    line_loss_beta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name, val in (("n_rrh", self.n_rrh), ("n_ir", self.n_ir), ("n_t", self.n_t)):
            if int(val) < 1:
                raise ValueError(f"{name} must be >= 1, got {val}")
        if int(self.n_er) < 0:
            raise ValueError(f"n_er must be >= 0, got {self.n_er}")
        self.n_rrh, self.n_ir, self.n_er, self.n_t = (
            int(self.n_rrh), int(self.n_ir), int(self.n_er), int(self.n_t))

        self.sinr_target = _per_entity(self.sinr_target, self.n_ir, "sinr_target")
        self.rrh_circuit_mw = _per_entity(self.rrh_circuit_mw, self.n_rrh, "rrh_circuit_mw")
        self.rrh_max_tx_mw = _per_entity(self.rrh_max_tx_mw, self.n_rrh, "rrh_max_tx_mw")
        self.min_harvest_mw = _per_entity(self.min_harvest_mw, self.n_er, "min_harvest_mw")

        if self.noise_mw <= 0:
            raise ValueError("noise_mw must be positive")
        if np.any(self.sinr_target <= 0):
            raise ValueError("sinr_target must be positive")
        if not (0 < self.amplifier_efficiency <= 1):
            raise ValueError("amplifier_efficiency must be in (0, 1]")
        if not (0 < self.rf_efficiency <= 1):
            raise ValueError("rf_efficiency must be in (0, 1]")
        if not (0 <= self.line_loss_fraction < 1):
            raise ValueError("line_loss_fraction must be in [0, 1)")
        if self.delta < 0 or self.eta < 0:
            raise ValueError("delta and eta must be nonnegative")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.reweight_iterations < 1:
            raise ValueError("reweight_iterations must be >= 1")
        if min(self.cp_circuit_mw, self.cp_max_supply_mw) <= 0 or np.any(self.rrh_circuit_mw <= 0):
            raise ValueError("circuit/supply powers must be positive")
        if self.cp_max_supply_mw <= self.cp_circuit_mw:
            raise ValueError("cp_max_supply_mw must exceed cp_circuit_mw")
        if np.any(self.rrh_max_tx_mw <= 0):
            raise ValueError("rrh_max_tx_mw must be positive (use inf for uncapped)")
        if np.any(self.min_harvest_mw < 0):
            raise ValueError("min_harvest_mw must be nonnegative")
        if self.min_distance_m <= 0 or self.ref_distance_m <= 0:
            raise ValueError("distances must be positive")

        self.rate_per_ir = np.log2(1.0 + self.sinr_target)
        # Quadratic line-loss coefficient, calibrated so the loss fraction is
        # reached at full CP supply: beta * P_max^CP = fraction.
        self.line_loss_beta = np.full(
            self.n_rrh, self.line_loss_fraction / self.cp_max_supply_mw)

    @property
    def n_ant_total(self) -> int:
        return self.n_rrh * self.n_t

    @property
    def amplifier_inefficiency(self) -> float:
        """eps = 1 / efficiency; multiplies radiated power in the supply budget."""
        return 1.0 / self.amplifier_efficiency

    def reference_loss_db(self) -> float:
        if self.path_loss_ref_db is not None:
            return float(self.path_loss_ref_db)
        return float(fspl_db(self.ref_distance_m, self.frequency_hz))


_CONFIG_KEYS = {
    "rrh_count": "n_rrh",
    "ir_count": "n_ir",
    "er_count": "n_er",
    "antennas_per_rrh": "n_t",
    "carrier_frequency_hz": "frequency_hz",
    "path_loss_exponent": "path_loss_exponent",
    "amplifier_efficiency": "amplifier_efficiency",
    "rf_conversion_efficiency": "rf_efficiency",
    "line_loss_fraction": "line_loss_fraction",
    "delta": "delta",
    "eta": "eta",
    "reweight_kappa": "kappa",
    "reweight_iterations": "reweight_iterations",
    "rrh_spacing_m": "rrh_spacing_m",
    "disc_radius_m": "disc_radius_m",
    "ref_distance_m": "ref_distance_m",
    "min_distance_m": "min_distance_m",
    "path_loss_ref_db": "path_loss_ref_db",
    "per_link_backhaul_cap": "per_link_backhaul_cap",
}

_DBM_KEYS = {
    "noise_dbm": "noise_mw",
    "cp_circuit_power_dbm": "cp_circuit_mw",
    "cp_max_supply_dbm": "cp_max_supply_mw",
    "rrh_circuit_power_dbm": "rrh_circuit_mw",
    "rrh_max_tx_dbm": "rrh_max_tx_mw",
    "min_harvest_dbm": "min_harvest_mw",
}


def system_params_from_dict(cfg: dict) -> SystemParams:
    """Build SystemParams from a flat config mapping (unknown keys rejected)."""
    kwargs = {}
    for key, value in cfg.items():
        if key in _CONFIG_KEYS:
            kwargs[_CONFIG_KEYS[key]] = value
        elif key in _DBM_KEYS:
            kwargs[_DBM_KEYS[key]] = dbm_to_mw(value)
        elif key == "sinr_target_db":
            kwargs["sinr_target"] = db_to_linear(value)
        else:
            raise KeyError(f"unknown config key: {key!r}")
    return SystemParams(**kwargs)


def system_params_to_dict(p: SystemParams) -> dict:
    """Inverse of system_params_from_dict, emitting dBm/dB at the boundary."""

    def scalarize(arr):
        vals = np.atleast_1d(arr)
        if np.all(vals == vals[0]):
            return float(vals[0]) if vals.size else []
        return [float(v) for v in vals]

    out = {
        "rrh_count": p.n_rrh,
        "ir_count": p.n_ir,
        "er_count": p.n_er,
        "antennas_per_rrh": p.n_t,
        "carrier_frequency_hz": p.frequency_hz,
        "path_loss_exponent": p.path_loss_exponent,
        "noise_dbm": float(mw_to_dbm(p.noise_mw)),
        "sinr_target_db": scalarize(linear_to_db(p.sinr_target)),
        "cp_circuit_power_dbm": float(mw_to_dbm(p.cp_circuit_mw)),
        "cp_max_supply_dbm": float(mw_to_dbm(p.cp_max_supply_mw)),
        "rrh_circuit_power_dbm": scalarize(mw_to_dbm(p.rrh_circuit_mw)),
        "amplifier_efficiency": p.amplifier_efficiency,
        "rrh_max_tx_dbm": scalarize(mw_to_dbm(p.rrh_max_tx_mw)),
        "min_harvest_dbm": scalarize(mw_to_dbm(p.min_harvest_mw)),
        "rf_conversion_efficiency": p.rf_efficiency,
        "line_loss_fraction": p.line_loss_fraction,
        "delta": p.delta,
        "eta": p.eta,
        "reweight_kappa": p.kappa,
        "reweight_iterations": p.reweight_iterations,
        "rrh_spacing_m": p.rrh_spacing_m,
        "disc_radius_m": p.disc_radius_m,
        "ref_distance_m": p.ref_distance_m,
        "min_distance_m": p.min_distance_m,
    }
    if p.path_loss_ref_db is not None:
        out["path_loss_ref_db"] = float(p.path_loss_ref_db)
    if p.per_link_backhaul_cap is not None:
        out["per_link_backhaul_cap"] = float(p.per_link_backhaul_cap)
    return out
