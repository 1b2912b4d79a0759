"""Unit conversions. All internal power math is in milliwatts; dB / dBm appear
only at config and report boundaries."""

import numpy as np

C_LIGHT = 299792458.0  # m/s


def dbm_to_mw(p_dbm):
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def mw_to_dbm(p_mw):
    return 10.0 * np.log10(np.asarray(p_mw, dtype=float))


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def fspl_db(distance_m: float, frequency_hz: float) -> float:
    """Free-space path loss 20*log10(4*pi*d/lambda) in dB."""
    lam = C_LIGHT / frequency_hz
    return 20.0 * np.log10(4.0 * np.pi * distance_m / lam)
