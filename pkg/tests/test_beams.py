import numpy as np
import pytest

from comp_swipt.beams import (BeamformerSet, check_feasibility, compute_backhaul,
                              compute_harvested, compute_sinr,
                              evaluate_objective)
from comp_swipt.network import ChannelSet
from comp_swipt.params import SystemParams


def bf_from_rows(rows, n_rrh, n_t):
    return BeamformerSet(w=np.array(rows, dtype=complex), n_rrh=n_rrh, n_t=n_t)


def ch_from_rows(h_rows, g_rows, n_rrh, n_t):
    n = n_rrh * n_t
    h = np.array(h_rows, dtype=complex).reshape(-1, n)
    g = np.array(g_rows, dtype=complex).reshape(-1, n)
    return ChannelSet(h=h, g=g, n_rrh=n_rrh, n_t=n_t)


def params_1ir(**kw):
    base = dict(n_rrh=1, n_ir=1, n_er=0, n_t=2, noise_mw=1.0)
    base.update(kw)
    return SystemParams(**base)


# ------------------------------------------------------------------- sinr

def test_sinr_single_user_no_interference():
    p = params_1ir()
    ch = ch_from_rows([[1, 0]], np.zeros((0, 2)), 1, 2)
    bf = bf_from_rows([[2, 0]], 1, 2)
    np.testing.assert_allclose(compute_sinr(bf, ch, p), [4.0], rtol=1e-15)


def test_sinr_two_users_unit_interference():
    p = SystemParams(n_rrh=1, n_ir=2, n_er=0, n_t=2, noise_mw=1.0)
    ch = ch_from_rows([[1, 0], [0, 1]], np.zeros((0, 2)), 1, 2)
    bf = bf_from_rows([[1, 0], [1, 0]], 1, 2)
    # user 0: |h0.w0|^2 = 1, interference |h0.w1|^2 = 1, noise 1 -> 1/2
    sinr = compute_sinr(bf, ch, p)
    assert sinr[0] == pytest.approx(0.5, rel=1e-15)


def test_sinr_matches_direct_reevaluation():
    rng = np.random.default_rng(5)
    p = SystemParams(n_rrh=2, n_ir=3, n_er=0, n_t=2, noise_mw=0.37)
    n = 4
    h = rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n))
    w = rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n))
    ch = ChannelSet(h=h, g=np.zeros((0, n), dtype=complex), n_rrh=2, n_t=2)
    bf = BeamformerSet(w=w, n_rrh=2, n_t=2)
    got = compute_sinr(bf, ch, p)
    for k in range(3):
        sig = abs(np.vdot(h[k], w[k])) ** 2
        intf = sum(abs(np.vdot(h[k], w[j])) ** 2 for j in range(3) if j != k)
        np.testing.assert_allclose(got[k], sig / (intf + 0.37), rtol=1e-12)


# ---------------------------------------------------------------- harvest

def test_harvest_single_beam():
    p = SystemParams(n_rrh=1, n_ir=1, n_er=1, n_t=2, rf_efficiency=0.5)
    ch = ch_from_rows([[1, 0]], [[1, 0]], 1, 2)
    bf = bf_from_rows([[2, 0]], 1, 2)
    np.testing.assert_allclose(compute_harvested(bf, ch, p), [2.0], rtol=1e-15)


def test_harvest_orthogonal_beam_is_zero():
    p = SystemParams(n_rrh=1, n_ir=1, n_er=1, n_t=2, rf_efficiency=0.5)
    ch = ch_from_rows([[1, 0]], [[1, 0]], 1, 2)
    bf = bf_from_rows([[0, 3]], 1, 2)
    np.testing.assert_allclose(compute_harvested(bf, ch, p), [0.0], atol=1e-30)


def test_harvest_matches_brute_force():
    rng = np.random.default_rng(6)
    p = SystemParams(n_rrh=2, n_ir=3, n_er=2, n_t=2, rf_efficiency=0.5)
    n = 4
    h = rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n))
    g = rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))
    w = rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n))
    ch = ChannelSet(h=h, g=g, n_rrh=2, n_t=2)
    bf = BeamformerSet(w=w, n_rrh=2, n_t=2)
    got = compute_harvested(bf, ch, p)
    for m in range(2):
        brute = 0.5 * sum(abs(np.vdot(g[m], w[k])) ** 2 for k in range(3))
        np.testing.assert_allclose(got[m], brute, rtol=1e-12)


# --------------------------------------------------------------- backhaul

def test_backhaul_all_zero():
    p = SystemParams(n_rrh=2, n_ir=2, n_er=0, n_t=2)
    bf = BeamformerSet(w=np.zeros((2, 4), dtype=complex), n_rrh=2, n_t=2)
    rep = compute_backhaul(bf, p)
    np.testing.assert_array_equal(rep.per_link, [0.0, 0.0])
    assert rep.total == 0.0


def test_backhaul_disjoint_assignment():
    # user 0 served only by RRH 0, user 1 only by RRH 1, 15 dB target
    p = SystemParams(n_rrh=2, n_ir=2, n_er=0, n_t=2)
    bf = bf_from_rows([[1, 1j, 0, 0], [0, 0, 2, 0]], 2, 2)
    rep = compute_backhaul(bf, p)
    r = np.log2(1.0 + 10.0 ** 1.5)
    np.testing.assert_allclose(rep.per_link, [r, r], rtol=1e-12)
    assert rep.per_link[0] == pytest.approx(5.0279, abs=1e-4)
    assert rep.total == pytest.approx(2 * r, rel=1e-12)


def test_backhaul_full_cooperation_five_users():
    p = SystemParams(n_rrh=3, n_ir=5, n_er=0, n_t=2)
    rng = np.random.default_rng(8)
    w = rng.normal(size=(5, 6)) + 1j * rng.normal(size=(5, 6))
    rep = compute_backhaul(BeamformerSet(w=w, n_rrh=3, n_t=2), p)
    np.testing.assert_allclose(rep.per_link, 5 * np.log2(1 + 10 ** 1.5),
                               rtol=1e-12)
    assert rep.per_link[0] == pytest.approx(25.1396, abs=1e-3)
    assert rep.max_link == pytest.approx(rep.per_link.max())


def test_backhaul_relative_zero_threshold():
    # slice power 1e-7 of the user's max slice counts as off
    p = SystemParams(n_rrh=2, n_ir=1, n_er=0, n_t=1)
    bf = bf_from_rows([[1.0, np.sqrt(1e-7)]], 2, 1)
    rep = compute_backhaul(bf, p)
    assert rep.per_link[1] == 0.0
    # but an explicit absolute threshold can count it
    rep2 = compute_backhaul(bf, p, zero_tol=1e-9)
    assert rep2.per_link[1] > 0


# -------------------------------------------------------------- objective

def test_objective_pure_power():
    p = SystemParams(n_rrh=2, n_ir=2, n_er=0, n_t=2, delta=0.0, eta=1.0)
    bf = bf_from_rows([[1, 1j, 0, 0], [0, 0, 2, 0]], 2, 2)
    assert evaluate_objective(bf, p) == pytest.approx(6.0, rel=1e-15)


def test_objective_pure_backhaul():
    p = SystemParams(n_rrh=2, n_ir=2, n_er=0, n_t=2, delta=2.0, eta=0.0)
    bf = bf_from_rows([[1, 1j, 0, 0], [0, 0, 2, 0]], 2, 2)
    assert evaluate_objective(bf, p) == pytest.approx(
        2.0 * np.log2(1 + 10 ** 1.5), rel=1e-12)


def test_objective_zero_beams():
    p = SystemParams(n_rrh=2, n_ir=2, n_er=0, n_t=2, delta=1.0, eta=1.0)
    bf = BeamformerSet(w=np.zeros((2, 4), dtype=complex), n_rrh=2, n_t=2)
    assert evaluate_objective(bf, p) == 0.0


# ------------------------------------------------------------ feasibility

def test_feasibility_zero_beams_fail_sinr_only():
    p = SystemParams(n_rrh=2, n_ir=1, n_er=0, n_t=2)
    ch = ch_from_rows([[1, 0, 0, 0]], np.zeros((0, 4)), 2, 2)
    bf = BeamformerSet(w=np.zeros((1, 4), dtype=complex), n_rrh=2, n_t=2)
    supplies = np.asarray(p.rrh_circuit_mw) * 1.5
    rep = check_feasibility(bf, supplies, ch, p)
    assert not rep.c1_ok.all()
    assert rep.c2_ok and rep.c3_ok.all() and rep.c4_ok.all() and rep.c6_ok.all()
    assert rep.c5_ok.all()   # no ERs: vacuous
    assert not rep.all_ok


def test_feasibility_supply_below_circuit_power():
    p = SystemParams(n_rrh=2, n_ir=1, n_er=0, n_t=2)
    ch = ch_from_rows([[1, 0, 0, 0]], np.zeros((0, 4)), 2, 2)
    bf = BeamformerSet(w=np.zeros((1, 4), dtype=complex), n_rrh=2, n_t=2)
    rep = check_feasibility(bf, np.zeros(2), ch, p)
    assert not rep.c3_ok.any()
    np.testing.assert_allclose(rep.c3_margin, -np.asarray(p.rrh_circuit_mw),
                               rtol=1e-12)


def test_feasibility_infinite_tx_cap():
    p = SystemParams(n_rrh=1, n_ir=1, n_er=0, n_t=2, rrh_max_tx_mw=np.inf,
                     noise_mw=1.0)
    ch = ch_from_rows([[1, 0]], np.zeros((0, 2)), 1, 2)
    bf = bf_from_rows([[100, 0]], 1, 2)
    supplies = np.array([1e5])
    rep = check_feasibility(bf, supplies, ch, p)
    assert rep.c4_margin[0] == np.inf and rep.c4_ok.all()


def test_slice_energy_identity():
    rng = np.random.default_rng(77)
    w = rng.normal(size=(3, 6)) + 1j * rng.normal(size=(3, 6))
    bf = BeamformerSet(w=w, n_rrh=3, n_t=2)
    total = bf.slice_powers().sum(axis=1)
    np.testing.assert_array_equal(total, np.sum(np.abs(w) ** 2, axis=1))
