import numpy as np
import pytest

from comp_swipt.beams import (check_feasibility, compute_backhaul,
                              compute_harvested, compute_sinr)
from comp_swipt.sdp import (ActivationMask, WeightMatrix, build_sdp,
                            extract_beamformers, principal_component,
                            sdp_duals, verify_rank_certificate)
from comp_swipt.network import ChannelSet
from comp_swipt.params import SystemParams
from comp_swipt.solver import solve


def make_instance(seed, k=2, l=2, m=1, nt=2, scale=0.05, **pkw):
    """Synthetic instance with channel magnitudes giving mW-scale optima."""
    rng = np.random.default_rng(seed)
    base = dict(n_rrh=l, n_ir=k, n_er=m, n_t=nt)
    base.update(pkw)
    p = SystemParams(**base)
    n = l * nt
    h = scale * (rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n)))
    g = scale * (rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n)))
    return p, ChannelSet(h=h, g=g, n_rrh=l, n_t=nt)


def solved(p, ch, weights=None, mask=None, tol=1e-10):
    built = build_sdp(ch, p, weights=weights, mask=mask)
    sol = solve(built.program, tol=tol)
    assert sol.status.value == "optimal", sol.message
    return built, sol


# ------------------------------------------------------------- containers

def test_weight_matrix_validation():
    WeightMatrix(rho=np.ones((2, 3)))
    with pytest.raises(ValueError):
        WeightMatrix(rho=np.array([[1.0, -0.5]]))
    with pytest.raises(ValueError):
        WeightMatrix(rho=np.array([[1.0, np.inf]]))


def test_mask_must_serve_every_ir():
    ActivationMask(active=np.array([[True, False], [True, True]]))
    with pytest.raises(ValueError):
        ActivationMask(active=np.array([[False, False], [True, True]]))


def test_full_mask_and_unit_weights_shapes():
    m = ActivationMask.full(3, 2)
    w = WeightMatrix.ones(3, 2)
    assert m.active.shape == (3, 2) and m.active.all()
    assert w.rho.shape == (3, 2) and (w.rho == 1.0).all()


# ------------------------------------------------------------ shape audit

def test_constraint_group_counts():
    p, ch = make_instance(3, k=2, l=2, m=1, nt=2)
    built = build_sdp(ch, p)
    prog = built.program

    def count(prefix):
        return sum(lab.startswith(prefix) for lab in prog.row_labels)

    assert count("sinr") == 2
    assert count("cp_budget") == 1
    assert count("loss") == 6          # three rows tie each 2x2 loss block
    assert count("txcap") == 2
    assert count("harvest") == 1
    assert count("backhaul") == 2
    assert prog.n_rows == 14

    dims = sorted(prog.block_dims, reverse=True)
    assert dims[:2] == [8, 8]          # embedded W_k, 2 * N_T * L
    assert dims[2:4] == [2, 2]         # line-loss Schur blocks
    assert dims[4:] == [1] * 11        # E_l, phi, and 8 inequality slacks
    assert prog.n_blocks == 15


def test_masked_pairs_add_equality_rows():
    p, ch = make_instance(3, k=2, l=2, m=1, nt=2)
    mask = ActivationMask(active=np.array([[True, False], [False, True]]))
    built = build_sdp(ch, p, mask=mask)
    offs = [lab for lab in built.program.row_labels if lab.startswith("off")]
    assert sorted(offs) == ["off0_1", "off1_0"]


def test_infinite_tx_cap_drops_rows():
    p, ch = make_instance(3, k=2, l=2, m=1, nt=2, rrh_max_tx_mw=np.inf)
    built = build_sdp(ch, p)
    assert not any(lab.startswith("txcap") for lab in built.program.row_labels)


# -------------------------------------------------------- analytic oracle

def test_single_ir_matches_closed_form():
    rng = np.random.default_rng(11)
    for trial in range(5):
        nt = int(rng.integers(2, 5))
        p = SystemParams(n_rrh=1, n_ir=1, n_er=0, n_t=nt, delta=0.0, eta=1.0)
        h = 0.1 * (rng.normal(size=(1, nt)) + 1j * rng.normal(size=(1, nt)))
        ch = ChannelSet(h=h, g=np.zeros((0, nt), dtype=complex),
                        n_rrh=1, n_t=nt)
        built, sol = solved(p, ch)
        expect = float(p.sinr_target[0]) * p.noise_mw / np.sum(np.abs(h) ** 2)
        got = built.p_unit * sol.primal_objective
        np.testing.assert_allclose(got, expect, rtol=1e-6)
        ext = extract_beamformers(built, sol)
        np.testing.assert_allclose(ext.beams.total_power(), expect, rtol=1e-6)
        # optimum is a matched-filter beam: w parallel to h
        align = abs(np.vdot(h[0], ext.beams.w[0])) ** 2
        np.testing.assert_allclose(
            align, np.sum(np.abs(h) ** 2) * ext.beams.total_power(), rtol=1e-6)


def test_sinr_targets_tight_without_harvesting():
    p, ch = make_instance(21, k=3, l=2, m=0, nt=2, delta=0.0, eta=1.0)
    built, sol = solved(p, ch)
    ext = extract_beamformers(built, sol)
    sinr = compute_sinr(ext.beams, ch, p)
    np.testing.assert_allclose(sinr, p.sinr_target, rtol=1e-6)


def test_epigraph_scales_with_delta():
    p1, ch = make_instance(31, k=2, l=2, m=1, nt=2, delta=1.0, eta=1.0)
    p2, _ = make_instance(31, k=2, l=2, m=1, nt=2, delta=2.0, eta=1.0)
    b1, s1 = solved(p1, ch)
    b2, s2 = solved(p2, ch)
    e1 = extract_beamformers(b1, s1)
    e2 = extract_beamformers(b2, s2)
    np.testing.assert_allclose(e2.phi, 2.0 * e1.phi, rtol=1e-5)
    np.testing.assert_allclose(np.abs(e2.beams.w), np.abs(e1.beams.w),
                               rtol=0, atol=1e-4 * np.abs(e1.beams.w).max())


# -------------------------------------------------------------- extraction

def test_principal_component_rank_one():
    w_mat = np.zeros((3, 3), dtype=complex)
    w_mat[0, 0] = 4.0
    w, ratio = principal_component(w_mat)
    np.testing.assert_allclose(w, [2.0, 0.0, 0.0], atol=1e-14)
    assert ratio == 0.0


def test_principal_component_rank_two():
    w, ratio = principal_component(np.diag([2.0, 1.0]).astype(complex))
    np.testing.assert_allclose(w, [np.sqrt(2.0), 0.0], atol=1e-14)
    assert ratio == pytest.approx(0.5, rel=1e-12)


def test_principal_component_zero_matrix_rejected():
    with pytest.raises(ValueError):
        principal_component(np.zeros((2, 2), dtype=complex))


def test_principal_component_phase_is_canonical():
    # largest-magnitude entry comes out real nonnegative
    v = np.array([1.0 * np.exp(1j * 0.7), 2.0 * np.exp(-1j * 1.1)])
    w_mat = np.outer(v, v.conj())
    w, ratio = principal_component(w_mat)
    assert abs(w[1].imag) < 1e-12 and w[1].real > 0
    assert ratio < 1e-14


def test_extraction_solution_feasible():
    p, ch = make_instance(41, k=2, l=2, m=1, nt=2)
    built, sol = solved(p, ch, tol=1e-10)
    ext = extract_beamformers(built, sol)
    assert not ext.rank_flags.any()
    rep = check_feasibility(ext.beams, ext.supplies, ch, p, tol=1e-6)
    assert rep.all_ok, (rep.c1_margin, rep.c2_margin, rep.c3_margin,
                        rep.c4_margin, rep.c5_margin)


def test_masked_slice_forced_to_zero():
    p, ch = make_instance(47, k=2, l=2, m=1, nt=2)
    mask = ActivationMask(active=np.array([[True, False], [False, True]]))
    built, sol = solved(p, ch, mask=mask)
    ext = extract_beamformers(built, sol)
    powers = ext.beams.slice_powers()
    assert powers[0, 1] <= 1e-8 * powers[0, 0]
    assert powers[1, 0] <= 1e-8 * powers[1, 1]
    active = compute_backhaul(ext.beams, p).per_link
    r = float(p.rate_per_ir[0])
    np.testing.assert_allclose(active, [r, r], rtol=1e-12)


def test_unserved_ir_is_structural_error():
    p, ch = make_instance(3, k=2, l=2, m=1, nt=2)
    bad = np.array([[True, True], [False, False]])
    with pytest.raises(ValueError):
        ActivationMask(active=bad)
    # bypassing the container is caught by build_sdp itself
    mask = ActivationMask(active=np.array([[True, True], [True, True]]))
    mask.active[1, :] = False
    with pytest.raises(ValueError):
        build_sdp(ch, p, mask=mask)


# ------------------------------------------------------------- invariants

def test_trace_forms_match_vector_forms():
    p, ch = make_instance(53, k=3, l=2, m=2, nt=2)
    built, sol = solved(p, ch)
    ext = extract_beamformers(built, sol)
    assert ext.ratios.max() <= 1e-8
    w_mats = built.solution_matrices(sol)

    def trace(mat, wj):
        # vdot conjugates its first argument, so this is Tr(mat @ wj)
        return np.real(np.vdot(mat, wj))

    sinr_trace = []
    for k in range(3):
        h_k = np.outer(ch.h[k], ch.h[k].conj())
        sig = trace(h_k, w_mats[k])
        intf = sum(trace(h_k, w_mats[j]) for j in range(3) if j != k)
        sinr_trace.append(sig / (intf + p.noise_mw))
    np.testing.assert_allclose(compute_sinr(ext.beams, ch, p), sinr_trace,
                               rtol=1e-6)
    harvested = compute_harvested(ext.beams, ch, p)
    trace_harvest = p.rf_efficiency * np.array([
        sum(trace(np.outer(ch.g[m_], ch.g[m_].conj()), wj) for wj in w_mats)
        for m_ in range(2)])
    np.testing.assert_allclose(harvested, trace_harvest, rtol=1e-6)


def test_relaxation_lower_bounds_feasible_points():
    p, ch = make_instance(59, k=2, l=2, m=1, nt=3)
    built, sol = solved(p, ch)
    ext = extract_beamformers(built, sol)
    # inflate the extracted solution: still feasible, costs more
    for blow in (1.1, 1.5, 2.0):
        w = blow * ext.beams.w
        surrogate = (p.delta * max(
            sum(np.sum(np.abs(w[k, l * p.n_t:(l + 1) * p.n_t]) ** 2)
                * float(p.rate_per_ir[k]) for k in range(2))
            for l in range(2))
            + p.eta * np.sum(np.abs(w) ** 2))
        sdp_opt = built.p_unit * sol.primal_objective
        assert sdp_opt <= surrogate * (1 + 1e-8)


def test_adding_active_pairs_never_hurts():
    p, ch = make_instance(61, k=2, l=2, m=1, nt=2)
    sparse = ActivationMask(active=np.array([[True, False], [False, True]]))
    _, s_sparse = solved(p, ch, mask=sparse)
    _, s_full = solved(p, ch)
    assert s_full.primal_objective <= s_sparse.primal_objective * (1 + 1e-7)


def test_scale_covariance_of_transmit_power():
    kw = dict(k=2, l=2, m=1, nt=2, min_harvest_mw=0.0, delta=0.0, eta=1.0)
    p, ch = make_instance(67, **kw)
    c = 10.0
    p2 = SystemParams(n_rrh=2, n_ir=2, n_er=1, n_t=2, min_harvest_mw=0.0,
                      delta=0.0, eta=1.0, noise_mw=p.noise_mw * c ** 2)
    ch2 = ChannelSet(h=c * ch.h, g=c * ch.g, n_rrh=2, n_t=2)
    b1, s1 = solved(p, ch)
    b2, s2 = solved(p2, ch2)
    np.testing.assert_allclose(b2.p_unit * s2.primal_objective,
                               b1.p_unit * s1.primal_objective, rtol=1e-6)


# ------------------------------------------------------- dual certificates

def test_rank_certificate_single_ir():
    p = SystemParams(n_rrh=1, n_ir=1, n_er=0, n_t=3, delta=0.0, eta=1.0)
    rng = np.random.default_rng(71)
    h = 0.1 * (rng.normal(size=(1, 3)) + 1j * rng.normal(size=(1, 3)))
    ch = ChannelSet(h=h, g=np.zeros((0, 3), dtype=complex), n_rrh=1, n_t=3)
    built, sol = solved(p, ch, tol=1e-10)
    cert = verify_rank_certificate(built, sol)
    assert cert.vanishing_counts.tolist() == [1]
    assert cert.complementarity.max() <= 1e-6
    assert cert.ok


def test_rank_certificate_random_instances():
    for seed in (101, 102, 103):
        p, ch = make_instance(seed, k=3, l=2, m=1, nt=2)
        built, sol = solved(p, ch, tol=1e-10)
        ext = extract_beamformers(built, sol)
        assert ext.ratios.max() <= 1e-6
        cert = verify_rank_certificate(built, sol)
        assert cert.vanishing_counts.tolist() == [1, 1, 1]
        assert cert.complementarity.max() <= 1e-6


def test_rank_certificate_respects_mask():
    p, ch = make_instance(47, k=2, l=2, m=1, nt=2)
    mask = ActivationMask(active=np.array([[True, False], [False, True]]))
    built, sol = solved(p, ch, mask=mask, tol=1e-10)
    cert = verify_rank_certificate(built, sol)
    # restricted to the served slice, each user still has one null direction
    assert cert.vanishing_counts.tolist() == [1, 1]
    assert cert.ok


def test_dual_structure():
    p, ch = make_instance(83, k=2, l=2, m=1, nt=2, delta=1.0, eta=1.0)
    built, sol = solved(p, ch, tol=1e-10)
    duals = sdp_duals(built, sol)
    floor = -1e-7
    assert (duals.xi >= floor).all()
    assert duals.lam >= floor
    assert (duals.psi >= floor).all()
    assert (duals.theta >= floor).all()
    assert (duals.tau >= floor).all()
    assert (duals.chi >= floor).all()
    assert (duals.omega >= floor).all()
    # epigraph stationarity: the C7 multipliers form a convex combination
    assert duals.chi.sum() == pytest.approx(1.0, abs=1e-6)
    for y_k in duals.y_mats:
        assert np.linalg.eigvalsh(y_k).min() >= -1e-7 * np.linalg.norm(y_k)
