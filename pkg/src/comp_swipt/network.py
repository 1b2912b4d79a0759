"""Topology generation and random channel realizations.

Geometry: the RRHs sit on a ring around the origin sized so neighboring RRHs
are exactly ``rrh_spacing_m`` apart (for three RRHs this is the equilateral
triangle with the configured side; one RRH degenerates to the origin). IRs
and ERs are placed uniformly by area inside the disc of radius
``disc_radius_m`` centered at the origin.

Channels combine log-distance path loss with independent Rayleigh fading:
entry i of the RRH-l slice of a user's channel vector is
sqrt(gain_l) * (a + jb) with a, b ~ N(0, 1/2), so the per-entry second moment
equals the linear path gain. Vectors are stacked RRH-major: entries
[l*N_T, (l+1)*N_T) belong to RRH l, matching the beamformer super-vector
layout used everywhere else.

All randomness flows through an explicit numpy Generator; one generator pass
produces identical results on every platform numpy supports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import SystemParams


@dataclass
class Topology:
    rrh_xy: np.ndarray        # (L, 2) meters
    ir_xy: np.ndarray         # (K, 2)
    er_xy: np.ndarray         # (M, 2)
    disc_radius_m: float
    rrh_spacing_m: float

    def ir_distances(self) -> np.ndarray:
        """(K, L) distances from each IR to each RRH."""
        return _pairwise(self.ir_xy, self.rrh_xy)

    def er_distances(self) -> np.ndarray:
        """(M, L) distances from each ER to each RRH."""
        return _pairwise(self.er_xy, self.rrh_xy)


@dataclass
class ChannelSet:
    """One fading realization: rows are users, columns RRH-major antennas."""
    h: np.ndarray             # (K, L*N_T) complex
    g: np.ndarray             # (M, L*N_T) complex
    n_rrh: int
    n_t: int


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)


def rrh_ring(n_rrh: int, spacing_m: float) -> np.ndarray:
    """RRH coordinates: regular n-gon with side ``spacing_m``, first vertex up."""
    if n_rrh == 1:
        return np.zeros((1, 2))
    radius = spacing_m / (2.0 * np.sin(np.pi / n_rrh))
    ang = np.pi / 2.0 + 2.0 * np.pi * np.arange(n_rrh) / n_rrh
    return radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def build_topology(params: SystemParams, rng: np.random.Generator) -> Topology:
    """Place RRHs deterministically and draw K + M user positions.

    Draw order (fixed for reproducibility): one uniform pair (radius quantile,
    angle) per user, IRs first then ERs. Radius r = R*sqrt(u) gives the
    uniform-by-area law.
    """
    rrh = rrh_ring(params.n_rrh, params.rrh_spacing_m)
    ring_radius = float(np.max(np.linalg.norm(rrh, axis=1)))
    if params.disc_radius_m < ring_radius:
        raise ValueError(
            f"disc radius {params.disc_radius_m} m cannot contain the RRH ring "
            f"(circumradius {ring_radius:.3f} m)")
    n_users = params.n_ir + params.n_er
    u = rng.random((n_users, 2))
    r = params.disc_radius_m * np.sqrt(u[:, 0])
    ang = 2.0 * np.pi * u[:, 1]
    xy = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    return Topology(rrh_xy=rrh, ir_xy=xy[:params.n_ir],
                    er_xy=xy[params.n_ir:], disc_radius_m=params.disc_radius_m,
                    rrh_spacing_m=params.rrh_spacing_m)


def path_loss_db(d_m, params: SystemParams):
    """Log-distance loss: anchor at the reference distance, slope 10*alpha per
    decade, distances clamped below ``min_distance_m``. Scalar or array."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("distances must be positive")
    eff = np.maximum(d, params.min_distance_m)
    return (params.reference_loss_db()
            + 10.0 * params.path_loss_exponent
            * np.log10(eff / params.ref_distance_m))


def channel_gain(d_m, params: SystemParams):
    """Linear power gain 10^(-PL/10)."""
    return 10.0 ** (-path_loss_db(d_m, params) / 10.0)


def _fade(amp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((amp.shape[0], 2, amp.shape[1]))
    return amp * np.sqrt(0.5) * (z[:, 0, :] + 1j * z[:, 1, :])


def sample_channels(topo: Topology, params: SystemParams,
                    rng: np.random.Generator) -> ChannelSet:
    """Draw one Rayleigh realization for all users (IR block first, then ER).

    Per user the real parts of all L*N_T entries are drawn before the
    imaginary parts (one standard-normal block per user), so a given seed
    pins the exact realization.
    """
    amp_ir = np.repeat(np.sqrt(channel_gain(topo.ir_distances(), params)),
                       params.n_t, axis=1)
    amp_er = np.repeat(np.sqrt(channel_gain(topo.er_distances(), params)),
                       params.n_t, axis=1)
    h = _fade(amp_ir, rng)
    g = _fade(amp_er, rng)
    return ChannelSet(h=h, g=g, n_rrh=params.n_rrh, n_t=params.n_t)


def split_rrh_blocks(vec: np.ndarray, n_rrh: int, n_t: int) -> list[np.ndarray]:
    """Slice a stacked channel / beamformer vector into per-RRH blocks."""
    if vec.shape[-1] != n_rrh * n_t:
        raise ValueError(f"vector length {vec.shape[-1]} != {n_rrh} * {n_t}")
    return [vec[..., l * n_t:(l + 1) * n_t] for l in range(n_rrh)]


# ----------------------------------------------------------- text snapshots
#
# Record-per-line formats for replaying a topology / realization outside the
# process that produced it. Floats are written with repr and parse back to
# the identical IEEE-754 value.

def dump_topology(topo: Topology, path) -> None:
    with open(path, "w") as f:
        f.write("# topology snapshot: coordinates in meters\n")
        f.write(f"meta disc_radius_m={float(topo.disc_radius_m)!r} "
                f"rrh_spacing_m={float(topo.rrh_spacing_m)!r}\n")
        for tag, xy in (("rrh", topo.rrh_xy), ("ir", topo.ir_xy),
                        ("er", topo.er_xy)):
            for row in xy:
                f.write(f"{tag} {float(row[0])!r} {float(row[1])!r}\n")


def load_topology(path) -> Topology:
    meta = {}
    recs = {"rrh": [], "ir": [], "er": []}
    for line in open(path):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "meta":
            for kv in parts[1:]:
                key, val = kv.split("=")
                meta[key] = float(val)
        else:
            recs[parts[0]].append([float(parts[1]), float(parts[2])])
    as_xy = {tag: np.array(rows).reshape(len(rows), 2) for tag, rows in recs.items()}
    return Topology(rrh_xy=as_xy["rrh"], ir_xy=as_xy["ir"], er_xy=as_xy["er"],
                    disc_radius_m=meta["disc_radius_m"],
                    rrh_spacing_m=meta["rrh_spacing_m"])


def dump_channels(ch: ChannelSet, path) -> None:
    with open(path, "w") as f:
        f.write("# channel snapshot: one user per line, re im pairs, RRH-major\n")
        f.write(f"meta n_rrh={ch.n_rrh} n_t={ch.n_t} "
                f"n_ir={ch.h.shape[0]} n_er={ch.g.shape[0]}\n")
        for tag, mat in (("h", ch.h), ("g", ch.g)):
            for i, row in enumerate(mat):
                vals = " ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in row)
                f.write(f"{tag} {i} {vals}\n")


def load_channels(path) -> ChannelSet:
    meta = {}
    rows = {"h": {}, "g": {}}
    for line in open(path):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "meta":
            for kv in parts[1:]:
                key, val = kv.split("=")
                meta[key] = int(val)
            continue
        tag, idx = parts[0], int(parts[1])
        flat = np.array([float(v) for v in parts[2:]])
        rows[tag][idx] = flat[0::2] + 1j * flat[1::2]
    n = meta["n_rrh"] * meta["n_t"]
    h = np.zeros((meta["n_ir"], n), dtype=complex)
    g = np.zeros((meta["n_er"], n), dtype=complex)
    for idx, vec in rows["h"].items():
        h[idx] = vec
    for idx, vec in rows["g"].items():
        g[idx] = vec
    return ChannelSet(h=h, g=g, n_rrh=meta["n_rrh"], n_t=meta["n_t"])
