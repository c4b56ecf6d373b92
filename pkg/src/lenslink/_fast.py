"""Vectorized evaluation of the optics pipeline over many lens states.

Numerically equivalent to looping `optics.channel_matrix` over lens states
(tests assert agreement), but evaluates refraction, spot projection, and the
spot/PD clipping for a whole (f, theta_L, phi_L) grid in numpy at once.
The polygon clipper is a padded-array Sutherland-Hodgman specialized to the
axis-aligned PD squares of the receiver plane.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import (Pose, ReceiverConfig, RoomConfig, receiver_normal,
                       receiver_rotation)

_VMAX = 12


def _clip_halfplane(P: np.ndarray, cnt: np.ndarray, axis: int, sign: float,
                    c: float):
    """One Sutherland-Hodgman pass against sign*(coord - c) >= 0.

    P is (N, VMAX, 2) padded polygons with per-row vertex counts cnt.
    Returns the clipped (P', cnt').
    """
    N, V, _ = P.shape
    idx = np.arange(V)
    valid = idx[None, :] < cnt[:, None]
    d = sign * (P[:, :, axis] - c)
    inside = (d >= 0.0) & valid
    nxt = idx[None, :] + 1
    nxt = np.where(nxt < cnt[:, None], nxt, 0)
    d_next = np.take_along_axis(d, nxt, axis=1)
    P_next = np.take_along_axis(P, nxt[:, :, None], axis=1)
    keep_v = inside
    crossing = ((d >= 0.0) != (d_next >= 0.0)) & valid
    denom = d - d_next
    denom = np.where(np.abs(denom) < 1e-300, 1.0, denom)
    t = d / denom
    X = P + t[:, :, None] * (P_next - P)
    # interleave [vertex_k, crossing_k] emissions, then compact left
    M = np.empty((N, 2 * V), dtype=bool)
    M[:, 0::2] = keep_v
    M[:, 1::2] = crossing
    vals = np.empty((N, 2 * V, 2))
    vals[:, 0::2] = P
    vals[:, 1::2] = X
    pos = np.cumsum(M, axis=1) - 1
    new_cnt = pos[:, -1] + 1
    new_cnt = np.where(M.any(axis=1), new_cnt, 0)
    out = np.zeros_like(P)
    rows = np.nonzero(M)[0]
    out[rows, pos[M]] = vals[M]
    return out, new_cnt.astype(np.int64)


def _clip_rect_block(polys: np.ndarray, xmin, xmax, ymin, ymax) -> np.ndarray:
    N, k, _ = polys.shape
    areas = np.zeros(N)
    P = np.zeros((N, _VMAX, 2))
    P[:, :k] = polys
    cnt = np.full(N, k, dtype=np.int64)
    alive = np.arange(N)
    for axis, sign, c in ((0, 1.0, xmin), (0, -1.0, xmax),
                          (1, 1.0, ymin), (1, -1.0, ymax)):
        P, cnt = _clip_halfplane(P, cnt, axis, sign, c)
        m = cnt > 0
        if not m.all():
            P, cnt, alive = P[m], cnt[m], alive[m]
            if alive.size == 0:
                return areas
    areas[alive] = _shoelace_padded(P, cnt)
    return areas


def clip_rect_batch(polys: np.ndarray, xmin, xmax, ymin, ymax,
                    chunk: int = 65536) -> np.ndarray:
    """Intersection areas of (N, k, 2) polygons with one rectangle."""
    N = polys.shape[0]
    if N <= chunk:
        return _clip_rect_block(polys, xmin, xmax, ymin, ymax)
    out = np.empty(N)
    for s in range(0, N, chunk):
        out[s:s + chunk] = _clip_rect_block(polys[s:s + chunk],
                                            xmin, xmax, ymin, ymax)
    return out


def _shoelace_padded(P: np.ndarray, cnt: np.ndarray) -> np.ndarray:
    N, V, _ = P.shape
    idx = np.arange(V)
    valid = idx[None, :] < cnt[:, None]
    nxt = idx[None, :] + 1
    nxt = np.where(nxt < cnt[:, None], nxt, 0)
    Pn = np.take_along_axis(P, nxt[:, :, None], axis=1)
    terms = P[:, :, 0] * Pn[:, :, 1] - Pn[:, :, 0] * P[:, :, 1]
    terms = np.where(valid, terms, 0.0)
    area = 0.5 * np.abs(terms.sum(axis=1))
    return np.where(cnt >= 3, area, 0.0)


def channel_batch(pose: Pose, f: np.ndarray, theta_L: np.ndarray,
                  phi_L: np.ndarray, room: RoomConfig, rx: ReceiverConfig,
                  d_len: float = 0.02) -> np.ndarray:
    """Channel matrices (B, N_r, N_t) for B lens states at one pose."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    theta_L = np.atleast_1d(np.asarray(theta_L, dtype=float))
    phi_L = np.atleast_1d(np.asarray(phi_L, dtype=float))
    B = f.shape[0]
    n_l = rx.n_l
    R1 = receiver_rotation(pose)
    eta_R = receiver_normal(pose)
    p_len = pose.position + d_len * eta_R

    st, ct = np.sin(theta_L), np.cos(theta_L)
    sp, cp = np.sin(phi_L), np.cos(phi_L)
    eta_len = np.stack([ct * sp, st * sp, cp], axis=1) @ R1    # (B, 3)

    centers = room.led_centers()                               # (Nt, 3)
    verts = np.stack([room.led_vertices(i) for i in range(room.N_t)])
    n_t = room.N_t

    rel_c = centers - p_len
    d_c = np.linalg.norm(rel_c, axis=1)
    eta_il = rel_c / d_c[:, None]
    cos_theta = eta_il[:, 2]
    cos_phi = eta_il @ eta_len.T                               # (Nt, B)
    cos_phi = cos_phi.T                                        # (B, Nt)

    if rx.aperture_mode == "fixed":
        A_L = np.full(B, rx.A_L_fixed)
    else:
        A_L = math.pi * (rx.k_eta * f) ** 2
    m = room.lambertian_m
    cos_fov = math.cos(rx.phi_fov)
    emit = np.where(cos_theta > 0.0, cos_theta, 0.0) ** m
    gains = ((m + 1) * A_L[:, None] / (2 * math.pi * d_c ** 2)
             * emit * np.maximum(cos_phi, 0.0))
    gains[cos_phi < max(cos_fov, 0.0) - 1e-12] = 0.0

    rel_v = verts - p_len                                      # (Nt, 4, 3)
    dist_v = np.linalg.norm(rel_v, axis=2)
    eta_in = rel_v / dist_v[:, :, None]
    d_obj = np.einsum("qvk,bk->bqv", rel_v, eta_len)           # (B, Nt, 4)

    el = eta_len[:, None, None, :]
    cxi = np.cross(el, eta_in[None, :, :, :])
    s2 = np.einsum("bqvk,bqvk->bqv", cxi, cxi) / (n_l * n_l)
    eta_ref = np.cross(el, cxi) / n_l - el * np.sqrt(1.0 - s2)[..., None]

    fb = f[:, None, None]
    mag = fb / (fb + d_obj)
    v_img = n_l * mag * d_obj
    denom = -np.einsum("bqvk,bk->bqv", eta_ref, eta_len)
    ok = (d_obj > 1e-9) & (denom > 1e-12)
    lam = np.where(ok, v_img / np.where(ok, denom, 1.0), 0.0)
    p_img = p_len + lam[..., None] * eta_ref                   # (B, Nt, 4, 3)

    local = np.einsum("bqvk,jk->bqvj", p_img - pose.position, R1)
    xy = local[..., :2]                                        # (B, Nt, 4, 2)

    x0, x1 = xy[..., 0], np.roll(xy[..., 0], -1, axis=2)
    y0, y1 = xy[..., 1], np.roll(xy[..., 1], -1, axis=2)
    spot_area = 0.5 * np.abs((x0 * y1 - x1 * y0).sum(axis=2))  # (B, Nt)

    good = ok.all(axis=2) & (gains > 0.0) & (spot_area > 1e-18)

    polys = xy.reshape(B * n_t, 4, 2)
    h = rx.d_rs / 2
    pd_centers = rx.pd_centers_local()
    # clip only (PD, spot) pairs whose bounding boxes meet, in PD-local
    # coordinates so every pair shares the same clip rectangle
    bx0, bx1 = polys[:, :, 0].min(1), polys[:, :, 0].max(1)
    by0, by1 = polys[:, :, 1].min(1), polys[:, :, 1].max(1)
    px, py = pd_centers[:, 0, None], pd_centers[:, 1, None]
    hit = ((bx0[None] <= px + h) & (bx1[None] >= px - h)
           & (by0[None] <= py + h) & (by1[None] >= py - h))
    hit &= good.reshape(-1)[None, :]
    j_idx, p_idx = np.nonzero(hit)
    overlap = np.zeros((rx.N_r, B * n_t))
    if j_idx.size:
        shifted = polys[p_idx] - pd_centers[j_idx][:, None, :]
        overlap[j_idx, p_idx] = clip_rect_batch(shifted, -h, h, -h, h)
    overlap = overlap.reshape(rx.N_r, B, n_t).transpose(1, 0, 2)

    ratio = overlap / np.where(spot_area > 1e-18, spot_area, 1.0)[:, None, :]
    H = gains[:, None, :] * ratio
    H[~good[:, None, :].repeat(rx.N_r, axis=1)] = 0.0
    return H
