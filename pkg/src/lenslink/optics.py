"""Geometric-optics channel pipeline: Lambertian LoS gain to the lens
aperture, vector refraction, light-spot projection onto the PD plane, and
spot/PD overlap ratios.

The imaging gain from LED i to PD j factorizes as

    H[j][i] = h_i_los * area(spot_i ∩ pd_j) / area(spot_i)

with h_i_los the Lambertian line-of-sight gain collected by the lens
aperture.  Spots are built by tracing the four LED-corner chief rays through
the lens centre: each ray is refracted (vector Snell), the corner image is
placed on the refracted ray at the paraxial image depth, and the image quad
is flattened onto the PD plane along the receiver normal.

This module is the scalar reference; `lenslink._fast` evaluates the same
pipeline vectorized over many lens states for the optimizers.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import (LensState, Pose, ReceiverConfig, RoomConfig, Vec3,
                       lens_normal, lens_world_position, receiver_normal,
                       receiver_rotation)

Quad = np.ndarray  # (4, 3) world coordinates, coplanar

_EPS_PARALLEL = 1e-12


# ---------------------------------------------------------------------------
# LoS gain
# ---------------------------------------------------------------------------

def los_gain(led_index: int, pose: Pose, lens: LensState,
             room: RoomConfig, rx: ReceiverConfig) -> float:
    """Lambertian LoS gain from LED `led_index` into the lens aperture.

    h = (m+1) A_L / (2 pi d^2) * cos(theta_i)^m * cos(phi_i) * FoV-gate,
    theta_i the emission angle at the LED (from the downward LED axis),
    phi_i the incidence angle at the lens (from the lens normal).
    A_L = pi (k_eta f)^2 unless the receiver is in fixed-aperture mode.
    """
    p_led = room.led_center(led_index)
    p_len = lens_world_position(pose, lens)
    rel = p_led - p_len
    d = float(np.linalg.norm(rel))
    if d < 1e-12:
        raise ValueError("LED-lens distance is zero")
    eta_il = rel / d                       # lens -> LED, unit
    # LED axis points straight down (-z): cos(theta_i) = (-eta_il) . (-z)
    cos_theta = float(eta_il[2])
    if cos_theta <= 0.0:
        return 0.0
    cos_phi = float(eta_il @ lens_normal(pose, lens))
    if cos_phi < 0.0:
        return 0.0
    phi_i = math.acos(min(1.0, cos_phi))
    if phi_i > rx.phi_fov:
        return 0.0
    m = room.lambertian_m
    A_L = rx.aperture_area(lens.f)
    return (m + 1) * A_L / (2 * math.pi * d * d) * cos_theta ** m * cos_phi


# ---------------------------------------------------------------------------
# refraction
# ---------------------------------------------------------------------------

def refract(incident_unit: Vec3, lens_nrm: Vec3, n_l: float) -> Vec3:
    """Refract a chief ray at the lens plane (vector form of Snell's law).

    `incident_unit` points from the lens centre toward the source; the
    returned unit vector points onward into the receiver side, making angle
    asin(sin(theta_in)/n_l) with the inward lens axis.  Normal incidence
    passes through undeviated (returns -lens_nrm).
    """
    e = np.asarray(incident_unit, dtype=float)
    n = np.asarray(lens_nrm, dtype=float)
    cxi = np.cross(n, e)
    s2 = float(cxi @ cxi) / (n_l * n_l)    # sin^2(theta_out)
    under = 1.0 - s2
    if under < 0.0:
        raise ValueError("total internal reflection: sqrt argument negative")
    out = np.cross(n, cxi) / n_l - n * math.sqrt(under)
    return out


# ---------------------------------------------------------------------------
# spot projection
# ---------------------------------------------------------------------------

def _corner_image(p_q: Vec3, p_len: Vec3, eta_len: Vec3, f: float,
                  n_l: float) -> Vec3:
    """Image of one LED corner: refracted chief ray meets the paraxial image
    plane for this corner (axial depth v = n_l * m * d behind the lens,
    m = f/(f+d))."""
    rel = p_q - p_len
    dist = float(np.linalg.norm(rel))
    if dist < 1e-12:
        raise ValueError("LED corner coincides with lens centre")
    eta_in = rel / dist
    d_obj = float(rel @ eta_len)           # axial object distance
    if d_obj <= 1e-9:
        raise ValueError("LED corner not in front of the lens plane")
    eta_ref = refract(eta_in, eta_len, n_l)
    mag = f / (f + d_obj)
    v_img = n_l * mag * d_obj
    denom = -float(eta_ref @ eta_len)
    if denom < _EPS_PARALLEL:
        raise ValueError("refracted ray parallel to the image plane")
    lam = v_img / denom
    return p_len + lam * eta_ref


def project_spot(led_index: int, pose: Pose, lens: LensState,
                 room: RoomConfig, rx: ReceiverConfig) -> Quad:
    """Project the light spot of LED `led_index` onto the PD plane.

    Returns the 4x3 world-coordinate quad of the corner images flattened
    onto the PD plane along the receiver normal.
    """
    p_len = lens_world_position(pose, lens)
    eta_len = lens_normal(pose, lens)
    eta_r = receiver_normal(pose)
    verts = room.led_vertices(led_index)
    out = np.empty((4, 3))
    for k in range(4):
        p_img = _corner_image(verts[k], p_len, eta_len, lens.f, rx.n_l)
        out[k] = p_img - eta_r * float((p_img - pose.position) @ eta_r)
    return out


def project_spot_raw(led_index: int, pose: Pose, lens: LensState,
                     room: RoomConfig, rx: ReceiverConfig) -> Quad:
    """Diagnostic: raw crossings of the refracted corner rays with the PD
    plane (no image-plane step; independent of f except through refraction).
    """
    p_len = lens_world_position(pose, lens)
    eta_len = lens_normal(pose, lens)
    eta_r = receiver_normal(pose)
    verts = room.led_vertices(led_index)
    out = np.empty((4, 3))
    h = float((p_len - pose.position) @ eta_r)
    for k in range(4):
        rel = verts[k] - p_len
        eta_in = rel / np.linalg.norm(rel)
        eta_ref = refract(eta_in, eta_len, rx.n_l)
        denom = float(eta_ref @ eta_r)
        if abs(denom) < _EPS_PARALLEL:
            raise ValueError("refracted ray parallel to the PD plane")
        lam = -h / denom
        out[k] = p_len + lam * eta_ref
    return out


def spot_local_2d(spot: Quad, pose: Pose) -> np.ndarray:
    """(4, 2) receiver-plane coordinates of a PD-plane quad."""
    R1 = receiver_rotation(pose)
    loc = (np.asarray(spot) - pose.position) @ R1.T
    return loc[:, :2]


# ---------------------------------------------------------------------------
# polygon areas and clipping
# ---------------------------------------------------------------------------

def _shoelace2d(pts: np.ndarray) -> float:
    """Signed shoelace area of a 2-D polygon (positive if CCW)."""
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _plane_basis(q: np.ndarray):
    """Orthonormal in-plane basis for a (nearly) planar polygon."""
    e1 = q[1] - q[0]
    n1 = np.linalg.norm(e1)
    if n1 < 1e-15:
        e1 = q[2] - q[0]
        n1 = np.linalg.norm(e1)
        if n1 < 1e-15:
            return None
    e1 = e1 / n1
    best, best_n = None, 0.0
    for k in range(2, len(q)):
        cand = q[k] - q[0]
        nrm = np.cross(e1, cand)
        n2 = np.linalg.norm(nrm)
        if n2 > best_n:
            best, best_n = cand, n2
    if best is None or best_n < 1e-15:
        return None
    e2 = best - (best @ e1) * e1
    e2 = e2 / np.linalg.norm(e2)
    return e1, e2


def quad_area(q: Quad) -> float:
    """Area of a planar quad via the shoelace formula in its own plane.

    Degenerate (collinear) quads return 0.
    """
    q = np.asarray(q, dtype=float)
    basis = _plane_basis(q)
    if basis is None:
        return 0.0
    e1, e2 = basis
    rel = q - q[0]
    pts = np.stack([rel @ e1, rel @ e2], axis=1)
    return abs(_shoelace2d(pts))


def clip_polygon(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman: clip `subject` by convex CCW `clipper` (both 2-D).

    Returns the (possibly empty) clipped polygon.
    """
    output = [tuple(p) for p in np.asarray(subject, dtype=float)]
    clip = np.asarray(clipper, dtype=float)
    m = len(clip)
    for k in range(m):
        if not output:
            break
        a = clip[k]
        b = clip[(k + 1) % m]
        ex, ey = b[0] - a[0], b[1] - a[1]
        inp = output
        output = []
        prev = inp[-1]
        prev_in = ex * (prev[1] - a[1]) - ey * (prev[0] - a[0]) >= 0.0
        for cur in inp:
            cur_in = ex * (cur[1] - a[1]) - ey * (cur[0] - a[0]) >= 0.0
            if cur_in != prev_in:
                # edge crossing: intersect segment prev->cur with the line
                dx, dy = cur[0] - prev[0], cur[1] - prev[1]
                denom = ex * dy - ey * dx
                if abs(denom) > 1e-300:
                    t = (ex * (a[1] - prev[1]) - ey * (a[0] - prev[0])) / denom
                    output.append((prev[0] + t * dx, prev[1] + t * dy))
            if cur_in:
                output.append(cur)
            prev, prev_in = cur, cur_in
    return np.array(output, dtype=float).reshape(-1, 2)


def _is_convex(pts: np.ndarray) -> bool:
    n = len(pts)
    sign = 0.0
    for k in range(n):
        a, b, c = pts[k], pts[(k + 1) % n], pts[(k + 2) % n]
        cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cr) < 1e-18:
            continue
        if sign == 0.0:
            sign = cr
        elif cr * sign < 0.0:
            return False
    return True


def _clip_area_2d(subject: np.ndarray, clipper: np.ndarray) -> float:
    """Intersection area of a simple subject polygon with a convex clipper."""
    if _is_convex(subject):
        out = clip_polygon(subject, clipper)
        if len(out) < 3:
            return 0.0
        return abs(_shoelace2d(out))
    # concave subject: signed fan decomposition.  1_polygon equals the
    # orientation-signed sum of the fan triangles' indicators, and clipping
    # against a convex region distributes over that sum, so the clipped
    # signed areas add up to the intersection area (up to overall sign).
    total = 0.0
    n = len(subject)
    for k in range(1, n - 1):
        tri = np.stack([subject[0], subject[k], subject[k + 1]])
        sgn = _shoelace2d(tri)
        if sgn == 0.0:
            continue
        out = clip_polygon(tri, clipper)
        if len(out) >= 3:
            total += math.copysign(abs(_shoelace2d(out)), sgn)
    return abs(total)


def intersection_area(spot: Quad, pd: Quad) -> float:
    """Overlap area of two coplanar quads (world coordinates)."""
    spot = np.asarray(spot, dtype=float)
    pd = np.asarray(pd, dtype=float)
    basis = _plane_basis(pd)
    if basis is None:
        basis = _plane_basis(spot)
        if basis is None:
            return 0.0
    e1, e2 = basis
    origin = pd[0]
    s2 = np.stack([(spot - origin) @ e1, (spot - origin) @ e2], axis=1)
    p2 = np.stack([(pd - origin) @ e1, (pd - origin) @ e2], axis=1)
    if _shoelace2d(p2) < 0.0:
        p2 = p2[::-1]
    if len(np.unique(np.round(p2, 15), axis=0)) < 3:
        return 0.0
    return _clip_area_2d(s2, p2)


# ---------------------------------------------------------------------------
# channel matrix
# ---------------------------------------------------------------------------

def pd_quads_local(rx: ReceiverConfig) -> np.ndarray:
    """(N_r, 4, 2) corner coordinates of every PD in the receiver plane."""
    h = rx.d_rs / 2
    offs = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    return rx.pd_centers_local()[:, None, :] + offs[None, :, :]


def channel_matrix(pose: Pose, lens: LensState, room: RoomConfig,
                   rx: ReceiverConfig) -> np.ndarray:
    """Full N_r x N_t imaging channel matrix for one pose and lens state.

    Columns of LEDs that are out of the field of view, behind the lens
    plane, or whose spot degenerates are zero.
    """
    H = np.zeros((rx.N_r, room.N_t))
    pds = pd_quads_local(rx)
    for i in range(room.N_t):
        gain = los_gain(i, pose, lens, room, rx)
        if gain <= 0.0:
            continue
        try:
            spot = project_spot(i, pose, lens, room, rx)
        except ValueError:
            continue
        s2 = spot_local_2d(spot, pose)
        area = abs(_shoelace2d(s2))
        if area < 1e-18:
            continue
        for j in range(rx.N_r):
            ov = _clip_area_2d(s2, pds[j])
            if ov > 0.0:
                H[j, i] = gain * ov / area
    return H
