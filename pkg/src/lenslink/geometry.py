"""Coordinate frames for the tilted imaging receiver and its steerable lens.

The room frame OXYZ is fixed; the receiver frame O'X'Y'Z' is obtained by a
Z-rotation through the azimuth theta_R followed by a Y-rotation through the
polar angle phi_R.  The lens frame hangs off the receiver frame the same way
(theta_L, phi_L).  Everything downstream (LoS gains, refraction, spot
projection) is phrased in terms of the two unit normals and the world
positions produced here.

All angles are radians; degrees only exist at the config/CLI boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Vec3 = np.ndarray  # shape (3,), float64

TWO_PI = 2.0 * math.pi


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=float)


def unit(v: Vec3) -> Vec3:
    """Normalize v; raises on zero vectors (norm within 1e-12 of 1 after)."""
    n = float(np.linalg.norm(v))
    if n < 1e-300:
        raise ValueError("cannot normalize zero vector")
    return v / n


# ---------------------------------------------------------------------------
# poses and lens states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pose:
    """Receiver position plus orientation (azimuth theta_R, polar phi_R).

    theta_R is wrapped into [0, 2*pi); phi_R must lie in [0, pi/2] (screen
    cannot face below the horizontal).
    """

    position: Vec3
    theta_R: float
    phi_R: float

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float))
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        object.__setattr__(self, "theta_R", float(self.theta_R) % TWO_PI)
        if not 0.0 <= self.phi_R <= math.pi / 2 + 1e-12:
            raise ValueError(f"phi_R out of [0, pi/2]: {self.phi_R}")
        object.__setattr__(self, "phi_R", float(min(self.phi_R, math.pi / 2)))


@dataclass(frozen=True)
class LensState:
    """Liquid-lens setting: focal length f and tilt angles, plus the fixed
    offset d_len of the lens centroid along the receiver's Z' axis."""

    f: float
    theta_L: float
    phi_L: float
    d_len: float = 0.02

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("focal length must be positive")
        if self.d_len <= 0:
            raise ValueError("d_len must be positive")


Rot3 = np.ndarray  # 3x3 orthonormal, det +1


def rot_z(theta: float) -> Rot3:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(phi: float) -> Rot3:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def receiver_rotation(pose: Pose) -> Rot3:
    """Room-to-receiver rotation R1 = R_Y(phi_R) @ R_Z(theta_R).

    Rows of the result are the receiver axes X', Y', Z' expressed in room
    coordinates; the inverse is the transpose.
    """
    return rot_y(pose.phi_R) @ rot_z(pose.theta_R)


def lens_rotation(lens: LensState) -> Rot3:
    """Receiver-to-lens rotation R2 = R_Y(phi_L) @ R_Z(theta_L)."""
    return rot_y(lens.phi_L) @ rot_z(lens.theta_L)


def receiver_normal(pose: Pose) -> Vec3:
    """Unit normal of the PD plane in room coordinates.

    Closed form (cos t sin p, sin t sin p, cos p) with t = theta_R,
    p = phi_R; identical to R1^T @ (0,0,1).
    """
    st, ct = math.sin(pose.theta_R), math.cos(pose.theta_R)
    sp, cp = math.sin(pose.phi_R), math.cos(pose.phi_R)
    return np.array([ct * sp, st * sp, cp])


def lens_normal(pose: Pose, lens: LensState) -> Vec3:
    """Unit normal of the lens plane in room coordinates: R1^T R2^T (0,0,1)."""
    R1 = receiver_rotation(pose)
    R2 = lens_rotation(lens)
    return R1.T @ (R2.T @ np.array([0.0, 0.0, 1.0]))


def pd_world_position(pose: Pose, pd_local: Vec3) -> Vec3:
    """World position of a point given in receiver-plane coordinates (z'=0)."""
    R1 = receiver_rotation(pose)
    return R1.T @ np.asarray(pd_local, dtype=float) + pose.position


def lens_world_position(pose: Pose, lens: LensState) -> Vec3:
    """Lens centroid: receiver position + d_len along the receiver normal."""
    return pose.position + lens.d_len * receiver_normal(pose)


# ---------------------------------------------------------------------------
# room / receiver layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoomConfig:
    """Room box and the ceiling LED grid.

    The sqrt(N_t) x sqrt(N_t) LED grid is centred on the room footprint with
    pitch d_tx; each luminary is a square of side d_ts at z = led_height.
    lambertian_m is derived from the half-power semi-angle:
    m = -ln 2 / ln cos(theta_half).
    """

    X_m: float = 5.0
    Y_m: float = 5.0
    Z_m: float = 3.5
    N_t: int = 16
    d_tx: float = 0.5
    d_ts: float = 0.25
    led_height: float = 3.5
    theta_half: float = math.radians(60.0)
    lambertian_m: float = field(init=False)

    def __post_init__(self):
        side = math.isqrt(self.N_t)
        if side * side != self.N_t or self.N_t <= 0:
            raise ValueError("N_t must be a positive perfect square")
        extent = (side - 1) * self.d_tx + self.d_ts
        if extent > min(self.X_m, self.Y_m):
            raise ValueError("LED grid does not fit inside the room footprint")
        m = -math.log(2.0) / math.log(math.cos(self.theta_half))
        if m <= 0:
            raise ValueError("lambertian order must be positive")
        object.__setattr__(self, "lambertian_m", m)

    def led_center(self, i: int) -> Vec3:
        """Center of LED i (row-major over the ceiling grid)."""
        side = math.isqrt(self.N_t)
        if not 0 <= i < self.N_t:
            raise IndexError(f"LED index {i} out of range")
        row, col = divmod(i, side)
        x0 = self.X_m / 2 - (side - 1) * self.d_tx / 2
        y0 = self.Y_m / 2 - (side - 1) * self.d_tx / 2
        return vec3(x0 + col * self.d_tx, y0 + row * self.d_tx,
                    self.led_height)

    def led_centers(self) -> np.ndarray:
        return np.stack([self.led_center(i) for i in range(self.N_t)])

    def led_vertices(self, i: int) -> np.ndarray:
        """4x3 corners of LED i (CCW seen from below)."""
        c = self.led_center(i)
        h = self.d_ts / 2
        offs = np.array([[-h, -h, 0], [h, -h, 0], [h, h, 0], [-h, h, 0]])
        return c + offs

    def contains(self, p: Vec3) -> bool:
        x, y, z = p
        return (0 <= x <= self.X_m and 0 <= y <= self.Y_m
                and 0 <= z <= self.Z_m)


@dataclass(frozen=True)
class ReceiverConfig:
    """Imaging receiver: sqrt(N_r) x sqrt(N_r) square PDs of side d_rs on
    pitch d_rx, a field-of-view half angle, responsivity, and the lens
    constants (aperture factor k_eta, relative refractive index n_l)."""

    N_r: int = 16
    d_rs: float = 0.005
    d_rx: float = 0.005
    phi_fov: float = math.radians(90.0)
    responsivity_r: float = 0.75
    k_eta: float = 0.1
    n_l: float = 1.5
    aperture_mode: str = "focal"   # "focal": A_L = pi (k_eta f)^2; "fixed": A_L_fixed
    A_L_fixed: float = 1e-4

    def __post_init__(self):
        side = math.isqrt(self.N_r)
        if side * side != self.N_r or self.N_r <= 0:
            raise ValueError("N_r must be a positive perfect square")
        if self.d_rs > self.d_rx + 1e-15:
            raise ValueError("PD side d_rs cannot exceed the pitch d_rx")
        if self.n_l <= 1:
            raise ValueError("relative refractive index must exceed 1")
        if self.aperture_mode not in ("focal", "fixed"):
            raise ValueError("aperture_mode must be 'focal' or 'fixed'")

    def aperture_area(self, f: float) -> float:
        """Collecting area of the lens: pi (k_eta f)^2, or the fixed value."""
        if self.aperture_mode == "fixed":
            return self.A_L_fixed
        return math.pi * (self.k_eta * f) ** 2

    def pd_centers_local(self) -> np.ndarray:
        """(N_r, 2) PD centers in receiver-plane coordinates, row-major."""
        side = math.isqrt(self.N_r)
        x0 = -(side - 1) * self.d_rx / 2
        pts = [(x0 + c * self.d_rx, x0 + r * self.d_rx)
               for r in range(side) for c in range(side)]
        return np.array(pts)

    def array_half_extent(self) -> float:
        """Half the side of the bounding square of the whole PD array."""
        side = math.isqrt(self.N_r)
        return ((side - 1) * self.d_rx + self.d_rs) / 2
