"""User mobility (clothoid paths) and time-correlated receiver orientation
(AR(1) polar angle), fused into Pose time series.

The clothoid heading integrates dtheta/ds = kappa0 + kappa1*s, so

    theta(s) = theta0 + kappa0*s + 0.5*kappa1*s^2

and positions follow by quadrature of (cos theta, sin theta).  Hitting a room
wall specularly reflects the heading (x-wall: theta -> pi - theta, y-wall:
theta -> -theta) while the clothoid parameters keep running, which keeps the
closed-form heading valid between reflections.

The polar angle follows phi^k = c0 + c1*phi^{k-1} + w^k with w ~ N(0, sigma_w^2),
initialized at the stationary mean c0/(1-c1) and clamped to [0, pi/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, vec3


@dataclass(frozen=True)
class ClothoidParams:
    x0: float
    y0: float
    theta0: float = 0.0
    kappa0: float = 0.0
    kappa1: float = 0.0
    sigma_p2: float = 0.0
    speed: float = 1.0

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("speed must be positive")


@dataclass(frozen=True)
class ArParams:
    c0: float
    c1: float
    sigma_w2: float
    T_s: float = 1e-4
    T_c: float = 1e-3
    mean_phi: float = math.radians(30.0)
    sigma_phi2: float = math.radians(math.sqrt(10.0)) ** 2

    def __post_init__(self):
        if abs(self.c1) >= 1.0:
            raise ValueError("AR(1) needs |c1| < 1")

    @staticmethod
    def from_targets(mean_phi: float, sigma_phi2: float, T_s: float,
                     T_c: float, corr_at_coherence: float = 0.05
                     ) -> "ArParams":
        """Derive (c0, c1, sigma_w2) from stationary targets.

        The coherence time is where the autocorrelation decays to
        corr_at_coherence, so c1 = corr_at_coherence ** (T_s / T_c);
        c0 = (1 - c1) * mean; sigma_w2 = (1 - c1^2) * sigma_phi2.
        """
        c1 = corr_at_coherence ** (T_s / T_c)
        return ArParams(c0=(1.0 - c1) * mean_phi, c1=c1,
                        sigma_w2=(1.0 - c1 * c1) * sigma_phi2,
                        T_s=T_s, T_c=T_c, mean_phi=mean_phi,
                        sigma_phi2=sigma_phi2)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _adaptive_simpson(fn, a: float, b: float, tol: float) -> float:
    """Adaptive Simpson quadrature to absolute tolerance `tol`."""
    fa, fb = fn(a), fn(b)
    m = 0.5 * (a + b)
    fm = fn(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        lm = 0.5 * (a + (a + b) / 2)
        rm = 0.5 * ((a + b) / 2 + b)
        flm, frm = fn(lm), fn(rm)
        mid = 0.5 * (a + b)
        left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(a, mid, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(mid, b, fm, frm, fb, right, tol / 2, depth - 1))

    return rec(a, b, fa, fm, fb, whole, tol, 30)


def clothoid_path(params: ClothoidParams, n_samples: int, seed=None,
                  T_s: float = 0.01, bounds=None) -> np.ndarray:
    """Sample the clothoid at arc steps ds = speed * T_s.

    Returns (n_samples, 3) rows (x, y, heading).  `bounds` = (X_m, Y_m)
    activates specular wall reflection; None leaves the path unbounded.
    With sigma_p2 > 0 a Gaussian perturbation of that variance is drawn once
    per path and added to both kappa0 and kappa1.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    k0, k1 = params.kappa0, params.kappa1
    if params.sigma_p2 > 0.0:
        rng = np.random.default_rng(seed)
        sp = math.sqrt(params.sigma_p2)
        k0 = k0 + sp * rng.standard_normal()
        k1 = k1 + sp * rng.standard_normal()

    def theta(s):
        return params.theta0 + k0 * s + 0.5 * k1 * s * s

    ds = params.speed * T_s
    out = np.empty((n_samples, 3))
    x, y = params.x0, params.y0
    sign, offset = 1.0, 0.0
    out[0] = (x, y, (sign * theta(0.0) + offset) % (2 * math.pi))
    for k in range(1, n_samples):
        s0, s1 = (k - 1) * ds, k * ds
        x += _adaptive_simpson(
            lambda s: math.cos(sign * theta(s) + offset), s0, s1, 1e-9)
        y += _adaptive_simpson(
            lambda s: math.sin(sign * theta(s) + offset), s0, s1, 1e-9)
        if bounds is not None:
            X_m, Y_m = bounds
            for _ in range(4):   # a corner can need two reflections
                if x < 0.0:
                    x = -x
                    sign, offset = -sign, math.pi - offset
                elif x > X_m:
                    x = 2 * X_m - x
                    sign, offset = -sign, math.pi - offset
                elif y < 0.0:
                    y = -y
                    sign, offset = -sign, -offset
                elif y > Y_m:
                    y = 2 * Y_m - y
                    sign, offset = -sign, -offset
                else:
                    break
        out[k] = (x, y, (sign * theta(s1) + offset) % (2 * math.pi))
    return out


def ar_polar_series(params: ArParams, n_samples: int, seed=None) -> np.ndarray:
    """Generate the AR(1) polar-angle series, clamped to [0, pi/2]."""
    if abs(params.c1) >= 1.0:
        raise ValueError("AR(1) needs |c1| < 1")
    rng = np.random.default_rng(seed)
    sw = math.sqrt(params.sigma_w2)
    noise = sw * rng.standard_normal(n_samples) if sw > 0 else np.zeros(n_samples)
    out = np.empty(n_samples)
    phi = params.c0 / (1.0 - params.c1)
    for k in range(n_samples):
        phi = params.c0 + params.c1 * phi + noise[k]
        out[k] = phi
    return np.clip(out, 0.0, math.pi / 2)


@dataclass(frozen=True)
class Trajectory:
    samples: tuple        # ((t, Pose), ...)
    T_s: float

    def __len__(self):
        return len(self.samples)

    def poses(self):
        return [p for _, p in self.samples]


def make_trajectory(clothoid: ClothoidParams, ar: ArParams, n: int, seed=0,
                    z: float = 0.0, room=None) -> Trajectory:
    """Fuse a clothoid path with an AR(1) polar series into Pose samples.

    theta_R is the path heading; z is fixed at the receiver height; wall
    reflection uses the room footprint when a room is given.
    """
    ss = np.random.SeedSequence(seed)
    path_seed, ar_seed = ss.spawn(2)
    bounds = (room.X_m, room.Y_m) if room is not None else None
    path = clothoid_path(clothoid, n, seed=path_seed, T_s=ar.T_s,
                         bounds=bounds)
    phis = ar_polar_series(ar, n, seed=ar_seed)
    samples = []
    for k in range(n):
        pose = Pose(position=vec3(path[k, 0], path[k, 1], z),
                    theta_R=path[k, 2], phi_R=phis[k])
        samples.append((k * ar.T_s, pose))
    return Trajectory(samples=tuple(samples), T_s=ar.T_s)
