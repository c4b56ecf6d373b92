"""Lens-parameter optimization: exhaustive grid search with refinement, the
closed-form closest-LED-selection (CLS) scheme, the vertical-upward lens
orientation (VULO) baseline, and the solve_p1 dispatcher.

The objective throughout is the union-bound BER of `lenslink.ber` at the
configured (fixed) noise level; only (f, theta_L, phi_L) vary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _fast
from .ber import ber_bound, bound_batch
from .geometry import (LensState, Pose, ReceiverConfig, RoomConfig,
                       lens_normal, receiver_normal, receiver_rotation)
from .gsm import GsmCodebook, GsmConfig
from .optics import channel_matrix


@dataclass(frozen=True)
class LensBounds:
    f_min: float = 0.01
    f_max: float = 0.15
    theta_min: float = 0.0
    theta_max: float = 2.0 * math.pi
    phi_min: float = 0.0
    phi_max: float = math.radians(30.0)

    def __post_init__(self):
        if (self.f_min > self.f_max or self.theta_min > self.theta_max
                or self.phi_min > self.phi_max):
            raise ValueError("lens bounds need min <= max per dimension")

    def clamp(self, lens: LensState):
        """Project a lens state onto the box; returns (lens, was_clamped)."""
        f = min(max(lens.f, self.f_min), self.f_max)
        th = min(max(lens.theta_L, self.theta_min), self.theta_max)
        ph = min(max(lens.phi_L, self.phi_min), self.phi_max)
        clamped = (f != lens.f) or (th != lens.theta_L) or (ph != lens.phi_L)
        if clamped:
            return replace(lens, f=f, theta_L=th, phi_L=ph), True
        return lens, False


@dataclass
class OptResult:
    lens: LensState
    ber_bound: float
    evaluations: int
    scheme: str
    clamped: bool = False


def reference_lens(d_len: float = 0.02) -> LensState:
    """The no-adjustment lens: untilted, f = 3 cm."""
    return LensState(f=0.03, theta_L=0.0, phi_L=0.0, d_len=d_len)


# ---------------------------------------------------------------------------
# closed-form schemes
# ---------------------------------------------------------------------------

def closest_led(pose: Pose, lens_d: float, room: RoomConfig) -> int:
    """Index of the LED nearest to the lens centre (ties -> lowest index)."""
    p_len = pose.position + lens_d * receiver_normal(pose)
    d = np.linalg.norm(room.led_centers() - p_len, axis=1)
    return int(np.argmin(d))


def cls_lens(pose: Pose, room: RoomConfig, rx: ReceiverConfig,
             d_len: float = 0.02, bounds: LensBounds | None = None
             ) -> LensState:
    """Point the lens axis at the closest LED and focus on the PD plane.

    The tilt angles invert the receiver rotation exactly: with u the unit
    vector from the lens centre to the closest LED and v = R1 u,
    phi_L = arccos(v_z) and theta_L = atan2(v_y, v_x), which makes
    lens_normal coincide with u to machine precision.  The focal length
    f = d_len / (u . eta_R) puts the focal point on the PD plane.
    bounds=None returns the unclamped solution.
    """
    i_star = closest_led(pose, d_len, room)
    eta_R = receiver_normal(pose)
    p_len = pose.position + d_len * eta_R
    u = room.led_center(i_star) - p_len
    u = u / np.linalg.norm(u)
    v = receiver_rotation(pose) @ u
    phi_L = math.acos(min(1.0, max(-1.0, float(v[2]))))
    if math.sin(phi_L) < 1e-12:
        warnings.warn("lens axis already vertical in the receiver frame; "
                      "theta_L set to 0", RuntimeWarning, stacklevel=2)
        theta_L = 0.0
    else:
        theta_L = math.atan2(float(v[1]), float(v[0])) % (2.0 * math.pi)
    axial = float(u @ eta_R)
    if axial < 1e-9:
        raise ValueError("closest LED lies in the receiver plane")
    lens = LensState(f=d_len / axial, theta_L=theta_L, phi_L=phi_L,
                     d_len=d_len)
    if bounds is not None:
        lens, _ = bounds.clamp(lens)
    return lens


def vulo_lens(pose: Pose, rx: ReceiverConfig, d_len: float = 0.02,
              bounds: LensBounds | None = None) -> LensState:
    """Force the lens axis vertically upward: theta_L = pi, phi_L = phi_R,
    f = d_len / cos(phi_R)."""
    if pose.phi_R >= math.pi / 2 - 1e-12:
        raise ValueError("focal length diverges at phi_R = pi/2")
    lens = LensState(f=d_len / math.cos(pose.phi_R), theta_L=math.pi,
                     phi_L=pose.phi_R, d_len=d_len)
    if bounds is not None:
        lens, _ = bounds.clamp(lens)
    return lens


# ---------------------------------------------------------------------------
# exhaustive grid search
# ---------------------------------------------------------------------------

def _evaluate_lens_batch(pose, room, rx, cfg, codebook, fs, ths, phs,
                         d_len, use_batch):
    if use_batch:
        Hb = _fast.channel_batch(pose, fs, ths, phs, room, rx, d_len=d_len)
        return bound_batch(Hb, codebook, cfg, rx.responsivity_r)
    vals = np.empty(len(fs))
    for k in range(len(fs)):
        lens = LensState(f=fs[k], theta_L=ths[k], phi_L=phs[k], d_len=d_len)
        H = channel_matrix(pose, lens, room, rx)
        vals[k] = ber_bound(H, codebook, cfg, rx.responsivity_r)
    return vals


def exhaustive_search(pose: Pose, room: RoomConfig, rx: ReceiverConfig,
                      cfg: GsmConfig, bounds: LensBounds,
                      grid=(9, 9, 9), eps_ber: float = 1e-6,
                      max_refine: int = 5, codebook: GsmCodebook = None,
                      d_len: float = 0.02, use_batch: bool = True,
                      extra_candidates=(), objective=None) -> OptResult:
    """Grid-scan the BER bound over the lens box, then refine around the
    incumbent on a box two grid cells wide until the improvement drops
    below eps_ber (or max_refine rounds).

    `objective(f, th, ph) -> value` (vectorized over equal-length arrays)
    replaces the BER bound when given -- used by tests to inject analytic
    landscapes.  `extra_candidates` are (f, theta_L, phi_L) triples scored
    alongside the first grid (closed-form scheme seeding).
    """
    if any(g < 2 for g in grid):
        raise ValueError("grid counts must be >= 2 per dimension")
    if objective is None:
        from .gsm import build_codebook
        if codebook is None:
            codebook = build_codebook(cfg)

        def objective(fs, ths, phs):
            return _evaluate_lens_batch(pose, room, rx, cfg, codebook,
                                        fs, ths, phs, d_len, use_batch)

    lo = np.array([bounds.f_min, bounds.theta_min, bounds.phi_min])
    hi = np.array([bounds.f_max, bounds.theta_max, bounds.phi_max])
    n = np.array(grid, dtype=int)
    evaluations = 0
    best_val = math.inf
    best_pt = None

    box_lo, box_hi = lo.copy(), hi.copy()
    for round_idx in range(max_refine + 1):
        axes = [np.linspace(box_lo[k], box_hi[k], n[k]) for k in range(3)]
        FF, TT, PP = np.meshgrid(*axes, indexing="ij")
        fs, ths, phs = FF.ravel(), TT.ravel(), PP.ravel()
        if round_idx == 0 and len(extra_candidates):
            ext = np.array([(c[0], c[1], c[2]) for c in extra_candidates])
            fs = np.concatenate([fs, ext[:, 0]])
            ths = np.concatenate([ths, ext[:, 1]])
            phs = np.concatenate([phs, ext[:, 2]])
        vals = np.asarray(objective(fs, ths, phs), dtype=float)
        evaluations += len(vals)
        k_best = int(np.argmin(vals))
        improved = best_val - float(vals[k_best])
        if vals[k_best] < best_val:
            best_val = float(vals[k_best])
            best_pt = np.array([fs[k_best], ths[k_best], phs[k_best]])
        if round_idx > 0 and improved < eps_ber:
            break
        # shrink: box two grid cells wide centred on the incumbent
        cell = (box_hi - box_lo) / (n - 1)
        box_lo = np.maximum(lo, best_pt - cell)
        box_hi = np.minimum(hi, best_pt + cell)
    lens = LensState(f=float(best_pt[0]), theta_L=float(best_pt[1]),
                     phi_L=float(best_pt[2]), d_len=d_len)
    return OptResult(lens=lens, ber_bound=best_val, evaluations=evaluations,
                     scheme="exhaustive")


# ---------------------------------------------------------------------------
# dispatcher
# ---------------------------------------------------------------------------

def solve_p1(pose: Pose, room: RoomConfig, rx: ReceiverConfig,
             cfg: GsmConfig, bounds: LensBounds, scheme: str,
             codebook: GsmCodebook = None, d_len: float = 0.02,
             pbml_model=None, **search_kw) -> OptResult:
    """Optimize the lens for one pose with the chosen scheme.

    scheme is one of exhaustive | cls | vulo | pbml | none.  Closed-form
    results are clamped to the bounds (flagged on the result); the
    exhaustive search additionally scores the clamped CLS/VULO/reference
    lenses so that its result never loses to them by grid placement alone.
    """
    from .gsm import build_codebook
    if codebook is None:
        codebook = build_codebook(cfg)

    def finish(lens, clamped, scheme_tag, evaluations):
        H = channel_matrix(pose, lens, room, rx)
        val = ber_bound(H, codebook, cfg, rx.responsivity_r)
        return OptResult(lens=lens, ber_bound=val, evaluations=evaluations,
                         scheme=scheme_tag, clamped=clamped)

    if scheme == "cls":
        lens, clamped = bounds.clamp(cls_lens(pose, room, rx, d_len=d_len))
        return finish(lens, clamped, "cls", 1)
    if scheme == "vulo":
        lens, clamped = bounds.clamp(vulo_lens(pose, rx, d_len=d_len))
        return finish(lens, clamped, "vulo", 1)
    if scheme == "none":
        lens, clamped = bounds.clamp(reference_lens(d_len))
        return finish(lens, clamped, "none", 1)
    if scheme == "pbml":
        if pbml_model is None:
            raise ValueError("pbml scheme needs a trained model")
        lens = pbml_model.predict_lens(pose)
        lens, clamped = bounds.clamp(lens)
        return finish(lens, clamped, "pbml", 1)
    if scheme == "exhaustive":
        cands = []
        for maker in (cls_lens,):
            try:
                lens, _ = bounds.clamp(maker(pose, room, rx, d_len=d_len))
                cands.append((lens.f, lens.theta_L, lens.phi_L))
            except ValueError:
                pass
        try:
            lens, _ = bounds.clamp(vulo_lens(pose, rx, d_len=d_len))
            cands.append((lens.f, lens.theta_L, lens.phi_L))
        except ValueError:
            pass
        ref, _ = bounds.clamp(reference_lens(d_len))
        cands.append((ref.f, ref.theta_L, ref.phi_L))
        res = exhaustive_search(pose, room, rx, cfg, bounds,
                                codebook=codebook, d_len=d_len,
                                extra_candidates=cands, **search_kw)
        # report the float64 bound at the winning lens
        H = channel_matrix(pose, res.lens, room, rx)
        res.ber_bound = ber_bound(H, codebook, cfg, rx.responsivity_r)
        return res
    raise ValueError(f"unknown scheme: {scheme!r}")
