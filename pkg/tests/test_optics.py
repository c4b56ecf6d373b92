import math

import numpy as np
import numpy.testing as npt
import pytest

from lenslink.geometry import (LensState, Pose, ReceiverConfig, RoomConfig,
                               lens_normal, lens_world_position, vec3)
from lenslink.optics import (channel_matrix, clip_polygon, intersection_area,
                             los_gain, pd_quads_local, project_spot,
                             quad_area, refract, spot_local_2d)

try:
    from shapely.geometry import Polygon
    HAVE_SHAPELY = True
except ImportError:          # pragma: no cover
    HAVE_SHAPELY = False


def upright_pose(x=2.5, y=2.5, z=0.0):
    return Pose(position=vec3(x, y, z), theta_R=0.0, phi_R=0.0)


def random_pose(rng):
    return Pose(position=vec3(rng.uniform(0.5, 4.5), rng.uniform(0.5, 4.5),
                              rng.uniform(0.0, 1.5)),
                theta_R=rng.uniform(0, 2 * math.pi),
                phi_R=rng.uniform(0, math.radians(60)))


def random_lens(rng):
    return LensState(f=rng.uniform(0.01, 0.15),
                     theta_L=rng.uniform(0, 2 * math.pi),
                     phi_L=rng.uniform(0, math.radians(30)))


# ---------------------------------------------------------------------------
# LoS gain
# ---------------------------------------------------------------------------

def test_axial_gain_value():
    """Receiver straight under an LED, fixed 1 cm^2 aperture, d = 2.5 m:
    gain = (m+1) A_L / (2 pi d^2) with both cosines equal to one."""
    room = RoomConfig()
    rx = ReceiverConfig(aperture_mode="fixed")
    led = room.led_center(0)
    d = 2.5
    # place the pose so that the *lens* (2 cm above) sits at distance d
    pose = upright_pose(led[0], led[1], led[2] - d - 0.02)
    lens = LensState(f=0.03, theta_L=0.0, phi_L=0.0)
    g = los_gain(0, pose, lens, room, rx)
    npt.assert_allclose(g, 5.092958178940651e-06, rtol=1e-12)


def test_lambertian_order_from_half_angle():
    room = RoomConfig()
    assert abs(room.lambertian_m - 1.0) < 1e-12
    npt.assert_allclose(RoomConfig(theta_half=math.radians(30)).lambertian_m,
                        -math.log(2) / math.log(math.cos(math.radians(30))),
                        rtol=1e-12)


def test_focal_aperture_scales_gain():
    room = RoomConfig()
    rx = ReceiverConfig()         # focal mode: A_L = pi (k_eta f)^2
    pose = upright_pose(*room.led_center(0)[:2], 0.0)
    g1 = los_gain(0, pose, LensState(f=0.02, theta_L=0, phi_L=0), room, rx)
    g2 = los_gain(0, pose, LensState(f=0.04, theta_L=0, phi_L=0), room, rx)
    npt.assert_allclose(g2 / g1, 4.0, rtol=1e-12)


def test_gain_zero_outside_fov():
    room = RoomConfig()
    rx = ReceiverConfig(phi_fov=math.radians(20))
    # tilt the receiver so the corner LED is far outside 20 degrees
    pose = Pose(position=vec3(0.5, 0.5, 0.0), theta_R=0.0,
                phi_R=math.radians(80))
    lens = LensState(f=0.03, theta_L=0.0, phi_L=0.0)
    # LED 15 is in the opposite room corner
    assert los_gain(15, pose, lens, room, rx) == 0.0


def test_gain_positive_in_nominal_geometry():
    room = RoomConfig()
    rx = ReceiverConfig()
    rng = np.random.default_rng(2)
    hits = 0
    for _ in range(50):
        pose = upright_pose(rng.uniform(1, 4), rng.uniform(1, 4), 0.0)
        lens = LensState(f=0.03, theta_L=0.0, phi_L=0.0)
        for i in range(16):
            g = los_gain(i, pose, lens, room, rx)
            assert g >= 0.0
            hits += g > 0
    assert hits > 0


# ---------------------------------------------------------------------------
# refraction
# ---------------------------------------------------------------------------

def test_normal_incidence_passes_straight():
    n = np.array([0.0, 0.0, 1.0])
    out = refract(np.array([0.0, 0.0, 1.0]), n, 1.5)
    npt.assert_allclose(out, -n, atol=1e-15)


def test_snell_angle_30_deg():
    n = np.array([0.0, 0.0, 1.0])
    e = np.array([math.sin(math.radians(30)), 0.0, math.cos(math.radians(30))])
    out = refract(e, n, 1.5)
    ang = math.degrees(math.asin(np.linalg.norm(np.cross(-out, -n))))
    npt.assert_allclose(ang, 19.47122063449069, rtol=1e-12)


def test_snell_property_random():
    """sin(theta_out) = sin(theta_in)/n_l for randomly oriented rays/normals."""
    rng = np.random.default_rng(7)
    for _ in range(2000):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        e = rng.normal(size=3)
        e /= np.linalg.norm(e)
        if e @ n < 0:
            e = -e                      # incident from the normal's side
        n_l = rng.uniform(1.2, 2.0)
        out = refract(e, n, n_l)
        npt.assert_allclose(np.linalg.norm(out), 1.0, atol=1e-12)
        sin_in = np.linalg.norm(np.cross(n, e))
        sin_out = np.linalg.norm(np.cross(n, out))
        assert abs(sin_out - sin_in / n_l) < 1e-10
        # transmitted ray continues into the far side
        assert out @ n < 0
        # refraction happens in the plane of incidence
        assert abs(np.cross(n, e) @ out) < 1e-10


# ---------------------------------------------------------------------------
# spot projection
# ---------------------------------------------------------------------------

def test_spot_size_matches_magnification_oracle():
    """Axial geometry: LED square of side 0.25 m at distance 2.5 m, f = 3 cm.
    The projected side must sit within 2% of the thin-lens magnification
    prediction m = f/(f+d), i.e. 2.9644 mm."""
    room = RoomConfig()
    rx = ReceiverConfig()
    led = room.led_center(5)
    pose = upright_pose(led[0], led[1], led[2] - 2.5 - 0.02)
    lens = LensState(f=0.03, theta_L=0.0, phi_L=0.0)
    spot = project_spot(5, pose, lens, room, rx)
    xy = spot_local_2d(spot, pose)
    side = np.linalg.norm(xy[1] - xy[0])
    oracle = 2.964426877470356e-3
    assert abs(side - oracle) / oracle < 0.02
    # spot is centred under the axis
    npt.assert_allclose(xy.mean(axis=0), [0.0, 0.0], atol=1e-9)


def test_spot_shrinks_with_focal_length():
    room = RoomConfig()
    rx = ReceiverConfig()
    led = room.led_center(5)
    pose = upright_pose(led[0], led[1], 0.0)

    def side(f):
        xy = spot_local_2d(project_spot(5, pose,
                                        LensState(f=f, theta_L=0, phi_L=0),
                                        room, rx), pose)
        return np.linalg.norm(xy[1] - xy[0])

    assert side(0.01) < side(0.05) < side(0.15)


# ---------------------------------------------------------------------------
# areas and clipping
# ---------------------------------------------------------------------------

def test_quad_area_unit_square():
    sq = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    npt.assert_allclose(quad_area(sq), 1.0, rtol=1e-15)


def test_quad_area_translation_invariant():
    # regression guard: a per-edge absolute-value shoelace would give 21 here
    sq = np.array([[10, 10, 0], [11, 10, 0], [11, 11, 0], [10, 11, 0]],
                  dtype=float)
    npt.assert_allclose(quad_area(sq), 1.0, rtol=1e-12)


def test_quad_area_orientation_invariant():
    sq = np.array([[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 0, 0]], dtype=float)
    npt.assert_allclose(quad_area(sq), 1.0, rtol=1e-15)


def test_quad_area_degenerate():
    line = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
    assert quad_area(line) == 0.0


def test_quad_area_tilted_plane():
    # unit square rotated out of the xy plane keeps its area
    sq = np.array([[0, 0, 0], [1, 0, 1], [1, 1, 1], [0, 1, 0]], dtype=float)
    npt.assert_allclose(quad_area(sq), math.sqrt(2), rtol=1e-12)


def test_clip_polygon_known_overlap():
    subj = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float)
    clip = np.array([[1, 1], [3, 1], [3, 3], [1, 3]], dtype=float)
    out = clip_polygon(subj, clip)
    x, y = out[:, 0], out[:, 1]
    area = 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    npt.assert_allclose(area, 1.0, rtol=1e-12)


def test_clip_polygon_disjoint_and_contained():
    subj = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    far = subj + 10.0
    assert len(clip_polygon(subj, far)) == 0
    big = np.array([[-5, -5], [5, -5], [5, 5], [-5, 5]], dtype=float)
    out = clip_polygon(subj, big)
    x, y = out[:, 0], out[:, 1]
    area = 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    npt.assert_allclose(area, 1.0, rtol=1e-12)


@pytest.mark.skipif(not HAVE_SHAPELY, reason="shapely not installed")
def test_intersection_area_against_shapely():
    rng = np.random.default_rng(12)
    for _ in range(400):
        # random convex quad (sorted angularly around its centroid)
        pts = rng.uniform(-2, 2, (4, 2))
        ang = np.arctan2(pts[:, 1] - pts[:, 1].mean(),
                         pts[:, 0] - pts[:, 0].mean())
        quad = pts[np.argsort(ang)]
        cx, cy = rng.uniform(-2, 2, 2)
        h = rng.uniform(0.2, 1.5)
        sq = np.array([[cx - h, cy - h], [cx + h, cy - h],
                       [cx + h, cy + h], [cx - h, cy + h]])
        spot3 = np.hstack([quad, np.zeros((4, 1))])
        pd3 = np.hstack([sq, np.zeros((4, 1))])
        got = intersection_area(spot3, pd3)
        want = Polygon(quad).intersection(Polygon(sq)).area
        assert abs(got - want) < 1e-10


@pytest.mark.skipif(not HAVE_SHAPELY, reason="shapely not installed")
def test_intersection_area_nonconvex_subject():
    # a dart (concave quad) against a square: fan triangulation path
    dart = np.array([[0, 0], [2, 0.2], [4, 0], [2, 3]], dtype=float)
    sq = np.array([[1, -1], [3, -1], [3, 1], [1, 1]], dtype=float)
    got = intersection_area(np.hstack([dart, np.zeros((4, 1))]),
                            np.hstack([sq, np.zeros((4, 1))]))
    want = Polygon(dart).intersection(Polygon(sq)).area
    assert abs(got - want) < 1e-10


# ---------------------------------------------------------------------------
# channel matrix
# ---------------------------------------------------------------------------

def test_channel_matrix_shape_and_sign():
    room = RoomConfig()
    rx = ReceiverConfig()
    H = channel_matrix(upright_pose(), LensState(f=0.03, theta_L=0, phi_L=0),
                       room, rx)
    assert H.shape == (16, 16)
    assert (H >= 0).all()
    assert H.max() > 0


def test_channel_containment_property():
    """Sum of PD overlaps never exceeds the spot area, so each column sums
    to at most the LED's LoS gain."""
    room = RoomConfig()
    rx = ReceiverConfig()
    rng = np.random.default_rng(99)
    for _ in range(60):
        pose = random_pose(rng)
        lens = random_lens(rng)
        H = channel_matrix(pose, lens, room, rx)
        for i in range(room.N_t):
            g = los_gain(i, pose, lens, room, rx)
            assert H[:, i].sum() <= g + 1e-15


def test_channel_zero_for_led_behind_fov():
    room = RoomConfig()
    rx = ReceiverConfig(phi_fov=math.radians(5))
    pose = Pose(position=vec3(0.5, 0.5, 0.0), theta_R=0.0,
                phi_R=math.radians(60))
    H = channel_matrix(pose, LensState(f=0.03, theta_L=0, phi_L=0), room, rx)
    assert np.all(H[:, 15] == 0.0)


def test_pd_quads_cover_array():
    rx = ReceiverConfig()
    quads = pd_quads_local(rx)
    assert quads.shape == (16, 4, 2)
    total = 0.0
    for q in quads:
        x, y = q[:, 0], q[:, 1]
        total += 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    npt.assert_allclose(total, 16 * rx.d_rs ** 2, rtol=1e-12)


def test_channel_matrix_permutation_symmetry():
    """Rotating the receiver azimuth by 90 degrees under a symmetric layout
    permutes LED roles but preserves the total captured power."""
    room = RoomConfig()
    rx = ReceiverConfig()
    lens = LensState(f=0.025, theta_L=0.0, phi_L=0.0)
    p0 = Pose(position=vec3(2.5, 2.5, 0), theta_R=0.0, phi_R=0.0)
    p1 = Pose(position=vec3(2.5, 2.5, 0), theta_R=math.pi / 2, phi_R=0.0)
    H0 = channel_matrix(p0, lens, room, rx)
    H1 = channel_matrix(p1, lens, room, rx)
    npt.assert_allclose(H0.sum(), H1.sum(), rtol=1e-9)
