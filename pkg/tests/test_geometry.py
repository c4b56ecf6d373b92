import math

import numpy as np
import numpy.testing as npt
import pytest

from lenslink.geometry import (LensState, Pose, ReceiverConfig, RoomConfig,
                               lens_normal, lens_rotation, lens_world_position,
                               pd_world_position, receiver_normal,
                               receiver_rotation, rot_y, rot_z, unit, vec3)


def random_pose(rng, z_max=1.0):
    return Pose(position=vec3(rng.uniform(0, 5), rng.uniform(0, 5),
                              rng.uniform(0, z_max)),
                theta_R=rng.uniform(0, 2 * math.pi),
                phi_R=rng.uniform(0, math.pi / 2))


def test_rotations_are_orthonormal():
    rng = np.random.default_rng(42)
    for _ in range(200):
        R = receiver_rotation(random_pose(rng))
        npt.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_rot_z_convention():
    # frame rotation (row convention [[c, s, 0], [-s, c, 0], [0, 0, 1]]):
    # world x-hat expressed in a frame rotated +90 deg about z is -y-hat
    R = rot_z(math.pi / 2)
    npt.assert_allclose(R @ np.array([1.0, 0, 0]), [0, -1, 0], atol=1e-15)
    npt.assert_allclose(R @ np.array([0, 1.0, 0]), [1, 0, 0], atol=1e-15)
    Ry = rot_y(math.pi / 2)
    npt.assert_allclose(Ry @ np.array([1.0, 0, 0]), [0, 0, 1], atol=1e-15)
    npt.assert_allclose(Ry @ np.array([0, 0, 1.0]), [-1, 0, 0], atol=1e-15)


def test_receiver_normal_matches_rotation():
    """receiver_normal must equal R1^T z-hat (the rotated frame's z axis)."""
    rng = np.random.default_rng(1)
    for _ in range(300):
        pose = random_pose(rng)
        expected = receiver_rotation(pose).T @ np.array([0.0, 0.0, 1.0])
        npt.assert_allclose(receiver_normal(pose), expected, atol=1e-14)


def test_receiver_normal_closed_form():
    pose = Pose(position=vec3(1, 2, 0), theta_R=0.7, phi_R=0.4)
    expected = [math.cos(0.7) * math.sin(0.4),
                math.sin(0.7) * math.sin(0.4), math.cos(0.4)]
    npt.assert_allclose(receiver_normal(pose), expected, atol=1e-15)


def test_lens_normal_vertical_when_untilted():
    pose = Pose(position=vec3(2, 2, 0), theta_R=0.0, phi_R=0.0)
    lens = LensState(f=0.03, theta_L=0.0, phi_L=0.0)
    npt.assert_allclose(lens_normal(pose, lens), [0, 0, 1], atol=1e-15)


def test_lens_normal_composition():
    rng = np.random.default_rng(3)
    for _ in range(300):
        pose = random_pose(rng)
        lens = LensState(f=rng.uniform(0.01, 0.15),
                         theta_L=rng.uniform(0, 2 * math.pi),
                         phi_L=rng.uniform(0, math.radians(30)))
        R1 = receiver_rotation(pose)
        R2 = lens_rotation(lens)
        expected = R1.T @ (R2.T @ np.array([0.0, 0.0, 1.0]))
        got = lens_normal(pose, lens)
        npt.assert_allclose(got, expected, atol=1e-13)
        assert abs(np.linalg.norm(got) - 1.0) < 1e-12


def test_pose_wraps_and_validates():
    p = Pose(position=vec3(0, 0, 0), theta_R=2 * math.pi + 0.25, phi_R=0.1)
    assert abs(p.theta_R - 0.25) < 1e-12
    with pytest.raises(ValueError):
        Pose(position=vec3(0, 0, 0), theta_R=0.0, phi_R=-0.01)
    with pytest.raises(ValueError):
        Pose(position=vec3(0, 0, 0), theta_R=0.0, phi_R=math.pi / 2 + 0.01)


def test_lens_state_validates():
    with pytest.raises(ValueError):
        LensState(f=0.0, theta_L=0.0, phi_L=0.0)
    with pytest.raises(ValueError):
        LensState(f=0.03, theta_L=0.0, phi_L=0.0, d_len=-1.0)


def test_lens_world_position_offset_along_normal():
    rng = np.random.default_rng(5)
    for _ in range(100):
        pose = random_pose(rng)
        lens = LensState(f=0.05, theta_L=1.0, phi_L=0.2, d_len=0.02)
        p = lens_world_position(pose, lens)
        npt.assert_allclose(p - pose.position,
                            0.02 * receiver_normal(pose), atol=1e-15)


def test_led_grid_layout():
    room = RoomConfig()
    centers = room.led_centers()
    assert centers.shape == (16, 3)
    npt.assert_allclose(centers[:, 2], 3.5)
    # grid centred on the room footprint
    npt.assert_allclose(centers[:, 0].mean(), 2.5, atol=1e-12)
    npt.assert_allclose(centers[:, 1].mean(), 2.5, atol=1e-12)
    xs = np.unique(np.round(centers[:, 0], 12))
    npt.assert_allclose(np.diff(xs), 0.5)
    assert len(xs) == 4
    # row-major indexing: the first four share one y and step in x
    npt.assert_allclose(np.diff(centers[:4, 0]), 0.5)
    assert np.ptp(centers[:4, 1]) == 0.0


def test_led_vertices_form_centered_squares():
    room = RoomConfig()
    for i in (0, 5, 15):
        v = room.led_vertices(i)
        assert v.shape == (4, 3)
        npt.assert_allclose(v.mean(axis=0), room.led_center(i), atol=1e-12)
        side = np.linalg.norm(v[1] - v[0])
        npt.assert_allclose(side, room.d_ts, atol=1e-15)
        # counter-clockwise when viewed from below (shoelace > 0 in xy)
        x, y = v[:, 0], v[:, 1]
        area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        assert area2 > 0


def test_room_validation():
    with pytest.raises(ValueError):
        RoomConfig(N_t=15)       # not a perfect square
    with pytest.raises(ValueError):
        RoomConfig(d_tx=10.0)    # grid would not fit the room


def test_room_contains():
    room = RoomConfig()
    assert room.contains(vec3(2.5, 2.5, 1.0))
    assert not room.contains(vec3(-0.1, 2.5, 1.0))
    assert not room.contains(vec3(2.5, 2.5, 4.0))


def test_pd_centers_grid():
    rx = ReceiverConfig()
    c = rx.pd_centers_local()
    assert c.shape == (16, 2)
    npt.assert_allclose(c.mean(axis=0), [0.0, 0.0], atol=1e-15)
    xs = np.unique(np.round(c[:, 0], 12))
    npt.assert_allclose(np.diff(xs), rx.d_rx)
    # half extent covers the outermost PD edge
    expected = ((4 - 1) * rx.d_rx + rx.d_rs) / 2
    npt.assert_allclose(rx.array_half_extent(), expected)


def test_pd_world_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(100):
        pose = random_pose(rng)
        local = vec3(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01), 0.0)
        w = pd_world_position(pose, local)
        back = receiver_rotation(pose) @ (w - pose.position)
        npt.assert_allclose(back, local, atol=1e-14)


def test_aperture_modes():
    rx = ReceiverConfig()
    npt.assert_allclose(rx.aperture_area(0.05),
                        math.pi * (0.1 * 0.05) ** 2, rtol=1e-15)
    rx_fixed = ReceiverConfig(aperture_mode="fixed")
    assert rx_fixed.aperture_area(0.05) == 1e-4
    assert rx_fixed.aperture_area(0.01) == 1e-4


def test_receiver_validation():
    with pytest.raises(ValueError):
        ReceiverConfig(n_l=1.0)
    with pytest.raises(ValueError):
        ReceiverConfig(d_rs=0.01, d_rx=0.005)
    with pytest.raises(ValueError):
        ReceiverConfig(N_r=10)


def test_unit_helper():
    v = unit(vec3(3, 0, 4))
    npt.assert_allclose(v, [0.6, 0, 0.8])
    with pytest.raises(ValueError):
        unit(vec3(0, 0, 0))
