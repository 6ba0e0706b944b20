"""Mesh geometry: exact areas, discrete closure, orientation conventions."""

import numpy as np
import pytest

from hypersol.mesh import DegenerateGeometry, cartesian_strip, polar_mesh


def test_polar_volumes_sum_to_half_annulus():
    mesh = polar_mesh(20, 40, r_body=0.01, r_outer=0.045)
    exact = 0.5 * np.pi * (0.045**2 - 0.01**2)
    assert mesh.volumes.sum() == pytest.approx(exact, rel=1e-14)


def test_polar_face_vectors_close():
    for stretch in (1.0, 1.05, 1.2):
        mesh = polar_mesh(15, 30, stretch=stretch)
        assert mesh.closure_defect() < 1e-15


def test_polar_shapes():
    mesh = polar_mesh(8, 12)
    assert mesh.ni == 8 and mesh.nj == 12 and mesh.n_cells == 96
    assert mesh.vertices.shape == (9, 13, 2)
    assert mesh.centers.shape == (8, 12, 2)
    assert mesh.iface_normal.shape == (9, 12, 2)
    assert mesh.jface_normal.shape == (8, 13, 2)
    np.testing.assert_allclose(
        np.linalg.norm(mesh.iface_normal, axis=-1), 1.0, atol=1e-14)
    np.testing.assert_allclose(
        np.linalg.norm(mesh.jface_normal, axis=-1), 1.0, atol=1e-14)


def test_polar_centers_inside_annulus():
    mesh = polar_mesh(10, 16, r_body=0.01, r_outer=0.045)
    r = np.linalg.norm(mesh.centers, axis=-1)
    assert (r > 0.01).all() and (r < 0.045).all()


def test_upstream_face_points_to_negative_x():
    mesh = polar_mesh(10, 17)
    j_mid = mesh.nj // 2
    ctr = mesh.centers[0, j_mid]
    assert ctr[0] < 0 and abs(ctr[1]) < 0.1 * abs(ctr[0])


def test_radial_stretch_ratio():
    mesh = polar_mesh(12, 8, stretch=1.1)
    j = 3
    widths = np.diff(np.linalg.norm(mesh.vertices[:, j], axis=-1))
    np.testing.assert_allclose(widths[1:] / widths[:-1], 1.1, rtol=1e-10)


def test_char_length_positive_and_bounded():
    mesh = polar_mesh(10, 20, r_body=0.01, r_outer=0.045)
    h = mesh.char_length()
    assert h.shape == (10, 20)
    assert (h > 0).all()
    assert h.max() < 0.045 - 0.01


def test_strip_metrics():
    mesh = cartesian_strip(16, length=2.0)
    h = 2.0 / 16
    np.testing.assert_allclose(mesh.volumes, h * h, rtol=1e-14)
    # i-faces normal to x, j-faces normal to y
    np.testing.assert_allclose(np.abs(mesh.iface_normal[..., 0]), 1.0, atol=1e-14)
    np.testing.assert_allclose(mesh.iface_normal[..., 1], 0.0, atol=1e-14)
    np.testing.assert_allclose(np.abs(mesh.jface_normal[..., 1]), 1.0, atol=1e-14)
    assert mesh.closure_defect() < 1e-16
    assert mesh.r_body is None


def test_degenerate_parameters_rejected():
    with pytest.raises(DegenerateGeometry):
        polar_mesh(3, 30)
    with pytest.raises(DegenerateGeometry):
        polar_mesh(10, 3)
    with pytest.raises(DegenerateGeometry):
        polar_mesh(10, 10, r_body=0.05, r_outer=0.01)
    with pytest.raises(DegenerateGeometry):
        polar_mesh(10, 10, stretch=-1.0)
    with pytest.raises(DegenerateGeometry):
        cartesian_strip(2)
