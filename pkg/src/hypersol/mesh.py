"""Structured 2D finite-volume meshes: polar half-annulus and 1D strips.

Face metrics use the straight chord between the two shared vertices, so the
outward area vectors of every cell sum to zero at round-off (uniform flow is
preserved exactly). Volumes are analytic: circular-sector areas for the polar
mesh, rectangle areas for strips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateGeometry(ValueError):
    """Mesh construction parameters produce non-positive cells."""


@dataclass(frozen=True)
class StructuredMesh:
    """Body-fitted structured mesh with per-face metrics.

    Index convention: i is the first (radial / x) direction, j the second
    (angular / y). `iface_*` arrays hold the (ni+1, nj) faces of constant i
    with unit normals pointing toward increasing i; `jface_*` the (ni, nj+1)
    faces of constant j pointing toward increasing j.
    """

    vertices: np.ndarray       # (ni+1, nj+1, 2) m
    centers: np.ndarray        # (ni, nj, 2) m
    volumes: np.ndarray        # (ni, nj) m^2 (unit depth)
    iface_normal: np.ndarray   # (ni+1, nj, 2) unit
    iface_area: np.ndarray     # (ni+1, nj) m
    jface_normal: np.ndarray   # (ni, nj+1, 2) unit
    jface_area: np.ndarray     # (ni, nj+1) m
    r_body: float | None = None

    @property
    def ni(self) -> int:
        return self.volumes.shape[0]

    @property
    def nj(self) -> int:
        return self.volumes.shape[1]

    @property
    def n_cells(self) -> int:
        return self.ni * self.nj

    def char_length(self) -> np.ndarray:
        """Per-cell characteristic width for CFL limits: volume over the
        larger bounding face area, minimized over the two directions."""
        ai = np.maximum(self.iface_area[:-1, :], self.iface_area[1:, :])
        aj = np.maximum(self.jface_area[:, :-1], self.jface_area[:, 1:])
        wi = self.volumes / ai
        wj = self.volumes / aj
        return np.minimum(wi, wj)

    def closure_defect(self) -> float:
        """Max |sum of outward face area vectors| over cells (0 at round-off)."""
        si = self.iface_normal * self.iface_area[..., None]
        sj = self.jface_normal * self.jface_area[..., None]
        tot = si[1:, :] - si[:-1, :] + sj[:, 1:] - sj[:, :-1]
        return float(np.abs(tot).max())


def _face_metrics(vertices: np.ndarray):
    """Chord-based face area vectors oriented toward increasing index."""
    # i-faces: chord from v[i, j] to v[i, j+1]
    ti = vertices[:, 1:, :] - vertices[:, :-1, :]
    ni_vec = np.stack([ti[..., 1], -ti[..., 0]], axis=-1)
    # j-faces: chord from v[i, j] to v[i+1, j]
    tj = vertices[1:, :, :] - vertices[:-1, :, :]
    nj_vec = np.stack([-tj[..., 1], tj[..., 0]], axis=-1)

    centers = 0.25 * (
        vertices[:-1, :-1] + vertices[1:, :-1] + vertices[:-1, 1:] + vertices[1:, 1:]
    )
    # Orient by the cell-to-cell (or center-to-face) direction.
    imid = 0.5 * (vertices[:, 1:, :] + vertices[:, :-1, :])
    iref = np.empty_like(imid)
    iref[1:-1] = centers[1:, :] - centers[:-1, :]
    iref[0] = centers[0] - imid[0]
    iref[-1] = imid[-1] - centers[-1]
    flip = np.sum(ni_vec * iref, axis=-1) < 0
    ni_vec[flip] *= -1.0

    jmid = 0.5 * (vertices[1:, :, :] + vertices[:-1, :, :])
    jref = np.empty_like(jmid)
    jref[:, 1:-1] = centers[:, 1:] - centers[:, :-1]
    jref[:, 0] = centers[:, 0] - jmid[:, 0]
    jref[:, -1] = jmid[:, -1] - centers[:, -1]
    flip = np.sum(nj_vec * jref, axis=-1) < 0
    nj_vec[flip] *= -1.0

    iarea = np.linalg.norm(ni_vec, axis=-1)
    jarea = np.linalg.norm(nj_vec, axis=-1)
    if np.any(iarea <= 0) or np.any(jarea <= 0):
        raise DegenerateGeometry("zero-length face in mesh")
    return centers, ni_vec / iarea[..., None], iarea, nj_vec / jarea[..., None], jarea


def _geometric_spacing(span: float, n: int, stretch: float) -> np.ndarray:
    """n interval widths growing geometrically by `stretch`, summing to span."""
    if abs(stretch - 1.0) < 1e-14:
        return np.full(n, span / n)
    d0 = span * (stretch - 1.0) / (stretch**n - 1.0)
    return d0 * stretch ** np.arange(n)


def polar_mesh(
    n_radial: int,
    n_angular: int,
    r_body: float = 0.01,
    r_outer: float = 0.045,
    stretch: float = 1.0,
) -> StructuredMesh:
    """Half-annulus mesh around a cylinder of radius r_body.

    The wall is the inner circle; index i grows radially outward with cell
    widths geometrically stretched by `stretch` away from the wall (stretch
    1 = uniform). Angle runs from -pi/2 to +pi/2 with the body's upstream
    face toward -x, so a +x freestream hits the wall head-on at j = nj/2.
    Volumes are exact circular-sector areas.
    """
    if n_radial < 4 or n_angular < 4:
        raise DegenerateGeometry("need at least 4 cells per direction")
    if not (r_outer > r_body > 0.0):
        raise DegenerateGeometry(f"need r_outer > r_body > 0, got {r_body}, {r_outer}")
    if stretch <= 0.0:
        raise DegenerateGeometry("stretch must be positive")
    dr = _geometric_spacing(r_outer - r_body, n_radial, stretch)
    radii = r_body + np.concatenate([[0.0], np.cumsum(dr)])
    radii[-1] = r_outer
    theta = np.linspace(-np.pi / 2.0, np.pi / 2.0, n_angular + 1)

    R, TH = np.meshgrid(radii, theta, indexing="ij")
    vertices = np.stack([-R * np.cos(TH), R * np.sin(TH)], axis=-1)
    centers, ifn, ifa, jfn, jfa = _face_metrics(vertices)

    dth = np.diff(theta)
    vols = 0.5 * dth[None, :] * (radii[1:, None] ** 2 - radii[:-1, None] ** 2)
    if np.any(vols <= 0):
        raise DegenerateGeometry("non-positive cell volume")
    return StructuredMesh(vertices, centers, vols, ifn, ifa, jfn, jfa, r_body=r_body)


def cartesian_strip(n: int, length: float = 1.0, height: float | None = None) -> StructuredMesh:
    """n x 1 rectangular strip along x, for one-dimensional test problems."""
    if n < 4:
        raise DegenerateGeometry("need at least 4 cells")
    if length <= 0:
        raise DegenerateGeometry("length must be positive")
    h = height if height is not None else length / n
    if h <= 0:
        raise DegenerateGeometry("height must be positive")
    x = np.linspace(0.0, length, n + 1)
    y = np.array([0.0, h])
    X, Y = np.meshgrid(x, y, indexing="ij")
    vertices = np.stack([X, Y], axis=-1)
    centers, ifn, ifa, jfn, jfa = _face_metrics(vertices)
    vols = np.full((n, 1), (length / n) * h)
    return StructuredMesh(vertices, centers, vols, ifn, ifa, jfn, jfa, r_body=None)
