"""2D finite-volume compressible Euler solver with pluggable closures.

State vector per cell: element partial densities (one per chemical element),
momentum, and total energy. Each outer iteration applies an explicit
Godunov-type hydrodynamic substep with the composition frozen, then a
chemistry substep that re-evaluates the closure (equilibrium solve, neural
surrogate, or perfect gas) on the updated (element fractions, rho, eps) and
refreshes the cached (composition, p, T, c) used by the next substep's
fluxes. Conserved quantities are untouched by the chemistry substep.

Face fluxes are HLLC with wave-speed bounds from the cached frozen sound
speed; faces adjacent to strong pressure jumps fall back to HLL, which
suppresses the odd-even shock instability on shock-aligned grids. The scheme
is first order in space and time; steady states are found by pseudo-time
marching under a global CFL-limited step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from numba import njit

from .mesh import StructuredMesh


class PositivityViolation(RuntimeError):
    """Density or internal energy went nonpositive in a cell."""

    def __init__(self, msg: str, cell: tuple[int, int]):
        super().__init__(msg)
        self.cell = cell


class NonConvergence(RuntimeError):
    """Steady-state loop hit the iteration cap; carries the residual history."""

    def __init__(self, msg: str, history: np.ndarray):
        super().__init__(msg)
        self.history = history


class NoShockDetected(RuntimeError):
    """Pressure field has no gradient peak to locate."""


class ClosureError(RuntimeError):
    """Closure failed on specific cells; carries their (i, j) coordinates."""

    def __init__(self, msg: str, cells: list[tuple[int, int]] | None = None):
        super().__init__(msg)
        self.cells = cells or []


@dataclass
class FlowField:
    """Conserved fields plus the closure's cached auxiliaries."""

    rho_e: np.ndarray   # (ni, nj, n_e) element partial densities, kg/m^3
    mom: np.ndarray     # (ni, nj, 2) momentum density, kg/(m^2 s)
    ene: np.ndarray     # (ni, nj) total energy density, J/m^3
    y: np.ndarray       # (ni, nj, n_s) species mass fractions (cache)
    p: np.ndarray       # (ni, nj) Pa (cache)
    T: np.ndarray       # (ni, nj) K (cache)
    c: np.ndarray       # (ni, nj) m/s frozen sound speed (cache)
    n_chem_fallback: int = 0

    def rho(self) -> np.ndarray:
        return self.rho_e.sum(axis=2)

    def vel(self) -> np.ndarray:
        return self.mom / self.rho()[..., None]

    def eps(self) -> np.ndarray:
        rho = self.rho()
        ke = 0.5 * (self.mom[..., 0] ** 2 + self.mom[..., 1] ** 2) / rho
        return (self.ene - ke) / rho

    def copy(self) -> "FlowField":
        return FlowField(
            self.rho_e.copy(), self.mom.copy(), self.ene.copy(),
            self.y.copy(), self.p.copy(), self.T.copy(), self.c.copy(),
            self.n_chem_fallback,
        )


@dataclass(frozen=True)
class InflowState:
    """Prebuilt supersonic inflow cell state (closure-consistent)."""

    rho_e: np.ndarray   # (n_e,)
    mom: np.ndarray     # (2,)
    ene: float
    y: np.ndarray       # (n_s,)
    p: float
    T: float
    c: float

    @property
    def rho(self) -> float:
        return float(self.rho_e.sum())

    @property
    def mach(self) -> float:
        return float(np.hypot(*self.mom) / self.rho / self.c)


@dataclass(frozen=True)
class BoundaryConditions:
    """Boundary kinds per side: 'wall' (slip), 'inflow', 'outflow'."""

    imin: str = "wall"
    imax: str = "inflow"
    jmin: str = "outflow"
    jmax: str = "outflow"
    inflow: InflowState | None = None

    def __post_init__(self):
        for side in (self.imin, self.imax, self.jmin, self.jmax):
            if side not in ("wall", "inflow", "outflow"):
                raise ValueError(f"unknown boundary kind {side!r}")
        if "inflow" in (self.imin, self.imax, self.jmin, self.jmax):
            if self.inflow is None:
                raise ValueError("inflow boundary requires an InflowState")
            if not self.inflow.mach > 1.0:
                raise ValueError(
                    f"inflow must be supersonic (Mach {self.inflow.mach:.3f})"
                )


@dataclass(frozen=True)
class SolverConfig:
    mesh: StructuredMesh
    bc: BoundaryConditions
    cfl: float = 0.45
    tol_steady: float = 1e-8
    max_iter: int = 40000
    shock_sensor: float = 2.0
    raise_on_fail: bool = True


@dataclass
class SteadyResult:
    field: FlowField
    mesh: StructuredMesh
    wall_angles: np.ndarray       # rad, per angular station
    wall_pressure: np.ndarray     # Pa at the wall-adjacent cell centers
    standoff: np.ndarray          # m per station (NaN if no shock)
    iterations: int
    seconds: float
    residual_history: np.ndarray
    converged: bool


# ---------------------------------------------------------------------------
# Flux kernel.
# ---------------------------------------------------------------------------

@njit(cache=True)
def _hllc_face(rL, uL, vL, pL, cL, EL, rR, uR, vR, pR, cR, ER,
               z, Li, Lj, Ri, Rj, nx, ny, use_hll, f_out):
    """HLLC (or HLL) flux through one oriented face into f_out.

    f_out layout: [element mass fluxes (n_e), mom_x, mom_y, energy]. Element
    densities ride the mass flux as passive fractions.
    """
    ne = z.shape[2]
    unL = uL * nx + vL * ny
    unR = uR * nx + vR * ny
    sL = min(unL - cL, unR - cR)
    sR = max(unL + cL, unR + cR)
    if sL >= 0.0:
        fm = rL * unL
        for k in range(ne):
            f_out[k] = fm * z[Li, Lj, k]
        f_out[ne] = fm * uL + pL * nx
        f_out[ne + 1] = fm * vL + pL * ny
        f_out[ne + 2] = unL * (EL + pL)
        return
    if sR <= 0.0:
        fm = rR * unR
        for k in range(ne):
            f_out[k] = fm * z[Ri, Rj, k]
        f_out[ne] = fm * uR + pR * nx
        f_out[ne + 1] = fm * vR + pR * ny
        f_out[ne + 2] = unR * (ER + pR)
        return
    if use_hll:
        inv = 1.0 / (sR - sL)
        fmL = rL * unL
        fmR = rR * unR
        for k in range(ne):
            qL = rL * z[Li, Lj, k]
            qR = rR * z[Ri, Rj, k]
            f_out[k] = (sR * fmL * z[Li, Lj, k] - sL * fmR * z[Ri, Rj, k]
                        + sL * sR * (qR - qL)) * inv
        f_out[ne] = (sR * (fmL * uL + pL * nx) - sL * (fmR * uR + pR * nx)
                     + sL * sR * (rR * uR - rL * uL)) * inv
        f_out[ne + 1] = (sR * (fmL * vL + pL * ny) - sL * (fmR * vR + pR * ny)
                         + sL * sR * (rR * vR - rL * vL)) * inv
        f_out[ne + 2] = (sR * unL * (EL + pL) - sL * unR * (ER + pR)
                         + sL * sR * (ER - EL)) * inv
        return
    denom = rL * (sL - unL) - rR * (sR - unR)
    s_star = (pR - pL + rL * unL * (sL - unL) - rR * unR * (sR - unR)) / denom
    if s_star >= 0.0:
        rK, uK, vK, pK, EK, unK, sK, Ki, Kj = rL, uL, vL, pL, EL, unL, sL, Li, Lj
    else:
        rK, uK, vK, pK, EK, unK, sK, Ki, Kj = rR, uR, vR, pR, ER, unR, sR, Ri, Rj
    fac = rK * (sK - unK) / (sK - s_star)
    du = (s_star - unK)
    us = uK + du * nx
    vs = vK + du * ny
    Es = fac * (EK / rK + du * (s_star + pK / (rK * (sK - unK))))
    fmK = rK * unK
    for k in range(ne):
        zk = z[Ki, Kj, k]
        f_out[k] = fmK * zk + sK * (fac * zk - rK * zk)
    f_out[ne] = fmK * uK + pK * nx + sK * (fac * us - rK * uK)
    f_out[ne + 1] = fmK * vK + pK * ny + sK * (fac * vs - rK * vK)
    f_out[ne + 2] = unK * (EK + pK) + sK * (Es - EK)


@njit(cache=True)
def _flux_sweeps(rho, u, v, p, c, E, z, flag, ifn, ifa, jfn, jfa,
                 res_re, res_mx, res_my, res_en):
    """Accumulate outward flux sums per interior cell over both face sets."""
    ni = res_en.shape[0]
    nj = res_en.shape[1]
    ne = z.shape[2]
    f = np.empty(ne + 3)
    for fi in range(ni + 1):
        for j in range(nj):
            Li, Lj = fi, j + 1
            Ri, Rj = fi + 1, j + 1
            use_hll = flag[Li, Lj] or flag[Ri, Rj]
            _hllc_face(
                rho[Li, Lj], u[Li, Lj], v[Li, Lj], p[Li, Lj], c[Li, Lj], E[Li, Lj],
                rho[Ri, Rj], u[Ri, Rj], v[Ri, Rj], p[Ri, Rj], c[Ri, Rj], E[Ri, Rj],
                z, Li, Lj, Ri, Rj, ifn[fi, j, 0], ifn[fi, j, 1], use_hll, f,
            )
            A = ifa[fi, j]
            if fi >= 1:
                for k in range(ne):
                    res_re[fi - 1, j, k] += A * f[k]
                res_mx[fi - 1, j] += A * f[ne]
                res_my[fi - 1, j] += A * f[ne + 1]
                res_en[fi - 1, j] += A * f[ne + 2]
            if fi <= ni - 1:
                for k in range(ne):
                    res_re[fi, j, k] -= A * f[k]
                res_mx[fi, j] -= A * f[ne]
                res_my[fi, j] -= A * f[ne + 1]
                res_en[fi, j] -= A * f[ne + 2]
    for i in range(ni):
        for fj in range(nj + 1):
            Li, Lj = i + 1, fj
            Ri, Rj = i + 1, fj + 1
            use_hll = flag[Li, Lj] or flag[Ri, Rj]
            _hllc_face(
                rho[Li, Lj], u[Li, Lj], v[Li, Lj], p[Li, Lj], c[Li, Lj], E[Li, Lj],
                rho[Ri, Rj], u[Ri, Rj], v[Ri, Rj], p[Ri, Rj], c[Ri, Rj], E[Ri, Rj],
                z, Li, Lj, Ri, Rj, jfn[i, fj, 0], jfn[i, fj, 1], use_hll, f,
            )
            A = jfa[i, fj]
            if fj >= 1:
                for k in range(ne):
                    res_re[i, fj - 1, k] += A * f[k]
                res_mx[i, fj - 1] += A * f[ne]
                res_my[i, fj - 1] += A * f[ne + 1]
                res_en[i, fj - 1] += A * f[ne + 2]
            if fj <= nj - 1:
                for k in range(ne):
                    res_re[i, fj, k] -= A * f[k]
                res_mx[i, fj] -= A * f[ne]
                res_my[i, fj] -= A * f[ne + 1]
                res_en[i, fj] -= A * f[ne + 2]


# ---------------------------------------------------------------------------
# Ghost construction.
# ---------------------------------------------------------------------------

def _mirror(vel: np.ndarray, normals: np.ndarray) -> np.ndarray:
    vn = (vel * normals).sum(axis=-1, keepdims=True)
    return vel - 2.0 * vn * normals


def _padded_state(fld: FlowField, mesh: StructuredMesh, bc: BoundaryConditions):
    ni, nj = mesh.ni, mesh.nj
    ne = fld.rho_e.shape[2]
    rho = np.empty((ni + 2, nj + 2))
    u = np.empty((ni + 2, nj + 2))
    v = np.empty((ni + 2, nj + 2))
    p = np.empty((ni + 2, nj + 2))
    c = np.empty((ni + 2, nj + 2))
    E = np.empty((ni + 2, nj + 2))
    z = np.empty((ni + 2, nj + 2, ne))

    r_in = fld.rho()
    vel = fld.vel()
    rho[1:-1, 1:-1] = r_in
    u[1:-1, 1:-1] = vel[..., 0]
    v[1:-1, 1:-1] = vel[..., 1]
    p[1:-1, 1:-1] = fld.p
    c[1:-1, 1:-1] = fld.c
    E[1:-1, 1:-1] = fld.ene
    z[1:-1, 1:-1] = fld.rho_e / r_in[..., None]

    def fill(side: str, kind: str):
        if side == "imin":
            gho = (0, slice(1, -1))
            adj = (1, slice(1, -1))
            normals = mesh.iface_normal[0]       # (nj, 2)
        elif side == "imax":
            gho = (-1, slice(1, -1))
            adj = (-2, slice(1, -1))
            normals = mesh.iface_normal[-1]
        elif side == "jmin":
            gho = (slice(1, -1), 0)
            adj = (slice(1, -1), 1)
            normals = mesh.jface_normal[:, 0]
        else:
            gho = (slice(1, -1), -1)
            adj = (slice(1, -1), -2)
            normals = mesh.jface_normal[:, -1]
        if kind == "inflow":
            s = bc.inflow
            rho[gho] = s.rho
            u[gho] = s.mom[0] / s.rho
            v[gho] = s.mom[1] / s.rho
            p[gho] = s.p
            c[gho] = s.c
            E[gho] = s.ene
            z[gho] = s.rho_e / s.rho
        else:
            rho[gho] = rho[adj]
            p[gho] = p[adj]
            c[gho] = c[adj]
            z[gho] = z[adj]
            if kind == "wall":
                va = np.stack([u[adj], v[adj]], axis=-1)
                vg = _mirror(va, normals)
                u[gho] = vg[..., 0]
                v[gho] = vg[..., 1]
                E[gho] = E[adj]   # same speed magnitude, same internal energy
            else:
                u[gho] = u[adj]
                v[gho] = v[adj]
                E[gho] = E[adj]

    fill("imin", bc.imin)
    fill("imax", bc.imax)
    fill("jmin", bc.jmin)
    fill("jmax", bc.jmax)
    # corners: nearest interior values (never touched by the sweeps)
    for (gi, ai) in ((0, 1), (-1, -2)):
        for (gj, aj) in ((0, 1), (-1, -2)):
            for arr in (rho, u, v, p, c, E):
                arr[gi, gj] = arr[ai, aj]
            z[gi, gj] = z[ai, aj]
    return rho, u, v, p, c, E, z


def _shock_flags(p_pad: np.ndarray, threshold: float) -> np.ndarray:
    """Cells whose pressure jumps to any neighbor exceed the threshold ratio."""
    flag = np.zeros(p_pad.shape, dtype=np.uint8)
    if threshold <= 0 or not np.isfinite(threshold):
        return flag
    pc = p_pad[1:-1, 1:-1]
    for nb in (p_pad[:-2, 1:-1], p_pad[2:, 1:-1], p_pad[1:-1, :-2], p_pad[1:-1, 2:]):
        ratio = np.maximum(pc / nb, nb / pc)
        flag[1:-1, 1:-1] |= (ratio > threshold).astype(np.uint8)
    return flag


# ---------------------------------------------------------------------------
# Substeps.
# ---------------------------------------------------------------------------

def compute_dt(fld: FlowField, mesh: StructuredMesh, cfl: float) -> float:
    vel = fld.vel()
    speed = np.hypot(vel[..., 0], vel[..., 1]) + fld.c
    return float(cfl * np.min(mesh.char_length() / speed))


def hydro_step(
    fld: FlowField,
    mesh: StructuredMesh,
    bc: BoundaryConditions,
    cfl: float,
    shock_sensor: float = 2.0,
    dt: float | None = None,
) -> tuple[FlowField, float]:
    """One explicit finite-volume update with frozen composition.

    Returns the half-step field (auxiliary caches carried over stale) and the
    time step used. Raises PositivityViolation with the offending cell if
    density or internal energy leaves the physical cone; the caller may retry
    with a smaller dt.
    """
    if dt is None:
        dt = compute_dt(fld, mesh, cfl)
    rho, u, v, p, c, E, z = _padded_state(fld, mesh, bc)
    flags = _shock_flags(p, shock_sensor)
    ni, nj = mesh.ni, mesh.nj
    ne = fld.rho_e.shape[2]
    res_re = np.zeros((ni, nj, ne))
    res_mx = np.zeros((ni, nj))
    res_my = np.zeros((ni, nj))
    res_en = np.zeros((ni, nj))
    _flux_sweeps(rho, u, v, p, c, E, z, flags,
                 np.ascontiguousarray(mesh.iface_normal), mesh.iface_area,
                 np.ascontiguousarray(mesh.jface_normal), mesh.jface_area,
                 res_re, res_mx, res_my, res_en)
    scale = dt / mesh.volumes
    rho_e2 = fld.rho_e - scale[..., None] * res_re
    mom2 = fld.mom - np.stack([scale * res_mx, scale * res_my], axis=-1)
    ene2 = fld.ene - scale * res_en

    rho2 = rho_e2.sum(axis=2)
    eint2 = ene2 - 0.5 * (mom2[..., 0] ** 2 + mom2[..., 1] ** 2) / np.maximum(rho2, 1e-300)
    bad = (rho2 <= 0.0) | (eint2 <= 0.0) | ~np.isfinite(rho2) | ~np.isfinite(eint2)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise PositivityViolation(
            f"nonpositive density or internal energy in cell ({i}, {j}) "
            f"(rho={rho2[i, j]:.3e}, eint={eint2[i, j]:.3e})",
            (int(i), int(j)),
        )
    out = FlowField(rho_e2, mom2, ene2, fld.y, fld.p, fld.T, fld.c,
                    fld.n_chem_fallback)
    return out, dt


def chemistry_step(fld: FlowField, closure) -> FlowField:
    """Refresh (composition, p, T, c) from the closure at fixed conserved state.

    `closure(z, rho, eps, y_prev) -> (y, p, T, c, n_fallback)` operates on
    flattened per-cell arrays. Closure failures surface as ClosureError with
    the offending cell coordinates attached.
    """
    ni, nj = fld.p.shape
    rho = fld.rho()
    eps = fld.eps()
    z = fld.rho_e / rho[..., None]
    ncell = ni * nj
    try:
        y, p, T, c, nfall = closure(
            z.reshape(ncell, -1), rho.reshape(ncell), eps.reshape(ncell),
            fld.y.reshape(ncell, -1),
        )
    except ClosureError as err:
        cells = [(k // nj, k % nj) for k in getattr(err, "flat_indices", [])]
        raise ClosureError(f"{err} (cells {cells[:5]}...)", cells) from err
    return FlowField(
        fld.rho_e, fld.mom, fld.ene,
        y.reshape(ni, nj, -1), p.reshape(ni, nj), T.reshape(ni, nj),
        c.reshape(ni, nj), fld.n_chem_fallback + int(nfall),
    )


def uniform_field(mesh: StructuredMesh, state: InflowState) -> FlowField:
    """Field with every cell set to the given state."""
    ni, nj = mesh.ni, mesh.nj
    ne = state.rho_e.shape[0]
    ns = state.y.shape[0]
    return FlowField(
        np.broadcast_to(state.rho_e, (ni, nj, ne)).copy(),
        np.broadcast_to(state.mom, (ni, nj, 2)).copy(),
        np.full((ni, nj), state.ene),
        np.broadcast_to(state.y, (ni, nj, ns)).copy(),
        np.full((ni, nj), state.p),
        np.full((ni, nj), state.T),
        np.full((ni, nj), state.c),
    )


def total_integrals(fld: FlowField, mesh: StructuredMesh) -> dict[str, float]:
    vol = mesh.volumes
    return {
        "mass": float((fld.rho() * vol).sum()),
        "element_mass": (fld.rho_e * vol[..., None]).sum(axis=(0, 1)),
        "mom_x": float((fld.mom[..., 0] * vol).sum()),
        "mom_y": float((fld.mom[..., 1] * vol).sum()),
        "energy": float((fld.ene * vol).sum()),
    }


# ---------------------------------------------------------------------------
# Steady-state driver.
# ---------------------------------------------------------------------------

def run_to_steady(
    cfg: SolverConfig,
    closure,
    init: FlowField | None = None,
) -> SteadyResult:
    """Iterate hydro + chemistry substeps to a steady state.

    Convergence: relative L2 norm of the density change per iteration below
    cfg.tol_steady. On reaching max_iter, raises NonConvergence (carrying the
    residual history) unless cfg.raise_on_fail is False, in which case the
    result is returned with converged=False.
    """
    mesh, bc = cfg.mesh, cfg.bc
    if init is not None:
        fld = init.copy()
    else:
        if bc.inflow is None:
            raise ValueError("run_to_steady needs an init field or an inflow state")
        fld = uniform_field(mesh, bc.inflow)
        fld = chemistry_step(fld, closure)
    history = []
    t_start = time.perf_counter()
    it = 0
    converged = False
    for it in range(1, cfg.max_iter + 1):
        rho_old = fld.rho()
        dt = compute_dt(fld, mesh, cfg.cfl)
        for attempt in range(7):
            try:
                half, _ = hydro_step(fld, mesh, bc, cfg.cfl,
                                     shock_sensor=cfg.shock_sensor, dt=dt)
                break
            except PositivityViolation:
                if attempt == 6:
                    raise
                dt *= 0.5
        fld = chemistry_step(half, closure)
        rho_new = fld.rho()
        res = float(np.linalg.norm(rho_new - rho_old) / np.linalg.norm(rho_old))
        history.append(res)
        if res < cfg.tol_steady:
            converged = True
            break
    seconds = time.perf_counter() - t_start
    hist = np.asarray(history)
    if not converged and cfg.raise_on_fail:
        raise NonConvergence(
            f"no steady state after {it} iterations "
            f"(last residual {hist[-1]:.3e}, tol {cfg.tol_steady:.1e})", hist,
        )
    angles = wall_angles(mesh)
    wall_p = fld.p[0, :].copy()
    try:
        _, dist = shock_standoff(fld.p, mesh)
    except NoShockDetected:
        dist = np.full(mesh.nj, np.nan)
    return SteadyResult(fld, mesh, angles, wall_p, dist, it, seconds, hist, converged)


# ---------------------------------------------------------------------------
# Observables.
# ---------------------------------------------------------------------------

def wall_angles(mesh: StructuredMesh) -> np.ndarray:
    """Angle of each wall-adjacent cell center from the upstream axis."""
    ctr = mesh.centers[0, :]
    return np.arctan2(ctr[:, 1], -ctr[:, 0])


def shock_standoff(p_field: np.ndarray, mesh: StructuredMesh) -> tuple[np.ndarray, np.ndarray]:
    """Wall distance of the maximum radial pressure-gradient per angular ray.

    The peak cell is refined sub-cell by a quadratic fit through the
    three-point gradient stencil. Raises NoShockDetected when the pressure
    field has no significant variation along every ray.
    """
    if mesh.r_body is None:
        raise ValueError("standoff needs a body-fitted mesh")
    ni, nj = mesh.ni, mesh.nj
    r = np.linalg.norm(mesh.centers, axis=-1)       # (ni, nj)
    relvar = (p_field.max(axis=0) - p_field.min(axis=0)) / np.abs(p_field).max()
    if np.all(relvar < 1e-6):
        raise NoShockDetected("pressure variation below detection threshold")
    dist = np.empty(nj)
    for j in range(nj):
        rj = r[:, j]
        pj = p_field[:, j]
        g = np.abs(np.diff(pj) / np.diff(rj))
        rm = 0.5 * (rj[1:] + rj[:-1])
        k = int(np.argmax(g))
        if 0 < k < ni - 2:
            coef = np.polyfit(rm[k - 1 : k + 2], g[k - 1 : k + 2], 2)
            if coef[0] < 0:
                r_star = float(np.clip(-coef[1] / (2 * coef[0]), rm[k - 1], rm[k + 1]))
            else:
                r_star = rm[k]
        else:
            r_star = rm[k]
        dist[j] = r_star - mesh.r_body
    return wall_angles(mesh), dist


# ---------------------------------------------------------------------------
# Output.
# ---------------------------------------------------------------------------

def write_field_csv(path, mesh: StructuredMesh, fld: FlowField,
                    species_names: list[str] | None = None) -> None:
    """Cell-centered field dump: x, y, rho, v, w, p, T, x_1..x_ns."""
    ns = fld.y.shape[2]
    names = species_names or [f"x_{k + 1}" for k in range(ns)]
    vel = fld.vel()
    cols = [
        mesh.centers[..., 0].ravel(), mesh.centers[..., 1].ravel(),
        fld.rho().ravel(), vel[..., 0].ravel(), vel[..., 1].ravel(),
        fld.p.ravel(), fld.T.ravel(),
    ] + [fld.y[..., k].ravel() for k in range(ns)]
    header = ",".join(["x", "y", "rho", "v", "w", "p", "T"] + names)
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="")


def write_profile_csv(path, angles: np.ndarray, values: np.ndarray, name: str) -> None:
    np.savetxt(path, np.column_stack([angles, values]), delimiter=",",
               header=f"angle,{name}", comments="")


def write_vtk(path, mesh: StructuredMesh, fld: FlowField) -> None:
    """Legacy-VTK structured grid with cell data, for external viewers."""
    ni, nj = mesh.ni, mesh.nj
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\nflow field\nASCII\n")
        f.write("DATASET STRUCTURED_GRID\n")
        f.write(f"DIMENSIONS {ni + 1} {nj + 1} 1\n")
        f.write(f"POINTS {(ni + 1) * (nj + 1)} double\n")
        for j in range(nj + 1):
            for i in range(ni + 1):
                x, y = mesh.vertices[i, j]
                f.write(f"{x:.12e} {y:.12e} 0.0\n")
        f.write(f"CELL_DATA {ni * nj}\n")
        for name, arr in (("rho", fld.rho()), ("p", fld.p), ("T", fld.T)):
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for j in range(nj):
                for i in range(ni):
                    f.write(f"{arr[i, j]:.12e}\n")
        vel = fld.vel()
        f.write("VECTORS velocity double\n")
        for j in range(nj):
            for i in range(ni):
                f.write(f"{vel[i, j, 0]:.12e} {vel[i, j, 1]:.12e} 0.0\n")
