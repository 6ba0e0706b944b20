"""Run modes wiring interchangeable closures into the flow solver.

Four modes share one solver code path and differ only in the injected
closure:

- ``pg``: calorically perfect gas, no chemistry. Default gamma and gas
  constant are the frozen values of the upstream equilibrium mixture, so the
  PG run sees the identical upstream state as the equilibrium run and differs
  purely by switching the chemistry off.
- ``eq``: per-cell equilibrium solve (the reference chemistry).
- ``nn``: one batched surrogate inference over all cells per iteration.
- ``nn-eq``: surrogate run to convergence, then an equilibrium run warm
  started from its final state; the result satisfies the equilibrium mode's
  own convergence predicate, so the surrogate leaves no accuracy footprint.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import euler
from .equilibrium import equilibrate_fields, equilibrate_tp
from .mesh import StructuredMesh, polar_mesh
from .thermo import (
    AtmosphereSpec,
    R_UNIVERSAL,
    TOY_ELEMENT_FRACTIONS,
    get_atmosphere,
    mean_molar_mass,
    mixture_cp,
    mixture_cv,
    mixture_energy,
)


@dataclass(frozen=True)
class RunMode:
    """Closure selection: kind in {'pg', 'eq', 'nn', 'nn-eq'}."""

    kind: str
    gamma: float | None = None        # pg only; None = frozen upstream value
    model: object | None = None       # nn modes: MlpModel or path

    def __post_init__(self):
        if self.kind not in ("pg", "eq", "nn", "nn-eq"):
            raise ValueError(f"unknown run mode {self.kind!r}")
        if self.kind in ("nn", "nn-eq") and self.model is None:
            raise ValueError(f"mode {self.kind!r} requires a model")


@dataclass(frozen=True)
class CaseConfig:
    """One blunt-body case: geometry, upstream conditions, solver knobs."""

    atmosphere: str = "toy"
    element_fractions: tuple[float, ...] | None = None   # None: atmosphere default
    n_radial: int = 30
    n_angular: int = 100
    r_body: float = 0.01
    r_outer: float = 0.045
    stretch: float = 1.05
    p_inf: float = 35737.40
    T_inf: float = 216.57
    speed: float = 4930.83
    cfl: float = 0.45
    tol_steady: float = 1e-8
    max_iter: int = 40000
    shock_sensor: float = 2.0


def make_mesh(case: CaseConfig) -> StructuredMesh:
    return polar_mesh(case.n_radial, case.n_angular, case.r_body,
                      case.r_outer, case.stretch)


# ---------------------------------------------------------------------------
# Closures (flat-array protocol: (z, rho, eps, y_prev) -> (y, p, T, c, n_fb)).
# ---------------------------------------------------------------------------

def perfect_gas_closure(gamma: float = 1.4, r_gas: float = 287.05):
    """p = (gamma - 1) rho eps; composition passes through untouched."""
    gm1 = gamma - 1.0

    def closure(z, rho, eps, y_prev):
        p = gm1 * rho * eps
        return y_prev, p, p / (rho * r_gas), np.sqrt(gamma * p / rho), 0

    return closure


def equilibrium_closure(atm: AtmosphereSpec, fail_fraction: float = 0.2):
    """Per-cell equilibrium with a frozen-composition transient fallback.

    Cells whose equilibrium solve fails (transient states pushed outside the
    solvable domain) keep their previous composition with closed-form frozen
    thermodynamics; they are counted and reported. If more than
    ``fail_fraction`` of the cells fail at once the closure raises instead.
    """
    arr = atm.arrays()

    def closure(z, rho, eps, y_prev):
        ys, Ts, ps, cps, cvs, cs, st = equilibrate_fields(
            z, rho, eps, atm, guess_y=y_prev
        )
        bad = st != 0
        nfall = int(bad.sum())
        if nfall:
            if nfall > fail_fraction * rho.shape[0]:
                err = euler.ClosureError(
                    f"equilibrium failed on {nfall}/{rho.shape[0]} cells"
                )
                err.flat_indices = np.flatnonzero(bad)[:20].tolist()
                raise err
            yb = y_prev[bad]
            cvb = yb @ arr["cv"]
            cpb = yb @ arr["cp"]
            Tb = np.maximum((eps[bad] - yb @ arr["h0"]) / cvb, 1.0)
            pb = rho[bad] * R_UNIVERSAL * Tb * (yb / arr["m"]).sum(axis=1)
            ys[bad] = yb
            Ts[bad] = Tb
            ps[bad] = pb
            cs[bad] = np.sqrt((cpb / cvb) * pb / rho[bad])
        return ys, ps, Ts, cs, nfall

    return closure


def nn_closure(model, atm: AtmosphereSpec):
    """Single batched surrogate inference per call.

    Inputs are clamped to the model's recorded training box (guards transient
    excursions); predicted pressure, temperature, and sound speed are floored
    at physical minima. Composition output is clipped to [0, 1].
    """
    from .surrogate import forward_batch

    ne, ns = atm.n_elements, atm.n_species
    if model.d_in != ne + 2 or model.d_out != ns + 5:
        raise ValueError(
            f"model dims ({model.d_in}, {model.d_out}) do not match atmosphere "
            f"({ne + 2}, {ns + 5})"
        )

    def closure(z, rho, eps, y_prev):
        x = np.empty((rho.shape[0], ne + 2))
        x[:, :ne] = z
        x[:, ne] = rho
        x[:, ne + 1] = eps
        if model.input_low is not None:
            np.clip(x, model.input_low, model.input_high, out=x)
        out = forward_batch(model, x)
        y = np.clip(out[:, :ns], 0.0, 1.0)
        p = np.maximum(out[:, ns], 1.0)
        T = np.maximum(out[:, ns + 1], 1.0)
        c = np.maximum(out[:, ns + 4], 1.0)
        return y, p, T, c, 0

    return closure


class TabulatedClosure:
    """Exact lookup of previously computed equilibrium outputs.

    States are keyed by their bit patterns; unseen states fall through to the
    equilibrium solve (counted in ``misses``). Useful to demonstrate that a
    surrogate which reproduces the chemistry exactly reproduces the flow
    exactly.
    """

    def __init__(self, atm: AtmosphereSpec):
        self.atm = atm
        self._table: dict = {}
        self._eq = equilibrium_closure(atm)
        self.misses = 0

    def record(self, z, rho, eps, y, p, T, c):
        for k in range(rho.shape[0]):
            key = (rho[k].tobytes(), eps[k].tobytes(), z[k].tobytes())
            self._table[key] = (y[k], p[k], T[k], c[k])

    def __call__(self, z, rho, eps, y_prev):
        n = rho.shape[0]
        y = np.empty((n, self.atm.n_species))
        p = np.empty(n)
        T = np.empty(n)
        c = np.empty(n)
        miss = []
        for k in range(n):
            key = (rho[k].tobytes(), eps[k].tobytes(), z[k].tobytes())
            hit = self._table.get(key)
            if hit is None:
                miss.append(k)
            else:
                y[k], p[k], T[k], c[k] = hit
        if miss:
            idx = np.array(miss)
            ym, pm, Tm, cm, _ = self._eq(z[idx], rho[idx], eps[idx], y_prev[idx])
            y[idx], p[idx], T[idx], c[idx] = ym, pm, Tm, cm
            self.misses += len(miss)
            self.record(z[idx], rho[idx], eps[idx], ym, pm, Tm, cm)
        return y, p, T, c, 0


# ---------------------------------------------------------------------------
# Upstream state construction.
# ---------------------------------------------------------------------------

def case_element_fractions(case: CaseConfig, atm: AtmosphereSpec) -> np.ndarray:
    if case.element_fractions is not None:
        z = np.asarray(case.element_fractions, dtype=float)
        if z.shape != (atm.n_elements,) or abs(z.sum() - 1.0) > 1e-12:
            raise ValueError("element_fractions must be a unit-sum vector "
                             f"of length {atm.n_elements}")
        return z
    return np.asarray(TOY_ELEMENT_FRACTIONS, dtype=float)


def upstream_equilibrium(case: CaseConfig, atm: AtmosphereSpec):
    """Equilibrium upstream mixture from the (p, T) boundary data."""
    z = case_element_fractions(case, atm)
    y_inf = equilibrate_tp(z, case.p_inf, case.T_inf, atm)
    mbar = mean_molar_mass(y_inf, atm)
    rho_inf = case.p_inf * mbar / (R_UNIVERSAL * case.T_inf)
    return y_inf, rho_inf


def frozen_gas_constants(case: CaseConfig, atm: AtmosphereSpec) -> tuple[float, float]:
    """(gamma, R) of the upstream equilibrium mixture with chemistry off."""
    y_inf, _ = upstream_equilibrium(case, atm)
    return mixture_cp(y_inf, atm) / mixture_cv(y_inf, atm), \
        R_UNIVERSAL / mean_molar_mass(y_inf, atm)


def upstream_state(case: CaseConfig, atm: AtmosphereSpec, mode: RunMode) -> euler.InflowState:
    arr = atm.arrays()
    share = arr["a"] * arr["em"][None, :] / arr["m"][:, None]
    y_inf, rho_inf = upstream_equilibrium(case, atm)
    v = np.array([rho_inf * case.speed, 0.0])
    if mode.kind == "pg":
        gamma, r_gas = frozen_gas_constants(case, atm)
        if mode.gamma is not None:
            gamma = mode.gamma
        eps = case.p_inf / ((gamma - 1.0) * rho_inf)
        c = float(np.sqrt(gamma * case.p_inf / rho_inf))
    else:
        eps = mixture_energy(case.T_inf, y_inf, atm)
        cp, cv = mixture_cp(y_inf, atm), mixture_cv(y_inf, atm)
        c = float(np.sqrt((cp / cv) * case.p_inf / rho_inf))
    return euler.InflowState(
        rho_inf * (y_inf @ share), v, rho_inf * (eps + 0.5 * case.speed**2),
        y_inf, case.p_inf, case.T_inf, c,
    )


def make_closure(mode: RunMode, case: CaseConfig, atm: AtmosphereSpec):
    if mode.kind == "pg":
        gamma, r_gas = frozen_gas_constants(case, atm)
        if mode.gamma is not None:
            gamma = mode.gamma
        return perfect_gas_closure(gamma, r_gas)
    if mode.kind in ("eq", "nn-eq"):
        return equilibrium_closure(atm)
    if callable(mode.model) and not hasattr(mode.model, "d_in"):
        return mode.model     # pre-built closure (tabulated reference, tests)
    model = mode.model
    if isinstance(model, (str, bytes)) or hasattr(model, "__fspath__"):
        from .surrogate import load_model

        model = load_model(model)
    return nn_closure(model, atm)


# ---------------------------------------------------------------------------
# Run drivers.
# ---------------------------------------------------------------------------

def solver_config(case: CaseConfig, mode: RunMode, atm: AtmosphereSpec,
                  raise_on_fail: bool = True) -> euler.SolverConfig:
    mesh = make_mesh(case)
    bc = euler.BoundaryConditions(
        "wall", "inflow", "outflow", "outflow",
        inflow=upstream_state(case, atm, mode),
    )
    return euler.SolverConfig(mesh, bc, case.cfl, case.tol_steady,
                              case.max_iter, case.shock_sensor, raise_on_fail)


def run(mode: RunMode, case: CaseConfig,
        init: euler.FlowField | None = None,
        raise_on_fail: bool = True) -> euler.SteadyResult:
    """Converge the case under the given mode's closure."""
    atm = get_atmosphere(case.atmosphere)
    closure = make_closure(mode, case, atm)
    cfg = solver_config(case, mode, atm, raise_on_fail)
    if init is not None:
        init = euler.chemistry_step(init, closure)
    return euler.run_to_steady(cfg, closure, init=init)


@dataclass
class WarmStartReport:
    nn_iterations: int
    eq_iterations: int
    nn_seconds: float
    eq_seconds: float
    total_seconds: float
    degraded: bool


def run_warm_start(case: CaseConfig, model) -> tuple[euler.SteadyResult, WarmStartReport]:
    """Surrogate phase to convergence, then equilibrium phase from its state.

    The returned field satisfies the equilibrium mode's convergence predicate
    (unless the second phase fails, in which case the surrogate result is
    returned with ``degraded=True``).
    """
    t0 = time.perf_counter()
    nn_res = run(RunMode("nn", model=model), case)
    t1 = time.perf_counter()
    try:
        eq_res = run(RunMode("eq"), case, init=nn_res.field)
        t2 = time.perf_counter()
        report = WarmStartReport(nn_res.iterations, eq_res.iterations,
                                 t1 - t0, t2 - t1, t2 - t0, False)
        return eq_res, report
    except euler.NonConvergence:
        t2 = time.perf_counter()
        report = WarmStartReport(nn_res.iterations, 0, t1 - t0, t2 - t1,
                                 t2 - t0, True)
        return nn_res, report


# ---------------------------------------------------------------------------
# Comparison tables.
# ---------------------------------------------------------------------------

@dataclass
class CompareRow:
    name: str
    seconds: float
    factor: float          # reference seconds / this mode's seconds
    p_l2: float
    p_linf: float
    s_l2: float
    s_linf: float
    resampled: bool


@dataclass
class ComparisonTable:
    reference: str
    rows: list

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("mode,seconds,factor,p_l2,p_linf,standoff_l2,standoff_linf,resampled\n")
            for r in self.rows:
                f.write(
                    f"{r.name},{r.seconds:.6g},{r.factor:.6g},{r.p_l2:.6e},"
                    f"{r.p_linf:.6e},{r.s_l2:.6e},{r.s_linf:.6e},{int(r.resampled)}\n"
                )

    def to_text(self) -> str:
        hdr = (f"{'mode':<10}{'seconds':>10}{'factor':>9}{'p L2':>12}"
               f"{'p Linf':>12}{'std L2':>12}{'std Linf':>12}\n")
        lines = [hdr, "-" * len(hdr) + "\n"]
        for r in self.rows:
            if r.name == self.reference:
                lines.append(
                    f"{r.name + ' (ref)':<10}{r.seconds:>10.2f}{1.0:>9.2f}"
                    f"{'-':>12}{'-':>12}{'-':>12}{'-':>12}\n"
                )
            else:
                note = "*" if r.resampled else ""
                lines.append(
                    f"{r.name + note:<10}{r.seconds:>10.2f}{r.factor:>9.2f}"
                    f"{r.p_l2:>12.3e}{r.p_linf:>12.3e}{r.s_l2:>12.3e}"
                    f"{r.s_linf:>12.3e}\n"
                )
        if any(r.resampled for r in self.rows):
            lines.append("* profiles resampled to the reference angular stations\n")
        return "".join(lines)


def _profile_errors(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    l2 = float(np.linalg.norm(a - b) / np.linalg.norm(b))
    linf = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
    return l2, linf


def compare(runs: dict[str, euler.SteadyResult], reference: str) -> ComparisonTable:
    """Profile-error and timing table against a designated reference run.

    Wall-pressure and standoff profiles from meshes with different angular
    stations are linearly resampled onto the reference stations (flagged).
    """
    ref = runs[reference]
    rows = []
    for name, res in runs.items():
        resampled = False
        wp, sd = res.wall_pressure, res.standoff
        if res.wall_angles.shape != ref.wall_angles.shape or \
                not np.allclose(res.wall_angles, ref.wall_angles):
            wp = np.interp(ref.wall_angles, res.wall_angles, wp)
            sd = np.interp(ref.wall_angles, res.wall_angles, sd)
            resampled = True
        if name == reference:
            rows.append(CompareRow(name, res.seconds, 1.0, 0.0, 0.0, 0.0, 0.0, False))
            continue
        p_l2, p_linf = _profile_errors(wp, ref.wall_pressure)
        s_l2, s_linf = _profile_errors(sd, ref.standoff)
        factor = ref.seconds / res.seconds if res.seconds > 0 else float("inf")
        rows.append(CompareRow(name, res.seconds, factor, p_l2, p_linf,
                               s_l2, s_linf, resampled))
    return ComparisonTable(reference, rows)
