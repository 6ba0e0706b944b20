"""Chemical-equilibrium closure: composition and temperature at fixed (rho, eps).

Solves, per state, the coupled system
    sum_i nu_ir mu_i(p_i, T) = 0   for each reaction r   (chemical equilibrium)
    sum_i y_i (h0_i + cv_i T) = eps                      (energy closure)
by damped Newton iteration on (reaction progress, T). Compositions move only
along reaction directions, so element mass fractions are invariant by
construction. The returned (p, T, cp, cv, c) are frozen-mixture values
recomputed from the thermo relations at the converged composition.

`scan_equilibrium` is an independent brute-force reference: it grid-scans the
progress variable maximizing total mixture entropy at fixed (rho, eps), which
is the exact variational form of the equilibrium condition for this state pair
(ds/dxi = -(1/T) sum_i G_i dy_i/dxi), and refines the bracket by golden
section. It shares only the thermo property functions with the Newton path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .thermo import (
    AtmosphereSpec,
    NonPhysicalEnergy,
    P_REF,
    R_UNIVERSAL,
    T_REF,
    element_mass_fractions,
    mixture_cp,
    mixture_cv,
    mixture_pressure,
    mixture_temperature,
)

# Relative floor applied to partial pressures inside logarithms. Guards exact
# zeros only; every floating-point-representable equilibrium stays exact.
P_FLOOR_REL = 1e-300
MAX_ITER_DEFAULT = 100
GTOL = 1e-12          # scaled Gibbs residual target (acceptance bound is 1e-10)
ETOL = 1e-13          # relative energy-closure target in the Newton loop


class NoConvergence(RuntimeError):
    """Newton failed to converge; carries the residual-norm trace."""

    def __init__(self, msg: str, trace: np.ndarray | None = None):
        super().__init__(msg)
        self.trace = trace if trace is not None else np.empty(0)


class NonRealizable(ValueError):
    """No nonnegative species composition realizes the element fractions."""


@dataclass(frozen=True)
class EquilibriumInput:
    element_fractions: np.ndarray   # (n_e,), mass fractions, sum 1
    rho: float                      # kg/m^3
    eps: float                      # J/kg specific internal energy


@dataclass(frozen=True)
class EquilibriumOutput:
    species_fractions: np.ndarray   # (n_s,), mass fractions
    p: float
    T: float
    cp: float                       # frozen-mixture values
    cv: float
    c: float                        # frozen speed of sound sqrt((cp/cv) p / rho)
    iterations: int
    residual: float                 # max |scaled Gibbs residual| at the solution


# ---------------------------------------------------------------------------
# Residual definition (public form).
# ---------------------------------------------------------------------------

def gibbs_residual(y: np.ndarray, p: float, t: float, atm: AtmosphereSpec) -> np.ndarray:
    """Dimensionless equilibrium residual, one entry per reaction.

    Entry r is sum_i nu_ir m_i G_i / (R T) evaluated at partial pressures
    x_i p — the reaction affinity in units of R T, zero exactly at
    equilibrium. Zero fractions contribute through a floored partial pressure.
    """
    arr = atm.arrays()
    y = np.asarray(y, dtype=float)
    n = y / arr["m"]
    x = n / n.sum()
    p_i = np.maximum(x * p, P_FLOOR_REL * p)
    # molar chemical potential mu_i = m_i G_i
    mu = (
        arr["m"] * (arr["h0"] + arr["cp"] * t)
        - t * arr["m"] * (arr["s0"] + arr["cp"] * np.log(t / T_REF))
        + R_UNIVERSAL * t * np.log(p_i / P_REF)
    )
    if atm.n_reactions == 0:
        return np.empty(0)
    return arr["nu"] @ mu / (R_UNIVERSAL * t)


# ---------------------------------------------------------------------------
# Newton kernel (njit): one state, general reaction count, toy-validated.
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lin_solve(A, b):
    """Gaussian elimination with partial pivoting; ok=False on singularity."""
    n = A.shape[0]
    M = A.copy()
    x = b.copy()
    for col in range(n):
        piv = col
        best = abs(M[col, col])
        for row in range(col + 1, n):
            if abs(M[row, col]) > best:
                best = abs(M[row, col])
                piv = row
        if best < 1e-300:
            return x, False
        if piv != col:
            for k in range(n):
                M[col, k], M[piv, k] = M[piv, k], M[col, k]
            x[col], x[piv] = x[piv], x[col]
        inv = 1.0 / M[col, col]
        for row in range(col + 1, n):
            fac = M[row, col] * inv
            if fac != 0.0:
                for k in range(col, n):
                    M[row, k] -= fac * M[col, k]
                x[row] -= fac * x[col]
    for col in range(n - 1, -1, -1):
        acc = x[col]
        for k in range(col + 1, n):
            acc -= M[col, k] * x[k]
        x[col] = acc / M[col, col]
    return x, True


@njit(cache=True)
def _residual_terms(y, T, rho, m, h0, cv, cp, s0, nu, eps):
    """Scaled residual vector [gibbs_r ..., energy] at state (y, T)."""
    ns = y.shape[0]
    na = nu.shape[0]
    f = np.empty(na + 1)
    mu = np.empty(ns)
    lt = np.log(T / 298.15)
    for i in range(ns):
        yi = y[i] if y[i] > 1e-300 else 1e-300
        p_i = rho * yi * 8.314462618 * T / m[i]
        mu[i] = (
            m[i] * (h0[i] + cp[i] * T)
            - T * m[i] * (s0[i] + cp[i] * lt)
            + 8.314462618 * T * np.log(p_i / 101325.0)
        )
    for r in range(na):
        acc = 0.0
        for i in range(ns):
            acc += nu[r, i] * mu[i]
        f[r] = acc / (8.314462618 * T)
    e = 0.0
    for i in range(ns):
        e += y[i] * (h0[i] + cv[i] * T)
    f[na] = (e - eps) / abs(eps)
    return f


@njit(cache=True)
def _closed_form_T(y, eps, h0, cv):
    num = eps
    den = 0.0
    for i in range(y.shape[0]):
        num -= y[i] * h0[i]
        den += y[i] * cv[i]
    return num / den


@njit(cache=True)
def _solve_state(rho, eps, y0, T0, m, h0, cv, cp, s0, nu, D, max_iter):
    """Damped Newton on (progress increments, T) from a strictly interior y0.

    The composition is updated incrementally (y += D dxi), which keeps
    near-depleted fractions accurate in floating point (multiplicative decay
    under the fraction-to-boundary cap instead of catastrophic cancellation).
    Returns (y, T, status, iters, res_hist): status 0 converged, 1 iteration
    limit, 2 line-search/solve stall.
    """
    ns = y0.shape[0]
    na = nu.shape[0]
    y = y0.copy()
    T = T0
    res_hist = np.zeros(max_iter)
    J = np.empty((na + 1, na + 1))
    it = 0
    status = 1
    f = _residual_terms(y, T, rho, m, h0, cv, cp, s0, nu, eps)
    merit = 0.0
    for k in range(na + 1):
        merit += f[k] * f[k]
    for it in range(1, max_iter + 1):
        gmax = 0.0
        for r in range(na):
            if abs(f[r]) > gmax:
                gmax = abs(f[r])
        res_hist[it - 1] = gmax
        if gmax <= 1e-12 and abs(f[na]) <= 1e-13:
            status = 0
            break
        # Jacobian; d ln p_i / d xi_s = D_is / y_i at fixed (rho, T)
        lt = np.log(T / 298.15)
        for r in range(na):
            for s in range(na):
                acc = 0.0
                for i in range(ns):
                    yi = y[i] if y[i] > 1e-300 else 1e-300
                    acc += nu[r, i] * D[i, s] / yi
                J[r, s] = acc
            accT = 0.0
            for i in range(ns):
                yi = y[i] if y[i] > 1e-300 else 1e-300
                p_i = rho * yi * 8.314462618 * T / m[i]
                s_i = s0[i] + cp[i] * lt - (8.314462618 / m[i]) * np.log(p_i / 101325.0)
                accT += nu[r, i] * (-m[i] * s_i + 8.314462618)
            J[r, na] = accT / (8.314462618 * T) - f[r] / T
        for s in range(na):
            acc = 0.0
            for i in range(ns):
                acc += (h0[i] + cv[i] * T) * D[i, s]
            J[na, s] = acc / abs(eps)
        accT = 0.0
        for i in range(ns):
            accT += y[i] * cv[i]
        J[na, na] = accT / abs(eps)

        dq, ok = _lin_solve(J, -f)
        if not ok:
            status = 2
            break

        # fraction-to-boundary cap: compositions strictly positive, T floored
        dy = np.zeros(ns)
        for i in range(ns):
            acc = 0.0
            for s in range(na):
                acc += D[i, s] * dq[s]
            dy[i] = acc
        alpha = 1.0
        for i in range(ns):
            if dy[i] < 0.0 and y[i] > 0.0:
                cap = 0.995 * y[i] / (-dy[i])
                if cap < alpha:
                    alpha = cap
        dT = dq[na]
        if dT < 0.0 and T + dT < 1e-2:
            cap = 0.995 * (T - 1e-2) / (-dT)
            if cap < alpha:
                alpha = cap
        if dT > 0.0 and dT > 9.0 * T:
            cap = 9.0 * T / dT
            if cap < alpha:
                alpha = cap

        # backtracking on the squared residual norm
        accepted = False
        step = alpha
        for _bt in range(40):
            yn = np.empty(ns)
            ok2 = True
            for i in range(ns):
                yn[i] = y[i] + step * dy[i]
                if yn[i] < 0.0:
                    ok2 = False
            Tn = T + step * dT
            if ok2 and Tn > 0.0:
                fn = _residual_terms(yn, Tn, rho, m, h0, cv, cp, s0, nu, eps)
                mn = 0.0
                for k2 in range(na + 1):
                    mn += fn[k2] * fn[k2]
                if mn < merit or mn <= 1e-26:
                    y = yn
                    T = Tn
                    f = fn
                    merit = mn
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            status = 2
            break

    # Exact energy projection + progress-only polish: T from the closed form,
    # then Newton on the reaction residuals along the energy manifold.
    Tproj = _closed_form_T(y, eps, h0, cv)
    if Tproj > 0.0:
        T = Tproj
        Jp = np.empty((na, na))
        rhs2 = np.empty(na)
        for _pol in range(4):
            f = _residual_terms(y, T, rho, m, h0, cv, cp, s0, nu, eps)
            gmax = 0.0
            for r in range(na):
                if abs(f[r]) > gmax:
                    gmax = abs(f[r])
            if gmax <= 1e-12:
                break
            cvbar = 0.0
            for i in range(ns):
                cvbar += y[i] * cv[i]
            lt = np.log(T / 298.15)
            for r in range(na):
                accT = 0.0
                for i in range(ns):
                    yi = y[i] if y[i] > 1e-300 else 1e-300
                    p_i = rho * yi * 8.314462618 * T / m[i]
                    s_i = s0[i] + cp[i] * lt - (8.314462618 / m[i]) * np.log(p_i / 101325.0)
                    accT += nu[r, i] * (-m[i] * s_i + 8.314462618)
                dfr_dT = accT / (8.314462618 * T) - f[r] / T
                for s in range(na):
                    acc = 0.0
                    dT_dxi = 0.0
                    for i in range(ns):
                        yi = y[i] if y[i] > 1e-300 else 1e-300
                        acc += nu[r, i] * D[i, s] / yi
                        dT_dxi -= (h0[i] + cv[i] * T) * D[i, s]
                    dT_dxi /= cvbar
                    Jp[r, s] = acc + dfr_dT * dT_dxi
                rhs2[r] = -f[r]
            dxi, ok = _lin_solve(Jp, rhs2)
            if not ok:
                break
            alpha = 1.0
            for i in range(ns):
                acc = 0.0
                for s in range(na):
                    acc += D[i, s] * dxi[s]
                if acc < 0.0 and y[i] > 0.0:
                    cap = 0.995 * y[i] / (-acc)
                    if cap < alpha:
                        alpha = cap
            for i in range(ns):
                acc = 0.0
                for s in range(na):
                    acc += D[i, s] * dxi[s]
                y[i] = y[i] + alpha * acc
            Tn = _closed_form_T(y, eps, h0, cv)
            if Tn > 0.0:
                T = Tn
            else:
                break
        f = _residual_terms(y, T, rho, m, h0, cv, cp, s0, nu, eps)
        gmax = 0.0
        for r in range(na):
            if abs(f[r]) > gmax:
                gmax = abs(f[r])
        if gmax <= 1e-11:
            status = 0
    return y, T, status, it, res_hist


@njit(cache=True)
def _coarse_scan_start(rho, eps, ybase, D, m, h0, cv, cp, s0, nu, lo, hi):
    """Feasibility scan along a single reaction: best |residual| start point."""
    npts = 64
    best = 1e300
    xbest = 0.5 * (lo + hi)
    found = False
    for k in range(npts):
        t = (k + 0.5) / npts
        xi = lo + (hi - lo) * t
        y = np.empty(ybase.shape[0])
        ok = True
        for i in range(ybase.shape[0]):
            y[i] = ybase[i] + D[i, 0] * xi
            if y[i] < 0.0:
                ok = False
        if not ok:
            continue
        T = _closed_form_T(y, eps, h0, cv)
        if not (T > 1e-2):
            continue
        f = _residual_terms(y, T, rho, m, h0, cv, cp, s0, nu, eps)
        mer = 0.0
        for r in range(f.shape[0]):
            mer += f[r] * f[r]
        if mer < best:
            best = mer
            xbest = xi
            found = True
    return xbest, found


@njit(cache=True)
def _solve_batch(rhos, epss, y0s, T0s, m, h0, cv, cp, s0, nu, D, max_iter,
                 ys_out, Ts_out, status_out, iters_out):
    n = rhos.shape[0]
    for j in range(n):
        y, T, status, it, _ = _solve_state(
            rhos[j], epss[j], y0s[j].copy(), T0s[j], m, h0, cv, cp, s0, nu, D, max_iter
        )
        for i in range(y.shape[0]):
            ys_out[j, i] = y[i]
        Ts_out[j] = T
        status_out[j] = status
        iters_out[j] = it


# ---------------------------------------------------------------------------
# Python-side assembly.
# ---------------------------------------------------------------------------

class _Problem:
    """Prepared constant data for one atmosphere (cached per spec object)."""

    def __init__(self, atm: AtmosphereSpec):
        self.atm = atm
        arr = atm.arrays()
        self.m = arr["m"]
        self.h0 = arr["h0"]
        self.cv = arr["cv"]
        self.cp = arr["cp"]
        self.s0 = arr["s0"]
        self.a = arr["a"]
        self.em = arr["em"]
        self.nu_all = np.ascontiguousarray(arr["nu"])
        # mass-normalized reaction directions: dy = D @ dxi, columns sum to 0
        ns, nr = atm.n_species, atm.n_reactions
        D = np.zeros((ns, nr))
        for r in range(nr):
            scale = 0.5 * float(np.abs(self.nu_all[r]) @ self.m)
            D[:, r] = -self.nu_all[r] * self.m / scale
        self.D_all = np.ascontiguousarray(D)
        # (ns, ne) mass share of each element in each species
        self.share = self.a * self.em[None, :] / self.m[:, None]
        # pure single-element species index per element, or -1
        self.pure = np.full(atm.n_elements, -1, dtype=int)
        for i in range(ns):
            counts = self.a[i]
            if counts.sum() == 1:
                k = int(np.argmax(counts))
                if self.pure[k] < 0:
                    self.pure[k] = i

    def base_composition(self, z: np.ndarray) -> np.ndarray:
        """Any nonnegative composition realizing element fractions z."""
        ns = self.atm.n_species
        if np.all(self.pure >= 0):
            y = np.zeros(ns)
            for k in range(self.atm.n_elements):
                y[self.pure[k]] = z[k]
            return y
        # general fallback: nonnegative least squares on the element shares
        from scipy.optimize import nnls

        y, rnorm = nnls(self.share.T, z)
        if rnorm > 1e-10 * max(1.0, float(np.linalg.norm(z))):
            raise NonRealizable(
                f"element fractions {z} not realizable by species "
                f"{[sp.name for sp in self.atm.species]} (residual {rnorm:.3e})"
            )
        return y

    def intervals(self, ybase: np.ndarray):
        """Per-reaction feasible progress intervals at ybase; frozen mask."""
        nr = self.atm.n_reactions
        lo = np.zeros(nr)
        hi = np.zeros(nr)
        for r in range(nr):
            d = self.D_all[:, r]
            hi_r = np.inf
            lo_r = -np.inf
            for i in range(self.atm.n_species):
                if d[i] < 0:
                    hi_r = min(hi_r, ybase[i] / -d[i])
                elif d[i] > 0:
                    lo_r = max(lo_r, -ybase[i] / d[i])
            lo[r], hi[r] = lo_r, hi_r
        frozen = (hi - lo) < 1e-14
        return lo, hi, frozen

    def energy_floor_bounds(self, ybase, lo, hi, active):
        """Min over the feasible box of the T = 0 energy (linear: endpoints)."""
        floors = [float(ybase @ self.h0)]
        for r in active:
            for x in (lo[r], hi[r]):
                y = ybase + self.D_all[:, r] * x
                floors.append(float(np.clip(y, 0, None) @ self.h0))
        return min(floors)


_PROBLEMS: dict[int, _Problem] = {}


def _problem(atm: AtmosphereSpec) -> _Problem:
    key = id(atm)
    if key not in _PROBLEMS:
        _PROBLEMS[key] = _Problem(atm)
    return _PROBLEMS[key]


def _prepare_start(prob: _Problem, z, rho, eps, guess, force_scan=False):
    """Strictly interior starting (y, T) plus the active reaction system."""
    atm = prob.atm
    ybase = prob.base_composition(z)
    lo, hi, frozen = prob.intervals(ybase)
    active = [r for r in range(atm.n_reactions) if not frozen[r]]
    nu = np.ascontiguousarray(prob.nu_all[active]) if active \
        else np.zeros((0, atm.n_species))
    D = np.ascontiguousarray(prob.D_all[:, active]) if active \
        else np.zeros((atm.n_species, 0))
    if not active:
        return ybase, _closed_form_T(ybase, eps, prob.h0, prob.cv), nu, D, ybase, active

    y0 = None
    if guess is not None and not force_scan:
        g = np.asarray(guess, dtype=float)
        zg = element_mass_fractions(np.clip(g, 0.0, None), atm)
        if np.all(g >= 0.0) and float(np.abs(zg - z).sum()) <= 1e-8:
            # element-consistent warm start: preserve corner distances exactly
            y0 = np.maximum(g, 1e-250)
        else:
            xi, *_ = np.linalg.lstsq(D, g - ybase, rcond=None)
            span = hi[active] - lo[active]
            xi = np.clip(xi, lo[active] + 1e-9 * span, hi[active] - 1e-9 * span)
            y0 = np.maximum(ybase + D @ xi, 1e-250)
    if y0 is None:
        mid = 0.5 * (lo[active] + hi[active])
        y0 = np.maximum(ybase + D @ mid, 1e-250)

    T0 = _closed_form_T(y0, eps, prob.h0, prob.cv)
    if ((not T0 > 1e-2) or force_scan) and len(active) == 1:
        r = active[0]
        xb, found = _coarse_scan_start(
            rho, eps, ybase, np.ascontiguousarray(prob.D_all[:, r : r + 1]),
            prob.m, prob.h0, prob.cv, prob.cp, prob.s0, nu, lo[r], hi[r],
        )
        if found:
            y0 = np.maximum(ybase + prob.D_all[:, r] * xb, 1e-250)
            T0 = _closed_form_T(y0, eps, prob.h0, prob.cv)
    if not T0 > 0.0:
        T0 = 50.0  # let the energy row pull it; the merit guards the rest
    return y0, T0, nu, D, ybase, active


def _element_correct(prob: _Problem, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Re-impose exact element totals on the dominant pure-element species.

    Only fractions above 1e-6 are corrected: tiny corner fractions carry less
    error than the correction's own cancellation would introduce.
    """
    y = y.copy()
    for k in range(prob.atm.n_elements):
        i = prob.pure[k]
        if i < 0 or y[i] <= 1e-6:
            continue
        other = float(z[k] - (y @ prob.share[:, k] - y[i] * prob.share[i, k]))
        if other > 0:
            y[i] = other
    return y


def _element_correct_batch(prob: _Problem, ys: np.ndarray, zs: np.ndarray) -> np.ndarray:
    ys = ys.copy()
    for k in range(prob.atm.n_elements):
        i = prob.pure[k]
        if i < 0:
            continue
        mask = ys[:, i] > 1e-6
        if not np.any(mask):
            continue
        other = zs[:, k] - (ys @ prob.share[:, k] - ys[:, i] * prob.share[i, k])
        ys[mask, i] = np.where(other[mask] > 0, other[mask], ys[mask, i])
    return ys


def _finalize(prob: _Problem, y, T, rho, eps, z, iters, t_max=None):
    atm = prob.atm
    y = _element_correct(prob, y, z)
    t = mixture_temperature(eps, y, atm, t_max=t_max)   # exact closure; raises if bad
    p = mixture_pressure(rho, t, y, atm)
    cpv = mixture_cp(y, atm)
    cvv = mixture_cv(y, atm)
    c = float(np.sqrt((cpv / cvv) * p / rho))
    res = gibbs_residual(y, p, t, atm)
    rmax = float(np.max(np.abs(res))) if res.size else 0.0
    return EquilibriumOutput(y, float(p), float(t), cpv, cvv, c, int(iters), rmax)


def equilibrate(
    inp: EquilibriumInput,
    atm: AtmosphereSpec,
    guess: np.ndarray | None = None,
    max_iter: int = MAX_ITER_DEFAULT,
    t_max: float | None = None,
) -> EquilibriumOutput:
    """Equilibrium composition and temperature at fixed (rho, eps).

    Deterministic for identical inputs and guesses. Raises NonRealizable if
    the element fractions admit no composition, NonPhysicalEnergy if eps lies
    below the feasible formation floor or the converged T is out of range, and
    NoConvergence (with the residual trace) if Newton and its restart fail.
    """
    z = np.asarray(inp.element_fractions, dtype=float)
    if np.any(z < 0) or abs(z.sum() - 1.0) > 1e-9:
        raise NonRealizable(f"element fractions must be nonnegative and sum to 1: {z}")
    if not (inp.rho > 0.0):
        raise ValueError(f"rho must be positive, got {inp.rho}")
    prob = _problem(atm)

    ybase = prob.base_composition(z)
    lo, hi, frozen = prob.intervals(ybase)
    active0 = [r for r in range(atm.n_reactions) if not frozen[r]]
    if inp.eps <= prob.energy_floor_bounds(ybase, lo, hi, active0):
        raise NonPhysicalEnergy(
            f"eps = {inp.eps:.6e} J/kg is at or below the formation floor of "
            f"every composition realizing {z}"
        )

    last_trace = None
    for attempt, (g, force_scan) in enumerate([(guess, False), (None, True)]):
        y0, T0, nu, D, ybase, active = _prepare_start(
            prob, z, inp.rho, inp.eps, g, force_scan=force_scan
        )
        if not active:
            return _finalize(prob, y0, T0, inp.rho, inp.eps, z, 0, t_max)
        y, T, status, it, trace = _solve_state(
            inp.rho, inp.eps, y0, T0, prob.m, prob.h0, prob.cv, prob.cp,
            prob.s0, nu, D, max_iter
        )
        if status == 0:
            return _finalize(prob, y, T, inp.rho, inp.eps, z, it, t_max)
        last_trace = trace[:it]
    raise NoConvergence(
        f"equilibrium Newton failed at rho={inp.rho:.6g}, eps={inp.eps:.6g} "
        f"after restart (trace tail {last_trace[-3:] if last_trace is not None else []})",
        last_trace,
    )


def equilibrate_batch(
    inputs: list[EquilibriumInput],
    atm: AtmosphereSpec,
    guesses: np.ndarray | None = None,
    max_iter: int = MAX_ITER_DEFAULT,
    t_max: float | None = None,
) -> tuple[list[EquilibriumOutput | None], dict[int, Exception]]:
    """Equilibrate over independent inputs; failures isolated per index.

    Returns (outputs, failures): outputs[i] is None exactly when i in failures.
    Output order matches input order.
    """
    outputs: list[EquilibriumOutput | None] = [None] * len(inputs)
    failures: dict[int, Exception] = {}
    for i, inp in enumerate(inputs):
        g = None if guesses is None else guesses[i]
        try:
            outputs[i] = equilibrate(inp, atm, guess=g, max_iter=max_iter, t_max=t_max)
        except Exception as exc:  # per-index isolation by contract
            failures[i] = exc
    return outputs, failures


class EquilibriumSolver:
    """Prepared per-state solver for repeated calls at fixed element totals.

    Amortizes the setup that depends only on the element fractions (base
    composition, reaction intervals, energy floor) across calls, so each call
    pays for the damped Newton solve and finalization only. Semantics match
    ``equilibrate`` with the same inputs; intended for tight sequential
    per-point loops and call-latency measurement.
    """

    def __init__(self, atm: AtmosphereSpec, element_fractions):
        z = np.asarray(element_fractions, dtype=float)
        if np.any(z < 0) or abs(z.sum() - 1.0) > 1e-9:
            raise NonRealizable(
                f"element fractions must be nonnegative and sum to 1: {z}"
            )
        self.atm = atm
        self._z = z
        prob = _problem(atm)
        self._prob = prob
        self._ybase = prob.base_composition(z)
        lo, hi, frozen = prob.intervals(self._ybase)
        self._lo, self._hi = lo, hi
        self._active = [r for r in range(atm.n_reactions) if not frozen[r]]
        if self._active:
            self._nu = np.ascontiguousarray(prob.nu_all[self._active])
            self._D = np.ascontiguousarray(prob.D_all[:, self._active])
            mid = 0.5 * (lo[self._active] + hi[self._active])
            self._ymid = np.maximum(self._ybase + self._D @ mid, 1e-250)
        else:
            self._nu = np.zeros((0, atm.n_species))
            self._D = np.zeros((atm.n_species, 0))
            self._ymid = self._ybase
        self._floor = prob.energy_floor_bounds(self._ybase, lo, hi,
                                               self._active)

    def solve(self, rho: float, eps: float,
              max_iter: int = MAX_ITER_DEFAULT,
              t_max: float | None = None) -> EquilibriumOutput:
        if not (rho > 0.0):
            raise ValueError(f"rho must be positive, got {rho}")
        if eps <= self._floor:
            raise NonPhysicalEnergy(
                f"eps = {eps:.6e} J/kg is at or below the formation floor"
            )
        prob = self._prob
        if not self._active:
            T0 = _closed_form_T(self._ybase, eps, prob.h0, prob.cv)
            return _finalize(prob, self._ybase, T0, rho, eps, self._z, 0, t_max)
        for use_scan in (False, True):
            y0 = self._ymid
            T0 = _closed_form_T(y0, eps, prob.h0, prob.cv)
            if (use_scan or not T0 > 1e-2) and len(self._active) == 1:
                r = self._active[0]
                xb, found = _coarse_scan_start(
                    rho, eps, self._ybase,
                    np.ascontiguousarray(prob.D_all[:, r:r + 1]),
                    prob.m, prob.h0, prob.cv, prob.cp, prob.s0, self._nu,
                    self._lo[r], self._hi[r],
                )
                if found:
                    y0 = np.maximum(self._ybase + prob.D_all[:, r] * xb, 1e-250)
                    T0 = _closed_form_T(y0, eps, prob.h0, prob.cv)
            if not T0 > 0.0:
                T0 = 50.0
            y, T, status, it, trace = _solve_state(
                rho, eps, y0, T0, prob.m, prob.h0, prob.cv, prob.cp,
                prob.s0, self._nu, self._D, max_iter
            )
            if status == 0:
                return _finalize(prob, y, T, rho, eps, self._z, it, t_max)
        raise NoConvergence(
            f"equilibrium Newton failed at rho={rho:.6g}, eps={eps:.6g}",
            trace[:it],
        )


def equilibrate_fields(
    z: np.ndarray,
    rho: np.ndarray,
    eps: np.ndarray,
    atm: AtmosphereSpec,
    guess_y: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Array-native equilibrium solve for solver fields (no exceptions).

    z: (n, n_e) element fractions; rho, eps: (n,). Returns
    (y, T, p, cp, cv, c, status); status != 0 marks failed entries. With a
    warm guess (the solver's previous composition) the per-state setup is
    fully vectorized; all reactions are assumed active, which holds whenever
    every element fraction is strictly positive.
    """
    prob = _problem(atm)
    n = rho.shape[0]
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    ns = atm.n_species
    if guess_y is not None and atm.n_reactions > 0:
        y0s = np.maximum(guess_y, 1e-250)
        T0s = (eps - y0s @ prob.h0) / (y0s @ prob.cv)
        T0s = np.where(T0s > 1e-2, T0s, 50.0)
        nu, D = prob.nu_all, prob.D_all
    else:
        y0s = np.empty((n, ns))
        T0s = np.empty(n)
        nu = D = None
        for j in range(n):
            y0, T0, nu_j, D_j, _, active = _prepare_start(
                prob, z[j], float(rho[j]), float(eps[j]), None
            )
            y0s[j] = y0
            T0s[j] = T0
            if nu is None and active:
                nu, D = nu_j, D_j
    ys = np.empty((n, ns))
    Ts = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    iters = np.zeros(n, dtype=np.int64)
    if nu is None or nu.shape[0] == 0:
        ys[:] = y0s
    else:
        _solve_batch(rho, eps, np.ascontiguousarray(y0s), T0s,
                     prob.m, prob.h0, prob.cv, prob.cp, prob.s0, nu, D,
                     MAX_ITER_DEFAULT, ys, Ts, status, iters)
    ys = _element_correct_batch(prob, ys, z)
    cvbar = ys @ prob.cv
    cpbar = ys @ prob.cp
    Ts = (eps - ys @ prob.h0) / cvbar
    bad = ~(Ts > 0.0) | ~(Ts <= atm.t_max)
    status[bad & (status == 0)] = 3
    Ts_safe = np.where(Ts > 0, Ts, 1.0)
    ps = rho * R_UNIVERSAL * Ts_safe * (ys / prob.m[None, :]).sum(axis=1)
    cs = np.sqrt((cpbar / cvbar) * ps / rho)
    return ys, Ts, ps, cpbar, cvbar, cs, status


# ---------------------------------------------------------------------------
# Fixed-(T, p) equilibrium: boundary-state construction.
# ---------------------------------------------------------------------------

def equilibrate_tp(
    z: np.ndarray, p: float, t: float, atm: AtmosphereSpec,
    max_iter: int = MAX_ITER_DEFAULT,
) -> np.ndarray:
    """Equilibrium mass fractions at fixed temperature and total pressure.

    Same Newton structure as the (rho, eps) solve with the energy row dropped;
    partial pressures are mole fractions times the fixed p. Used to build
    inflow states from (p, T) boundary data.
    """
    prob = _problem(atm)
    z = np.asarray(z, dtype=float)
    ybase = prob.base_composition(z)
    lo, hi, frozen = prob.intervals(ybase)
    active = [r for r in range(atm.n_reactions) if not frozen[r]]
    if not active:
        return ybase
    D = np.ascontiguousarray(prob.D_all[:, active])
    mid = 0.5 * (lo[active] + hi[active])
    y = np.maximum(ybase + D @ mid, 1e-250)

    def resid(yv):
        return gibbs_residual(yv, p, t, atm)[active]

    na = len(active)
    f = resid(y)
    merit = float(f @ f)
    for _ in range(max_iter):
        if np.max(np.abs(f)) <= 1e-12:
            break
        # d res_r / d xi_s at fixed (T, p): composition term minus mole-sum term
        S = float((y / prob.m).sum())
        J = np.empty((na, na))
        for rl, r in enumerate(active):
            for sl in range(na):
                term = float((prob.nu_all[r] * D[:, sl] / np.maximum(y, 1e-300)).sum())
                term -= float(prob.nu_all[r].sum()) * float((D[:, sl] / prob.m).sum()) / S
                J[rl, sl] = term
        dxi = np.linalg.solve(J, -f)
        dy = D @ dxi
        alpha = 1.0
        for i in range(atm.n_species):
            if dy[i] < 0 and y[i] > 0:
                alpha = min(alpha, 0.995 * y[i] / -dy[i])
        accepted = False
        step = alpha
        for _bt in range(60):
            yn = np.maximum(y + step * dy, 0.0)
            fn = resid(yn)
            mn = float(fn @ fn)
            if mn < merit or mn <= 1e-26:
                y, f, merit = yn, fn, mn
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    if np.max(np.abs(f)) > 1e-9:
        raise NoConvergence(f"fixed-(T,p) equilibrium failed at T={t}, p={p}")
    return _element_correct(prob, y, z)


# ---------------------------------------------------------------------------
# Brute-force reference: entropy scan over the progress variable.
# ---------------------------------------------------------------------------

def total_entropy(y: np.ndarray, rho: float, t: float, atm: AtmosphereSpec) -> float:
    """Mixture specific entropy at (rho, T, composition)."""
    arr = atm.arrays()
    y = np.asarray(y, dtype=float)
    p_i = rho * np.maximum(y, 0.0) * R_UNIVERSAL * t / arr["m"]
    s_i = np.where(
        y > 0.0,
        arr["s0"] + arr["cp"] * np.log(t / T_REF)
        - (R_UNIVERSAL / arr["m"]) * np.log(np.maximum(p_i, 1e-300) / P_REF),
        0.0,
    )
    return float((np.where(y > 0.0, y, 0.0) * s_i).sum())


def scan_equilibrium(
    z: np.ndarray, rho: float, eps: float, atm: AtmosphereSpec,
    resolution: float = 1e-6,
) -> EquilibriumOutput:
    """Brute-force single-reaction equilibrium at fixed (rho, eps).

    Grid-scans the reaction-progress interval at the given resolution for the
    maximum of total mixture entropy (the exact stationarity condition at
    constant density and internal energy), then refines the bracketing
    interval by golden-section search on the same objective. Derivative-free
    and independent of the Newton path; intended as a validation reference.
    """
    if atm.n_reactions != 1:
        raise ValueError("scan reference supports exactly one reaction")
    prob = _problem(atm)
    z = np.asarray(z, dtype=float)
    ybase = prob.base_composition(z)
    lo, hi, frozen = prob.intervals(ybase)
    if frozen[0]:
        t = mixture_temperature(eps, ybase, atm)
        return _finalize(prob, ybase, t, rho, eps, z, 0)
    d = prob.D_all[:, 0]
    arr = atm.arrays()

    def entropy_at(xi: np.ndarray) -> np.ndarray:
        y = ybase[None, :] + xi[:, None] * d[None, :]
        y = np.clip(y, 0.0, None)
        tt = (eps - y @ arr["h0"]) / (y @ arr["cv"])
        good = tt > 0.0
        tt_safe = np.where(good, tt, 1.0)
        p_i = rho * y * R_UNIVERSAL * tt_safe[:, None] / arr["m"][None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            s_i = (
                arr["s0"][None, :]
                + arr["cp"][None, :] * np.log(tt_safe[:, None] / T_REF)
                - (R_UNIVERSAL / arr["m"])[None, :]
                * np.log(np.maximum(p_i, 1e-300) / P_REF)
            )
        s = (np.where(y > 0.0, y * s_i, 0.0)).sum(axis=1)
        return np.where(good, s, -np.inf)

    n = int(round(1.0 / resolution)) + 1
    xi = np.linspace(lo[0], hi[0], n)
    s = entropy_at(xi)
    k = int(np.argmax(s))
    a = xi[max(k - 1, 0)]
    b = xi[min(k + 1, n - 1)]
    # golden-section refinement (function evaluations only)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c1 = b - (b - a) * invphi
    c2 = a + (b - a) * invphi
    f1 = entropy_at(np.array([c1]))[0]
    f2 = entropy_at(np.array([c2]))[0]
    for _ in range(200):
        if (b - a) < 1e-13 * max(abs(hi[0] - lo[0]), 1.0):
            break
        if f1 >= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - (b - a) * invphi
            f1 = entropy_at(np.array([c1]))[0]
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + (b - a) * invphi
            f2 = entropy_at(np.array([c2]))[0]
    xstar = 0.5 * (a + b)
    y = np.clip(ybase + xstar * d, 0.0, None)
    t = mixture_temperature(eps, y, atm)
    return _finalize(prob, y, t, rho, eps, z, 0)
