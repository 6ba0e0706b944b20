"""Exact Riemann solver for the 1D Euler equations with a gamma-law gas.

Implements the classical two-wave solution: Newton iteration on the pressure
function for the star-region pressure, then self-similar sampling. Used as an
independent reference for shock-capturing verification.
"""

from __future__ import annotations

import numpy as np


class VacuumState(ValueError):
    """Initial data generate vacuum; the two-wave solution does not apply."""


def _f_side(p: float, rho_k: float, p_k: float, gamma: float) -> tuple[float, float]:
    """Pressure function and derivative for one side (shock or rarefaction)."""
    if p > p_k:  # shock branch
        a_k = 2.0 / ((gamma + 1.0) * rho_k)
        b_k = (gamma - 1.0) / (gamma + 1.0) * p_k
        sq = np.sqrt(a_k / (p + b_k))
        f = (p - p_k) * sq
        df = sq * (1.0 - 0.5 * (p - p_k) / (p + b_k))
    else:  # rarefaction branch
        c_k = np.sqrt(gamma * p_k / rho_k)
        pr = p / p_k
        f = 2.0 * c_k / (gamma - 1.0) * (pr ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
        df = 1.0 / (rho_k * c_k) * pr ** (-(gamma + 1.0) / (2.0 * gamma))
    return f, df


def solve_star(
    rho_l: float, u_l: float, p_l: float,
    rho_r: float, u_r: float, p_r: float,
    gamma: float = 1.4, tol: float = 1e-14, max_iter: int = 100,
) -> tuple[float, float]:
    """Star-region (p*, u*) for the Riemann problem (L | R)."""
    c_l = np.sqrt(gamma * p_l / rho_l)
    c_r = np.sqrt(gamma * p_r / rho_r)
    if 2.0 * (c_l + c_r) / (gamma - 1.0) <= u_r - u_l:
        raise VacuumState("initial states open a vacuum region")
    # primitive-variable guess, floored
    p = max(
        0.5 * (p_l + p_r)
        - 0.125 * (u_r - u_l) * (rho_l + rho_r) * (c_l + c_r),
        1e-8 * min(p_l, p_r),
    )
    for _ in range(max_iter):
        f_l, df_l = _f_side(p, rho_l, p_l, gamma)
        f_r, df_r = _f_side(p, rho_r, p_r, gamma)
        g = f_l + f_r + (u_r - u_l)
        dp = -g / (df_l + df_r)
        p_new = p + dp
        if p_new <= 0.0:
            p_new = 0.5 * p
        if abs(p_new - p) <= tol * max(p, p_new):
            p = p_new
            break
        p = p_new
    f_l, _ = _f_side(p, rho_l, p_l, gamma)
    f_r, _ = _f_side(p, rho_r, p_r, gamma)
    u = 0.5 * (u_l + u_r) + 0.5 * (f_r - f_l)
    return float(p), float(u)


def sample(
    xi: np.ndarray,
    rho_l: float, u_l: float, p_l: float,
    rho_r: float, u_r: float, p_r: float,
    gamma: float = 1.4,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Self-similar solution (rho, u, p) at speeds xi = x/t."""
    p_s, u_s = solve_star(rho_l, u_l, p_l, rho_r, u_r, p_r, gamma)
    xi = np.asarray(xi, dtype=float)
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)
    c_l = np.sqrt(gamma * p_l / rho_l)
    c_r = np.sqrt(gamma * p_r / rho_r)
    gm1, gp1 = gamma - 1.0, gamma + 1.0

    left = xi <= u_s
    # --- left of contact ---
    if p_s > p_l:  # left shock
        rho_sl = rho_l * (p_s / p_l + gm1 / gp1) / (gm1 / gp1 * p_s / p_l + 1.0)
        s_l = u_l - c_l * np.sqrt(gp1 / (2 * gamma) * p_s / p_l + gm1 / (2 * gamma))
        pre = left & (xi <= s_l)
        post = left & (xi > s_l)
        rho[pre], u[pre], p[pre] = rho_l, u_l, p_l
        rho[post], u[post], p[post] = rho_sl, u_s, p_s
    else:  # left rarefaction
        rho_sl = rho_l * (p_s / p_l) ** (1.0 / gamma)
        c_sl = c_l * (p_s / p_l) ** (gm1 / (2 * gamma))
        head, tail = u_l - c_l, u_s - c_sl
        pre = left & (xi <= head)
        fan = left & (xi > head) & (xi < tail)
        post = left & (xi >= tail)
        rho[pre], u[pre], p[pre] = rho_l, u_l, p_l
        rho[post], u[post], p[post] = rho_sl, u_s, p_s
        cf = 2.0 / gp1 * (c_l + 0.5 * gm1 * (u_l - xi[fan]))
        u[fan] = 2.0 / gp1 * (c_l + 0.5 * gm1 * u_l + xi[fan])
        rho[fan] = rho_l * (cf / c_l) ** (2.0 / gm1)
        p[fan] = p_l * (cf / c_l) ** (2.0 * gamma / gm1)

    right = ~left
    # --- right of contact ---
    if p_s > p_r:  # right shock
        rho_sr = rho_r * (p_s / p_r + gm1 / gp1) / (gm1 / gp1 * p_s / p_r + 1.0)
        s_r = u_r + c_r * np.sqrt(gp1 / (2 * gamma) * p_s / p_r + gm1 / (2 * gamma))
        post = right & (xi < s_r)
        pre = right & (xi >= s_r)
        rho[pre], u[pre], p[pre] = rho_r, u_r, p_r
        rho[post], u[post], p[post] = rho_sr, u_s, p_s
    else:  # right rarefaction
        rho_sr = rho_r * (p_s / p_r) ** (1.0 / gamma)
        c_sr = c_r * (p_s / p_r) ** (gm1 / (2 * gamma))
        head, tail = u_r + c_r, u_s + c_sr
        pre = right & (xi >= head)
        fan = right & (xi < head) & (xi > tail)
        post = right & (xi <= tail)
        rho[pre], u[pre], p[pre] = rho_r, u_r, p_r
        rho[post], u[post], p[post] = rho_sr, u_s, p_s
        cf = 2.0 / gp1 * (c_r - 0.5 * gm1 * (u_r - xi[fan]))
        u[fan] = 2.0 / gp1 * (-c_r + 0.5 * gm1 * u_r + xi[fan])
        rho[fan] = rho_r * (cf / c_r) ** (2.0 / gm1)
        p[fan] = p_r * (cf / c_r) ** (2.0 * gamma / gm1)
    return rho, u, p


SOD_LEFT = (1.0, 0.0, 1.0)
SOD_RIGHT = (0.125, 0.0, 0.1)


def sod_profile(x: np.ndarray, t: float, x0: float = 0.5, gamma: float = 1.4):
    """Exact (rho, u, p) for the standard shock-tube problem at time t."""
    if t <= 0:
        raise ValueError("t must be positive")
    xi = (np.asarray(x, dtype=float) - x0) / t
    return sample(xi, *SOD_LEFT, *SOD_RIGHT, gamma)
