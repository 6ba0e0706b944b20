"""Equilibrium solver vs. independent references and its own contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import affinity_equilibrium
from hypersol import equilibrium as eq
from hypersol.equilibrium import (
    EquilibriumInput,
    EquilibriumSolver,
    NoConvergence,
    NonRealizable,
    equilibrate,
    equilibrate_batch,
    equilibrate_fields,
    equilibrate_tp,
    gibbs_residual,
    scan_equilibrium,
)
from hypersol.thermo import (
    TOY_ELEMENT_FRACTIONS,
    TOY_EPS_RANGE,
    TOY_RHO_RANGE,
    NonPhysicalEnergy,
    element_mass_fractions,
    toy_atmosphere,
)

ATM = toy_atmosphere()
Z = np.array(TOY_ELEMENT_FRACTIONS)


def solve(rho, eps, **kw):
    return equilibrate(EquilibriumInput(Z, rho, eps), ATM, **kw)


# ---------------------------------------------------------------------------
# The oracle itself is validated first, against pinned anchor states, so
# that later agreement with the Newton solver means something.
# ---------------------------------------------------------------------------

def test_oracle_cold_anchor():
    """Near the energy floor the mixture must be almost fully recombined."""
    y, T = affinity_equilibrium(Z, 1.2255, TOY_EPS_RANGE[0], ATM)
    assert T == pytest.approx(216.57, abs=0.01)
    np.testing.assert_allclose(y, [0.6249096, 0.0, 0.3750904], atol=1e-6)


def test_oracle_hot_point():
    """High energy drives NO down to trace level."""
    y, T = affinity_equilibrium(Z, 0.5, 8.0e7, ATM)
    assert T == pytest.approx(59351.93, rel=1e-4)
    assert y[2] == pytest.approx(1.16e-6, rel=0.05)


def test_oracle_element_conservation():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rho = rng.uniform(*TOY_RHO_RANGE)
        eps = np.exp(rng.uniform(*np.log(TOY_EPS_RANGE)))
        y, _ = affinity_equilibrium(Z, rho, eps, ATM)
        np.testing.assert_allclose(element_mass_fractions(y, ATM), Z, atol=1e-12)


# ---------------------------------------------------------------------------
# Newton solver vs. oracle
# ---------------------------------------------------------------------------

def test_matches_affinity_oracle_grid():
    rhos = np.linspace(*TOY_RHO_RANGE, 6)
    epss = np.geomspace(*TOY_EPS_RANGE, 6)
    for rho in rhos:
        for eps in epss:
            out = solve(rho, eps)
            y_ref, t_ref = affinity_equilibrium(Z, rho, eps, ATM)
            np.testing.assert_allclose(
                out.species_fractions, y_ref, atol=1e-6,
                err_msg=f"composition at rho={rho}, eps={eps:.3e}")
            assert out.T == pytest.approx(t_ref, rel=1e-6)


def test_matches_entropy_scan():
    for rho, eps in [(0.5, 3.0e7), (1.9, 8.0e7), (3.7, 2.9e8), (0.11, 2.1e7)]:
        out = solve(rho, eps)
        ref = scan_equilibrium(Z, rho, eps, ATM)
        np.testing.assert_allclose(
            out.species_fractions, ref.species_fractions, atol=1e-6)
        assert out.T == pytest.approx(ref.T, rel=1e-6)


# ---------------------------------------------------------------------------
# Solution characterization
# ---------------------------------------------------------------------------

def test_residual_small_and_sign_flips_around_solution():
    out = solve(1.0, 6.0e7)
    assert abs(gibbs_residual(out.species_fractions, out.p, out.T, ATM)[0]) < 1e-10
    # progressing the reaction either way flips the affinity sign
    nu_m = np.array(ATM.nu[0]) * np.array([sp.molar_mass for sp in ATM.species])
    d = nu_m / np.abs(nu_m).sum()
    for s in (+1e-4, -1e-4):
        y = out.species_fractions + s * d
        from hypersol.thermo import mixture_pressure, mixture_temperature
        t = mixture_temperature(6.0e7, y, ATM, t_max=1e12)
        p = mixture_pressure(1.0, t, y, ATM)
        r = gibbs_residual(y, p, t, ATM)[0]
        assert np.sign(r) == np.sign(s)


@settings(max_examples=30)
@given(
    st.floats(*TOY_RHO_RANGE),
    st.floats(np.log(TOY_EPS_RANGE[0]) + 1e-9, np.log(TOY_EPS_RANGE[1])),
)
def test_random_points_conserve_and_equilibrate(rho, log_eps):
    out = solve(rho, float(np.exp(log_eps)))
    y = out.species_fractions
    assert (y >= 0).all() and y.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(element_mass_fractions(y, ATM), Z, atol=1e-12)
    assert abs(gibbs_residual(y, out.p, out.T, ATM)[0]) < 1e-10
    assert out.p > 0 and out.T > 0 and out.c > 0


def test_warm_start_idempotent():
    out = solve(1.3, 9.0e7)
    again = solve(1.3, 9.0e7, guess=out.species_fractions)
    np.testing.assert_allclose(
        again.species_fractions, out.species_fractions, atol=1e-12)
    assert again.iterations <= 2


def test_deterministic_bitwise():
    a = solve(2.2, 1.1e8)
    b = solve(2.2, 1.1e8)
    assert (a.species_fractions == b.species_fractions).all()
    assert a.T == b.T and a.p == b.p


def test_output_thermo_consistency():
    from hypersol.thermo import mixture_cp, mixture_cv, mixture_pressure
    out = solve(0.7, 5.0e7)
    y = out.species_fractions
    assert out.p == pytest.approx(mixture_pressure(0.7, out.T, y, ATM), rel=1e-12)
    assert out.cv == pytest.approx(mixture_cv(y, ATM), rel=1e-12)
    assert out.cp == pytest.approx(mixture_cp(y, ATM), rel=1e-12)
    assert out.c == pytest.approx(
        np.sqrt(out.cp / out.cv * out.p / 0.7), rel=1e-12)


def test_no_fraction_continuous_in_energy():
    epss = np.geomspace(*TOY_EPS_RANGE, 400)
    y_no = np.array([solve(1.0, e).species_fractions[2] for e in epss])
    jumps = np.abs(np.diff(y_no))
    assert jumps.max() < 0.02      # resolved transition, no solver branch jumps


# ---------------------------------------------------------------------------
# Errors and variants
# ---------------------------------------------------------------------------

def test_nonrealizable_inputs():
    with pytest.raises(NonRealizable):
        equilibrate(EquilibriumInput(np.array([0.9, -0.1]), 1.0, 8e7), ATM)
    with pytest.raises(NonRealizable):
        equilibrate(EquilibriumInput(np.array([0.9, 0.3]), 1.0, 8e7), ATM)
    with pytest.raises(ValueError):
        equilibrate(EquilibriumInput(Z, -1.0, 8e7), ATM)


def test_energy_below_floor_raises():
    with pytest.raises(NonPhysicalEnergy):
        solve(1.0, 1.0e5)


def test_batch_isolates_failures():
    inputs = [
        EquilibriumInput(Z, 1.0, 8.0e7),
        EquilibriumInput(Z, 1.0, 1.0e5),      # below floor
        EquilibriumInput(Z, 2.0, 5.0e7),
    ]
    outs, failures = equilibrate_batch(inputs, ATM)
    assert set(failures) == {1}
    assert isinstance(failures[1], NonPhysicalEnergy)
    assert outs[1] is None
    for i in (0, 2):
        ref = equilibrate(inputs[i], ATM)
        np.testing.assert_allclose(
            outs[i].species_fractions, ref.species_fractions, atol=1e-14)


def test_prepared_solver_matches_function():
    solver = EquilibriumSolver(ATM, Z)
    for rho, eps in [(0.3, 4e7), (1.5, 1.2e8), (3.6, 2.8e8)]:
        a = solver.solve(rho, eps)
        b = solve(rho, eps)
        np.testing.assert_allclose(
            a.species_fractions, b.species_fractions, atol=1e-12)
        assert a.T == pytest.approx(b.T, rel=1e-12)


def test_fields_interface_matches_scalar():
    rng = np.random.default_rng(5)
    n = 64
    rhos = rng.uniform(*TOY_RHO_RANGE, n)
    epss = np.exp(rng.uniform(*np.log(TOY_EPS_RANGE), n))
    zs = np.tile(Z, (n, 1))
    # warm guesses must realize the same element fractions (solver contract):
    # pick a point partway along the reaction segment through Z
    m = np.array([sp.molar_mass for sp in ATM.species])
    w = 0.15
    y_prev = np.tile([Z[0] - w * m[0] / m[2], Z[1] - w * m[1] / m[2], w], (n, 1))
    ys, Ts, ps, cps, cvs, cs, status = equilibrate_fields(
        zs, rhos, epss, ATM, guess_y=y_prev)
    assert (status == 0).all()
    for i in range(0, n, 7):
        ref = solve(rhos[i], epss[i])
        np.testing.assert_allclose(ys[i], ref.species_fractions, atol=1e-9)
        assert Ts[i] == pytest.approx(ref.T, rel=1e-9)
        assert abs(gibbs_residual(ys[i], ps[i], Ts[i], ATM)[0]) < 1e-9


def test_tp_interface_round_trip():
    out = solve(1.1, 7.0e7)
    y_tp = equilibrate_tp(Z, out.p, out.T, ATM)
    np.testing.assert_allclose(y_tp, out.species_fractions, atol=1e-8)


def test_low_iteration_budget_raises():
    hard = EquilibriumInput(Z, 3.8, 2.1e7)
    with pytest.raises((NoConvergence, NonPhysicalEnergy)):
        equilibrate(hard, ATM, max_iter=1)
