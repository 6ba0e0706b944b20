"""Mixture thermodynamics for multi-species reacting gas closures.

State convention: compositions are species MASS fractions (the mole-fraction
form of the temperature/pressure relations is algebraically identical after
dividing by the mean molar mass, so only one convention is stored).
Per-species caloric model: constant cv, enthalpy h_i(T) = h0_i + cp_i * T with
cp_i = cv_i + R/m_i, internal energy e_i(T) = h0_i + cv_i * T.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

# Universal gas constant, J/(mol K).
R_UNIVERSAL = 8.314462618
# Reference state for entropy / Gibbs evaluations.
T_REF = 298.15        # K
P_REF = 101325.0      # Pa
# Default ceiling for physically meaningful temperatures.
T_MAX_DEFAULT = 5.0e4  # K


class NonPhysicalEnergy(ValueError):
    """Internal energy implies a non-positive or above-ceiling temperature."""


class UnknownSpecies(KeyError):
    """Species name not present in the atmosphere definition."""


@dataclass(frozen=True)
class SpeciesData:
    """Constant-property model of one species.

    molar_mass      kg/mol
    h0              J/kg   formation enthalpy (includes the atmosphere's
                           energy-origin convention)
    cv              J/(kg K)
    s0              J/(kg K) standard entropy at (T_REF, P_REF)
    element_counts  atoms of each atmosphere element in one molecule
    """

    name: str
    molar_mass: float
    h0: float
    cv: float
    s0: float
    element_counts: tuple[int, ...]

    @property
    def cp(self) -> float:
        return self.cv + R_UNIVERSAL / self.molar_mass


@dataclass(frozen=True)
class AtmosphereSpec:
    """Element/species/reaction definition of one gas model.

    `nu[r][i]` is the stoichiometric coefficient of species i in reaction r,
    positive for species consumed in the forward direction (so each row sums
    to zero against the element-count matrix).
    """

    name: str
    element_names: tuple[str, ...]
    element_masses: tuple[float, ...]   # kg/mol
    species: tuple[SpeciesData, ...]
    nu: tuple[tuple[int, ...], ...]
    t_max: float = T_MAX_DEFAULT

    def __post_init__(self) -> None:
        ne, ns = len(self.element_names), len(self.species)
        if len(self.element_masses) != ne:
            raise ValueError("element name/mass length mismatch")
        for sp in self.species:
            if len(sp.element_counts) != ne:
                raise ValueError(f"species {sp.name}: expected {ne} element counts")
        for r, row in enumerate(self.nu):
            if len(row) != ns:
                raise ValueError(f"reaction {r}: expected {ns} coefficients")
            for k in range(ne):
                bal = sum(row[i] * self.species[i].element_counts[k] for i in range(ns))
                if bal != 0:
                    raise ValueError(
                        f"reaction {r} does not conserve element {self.element_names[k]}"
                    )

    @property
    def n_elements(self) -> int:
        return len(self.element_names)

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.nu)

    def species_index(self, name: str) -> int:
        for i, sp in enumerate(self.species):
            if sp.name == name:
                return i
        raise UnknownSpecies(name)

    # Packed constant arrays for the numeric kernels.
    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "m": np.array([sp.molar_mass for sp in self.species]),
            "h0": np.array([sp.h0 for sp in self.species]),
            "cv": np.array([sp.cv for sp in self.species]),
            "cp": np.array([sp.cp for sp in self.species]),
            "s0": np.array([sp.s0 for sp in self.species]),
            "em": np.array(self.element_masses),
            "a": np.array([sp.element_counts for sp in self.species], dtype=np.int64),
            "nu": np.array(self.nu, dtype=np.float64).reshape(self.n_reactions, self.n_species),
        }


def check_composition(y: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Validate a mass-fraction vector: entries in [0, 1], sum 1 within tol."""
    y = np.asarray(y, dtype=float)
    if np.any(y < -tol) or np.any(y > 1.0 + tol):
        raise ValueError(f"mass fractions outside [0, 1]: {y}")
    s = float(y.sum())
    if abs(s - 1.0) > tol:
        raise ValueError(f"mass fractions sum to {s}, expected 1")
    return y


def mass_to_mole(y: np.ndarray, atm: AtmosphereSpec) -> np.ndarray:
    """Convert mass fractions to mole fractions."""
    y = np.asarray(y, dtype=float)
    m = np.array([sp.molar_mass for sp in atm.species])
    n = y / m
    return n / n.sum()


def mole_to_mass(x: np.ndarray, atm: AtmosphereSpec) -> np.ndarray:
    """Convert mole fractions to mass fractions."""
    x = np.asarray(x, dtype=float)
    m = np.array([sp.molar_mass for sp in atm.species])
    w = x * m
    return w / w.sum()


def mean_molar_mass(y: np.ndarray, atm: AtmosphereSpec) -> float:
    """Mole-fraction-weighted mean molar mass, from mass fractions."""
    y = np.asarray(y, dtype=float)
    m = np.array([sp.molar_mass for sp in atm.species])
    return 1.0 / float((y / m).sum())


def mixture_cv(y: np.ndarray, atm: AtmosphereSpec) -> float:
    return float(np.dot(y, [sp.cv for sp in atm.species]))


def mixture_cp(y: np.ndarray, atm: AtmosphereSpec) -> float:
    return float(np.dot(y, [sp.cp for sp in atm.species]))


def formation_floor(y: np.ndarray, atm: AtmosphereSpec) -> float:
    """Mixture formation energy; the T = 0 internal-energy floor."""
    return float(np.dot(y, [sp.h0 for sp in atm.species]))


def mixture_temperature(
    eps: float, y: np.ndarray, atm: AtmosphereSpec, t_max: float | None = None
) -> float:
    """Temperature from specific internal energy at fixed composition.

    eps = sum_i y_i (h0_i + cv_i T) solved for T in closed form.
    Raises NonPhysicalEnergy outside (0, t_max].
    """
    t_cap = atm.t_max if t_max is None else t_max
    t = (eps - formation_floor(y, atm)) / mixture_cv(y, atm)
    if not t > 0.0:
        raise NonPhysicalEnergy(
            f"energy {eps:.6e} J/kg implies T = {t:.6e} K <= 0 "
            f"(formation floor {formation_floor(y, atm):.6e})"
        )
    if t > t_cap:
        raise NonPhysicalEnergy(f"energy {eps:.6e} J/kg implies T = {t:.6e} K > {t_cap:.3e}")
    return t


def mixture_energy(t: float, y: np.ndarray, atm: AtmosphereSpec) -> float:
    """Specific internal energy at temperature t; inverse of mixture_temperature."""
    return formation_floor(y, atm) + mixture_cv(y, atm) * t


def mixture_pressure(rho: float, t: float, y: np.ndarray, atm: AtmosphereSpec) -> float:
    """Ideal-mixture pressure p = rho R T / m-bar."""
    return rho * R_UNIVERSAL * t / mean_molar_mass(y, atm)


def perfect_gas_pressure(rho: float, eps: float, gamma: float = 1.4) -> float:
    """Calorically perfect gas: p = (gamma - 1) rho eps."""
    return (gamma - 1.0) * rho * eps


def gibbs_species(i: int, p_i: float, t: float, atm: AtmosphereSpec) -> float:
    """Specific Gibbs energy of species i (J/kg) at partial pressure p_i.

    G_i = h_i(T) - T s_i(T, p_i) with
    h_i = h0_i + cp_i T,
    s_i = s0_i + cp_i ln(T/T_REF) - (R/m_i) ln(p_i/P_REF).
    """
    sp = atm.species[i]
    r_i = R_UNIVERSAL / sp.molar_mass
    h = sp.h0 + sp.cp * t
    s = sp.s0 + sp.cp * np.log(t / T_REF) - r_i * np.log(p_i / P_REF)
    return h - t * s


def species_entropy(i: int, p_i: float, t: float, atm: AtmosphereSpec) -> float:
    """Specific entropy of species i (J/(kg K)) at partial pressure p_i."""
    sp = atm.species[i]
    return sp.s0 + sp.cp * np.log(t / T_REF) - (R_UNIVERSAL / sp.molar_mass) * np.log(p_i / P_REF)


def element_densities(rho_species: np.ndarray, atm: AtmosphereSpec) -> np.ndarray:
    """Partial densities of elements from partial densities of species.

    rho_k = sum_i a_i^k (m_k^e / m_i) rho_i. Because every molar mass is the
    exact sum of its constituent element masses, sum_k rho_k == sum_i rho_i.
    """
    rho_species = np.asarray(rho_species, dtype=float)
    arr = atm.arrays()
    # (ns, ne) mass share of element k in species i
    share = arr["a"] * arr["em"][None, :] / arr["m"][:, None]
    return rho_species @ share


def element_mass_fractions(y: np.ndarray, atm: AtmosphereSpec) -> np.ndarray:
    """Element mass fractions carried by a species composition."""
    return element_densities(np.asarray(y, dtype=float), atm)


# ---------------------------------------------------------------------------
# Toy atmosphere: N / O / NO with the single exchange reaction N + O <-> NO.
# ---------------------------------------------------------------------------

# CODATA/NIST molar masses, kg/mol. m_NO is the exact sum so that the
# element partition of mass is exact.
_M_N = 0.0140067
_M_O = 0.0159994
_M_NO = _M_N + _M_O

# Standard-state formation enthalpies at 298.15 K, J/mol.
_HF_N = 472680.0
_HF_O = 249180.0
_HF_NO = 90250.0

# Standard molar entropies at 298.15 K, J/(mol K).
_S0_N = 153.301
_S0_O = 161.059
_S0_NO = 210.761

# Reference upstream condition used to anchor the energy origin (see below)
# and the training-domain box for closure datasets.
TOY_ELEMENT_FRACTIONS = (0.8, 0.2)          # mass fractions of (N, O)
TOY_RHO_RANGE = (0.1, 3.8)                  # kg/m^3, sampled uniformly
TOY_EPS_RANGE = (2.07503e7, 3.0e8)          # J/kg, sampled log-uniformly
_T_UPSTREAM_ANCHOR = 216.57                 # K


def _toy_energy_shift() -> float:
    """Energy-origin offset subtracted from every species h0.

    One constant per unit mass of any element (hence of any species) leaves
    all reaction enthalpies unchanged; it only moves the zero of internal
    energy. The value is fixed so that the cold anchor state (216.57 K at the
    low-temperature equilibrium composition of the N:0.8/O:0.2 element mix,
    i.e. maximum NO with oxygen exhausted) lies exactly at the bottom of the
    closure training domain. Without the shift the T = 0 floor of that
    composition (~2.22e7 J/kg) would sit above the domain floor.
    """
    n_o = TOY_ELEMENT_FRACTIONS[1] / _M_O          # mol of O per kg mixture
    y_no = n_o * _M_NO
    y_n = TOY_ELEMENT_FRACTIONS[0] - n_o * _M_N
    cv_n = 1.5 * R_UNIVERSAL / _M_N
    cv_no = 2.5 * R_UNIVERSAL / _M_NO
    eps_unshifted = (
        y_n * (_HF_N / _M_N + cv_n * _T_UPSTREAM_ANCHOR)
        + y_no * (_HF_NO / _M_NO + cv_no * _T_UPSTREAM_ANCHOR)
    )
    return eps_unshifted - TOY_EPS_RANGE[0]


def toy_atmosphere() -> AtmosphereSpec:
    """Three-species N/O/NO model with the exchange reaction N + O <-> NO.

    Monatomic species carry cv = 3/2 R/m, the diatomic one 5/2 R/m (no
    vibrational excitation; the constant-cv model is part of the contract).
    t_max is raised to 5e5 K: with constant cv the training-domain energy
    ceiling (3e8 J/kg) corresponds to ~3.1e5 K.
    """
    shift = _toy_energy_shift()
    species = (
        SpeciesData("N", _M_N, _HF_N / _M_N - shift, 1.5 * R_UNIVERSAL / _M_N,
                    _S0_N / _M_N, (1, 0)),
        SpeciesData("O", _M_O, _HF_O / _M_O - shift, 1.5 * R_UNIVERSAL / _M_O,
                    _S0_O / _M_O, (0, 1)),
        SpeciesData("NO", _M_NO, _HF_NO / _M_NO - shift, 2.5 * R_UNIVERSAL / _M_NO,
                    _S0_NO / _M_NO, (1, 1)),
    )
    return AtmosphereSpec(
        name="toy",
        element_names=("N", "O"),
        element_masses=(_M_N, _M_O),
        species=species,
        nu=((1, 1, -1),),
        t_max=5.0e5,
    )


# Input dimensions of the closure map for the published larger atmospheres
# (used by the benchmark module): name -> (n_elements, n_species).
ATMOSPHERE_DIMS = {
    "toy": (2, 3),
    "earth": (2, 18),
    "cloudy_earth": (3, 38),
    "cloudy_jupiter": (6, 64),
}


def closure_dims(name: str) -> tuple[int, int]:
    """(d_in, d_out) of the closure map for a named atmosphere size class."""
    ne, ns = ATMOSPHERE_DIMS[name]
    return ne + 2, ns + 5


# ---------------------------------------------------------------------------
# Config-file loader.
# ---------------------------------------------------------------------------

def load_atmosphere(path: str) -> AtmosphereSpec:
    """Read an atmosphere definition from an INI-style file.

    Schema:
        [atmosphere]        name = ..., t_max = ... (optional)
        [elements]          <name> = <molar mass kg/mol>
        [species.<NAME>]    molar_mass, h0, cv, s0, elements = N:1 O:1 ...
        [reactions]         <label> = N:1 O:1 NO:-1   (coefficients, consumed > 0)
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise FileNotFoundError(path)
    if "elements" not in cp:
        raise ValueError(f"{path}: missing [elements] section")
    element_names = tuple(cp["elements"].keys())
    element_names = tuple(n.upper() if len(n) <= 2 else n for n in element_names)
    element_masses = tuple(float(v) for v in cp["elements"].values())
    idx = {n: k for k, n in enumerate(element_names)}

    species = []
    for section in cp.sections():
        if not section.startswith("species."):
            continue
        name = section.split(".", 1)[1]
        blk = cp[section]
        try:
            counts = [0] * len(element_names)
            for tok in blk["elements"].split():
                el, cnt = tok.split(":")
                counts[idx[el.upper() if len(el) <= 2 else el]] = int(cnt)
            species.append(
                SpeciesData(
                    name,
                    float(blk["molar_mass"]),
                    float(blk["h0"]),
                    float(blk["cv"]),
                    float(blk["s0"]),
                    tuple(counts),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}: bad species block [{section}]: {exc}") from exc

    sp_idx = {sp.name: i for i, sp in enumerate(species)}
    reactions = []
    if "reactions" in cp:
        for label, row in cp["reactions"].items():
            coeffs = [0] * len(species)
            try:
                for tok in row.split():
                    sp, coef = tok.rsplit(":", 1)
                    coeffs[sp_idx[sp]] = int(coef)
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}: bad reaction '{label}': {exc}") from exc
            reactions.append(tuple(coeffs))

    name = cp.get("atmosphere", "name", fallback="custom")
    t_max = cp.getfloat("atmosphere", "t_max", fallback=T_MAX_DEFAULT)
    return AtmosphereSpec(
        name=name,
        element_names=element_names,
        element_masses=element_masses,
        species=tuple(species),
        nu=tuple(reactions),
        t_max=t_max,
    )


def get_atmosphere(preset_or_path: str) -> AtmosphereSpec:
    """Resolve 'toy' or a config-file path to an AtmosphereSpec."""
    if preset_or_path == "toy":
        return toy_atmosphere()
    return load_atmosphere(preset_or_path)
