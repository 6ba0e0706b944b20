"""Uncertainty propagation over the upstream speed and error decomposition.

The upstream speed is treated as uniformly distributed within ±5% of its
nominal value; expectations of flow observables are computed by Gauss-
Legendre quadrature (weights normalized to sum to one, i.e. they absorb the
uniform density). Running the reference chemistry at every node is the
expensive part, so the driver warm starts each equilibrium run from the
surrogate-mode result at the same node (default), or alternatively continues
node to node in increasing speed order.

The error decomposition separates, for an observable profile M:
- discretization error: M on the coarse mesh vs the fine mesh,
- approximation error: surrogate-closure M̂ vs reference M, per mesh,
- parameter-induced spread: variation of M across quadrature nodes.
All differences are pointwise absolute values normalized by the maximum
absolute value of the relevant reference profile, then averaged with the
quadrature weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import euler
from .hybrid import CaseConfig, RunMode, run, run_warm_start

UPSTREAM_SPEED_NOMINAL = 4930.83       # m/s
SPEED_SPREAD = 0.05                    # +/- fraction of nominal


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights for expectations of a uniform variable on [a, b]."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple

    def __post_init__(self):
        a, b = self.interval
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if np.any(self.nodes <= a) or np.any(self.nodes >= b):
            raise ValueError("nodes must lie strictly inside the interval")

    @property
    def n(self) -> int:
        return self.nodes.size


def gauss_legendre(n: int, a: float, b: float) -> QuadratureRule:
    """Gauss-Legendre rule mapped to [a, b], weights normalized to sum 1.

    Integrates polynomials of degree <= 2n-1 exactly (to round-off) in the
    expectation sense E[f] = (1/(b-a)) * integral of f over [a, b].
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not a < b:
        raise ValueError("need a < b")
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
    weights = w / w.sum()
    return QuadratureRule(nodes, weights, (a, b))


def speed_rule(n: int, nominal: float = UPSTREAM_SPEED_NOMINAL,
               spread: float = SPEED_SPREAD) -> QuadratureRule:
    return gauss_legendre(n, (1.0 - spread) * nominal, (1.0 + spread) * nominal)


# ---------------------------------------------------------------------------
# Propagation.
# ---------------------------------------------------------------------------

@dataclass
class NodeRun:
    speed: float
    weight: float
    result: euler.SteadyResult | None
    converged: bool
    note: str = ""


@dataclass
class PropagationResult:
    mode_kind: str
    case: CaseConfig
    rule: QuadratureRule
    runs: list = field(default_factory=list)

    @property
    def converged_mask(self) -> np.ndarray:
        return np.array([r.converged for r in self.runs])

    def profiles(self, observable: str = "pressure") -> np.ndarray:
        """(n_nodes, n_angular) profile matrix over converged nodes only."""
        rows = []
        for r in self.runs:
            if not r.converged:
                continue
            rows.append(r.result.wall_pressure if observable == "pressure"
                        else r.result.standoff)
        return np.array(rows)

    def effective_weights(self) -> np.ndarray:
        mask = self.converged_mask
        w = self.rule.weights[mask]
        return w / w.sum()

    def mean_profile(self, observable: str = "pressure") -> np.ndarray:
        """Quadrature-weighted mean over converged nodes (renormalized)."""
        mask = self.converged_mask
        if not mask.any():
            raise ValueError("no converged nodes")
        if not mask.all():
            warnings.warn(
                f"{(~mask).sum()} of {mask.size} nodes did not converge; "
                "mean over the converged subset"
            )
        return self.effective_weights() @ self.profiles(observable)

    def wall_angles(self) -> np.ndarray:
        for r in self.runs:
            if r.converged:
                return r.result.wall_angles
        raise ValueError("no converged nodes")


def propagate(mode: RunMode, rule: QuadratureRule, case: CaseConfig,
              strategy: str = "nn-warm") -> PropagationResult:
    """Run the case at every quadrature node of the upstream speed.

    Strategies:
    - ``nn-warm`` (default): equilibrium-mode nodes run the surrogate to
      convergence first and finish with the warm-started reference closure;
      requires ``mode.model``. Nodes are independent.
    - ``continuation``: each node initializes from the previous node's final
      field (sequential by construction).
    - ``cold``: every node from scratch.
    Per-node failures are recorded, not raised.
    """
    if strategy not in ("nn-warm", "continuation", "cold"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "nn-warm" and mode.kind in ("eq", "nn-eq") \
            and mode.model is None:
        raise ValueError("nn-warm strategy needs a surrogate model on the mode")
    out = PropagationResult(mode.kind, case, rule)
    prev_field = None
    for speed, weight in zip(rule.nodes, rule.weights):
        node_case = replace(case, speed=float(speed))
        note = ""
        try:
            if mode.kind in ("eq", "nn-eq") and strategy == "nn-warm":
                res, report = run_warm_start(node_case, mode.model)
                if report.degraded:
                    note = "surrogate result only (reference phase failed)"
            elif strategy == "continuation":
                res = run(mode, node_case, init=prev_field,
                          raise_on_fail=False)
            else:
                res = run(mode, node_case, raise_on_fail=False)
            conv = res.converged and not note
            if not res.converged:
                note = note or "not converged"
            prev_field = res.field
        except (euler.NonConvergence, euler.PositivityViolation,
                euler.ClosureError) as exc:
            res, conv, note = None, False, str(exc)
        out.runs.append(NodeRun(float(speed), float(weight), res, conv, note))
    return out


# ---------------------------------------------------------------------------
# Error decomposition.
# ---------------------------------------------------------------------------

@dataclass
class ErrorDecomposition:
    observable: str
    node_speeds: np.ndarray
    weights: np.ndarray                  # renormalized over the common subset
    discretization: np.ndarray | None    # per node
    approximation_low: np.ndarray | None
    approximation_high: np.ndarray | None
    parameter_spread_node: np.ndarray | None
    envelope_low: np.ndarray | None      # per angle: min over nodes
    envelope_high: np.ndarray | None     # per angle: max over nodes
    angle_grid: np.ndarray | None = None

    def _mean(self, arr):
        return None if arr is None else float(self.weights @ arr)

    @property
    def mean_discretization(self):
        return self._mean(self.discretization)

    @property
    def mean_approximation_low(self):
        return self._mean(self.approximation_low)

    @property
    def mean_approximation_high(self):
        return self._mean(self.approximation_high)

    @property
    def mean_parameter_spread(self):
        return self._mean(self.parameter_spread_node)

    def to_csv(self, path) -> None:
        cols = ["speed", "weight"]
        data = [self.node_speeds, self.weights]
        for name in ("discretization", "approximation_low",
                     "approximation_high", "parameter_spread_node"):
            arr = getattr(self, name)
            if arr is not None:
                cols.append(name)
                data.append(arr)
        with open(path, "w") as f:
            f.write(",".join(cols) + "\n")
            for row in np.column_stack(data):
                f.write(",".join(f"{v:.8e}" for v in row) + "\n")


def _resample(profile: np.ndarray, angles_from: np.ndarray,
              angles_to: np.ndarray) -> np.ndarray:
    if angles_from.shape == angles_to.shape and \
            np.allclose(angles_from, angles_to):
        return profile
    return np.interp(angles_to, angles_from, profile)


def _norm_diff(a: np.ndarray, ref: np.ndarray) -> float:
    """Mean over angle of |a - ref| / max|ref| (pointwise, normalized)."""
    return float(np.mean(np.abs(a - ref)) / np.max(np.abs(ref)))


def decompose_errors(variants: dict, observable: str = "pressure",
                     ) -> ErrorDecomposition:
    """Three-way error split from up to four propagation variants.

    ``variants`` keys: ``eq_low``, ``eq_high`` (reference closure on coarse /
    fine mesh) and ``nn_low``, ``nn_high`` (surrogate closure). Missing
    variants leave the corresponding entries None. Profiles from different
    meshes are linearly resampled onto the fine mesh's angular stations.
    Nodes that failed in any required variant are excluded everywhere
    (weights renormalized), which keeps every entry comparable and makes the
    result independent of node ordering.
    """
    if not variants:
        raise ValueError("no variants given")
    ref_key = "eq_high" if "eq_high" in variants else \
        next(k for k in ("eq_low", "nn_high", "nn_low") if k in variants)
    ref = variants[ref_key]
    needed = [v for v in variants.values()]
    mask = np.logical_and.reduce([v.converged_mask for v in needed])
    if not mask.any():
        raise ValueError("no node converged in all variants")
    weights = ref.rule.weights[mask]
    weights = weights / weights.sum()
    speeds = ref.rule.nodes[mask]
    angles_to = ref.wall_angles()

    def prof(key):
        v = variants[key]
        full = np.full((v.rule.n, len(v.wall_angles())), np.nan)
        full[v.converged_mask] = v.profiles(observable)
        rows = full[mask]
        return np.array([_resample(r, v.wall_angles(), angles_to)
                         for r in rows])

    disc = approx_low = approx_high = spread = None
    env_lo = env_hi = None

    if "eq_low" in variants and "eq_high" in variants:
        lo, hi = prof("eq_low"), prof("eq_high")
        disc = np.array([_norm_diff(a, b) for a, b in zip(lo, hi)])
    if "nn_low" in variants and "eq_low" in variants:
        nn, eq = prof("nn_low"), prof("eq_low")
        approx_low = np.array([_norm_diff(a, b) for a, b in zip(nn, eq)])
    if "nn_high" in variants and "eq_high" in variants:
        nn, eq = prof("nn_high"), prof("eq_high")
        approx_high = np.array([_norm_diff(a, b) for a, b in zip(nn, eq)])

    rp = prof(ref_key)
    mean_prof = weights @ rp
    spread = np.array([_norm_diff(p, mean_prof) for p in rp])
    env_lo, env_hi = rp.min(axis=0), rp.max(axis=0)

    return ErrorDecomposition(observable, speeds, weights, disc, approx_low,
                              approx_high, spread, env_lo, env_hi, angles_to)
