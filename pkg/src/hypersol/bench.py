"""Runtime profiling: sequential equilibrium calls vs batched MLP inference.

The comparison that motivates the hybrid solver: a chemistry library is
called once per mesh point (per-call latency dominates), while a surrogate
network evaluates every point of a mesh in one vectorized forward pass. This
module measures both sides over a grid of point counts, network widths, and
atmosphere dimension pairs, and derives gain factors (equilibrium seconds /
network seconds).

Only the 3-species atmosphere has real chemistry in this package; larger
atmospheres are represented by their closure dimensions alone (random weights
and inputs — timing needs shapes, not trained values), so equilibrium timings
exist only for the real atmosphere. All timings use a monotonic clock, drop
at least two warm-up passes, and report median and standard deviation over at
least 10 repetitions. Timed sections run single-threaded unless a thread
count is requested (recorded in every row either way).
"""

from __future__ import annotations

import time
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import EquilibriumSolver
from .surrogate import AffineScaler, MlpModel, forward_batch
from .thermo import (
    ATMOSPHERE_DIMS,
    AtmosphereSpec,
    TOY_ELEMENT_FRACTIONS,
    TOY_EPS_RANGE,
    TOY_RHO_RANGE,
    toy_atmosphere,
)

N_D_GRID = (10, 100, 1_000, 10_000, 100_000)
N_D_GRID_EXTENDED = N_D_GRID + (1_000_000,)     # network side only by default
WIDTHS = (20, 40, 80, 160, 320)
MIN_REPETITIONS = 10
BENCH_HIDDEN_LAYERS = 5

# (d_in, d_out) pairs for the four atmosphere size classes.
DIM_PAIRS = tuple(sorted((ne + 2, ns + 5) for ne, ns in ATMOSPHERE_DIMS.values()))


def _thread_limit(threads: int | None):
    """Limit BLAS pools for the timed section when threadpoolctl is present."""
    if threads is None:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=threads)


@dataclass
class BenchRow:
    kind: str               # "equilibrium" | "mlp"
    n_d: int
    width: int              # 0 for the equilibrium side
    d_in: int
    d_out: int
    median_s: float
    std_s: float
    repetitions: int
    threads: int
    note: str = ""


@dataclass
class BenchResult:
    rows: list = field(default_factory=list)

    def lookup(self, kind: str, n_d: int, width: int | None = None,
               d_out: int | None = None) -> BenchRow | None:
        for r in self.rows:
            if r.kind != kind or r.n_d != n_d or r.note:
                continue
            if width is not None and r.width != width:
                continue
            if d_out is not None and r.d_out != d_out:
                continue
            return r
        return None

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("kind,n_d,width,d_in,d_out,median_s,std_s,repetitions,"
                    "threads,note\n")
            for r in self.rows:
                f.write(f"{r.kind},{r.n_d},{r.width},{r.d_in},{r.d_out},"
                        f"{r.median_s:.6e},{r.std_s:.6e},{r.repetitions},"
                        f"{r.threads},{r.note}\n")

    @classmethod
    def from_csv(cls, path) -> "BenchResult":
        out = cls()
        with open(path) as f:
            header = f.readline()
            if not header.startswith("kind,"):
                raise ValueError(f"{path}: not a timing table")
            for line in f:
                p = line.rstrip("\n").split(",")
                out.rows.append(BenchRow(p[0], int(p[1]), int(p[2]), int(p[3]),
                                         int(p[4]), float(p[5]), float(p[6]),
                                         int(p[7]), int(p[8]), p[9]))
        return out


def _time_reps(fn, repetitions: int, warmups: int = 2):
    for _ in range(warmups):
        fn()
    times = np.empty(repetitions)
    for r in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times[r] = time.perf_counter() - t0
    return float(np.median(times)), float(times.std())


def bench_equilibrium(n_d: int, atm: AtmosphereSpec | None = None,
                      repetitions: int = MIN_REPETITIONS, seed: int = 0,
                      threads: int = 1) -> BenchRow:
    """Median seconds for n_d strictly sequential equilibrium calls.

    Inputs are drawn once from the training domain before timing starts; the
    prepared solver amortizes per-composition setup exactly as a long-lived
    chemistry library object would.
    """
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"need >= {MIN_REPETITIONS} repetitions")
    atm = atm or toy_atmosphere()
    rng = np.random.default_rng(seed)
    rho = rng.uniform(*TOY_RHO_RANGE, n_d)
    eps = np.exp(rng.uniform(np.log(TOY_EPS_RANGE[0]),
                             np.log(TOY_EPS_RANGE[1]), n_d))
    solver = EquilibriumSolver(atm, np.array(TOY_ELEMENT_FRACTIONS))

    def run():
        for i in range(n_d):
            solver.solve(rho[i], eps[i])

    # Warm-up covers JIT compilation and cache effects; two short passes
    # suffice, and for large n_d a full extra pass would double the cost.
    warm_n = min(n_d, 1000)
    for _ in range(2):
        for i in range(warm_n):
            solver.solve(rho[i], eps[i])
    med, std = _time_reps(run, repetitions, warmups=0)
    return BenchRow("equilibrium", n_d, 0, atm.n_elements + 2,
                    atm.n_species + 5, med, std, repetitions, threads)


def random_mlp(width: int, d_in: int, d_out: int, seed: int = 0,
               n_hidden: int = BENCH_HIDDEN_LAYERS) -> MlpModel:
    """Random-weight network of the benchmark architecture (timing only)."""
    rng = np.random.default_rng(seed)
    sizes = [d_in] + [width] * n_hidden + [d_out]
    W, b = [], []
    for l in range(len(sizes) - 1):
        lim = np.sqrt(6.0 / (sizes[l] + sizes[l + 1]))
        W.append(rng.uniform(-lim, lim, (sizes[l + 1], sizes[l])))
        b.append(rng.uniform(-0.1, 0.1, sizes[l + 1]))
    return MlpModel(tuple(W), tuple(b), tuple(["elu"] * n_hidden),
                    AffineScaler.identity(d_in), AffineScaler.identity(d_out))


def bench_mlp(n_d: int, width: int, d_in: int, d_out: int,
              repetitions: int = MIN_REPETITIONS, seed: int = 0,
              threads: int = 1) -> BenchRow:
    """Median seconds for one batched forward pass over n_d rows."""
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"need >= {MIN_REPETITIONS} repetitions")
    model = random_mlp(width, d_in, d_out, seed)
    rng = np.random.default_rng(seed + 1)
    try:
        x = rng.uniform(0.0, 1.0, (n_d, d_in))
        with _thread_limit(threads):
            med, std = _time_reps(lambda: forward_batch(model, x), repetitions)
    except MemoryError:
        return BenchRow("mlp", n_d, width, d_in, d_out, float("nan"),
                        float("nan"), 0, threads, "allocation-failed")
    return BenchRow("mlp", n_d, width, d_in, d_out, med, std, repetitions,
                    threads)


def run_grid(n_d_values=N_D_GRID, widths=WIDTHS, dim_pairs=DIM_PAIRS,
             equilibrium_max_n_d: int = 100_000,
             repetitions: int = MIN_REPETITIONS, seed: int = 0,
             threads: int = 1, progress=None) -> BenchResult:
    """Full timing grid: one equilibrium row per n_d (real atmosphere only),
    one network row per (n_d, width, dim pair)."""
    result = BenchResult()
    atm = toy_atmosphere()
    for n_d in n_d_values:
        if n_d <= equilibrium_max_n_d:
            row = bench_equilibrium(n_d, atm, repetitions, seed, threads)
            result.rows.append(row)
            if progress:
                progress(row)
    for (d_in, d_out) in dim_pairs:
        for width in widths:
            for n_d in n_d_values:
                row = bench_mlp(n_d, width, d_in, d_out, repetitions, seed,
                                threads)
                result.rows.append(row)
                if progress:
                    progress(row)
    return result


@dataclass
class GainRow:
    n_d: int
    width: int
    gain: float


@dataclass
class GainTable:
    rows: list

    def gain(self, n_d: int, width: int) -> float | None:
        for r in self.rows:
            if r.n_d == n_d and r.width == width:
                return r.gain
        return None

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("n_d,width,gain\n")
            for r in self.rows:
                f.write(f"{r.n_d},{r.width},{r.gain:.6e}\n")

    def crossover(self, width: int) -> int | None:
        """Smallest measured n_d with gain > 1 for the given width."""
        cands = sorted(r.n_d for r in self.rows
                       if r.width == width and r.gain > 1.0)
        return cands[0] if cands else None


def gain_report(result: BenchResult,
                atm: AtmosphereSpec | None = None) -> GainTable:
    """Per-(n_d, width) ratio of equilibrium time to network time.

    Only cells where both sides were measured appear; nothing is
    interpolated. The network side uses the real atmosphere's dimensions.
    """
    atm = atm or toy_atmosphere()
    d_out = atm.n_species + 5
    rows = []
    for eq in result.rows:
        if eq.kind != "equilibrium" or eq.note:
            continue
        for width in sorted({r.width for r in result.rows if r.kind == "mlp"}):
            ml = result.lookup("mlp", eq.n_d, width, d_out)
            if ml is None:
                continue
            rows.append(GainRow(eq.n_d, width, eq.median_s / ml.median_s))
    return GainTable(rows)
