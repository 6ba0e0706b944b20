"""Command-line entry point: run orchestration and artifact output.

Subcommands
-----------
equilibrate  one equilibrium solve at (rho, eps); prints the state
gen-data     sample the closure map and write train/test arrays
train        train the surrogate network on a generated dataset
search       random hyperparameter search (full or restricted)
hsic         sensitivity indices from a trial log
run          one steady flow solve (pg / eq / nn / nn-eq)
compare      error/timing table of saved runs against a reference
bench        timing grid and gain factors
uq           quadrature propagation of upstream-speed uncertainty
repro        canned desk-scale pipelines producing the standard figures

Every artifact-writing command drops a ``manifest.json`` in its output
directory.  On failure, files written during the invocation are removed
(and the directory too, if the command created it), so an output
directory is either complete-with-manifest or untouched.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import shutil
import sys
import time

import numpy as np

from . import __version__, bench as benchmod, euler, hpo, hybrid, surrogate
from . import config as cfgmod, uq as uqmod
from .config import ConfigError
from .equilibrium import EquilibriumInput, NoConvergence, NonRealizable, equilibrate
from .svgplot import LinePlot, StackedBars
from .thermo import NonPhysicalEnergy, toy_atmosphere


# ---------------------------------------------------------------------------
# Output-directory bookkeeping.
# ---------------------------------------------------------------------------

class Workspace:
    """Tracks files written to an output directory for cleanup on failure."""

    def __init__(self, out_dir: str):
        self.dir = os.path.abspath(out_dir)
        self.created_dir = not os.path.isdir(self.dir)
        os.makedirs(self.dir, exist_ok=True)
        self.files: list[str] = []

    def path(self, *parts: str) -> str:
        p = os.path.join(self.dir, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        self.files.append(p)
        return p

    def outputs(self) -> list[str]:
        return sorted(
            os.path.relpath(p, self.dir) for p in self.files if os.path.exists(p)
        )

    def discard(self) -> None:
        """Remove everything this invocation wrote (partial-output cleanup)."""
        if self.created_dir:
            shutil.rmtree(self.dir, ignore_errors=True)
            return
        for p in self.files:
            if os.path.isfile(p):
                os.remove(p)
        for p in self.files:
            d = os.path.dirname(p)
            if d != self.dir and os.path.isdir(d) and not os.listdir(d):
                os.rmdir(d)


def _finish(ws: Workspace, command: str, cfg: dict, seeds: dict[str, int],
            threads: int = 1) -> None:
    cfgmod.RunManifest(
        command=command,
        config_hash=cfgmod.config_hash(cfg),
        seeds=seeds,
        outputs=ws.outputs(),
        threads=threads,
    ).write(ws.dir)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Shared helpers.
# ---------------------------------------------------------------------------

def _load_cfg(args) -> dict:
    if getattr(args, "config", None):
        return cfgmod.load_config(args.config)
    return cfgmod.default_config()


def _parse_mesh(spec: str, cfg: dict) -> tuple[int, int]:
    """'high' = configured mesh, 'low' = half of it, 'NRxNA' = explicit."""
    n_r = int(cfg["mesh"]["n_radial"])
    n_a = int(cfg["mesh"]["n_angular"])
    if spec == "high":
        return n_r, n_a
    if spec == "low":
        return max(n_r // 2, 4), max(n_a // 2, 8)
    try:
        a, b = spec.lower().split("x")
        return int(a), int(b)
    except ValueError as exc:
        raise ConfigError(
            f"mesh spec {spec!r}: expected 'high', 'low', or 'NRxNA'") from exc


def _load_dataset_dir(data_dir: str):
    def one(name):
        arrs = np.load(os.path.join(data_dir, f"{name}.npz"))
        meta_path = os.path.join(data_dir, "meta.json")
        meta = {}
        if os.path.exists(meta_path):
            with open(meta_path, encoding="utf-8") as fh:
                meta = json.load(fh)
        return surrogate.Dataset(arrs["inputs"], arrs["targets"], meta)

    return one("train"), one("test")


def _save_run(ws: Workspace, label: str, res, extra: dict | None = None) -> None:
    """Persist one steady solve: wall profile CSV, field arrays, summary."""
    with open(ws.path(label, "wall_profile.csv"), "w") as fh:
        fh.write("angle_rad,wall_pressure_pa,standoff_m\n")
        for a, p, s in zip(res.wall_angles, res.wall_pressure, res.standoff):
            fh.write(f"{a:.9e},{p:.9e},{s:.9e}\n")
    fld = res.field
    vel = fld.vel()
    np.savez_compressed(
        ws.path(label, "field.npz"),
        rho=fld.rho(), u=vel[..., 0], v=vel[..., 1], eps=fld.eps(),
        p=fld.p, T=fld.T, y=fld.y,
        centers=res.mesh.centers, wall_angles=res.wall_angles,
        wall_pressure=res.wall_pressure, standoff=res.standoff,
        residual_history=res.residual_history,
    )
    j0 = int(np.argmin(np.abs(res.wall_angles)))
    summary = {
        "label": label,
        "iterations": int(res.iterations),
        "seconds": float(res.seconds),
        "converged": bool(res.converged),
        "final_residual": float(res.residual_history[-1]),
        "stagnation_wall_pressure_pa": float(res.wall_pressure[j0]),
        "stagnation_standoff_m": float(res.standoff[j0]),
        "mesh": [int(res.mesh.ni), int(res.mesh.nj)],
    }
    if extra:
        summary.update(extra)
    _write_json(ws.path(label, "summary.json"), summary)


def _load_run(run_dir: str):
    """Rebuild the profile view of a saved run for comparison."""
    import types

    with open(os.path.join(run_dir, "summary.json"), encoding="utf-8") as fh:
        summary = json.load(fh)
    prof = np.genfromtxt(os.path.join(run_dir, "wall_profile.csv"),
                         delimiter=",", names=True)
    return summary["label"], types.SimpleNamespace(
        wall_angles=np.atleast_1d(prof["angle_rad"]),
        wall_pressure=np.atleast_1d(prof["wall_pressure_pa"]),
        standoff=np.atleast_1d(prof["standoff_m"]),
        seconds=float(summary["seconds"]),
        iterations=int(summary["iterations"]),
        converged=bool(summary["converged"]),
    )


def _make_mode(kind: str, model_path: str | None, gamma: float | None = None):
    model = surrogate.load_model(model_path) if model_path else None
    if kind in ("nn", "nn-eq") and model is None:
        raise ConfigError(f"--mode {kind} requires --model")
    return hybrid.RunMode(kind=kind, gamma=gamma, model=model)


def _steady_run(mode, case):
    """Dispatch to the warm-started pipeline for nn-eq, plain run otherwise."""
    if mode.kind == "nn-eq":
        res, report = hybrid.run_warm_start(case, mode.model)
        return res, report
    return hybrid.run(mode, case), None


# ---------------------------------------------------------------------------
# Subcommand implementations.
# ---------------------------------------------------------------------------

def _cmd_equilibrate(args) -> int:
    cfg = _load_cfg(args)
    atm = toy_atmosphere()
    if args.elements:
        z = np.array([float(t) for t in args.elements.split()])
    else:
        z = np.array(cfgmod.element_fractions_from(cfg))
    if args.csv:
        return _equilibrate_csv(args, atm, z)
    if args.rho is None or args.eps is None:
        raise ConfigError("equilibrate needs --rho and --eps (or --csv)")
    out = equilibrate(EquilibriumInput(z, args.rho, args.eps), atm)
    names = [sp.name for sp in atm.species]
    payload = {
        "element_fractions": z,
        "rho": args.rho,
        "eps": args.eps,
        "species": dict(zip(names, out.species_fractions)),
        "p": out.p, "T": out.T, "c": out.c, "cp": out.cp, "cv": out.cv,
        "iterations": out.iterations, "residual": out.residual,
    }
    if args.json:
        print(json.dumps(payload, indent=2, default=_json_default))
        return 0
    print(f"rho = {args.rho:g} kg/m^3   eps = {args.eps:g} J/kg")
    for name, frac in zip(names, out.species_fractions):
        print(f"  y[{name}] = {frac:.10f}")
    print(f"  p = {out.p:.6e} Pa   T = {out.T:.4f} K   c = {out.c:.3f} m/s")
    print(f"  cp = {out.cp:.3f}   cv = {out.cv:.3f} J/(kg K)")
    print(f"  converged in {out.iterations} iterations, "
          f"residual {out.residual:.2e}")
    return 0


def _equilibrate_csv(args, atm, z) -> int:
    """Batch mode: CSV of (rho, epsilon) rows in, full output vectors out."""
    table = np.genfromtxt(args.csv, delimiter=",", names=True)
    rho = np.atleast_1d(table["rho"]).astype(float)
    eps = np.atleast_1d(table["epsilon"]).astype(float)
    n_s = atm.n_species
    header = ",".join([f"x_{i + 1}" for i in range(n_s)]
                      + ["p", "T", "cp", "cv", "c"])
    lines = [header]
    n_failed = 0
    for r, e in zip(rho, eps):
        try:
            out = equilibrate(EquilibriumInput(z, float(r), float(e)), atm)
            vals = list(out.species_fractions) + [out.p, out.T, out.cp,
                                                 out.cv, out.c]
            lines.append(",".join(f"{v:.12e}" for v in vals))
        except (NoConvergence, NonRealizable, NonPhysicalEnergy) as exc:
            n_failed += 1
            lines.append(",".join(["nan"] * (n_s + 5)) + f"  # {exc}")
    text = "\n".join(lines) + "\n"
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"{len(rho) - n_failed}/{len(rho)} rows solved -> "
              f"{args.out_csv}")
    else:
        print(text, end="")
    return 0 if n_failed == 0 else 1


def _cmd_gen_data(args) -> int:
    cfg = _load_cfg(args)
    n_train = args.n_train or int(cfg["surrogate"]["n_train"])
    n_test = args.n_test or int(cfg["surrogate"]["n_test"])
    seed = cfgmod.resolve_seed(
        args.seed if args.seed is not None else int(cfg["surrogate"]["seed"]))
    ranges = dict(surrogate.DEFAULT_RANGES)
    ranges["elements"] = cfgmod.element_fractions_from(cfg)
    ws = Workspace(args.out)
    try:
        train_set, test_set = surrogate.generate_dataset(
            n_train, n_test, ranges=ranges, seed=seed)
        np.savez_compressed(ws.path("train.npz"),
                            inputs=train_set.inputs, targets=train_set.targets)
        np.savez_compressed(ws.path("test.npz"),
                            inputs=test_set.inputs, targets=test_set.targets)
        _write_json(ws.path("meta.json"), train_set.meta)
        _finish(ws, "gen-data", cfg, {"dataset": seed})
    except Exception:
        ws.discard()
        raise
    print(f"wrote {len(train_set)} train / {len(test_set)} test samples "
          f"to {ws.dir}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    if args.epochs:
        cfg["surrogate"]["epochs"] = str(args.epochs)
    if args.seed is not None:
        cfg["surrogate"]["seed"] = str(args.seed)
    tc = cfgmod.train_config_from(cfg)
    train_set, test_set = _load_dataset_dir(args.data)
    ws = Workspace(args.out)
    try:
        model, report = surrogate.train(train_set, test_set, tc)
        surrogate.save_model(model, ws.path("model.mlpm"))
        surrogate.export_json(model, ws.path("model.json"))
        with open(ws.path("history.csv"), "w") as fh:
            fh.write("restart,epoch,train_loss,test_error\n")
            for ri, (losses, errs) in enumerate(
                    zip(report.train_loss, report.test_error)):
                for ep, (lo, er) in enumerate(zip(losses, errs)):
                    fh.write(f"{ri},{ep},{lo:.9e},{er:.9e}\n")
        _write_json(ws.path("report.json"), {
            "final_test_error": report.final_test_error,
            "best_seed": report.best_seed,
            "best_epoch": report.best_epoch,
            "n_params": report.n_params,
            "seconds": report.seconds,
            "config": {k: getattr(tc, k) for k in (
                "n_layers", "n_units", "activation", "optimizer",
                "learning_rate", "lr_decay", "batch_size", "epochs", "loss",
                "n_seeds", "seed")},
        })
        _finish(ws, "train", cfg, {"train": tc.seed})
    except Exception:
        ws.discard()
        raise
    print(f"normalized L2 test error {report.final_test_error:.3e} "
          f"({report.n_params} parameters, {report.seconds:.1f} s); "
          f"model saved to {ws.dir}/model.mlpm")
    return 0


def _search_summary(trials) -> dict:
    finite = [t.error for t in trials if np.isfinite(t.error)]
    best = min(trials, key=lambda t: t.error)
    worst = max(finite) if finite else float("nan")
    decades = float(np.log10(worst / best.error)) if finite else float("nan")
    return {
        "n_trials": len(trials),
        "n_diverged": sum(t.diverged for t in trials),
        "best_error": best.error,
        "worst_finite_error": worst,
        "decades_spread": decades,
        "best_config": dataclasses.asdict(best.config),
        "best_trial_index": best.index,
    }


def _histogram_svg(trials, path: str, title: str) -> None:
    edges, counts = hpo.error_histogram(trials)
    centers = np.sqrt(edges[:-1] * edges[1:])
    plot = LinePlot(title=title, xlabel="normalized L2 test error",
                    ylabel="trials", xlog=True)
    plot.add(centers, counts, label="count")
    plot.save(path)


def _cmd_search(args) -> int:
    cfg = _load_cfg(args)
    budget = cfgmod.budget_from_config(cfg)
    n_trials = args.trials or int(cfg["search"]["n_trials"])
    seed = cfgmod.resolve_seed(
        args.seed if args.seed is not None else int(cfg["search"]["seed"]))
    train_set, test_set = _load_dataset_dir(args.data)
    ws = Workspace(args.out)
    try:
        log_path = ws.path("trials.jsonl")
        if args.restricted_from:
            prior = hpo.load_trials(args.restricted_from)
            top_k = args.top_k if args.top_k is not None \
                else int(cfg["search"]["top_k"])
            trials = hpo.restricted_search(
                prior, top_k, train_set, test_set, n_trials, budget, seed,
                log_path)
        else:
            trials = hpo.random_search(
                train_set, test_set, n_trials, budget, seed, log_path)
        edges, counts = hpo.error_histogram(trials)
        with open(ws.path("histogram.csv"), "w") as fh:
            fh.write("edge_low,edge_high,count\n")
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                fh.write(f"{lo:.6e},{hi:.6e},{c}\n")
        _histogram_svg(trials, ws.path("histogram.svg"),
                       "Search error distribution")
        summary = _search_summary(trials)
        _write_json(ws.path("summary.json"), summary)
        _finish(ws, "search", cfg, {"search": seed})
    except Exception:
        ws.discard()
        raise
    print(f"{summary['n_trials']} trials ({summary['n_diverged']} diverged): "
          f"best {summary['best_error']:.3e}, "
          f"spread {summary['decades_spread']:.1f} decades")
    return 0


def _hsic_svg(report, path: str) -> None:
    order = np.argsort(-report.indices)
    bars = StackedBars([report.names[i] for i in order],
                       title="Hyperparameter sensitivity (goal-oriented HSIC)",
                       ylabel="normalized index", label_rotate=-60.0)
    bars.add_layer("index", report.indices[order])
    bars.save(path)


def _cmd_hsic(args) -> int:
    cfg = _load_cfg(args)
    trials = hpo.load_trials(args.trials)
    seed = cfgmod.resolve_seed(args.seed if args.seed is not None else 0)
    report = hpo.hsic_indices(
        trials, percentile=args.percentile, n_bootstrap=args.bootstrap,
        seed=seed, n_permutations=args.permutations)
    ws = Workspace(args.out)
    try:
        report.to_csv(ws.path("hsic.csv"))
        _hsic_svg(report, ws.path("hsic.svg"))
        _finish(ws, "hsic", cfg, {"hsic": seed})
    except Exception:
        ws.discard()
        raise
    ranked = report.ranked_names()
    print("top sensitivities: " + ", ".join(
        f"{n} ({report.indices[report.names.index(n)]:.3f})"
        for n in ranked[:5]))
    return 0


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    n_r, n_a = _parse_mesh(args.mesh, cfg)
    case = cfgmod.case_from_config(cfg, n_radial=n_r, n_angular=n_a)
    mode = _make_mode(args.mode, args.model)
    res, warm = _steady_run(mode, case)
    line = (f"{args.mode}: {'converged' if res.converged else 'NOT converged'} "
            f"in {res.iterations} iterations ({res.seconds:.2f} s), "
            f"stagnation wall p = "
            f"{res.wall_pressure[np.argmin(np.abs(res.wall_angles))]:.4e} Pa")
    if warm is not None:
        line += (f" [surrogate phase {warm.nn_iterations} it, "
                 f"reference phase {warm.eq_iterations} it]")
    if not args.out:
        print(line)
        return 0
    ws = Workspace(args.out)
    try:
        extra = {"mode": args.mode}
        if warm is not None:
            extra["warm_start"] = {
                "nn_iterations": warm.nn_iterations,
                "eq_iterations": warm.eq_iterations,
                "nn_seconds": warm.nn_seconds,
                "eq_seconds": warm.eq_seconds,
                "degraded": warm.degraded,
            }
        _save_run(ws, args.mode, res, extra)
        _finish(ws, "run", cfg, {})
    except Exception:
        ws.discard()
        raise
    print(line)
    print(f"artifacts in {ws.dir}/{args.mode}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _load_cfg(args)
    ref_label, ref_run = _load_run(args.ref)
    runs = {ref_label: ref_run}
    for d in args.runs:
        label, r = _load_run(d)
        runs[label] = r
    table = hybrid.compare(runs, ref_label)
    ws = Workspace(args.out)
    try:
        table.to_csv(ws.path("comparison.csv"))
        text = table.to_text()
        with open(ws.path("comparison.txt"), "w") as fh:
            fh.write(text)
        _finish(ws, "compare", cfg, {})
    except Exception:
        ws.discard()
        raise
    print(text, end="")
    return 0


def _bench_plots(ws: Workspace, result, gains, widths) -> None:
    atm = toy_atmosphere()
    d_out = atm.n_species + 5
    eq_rows = sorted((r for r in result.rows
                      if r.kind == "equilibrium" and not r.note),
                     key=lambda r: r.n_d)
    times = LinePlot(title="Closure evaluation time vs batch size",
                     xlabel="cells", ylabel="seconds", xlog=True, ylog=True)
    if eq_rows:
        times.add([r.n_d for r in eq_rows], [r.median_s for r in eq_rows],
                  label="equilibrium (sequential)")
    for w in widths:
        rows = sorted((r for r in result.rows
                       if r.kind == "mlp" and r.width == w
                       and r.d_out == d_out and not r.note),
                      key=lambda r: r.n_d)
        if rows:
            times.add([r.n_d for r in rows], [r.median_s for r in rows],
                      label=f"network w={w}", dashed=True)
    times.save(ws.path("times.svg"))

    gain_plot = LinePlot(title="Gain factor (equilibrium / network)",
                         xlabel="cells", ylabel="gain", xlog=True, ylog=True)
    for w in widths:
        rows = sorted((r for r in gains.rows if r.width == w),
                      key=lambda r: r.n_d)
        if rows:
            gain_plot.add([r.n_d for r in rows], [r.gain for r in rows],
                          label=f"w={w}")
    if gains.rows:
        n_ds = sorted({r.n_d for r in gains.rows})
        gain_plot.add(n_ds, [1.0] * len(n_ds), label="break-even",
                      dashed=True, marker=False)
    gain_plot.save(ws.path("gain.svg"))


def _cmd_bench(args) -> int:
    cfg = _load_cfg(args)
    reps = args.reps or int(cfg["bench"]["repetitions"])
    eq_max = args.eq_max_n or int(float(cfg["bench"]["equilibrium_max_n"]))
    threads = cfgmod.resolve_threads(int(cfg["bench"]["threads"]))
    seed = cfgmod.resolve_seed(int(cfg["bench"]["seed"]))
    if args.quick:
        n_d_values, widths = (10, 100, 1_000, 10_000), (20, 80)
        dim_pairs = (benchmod.DIM_PAIRS[0],)
        eq_max = min(eq_max, 10_000)
    else:
        n_d_values, widths = benchmod.N_D_GRID, benchmod.WIDTHS
        dim_pairs = benchmod.DIM_PAIRS
    ws = Workspace(args.out)
    try:
        def progress(row):
            tag = f"w={row.width}" if row.kind == "mlp" else "     "
            print(f"  {row.kind:<12} n_d={row.n_d:<8} {tag:<6} "
                  f"median {row.median_s:.3e} s {row.note}", flush=True)

        result = benchmod.run_grid(
            n_d_values=n_d_values, widths=widths, dim_pairs=dim_pairs,
            equilibrium_max_n_d=eq_max, repetitions=reps, seed=seed,
            threads=threads, progress=progress if args.verbose else None)
        result.to_csv(ws.path("bench.csv"))
        gains = benchmod.gain_report(result)
        gains.to_csv(ws.path("gain.csv"))
        _bench_plots(ws, result, gains, widths)
        _finish(ws, "bench", cfg, {"bench": seed}, threads=threads)
    except Exception:
        ws.discard()
        raise
    for w in widths:
        cross = gains.crossover(w)
        top = max((r.gain for r in gains.rows if r.width == w), default=None)
        if top is not None:
            print(f"width {w}: crossover at n_d = {cross}, "
                  f"peak gain {top:.1f}")
    return 0


def _envelope_svg(prop, observable: str, path: str, title: str) -> None:
    angles = prop.wall_angles()
    profs = prop.profiles(observable)
    plot = LinePlot(title=title, xlabel="wall angle (rad)",
                    ylabel=observable)
    plot.add_band(angles, profs.min(axis=0), profs.max(axis=0),
                  label="node envelope")
    plot.add(angles, prop.mean_profile(observable), label="weighted mean",
             marker=False)
    plot.save(path)


def _uq_outputs(ws: Workspace, variants: dict, observable: str) -> dict:
    """Per-node CSVs, mean profiles, decomposition table and plots."""
    for name, prop in variants.items():
        for i, nr in enumerate(prop.runs):
            p = ws.path(name, f"node_{i:02d}.csv")
            with open(p, "w") as fh:
                fh.write(f"# speed={nr.speed:.6f} weight={nr.weight:.9e} "
                         f"converged={int(nr.converged)} note={nr.note}\n")
                fh.write(f"angle_rad,{observable}\n")
                if nr.converged:
                    prof = (nr.result.wall_pressure if observable == "pressure"
                            else nr.result.standoff)
                    for a, v in zip(nr.result.wall_angles, prof):
                        fh.write(f"{a:.9e},{v:.9e}\n")
        _envelope_svg(prop, observable, ws.path(f"envelope_{name}.svg"),
                      f"{name}: {observable} envelope over speed nodes")

    ref = next(iter(variants.values()))
    angles = ref.wall_angles()
    with open(ws.path("mean_profile.csv"), "w") as fh:
        fh.write("angle_rad," + ",".join(variants) + "\n")
        means = {}
        for name, prop in variants.items():
            m = prop.mean_profile(observable)
            if prop.wall_angles().shape != angles.shape or \
                    not np.allclose(prop.wall_angles(), angles):
                m = np.interp(angles, prop.wall_angles(), m)
            means[name] = m
        for k, a in enumerate(angles):
            fh.write(f"{a:.9e}," +
                     ",".join(f"{means[n][k]:.9e}" for n in variants) + "\n")

    summary = {"observable": observable,
               "converged": {n: int(v.converged_mask.sum())
                             for n, v in variants.items()},
               "nodes": int(ref.rule.n)}
    wanted = {"eq_low", "eq_high", "nn_low", "nn_high"}
    if wanted.issubset(variants):
        deco = uqmod.decompose_errors(
            {k: variants[k] for k in wanted}, observable)
        deco.to_csv(ws.path("decomposition.csv"))
        names = ["approximation (low)", "approximation (high)",
                 "discretization", "parameter spread"]
        values = [deco.mean_approximation_low, deco.mean_approximation_high,
                  deco.mean_discretization, deco.mean_parameter_spread]
        bars = StackedBars(names, title="Weighted-mean error decomposition",
                           ylabel=f"normalized {observable} error",
                           label_rotate=-30.0)
        bars.add_layer("error", np.array(values))
        bars.save(ws.path("decomposition.svg"))
        summary["decomposition"] = dict(zip(names, values))
    return summary


def _cmd_uq(args) -> int:
    cfg = _load_cfg(args)
    n_nodes = args.nodes or int(cfg["uq"]["n_nodes"])
    observable = args.observable or cfg["uq"]["observable"]
    rule = uqmod.speed_rule(n_nodes, float(cfg["uq"]["speed"]),
                            float(cfg["uq"]["spread"]))
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    meshes = [m.strip() for m in args.meshes.split(",") if m.strip()]
    model = surrogate.load_model(args.model) if args.model else None
    if "nn" in modes and model is None:
        raise ConfigError("--modes includes nn but no --model was given")
    strategy = args.strategy or cfg["uq"]["strategy"]
    if strategy == "nn-warm" and model is None:
        strategy = "continuation"   # the fast model-free fallback
    low = (int(cfg["uq"]["low_n_radial"]), int(cfg["uq"]["low_n_angular"]))
    ws = Workspace(args.out)
    try:
        variants = {}
        for mode_kind in modes:
            for mesh_name in meshes:
                if mesh_name == "low":
                    case = cfgmod.case_from_config(cfg, *low)
                else:
                    case = cfgmod.case_from_config(cfg)
                mode = hybrid.RunMode(mode_kind, model=model) \
                    if mode_kind in ("eq", "nn", "nn-eq") and model is not None \
                    else hybrid.RunMode(mode_kind)
                name = f"{mode_kind}_{mesh_name}"
                print(f"propagating {name} ({rule.n} nodes, "
                      f"{case.n_radial}x{case.n_angular}, {strategy})...",
                      flush=True)
                variants[name] = uqmod.propagate(mode, rule, case, strategy)
        summary = _uq_outputs(ws, variants, observable)
        _write_json(ws.path("summary.json"), summary)
        _finish(ws, "uq", cfg, {})
    except Exception:
        ws.discard()
        raise
    if "decomposition" in summary:
        for k, v in summary["decomposition"].items():
            print(f"  {k:<24} {v:.4e}")
    print(f"UQ artifacts in {ws.dir}")
    return 0


# ---------------------------------------------------------------------------
# Figure-analog reproduction pipelines.
# ---------------------------------------------------------------------------

def _repro_model(ws, cfg, args, seeds):
    """Load --model if given, else train one on a fresh dataset."""
    if args.model:
        return surrogate.load_model(args.model)
    seed = cfgmod.resolve_seed(int(cfg["surrogate"]["seed"]))
    seeds["dataset"] = seeds["train"] = seed
    print("no --model given; generating data and training a surrogate "
          "(several minutes)...", flush=True)
    ranges = dict(surrogate.DEFAULT_RANGES)
    ranges["elements"] = cfgmod.element_fractions_from(cfg)
    train_set, test_set = surrogate.generate_dataset(
        int(cfg["surrogate"]["n_train"]), int(cfg["surrogate"]["n_test"]),
        ranges=ranges, seed=seed)
    tc = cfgmod.train_config_from(cfg)
    model, report = surrogate.train(train_set, test_set, tc)
    surrogate.save_model(model, ws.path("model.mlpm"))
    print(f"  surrogate test error {report.final_test_error:.3e}", flush=True)
    return model


def _repro_fig2(ws, cfg, args, seeds) -> str:
    case = cfgmod.case_from_config(cfg)
    runs = {}
    for kind in ("pg", "eq"):
        print(f"running {kind} at {case.n_radial}x{case.n_angular}...",
              flush=True)
        res = hybrid.run(hybrid.RunMode(kind), case)
        _save_run(ws, kind, res)
        runs[kind] = res
    j0 = int(np.argmin(np.abs(runs["eq"].wall_angles)))
    wall = LinePlot(title="Wall pressure: frozen vs equilibrium closure",
                    xlabel="wall angle (rad)", ylabel="pressure (Pa)")
    ray = LinePlot(title="Stagnation-ray pressure",
                   xlabel="distance from wall (m)", ylabel="pressure (Pa)")
    with open(ws.path("stagnation_ray.csv"), "w") as fh:
        fh.write("mode,distance_m,pressure_pa,temperature_k\n")
        for kind, res in runs.items():
            wall.add(res.wall_angles, res.wall_pressure, label=kind)
            centers = res.mesh.centers[:, j0, :]
            dist = np.hypot(centers[:, 0], centers[:, 1]) - res.mesh.r_body
            p_ray = res.field.p[:, j0]
            T_ray = res.field.T[:, j0]
            ray.add(dist, p_ray, label=kind, marker=False)
            for d, p, T in zip(dist, p_ray, T_ray):
                fh.write(f"{kind},{d:.9e},{p:.9e},{T:.9e}\n")
    wall.save(ws.path("wall_pressure.svg"))
    ray.save(ws.path("stagnation_ray.svg"))
    pg, eq = runs["pg"], runs["eq"]
    _write_json(ws.path("summary.json"), {
        "pg_stagnation_pressure_pa": float(pg.wall_pressure[j0]),
        "eq_stagnation_pressure_pa": float(eq.wall_pressure[j0]),
        "pg_standoff_m": float(pg.standoff[j0]),
        "eq_standoff_m": float(eq.standoff[j0]),
        "standoff_ratio_pg_over_eq": float(pg.standoff[j0] / eq.standoff[j0]),
    })
    return (f"PG standoff {pg.standoff[j0]:.4e} m vs EQ "
            f"{eq.standoff[j0]:.4e} m (ratio "
            f"{pg.standoff[j0] / eq.standoff[j0]:.3f})")


def _repro_bench(ws, cfg, args, seeds, widths) -> str:
    seed = cfgmod.resolve_seed(int(cfg["bench"]["seed"]))
    seeds["bench"] = seed
    threads = cfgmod.resolve_threads(int(cfg["bench"]["threads"]))
    result = benchmod.run_grid(
        widths=widths, dim_pairs=(benchmod.DIM_PAIRS[0],),
        equilibrium_max_n_d=int(float(cfg["bench"]["equilibrium_max_n"])),
        repetitions=int(cfg["bench"]["repetitions"]), seed=seed,
        threads=threads)
    result.to_csv(ws.path("bench.csv"))
    gains = benchmod.gain_report(result)
    gains.to_csv(ws.path("gain.csv"))
    _bench_plots(ws, result, gains, widths)
    w0 = widths[0]
    peak = max((r.gain for r in gains.rows if r.width == w0), default=float("nan"))
    return (f"width {w0}: crossover n_d = {gains.crossover(w0)}, "
            f"peak gain {peak:.1f}")


def _repro_search(ws, cfg, args, seeds, restricted: bool) -> str:
    seed = cfgmod.resolve_seed(int(cfg["search"]["seed"]))
    seeds["dataset"] = seeds["search"] = seed
    ranges = dict(surrogate.DEFAULT_RANGES)
    ranges["elements"] = cfgmod.element_fractions_from(cfg)
    train_set, test_set = surrogate.generate_dataset(
        int(cfg["search"]["n_train"]), int(cfg["search"]["n_test"]),
        ranges=ranges, seed=seed)
    budget = cfgmod.budget_from_config(cfg)
    n_trials = int(cfg["search"]["n_trials"])
    print(f"random search: {n_trials} trials...", flush=True)
    trials = hpo.random_search(train_set, test_set, n_trials, budget, seed,
                               ws.path("trials.jsonl"))
    _histogram_svg(trials, ws.path("histogram.svg"),
                   "Search error distribution")
    summary = _search_summary(trials)
    report = hpo.hsic_indices(trials, seed=seed)
    report.to_csv(ws.path("hsic.csv"))
    _hsic_svg(report, ws.path("hsic.svg"))
    if not restricted:
        _write_json(ws.path("summary.json"), summary)
        return (f"best {summary['best_error']:.3e}, spread "
                f"{summary['decades_spread']:.1f} decades; top factor "
                f"{report.ranked_names()[0]}")
    top_k = int(cfg["search"]["top_k"])
    print(f"restricted search on top {top_k} factors...", flush=True)
    rtrials = hpo.restricted_search(
        trials, top_k, train_set, test_set, n_trials, budget, seed + 1,
        ws.path("trials_restricted.jsonl"))
    _histogram_svg(rtrials, ws.path("histogram_restricted.svg"),
                   "Restricted-search error distribution")
    rsummary = _search_summary(rtrials)
    best_curve = LinePlot(title="Best error vs trial",
                          xlabel="trial", ylabel="best error so far",
                          ylog=True)
    for name, ts in (("full space", trials), ("restricted", rtrials)):
        errs = np.minimum.accumulate(
            [t.error if np.isfinite(t.error) else np.inf for t in ts])
        best_curve.add(np.arange(1, len(ts) + 1), errs, label=name,
                       marker=False)
    best_curve.save(ws.path("best_error.svg"))
    _write_json(ws.path("summary.json"),
                {"full": summary, "restricted": rsummary})
    frac_good = np.mean([t.error <= 10 * rsummary["best_error"]
                         for t in rtrials if np.isfinite(t.error)])
    return (f"full best {summary['best_error']:.3e} vs restricted best "
            f"{rsummary['best_error']:.3e}; "
            f"{100 * frac_good:.0f}% of restricted trials within 10x of best")


def _repro_table2(ws, cfg, args, seeds) -> str:
    model = _repro_model(ws, cfg, args, seeds)
    low = (int(cfg["uq"]["low_n_radial"]), int(cfg["uq"]["low_n_angular"]))
    case = cfgmod.case_from_config(cfg, *low)
    runs = {}
    for kind in ("eq", "pg", "nn"):
        print(f"running {kind} at {case.n_radial}x{case.n_angular}...",
              flush=True)
        mode = hybrid.RunMode(kind, model=model if kind == "nn" else None)
        res = hybrid.run(mode, case)
        _save_run(ws, kind, res)
        runs[kind] = res
    table = hybrid.compare(runs, "eq")
    table.to_csv(ws.path("comparison.csv"))
    with open(ws.path("comparison.txt"), "w") as fh:
        fh.write(table.to_text())
    by = {r.name: r for r in table.rows}
    return (f"wall-pressure L2 error vs eq: nn {by['nn'].p_l2:.3e}, "
            f"pg {by['pg'].p_l2:.3e}")


def _repro_uq(ws, cfg, args, seeds) -> str:
    model = _repro_model(ws, cfg, args, seeds)
    rule = uqmod.speed_rule(int(cfg["uq"]["n_nodes"]),
                            float(cfg["uq"]["speed"]),
                            float(cfg["uq"]["spread"]))
    low = (int(cfg["uq"]["low_n_radial"]), int(cfg["uq"]["low_n_angular"]))
    variants = {}
    for mode_kind in ("eq", "nn"):
        for mesh_name, dims in (("low", low), ("high", None)):
            case = cfgmod.case_from_config(cfg, *(dims or ()))
            mode = hybrid.RunMode(mode_kind, model=model)
            name = f"{mode_kind}_{mesh_name}"
            print(f"propagating {name} ({rule.n} nodes)...", flush=True)
            strategy = "nn-warm" if mode_kind == "eq" else "continuation"
            variants[name] = uqmod.propagate(mode, rule, case, strategy)
    observable = cfg["uq"]["observable"]
    summary = _uq_outputs(ws, variants, observable)
    _write_json(ws.path("summary.json"), summary)
    d = summary.get("decomposition", {})
    if d:
        return ("weighted means: " +
                ", ".join(f"{k} {v:.3e}" for k, v in d.items()))
    return "propagation finished (decomposition unavailable)"


_REPRO_IDS = {
    "fig2": (_repro_fig2, "frozen vs equilibrium closure fields"),
    "fig3": (lambda ws, cfg, args, seeds:
             _repro_bench(ws, cfg, args, seeds, widths=(20,)),
             "closure timing vs batch size"),
    "fig6": (lambda ws, cfg, args, seeds:
             _repro_bench(ws, cfg, args, seeds, widths=benchmod.WIDTHS),
             "gain factor vs batch size and width"),
    "fig7": (lambda ws, cfg, args, seeds:
             _repro_search(ws, cfg, args, seeds, restricted=False),
             "random-search error histogram"),
    "fig8": (lambda ws, cfg, args, seeds:
             _repro_search(ws, cfg, args, seeds, restricted=False),
             "hyperparameter sensitivity indices"),
    "fig9": (lambda ws, cfg, args, seeds:
             _repro_search(ws, cfg, args, seeds, restricted=True),
             "restricted search vs full search"),
    "table2": (_repro_table2, "closure error/timing comparison table"),
    "fig11-13": (_repro_uq, "uncertainty propagation and error split"),
}


def _cmd_repro(args) -> int:
    cfg = _load_cfg(args)
    handler, _ = _REPRO_IDS[args.figure]
    ws = Workspace(args.out)
    seeds: dict[str, int] = {}
    t0 = time.perf_counter()
    try:
        line = handler(ws, cfg, args, seeds)
        _finish(ws, f"repro {args.figure}", cfg, seeds)
    except Exception:
        ws.discard()
        raise
    print(line)
    print(f"repro {args.figure} done in {time.perf_counter() - t0:.1f} s; "
          f"artifacts in {ws.dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser and dispatch.
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypersol",
        description="Blunt-body Euler solver with equilibrium chemistry, "
                    "a neural closure surrogate, and its study tooling.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="INI configuration file")
        return p

    p = add("equilibrate", _cmd_equilibrate,
            "solve equilibrium states at (rho, eps)")
    p.add_argument("--rho", type=float, help="density kg/m^3")
    p.add_argument("--eps", type=float,
                   help="specific internal energy J/kg")
    p.add_argument("--csv", help="batch input CSV with rho,epsilon columns")
    p.add_argument("--out-csv", help="batch output CSV path (default stdout)")
    p.add_argument("--elements", help="element mass fractions, e.g. '0.8 0.2'")
    p.add_argument("--json", action="store_true", help="JSON output")

    p = add("gen-data", _cmd_gen_data, "generate a labeled closure dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-train", type=int, help="training samples")
    p.add_argument("--n-test", type=int, help="test samples")
    p.add_argument("--seed", type=int, help="sampling seed")

    p = add("train", _cmd_train, "train the surrogate on a dataset")
    p.add_argument("--data", required=True, help="gen-data output directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--epochs", type=int, help="override epoch count")
    p.add_argument("--seed", type=int, help="override training seed")

    p = add("search", _cmd_search, "random hyperparameter search")
    p.add_argument("--data", required=True, help="gen-data output directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--trials", type=int, help="number of trials")
    p.add_argument("--seed", type=int, help="search seed")
    p.add_argument("--restricted-from", metavar="TRIALS_JSONL",
                   help="restrict to the most sensitive dimensions of a "
                        "previous search's trial log")
    p.add_argument("--top-k", type=int,
                   help="dimensions kept free in restricted mode")

    p = add("hsic", _cmd_hsic, "sensitivity indices from a trial log")
    p.add_argument("--trials", required=True, help="trials.jsonl path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--percentile", type=float, default=0.10,
                   help="goal percentile (default 0.10)")
    p.add_argument("--bootstrap", type=int, default=200,
                   help="bootstrap resamples for error bars")
    p.add_argument("--permutations", type=int, default=0,
                   help="permutation-test resamples (0 = skip p-values)")
    p.add_argument("--seed", type=int, help="bootstrap seed")

    p = add("run", _cmd_run, "steady blunt-body solve")
    p.add_argument("--mode", required=True,
                   choices=("pg", "eq", "nn", "nn-eq"),
                   help="closure: frozen-gas, equilibrium, surrogate, or "
                        "surrogate warm start finished by equilibrium")
    p.add_argument("--model", help="surrogate model file (nn modes)")
    p.add_argument("--mesh", default="high",
                   help="'high' (configured), 'low' (half), or 'NRxNA'")
    p.add_argument("--out", help="artifact directory (omit to just print)")

    p = add("compare", _cmd_compare, "compare saved runs against a reference")
    p.add_argument("--ref", required=True, help="reference run directory")
    p.add_argument("--runs", nargs="+", required=True,
                   help="run directories to compare")
    p.add_argument("--out", required=True, help="output directory")

    p = add("bench", _cmd_bench, "closure timing grid and gain factors")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--reps", type=int, help="timing repetitions")
    p.add_argument("--eq-max-n", type=int,
                   help="largest batch timed on the equilibrium side")
    p.add_argument("--quick", action="store_true",
                   help="small grid for smoke checks")
    p.add_argument("--verbose", action="store_true",
                   help="print each grid point as it is measured")

    p = add("uq", _cmd_uq, "propagate upstream-speed uncertainty")
    p.add_argument("--nodes", type=int, help="quadrature nodes")
    p.add_argument("--observable", choices=("pressure", "standoff"),
                   help="wall observable")
    p.add_argument("--modes", default="eq",
                   help="comma list from {pg,eq,nn,nn-eq}")
    p.add_argument("--meshes", default="high",
                   help="comma list from {low,high}")
    p.add_argument("--model", help="surrogate model file")
    p.add_argument("--strategy", choices=("nn-warm", "continuation", "cold"),
                   help="per-node initialization strategy")
    p.add_argument("--out", required=True, help="output directory")

    p = add("repro", _cmd_repro, "rebuild a standard figure at desk scale")
    p.add_argument("figure", choices=sorted(_REPRO_IDS),
                   help="which figure analog to produce")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--model", help="reuse a trained surrogate model file")

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    """Parse arguments and execute; returns the process exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:        # argparse's own error/help paths
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hypersol: configuration error: {exc}", file=sys.stderr)
        return 1
    except (NoConvergence, NonRealizable, NonPhysicalEnergy,
            euler.NonConvergence, euler.PositivityViolation,
            euler.ClosureError, surrogate.DatasetError,
            FileNotFoundError) as exc:
        print(f"hypersol: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
