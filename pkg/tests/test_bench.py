"""Timing harness: row bookkeeping, grid driver, gain arithmetic."""

import numpy as np
import pytest

from hypersol import bench as B
from hypersol.surrogate import forward_batch
from hypersol.thermo import ATMOSPHERE_DIMS


def test_dim_pairs_cover_all_atmosphere_sizes():
    want = tuple(sorted((ne + 2, ns + 5)
                        for ne, ns in ATMOSPHERE_DIMS.values()))
    assert B.DIM_PAIRS == want
    assert (4, 8) in B.DIM_PAIRS          # the real (solvable) atmosphere


def test_random_mlp_architecture():
    m = B.random_mlp(width=20, d_in=4, d_out=8, seed=0)
    assert [w.shape for w in m.weights] == \
        [(20, 4)] + [(20, 20)] * 4 + [(8, 20)]
    assert m.activations == ("elu",) * 5
    again = B.random_mlp(width=20, d_in=4, d_out=8, seed=0)
    for a, b in zip(m.weights, again.weights):
        assert np.array_equal(a, b)
    other = B.random_mlp(width=20, d_in=4, d_out=8, seed=1)
    assert not np.array_equal(m.weights[0], other.weights[0])
    out = forward_batch(m, np.random.default_rng(0).uniform(size=(17, 4)))
    assert out.shape == (17, 8) and np.all(np.isfinite(out))


def test_bench_result_csv_round_trip(tmp_path):
    res = B.BenchResult([
        B.BenchRow("equilibrium", 100, 0, 4, 8, 1.5e-2, 1e-4, 10, 1),
        B.BenchRow("mlp", 100, 20, 4, 8, 3.0e-5, 1e-6, 10, 1),
        B.BenchRow("mlp", 10**6, 320, 8, 69, float("nan"), float("nan"), 0,
                   1, "allocation-failed"),
    ])
    path = tmp_path / "t.csv"
    res.to_csv(path)
    back = B.BenchResult.from_csv(path)
    assert len(back.rows) == 3
    assert back.rows[0] == res.rows[0]
    assert back.rows[1] == res.rows[1]
    assert back.rows[2].note == "allocation-failed"
    assert np.isnan(back.rows[2].median_s)


def test_from_csv_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("angle_rad,wall_pressure_pa\n0.0,1.0\n")
    with pytest.raises(ValueError, match="not a timing table"):
        B.BenchResult.from_csv(path)


def test_lookup_filters_kind_width_dims_and_notes():
    rows = [
        B.BenchRow("equilibrium", 100, 0, 4, 8, 2e-2, 0, 10, 1),
        B.BenchRow("mlp", 100, 20, 4, 8, 3e-5, 0, 10, 1),
        B.BenchRow("mlp", 100, 20, 4, 23, 4e-5, 0, 10, 1),
        B.BenchRow("mlp", 100, 40, 4, 8, 5e-5, 0, 10, 1),
        B.BenchRow("mlp", 1000, 20, 4, 8, float("nan"), float("nan"), 0, 1,
                   "allocation-failed"),
    ]
    res = B.BenchResult(rows)
    assert res.lookup("equilibrium", 100) is rows[0]
    assert res.lookup("mlp", 100, width=20, d_out=8) is rows[1]
    assert res.lookup("mlp", 100, width=20, d_out=23) is rows[2]
    assert res.lookup("mlp", 100, width=40) is rows[3]
    assert res.lookup("mlp", 1000, width=20) is None     # note rows skipped
    assert res.lookup("mlp", 555) is None


def test_time_reps_counts_and_positive():
    calls = {"n": 0}

    def fn():
        calls["n"] += 1
        sum(range(2000))

    med, std = B._time_reps(fn, repetitions=10, warmups=2)
    assert calls["n"] == 12
    assert med > 0.0 and std >= 0.0


def test_minimum_repetitions_enforced():
    with pytest.raises(ValueError):
        B.bench_mlp(10, 20, 4, 8, repetitions=3)
    with pytest.raises(ValueError):
        B.bench_equilibrium(10, repetitions=3)


def test_bench_mlp_row():
    row = B.bench_mlp(200, 20, 4, 8, repetitions=10)
    assert row.kind == "mlp" and row.n_d == 200 and row.width == 20
    assert row.d_in == 4 and row.d_out == 8
    assert 0.0 < row.median_s < 1.0
    assert row.repetitions == 10 and row.threads == 1 and row.note == ""


def test_bench_equilibrium_row():
    row = B.bench_equilibrium(20, repetitions=10)
    assert row.kind == "equilibrium" and row.width == 0
    assert row.d_in == 4 and row.d_out == 8
    assert row.median_s > 0.0
    assert row.repetitions == 10


def test_run_grid_and_gain_report():
    res = B.run_grid(n_d_values=(10, 100), widths=(20, 40),
                     dim_pairs=((4, 8), (4, 23)),
                     equilibrium_max_n_d=100, repetitions=10, seed=0)
    eq_rows = [r for r in res.rows if r.kind == "equilibrium"]
    mlp_rows = [r for r in res.rows if r.kind == "mlp"]
    assert len(eq_rows) == 2
    assert len(mlp_rows) == 2 * 2 * 2
    gains = B.gain_report(res)
    # only the real atmosphere's d_out participates in gains
    assert len(gains.rows) == 2 * 2
    for r in gains.rows:
        assert np.isfinite(r.gain) and r.gain > 0.0
    assert gains.gain(100, 20) is not None
    assert gains.gain(100, 77) is None


def test_run_grid_skips_equilibrium_beyond_cap():
    res = B.run_grid(n_d_values=(10, 100), widths=(20,),
                     dim_pairs=((4, 8),), equilibrium_max_n_d=10,
                     repetitions=10, seed=0)
    eq_n = [r.n_d for r in res.rows if r.kind == "equilibrium"]
    assert eq_n == [10]
    gains = B.gain_report(res)
    assert [r.n_d for r in gains.rows] == [10]


def test_gain_table_csv_and_crossover(tmp_path):
    table = B.GainTable([
        B.GainRow(10, 20, 0.4),
        B.GainRow(100, 20, 2.5),
        B.GainRow(1000, 20, 40.0),
        B.GainRow(10, 40, 0.2),
    ])
    assert table.crossover(20) == 100
    assert table.crossover(40) is None
    assert table.crossover(99) is None
    path = tmp_path / "g.csv"
    table.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "n_d,width,gain"
    assert len(lines) == 5


def test_progress_callback_sees_every_row():
    seen = []
    res = B.run_grid(n_d_values=(10,), widths=(20,), dim_pairs=((4, 8),),
                     equilibrium_max_n_d=10, repetitions=10,
                     progress=seen.append)
    assert len(seen) == len(res.rows) == 2
