import numpy as np
import pytest
from scipy import stats

from simad.errors import GenerationError
from simad.metrics import events_from_labels
from simad.synthbench import (DEMOS, TABLE_COLUMNS, DemoSpec, SimulatedModel, dataset_shaped_labels,
                              demos_from_arg, gen_labels, run_bench, simulate_scores)


@pytest.mark.parametrize("key", sorted(DEMOS))
def test_gen_labels_segments(key):
    spec = DEMOS[key]
    for seed in range(20):
        y = gen_labels(spec, np.random.default_rng(seed))
        ev = events_from_labels(y)
        assert len(ev) == spec.anom_seq
        assert all(spec.min_len <= e - s <= spec.max_len for s, e in ev)
        assert y.sum() <= spec.anom_seq * spec.max_len
    a = gen_labels(spec, np.random.default_rng(3))
    np.testing.assert_array_equal(a, gen_labels(spec, np.random.default_rng(3)))


def test_demo_spec_validation_and_generation_error():
    with pytest.raises(ValueError):
        DemoSpec("x", 0, 1, 2)
    with pytest.raises(ValueError):
        DemoSpec("x", 1, 5, 4)
    with pytest.raises(ValueError):
        DemoSpec("x", 10, 100, 100)
    # fits in principle but only in very few layouts: rejection sampling gives up
    tight = DemoSpec("tight", anom_seq=50, min_len=19, max_len=19, length=999)
    with pytest.raises(GenerationError):
        gen_labels(tight, np.random.default_rng(0))


def test_dataset_shaped_labels_ratio():
    y = dataset_shaped_labels(20_000, 0.105, 30, np.random.default_rng(0))
    assert len(events_from_labels(y)) == 30
    assert y.mean() == pytest.approx(0.105, abs=0.02)


def test_simulated_model_parse():
    assert SimulatedModel.parse("M95").accuracy == 0.95
    assert SimulatedModel.parse("Random").kind == "Random"
    for bad in ("M", "Q10", "M101"):
        with pytest.raises(ValueError):
            SimulatedModel.parse(bad)


def test_m100_is_perfect_and_random_is_uniform():
    y = gen_labels(DEMOS[1], np.random.default_rng(0))
    s = simulate_scores(y, SimulatedModel.parse("M100"), np.random.default_rng(1))
    assert (s[y == 1] >= 0.9).all() and (s[y == 0] == 0).all()
    r = simulate_scores(y, SimulatedModel.parse("Random"), np.random.default_rng(1))
    assert stats.kstest(r, "uniform").pvalue > 0.001


def test_m10_worse_than_random_on_balanced_labels():
    y = np.tile([0, 1], 500)
    s = simulate_scores(y, SimulatedModel.parse("M10"), np.random.default_rng(0))
    assert (s[y == 0] > 0).mean() > 0.8
    assert (s[y == 1] == 0).mean() > 0.8


@pytest.mark.parametrize("name", ["M60", "M90"])
def test_high_scored_anomaly_fraction_is_binomial(name):
    model = SimulatedModel.parse(name)
    y = np.ones(5000, dtype=int)
    hits = int((simulate_scores(y, model, np.random.default_rng(2)) >= 0.9).sum())
    assert stats.binomtest(hits, y.size, model.accuracy).pvalue > 0.001


def test_run_bench_deterministic_and_formats():
    demos = [DemoSpec("small", 2, 10, 12, length=200, reps=3)]
    models = [SimulatedModel.parse(n) for n in ("Random", "M100")]
    a = run_bench(demos, models, seed=5)
    b = run_bench(demos, models, seed=5)
    assert a.rows == b.rows and not a.errors
    assert a.cell("small", "M100", "F1PA") == 100.0
    csv_lines = a.to_csv().splitlines()
    assert csv_lines[0].startswith("Demo,Method,F1,Acc,Pre")
    assert len(csv_lines) == 3
    text = a.to_text().splitlines()
    assert "NAff-F1" in text[0] and len(text) == 3
    assert set(TABLE_COLUMNS) <= set(a.rows[0])


def test_run_bench_records_cell_errors(monkeypatch):
    import simad.synthbench as sb

    def boom(*a, **k):
        raise ValueError("broken cell")

    monkeypatch.setattr(sb, "evaluate", boom)
    demos = [DemoSpec("small", 1, 5, 5, length=50, reps=2)]
    t = run_bench(demos, [SimulatedModel.parse("M100")])
    assert t.errors[("small", "M100")] == "ValueError: broken cell"
    assert np.isnan(t.cell("small", "M100", "F1"))


def test_demos_from_arg():
    assert [d.name for d in demos_from_arg("all")] == ["Demo1", "Demo2", "Demo3"]
    assert demos_from_arg("2", seed=4)[0].seed == 4
    with pytest.raises(KeyError):
        demos_from_arg("7")
