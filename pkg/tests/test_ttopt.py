import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttlogistic.errors import DegenerateMatrixError, EvaluationError, InvalidArgumentError
from ttlogistic.pipeline import random_baseline
from ttlogistic.ttopt import ParameterBox, discretize_box, map_g, maxvol, tt_minimize


def rosenbrock(q):
    return float((1 - q[0]) ** 2 + 100 * (q[1] - q[0] ** 2) ** 2)


def test_discretize_examples():
    assert discretize_box(ParameterBox(np.array([0.0]), np.array([1.0]), 2))[0].tolist() == [0, 1]
    six = discretize_box(ParameterBox(np.array([1.0]), np.array([6.0]), 6))[0]
    assert six.tolist() == [1, 2, 3, 4, 5, 6]
    ax = discretize_box(ParameterBox(np.array([0.0]), np.array([0.1]), 11))[0]
    assert ax[0] == 0.0 and ax[-1] == 0.1
    assert np.allclose(np.diff(ax), 0.01)


def test_box_validation():
    with pytest.raises(InvalidArgumentError):
        ParameterBox(np.array([1.0]), np.array([1.0]))
    with pytest.raises(InvalidArgumentError):
        ParameterBox(np.array([0.0]), np.array([1.0]), 1)


def test_map_g():
    assert map_g(0.0) == pytest.approx(np.pi / 2)
    assert map_g(1.0) == pytest.approx(np.pi / 4)
    assert 0 < map_g(1e12) < 1e-11
    with pytest.raises(InvalidArgumentError):
        map_g(-1e-3)


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_map_g_decreasing(a, b):
    if a < b:
        assert map_g(a) >= map_g(b)


def test_maxvol_three_by_two():
    M = np.array([[1.0, 0.0], [0.0, 1.0], [10.0, 10.0]])
    best = max(abs(np.linalg.det(M[list(c)])) for c in itertools.combinations(range(3), 2))
    rows = maxvol(M)
    assert abs(np.linalg.det(M[rows])) == pytest.approx(best) == pytest.approx(10.0)


def test_maxvol_identity_top():
    M = np.vstack([np.eye(4), np.zeros((6, 4))])
    assert sorted(maxvol(M).tolist()) == [0, 1, 2, 3]


def test_maxvol_dominance_random():
    rng = np.random.default_rng(0)
    tol = 1e-2
    for _ in range(200):
        M = rng.normal(size=(50, 5))
        rows = maxvol(M, tol)
        assert len(set(rows.tolist())) == 5
        B = M @ np.linalg.inv(M[rows])
        assert np.max(np.abs(B)) <= 1 + tol + 1e-10


def test_maxvol_rank_deficient():
    M = np.outer(np.arange(1.0, 7.0), [1.0, 2.0])
    with pytest.raises(DegenerateMatrixError):
        maxvol(M)


def test_constant_objective():
    box = ParameterBox(np.zeros(3), np.ones(3), 5)
    res = tt_minimize(lambda q: 4.2, box, n_sweeps=2, threads=1)
    assert res.J_best == 4.2
    assert all(0 <= i < 5 for i in res.index_best)


C_SEP = np.array([2, 5, 3]) / 7.0


def separable(q):
    return float(np.sum((q - C_SEP) ** 2))


def test_separable_exact_recovery_twenty_seeds():
    box = ParameterBox(np.zeros(3), np.ones(3), 8)
    grid = discretize_box(box)
    brute = min(itertools.product(range(8), repeat=3),
                key=lambda idx: separable(np.array([grid[j][i] for j, i in enumerate(idx)])))
    for seed in range(20):
        res = tt_minimize(separable, box, r_max=4, n_sweeps=8, seed=seed, threads=1)
        assert res.index_best == brute, seed
        assert res.evals <= 4 * 3 * 8 * 16 * 8


def test_rosenbrock_beats_grid_baseline():
    box = ParameterBox(np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 64)
    res = tt_minimize(rosenbrock, box, r_max=4, n_sweeps=32, seed=0, threads=1)
    baseline = random_baseline(rosenbrock, box, 10000, seed=0, on_grid=True)
    assert res.J_best <= baseline
    assert res.evals <= 4 * 2 * 64 * 16 * 32


def test_cache_no_repeats_and_monotone_best():
    seen = []

    def f(q):
        seen.append(tuple(q))
        return rosenbrock(q)

    box = ParameterBox(np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 32)
    res = tt_minimize(f, box, n_sweeps=6, threads=1)
    assert len(seen) == len(set(seen)) == res.evals
    best = [row[2] for row in res.trace]
    assert all(b <= a for a, b in zip(best[:-1], best[1:]))
    assert res.J_best == min(rosenbrock(np.array(q)) for q in seen)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000))
def test_threaded_matches_serial(seed):
    box = ParameterBox(np.zeros(4), np.ones(4), 6)
    f = lambda q: float(np.sum((q - 0.3) ** 2) + np.prod(q))  # noqa: E731
    a = tt_minimize(f, box, n_sweeps=3, seed=seed, threads=1)
    b = tt_minimize(f, box, n_sweeps=3, seed=seed, threads=3)
    assert a.index_best == b.index_best and a.evals == b.evals and a.trace == b.trace


def test_budget_exhaustion_flag():
    box = ParameterBox(np.zeros(3), np.ones(3), 8)
    res = tt_minimize(separable, box, budget=50, threads=1)
    assert res.budget_exhausted and res.evals == 50


def test_evaluation_error_carries_index():
    box = ParameterBox(np.zeros(2), np.ones(2), 4)

    def bad(q):
        raise ValueError("boom")

    with pytest.raises(EvaluationError) as info:
        tt_minimize(bad, box, threads=1)
    assert len(info.value.multi_index) == 2


def test_grid_resolution_consistency():
    box = ParameterBox(np.zeros(3), np.ones(3), 11)
    c = np.array([0.33, 0.71, 0.48])
    res = tt_minimize(lambda q: float(np.sum((q - c) ** 2)), box, n_sweeps=8, threads=1)
    nearest = box.point(box.nearest_index(c))
    assert res.J_best <= float(np.sum((nearest - c) ** 2)) + 1e-15


def test_trace_csv(tmp_path):
    box = ParameterBox(np.zeros(2), np.ones(2), 5)
    res = tt_minimize(lambda q: float(q.sum()), box, n_sweeps=2, threads=1)
    res.trace_to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "sweep,evals,best_J" and len(lines) == 1 + len(res.trace)
