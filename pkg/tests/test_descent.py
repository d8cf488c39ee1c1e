from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttlogistic.errors import InvalidArgumentError, StalledError
from ttlogistic.descent import (
    DescentSettings,
    DescentTrace,
    descend,
    minimize_gradient,
    project_box,
    step_size,
)
from ttlogistic.forward import ObservationSet, SpaceTimeGrid, sample_observations, solve_forward
from ttlogistic.model import ParameterVector
from ttlogistic.ttopt import ParameterBox

GRID = SpaceTimeGrid()
Q_EXACT = ParameterVector()
INF = np.array([np.inf])

LOWER = np.array([0.0, 10.0, 0.5, 0.1, 0.5] + [0.0] * 6)
UPPER = np.array([0.1, 50.0, 3.0, 1.0, 3.0] + [5.0] * 6)


def quadratic(x):
    return float(x[0] ** 2), np.array([2.0 * x[0]])


def run_quadratic(x0, rule, max_iter=50):
    settings = DescentSettings(alpha_rule=rule, backtracking=False, scaling="none",
                               max_iter=max_iter)
    return descend(quadratic, lambda x: quadratic(x)[0], np.array([x0]), -INF, INF,
                   settings, epsilon=1e-30)


def test_step_size_rules():
    assert step_size(0.0, 3.0, "literal") == 0.0
    assert step_size(0.0, 3.0, "minimal-error-squared") == 0.0
    assert step_size(2.0, 4.0, "literal") == 1.0
    assert step_size(2.0, 4.0, "minimal-error-squared") == 0.25
    with pytest.raises(StalledError):
        step_size(1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        step_size(1.0, 1.0, "newton")


def test_squared_rule_solves_quadratic_in_one_step():
    x, trace = run_quadratic(1.0, "minimal-error-squared")
    assert trace.alpha[0] == 0.5
    assert x[0] == 0.0 and trace.status == "converged"
    assert len(trace.J) == 2


def test_literal_rule_diverges_on_quadratic():
    x, trace = run_quadratic(2.0, "literal")
    assert trace.status == "diverged"
    assert all(b > a for a, b in zip(trace.J[:-1], trace.J[1:]))


def test_literal_rule_oscillates_from_unit_start():
    x, trace = run_quadratic(1.0, "literal", max_iter=10)
    assert trace.status == "iter-cap"
    assert np.allclose(np.abs([q[0] for q in trace.q]), 1.0)


def test_project_box_examples():
    q = np.array([-0.002, 25.0, 1.5, 0.375, 1.65] + [1.0] * 6)
    p = project_box(q, LOWER, UPPER)
    assert p[0] == 0.0 and np.array_equal(p[1:], q[1:])
    inside = (LOWER + UPPER) / 2
    assert np.array_equal(project_box(inside, LOWER, UPPER), inside)


@given(st.lists(st.floats(-100, 100), min_size=11, max_size=11))
def test_project_box_idempotent(v):
    once = project_box(np.array(v), LOWER, UPPER)
    assert np.array_equal(project_box(once, LOWER, UPPER), once)
    assert np.all((once >= LOWER) & (once <= UPPER))


def test_settings_validation():
    with pytest.raises(InvalidArgumentError):
        DescentSettings(epsilon=0.0)
    with pytest.raises(InvalidArgumentError):
        DescentSettings(max_iter=0)
    with pytest.raises(InvalidArgumentError):
        DescentSettings(alpha_rule="other")


@pytest.fixture(scope="module")
def data():
    blank = ObservationSet((1.0, 2.0, 3.0, 4.0, 5.0, 6.0), (5.0, 6.0, 7.0, 8.0, 9.0, 10.0),
                           np.zeros((6, 6)))
    return blank.with_values(sample_observations(solve_forward(Q_EXACT, GRID), blank))


def test_start_at_truth_converges_immediately(data):
    box = ParameterBox(LOWER, UPPER)
    q, trace = minimize_gradient(Q_EXACT, data, GRID, box)
    assert trace.status == "converged" and len(trace.J) == 1
    assert q.to_array().tolist() == Q_EXACT.to_array().tolist()


def test_two_parameter_toy_recovers_truth(data):
    # only beta3 and K_cap are free: freeze the rest by a degenerate box
    x = Q_EXACT.to_array()
    lo, hi = x.copy(), x.copy()
    lo[[1, 4]], hi[[1, 4]] = LOWER[[1, 4]], UPPER[[1, 4]]
    rng = np.random.default_rng(4)
    start = x.copy()
    start[[1, 4]] = rng.uniform(lo[[1, 4]], hi[[1, 4]])
    box = SimpleNamespace(lower=lo, upper=hi)
    q, trace = minimize_gradient(Q_EXACT.with_array(start), data, GRID, box,
                                 DescentSettings(max_iter=500))
    err = np.abs(q.to_array()[[1, 4]] - x[[1, 4]]) / x[[1, 4]]
    assert np.all(err <= 1e-3), (err, trace.status, len(trace.J))
    assert len(trace.J) <= 501


def test_trace_monotone_and_in_box(data):
    rng = np.random.default_rng(9)
    x = Q_EXACT.to_array() * (1 + 0.1 * rng.uniform(-1, 1, 11))
    box = ParameterBox(LOWER, UPPER)
    _, trace = minimize_gradient(Q_EXACT.with_array(x), data, GRID, box,
                                 DescentSettings(max_iter=30))
    assert all(b < a for a, b in zip(trace.J[:-1], trace.J[1:]))
    for q in trace.q:
        assert np.all((q >= LOWER) & (q <= UPPER))


def test_start_outside_box_rejected(data):
    x = Q_EXACT.to_array()
    x[1] = 60.0
    with pytest.raises(InvalidArgumentError):
        minimize_gradient(Q_EXACT.with_array(x), data, GRID, ParameterBox(LOWER, UPPER))


def test_trace_csv(tmp_path):
    t = DescentTrace()
    t.append([1.0], 2.0, 3.0, 0.5)
    t.append([0.5], 1.0, 1.0)
    t.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iter,J,grad_norm,alpha" and len(lines) == 3
