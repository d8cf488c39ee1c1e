import numpy as np
import pytest

from ttlogistic.adjoint import (
    assemble_sources,
    fd_gradient,
    fd_gradient_fn,
    gradient,
    sensitivity_derivative,
    solve_adjoint,
    solve_sensitivity,
)
from ttlogistic.forward import (
    ObservationSet,
    SpaceTimeGrid,
    misfit,
    misfit_scale,
    sample_observations,
    solve_forward,
)
from ttlogistic.model import ParameterVector

GRID = SpaceTimeGrid()
Q_EXACT = ParameterVector()
OBS_X = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
OBS_T = (5.0, 6.0, 7.0, 8.0, 9.0, 10.0)


def synthetic(q=Q_EXACT, grid=GRID):
    blank = ObservationSet(OBS_X, OBS_T, np.zeros((6, 6)))
    return blank.with_values(sample_observations(solve_forward(q, grid), blank))


def near_table1(rng, spread=0.1):
    x = Q_EXACT.to_array()
    return Q_EXACT.with_array(x * (1 + spread * rng.uniform(-1, 1, x.size)))


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


@pytest.fixture(scope="module")
def data():
    return synthetic()


def test_sources_vanish_on_noiseless_data(data):
    field = solve_forward(Q_EXACT, GRID)
    assert not np.any(assemble_sources(field, data, GRID).values)


def test_single_interior_residual_source(data):
    field = solve_forward(Q_EXACT, GRID)
    rho = 0.37
    vals = data.values.copy()
    vals[2, 2] -= rho  # x = 3, t = 7, both node-aligned
    b = assemble_sources(field, data.with_values(vals), GRID).values
    i, k = 40, 1200
    expected = misfit_scale(data, GRID) * 2 * rho / (GRID.dx * GRID.dt)
    assert b[i, k] == pytest.approx(expected, rel=1e-12)
    b[i, k] = 0.0
    assert not np.any(b)


def test_boundary_source_uses_half_cell(data):
    field = solve_forward(Q_EXACT, GRID)
    vals = data.values.copy()
    vals[0, 0] -= 1.0  # x = 1 is the left boundary node
    b = assemble_sources(field, data.with_values(vals), GRID).values
    expected = misfit_scale(data, GRID) * 2 / (0.5 * GRID.dx * GRID.dt)
    assert b[0, 800] == pytest.approx(expected, rel=1e-12)


def test_sources_linear_in_residual(data):
    q = near_table1(np.random.default_rng(1))
    field = solve_forward(q, GRID)
    y = sample_observations(field, data)
    b1 = assemble_sources(field, data, GRID).values
    b2 = assemble_sources(field, data.with_values(y - 2 * (y - data.values)), GRID).values
    assert np.allclose(b2, 2 * b1, rtol=1e-12, atol=0)


def test_zero_sources_give_zero_adjoint(data):
    field = solve_forward(Q_EXACT, GRID)
    src = assemble_sources(field, data, GRID)
    psi = solve_adjoint(field, Q_EXACT, src, GRID).values
    assert psi.shape == (101, 4601) and not np.any(psi)


def test_terminal_slice_zero(data):
    q = near_table1(np.random.default_rng(2))
    field = solve_forward(q, GRID)
    psi = solve_adjoint(field, q, assemble_sources(field, data, GRID), GRID).values
    assert not np.any(psi[:, -1]) and np.any(psi[:, 0])


def test_duality_pure_diffusion():
    rng = np.random.default_rng(5)
    q = ParameterVector(Q_EXACT.params, tuple(rng.uniform(0.5, 2, 6)))
    field = solve_forward(q, GRID, rate_scale=0.0)
    obs = ObservationSet(OBS_X, OBS_T, rng.uniform(0, 3, (6, 6)))
    src = assemble_sources(field, obs, GRID)
    Psi = solve_adjoint(field, q, src, GRID, rate_scale=0.0).values
    # pure diffusion is linear, so solving from the perturbation gives the tangent field
    dq = ParameterVector(q.params, tuple(rng.uniform(0, 1, 6)))
    dy = solve_forward(dq, GRID, rate_scale=0.0).values
    w = GRID.x_weights()[:, None] * GRID.t_weights()[None, :]
    lhs = np.sum(w * src.values * dy)
    rhs = -np.sum(GRID.x_weights() * dy[:, 0] * Psi[:, 0])  # gradient = -Psi(., t0)
    assert lhs == pytest.approx(rhs, rel=1e-3)


def test_gradient_zero_at_truth(data):
    g, J = gradient(Q_EXACT, data, GRID)
    assert J == 0.0
    assert np.linalg.norm(g) <= 1e-8 * max(1.0, np.linalg.norm(Q_EXACT.to_array()))


def test_fd_gradient_zero_at_truth(data):
    # vanishes like step**2: halving the step roughly quarters it
    coarse = np.linalg.norm(fd_gradient(Q_EXACT, data, GRID, step=2e-6))
    fine = np.linalg.norm(fd_gradient(Q_EXACT, data, GRID, step=1e-6))
    assert fine <= 0.3 * coarse and fine <= 1e-5


def test_fd_oracle_on_quadratic():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    x = np.array([0.3, -1.2])
    g = fd_gradient_fn(lambda v: float(v @ A @ v), x, step=1e-4)
    assert np.allclose(g, 2 * A @ x, rtol=0, atol=1e-9)
    with pytest.raises(Exception):
        fd_gradient_fn(lambda v: 0.0, x, step=0.0)


def test_adjoint_matches_fd_twenty_points(data):
    rng = np.random.default_rng(2024)
    worst_cos, worst_rel = 1.0, 0.0
    for _ in range(20):
        q = near_table1(rng)
        g, _ = gradient(q, data, GRID)
        fd = fd_gradient(q, data, GRID)
        worst_cos = min(worst_cos, cosine(g, fd))
        worst_rel = max(worst_rel, float(np.max(np.abs(g - fd) / np.abs(fd))))
    assert worst_cos >= 0.999
    assert worst_rel <= 1e-2


def test_gradient_scales_with_residuals(data):
    q = near_table1(np.random.default_rng(7))
    field = solve_forward(q, GRID)
    y = sample_observations(field, data)
    g1, _ = gradient(q, data, GRID)
    g3, _ = gradient(q, data.with_values(y - 3.0 * (y - data.values)), GRID)
    assert np.allclose(g3, 3.0 * g1, rtol=1e-12, atol=0)


def test_gradient_continuity(data):
    q = near_table1(np.random.default_rng(8))
    g1, _ = gradient(q, data, GRID)
    g2, _ = gradient(q.with_array(q.to_array() + 1e-8), data, GRID)
    assert np.all(np.abs(g2 - g1) <= 1e-4 * np.abs(g1))


def test_sensitivity_zero_perturbation():
    assert not np.any(solve_sensitivity(Q_EXACT, np.zeros(11), GRID).values)


def _three_ways(q, dq, obs, grid, eps=1e-5):
    g, _ = gradient(q, obs, grid)
    adj = float(g @ dq)
    sens = sensitivity_derivative(q, dq, obs, grid)
    x = q.to_array()
    sec = (misfit(q.with_array(x + eps * dq), obs, grid)[0]
           - misfit(q.with_array(x - eps * dq), obs, grid)[0]) / (2 * eps)
    return adj, sens, sec


def test_triple_agreement(data):
    rng = np.random.default_rng(11)
    for _ in range(3):
        q = near_table1(rng)
        dq = rng.normal(size=11)
        dq /= np.linalg.norm(dq)
        adj, sens, sec = _three_ways(q, dq, data, GRID)
        for a, b in ((adj, sens), (adj, sec), (sens, sec)):
            assert abs(a - b) <= 1e-2 * abs(b)


def test_sensitivity_matches_secant_closely(data):
    q = near_table1(np.random.default_rng(12))
    dq = np.eye(11)[4]
    _, sens, sec = _three_ways(q, dq, data, GRID)
    assert sens == pytest.approx(sec, rel=1e-5)


def test_adjoint_secant_gap_shrinks_under_refinement():
    rng = np.random.default_rng(13)
    q = near_table1(rng)
    dq = rng.normal(size=11)
    dq /= np.linalg.norm(dq)
    gaps = []
    for grid in (GRID, GRID.refined(2, 4)):
        obs = synthetic(Q_EXACT, grid)
        adj, _, sec = _three_ways(q, dq, obs, grid)
        gaps.append(abs(adj - sec) / abs(sec))
    assert gaps[1] < gaps[0]
