"""Continuous-adjoint gradient of the misfit and its verification oracles.

The adjoint Psi solves, backward from Psi(x, T) = 0,

    dPsi/dt = -d Psi_xx - P(y) Psi + b(x, t),     P = dmu/dy,

with no-flux ends, where b carries the observation residuals as discrete
Dirac masses.  The gradient is then

    dJ/dd      = -int int y_xx Psi dx dt
    dJ/dphi_m  = -int int dmu/dphi_m Psi dx dt
    dJ/dpsi    = -Psi(x, t0)   (pulled back through the anchor interpolation)

Everything is discretized after the fact (trapezoidal quadrature, the same
explicit stencil as the forward solver), so agreement with finite
differences is at discretization level rather than round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidArgumentError
from .forward import (
    Field,
    ObservationSet,
    SpaceTimeGrid,
    _bilinear_stencil,
    _linear_steps,
    _write_field_csv,
    laplacian,
    misfit,
    misfit_scale,
    sample_field,
    sample_observations,
)
from .model import (
    ParameterVector,
    interpolate_initial,
    interpolation_matrix,
    reaction_dparams,
    reaction_dy,
)


@dataclass(frozen=True, eq=False)
class AdjointField:
    values: np.ndarray  # (nx_grid, nt + 1)
    grid: SpaceTimeGrid

    def to_csv(self, path):
        return _write_field_csv(path, self.grid, self.values)


@dataclass(frozen=True, eq=False)
class SourceField:
    values: np.ndarray  # (nx_grid, nt + 1)
    grid: SpaceTimeGrid


def assemble_sources(field: Field, obs: ObservationSet, grid: SpaceTimeGrid) -> SourceField:
    """Discretize b = sum 2 * scale * (y - F) delta(t - t_k) delta(x - x_i).

    Each point mass is split bilinearly over its enclosing cell and divided
    by the local cell area (half width at the two boundary nodes).
    """
    resid = sample_observations(field, obs) - obs.values
    weight = 2.0 * misfit_scale(obs, grid) * resid
    X, Tt = np.meshgrid(obs.distances, obs.times, indexing="ij")
    i0, k0, ax, at = _bilinear_stencil(grid, X, Tt)
    b = np.zeros((grid.nx_grid, grid.nt + 1))
    for di, wx in ((0, 1 - ax), (1, ax)):
        for dk, wt in ((0, 1 - at), (1, at)):
            np.add.at(b, (i0 + di, k0 + dk), weight * wx * wt)
    b /= grid.x_weights()[:, None] * grid.dt
    return SourceField(b, grid)


def solve_adjoint(field: Field, q: ParameterVector, sources: SourceField,
                  grid: SpaceTimeGrid, *, rate_scale: float = 1.0) -> AdjointField:
    """March the adjoint problem from T back to t0 with the forward stencil.

    The step from level k + 1 to k uses P at the stored forward state
    y(., t_k) and injects the source held at level k.
    """
    grid.check_cfl(q.params.d)
    dt = grid.dt
    P = rate_scale * reaction_dy(field.values, grid.t[None, :], q.params)  # (nx, nt+1)
    b = sources.values
    out = np.empty((grid.nt + 1, grid.nx_grid))
    out[0] = -dt * b[:, grid.nt]  # zero unless an observation sits at T
    coef = np.ascontiguousarray((dt * P[:, -2::-1]).T)  # levels nt-1 .. 0
    forcing = np.ascontiguousarray((-dt * b[:, -2::-1]).T)  # levels nt-1 .. 0
    bad = _linear_steps(out, q.params.d * dt / grid.dx**2, coef, forcing)
    if bad >= 0:
        raise DivergenceError(f"adjoint diverged at backward step {bad}", step=int(bad))
    return AdjointField(out[::-1].T.copy(), grid)


def assemble_gradient(field: Field, psi: AdjointField, q: ParameterVector,
                      grid: SpaceTimeGrid, *, rate_scale: float = 1.0) -> np.ndarray:
    w = grid.x_weights()[:, None] * grid.t_weights()[None, :]
    y = field.values
    Psi = psi.values
    g_d = -np.sum(w * laplacian(y, grid.dx) * Psi)
    partials = reaction_dparams(y, grid.t[None, :], q.params)
    g_phi = [-rate_scale * np.sum(w * dp * Psi) for dp in partials]
    # chain rule through the anchor interpolation
    M = interpolation_matrix(q.anchor_positions, grid.x)
    g_psi = M.T @ (-grid.x_weights() * Psi[:, 0])
    return np.concatenate([[g_d], g_phi, g_psi])


def gradient(q: ParameterVector, obs: ObservationSet, grid: SpaceTimeGrid):
    """Adjoint gradient in flattening order; returns ``(grad, J)``."""
    J, field = misfit(q, obs, grid)
    src = assemble_sources(field, obs, grid)
    psi = solve_adjoint(field, q, src, grid)
    return assemble_gradient(field, psi, q, grid), J


def solve_sensitivity(q: ParameterVector, dq, grid: SpaceTimeGrid,
                      field: Field | None = None) -> Field:
    """Linearized (tangent) problem for the perturbation ``dq`` in flat order."""
    dq = np.asarray(dq, dtype=float)
    if dq.shape != (q.p,):
        raise InvalidArgumentError(f"perturbation must have {q.p} entries")
    if field is None:
        from .forward import solve_forward
        field = solve_forward(q, grid)
    grid.check_cfl(q.params.d)
    dt = grid.dt
    y = field.values[:, :-1]
    t = grid.t[None, :-1]
    P = reaction_dy(y, t, q.params)
    forcing = dq[0] * laplacian(y, grid.dx)
    for dp, dphi in zip(reaction_dparams(y, t, q.params), dq[1:5]):
        forcing = forcing + dphi * dp
    out = np.empty((grid.nt + 1, grid.nx_grid))
    out[0] = interpolate_initial(dq[5:], q.anchor_positions, grid.x)
    bad = _linear_steps(out, q.params.d * dt / grid.dx**2,
                        np.ascontiguousarray((dt * P).T), np.ascontiguousarray((dt * forcing).T))
    if bad >= 0:
        raise DivergenceError(f"sensitivity diverged at step {bad}", step=int(bad))
    return Field(out.T, grid)


def sensitivity_derivative(q: ParameterVector, dq, obs: ObservationSet,
                           grid: SpaceTimeGrid) -> float:
    """Directional derivative of J along ``dq`` via the tangent problem."""
    from .forward import solve_forward
    field = solve_forward(q, grid)
    dy = solve_sensitivity(q, dq, grid, field)
    X, Tt = np.meshgrid(obs.distances, obs.times, indexing="ij")
    resid = sample_observations(field, obs) - obs.values
    return float(2.0 * misfit_scale(obs, grid) * np.sum(resid * sample_field(dy.values, grid, X, Tt)))


def fd_gradient_fn(fun, x, step: float = 1e-6, lower=None) -> np.ndarray:
    """Central differences of ``fun`` with per-coordinate step ``step*(1+|x_i|)``.

    Coordinates whose backward point would fall below ``lower`` use a
    forward difference instead.
    """
    if step <= 0:
        raise InvalidArgumentError("step must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = step * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        if lower is not None and xm[i] < lower[i]:
            g[i] = (fun(xp) - fun(x)) / h
        else:
            g[i] = (fun(xp) - fun(xm)) / (2 * h)
    return g


def admissible_lower(q: ParameterVector) -> np.ndarray:
    """Hard lower limits on each flat coordinate (d, psi >= 0; K_cap, beta1 > 0)."""
    lower = np.full(q.p, -np.inf)
    lower[[0, 1, 2]] = 0.0
    lower[5:] = 0.0
    return lower


def fd_gradient(q: ParameterVector, obs: ObservationSet, grid: SpaceTimeGrid,
                step: float = 1e-6) -> np.ndarray:
    """Finite-difference gradient of the discrete misfit (2p forward solves)."""
    def J(v):
        return misfit(q.with_array(v), obs, grid)[0]
    return fd_gradient_fn(J, q.to_array(), step, admissible_lower(q))
