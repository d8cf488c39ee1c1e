"""Explicit finite-difference solver for the diffusive logistic IBVP.

Forward Euler in time, 3-point Laplacian in space, no-flux ends imposed by
ghost-node reflection (y[-1] = y[1], y[nx] = y[nx-2]).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import DivergenceError, InvalidArgumentError, StabilityError
from .model import ParameterVector, growth_rate, interpolate_initial

CFL_LIMIT = 0.5


@dataclass(frozen=True)
class SpaceTimeGrid:
    l: float = 1.0
    L: float = 6.0
    t0: float = 1.0
    T: float = 24.0
    nx_grid: int = 101
    nt: int = 4600

    def __post_init__(self):
        if not (self.l < self.L and self.t0 < self.T):
            raise InvalidArgumentError(f"empty domain in {self}")
        if self.nx_grid < 3 or self.nt < 1:
            raise InvalidArgumentError(f"need nx_grid >= 3 and nt >= 1, got {self}")

    @property
    def dx(self) -> float:
        return (self.L - self.l) / (self.nx_grid - 1)

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.nt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.l, self.L, self.nx_grid)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t0, self.T, self.nt + 1)

    def x_weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights in x."""
        w = np.full(self.nx_grid, self.dx)
        w[[0, -1]] *= 0.5
        return w

    def t_weights(self) -> np.ndarray:
        w = np.full(self.nt + 1, self.dt)
        w[[0, -1]] *= 0.5
        return w

    def refined(self, fx: int = 2, ft: int = 4) -> "SpaceTimeGrid":
        """Grid with dx / fx and dt / ft."""
        return SpaceTimeGrid(
            self.l, self.L, self.t0, self.T, (self.nx_grid - 1) * fx + 1, self.nt * ft
        )

    def max_stable_dt(self, d: float) -> float:
        return np.inf if d <= 0 else CFL_LIMIT * self.dx**2 / d

    def check_cfl(self, d: float) -> None:
        if d * self.dt / self.dx**2 > CFL_LIMIT * (1 + 1e-12):
            dt_max = self.max_stable_dt(d)
            raise StabilityError(
                f"CFL violated: d*dt/dx^2 = {d * self.dt / self.dx**2:.4g} > {CFL_LIMIT}; "
                f"max admissible dt = {dt_max:.6g}",
                max_dt=dt_max,
            )

    def contains(self, x, t) -> bool:
        tol = 1e-9
        return bool(
            np.all((x >= self.l - tol) & (x <= self.L + tol))
            and np.all((t >= self.t0 - tol) & (t <= self.T + tol))
        )


def _write_field_csv(path, grid: SpaceTimeGrid, values: np.ndarray) -> Path:
    path = Path(path)
    xs, ts = grid.x, grid.t
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "t", "y"])
            for i in range(grid.nx_grid):
                for k in range(grid.nt + 1):
                    w.writerow([repr(float(xs[i])), repr(float(ts[k])), repr(float(values[i, k]))])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


@dataclass(frozen=True, eq=False)
class Field:
    """Space-time array ``values[i, k] = y(x_i, t_k)`` of shape (nx_grid, nt + 1)."""

    values: np.ndarray
    grid: SpaceTimeGrid

    def to_csv(self, path) -> Path:
        return _write_field_csv(path, self.grid, self.values)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    distances: np.ndarray
    times: np.ndarray
    values: np.ndarray  # (Nx, K)
    sigma: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (d.size, t.size):
            raise InvalidArgumentError(f"values shape {v.shape} != ({d.size}, {t.size})")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("observation values must be finite")
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def n_x(self) -> int:
        return self.distances.size

    @property
    def n_t(self) -> int:
        return self.times.size

    def with_values(self, values) -> "ObservationSet":
        return ObservationSet(self.distances, self.times, values, self.sigma)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "t", "F"])
            for i, x in enumerate(self.distances):
                for k, t in enumerate(self.times):
                    w.writerow([repr(float(x)), repr(float(t)), repr(float(self.values[i, k]))])
        return path

    @classmethod
    def from_csv(cls, path, sigma: float = 0.0) -> "ObservationSet":
        rows = list(csv.DictReader(Path(path).open()))
        xs = sorted({float(r["x"]) for r in rows})
        ts = sorted({float(r["t"]) for r in rows})
        vals = np.full((len(xs), len(ts)), np.nan)
        for r in rows:
            vals[xs.index(float(r["x"])), ts.index(float(r["t"]))] = float(r["F"])
        return cls(np.array(xs), np.array(ts), vals, sigma)


@numba.njit(cache=True, nogil=True)
def _logistic_steps(out, lam, kcap, rates, dt, source, has_source):
    # out: (nt + 1, nx) with out[0] preset; returns first non-finite step or -1
    nsteps = rates.size
    nx = out.shape[1]
    for k in range(nsteps):
        r = rates[k]
        finite = True
        for i in range(nx):
            yi = out[k, i]
            left = out[k, i - 1] if i > 0 else out[k, 1]
            right = out[k, i + 1] if i < nx - 1 else out[k, nx - 2]
            v = yi + lam * (left - 2.0 * yi + right) + dt * r * yi * (1.0 - yi / kcap)
            if has_source:
                v += dt * source[k, i]
            if not np.isfinite(v):
                finite = False
            out[k + 1, i] = v
        if not finite:
            return k + 1
    return -1


@numba.njit(cache=True, nogil=True)
def _linear_steps(out, lam, coef, forcing):
    """z[m+1] = z[m] + lam * lap(z[m]) + coef[m] * z[m] + forcing[m].

    ``coef`` and ``forcing`` already carry the factor dt.
    """
    nsteps = coef.shape[0]
    nx = out.shape[1]
    for m in range(nsteps):
        finite = True
        for i in range(nx):
            zi = out[m, i]
            left = out[m, i - 1] if i > 0 else out[m, 1]
            right = out[m, i + 1] if i < nx - 1 else out[m, nx - 2]
            v = zi + lam * (left - 2.0 * zi + right) + coef[m, i] * zi + forcing[m, i]
            if not np.isfinite(v):
                finite = False
            out[m + 1, i] = v
        if not finite:
            return m + 1
    return -1


def laplacian(values: np.ndarray, dx: float) -> np.ndarray:
    """3-point second derivative along axis 0 with reflecting ghost nodes."""
    padded = np.concatenate([values[1:2], values, values[-2:-1]], axis=0)
    return (padded[:-2] - 2.0 * values + padded[2:]) / dx**2


def solve_forward(q: ParameterVector, grid: SpaceTimeGrid, *, rate_scale: float = 1.0,
                  source=None) -> Field:
    """Forward-Euler solution of the IBVP for parameters ``q``.

    ``rate_scale`` multiplies r(t) (0 switches the reaction off) and
    ``source(x, t)`` adds a forcing term; both exist for verification runs.
    """
    p = q.params
    grid.check_cfl(p.d)
    y0 = interpolate_initial(q.psi_anchors, q.anchor_positions, grid)
    out = np.empty((grid.nt + 1, grid.nx_grid))
    out[0] = y0
    rates = rate_scale * growth_rate(grid.t[:-1], p)
    if source is not None:
        X, Tt = np.meshgrid(grid.x, grid.t[:-1])
        src = np.asarray(source(X, Tt), dtype=float)
        has_source = True
    else:
        src = np.zeros((1, 1))
        has_source = False
    bad = _logistic_steps(out, p.d * grid.dt / grid.dx**2, p.K_cap, rates, grid.dt, src,
                          has_source)
    if bad >= 0:
        raise DivergenceError(f"non-finite state at step {bad} (t = {grid.t[bad]:.4g})",
                              step=int(bad))
    return Field(out.T, grid)


def _bilinear_stencil(grid: SpaceTimeGrid, x, t):
    """Cell corner indices and weights for points (x, t); arrays broadcast."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if not grid.contains(x, t):
        raise InvalidArgumentError(f"observation point outside [{grid.l},{grid.L}]x[{grid.t0},{grid.T}]")
    fx = np.clip((x - grid.l) / grid.dx, 0.0, grid.nx_grid - 1)
    ft = np.clip((t - grid.t0) / grid.dt, 0.0, grid.nt)
    # snap points within round-off of a node
    fx = np.where(np.abs(fx - np.round(fx)) < 1e-9, np.round(fx), fx)
    ft = np.where(np.abs(ft - np.round(ft)) < 1e-9, np.round(ft), ft)
    i0 = np.minimum(np.floor(fx).astype(int), grid.nx_grid - 2)
    k0 = np.minimum(np.floor(ft).astype(int), grid.nt - 1)
    ax = fx - i0
    at = ft - k0
    return i0, k0, ax, at


def sample_field(values: np.ndarray, grid: SpaceTimeGrid, x, t) -> np.ndarray:
    i0, k0, ax, at = _bilinear_stencil(grid, x, t)
    return ((1 - ax) * (1 - at) * values[i0, k0] + ax * (1 - at) * values[i0 + 1, k0]
            + (1 - ax) * at * values[i0, k0 + 1] + ax * at * values[i0 + 1, k0 + 1])


def sample_observations(field: Field, obs: ObservationSet) -> np.ndarray:
    """Model values at the observation points, shape (Nx, K)."""
    X, Tt = np.meshgrid(obs.distances, obs.times, indexing="ij")
    return sample_field(field.values, field.grid, X, Tt)


def misfit_scale(obs: ObservationSet, grid: SpaceTimeGrid) -> float:
    return (grid.T - grid.t0) * (grid.L - grid.l) / (obs.n_t * obs.n_x)


def misfit_from_samples(model: np.ndarray, obs: ObservationSet, grid: SpaceTimeGrid) -> float:
    return misfit_scale(obs, grid) * float(np.sum((model - obs.values) ** 2))


def misfit(q: ParameterVector, obs: ObservationSet, grid: SpaceTimeGrid):
    """Least-squares misfit J(q); returns ``(J, field)``."""
    field = solve_forward(q, grid)
    return misfit_from_samples(sample_observations(field, obs), obs, grid), field
