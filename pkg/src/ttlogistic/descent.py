"""Minimum-error gradient descent with box projection and backtracking."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adjoint import assemble_gradient, assemble_sources, solve_adjoint
from .errors import InvalidArgumentError, NumericalError, StalledError
from .forward import ObservationSet, SpaceTimeGrid, misfit, misfit_scale
from .model import ParameterVector

ALPHA_RULES = ("minimal-error-squared", "literal")


@dataclass
class DescentSettings:
    epsilon: float | None = None  # None: 1e-10 * scale * sum(F**2)
    max_iter: int = 5000
    alpha_rule: str = "minimal-error-squared"
    backtracking: bool = True
    shrink: float = 0.5
    max_halvings: int = 30
    scaling: str = "box"  # "box": descend in box-normalized coordinates; "none": raw

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon <= 0:
            raise InvalidArgumentError("epsilon must be > 0")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be >= 1")
        if self.alpha_rule not in ALPHA_RULES:
            raise InvalidArgumentError(f"alpha_rule must be one of {ALPHA_RULES}")
        if self.scaling not in ("box", "none"):
            raise InvalidArgumentError("scaling must be 'box' or 'none'")
        if not 0 < self.shrink < 1:
            raise InvalidArgumentError("shrink must lie in (0, 1)")


@dataclass
class DescentTrace:
    q: list = field(default_factory=list)
    J: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    status: str = "running"
    n_forward: int = 0
    n_gradient: int = 0
    error: dict | None = None

    def append(self, q, J, gnorm, alpha=np.nan):
        self.q.append(np.array(q, dtype=float))
        self.J.append(float(J))
        self.grad_norm.append(float(gnorm))
        self.alpha.append(float(alpha))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "J", "grad_norm", "alpha"])
            for i, row in enumerate(zip(self.J, self.grad_norm, self.alpha)):
                w.writerow([i] + [repr(v) for v in row])
        return path


def step_size(J_val: float, grad_norm: float, rule: str = "minimal-error-squared") -> float:
    """Descent parameter: ``2J/|g|**2`` (default) or the literal ``2J/|g|``."""
    if grad_norm <= 0:
        raise StalledError("zero gradient: stationary point")
    if rule == "minimal-error-squared":
        return 2.0 * J_val / grad_norm**2
    if rule == "literal":
        return 2.0 * J_val / grad_norm
    raise InvalidArgumentError(f"unknown alpha rule {rule!r}")


def project_box(q, lower, upper) -> np.ndarray:
    return np.clip(np.asarray(q, dtype=float), lower, upper)


def descend(value_and_grad, value, x0, lower, upper, settings: DescentSettings,
            epsilon: float, trace: DescentTrace | None = None):
    """Projected descent on a generic objective.

    ``value_and_grad(x) -> (J, g)`` and ``value(x) -> J``.  Returns the final
    point and the trace; numerical failures are re-raised with ``.trace``
    attached.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if settings.scaling == "box":
        metric = (upper - lower) ** 2
    else:
        metric = np.ones_like(lower)
    trace = DescentTrace() if trace is None else trace
    x = project_box(x0, lower, upper)
    try:
        J = value(x)
        trace.n_forward += 1
        for it in range(settings.max_iter):
            if not np.isfinite(J):
                trace.append(x, J, np.nan)
                trace.status = "diverged"
                return x, trace
            if J < epsilon:
                trace.append(x, J, np.nan)
                trace.status = "converged"
                return x, trace
            # the objective caches the last solve, so this adds only the adjoint
            J, g = value_and_grad(x)
            trace.n_gradient += 1
            # gradient norm in the (possibly scaled) descent coordinates
            gnorm = float(np.sqrt(np.sum(metric * g * g)))
            if gnorm == 0:
                trace.append(x, J, gnorm)
                trace.status = "stalled"
                return x, trace
            alpha = step_size(J, gnorm, settings.alpha_rule)
            trace.append(x, J, gnorm, alpha)
            direction = metric * g
            x_new = project_box(x - alpha * direction, lower, upper)
            if settings.backtracking:
                J_new = value(x_new)
                trace.n_forward += 1
                halvings = 0
                while not (J_new < J):
                    if halvings == settings.max_halvings:
                        trace.status = "stalled"
                        return x, trace
                    alpha *= settings.shrink
                    halvings += 1
                    x_new = project_box(x - alpha * direction, lower, upper)
                    J_new = value(x_new)
                    trace.n_forward += 1
                trace.alpha[-1] = alpha
            else:
                J_new = value(x_new)
                trace.n_forward += 1
            x, J = x_new, J_new
        trace.append(x, J, np.nan)
        trace.status = "converged" if J < epsilon else "iter-cap"
        return x, trace
    except NumericalError as exc:
        trace.status = "failed"
        trace.error = exc.to_dict()
        exc.trace = trace
        raise


class MisfitObjective:
    """Misfit and adjoint gradient over flat parameter vectors.

    Keeps the last forward field so that an accepted trial point is not
    solved twice.
    """

    def __init__(self, template: ParameterVector, obs: ObservationSet, grid: SpaceTimeGrid):
        self.template = template
        self.obs = obs
        self.grid = grid
        self._last = None

    def _solve(self, x):
        key = np.asarray(x, dtype=float).tobytes()
        if self._last is not None and self._last[0] == key:
            return self._last[1:]
        q = self.template.with_array(x)
        J, fld = misfit(q, self.obs, self.grid)
        self._last = (key, q, J, fld)
        return q, J, fld

    def value(self, x) -> float:
        return self._solve(x)[1]

    def value_and_grad(self, x):
        q, J, fld = self._solve(x)
        src = assemble_sources(fld, self.obs, self.grid)
        psi = solve_adjoint(fld, q, src, self.grid)
        return J, assemble_gradient(fld, psi, q, self.grid)


def default_epsilon(obs: ObservationSet, grid: SpaceTimeGrid) -> float:
    return 1e-10 * misfit_scale(obs, grid) * float(np.sum(obs.values**2))


def minimize_gradient(q0: ParameterVector, obs: ObservationSet, grid: SpaceTimeGrid,
                      box, settings: DescentSettings | None = None):
    """Gradient method of minimum errors started at ``q0``; returns ``(q, trace)``."""
    settings = settings or DescentSettings()
    eps = settings.epsilon if settings.epsilon is not None else default_epsilon(obs, grid)
    x0 = q0.to_array()
    if np.any(x0 < box.lower - 1e-12) or np.any(x0 > box.upper + 1e-12):
        raise InvalidArgumentError("starting point outside the box")
    obj = MisfitObjective(q0, obs, grid)
    x, trace = descend(obj.value_and_grad, obj.value, x0, box.lower, box.upper, settings, eps)
    return q0.with_array(x), trace
