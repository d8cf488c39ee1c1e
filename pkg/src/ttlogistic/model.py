"""Diffusive logistic model: parameters, growth rate, reaction term and derivatives.

The growth rate is

    r(t) = b2/b1 - exp(-b1 (t - 1)) (b2/b1 - b3),

and the reaction term is mu(y, t) = r(t) y (1 - y / K_cap).  All functions
accept scalars or numpy arrays for ``t`` and ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError

# Model time origin: r(t) is written relative to t = 1 hour.
TIME_ORIGIN = 1.0

SCALAR_NAMES = ("d", "K_cap", "beta1", "beta2", "beta3")
DEFAULT_ANCHORS = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
DEFAULT_PSI = (2.0, 1.5, 1.0, 0.6, 0.3, 0.1)


@dataclass(frozen=True)
class LogisticParams:
    d: float = 0.01
    K_cap: float = 25.0
    beta1: float = 1.5
    beta2: float = 0.375
    beta3: float = 1.65

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError(f"non-finite parameter in {self}")
        if self.d < 0:
            raise InvalidArgumentError(f"d must be >= 0, got {self.d}")
        if self.K_cap <= 0:
            raise InvalidArgumentError(f"K_cap must be > 0, got {self.K_cap}")
        if self.beta1 <= 0:
            raise InvalidArgumentError(f"beta1 must be > 0, got {self.beta1}")

    def as_array(self) -> np.ndarray:
        return np.array([self.d, self.K_cap, self.beta1, self.beta2, self.beta3], dtype=float)


@dataclass(frozen=True)
class ParameterVector:
    """Unknown of the inverse problem.

    Flattening order is ``(d, K_cap, beta1, beta2, beta3, psi_1, ..., psi_Nx)``.
    ``anchor_positions`` locate the psi anchors in distance and are not part of
    the flat vector.
    """

    params: LogisticParams = field(default_factory=LogisticParams)
    psi_anchors: tuple = DEFAULT_PSI
    anchor_positions: tuple = DEFAULT_ANCHORS

    def __post_init__(self):
        psi = tuple(float(v) for v in self.psi_anchors)
        pos = tuple(float(v) for v in self.anchor_positions)
        object.__setattr__(self, "psi_anchors", psi)
        object.__setattr__(self, "anchor_positions", pos)
        if len(psi) != len(pos):
            raise InvalidArgumentError(
                f"{len(psi)} psi anchors but {len(pos)} anchor positions"
            )
        if not np.all(np.isfinite(psi)) or min(psi, default=0.0) < 0:
            raise InvalidArgumentError(f"psi anchors must be finite and >= 0, got {psi}")

    @property
    def p(self) -> int:
        return 5 + len(self.psi_anchors)

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.params.as_array(), np.asarray(self.psi_anchors)])

    def with_array(self, values) -> "ParameterVector":
        """Return a copy carrying the flat values ``values`` (same anchors)."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.p,):
            raise InvalidArgumentError(f"expected {self.p} values, got shape {values.shape}")
        params = LogisticParams(*(float(v) for v in values[:5]))
        return replace(self, params=params, psi_anchors=tuple(values[5:]))

    @classmethod
    def from_array(cls, values, anchor_positions=DEFAULT_ANCHORS) -> "ParameterVector":
        values = np.asarray(values, dtype=float)
        return cls(
            LogisticParams(*(float(v) for v in values[:5])),
            tuple(values[5:]),
            tuple(anchor_positions),
        )

    def names(self) -> list[str]:
        return list(SCALAR_NAMES) + [f"psi_{i + 1}" for i in range(len(self.psi_anchors))]


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidArgumentError("time must be finite")
    if np.any(t < TIME_ORIGIN - 1e-12):
        raise InvalidArgumentError(f"growth rate defined for t >= {TIME_ORIGIN}")
    return t


def growth_rate(t, params: LogisticParams):
    t = _check_time(t)
    ratio = params.beta2 / params.beta1
    return ratio - np.exp(-params.beta1 * (t - TIME_ORIGIN)) * (ratio - params.beta3)


def growth_rate_jacobian(t, params: LogisticParams):
    """Partial derivatives ``(dr/dbeta1, dr/dbeta2, dr/dbeta3)`` of the growth rate."""
    t = _check_time(t)
    b1, b2, b3 = params.beta1, params.beta2, params.beta3
    s = t - TIME_ORIGIN
    e = np.exp(-b1 * s)
    d_b1 = -(b2 / b1**2) * (1.0 - e) + s * e * (b2 / b1 - b3)
    d_b2 = (1.0 - e) / b1
    d_b3 = e
    return d_b1, d_b2, d_b3


def _check_state(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("density must be finite")
    return y


def reaction(y, t, params: LogisticParams):
    y = _check_state(y)
    return growth_rate(t, params) * y * (1.0 - y / params.K_cap)


def reaction_dy(y, t, params: LogisticParams):
    y = _check_state(y)
    return growth_rate(t, params) * (1.0 - 2.0 * y / params.K_cap)


def reaction_dparams(y, t, params: LogisticParams):
    """``(dmu/dK_cap, dmu/dbeta1, dmu/dbeta2, dmu/dbeta3)`` at density ``y``."""
    y = _check_state(y)
    r = growth_rate(t, params)
    shape = y * (1.0 - y / params.K_cap)
    d_b1, d_b2, d_b3 = growth_rate_jacobian(t, params)
    d_k = r * y**2 / params.K_cap**2
    return d_k, shape * d_b1, shape * d_b2, shape * d_b3


def _check_anchors(anchor_positions):
    pos = np.asarray(anchor_positions, dtype=float)
    if pos.ndim != 1 or pos.size < 2:
        raise InvalidArgumentError("need at least 2 anchors for interpolation")
    if np.any(np.diff(pos) <= 0):
        raise InvalidArgumentError("anchor positions must be strictly increasing")
    return pos


def interpolation_matrix(anchor_positions, x_nodes) -> np.ndarray:
    """Linear map from anchor values to nodal values (rows: nodes).

    Piecewise linear between anchors, constant beyond the outermost ones.
    """
    pos = _check_anchors(anchor_positions)
    x_nodes = np.asarray(x_nodes, dtype=float)
    eye = np.eye(pos.size)
    return np.stack([np.interp(x_nodes, pos, eye[j]) for j in range(pos.size)], axis=1)


def interpolate_initial(psi_anchors, anchor_positions, grid) -> np.ndarray:
    """Initial profile on the grid nodes of ``grid`` (or on an array of positions)."""
    pos = _check_anchors(anchor_positions)
    psi = np.asarray(psi_anchors, dtype=float)
    if psi.shape != pos.shape:
        raise InvalidArgumentError("psi anchors and anchor positions differ in length")
    x = getattr(grid, "x", grid)
    lo, hi = getattr(grid, "l", None), getattr(grid, "L", None)
    if lo is not None and (pos[0] < lo - 1e-12 or pos[-1] > hi + 1e-12):
        raise InvalidArgumentError(f"anchors {pos} outside [{lo}, {hi}]")
    return np.interp(np.asarray(x, dtype=float), pos, psi)
