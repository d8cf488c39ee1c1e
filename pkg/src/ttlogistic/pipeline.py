"""Synthetic calibration experiment: data generation, TT + gradient inversion, reports."""

from __future__ import annotations

import copy
import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .descent import DescentSettings, DescentTrace, default_epsilon, minimize_gradient
from .errors import InvalidArgumentError
from .forward import ObservationSet, SpaceTimeGrid, misfit, sample_observations, solve_forward
from .model import (
    DEFAULT_ANCHORS,
    DEFAULT_PSI,
    SCALAR_NAMES,
    TIME_ORIGIN,
    LogisticParams,
    ParameterVector,
    growth_rate,
    interpolate_initial,
)
from .ttopt import ParameterBox, TTResult, tt_minimize

SCHEMA_VERSION = 1


@dataclass
class TTSettings:
    n: int = 32
    r_max: int = 4
    n_sweeps: int = 8
    seed: int = 0
    refresh: str = "always"
    local_search: bool = True
    threads: int | None = None  # None: PDE_TTOPT_THREADS or core count


@dataclass
class ExperimentSpec:
    exact: ParameterVector = field(default_factory=ParameterVector)
    grid: SpaceTimeGrid = field(default_factory=SpaceTimeGrid)
    distances: tuple = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    times: tuple = (5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
    sigma: float = 0.0
    inverse_crime_guard: bool = False
    box_lower: tuple = (0.0, 10.0, 0.5, 0.1, 0.5)
    box_upper: tuple = (0.1, 50.0, 3.0, 1.0, 3.0)
    psi_bounds: tuple = (0.0, 5.0)
    start: tuple | None = None  # initial guess for gradient-only runs; None: box centre
    tt: TTSettings = field(default_factory=TTSettings)
    descent: DescentSettings = field(default_factory=DescentSettings)
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidArgumentError("sigma must be >= 0")
        if not self.grid.contains(np.asarray(self.distances), np.asarray(self.times)):
            raise InvalidArgumentError("observation schedule outside the grid domain")

    def box(self) -> ParameterBox:
        n_psi = len(self.exact.psi_anchors)
        lo = np.concatenate([self.box_lower, np.full(n_psi, self.psi_bounds[0])])
        hi = np.concatenate([self.box_upper, np.full(n_psi, self.psi_bounds[1])])
        return ParameterBox(lo, hi, self.tt.n)

    def to_dict(self) -> dict:
        p = self.exact.params
        return {
            "schema_version": SCHEMA_VERSION,
            "exact": {**asdict(p), "psi": list(self.exact.psi_anchors),
                      "anchor_positions": list(self.exact.anchor_positions)},
            "grid": asdict(self.grid),
            "observations": {"distances": list(self.distances), "times": list(self.times)},
            "noise": {"sigma": self.sigma, "inverse_crime_guard": self.inverse_crime_guard},
            "box": {"lower": list(self.box_lower), "upper": list(self.box_upper),
                    "psi": list(self.psi_bounds)},
            "start": None if self.start is None else list(self.start),
            "ttopt": asdict(self.tt),
            "descent": asdict(self.descent),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = copy.deepcopy(d)
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise InvalidArgumentError(f"unsupported schema_version {version}")
        kw = {}
        if "exact" in d:
            ex = dict(d["exact"])
            psi = ex.pop("psi", DEFAULT_PSI)
            anchors = ex.pop("anchor_positions", DEFAULT_ANCHORS)
            kw["exact"] = ParameterVector(LogisticParams(**ex), tuple(psi), tuple(anchors))
        if "grid" in d:
            kw["grid"] = SpaceTimeGrid(**d["grid"])
        obs = d.get("observations", {})
        if "distances" in obs:
            kw["distances"] = tuple(obs["distances"])
        if "times" in obs:
            kw["times"] = tuple(obs["times"])
        noise = d.get("noise", {})
        if "sigma" in noise:
            kw["sigma"] = float(noise["sigma"])
        if "inverse_crime_guard" in noise:
            kw["inverse_crime_guard"] = bool(noise["inverse_crime_guard"])
        box = d.get("box", {})
        if "lower" in box:
            kw["box_lower"] = tuple(box["lower"])
        if "upper" in box:
            kw["box_upper"] = tuple(box["upper"])
        if "psi" in box:
            kw["psi_bounds"] = tuple(box["psi"])
        if d.get("start") is not None:
            kw["start"] = tuple(d["start"])
        if "ttopt" in d:
            kw["tt"] = TTSettings(**d["ttopt"])
        if "descent" in d:
            kw["descent"] = DescentSettings(**d["descent"])
        if "seed" in d:
            kw["seed"] = int(d["seed"])
        return cls(**kw)


def apply_overrides(d: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings to a spec dict; values parse as JSON
    when possible, otherwise stay strings."""
    d = copy.deepcopy(d)
    for item in overrides or ():
        if "=" not in item:
            raise InvalidArgumentError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise InvalidArgumentError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = value
    return d


def load_spec(path=None, overrides=None) -> ExperimentSpec:
    """Spec from a JSON file (or the built-in reference) with overrides on top."""
    base = ExperimentSpec().to_dict()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot read spec {path}: {exc}") from exc
        base = _merge(base, user)
    return ExperimentSpec.from_dict(apply_overrides(base, overrides))


def _merge(base: dict, user: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in user.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _schedule(spec: ExperimentSpec) -> ObservationSet:
    d = np.asarray(spec.distances, dtype=float)
    t = np.asarray(spec.times, dtype=float)
    return ObservationSet(d, t, np.zeros((d.size, t.size)), spec.sigma)


def generate_synthetic(spec: ExperimentSpec) -> ObservationSet:
    """Observations of the exact model; multiplicative Gaussian noise if sigma > 0."""
    grid = spec.grid.refined() if spec.inverse_crime_guard else spec.grid
    obs = _schedule(spec)
    F = sample_observations(solve_forward(spec.exact, grid), obs)
    if spec.sigma > 0:
        rng = np.random.default_rng(spec.seed)
        F = F * (1.0 + spec.sigma * rng.standard_normal(F.shape))
    return obs.with_values(F)


def relative_error(predicted, exact) -> float:
    predicted = np.asarray(predicted, dtype=float)
    exact = np.asarray(exact, dtype=float)
    norm = np.linalg.norm(exact)
    if norm == 0:
        raise InvalidArgumentError("exact values have zero norm")
    return float(np.linalg.norm(predicted - exact) / norm)


def rate_samples(grid: SpaceTimeGrid, count: int = 200) -> np.ndarray:
    return np.linspace(max(grid.t0, TIME_ORIGIN), grid.T, count)


def error_summary(q: ParameterVector, exact: ParameterVector, grid: SpaceTimeGrid) -> dict:
    ts = rate_samples(grid)
    rel = {name: abs(a - b) / abs(b) if b != 0 else abs(a - b)
           for name, a, b in zip(SCALAR_NAMES, q.params.as_array(), exact.params.as_array())}
    return {
        "relative_errors": rel,
        "E_psi": relative_error(q.psi_anchors, exact.psi_anchors),
        "E_r": relative_error(growth_rate(ts, q.params), growth_rate(ts, exact.params)),
    }


@dataclass
class InversionResult:
    method: str
    q_exact: ParameterVector
    q_tt: ParameterVector | None
    q_final: ParameterVector
    J_tt: float | None
    J_final: float
    tt: TTResult | None
    descent: DescentTrace | None
    epsilon: float | None
    wall_time: dict = field(default_factory=dict)
    grid: SpaceTimeGrid = field(default_factory=SpaceTimeGrid)

    @property
    def evals_tt(self) -> int:
        return 0 if self.tt is None else self.tt.evals

    def summary(self) -> dict:
        """JSON-ready summary; deterministic (timing kept out)."""
        out = {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "parameter_names": self.q_exact.names(),
            "q_exact": self.q_exact.to_array().tolist(),
            "q_final": self.q_final.to_array().tolist(),
            "J_final": self.J_final,
            "final": error_summary(self.q_final, self.q_exact, self.grid),
            "psi_note": "exact psi anchors are an artifact default profile",
        }
        if self.q_tt is not None:
            out["q_tt"] = self.q_tt.to_array().tolist()
            out["J_tt"] = self.J_tt
            out["tt"] = error_summary(self.q_tt, self.q_exact, self.grid)
            out["tt_evals"] = self.tt.evals
            out["tt_budget_exhausted"] = self.tt.budget_exhausted
            out["tt_settings"] = self.tt.settings
        if self.descent is not None:
            out["gradient_iterations"] = max(len(self.descent.J) - 1, 0)
            out["gradient_pairs"] = self.descent.n_gradient
            out["gradient_extra_forward"] = self.descent.n_forward
            out["gradient_status"] = self.descent.status
            out["epsilon"] = self.epsilon
        return out


def random_baseline(objective, box: ParameterBox, n_samples: int = 10000, seed: int = 0,
                    on_grid: bool = False) -> float:
    """Best objective value over uniform random samples of the box (or its grid)."""
    rng = np.random.default_rng(seed)
    if on_grid:
        pts = box.point(rng.integers(0, box.n, size=(n_samples, box.p)))
    else:
        pts = rng.uniform(box.lower, box.upper, size=(n_samples, box.p))
    return float(min(objective(x) for x in pts))


def inverse_objective(spec: ExperimentSpec, data: ObservationSet):
    template = spec.exact

    def J(x):
        return misfit(template.with_array(x), data, spec.grid)[0]
    return J


def combined_invert(data: ObservationSet, spec: ExperimentSpec,
                    method: str = "combined") -> InversionResult:
    """TT global search, then minimum-error gradient descent from its best point."""
    if method not in ("tt", "grad", "combined"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    box = spec.box()
    timing = {}
    q_tt = J_tt = tt_res = None
    if method in ("tt", "combined"):
        t0 = time.perf_counter()
        s = spec.tt
        tt_res = tt_minimize(inverse_objective(spec, data), box, r_max=s.r_max,
                             n_sweeps=s.n_sweeps, seed=s.seed, local_search=s.local_search,
                             threads=s.threads, refresh=s.refresh)
        timing["tt_seconds"] = time.perf_counter() - t0
        q_tt = spec.exact.with_array(tt_res.q_best)
        J_tt = tt_res.J_best
    trace = eps = None
    if method == "tt":
        q_final, J_final = q_tt, J_tt
    else:
        if q_tt is not None:
            q0 = q_tt
        elif spec.start is not None:
            q0 = spec.exact.with_array(spec.start)
        else:
            q0 = spec.exact.with_array(0.5 * (box.lower + box.upper))
        eps = (spec.descent.epsilon if spec.descent.epsilon is not None
               else default_epsilon(data, spec.grid))
        t0 = time.perf_counter()
        q_final, trace = minimize_gradient(q0, data, spec.grid, box, spec.descent)
        timing["gradient_seconds"] = time.perf_counter() - t0
        J_final = trace.J[-1]
    return InversionResult(method, spec.exact, q_tt, q_final, J_tt, J_final, tt_res, trace,
                           eps, timing, spec.grid)


def _write_csv(path: Path, header, rows) -> Path:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                            for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def export_report(result: InversionResult, outdir) -> dict:
    """Write result.json, timing.json, traces and figure curves; returns the paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    grid = result.grid
    p = out / "result.json"
    try:
        p.write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
        (out / "timing.json").write_text(json.dumps(result.wall_time, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc}") from exc
    paths["result"] = p
    if result.tt is not None:
        paths["trace_tt"] = result.tt.trace_to_csv(out / "trace_tt.csv")
    if result.descent is not None:
        paths["trace_grad"] = result.descent.to_csv(out / "trace_grad.csv")

    ts = rate_samples(grid)
    recon = {"exact": result.q_exact, "tt": result.q_tt, "final": result.q_final}
    recon = {k: v for k, v in recon.items() if v is not None}
    cols = list(recon)
    rates = {k: growth_rate(ts, v.params) for k, v in recon.items()}
    paths["r_curve"] = _write_csv(out / "r_curve.csv", ["t"] + [f"r_{c}" for c in cols],
                                  zip(ts, *(rates[c] for c in cols)))
    anchors = result.q_exact.anchor_positions
    paths["psi"] = _write_csv(out / "psi.csv", ["x"] + [f"psi_{c}" for c in cols],
                              zip(anchors, *(recon[c].psi_anchors for c in cols)))
    x = grid.x
    prof = {c: interpolate_initial(recon[c].psi_anchors, anchors, x) for c in cols}
    paths["psi_profile"] = _write_csv(out / "psi_profile.csv", ["x"] + [f"psi_{c}" for c in cols],
                                      zip(x, *(prof[c] for c in cols)))
    # density profiles 1..5 hours after release
    hours = [h for h in range(1, 6) if grid.t0 + h <= grid.T]
    fields = {c: solve_forward(recon[c], grid) for c in ("exact", "final")}
    rows = []
    for h in hours:
        k = int(round(h / grid.dt))
        for i in range(grid.nx_grid):
            rows.append((h, x[i], fields["exact"].values[i, k], fields["final"].values[i, k]))
    paths["profiles"] = _write_csv(out / "profiles.csv",
                                   ["hours_after_release", "x", "y_exact", "y_predicted"], rows)
    return paths
