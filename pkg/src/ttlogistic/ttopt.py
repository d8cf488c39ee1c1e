"""Tensor-train cross global minimizer on a uniform grid.

The objective J is sampled on an n^p grid over a box and mapped to
g = arccot(J), so the minimum of J is the largest element of the tensor G.
Sweeps alternate left-to-right and right-to-left across the p - 1 unfolding
interfaces.  At each interface a fiber submatrix of the current unfolding is
built from the neighbouring index sets, compressed to rank <= r_max, and
maxvol picks its dominant rows (or columns); these become the new interface
index set, topped up with grid-local improvements of the best candidate and
with the r_max best points inspected so far.  Index sets are thereby capped
at 2 r_max, which bounds each submatrix at 4 n r_max^2 entries.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DegenerateMatrixError, EvaluationError, InvalidArgumentError


@dataclass(frozen=True, eq=False)
class ParameterBox:
    lower: np.ndarray
    upper: np.ndarray
    n: int = 32

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidArgumentError("lower and upper must be 1-D of equal length")
        if np.any(lo >= hi):
            raise InvalidArgumentError(f"need lower < upper, got {lo} / {hi}")
        if self.n < 2:
            raise InvalidArgumentError("need n >= 2 nodes per axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def p(self) -> int:
        return self.lower.size

    @property
    def h(self) -> np.ndarray:
        return (self.upper - self.lower) / (self.n - 1)

    def point(self, multi_index) -> np.ndarray:
        idx = np.asarray(multi_index)
        pts = self.lower + idx * self.h
        # hit the upper endpoint exactly
        return np.where(idx == self.n - 1, self.upper, pts)

    def nearest_index(self, q) -> np.ndarray:
        i = np.rint((np.asarray(q, dtype=float) - self.lower) / self.h).astype(int)
        return np.clip(i, 0, self.n - 1)


def discretize_box(box: ParameterBox) -> list[np.ndarray]:
    """Per-axis grid coordinates ``a_j + i h_j``, endpoints included."""
    i = np.arange(box.n)
    return [np.where(i == box.n - 1, box.upper[j], box.lower[j] + i * box.h[j])
            for j in range(box.p)]


def map_g(J_val):
    """arccot(J) for J >= 0: pi/2 at J = 0, decreasing to 0 as J grows."""
    J = np.asarray(J_val, dtype=float)
    if np.any(J < 0) or np.any(np.isnan(J)):
        raise InvalidArgumentError("map_g needs J >= 0")
    return np.pi / 2 - np.arctan(J)


def maxvol(M, tol: float = 1e-2, max_iters: int = 200) -> np.ndarray:
    """Row indices of a dominant r x r submatrix of the tall matrix ``M``.

    On return every entry of ``M @ inv(M[rows])`` is at most ``1 + tol`` in
    magnitude.
    """
    A = np.asarray(M, dtype=float)
    n, r = A.shape
    if n < r:
        raise InvalidArgumentError(f"maxvol needs rows >= cols, got {A.shape}")
    if r == 0:
        return np.zeros(0, dtype=int)
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0 or s[-1] <= max(n, r) * np.finfo(float).eps * s[0]:
        raise DegenerateMatrixError(f"matrix of shape {A.shape} is rank deficient")
    P, _, _ = scipy.linalg.lu(A)
    rows = P.argmax(axis=0)[:r].copy()
    B = np.linalg.solve(A[rows].T, A.T).T
    for _ in range(max_iters):
        i, j = np.unravel_index(np.argmax(np.abs(B)), B.shape)
        if abs(B[i, j]) <= 1 + tol:
            break
        rows[j] = i
        # rank-one update of A @ inv(A[rows]) for the swap
        bj = B[:, j].copy()
        bi = B[i].copy()
        bi[j] -= 1.0
        B -= np.outer(bj, bi) / B[i, j]
    else:
        B = np.linalg.solve(A[rows].T, A.T).T
    return rows


@dataclass
class TTState:
    r_max: int
    left: list  # left[k]: (m, k) prefixes, k = 0..p
    right: list  # right[k]: (m, p - k) suffixes, k = 0..p
    cache: dict = field(default_factory=dict)
    best_index: tuple | None = None
    best_value: float = np.inf
    sweep: int = 0


@dataclass
class TTResult:
    q_best: np.ndarray
    J_best: float
    index_best: tuple
    evals: int
    trace: list  # (sweep, evals, best_J)
    budget_exhausted: bool
    settings: dict

    def trace_to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", "evals", "best_J"])
            for row in self.trace:
                w.writerow([row[0], row[1], repr(float(row[2]))])
        return path


def default_threads() -> int:
    env = os.environ.get("PDE_TTOPT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class _Budget(Exception):
    pass


class _CachedObjective:
    """Memoized evaluator; each multi-index is computed at most once."""

    def __init__(self, objective, box, state, budget, threads):
        self.objective = objective
        self.box = box
        self.state = state
        self.budget = budget
        self.threads = threads
        self.evals = 0

    def _eval_one(self, idx):
        try:
            val = float(self.objective(self.box.point(idx)))
        except Exception as exc:
            raise EvaluationError(f"objective failed at multi-index {idx}: {exc}",
                                  multi_index=idx) from exc
        if not np.isfinite(val) or val < 0:
            raise EvaluationError(f"objective returned {val} at multi-index {idx}",
                                  multi_index=idx)
        return val

    def __call__(self, indices: np.ndarray) -> np.ndarray:
        """J values for rows of ``indices`` (order preserved)."""
        cache = self.state.cache
        keys = [tuple(int(v) for v in row) for row in indices]
        todo = list(dict.fromkeys(k for k in keys if k not in cache))
        if todo:
            if self.evals + len(todo) > self.budget:
                todo = todo[: self.budget - self.evals]
                self._compute(todo)
                raise _Budget
            self._compute(todo)
        return np.array([cache[k] for k in keys])

    def _compute(self, todo):
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                vals = list(ex.map(self._eval_one, todo))
        else:
            vals = [self._eval_one(k) for k in todo]
        st = self.state
        for k, v in zip(todo, vals):
            st.cache[k] = v
            if v < st.best_value or (v == st.best_value and k < st.best_index):
                st.best_value, st.best_index = v, k
        self.evals += len(todo)


def _combine(prefix: np.ndarray, n: int, suffix: np.ndarray) -> np.ndarray:
    """All multi-indices (prefix, i, suffix), prefix outermost, suffix innermost."""
    P, S = prefix.shape[0], suffix.shape[0]
    i = np.arange(n)
    pre = np.repeat(prefix, n * S, axis=0)
    mid = np.tile(np.repeat(i, S), P)
    suf = np.tile(suffix, (P * n, 1))
    return np.hstack([pre, mid[:, None], suf]).astype(int)


def _dominant(mat: np.ndarray, r_max: int, tol: float) -> np.ndarray:
    """maxvol rows of the rank-<=r_max left singular basis of ``mat``."""
    U, s, _ = np.linalg.svd(mat, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * s[0])) if s.size and s[0] > 0 else 0
    rank = max(1, min(rank, r_max))
    return maxvol(U[:, :rank], tol)


def _local_descent(start, evaluate, n, max_moves):
    """Coordinate-wise +-1 hill descent on the grid."""
    cur = np.array(start, dtype=int)
    cur_val = evaluate(cur[None, :])[0]
    p = cur.size
    for _ in range(max_moves):
        nbrs = []
        for j in range(p):
            for step in (-1, 1):
                v = cur[j] + step
                if 0 <= v < n:
                    nb = cur.copy()
                    nb[j] = v
                    nbrs.append(nb)
        nbrs = np.array(nbrs)
        vals = evaluate(nbrs)
        k = int(np.argmin(vals))
        if vals[k] >= cur_val:
            break
        cur, cur_val = nbrs[k], vals[k]
    return cur


def _unique_rows(rows: np.ndarray, limit: int) -> np.ndarray:
    seen = dict.fromkeys(tuple(int(v) for v in r) for r in rows)
    out = list(seen)[:limit]
    return np.array(out, dtype=int).reshape(len(out), rows.shape[1])


def _top_points(state: TTState, count: int, p: int) -> np.ndarray:
    items = sorted(state.cache.items(), key=lambda kv: (kv[1], kv[0]))[:count]
    return np.array([k for k, _ in items], dtype=int).reshape(len(items), p)


def _refresh(state: TTState, forward: bool, rng, n: int, p: int, r_max: int) -> None:
    """Re-seed the index sets a stagnant sweep would read as fixed columns/rows.

    Keeps the best points seen so far and adds ``r_max`` random multi-indices.
    """
    top = _top_points(state, r_max, p)
    fresh = rng.integers(0, n, size=(r_max, p))
    pts = np.vstack([top, fresh])
    for k in range(1, p):
        if forward:
            state.right[k] = _unique_rows(pts[:, k:], 2 * r_max)
        else:
            state.left[k] = _unique_rows(pts[:, :k], 2 * r_max)


def tt_minimize(objective, box: ParameterBox, r_max: int = 4, n_sweeps: int = 8,
                seed: int = 0, maxvol_tol: float = 1e-2, local_search: bool = True,
                budget: int | None = None, threads: int | None = None,
                refresh: str = "always") -> TTResult:
    """Minimize ``objective(q) -> J >= 0`` over the grid of ``box``.

    One sweep is a single pass (left-to-right or right-to-left) over the
    p - 1 interfaces.  The default evaluation budget is
    ``4 * p * n * r_max**2 * n_sweeps``; hitting it returns the best point so
    far with ``budget_exhausted`` set.

    ``refresh`` controls when the index sets read by the next sweep are
    re-seeded with the best points plus fresh random multi-indices:
    ``"always"`` (every sweep after the first) or ``"stall"`` (only after a
    sweep that evaluated nothing new).
    """
    if refresh not in ("always", "stall"):
        raise InvalidArgumentError("refresh must be 'always' or 'stall'")
    if r_max < 1 or n_sweeps < 1:
        raise InvalidArgumentError("need r_max >= 1 and n_sweeps >= 1")
    p, n = box.p, box.n
    cap = 4 * p * n * r_max**2 * n_sweeps
    budget = cap if budget is None else min(budget, cap)
    threads = default_threads() if threads is None else threads
    rng = np.random.default_rng(seed)

    width = 2 * r_max
    left = [np.zeros((1, 0), dtype=int)] + [None] * (p - 1) + [None]
    right = [None] + [rng.integers(0, n, size=(r_max, p - k)) for k in range(1, p)] + [
        np.zeros((1, 0), dtype=int)]
    right = [None if r is None else _unique_rows(r, width) for r in right]
    state = TTState(r_max=r_max, left=left, right=right)
    evaluate = _CachedObjective(objective, box, state, budget, threads)
    trace = []
    exhausted = False

    def refine(picks, starts, keep_prefix, k):
        """Top up maxvol picks with local improvements and the global best points."""
        pool = [tuple(int(v) for v in pt) for pt in _top_points(state, r_max, p)]
        if local_search:
            pool += [tuple(int(v) for v in _local_descent(pt, evaluate, n, 2 * p))
                     for pt in starts]
        pool = sorted(set(pool), key=lambda key: (state.cache[key], key))[:r_max]
        extra = np.array(pool, dtype=int)
        extra = extra[:, :k] if keep_prefix else extra[:, k:]
        return np.vstack([picks, extra])

    try:
        if p == 1:
            evaluate(np.arange(n)[:, None])
            trace.append((1, evaluate.evals, state.best_value))
        else:
            stalled = False
            for sweep in range(n_sweeps):
                state.sweep = sweep + 1
                forward = sweep % 2 == 0
                if stalled or (refresh == "always" and sweep > 0):
                    _refresh(state, forward, rng, n, p, r_max)
                before = evaluate.evals
                cores = range(p - 1) if forward else range(p - 1, 0, -1)
                for k in cores:
                    if forward:
                        # rows (I_k, i_k) x columns J_{k+1}  ->  new I_{k+1}
                        pre, suf = state.left[k], state.right[k + 1]
                        idx = _combine(pre, n, suf)
                        vals = evaluate(idx).reshape(pre.shape[0] * n, suf.shape[0])
                        rows = _dominant(map_g(vals), r_max, maxvol_tol)
                        full = idx.reshape(pre.shape[0] * n, suf.shape[0], p)
                        picks = full[rows, 0, : k + 1]
                        # best full point along each picked row seeds a local search
                        starts = full[rows, np.argmin(vals[rows], axis=1)]
                        new = refine(picks, starts, True, k + 1)
                        state.left[k + 1] = _unique_rows(new, width)
                    else:
                        # rows I_k x columns (i_k, J_{k+1})  ->  new J_k
                        pre, suf = state.left[k], state.right[k + 1]
                        idx = _combine(pre, n, suf)
                        vals = evaluate(idx).reshape(pre.shape[0], n * suf.shape[0])
                        cols = _dominant(map_g(vals).T, r_max, maxvol_tol)
                        full = idx.reshape(pre.shape[0], n * suf.shape[0], p)
                        picks = full[0, cols, k:]
                        starts = full[np.argmin(vals[:, cols], axis=0), cols]
                        new = refine(picks, starts, False, k)
                        state.right[k] = _unique_rows(new, width)
                trace.append((state.sweep, evaluate.evals, state.best_value))
                stalled = evaluate.evals == before
    except _Budget:
        exhausted = True
        trace.append((state.sweep, evaluate.evals, state.best_value))

    best = state.best_index
    return TTResult(
        q_best=box.point(np.array(best)),
        J_best=float(state.best_value),
        index_best=tuple(best),
        evals=evaluate.evals,
        trace=trace,
        budget_exhausted=exhausted,
        settings={"r_max": r_max, "n": n, "n_sweeps": n_sweeps, "seed": seed,
                  "maxvol_tol": maxvol_tol, "local_search": local_search,
                  "budget": budget, "refresh": refresh},
    )
