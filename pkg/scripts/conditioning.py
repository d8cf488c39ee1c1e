"""Local identifiability of the reference problem.

Builds the observation Jacobian at the exact parameters from the tangent
(sensitivity) problem, in box-normalized coordinates, and prints its
singular values together with the weakest directions.

    python3 scripts/conditioning.py
"""

import numpy as np

from ttlogistic.adjoint import solve_sensitivity
from ttlogistic.forward import sample_field, solve_forward
from ttlogistic.pipeline import ExperimentSpec, generate_synthetic


def main():
    spec = ExperimentSpec()
    q, grid = spec.exact, spec.grid
    box = spec.box()
    obs = generate_synthetic(spec)
    field = solve_forward(q, grid)
    X, T = np.meshgrid(obs.distances, obs.times, indexing="ij")
    cols = []
    for j in range(q.p):
        dq = np.zeros(q.p)
        dq[j] = box.upper[j] - box.lower[j]
        dy = solve_sensitivity(q, dq, grid, field)
        cols.append(sample_field(dy.values, grid, X, T).ravel())
    jac = np.array(cols).T
    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    names = q.names()
    print("singular values:", np.array2string(s, precision=3))
    print(f"condition number: {s[0] / s[-1]:.3g}")
    for k in (1, 2):
        v = vt[-k]
        top = np.argsort(-np.abs(v))[:4]
        print(f"weak direction {k} (s={s[-k]:.3g}):",
              ", ".join(f"{names[i]} {v[i]:+.2f}" for i in top))


if __name__ == "__main__":
    main()
