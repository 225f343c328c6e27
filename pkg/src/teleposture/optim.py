"""Small damped Gauss-Newton (Levenberg-Marquardt) solver.

Used by camera extrinsic refinement and segment-length fitting; both are
low-dimensional problems with cheap residuals, so the implementation favors
clarity and a recorded, strictly decreasing cost history over raw speed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    cost_history: list = field(default_factory=list)  # accepted iterations only
    converged: bool = False
    n_iter: int = 0


def numeric_jacobian(residual_fn, x, eps=1e-7):
    r0 = residual_fn(x)
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = eps
        J[:, i] = (residual_fn(x + dx) - residual_fn(x - dx)) / (2.0 * eps)
    return J


def levenberg_marquardt(
    residual_fn,
    x0,
    jac_fn=None,
    max_iter: int = 100,
    gtol: float = 1e-10,
    ftol: float = 1e-14,
    lam0: float = 1e-3,
) -> LMResult:
    """Minimize 0.5*||r(x)||^2 with multiplicative damping.

    Steps that do not decrease the cost are rejected (damping increased), so
    cost_history over accepted iterations decreases monotonically.
    """
    x = np.asarray(x0, dtype=float).copy()
    if jac_fn is None:
        jac_fn = lambda xx: numeric_jacobian(residual_fn, xx)

    r = residual_fn(x)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = lam0
    converged = False
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        J = jac_fn(x)
        g = J.T @ r
        if np.max(np.abs(g)) < gtol:
            converged = True
            break
        JTJ = J.T @ J
        accepted = False
        for _ in range(25):
            try:
                step = np.linalg.solve(JTJ + lam * np.eye(x.size), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = residual_fn(x + step)
            cost_new = 0.5 * float(r_new @ r_new)
            if cost_new < cost:
                x = x + step
                rel_drop = (cost - cost_new) / max(cost, 1e-300)
                r, cost = r_new, cost_new
                history.append(cost)
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                if rel_drop < ftol:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            converged = True  # no descent direction left at machine precision
            break
        if converged:
            break

    return LMResult(x=x, cost=cost, cost_history=history, converged=converged, n_iter=n_iter)
