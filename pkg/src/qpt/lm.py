"""Damped least-squares (Levenberg-Marquardt) minimizer.

Marquardt-style diagonal scaling: each iteration solves
(J^T J + lambda diag(J^T J)) delta = -J^T r and accepts the step only if it
strictly decreases ||r||^2; lambda shrinks on acceptance and grows on
rejection.  The Jacobian is forward-difference unless the problem supplies
one.  Bounds, when present, are handled by smooth parameter transformations
(squared for one-sided, logistic for two-sided), not projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteResidualError, SingularNormalMatrixError

Bound = tuple[float | None, float | None]


@dataclass
class LeastSquaresProblem:
    residual_fn: Callable[[np.ndarray], np.ndarray]
    bounds: Sequence[Bound | None] | None = None


@dataclass
class LmSettings:
    max_iter: int = 200
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    gtol: float = 1e-10
    ftol: float = 1e-12
    xtol: float = 1e-12
    jacobian_step: float = 1e-7

    def __post_init__(self):
        if not (self.lambda_up > 1.0 > self.lambda_down > 0.0):
            raise ValueError("need lambda_up > 1 > lambda_down > 0")
        for name in ("max_iter", "lambda0", "gtol", "ftol", "xtol", "jacobian_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class LmResult:
    params: np.ndarray
    residual_norm: float
    iterations: int
    status: str  # converged_gtol | converged_ftol | converged_xtol | max_iter
    grad_inf_norm: float = 0.0
    accepted_steps: int = 0


def _eval_residual(fn, x: np.ndarray) -> np.ndarray:
    r = np.asarray(fn(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise NonFiniteResidualError("residual function returned NaN/inf")
    return r


def numeric_jacobian(problem: LeastSquaresProblem, x, step: float,
                     r0: np.ndarray | None = None) -> np.ndarray:
    """Forward-difference Jacobian, column p = (r(x + step e_p) - r(x))/step."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    if r0 is None:
        r0 = _eval_residual(problem.residual_fn, x)
    jac = np.empty((len(r0), len(x)))
    for p in range(len(x)):
        xp = x.copy()
        xp[p] += step
        jac[:, p] = (_eval_residual(problem.residual_fn, xp) - r0) / step
    if not np.all(np.isfinite(jac)):
        raise NonFiniteResidualError("Jacobian contains NaN/inf")
    return jac


def _make_transform(bounds):
    """Map unconstrained t to bounded x (logistic / squared) and back."""

    def to_x(t):
        x = np.array(t, dtype=float)
        for p, b in enumerate(bounds):
            if b is None:
                continue
            lo, hi = b
            if lo is not None and hi is not None:
                x[p] = lo + (hi - lo) / (1.0 + np.exp(-t[p]))
            elif lo is not None:
                x[p] = lo + t[p] ** 2
            elif hi is not None:
                x[p] = hi - t[p] ** 2
        return x

    def to_t(x):
        t = np.array(x, dtype=float)
        for p, b in enumerate(bounds):
            if b is None:
                continue
            lo, hi = b
            if lo is not None and hi is not None:
                frac = np.clip((x[p] - lo) / (hi - lo), 1e-12, 1.0 - 1e-12)
                t[p] = np.log(frac / (1.0 - frac))
            elif lo is not None:
                t[p] = np.sqrt(max(x[p] - lo, 0.0))
            elif hi is not None:
                t[p] = np.sqrt(max(hi - x[p], 0.0))
        return t

    return to_x, to_t


def lm_minimize(problem: LeastSquaresProblem, x0, settings: LmSettings | None = None) -> LmResult:
    """Minimize ||residual_fn(x)||^2 from x0; see module docstring for the scheme.

    Raises NonFiniteResidualError on NaN/inf residuals and
    SingularNormalMatrixError after 10 consecutive failed solves of the
    damped normal equations.
    """
    s = settings or LmSettings()
    x0 = np.asarray(x0, dtype=float)

    if problem.bounds is not None:
        to_x, to_t = _make_transform(list(problem.bounds))
        inner = LeastSquaresProblem(lambda t: problem.residual_fn(to_x(t)))
        res = lm_minimize(inner, to_t(x0), settings)
        res.params = to_x(res.params)
        return res

    fn = problem.residual_fn
    x = x0.copy()
    r = _eval_residual(fn, x)
    if len(r) < len(x):
        raise ValueError("residual dimension must be >= parameter dimension")
    cost = float(r @ r)
    lam = s.lambda0
    accepted = 0
    grad_norm = np.inf
    it = 0
    status = "max_iter"
    for it in range(1, s.max_iter + 1):
        jac = numeric_jacobian(problem, x, s.jacobian_step, r0=r)
        g = jac.T @ r
        grad_norm = float(np.abs(g).max()) if len(g) else 0.0
        if grad_norm < s.gtol:
            status = "converged_gtol"
            break
        a = jac.T @ jac
        d = np.diag(a).copy()
        # dead parameters (zero Jacobian column) would make the damped
        # system singular at every lambda; floor their damping weight
        d = np.maximum(d, 1e-12 * max(d.max(), 1e-300))
        escalations = 0
        stop = None
        while True:
            try:
                delta = np.linalg.solve(a + lam * np.diag(d), -g)
                if not np.all(np.isfinite(delta)):
                    raise np.linalg.LinAlgError("non-finite step")
            except np.linalg.LinAlgError:
                lam *= s.lambda_up
                escalations += 1
                if escalations > 10:
                    raise SingularNormalMatrixError(
                        "damped normal matrix singular after 10 escalations"
                    )
                continue
            x_new = x + delta
            r_new = _eval_residual(fn, x_new)
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                rel_drop = (cost - cost_new) / cost if cost > 0 else 0.0
                step_small = np.linalg.norm(delta) <= s.xtol * (np.linalg.norm(x_new) + s.xtol)
                x, r, cost = x_new, r_new, cost_new
                lam *= s.lambda_down
                accepted += 1
                if rel_drop <= s.ftol:
                    stop = "converged_ftol"
                elif step_small:
                    stop = "converged_xtol"
                break
            lam *= s.lambda_up
            if np.linalg.norm(delta) <= s.xtol * (np.linalg.norm(x) + s.xtol):
                stop = "converged_xtol"  # rejected step already negligible
                break
            if lam > 1e18:
                stop = "converged_ftol"  # no further decrease possible
                break
        if stop:
            status = stop
            break
    return LmResult(
        params=x,
        residual_norm=float(np.sqrt(cost)),
        iterations=it,
        status=status,
        grad_inf_norm=grad_norm,
        accepted_steps=accepted,
    )
