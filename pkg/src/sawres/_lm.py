"""Damped Gauss-Newton (Levenberg-Marquardt) least-squares core.

Small and deliberately transparent: the callers need the accepted-step cost
history, iteration counts and the gradient norm at exit, which canned
optimizers do not expose.  Parameters are expected to be scaled to O(1) by
the caller (trace fits run in a dimensionless parameterization).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateFitError

Residual = Callable[[np.ndarray], np.ndarray]
Jacobian = Callable[[np.ndarray], np.ndarray]


@dataclass
class LMResult:
    x: np.ndarray
    cov: np.ndarray | None      # (J^T J)^-1 * cost/(m-n) at the optimum
    cost: float                 # sum of squared residuals
    cost_history: tuple[float, ...]  # cost after each accepted step
    grad_inf: float             # inf-norm of J^T r at exit
    n_iter: int                 # accepted steps
    converged: bool
    message: str


def _fd_jacobian(residual: Residual, x: np.ndarray, r0: np.ndarray,
                 rel_step: float = 1e-6) -> np.ndarray:
    jac = np.empty((r0.shape[0], x.shape[0]))
    for j in range(x.shape[0]):
        h = rel_step * max(abs(x[j]), 1.0)
        xp = x.copy(); xp[j] += h
        xm = x.copy(); xm[j] -= h
        jac[:, j] = (residual(xp) - residual(xm)) / (2.0 * h)
    return jac


def least_squares_lm(residual: Residual, x0, jacobian: Jacobian | None = None,
                     *, max_iter: int = 200, xtol: float = 1e-10,
                     ftol: float = 1e-12, gtol: float = 1e-6,
                     lambda0: float = 1e-3, lambda_up: float = 10.0,
                     lambda_down: float = 0.25,
                     max_step: float = 50.0) -> LMResult:
    """Minimize sum(residual(x)**2).

    jacobian returns d residual / d x, shape (m, n); central finite
    differences are used when it is None.  Convergence is declared only
    when the gradient inf-norm has dropped below gtol * max(1, g0), with g0
    the starting gradient norm, so a `converged` result always carries a
    small residual gradient.

    A parameter whose Jacobian column vanishes (a log-parameter pinned at
    its boundary, typically) is held in place rather than treated as an
    error, and steps are clipped to max_step per component so such a
    parameter cannot drag the iteration to infinity.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.shape[0]

    def jac_at(x_cur: np.ndarray, r_cur: np.ndarray) -> np.ndarray:
        if jacobian is not None:
            return np.asarray(jacobian(x_cur), dtype=float)
        return _fd_jacobian(residual, x_cur, r_cur)

    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise DegenerateFitError("residual is not finite at the start point")
    m = r.shape[0]
    cost = float(r @ r)
    history = [cost]
    jac = jac_at(x, r)
    grad = jac.T @ r
    g0 = max(float(np.max(np.abs(grad))), 1e-300)
    grad_tol = gtol * max(1.0, g0)

    lam = lambda0
    n_iter = 0
    message = "max_iter reached"
    for _ in range(max_iter):
        grad_inf = float(np.max(np.abs(grad)))
        if grad_inf <= grad_tol:
            message = "gradient below tolerance"
            break
        a = jac.T @ jac
        if not np.all(np.isfinite(a)):
            raise DegenerateFitError("Jacobian is not finite")
        diag = np.diag(a).copy()
        # Zero columns (flat directions) must not make the damped system
        # singular: damp them at the dominant scale so their step is zero.
        dmax = float(diag.max())
        damp = np.where(diag > 0.0, diag, dmax if dmax > 0.0 else 1.0)

        accepted = False
        while lam < 1e12:
            try:
                delta = np.linalg.solve(a + lam * np.diag(damp), -grad)
            except np.linalg.LinAlgError as exc:
                raise DegenerateFitError(
                    f"normal equations are singular: {exc}") from exc
            if not np.all(np.isfinite(delta)):
                raise DegenerateFitError("normal equations gave a non-finite "
                                         "step")
            big = float(np.max(np.abs(delta)))
            if big > max_step:
                delta = delta * (max_step / big)
            x_new = x + delta
            r_new = np.asarray(residual(x_new), dtype=float)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= lambda_up
        if not accepted:
            message = "no acceptable damped step"
            break

        step = float(np.max(np.abs(delta)))
        drop = cost - cost_new
        x, r = x_new, r_new
        cost = cost_new
        history.append(cost)
        n_iter += 1
        lam = max(lam * lambda_down, 1e-14)
        jac = jac_at(x, r)
        grad = jac.T @ r
        if step < xtol:
            message = "step below xtol"
            break
        if drop <= ftol * max(cost, 1e-300):
            message = "cost decrease below ftol"
            break

    grad_inf = float(np.max(np.abs(grad)))
    converged = grad_inf <= grad_tol

    cov = None
    if m > n:
        scale = cost / (m - n)
        a = jac.T @ jac
        try:
            cov = np.linalg.inv(a) * scale
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(a) * scale
    return LMResult(x=x, cov=cov, cost=cost, cost_history=tuple(history),
                    grad_inf=grad_inf, n_iter=n_iter, converged=converged,
                    message=message)
