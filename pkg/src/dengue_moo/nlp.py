"""Box-constrained NLP solver with smooth inequality constraints.

Augmented-Lagrangian outer loop (Powell-Hestenes-Rockafellar form) over the
inequalities; each subproblem is a bound-constrained minimization handled by
L-BFGS-B. Objectives flagged as the pointwise max of two smooth pieces are
handled by a variable-metric projected subgradient descent instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import ConfigurationError, NumericalFailure

log = logging.getLogger(__name__)

Fun = Callable[[np.ndarray], float]
Grad = Callable[[np.ndarray], np.ndarray]

CONVERGED = "converged"
BUDGET_EXHAUSTED = "eval-budget-exhausted"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class Constraint:
    """Smooth inequality ``fun(x) <= 0``."""

    fun: Fun
    grad: Grad
    name: str = ""


@dataclass
class ScalarProblem:
    objective: Fun
    objective_grad: Grad
    lower: np.ndarray
    upper: np.ndarray
    constraints: list[Constraint] = field(default_factory=list)
    # for nonsmooth objectives: the smooth pieces whose max is the objective
    pieces: list[tuple[Fun, Grad]] | None = None
    name: str = ""

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ConfigurationError("bounds must be 1-D arrays of equal length")
        if np.any(self.lower > self.upper):
            raise ConfigurationError("lower bound exceeds upper bound")

    @property
    def n_vars(self) -> int:
        return self.lower.size

    @property
    def nonsmooth(self) -> bool:
        return self.pieces is not None

    def violation(self, x: np.ndarray) -> float:
        if not self.constraints:
            return 0.0
        return max(0.0, max(g.fun(x) for g in self.constraints))


@dataclass(frozen=True)
class SolveOptions:
    max_function_evaluations: int = 20000
    gradient_mode: str = "adjoint"
    constraint_tolerance: float = 1e-6
    stationarity_tolerance: float = 1e-6
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    max_penalty: float = 1e8
    max_outer_iterations: int = 30
    objective_stall: float = 1e-8
    inner_ftol: float = 1e-15

    def __post_init__(self):
        if self.max_function_evaluations <= 0:
            raise ConfigurationError("max_function_evaluations must be positive")
        if self.gradient_mode not in ("adjoint", "finite-difference"):
            raise ConfigurationError(f"unknown gradient mode {self.gradient_mode!r}")


@dataclass
class SolveResult:
    x_star: np.ndarray
    objective_value: float
    constraint_violation: float
    status: str
    evaluations_used: int
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stationarity: float = np.nan
    outer_iterations: int = 0
    # merit value at every accepted inner iterate, one list per outer iteration
    merit_history: list[list[float]] = field(default_factory=list, repr=False)

    @property
    def success(self) -> bool:
        return self.status == CONVERGED


class _BudgetExhausted(Exception):
    pass


class _Done(Exception):
    pass


class _Counter:
    """Counts point evaluations and enforces the budget."""

    def __init__(self, budget: int):
        self.budget = budget
        self.used = 0

    def tick(self, n: int = 1):
        if self.used + n > self.budget:
            raise _BudgetExhausted
        self.used += n


def _projected_gradient(x, g, lower, upper) -> np.ndarray:
    return np.clip(x - g, lower, upper) - x


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise NumericalFailure("non-finite objective, constraint or gradient")


def _forward_difference(fun: Fun, x: np.ndarray, lower, upper, step: float = 1e-7) -> np.ndarray:
    f0 = fun(x)
    grad = np.empty_like(x)
    for i in range(x.size):
        h = step if x[i] + step <= upper[i] else -step
        xi = x.copy()
        xi[i] += h
        grad[i] = (fun(xi) - f0) / h
    return grad


class _Model:
    """Evaluates objective, constraints and their gradients with budget accounting."""

    def __init__(self, problem: ScalarProblem, opts: SolveOptions, counter: _Counter):
        self.problem = problem
        self.fd = opts.gradient_mode == "finite-difference"
        self.counter = counter

    def values(self, x):
        self.counter.tick()
        f = self.problem.objective(x)
        g = np.array([c.fun(x) for c in self.problem.constraints])
        _check_finite(f, g)
        return f, g

    def gradients(self, x):
        p = self.problem
        if self.fd:
            # one extra point evaluation per coordinate
            self.counter.tick(x.size)
            df = _forward_difference(p.objective, x, p.lower, p.upper)
            dg = [_forward_difference(c.fun, x, p.lower, p.upper) for c in p.constraints]
        else:
            df = p.objective_grad(x)
            dg = [c.grad(x) for c in p.constraints]
        _check_finite(df, *dg)
        return df, dg


def _augmented(f, g, df, dg, lam, rho):
    """PHR augmented Lagrangian value and gradient for ``g <= 0``."""
    value = f
    grad = np.array(df, dtype=float)
    for j in range(g.size):
        shifted = lam[j] + rho * g[j]
        if shifted > 0:
            value += (shifted**2 - lam[j] ** 2) / (2.0 * rho)
            grad += shifted * dg[j]
        else:
            value -= lam[j] ** 2 / (2.0 * rho)
    return value, grad


def _lagrangian_stationarity(problem, x, df, dg, lam) -> float:
    grad = np.array(df, dtype=float)
    for j, gj in enumerate(dg):
        grad += lam[j] * gj
    return float(np.max(np.abs(_projected_gradient(x, grad, problem.lower, problem.upper)), initial=0.0))


def _better(a, b, ctol) -> bool:
    """Lexicographic (violation, objective) comparison of ``(viol, obj)`` pairs."""
    va, vb = max(a[0], ctol), max(b[0], ctol)
    if va != vb:
        return va < vb
    return a[1] < b[1]


def minimize(problem: ScalarProblem, x0, opts: SolveOptions | None = None) -> SolveResult:
    """Minimize ``problem`` from ``x0`` (projected onto the box first).

    Convergence means a feasible point (within ``constraint_tolerance``) that
    is either stationary to ``stationarity_tolerance`` or whose objective
    stopped moving between outer iterations (relative change below
    ``objective_stall``). The returned point is the best one seen in the
    (violation, objective) lexicographic order, never worse than ``x0``.
    """
    opts = opts or SolveOptions()
    lower, upper = problem.lower, problem.upper
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    if x.shape != lower.shape:
        raise ConfigurationError(f"x0 has {x.size} entries, problem has {problem.n_vars} variables")

    counter = _Counter(opts.max_function_evaluations)
    model = _Model(problem, opts, counter)
    m = len(problem.constraints)
    lam = np.zeros(m)
    rho = opts.initial_penalty
    history: list[list[float]] = []
    stationarity = np.nan
    outer = 0

    try:
        f, g = model.values(x)
    except (NumericalFailure, _BudgetExhausted):
        return SolveResult(x, np.nan, np.inf, NUMERICAL_FAILURE, counter.used)
    start = (_violation(g), f)
    best_x, best = x.copy(), start
    status = NUMERICAL_FAILURE

    def consider(z, point):
        nonlocal best_x, best
        if _better(point, best, opts.constraint_tolerance):
            best_x, best = z.copy(), point

    try:
        if problem.nonsmooth:
            # quasi-Newton line searches break down on the kink, so go straight
            # to the min-max descent
            x, f, status = _minmax_refine(model, x, opts)
            consider(x, (0.0, f))
            raise _Done
        prev = start
        for outer in range(1, opts.max_outer_iterations + 1):
            x, merits = _inner_solve(model, x, lam, rho, opts)
            history.append(merits)
            f, g = model.values(x)
            df, dg = model.gradients(x)
            violation = _violation(g)
            consider(x, (violation, f))
            if m:
                lam = np.maximum(0.0, lam + rho * g)
            stationarity = _lagrangian_stationarity(problem, x, df, dg, lam)
            log.debug("outer %d: f=%.12g viol=%.2e stat=%.2e rho=%.1e evals=%d",
                      outer, f, violation, stationarity, rho, counter.used)

            feasible = violation <= opts.constraint_tolerance
            stalled = abs(f - prev[1]) <= opts.objective_stall * max(1.0, abs(f))
            if feasible and (stationarity <= opts.stationarity_tolerance or stalled or m == 0):
                status = CONVERGED
                break
            if violation > opts.constraint_tolerance and violation > 0.25 * prev[0]:
                rho = min(rho * opts.penalty_growth, opts.max_penalty)
            prev = (violation, f)
        else:
            status = BUDGET_EXHAUSTED
    except _Done:
        pass
    except _BudgetExhausted:
        status = BUDGET_EXHAUSTED
    except NumericalFailure:
        status = NUMERICAL_FAILURE

    return SolveResult(
        x_star=best_x,
        objective_value=float(best[1]),
        constraint_violation=float(best[0]),
        status=status,
        evaluations_used=counter.used,
        multipliers=lam,
        stationarity=stationarity,
        outer_iterations=outer,
        merit_history=history,
    )


def _violation(g: np.ndarray) -> float:
    return float(max(0.0, g.max(initial=0.0)))


def _inner_solve(model: _Model, x, lam, rho, opts: SolveOptions):
    """Bound-constrained minimization of the augmented Lagrangian."""
    problem = model.problem
    merits: list[float] = []
    cache = {}

    def fun(z):
        key = z.tobytes()
        if key not in cache:
            f, g = model.values(z)
            df, dg = model.gradients(z)
            cache.clear()
            cache[key] = _augmented(f, g, df, dg, lam, rho)
        return cache[key]

    def callback(intermediate_result):
        merits.append(float(intermediate_result.fun))

    remaining = max(1, model.counter.budget - model.counter.used)
    res = _scipy_minimize(
        fun,
        x,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(problem.lower, problem.upper)),
        callback=callback,
        options={
            "maxfun": remaining,
            "maxiter": remaining,
            "maxcor": 20,
            "ftol": opts.inner_ftol,
            "gtol": 0.1 * opts.stationarity_tolerance,
        },
    )
    return np.clip(res.x, problem.lower, problem.upper), merits


def _piece_weight(v1, v2, a1, a2, H) -> float:
    """Dual weight ``t`` of the two-piece direction subproblem.

    Maximizes ``t v1 + (1 - t) v2 - |t a1 + (1 - t) a2|_H^2 / 2`` over [0, 1],
    which is concave and quadratic in ``t``.
    """
    Ha1, Ha2 = H @ a1, H @ a2
    h11, h22, h12 = a1 @ Ha1, a2 @ Ha2, a1 @ Ha2
    curvature = h11 - 2.0 * h12 + h22
    if curvature <= 0.0:
        return 1.0 if v1 >= v2 else 0.0
    return float(np.clip((v1 - v2 - h12 + h22) / curvature, 0.0, 1.0))


def _minmax_refine(model: _Model, x, opts: SolveOptions, max_iter: int = 20000,
                   bound_tol: float = 1e-9, window: int = 50):
    """Variable-metric projected subgradient descent for ``max(piece1, piece2)``.

    Each step combines the two piece gradients with the weight that makes the
    local max model decrease most in the current inverse-Hessian metric, on
    the face of the box the step does not leave. The metric is a dense BFGS
    approximation built from differences of the combined gradients; steps are
    accepted by Armijo backtracking on the true max, so the objective never
    increases. Stops when the model predicts no decrease or when the last
    ``window`` steps gained less than ``objective_stall`` (relative).
    Returns ``(x, value, status)``; running out of budget is not an error.
    """
    try:
        return _minmax_descent(model, x, opts, max_iter, bound_tol, window)
    except _BudgetExhausted as stop:
        x, F = stop.args
        return x, F, BUDGET_EXHAUSTED


def _minmax_descent(model, x, opts, max_iter, bound_tol, window):
    problem = model.problem
    (f1, g1), (f2, g2) = problem.pieces
    lower, upper = problem.lower, problem.upper
    n = x.size

    def evaluate(z):
        try:
            model.counter.tick()
        except _BudgetExhausted:
            raise _BudgetExhausted(x, float(vals.max())) from None
        v = np.array([f1(z), f2(z)])
        _check_finite(v)
        return v

    def gradients(z):
        a = (g1(z), g2(z))
        _check_finite(*a)
        return a

    def scaled_identity(grads):
        scale = max(np.max(np.abs(grads[0])), np.max(np.abs(grads[1])), 1e-300)
        return np.eye(n) * (0.1 / scale)

    vals = np.full(2, np.inf)
    vals = evaluate(x)
    grads = gradients(x)
    H = scaled_identity(grads)
    fresh = first = True
    recent = [float(vals.max())]
    for _ in range(max_iter):
        F = vals.max()
        if len(recent) > window:
            if recent[-window - 1] - F <= opts.objective_stall * max(1.0, abs(F)):
                return x, F, CONVERGED
            del recent[0]
        free = np.ones(n, dtype=bool)
        # shrink the face until the step stays inside the box
        while True:
            Hf = H[np.ix_(free, free)]
            a1, a2 = grads[0][free], grads[1][free]
            t = _piece_weight(vals[0], vals[1], a1, a2, Hf)
            combined = t * grads[0] + (1.0 - t) * grads[1]
            d = np.zeros(n)
            d[free] = -(Hf @ combined[free])
            out = free & (((x <= lower + bound_tol) & (d < 0)) | ((x >= upper - bound_tol) & (d > 0)))
            if not out.any():
                break
            free &= ~out
        predicted = max(vals[0] + grads[0] @ d, vals[1] + grads[1] @ d) - F
        if predicted > -1e-15 * max(1.0, abs(F)):
            return x, F, CONVERGED

        step = 1.0
        accepted = False
        for _ in range(60):
            trial = np.clip(x + step * d, lower, upper)
            s = trial - x
            model_decrease = max(vals[0] + grads[0] @ s, vals[1] + grads[1] @ s) - F
            trial_vals = evaluate(trial)
            if trial_vals.max() < F and trial_vals.max() <= F + 1e-4 * min(model_decrease, 0.0):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if fresh:
                return x, F, CONVERGED
            H = scaled_identity(grads)
            fresh = first = True
            continue

        new_grads = gradients(trial)
        y = t * new_grads[0] + (1.0 - t) * new_grads[1] - combined
        sy = float(s @ y)
        if sy > 1e-12 * np.sqrt(float(s @ s) * float(y @ y)):
            if first:
                H = np.eye(n) * (sy / float(y @ y))
                first = False
            rho = 1.0 / sy
            Hy = H @ y
            H += (rho * rho * float(y @ Hy) + rho) * np.outer(s, s) - rho * (np.outer(s, Hy) + np.outer(Hy, s))
        x, vals, grads = trial, trial_vals, new_grads
        recent.append(float(vals.max()))
        fresh = False
    return x, float(vals.max()), BUDGET_EXHAUSTED
