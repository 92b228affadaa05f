"""Cost functionals on the time grid and their gradients.

All integrals use the trapezoidal rule on the same nodes as the states.
Gradients come from the discrete adjoint of the RK4 scheme, so they are the
exact derivatives of the discretized costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, NumericalFailure
from .model import I_H, ModelParameters, StateTrajectory, StateVector, TimeGrid, check_control, integrate_rk4


@dataclass(frozen=True)
class ObjectivePoint:
    f1: float
    f2: float

    def __iter__(self):
        yield self.f1
        yield self.f2

    def as_array(self) -> np.ndarray:
        return np.array([self.f1, self.f2])


@dataclass(frozen=True)
class WeightedCostSpec:
    gamma_D: float
    gamma_S: float

    def __post_init__(self):
        if not (self.gamma_D > 0 and self.gamma_S > 0):
            raise ConfigurationError("cost weights gamma_D and gamma_S must be positive")


def _trapezoid(values: np.ndarray, grid: TimeGrid) -> float:
    return float(np.dot(grid.trapezoid_weights(), values))


def f1_infected_cost(traj: StateTrajectory) -> float:
    """Cumulative infected fraction, integral of ``i_h`` over the horizon."""
    return _trapezoid(traj.states[:, I_H], traj.grid)


def f2_insecticide_cost(control, grid: TimeGrid) -> float:
    """Cumulative insecticide, integral of ``c`` over the horizon."""
    return _trapezoid(check_control(control, grid), grid)


def weighted_cost_J(traj: StateTrajectory, control, spec: WeightedCostSpec) -> float:
    """Quadratic cost ``integral of gamma_D i_h^2 + gamma_S c^2``.

    ``spec`` is taken as given, so a zero weight is accepted here even though
    :class:`WeightedCostSpec` itself insists on positive values.
    """
    c = np.asarray(control, dtype=float)
    i_h = traj.states[:, I_H]
    return _trapezoid(spec.gamma_D * i_h**2 + spec.gamma_S * c**2, traj.grid)


class Evaluator:
    """Objective values and adjoint gradients for one model setup.

    Caches the last forward sweep, so asking for ``f1`` and its gradient at
    the same control costs one simulation plus one backward sweep.
    """

    def __init__(self, params: ModelParameters | None = None, grid: TimeGrid | None = None,
                 init: StateVector | None = None):
        self.params = params or ModelParameters()
        self.grid = grid or TimeGrid()
        self.init = init or StateVector()
        self._p = self.params.as_array()
        self._y0 = self.init.as_array()
        self.weights = self.grid.trapezoid_weights()
        self.n_simulations = 0
        self._key = None
        self._states = None

    @property
    def n_nodes(self) -> int:
        return self.grid.n_nodes

    def states(self, control: np.ndarray) -> np.ndarray:
        c = np.ascontiguousarray(control, dtype=float)
        key = c.tobytes()
        if key != self._key:
            self._states = _kernels.rk4_forward(self._y0, c, self._p, self.grid.h)
            self._key = key
            self.n_simulations += 1
        return self._states

    def trajectory(self, control) -> StateTrajectory:
        return integrate_rk4(control, self.params, self.grid, self.init)

    def f1(self, control: np.ndarray) -> float:
        return float(np.dot(self.weights, self.states(control)[:, I_H]))

    def f2(self, control: np.ndarray) -> float:
        return float(np.dot(self.weights, control))

    def point(self, control: np.ndarray) -> ObjectivePoint:
        return ObjectivePoint(self.f1(control), self.f2(control))

    def J(self, control: np.ndarray, spec: WeightedCostSpec) -> float:
        i_h = self.states(control)[:, I_H]
        return float(np.dot(self.weights, spec.gamma_D * i_h**2 + spec.gamma_S * control**2))

    def state_vjp(self, control: np.ndarray, seed: np.ndarray) -> np.ndarray:
        """Gradient of ``sum(seed * states)`` with respect to the control nodes."""
        c = np.ascontiguousarray(control, dtype=float)
        ys = self.states(c)
        grad = _kernels.rk4_adjoint(ys, c, self._p, self.grid.h, np.ascontiguousarray(seed))
        if not np.all(np.isfinite(grad)):
            raise NumericalFailure("non-finite adjoint gradient")
        return grad

    def f1_grad(self, control: np.ndarray) -> np.ndarray:
        seed = np.zeros((self.n_nodes, _kernels.N_STATES))
        seed[:, I_H] = self.weights
        return self.state_vjp(control, seed)

    def f2_grad(self, control: np.ndarray | None = None) -> np.ndarray:
        return self.weights.copy()

    def J_grad(self, control: np.ndarray, spec: WeightedCostSpec) -> np.ndarray:
        i_h = self.states(control)[:, I_H]
        seed = np.zeros((self.n_nodes, _kernels.N_STATES))
        seed[:, I_H] = 2.0 * spec.gamma_D * self.weights * i_h
        return self.state_vjp(control, seed) + 2.0 * spec.gamma_S * self.weights * control


GRADIENT_TARGETS = ("f1", "f2", "J", "composite")


def objective_gradient(
    control,
    which: str = "f1",
    evaluator: Evaluator | None = None,
    spec: WeightedCostSpec | None = None,
    weights: tuple[float, float] | None = None,
    mode: str = "adjoint",
) -> np.ndarray:
    """Gradient of a discretized cost with respect to every control node.

    ``which="composite"`` is ``weights[0] * f1 + weights[1] * f2``; ``"J"``
    needs ``spec``. ``mode="finite-difference"`` uses central differences and
    exists as an oracle for the adjoint.
    """
    ev = evaluator or Evaluator()
    c = check_control(control, ev.grid)
    if which not in GRADIENT_TARGETS:
        raise ConfigurationError(f"unknown gradient target {which!r}")
    if which == "J" and spec is None:
        raise ConfigurationError("gradient of J needs a WeightedCostSpec")
    if which == "composite" and weights is None:
        raise ConfigurationError("composite gradient needs weights (w1, w2)")

    if mode == "finite-difference":
        def value(x):
            if which == "f1":
                return ev.f1(x)
            if which == "f2":
                return ev.f2(x)
            if which == "J":
                return ev.J(x, spec)
            return weights[0] * ev.f1(x) + weights[1] * ev.f2(x)
        return finite_difference_gradient(value, c)
    if mode != "adjoint":
        raise ConfigurationError(f"unknown gradient mode {mode!r}")

    if which == "f1":
        return ev.f1_grad(c)
    if which == "f2":
        return ev.f2_grad(c)
    if which == "J":
        return ev.J_grad(c, spec)
    return weights[0] * ev.f1_grad(c) + weights[1] * ev.f2_grad(c)


def finite_difference_gradient(fun, x: np.ndarray, step: float = 1e-5, indices=None) -> np.ndarray:
    """Central differences of ``fun`` at ``x``; only ``indices`` if given.

    Coordinates not in ``indices`` are left as NaN.
    """
    x = np.array(x, dtype=float)
    idx = range(x.size) if indices is None else indices
    grad = np.full(x.size, np.nan)
    for i in idx:
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        grad[i] = (fun(xp) - fun(xm)) / (2.0 * step)
    return grad
