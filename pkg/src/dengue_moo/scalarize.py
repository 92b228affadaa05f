"""Scalarized single-objective problems and the warm-started Pareto sweep.

Four methods turn the biobjective problem (infected cost ``f1``, insecticide
cost ``f2``) into parametrized NLPs over the nodal control:

* ``eps-constraint``: minimize ``f1`` subject to ``f2 <= eps``;
* ``chebyshev``: minimize ``max_i w_i (f_i - z*_i)`` (nonsmooth);
* ``goal-attainment``: the same problem with an auxiliary level ``alpha``;
* ``normal-constraint``: minimize normalized ``f1`` subject to a half-plane
  bounded by the normal to the anchor line through ``z = Phi w``.

:func:`approximate_pareto` solves a sequence of them, each starting from the
previous minimizer.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .model import ModelParameters, StateVector, TimeGrid
from .nlp import CONVERGED, Constraint, ScalarProblem, SolveOptions, SolveResult, minimize
from .objectives import Evaluator, ObjectivePoint

log = logging.getLogger(__name__)

METHODS = ("eps-constraint", "chebyshev", "goal-attainment", "normal-constraint")
WEIGHT_FLOOR = 1e-6
UTOPIA_SHIFT = 1e-4


@dataclass(frozen=True)
class Anchor:
    control: np.ndarray = field(repr=False)
    point: ObjectivePoint


@dataclass(frozen=True)
class AnchorData:
    anchor_f1: Anchor
    anchor_f2: Anchor

    @property
    def z_ideal(self) -> np.ndarray:
        return np.array([self.anchor_f1.point.f1, self.anchor_f2.point.f2])

    @property
    def z_nadir(self) -> np.ndarray:
        return np.array([self.anchor_f2.point.f1, self.anchor_f1.point.f2])

    @property
    def utopia(self) -> np.ndarray:
        return self.z_ideal - UTOPIA_SHIFT * (self.z_nadir - self.z_ideal)

    def normalize(self, f) -> np.ndarray:
        ideal, nadir = self.z_ideal, self.z_nadir
        span = nadir - ideal
        if np.any(span <= 0):
            raise ConfigurationError(f"degenerate normalization: ideal {ideal} vs nadir {nadir}")
        return (np.asarray(f, dtype=float) - ideal) / span

    def normalized_anchors(self) -> np.ndarray:
        """Rows are the normalized objective vectors of the f1 and f2 anchors."""
        return np.vstack([
            self.normalize(self.anchor_f1.point.as_array()),
            self.normalize(self.anchor_f2.point.as_array()),
        ])


@dataclass(frozen=True)
class ScalarizationSpec:
    method: str
    eps: float | None = None
    weights: tuple[float, float] | None = None
    reference: tuple[float, float] | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.method == "eps-constraint":
            if self.eps is None or self.eps < 0:
                raise ConfigurationError("eps-constraint needs eps >= 0")
        else:
            w = self.weights
            if w is None or len(w) != 2 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
                raise ConfigurationError(f"weights must be two nonnegative numbers summing to 1, got {w}")

    @property
    def beta_param(self) -> float:
        """Scalar summary of the method parameter: eps, or the first weight."""
        return float(self.eps) if self.method == "eps-constraint" else float(self.weights[0])

    def to_dict(self) -> dict:
        d = {"method": self.method}
        if self.eps is not None:
            d["eps"] = self.eps
        if self.weights is not None:
            d["weights"] = list(self.weights)
        if self.reference is not None:
            d["reference"] = list(self.reference)
        return d


@dataclass
class ArchiveEntry:
    control: np.ndarray = field(repr=False)
    point: ObjectivePoint
    spec: ScalarizationSpec
    status: str
    evaluations: int = 0


@dataclass
class ParetoArchive:
    method: str
    entries: list[ArchiveEntry] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    anchors: AnchorData | None = field(default=None, repr=False)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def points(self) -> np.ndarray:
        return np.array([[e.point.f1, e.point.f2] for e in self.entries]).reshape(-1, 2)

    def controls(self) -> np.ndarray:
        return np.array([e.control for e in self.entries])

    def failures(self) -> int:
        return sum(e.status != CONVERGED for e in self.entries)

    def __len__(self):
        return len(self.entries)


def clean_weights(w1: float) -> tuple[float, float]:
    """``(w1, 1 - w1)`` with zero weights lifted to the floor, renormalized."""
    w = np.array([w1, 1.0 - w1])
    w = np.maximum(w, WEIGHT_FLOOR)
    w /= w.sum()
    return float(w[0]), float(w[1])


def _control_bounds(ev: Evaluator):
    return np.zeros(ev.n_nodes), np.ones(ev.n_nodes)


def compute_anchors(evaluator: Evaluator, opts: SolveOptions | None = None) -> AnchorData:
    """Minimizers of each objective alone.

    The f2 anchor is ``c = 0`` exactly. The f1 anchor comes from the solver,
    started at full control: late nodes barely move f1 (the gradient there is
    around 1e-12), so a start at zero would leave them wherever it began.
    """
    ev = evaluator
    zero = np.zeros(ev.n_nodes)
    lower, upper = _control_bounds(ev)
    problem = ScalarProblem(ev.f1, ev.f1_grad, lower, upper, name="anchor-f1")
    res = minimize(problem, upper, opts)
    if not np.isfinite(res.objective_value):
        raise ConfigurationError(f"f1 anchor solve failed with status {res.status}")
    anchors = AnchorData(
        anchor_f1=Anchor(res.x_star, ev.point(res.x_star)),
        anchor_f2=Anchor(zero, ev.point(zero)),
    )
    if np.any(anchors.z_ideal > anchors.z_nadir):
        raise ConfigurationError("ideal point is not below the nadir point")
    return anchors


def eps_constraint_problem(eps: float, evaluator: Evaluator) -> ScalarProblem:
    if eps < 0:
        raise ConfigurationError("eps must be nonnegative")
    ev = evaluator
    lower, upper = _control_bounds(ev)
    budget = Constraint(lambda x: ev.f2(x) - eps, ev.f2_grad, name="f2 <= eps")
    return ScalarProblem(ev.f1, ev.f1_grad, lower, upper, constraints=[budget], name=f"eps={eps:g}")


def chebyshev_problem(weights, reference, evaluator: Evaluator) -> ScalarProblem:
    """Weighted L-infinity distance to ``reference``, minimized directly."""
    ev = evaluator
    w1, w2 = weights
    z1, z2 = reference
    lower, upper = _control_bounds(ev)
    piece1 = (lambda x: w1 * (ev.f1(x) - z1), lambda x: w1 * ev.f1_grad(x))
    piece2 = (lambda x: w2 * (ev.f2(x) - z2), lambda x: w2 * ev.f2_grad(x))

    def objective(x):
        return max(piece1[0](x), piece2[0](x))

    def gradient(x):
        # a subgradient: gradient of the larger piece
        return piece1[1](x) if piece1[0](x) >= piece2[0](x) else piece2[1](x)

    return ScalarProblem(objective, gradient, lower, upper, pieces=[piece1, piece2],
                         name=f"chebyshev w={w1:.4g}")


def goal_attainment_problem(weights, reference, evaluator: Evaluator,
                            alpha_max: float | None = None) -> ScalarProblem:
    """Chebyshev problem with the max lifted into a level variable.

    The decision vector is the control followed by ``alpha``.
    """
    ev = evaluator
    w1, w2 = weights
    z1, z2 = reference
    n = ev.n_nodes
    if alpha_max is None:
        alpha_max = 10.0 * max(w1 * (ev.f1(np.zeros(n)) - z1), w2 * (float(ev.weights.sum()) - z2), 1.0)
    lower = np.append(np.zeros(n), 0.0)
    upper = np.append(np.ones(n), alpha_max)

    def level_gap(i, wi, zi, f, fgrad):
        def fun(x):
            return wi * (f(x[:n]) - zi) - x[n]

        def grad(x):
            g = np.empty(n + 1)
            g[:n] = wi * fgrad(x[:n])
            g[n] = -1.0
            return g

        return Constraint(fun, grad, name=f"w{i}(f{i} - z{i}) <= alpha")

    def objective(x):
        return float(x[n])

    def gradient(x):
        g = np.zeros(n + 1)
        g[n] = 1.0
        return g

    constraints = [level_gap(1, w1, z1, ev.f1, ev.f1_grad), level_gap(2, w2, z2, ev.f2, ev.f2_grad)]
    return ScalarProblem(objective, gradient, lower, upper, constraints=constraints,
                         name=f"goal-attainment w={w1:.4g}")


def goal_attainment_start(control, weights, reference, evaluator: Evaluator) -> np.ndarray:
    """Feasible starting point: the control plus the smallest admissible level."""
    c = np.asarray(control, dtype=float)
    f = evaluator.point(c).as_array()
    alpha = max(0.0, float(np.max(np.asarray(weights) * (f - np.asarray(reference)))))
    return np.append(c, alpha)


def normal_constraint_problem(weights, anchors: AnchorData, evaluator: Evaluator) -> ScalarProblem:
    """Minimize normalized f1 on the side of the normal line through ``Phi w``.

    With the f1 anchor as the fixed corner, the constraint vector runs from the
    f2 anchor to it, and the feasible half-plane keeps points whose projection
    on the anchor line lies past ``z``.
    """
    ev = evaluator
    ideal, nadir = anchors.z_ideal, anchors.z_nadir
    span = nadir - ideal
    if np.any(span <= 0):
        raise ConfigurationError(f"degenerate normalization: ideal {ideal} vs nadir {nadir}")
    mu = anchors.normalized_anchors()
    z = mu.T @ np.asarray(weights, dtype=float)
    v = mu[0] - mu[1]
    lower, upper = _control_bounds(ev)

    def objective(x):
        return (ev.f1(x) - ideal[0]) / span[0]

    def gradient(x):
        return ev.f1_grad(x) / span[0]

    def normal_fun(x):
        fbar = (np.array([ev.f1(x), ev.f2(x)]) - ideal) / span
        return float(v @ (fbar - z))

    def normal_grad(x):
        return v[0] * ev.f1_grad(x) / span[0] + v[1] * ev.f2_grad(x) / span[1]

    constraint = Constraint(normal_fun, normal_grad, name="normal half-plane")
    return ScalarProblem(objective, gradient, lower, upper, constraints=[constraint],
                         name=f"normal-constraint w={weights[0]:.4g}")


def parameter_set(method: str, n_subproblems: int, anchors: AnchorData) -> list[ScalarizationSpec]:
    """The sweep parameters, ordered to move away from the ``c = 0`` end.

    Evenly spaced eps over ``[0, f2 at the f1 anchor]`` or evenly spaced first
    weights over ``[0, 1]``.
    """
    if n_subproblems < 1:
        raise ConfigurationError("n_subproblems must be at least 1")
    grid = np.linspace(0.0, 1.0, n_subproblems) if n_subproblems > 1 else np.array([0.0])
    if method == "eps-constraint":
        top = float(anchors.z_nadir[1])
        return [ScalarizationSpec(method, eps=float(s * top)) for s in grid]
    if method in ("chebyshev", "goal-attainment"):
        ref = tuple(float(v) for v in anchors.utopia)
        return [ScalarizationSpec(method, weights=clean_weights(s), reference=ref) for s in grid]
    if method == "normal-constraint":
        return [ScalarizationSpec(method, weights=clean_weights(s)) for s in grid]
    raise ConfigurationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def build_problem(spec: ScalarizationSpec, evaluator: Evaluator, anchors: AnchorData | None = None) -> ScalarProblem:
    if spec.method == "eps-constraint":
        return eps_constraint_problem(spec.eps, evaluator)
    if spec.method in ("chebyshev", "goal-attainment"):
        reference = spec.reference
        if reference is None:
            if anchors is None:
                raise ConfigurationError(f"{spec.method} needs a reference point or anchors")
            reference = tuple(anchors.utopia)
        if spec.method == "chebyshev":
            return chebyshev_problem(spec.weights, reference, evaluator)
        return goal_attainment_problem(spec.weights, reference, evaluator)
    if anchors is None:
        raise ConfigurationError("normal-constraint needs anchors")
    return normal_constraint_problem(spec.weights, anchors, evaluator)


def solve_scalarized(spec: ScalarizationSpec, evaluator: Evaluator, x0=None,
                     anchors: AnchorData | None = None,
                     opts: SolveOptions | None = None) -> tuple[np.ndarray, SolveResult]:
    """Solve one scalarized problem; returns the control and the raw result."""
    problem = build_problem(spec, evaluator, anchors)
    n = evaluator.n_nodes
    control0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)[:n]
    if spec.method == "goal-attainment":
        reference = spec.reference if spec.reference is not None else tuple(anchors.utopia)
        start = goal_attainment_start(np.clip(control0, 0, 1), spec.weights, reference, evaluator)
    else:
        start = control0
    result = minimize(problem, start, opts)
    return result.x_star[:n].copy(), result


def approximate_pareto(
    method: str,
    n_subproblems: int = 100,
    params: ModelParameters | None = None,
    grid: TimeGrid | None = None,
    opts: SolveOptions | None = None,
    init: StateVector | None = None,
    anchors: AnchorData | None = None,
    specs: list[ScalarizationSpec] | None = None,
) -> ParetoArchive:
    """Warm-started sweep over the method's parameter set.

    Starts from the null control; each subproblem starts from the last
    successful minimizer. Failed solves stay in the archive with their status.
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    ev = Evaluator(params, grid, init)
    opts = opts or SolveOptions()
    if anchors is None:
        anchors = compute_anchors(ev, opts)
    if specs is None:
        specs = parameter_set(method, n_subproblems, anchors)
    archive = ParetoArchive(
        method=method,
        config={
            "method": method,
            "n_subproblems": len(specs),
            "params": ev.params.to_dict(),
            "grid": ev.grid.to_dict(),
            "init": ev.init.to_dict(),
            "solver": {
                "max_function_evaluations": opts.max_function_evaluations,
                "gradient_mode": opts.gradient_mode,
                "constraint_tolerance": opts.constraint_tolerance,
                "stationarity_tolerance": opts.stationarity_tolerance,
            },
        },
        anchors=anchors,
    )
    x0 = np.zeros(ev.n_nodes)
    started = time.perf_counter()
    for k, spec in enumerate(specs):
        control, result = solve_scalarized(spec, ev, x0, anchors, opts)
        archive.entries.append(ArchiveEntry(control, ev.point(control), spec, result.status,
                                            result.evaluations_used))
        log.debug("%s %d/%d beta=%.6g f=(%.6g, %.6g) %s evals=%d", method, k + 1, len(specs),
                  spec.beta_param, *archive.entries[-1].point, result.status, result.evaluations_used)
        if result.status == CONVERGED:
            x0 = control
    log.info("%s: %d subproblems in %.1fs, %d failed", method, len(specs),
             time.perf_counter() - started, archive.failures())
    return archive
