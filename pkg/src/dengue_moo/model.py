"""Dengue transmission model with an adulticide control.

Eight normalized compartments: humans ``s_h, e_h, i_h, r_h`` (fractions of
``N_h``), aquatic vectors ``a_m`` (fraction of ``k N_h``) and adult vectors
``s_m, e_m, i_m`` (fractions of ``m N_h``). The control ``c(t)`` in [0, 1]
removes adult mosquitoes at rate ``c``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ConfigurationError

STATE_NAMES = ("s_h", "e_h", "i_h", "r_h", "a_m", "s_m", "e_m", "i_m")
I_H = STATE_NAMES.index("i_h")


@dataclass(frozen=True)
class ModelParameters:
    """Model rates, all per day unless noted.

    Defaults are the baseline outbreak values. Quantities given as periods
    (lifespans, incubation times) are stored as their rates.
    """

    N_h: float = 480000.0
    B: float = 1.0
    beta_mh: float = 0.375
    beta_hm: float = 0.375
    mu_h: float = 1.0 / (71 * 365)
    eta_h: float = 1.0 / 3
    mu_m: float = 1.0 / 11
    phi: float = 6.0
    mu_A: float = 1.0 / 4
    eta_A: float = 0.08
    eta_m: float = 1.0 / 11
    nu_h: float = 1.0 / 4
    m: float = 6.0
    k: float = 3.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(f"parameter {f.name!r} must be a positive finite number, got {value!r}")
        for name in ("beta_mh", "beta_hm"):
            if getattr(self, name) > 1:
                raise ConfigurationError(f"parameter {name!r} is a probability, got {getattr(self, name)}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in _kernels.PARAM_ORDER], dtype=float)

    def with_overrides(self, **overrides) -> ModelParameters:
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigurationError(f"unknown model parameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StateVector:
    s_h: float = 0.99865
    e_h: float = 0.00035
    i_h: float = 0.001
    r_h: float = 0.0
    a_m: float = 1.0
    s_m: float = 1.0
    e_m: float = 0.0
    i_m: float = 0.0

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("initial state must be finite")
        if abs(values[:4].sum() - 1.0) > 1e-9:
            raise ConfigurationError(
                f"human fractions must sum to 1, got {values[:4].sum():.12g}"
            )

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STATE_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> StateVector:
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TimeGrid:
    t0: float = 0.0
    T: float = 84.0
    h: float = 0.25

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigurationError(f"step h must be positive, got {self.h}")
        steps = (self.T - self.t0) / self.h
        if steps < 1 or abs(steps - round(steps)) > 1e-9:
            raise ConfigurationError(
                f"horizon [{self.t0}, {self.T}] is not an integer number of steps of {self.h}"
            )

    @property
    def n_nodes(self) -> int:
        return int(round((self.T - self.t0) / self.h)) + 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_nodes)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def refined(self, factor: int = 2) -> TimeGrid:
        return TimeGrid(self.t0, self.T, self.h / factor)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StateTrajectory:
    states: np.ndarray
    grid: TimeGrid
    control: np.ndarray | None = field(default=None, repr=False)

    def __getattr__(self, name):
        # compartment columns by name, e.g. ``traj.i_h``
        if name in STATE_NAMES:
            return self.states[:, STATE_NAMES.index(name)]
        raise AttributeError(name)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def human_total(self) -> np.ndarray:
        return self.states[:, :4].sum(axis=1)


def check_control(control, grid: TimeGrid) -> np.ndarray:
    """Return ``control`` as a float array after validating length and box."""
    c = np.asarray(control, dtype=float)
    if c.ndim == 0:
        c = np.full(grid.n_nodes, float(c))
    if c.shape != (grid.n_nodes,):
        raise ConfigurationError(
            f"control has {c.size} values but the grid has {grid.n_nodes} nodes"
        )
    if not np.all(np.isfinite(c)) or c.min() < 0.0 or c.max() > 1.0:
        raise ConfigurationError("control values must lie in [0, 1]")
    return c


def rhs(state, c: float, params: ModelParameters) -> np.ndarray:
    """Time derivative of the eight normalized compartments."""
    y = state.as_array() if isinstance(state, StateVector) else np.asarray(state, dtype=float)
    out = np.empty(_kernels.N_STATES)
    _kernels.rhs_into(y, float(c), params.as_array(), out)
    return out


def integrate_rk4(
    control,
    params: ModelParameters | None = None,
    grid: TimeGrid | None = None,
    init: StateVector | None = None,
) -> StateTrajectory:
    """Classic fixed-step RK4 driven by a nodal control.

    The control is piecewise linear between nodes, so both half-step stages of
    an interval see the mean of its two end values.
    """
    params = params or ModelParameters()
    grid = grid or TimeGrid()
    init = init or StateVector()
    c = check_control(control, grid)
    states = _kernels.rk4_forward(init.as_array(), c, params.as_array(), grid.h)
    return StateTrajectory(states=states, grid=grid, control=c)


@dataclass(frozen=True)
class ModelConfig:
    params: ModelParameters = field(default_factory=ModelParameters)
    init: StateVector = field(default_factory=StateVector)
    grid: TimeGrid = field(default_factory=TimeGrid)


def load_model_config(source) -> ModelConfig:
    """Build a model configuration from a JSON file path or a mapping.

    Parameter keys sit at the top level (or under ``"params"``); initial
    conditions under ``"init"`` and grid settings under ``"grid"``. Missing
    keys keep their defaults. Keys meant for other layers (``method``,
    ``solver`` ...) are ignored here.
    """
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text())
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {source}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {source} is not valid JSON: {exc}") from exc
    else:
        data = dict(source or {})
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")

    param_names = {f.name for f in fields(ModelParameters)}
    param_values = {k: v for k, v in data.items() if k in param_names}
    param_values.update(data.get("params", {}))
    params = ModelParameters().with_overrides(**param_values)

    init_values = data.get("init", {})
    unknown = set(init_values) - set(STATE_NAMES)
    if unknown:
        raise ConfigurationError(f"unknown initial-state key(s): {', '.join(sorted(unknown))}")
    init = replace(StateVector(), **{k: float(v) for k, v in init_values.items()})

    grid_values = data.get("grid", {})
    unknown = set(grid_values) - {"t0", "T", "h"}
    if unknown:
        raise ConfigurationError(f"unknown grid key(s): {', '.join(sorted(unknown))}")
    grid = replace(TimeGrid(), **{k: float(v) for k, v in grid_values.items()})
    return ModelConfig(params=params, init=init, grid=grid)
