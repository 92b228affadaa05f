"""CSV import/export for trajectories, archives, fronts and surfaces.

Every file starts with ``#`` comment lines carrying the resolved run
configuration as JSON, so outputs are self-describing. Floats are written
with 17 significant digits and read back bit-for-bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .model import STATE_NAMES, StateTrajectory

TRAJECTORY_COLUMNS = ("t",) + STATE_NAMES
ARCHIVE_COLUMNS = ("method", "beta_param", "f1", "f2", "status")
FRONT_COLUMNS = ("f1", "f2")
CONFIG_PREFIX = "# config: "


def _fmt(x) -> str:
    return repr(float(x))


def _write(path, header: list[str], rows, config: dict | None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if config is not None:
            fh.write(CONFIG_PREFIX + json.dumps(config, sort_keys=True, default=str) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(header)
        writer.writerows(rows)
    return path


def write_table(path, header: list[str], rows, config: dict | None = None) -> Path:
    return _write(path, header, rows, config)


def _read(path) -> tuple[dict, list[dict]]:
    """Config from the header comment plus the data rows as dicts."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"file not found: {path}")
    config: dict = {}
    lines = []
    with path.open() as fh:
        for line in fh:
            if line.startswith(CONFIG_PREFIX):
                config = json.loads(line[len(CONFIG_PREFIX):])
            elif not line.startswith("#") and line.strip():
                lines.append(line)
    return config, list(csv.DictReader(lines))


def read_config_header(path) -> dict:
    return _read(path)[0]


def read_rows(path) -> tuple[dict, list[dict]]:
    """Header config and rows of any file written by this module."""
    return _read(path)


def write_trajectory(path, traj: StateTrajectory, config: dict | None = None) -> Path:
    rows = ([_fmt(t)] + [_fmt(v) for v in state] for t, state in zip(traj.times, traj.states))
    return _write(path, list(TRAJECTORY_COLUMNS), rows, config)


def read_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    """Times and the (n, 8) state matrix."""
    _, rows = _read(path)
    data = np.array([[float(r[c]) for c in TRAJECTORY_COLUMNS] for r in rows]).reshape(-1, len(TRAJECTORY_COLUMNS))
    return data[:, 0], data[:, 1:]


def write_control(path, times, control, config: dict | None = None) -> Path:
    return _write(path, ["t", "c"], ([_fmt(t), _fmt(c)] for t, c in zip(times, control)), config)


def read_control(path) -> np.ndarray:
    _, rows = _read(path)
    if not rows or "c" not in rows[0]:
        raise ConfigurationError(f"{path}: control file needs a 'c' column")
    return np.array([float(r["c"]) for r in rows])


def controls_path(archive_path) -> Path:
    """Sidecar file holding one full control trajectory per archive row."""
    p = Path(archive_path)
    return p.with_name(p.stem + ".controls.csv")


def archive_header(archive, config: dict | None = None) -> dict:
    """Run configuration plus the anchors needed to renormalize the points."""
    cfg = dict(archive.config if config is None else config)
    if archive.anchors is not None:
        cfg["anchors"] = {"ideal": archive.anchors.z_ideal.tolist(),
                          "nadir": archive.anchors.z_nadir.tolist()}
        if archive.method in ("chebyshev", "goal-attainment"):
            cfg["reference"] = archive.anchors.utopia.tolist()
    cfg["config_hash"] = archive.config_hash
    return cfg


def write_archive(path, archive, config: dict | None = None, times=None) -> Path:
    """Archive rows plus the sidecar controls file (row i = entry i)."""
    cfg = archive_header(archive, config)
    rows = ([e.spec.method, _fmt(e.spec.beta_param), _fmt(e.point.f1), _fmt(e.point.f2), e.status]
            for e in archive.entries)
    out = _write(path, list(ARCHIVE_COLUMNS), rows, cfg)
    controls = archive.controls() if len(archive) else np.zeros((0, 0))
    n = controls.shape[1] if controls.ndim == 2 else 0
    header = [_fmt(t) for t in times] if times is not None else [f"c{j}" for j in range(n)]
    _write(controls_path(path), header, ([_fmt(v) for v in row] for row in controls), cfg)
    return out


@dataclass
class ArchiveTable:
    """An archive read back from disk."""

    methods: list[str]
    beta: np.ndarray
    points: np.ndarray
    status: list[str]
    config: dict = field(default_factory=dict)
    controls: np.ndarray | None = field(default=None, repr=False)
    control_times: np.ndarray | None = field(default=None, repr=False)

    @property
    def ideal(self):
        a = self.config.get("anchors")
        return None if a is None else np.array(a["ideal"], dtype=float)

    @property
    def nadir(self):
        a = self.config.get("anchors")
        return None if a is None else np.array(a["nadir"], dtype=float)


def read_archive(path) -> ArchiveTable:
    """Read an archive CSV, or a bare front with only f1/f2 columns."""
    config, rows = _read(path)
    if rows and not set(FRONT_COLUMNS) <= set(rows[0]):
        raise ConfigurationError(f"{path}: expected columns f1 and f2, got {', '.join(rows[0])}")
    points = np.array([[float(r["f1"]), float(r["f2"])] for r in rows]).reshape(-1, 2)
    table = ArchiveTable(
        methods=[r.get("method") or "" for r in rows],
        beta=np.array([float(r["beta_param"]) if r.get("beta_param") else np.nan for r in rows]),
        points=points,
        status=[r.get("status") or "" for r in rows],
        config=config,
    )
    sidecar = controls_path(path)
    if sidecar.exists():
        with sidecar.open() as fh:
            data = [line for line in fh if not line.startswith("#")]
        rows = list(csv.reader(data))
        values = np.array([[float(v) for v in row] for row in rows[1:]])
        if len(values) == len(points):
            table.controls = values
            if rows and all(not h.startswith("c") for h in rows[0]):
                table.control_times = np.array([float(h) for h in rows[0]])
    return table


def write_front(path, points, control_refs=None, config: dict | None = None) -> Path:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    header = list(FRONT_COLUMNS) + (["control_ref"] if control_refs is not None else [])
    refs = control_refs if control_refs is not None else [None] * len(pts)
    rows = ([_fmt(a), _fmt(b)] + ([str(r)] if control_refs is not None else []) for (a, b), r in zip(pts, refs))
    return _write(path, header, rows, config)


def read_front(path) -> np.ndarray:
    return read_archive(path).points


def write_matrix(path, row_values, col_values, matrix, config: dict | None = None) -> Path:
    """Gnuplot ``nonuniform matrix`` layout.

    First row: column count then the column coordinates; every further row:
    its row coordinate then the values.
    """
    m = np.asarray(matrix, dtype=float)
    cols = np.asarray(col_values, dtype=float)
    if m.shape != (len(row_values), len(cols)):
        raise ConfigurationError(f"matrix shape {m.shape} does not match {len(row_values)} x {len(cols)}")
    first = [str(len(cols))] + [_fmt(c) for c in cols]
    rows = ([_fmt(r)] + [_fmt(v) for v in row] for r, row in zip(row_values, m))
    return _write(path, first, rows, config)


def read_matrix(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with Path(path).open() as fh:
        data = [line for line in fh if not line.startswith("#") and line.strip()]
    rows = [[float(v) for v in r] for r in csv.reader(data)]
    cols = np.array(rows[0][1:])
    body = np.array(rows[1:]).reshape(-1, len(cols) + 1)
    return body[:, 0], cols, body[:, 1:]
