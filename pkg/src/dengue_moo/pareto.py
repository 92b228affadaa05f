"""Dominance, filtering, normalization, 2-D hypervolume and knee points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateFrontError

# relative distance below which a front counts as collinear for knee purposes
COLLINEAR_TOL = 1e-12


def dominates(a, b) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_filter(points) -> np.ndarray:
    """Indices of the nondominated points, deduplicated, ordered by ascending f2.

    Among exact duplicates the first occurrence is kept.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(0, dtype=int)
    # sort by f1 then f2; a point survives if its f2 beats every earlier f2
    order = np.lexsort((np.arange(len(pts)), pts[:, 1], pts[:, 0]))
    keep = []
    best_f2 = np.inf
    for i in order:
        if pts[i, 1] < best_f2:
            keep.append(i)
            best_f2 = pts[i, 1]
    keep = np.array(keep, dtype=int)
    return keep[np.argsort(pts[keep, 1], kind="stable")]


def filter_front(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return pts[nondominated_filter(pts)]


def normalize_objectives(points, ideal, nadir) -> np.ndarray:
    """Affine map sending ``ideal`` to the origin and ``nadir`` to (1, 1)."""
    ideal = np.asarray(ideal, dtype=float)
    nadir = np.asarray(nadir, dtype=float)
    span = nadir - ideal
    if np.any(span <= 0):
        raise ConfigurationError(f"nadir {nadir} must exceed ideal {ideal} in every component")
    return (np.asarray(points, dtype=float) - ideal) / span


def hypervolume_2d(points, reference=(1.0, 1.0)) -> float:
    """Area dominated by ``points`` and bounded by ``reference`` (minimization).

    Points that do not strictly dominate the reference in both coordinates
    add nothing.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    r1, r2 = (float(v) for v in reference)
    pts = pts[(pts[:, 0] < r1) & (pts[:, 1] < r2)]
    if len(pts) == 0:
        return 0.0
    front = filter_front(pts)
    # ascending f2 means descending f1 along the front; sweep in f1 order
    front = front[np.argsort(front[:, 0], kind="stable")]
    area = 0.0
    ceiling = r2
    for f1, f2 in front:
        area += (r1 - f1) * (ceiling - f2)
        ceiling = f2
    return float(area)


def hypervolume_monte_carlo(points, reference=(1.0, 1.0), n_samples: int = 1_000_000,
                            rng=None, lower=(0.0, 0.0)) -> float:
    """Sampling estimate of the dominated area inside ``[lower, reference]``."""
    rng = np.random.default_rng(rng)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(reference, dtype=float)
    samples = lo + (hi - lo) * rng.random((n_samples, 2))
    covered = np.zeros(n_samples, dtype=bool)
    for f1, f2 in pts:
        covered |= (samples[:, 0] >= f1) & (samples[:, 1] >= f2)
    return float(covered.mean() * np.prod(hi - lo))


@dataclass(frozen=True)
class Knee:
    index: int
    point: tuple[float, float]
    distance: float


def knee_distances(points) -> np.ndarray:
    """Signed distance of every point from the line through the two extremes.

    Positive values lie on the side of the origin (toward the ideal point).
    Extremes are the points with the smallest f1 and the smallest f2.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    p1 = pts[np.lexsort((pts[:, 1], pts[:, 0]))[0]]
    p2 = pts[np.lexsort((pts[:, 0], pts[:, 1]))[0]]
    direction = p2 - p1
    length = float(np.hypot(*direction))
    if length == 0.0:
        raise DegenerateFrontError("front extremes coincide")
    normal = np.array([-direction[1], direction[0]]) / length
    # orient the normal toward the ideal corner
    if np.dot(normal, np.array([p1[0], p2[1]]) - p1) < 0:
        normal = -normal
    return (pts - p1) @ normal


def knee_point(points) -> Knee:
    """Point of maximum perpendicular distance from the extreme-point line.

    Only points on the ideal side of the line qualify; ties go to the
    smaller f1. Expects normalized, nondominated points.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise DegenerateFrontError(f"knee needs at least 3 points, got {len(pts)}")
    dist = knee_distances(pts)
    best = float(dist.max())
    if best <= COLLINEAR_TOL:
        raise DegenerateFrontError("front is collinear: no point lies off the extreme-point line")
    tied = np.flatnonzero(dist >= best - COLLINEAR_TOL)
    index = int(tied[np.argmin(pts[tied, 0])])
    return Knee(index=index, point=(float(pts[index, 0]), float(pts[index, 1])), distance=float(dist[index]))


def is_convex_front(points, tol: float = 1e-9) -> bool:
    """Whether the filtered front bends toward the ideal point everywhere."""
    front = filter_front(points)
    front = front[np.argsort(front[:, 0])]
    if len(front) < 3:
        return True
    d1 = np.diff(front, axis=0)
    cross = d1[:-1, 0] * d1[1:, 1] - d1[:-1, 1] * d1[1:, 0]
    return bool(np.all(cross >= -tol))
