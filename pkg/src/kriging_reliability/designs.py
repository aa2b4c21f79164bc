"""Measurement-location sets on the unit cube and their geometry."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from scipy.stats import qmc

from .errors import DomainError, InputError, ShapeError

__all__ = [
    "Design",
    "fill_distance",
    "grid_design",
    "halton_design",
    "halton_points",
    "quasi_uniformity_ratio",
    "read_design_csv",
    "separation_radius",
    "uniform_random_design",
    "volume_fill_lower_bound",
    "write_design_csv",
]


@dataclass(frozen=True, eq=False)
class Design:
    """``n`` distinct points in ``[0, 1]^d`` stored as an ``(n, d)`` array.

    ``kind`` is one of ``"grid"``, ``"halton"``, ``"uniform"`` or ``"custom"``.
    Grids remember ``levels`` (points per axis) and whether the endpoints are
    included so exact rational coordinates can be rebuilt.
    """

    points: np.ndarray
    kind: str = "custom"
    seed: int | None = None
    levels: int | None = None
    endpoints: bool = True

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ShapeError("design points must be a nonempty (n, d) array")
        if not np.isfinite(pts).all():
            raise InputError("design contains non-finite coordinates")
        if (pts < 0).any() or (pts > 1).any():
            raise InputError("design coordinates must lie in [0, 1]")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise InputError("design points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


def grid_design(n: int, d: int = 1, endpoints: bool = True) -> Design:
    """Tensor grid with ``n = m^d`` points.

    With ``endpoints`` the axis values are ``k/(m-1)``; otherwise the interior
    values ``(k+1)/(m+1)``.
    """
    if d < 1:
        raise ShapeError("dimension must be positive")
    m = round(n ** (1.0 / d))
    if m**d != n:
        raise ShapeError(f"n={n} is not a perfect {d}-th power")
    if n < 2 or (endpoints and m < 2):
        raise ShapeError("a grid design needs at least two points per axis")
    axis = np.arange(m) / (m - 1) if endpoints else np.arange(1, m + 1) / (m + 1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return Design(pts, kind="grid", levels=m, endpoints=endpoints)


def halton_points(n: int, d: int = 1) -> np.ndarray:
    """First ``n`` Halton points (prime bases 2, 3, 5, ...), skipping index 0."""
    if n < 1:
        raise ShapeError("n must be at least 1")
    gen = qmc.Halton(d, scramble=False)
    gen.fast_forward(1)
    return gen.random(n)


def halton_design(n: int, d: int = 1) -> Design:
    return Design(halton_points(n, d), kind="halton")


def uniform_random_design(n: int, d: int = 1, seed: int | None = None, *, rng=None) -> Design:
    """I.i.d. uniform points; exact duplicates are redrawn.

    Pass either ``seed`` or a generator ``rng`` exposing ``random(size)``.
    """
    if n < 1:
        raise ShapeError("n must be at least 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    pts = np.asarray(rng.random((n, d)), dtype=float)
    while True:
        _, first = np.unique(pts, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(n), first)
        if dup.size == 0:
            break
        pts[dup] = rng.random((dup.size, d))
    return Design(pts, kind="uniform", seed=seed)


def fill_distance(design: Design, resolution: int = 200, method: str = "auto") -> float:
    """Largest distance from a point of ``[0,1]^d`` to its nearest design point.

    In one dimension (``method="auto"``) the value is exact. Otherwise the
    supremum is taken over a lattice of ``resolution^d`` candidates, which
    gives a lower bound of the true fill distance.
    """
    if method not in ("auto", "lattice"):
        raise InputError(f"unknown method {method!r}")
    pts = design.points
    if design.d == 1 and method == "auto":
        x = np.sort(pts[:, 0])
        gaps = np.diff(x) / 2.0
        return float(max(x[0], 1.0 - x[-1], gaps.max() if gaps.size else 0.0))
    axis = np.linspace(0.0, 1.0, resolution)
    mesh = np.meshgrid(*([axis] * design.d), indexing="ij")
    cand = np.stack([g.ravel() for g in mesh], axis=1)
    dist, _ = cKDTree(pts).query(cand)
    return float(dist.max())


def separation_radius(design: Design) -> float:
    """Half of the minimum pairwise distance."""
    if design.n < 2:
        raise DomainError("separation radius needs at least two points")
    return float(pdist(design.points).min() / 2.0)


def quasi_uniformity_ratio(design: Design, resolution: int = 200) -> float:
    return fill_distance(design, resolution) / separation_radius(design)


def volume_fill_lower_bound(n: int, d: int) -> float:
    """``(Gamma(d/2+1) / (n pi^(d/2)))^(1/d)``: no n-point set in the unit cube does better."""
    return (math.gamma(d / 2 + 1) / (n * math.pi ** (d / 2))) ** (1.0 / d)


def write_design_csv(design: Design, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(design.d)])
        for row in design.points:
            writer.writerow([repr(float(v)) for v in row])


def read_design_csv(path) -> Design:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or any(h.strip() != f"x{i + 1}" for i, h in enumerate(header)):
            raise InputError(f"{path}: expected header x1[,x2,...]")
        rows = [[float(v) for v in row] for row in reader if row]
    return Design(np.array(rows, dtype=float).reshape(-1, len(header)))
