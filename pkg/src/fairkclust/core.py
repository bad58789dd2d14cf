"""Domain types and cost evaluation for cascaded (p, q) clustering objectives."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, InvalidMetricError, UnbalancedDatasetError


class Unbounded(enum.Enum):
    """The infinite exponent. Kept apart from floats so aggregation code has to branch on it."""

    INF = "inf"

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"


INF = Unbounded.INF
Exponent = Union[int, Unbounded]


def parse_exponent(value) -> Exponent:
    """Accept 1, 2, "3", "inf", math.inf or INF."""
    if value is INF:
        return INF
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "oo", "max"):
            return INF
        value = text
    if isinstance(value, float) and math.isinf(value) and value > 0:
        return INF
    try:
        as_float = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"not an exponent: {value!r}") from None
    if not as_float.is_integer() or as_float < 1:
        raise ValueError(f"exponent must be a positive integer or inf, got {value!r}")
    return int(as_float)


@dataclass(frozen=True)
class NormSpec:
    """Outer (aggregation) exponent p and inner (ground distance) exponent q."""

    p: Exponent = 1
    q: Exponent = 2

    def __post_init__(self):
        object.__setattr__(self, "p", parse_exponent(self.p))
        object.__setattr__(self, "q", parse_exponent(self.q))

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        p, q = text.split(",")
        return cls(p, q)

    @property
    def p_is_inf(self) -> bool:
        return self.p is INF

    def power(self, d):
        """Per-point contribution: d**p for finite p, d itself for p = inf."""
        d = np.asarray(d, dtype=float)
        if self.p is INF or self.p == 1:
            return d
        return d ** self.p

    def combine(self, a, b):
        """Merge two powered partial costs."""
        return max(a, b) if self.p is INF else a + b

    def finish(self, powered_total: float) -> float:
        """Turn an accumulated powered total into a norm value."""
        if self.p is INF or self.p == 1:
            return float(powered_total)
        return float(powered_total) ** (1.0 / self.p)

    def aggregate(self, dists) -> float:
        d = np.asarray(dists, dtype=float).ravel()
        if d.size == 0:
            return 0.0
        if self.p is INF:
            return float(d.max())
        if self.p == 1:
            return math.fsum(d)
        return math.fsum(d ** self.p) ** (1.0 / self.p)

    def __str__(self):
        return f"({self.p},{self.q})"


def _cdist(a: np.ndarray, b: np.ndarray, q: Exponent) -> np.ndarray:
    if q is INF:
        return cdist(a, b, "chebyshev")
    if q == 1:
        return cdist(a, b, "cityblock")
    if q == 2:
        return cdist(a, b, "euclidean")
    return cdist(a, b, "minkowski", p=q)


def point_distance(a, b, q: Exponent = 2) -> float:
    """l_q distance between two coordinate vectors."""
    q = parse_exponent(q)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.size} vs {b.size}")
    diff = np.abs(a - b)
    if diff.size == 0:
        return 0.0
    if q is INF:
        return float(diff.max())
    if q == 1:
        return float(diff.sum())
    return float((diff ** q).sum() ** (1.0 / q))


def pairwise_distances(x, y, q: Exponent = 2) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatchError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return _cdist(x, y, parse_exponent(q))


def cascaded_norm(m, p: Exponent, q: Exponent) -> float:
    """q-norm of every row, then p-norm of the resulting vector."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    q = parse_exponent(q)
    return NormSpec(p, q).aggregate(row_norms(m, q))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class ColoredDataset:
    """Balanced point set: ell color classes of exactly n points each.

    Distances come either from coordinates (``points`` with the norm's q) or from
    an explicit ``distance_matrix`` (general finite metric, q is ignored).
    Color labels are remapped to 0..ell-1 in sorted order; the originals are kept
    in ``color_labels``.
    """

    def __init__(self, points=None, colors=None, distance_matrix=None, *, metric_tol=1e-9):
        if (points is None) == (distance_matrix is None):
            raise ValueError("give exactly one of points or distance_matrix")
        if colors is None:
            raise ValueError("colors are required")
        raw = np.asarray(colors)
        if raw.ndim != 1:
            raise ValueError("colors must be one-dimensional")
        labels, codes = np.unique(raw, return_inverse=True)
        self.color_labels = tuple(labels.tolist())
        self.colors = _frozen(codes.astype(np.int64))
        size = len(self.colors)

        if points is not None:
            pts = np.asarray(points, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.shape[0] != size:
                raise DimensionMismatchError("points and colors have different lengths")
            if not np.all(np.isfinite(pts)):
                raise ValueError("point coordinates must be finite")
            self.points = _frozen(pts)
            self.distance_matrix = None
        else:
            dm = np.asarray(distance_matrix, dtype=float)
            if dm.shape != (size, size):
                raise DimensionMismatchError("distance matrix must be N x N with N = len(colors)")
            _check_metric(dm, metric_tol)
            self.distance_matrix = _frozen(dm)
            self.points = None

        counts = np.bincount(self.colors, minlength=len(labels))
        if size == 0 or np.any(counts != counts[0]):
            raise UnbalancedDatasetError(
                "color classes must have equal sizes, got "
                + ", ".join(f"{lab}:{c}" for lab, c in zip(self.color_labels, counts))
            )
        self.num_colors = len(labels)
        self.per_color_count = int(counts[0])
        self._classes = tuple(_frozen(np.flatnonzero(self.colors == i)) for i in range(self.num_colors))

    def __len__(self):
        return len(self.colors)

    @property
    def metric_mode(self) -> bool:
        return self.distance_matrix is not None

    @property
    def dim(self):
        return None if self.points is None else self.points.shape[1]

    def class_indices(self, color: int) -> np.ndarray:
        """Global indices of color class ``color`` in input order."""
        return self._classes[color]

    def distances(self, rows, cols, q: Exponent = 2) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.metric_mode:
            return np.array(self.distance_matrix[np.ix_(rows, cols)])
        return _cdist(self.points[rows], self.points[cols], q)

    def distances_to_centers(self, rows, centers: "CenterSet", q: Exponent = 2) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        if self.metric_mode:
            if centers.indices is None:
                raise InvalidMetricError("metric-matrix mode needs centers given as point indices")
            return np.array(self.distance_matrix[np.ix_(rows, centers.indices)])
        return _cdist(self.points[rows], centers.coords, q)

    def subset_points(self, rows):
        if self.metric_mode:
            return None
        return self.points[np.asarray(rows, dtype=np.int64)]

    def __repr__(self):
        mode = "metric" if self.metric_mode else f"d={self.dim}"
        return f"ColoredDataset(ell={self.num_colors}, n={self.per_color_count}, {mode})"


def _check_metric(dm: np.ndarray, tol: float):
    if not np.all(np.isfinite(dm)) or np.any(dm < -tol):
        raise InvalidMetricError("distance matrix must be finite and nonnegative")
    if not np.allclose(dm, dm.T, atol=tol, rtol=0):
        raise InvalidMetricError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(dm)) > tol):
        raise InvalidMetricError("distance matrix has a nonzero diagonal")
    # d[i,j] <= d[i,m] + d[m,j] for all m
    for m in range(dm.shape[0]):
        if np.any(dm > dm[:, m][:, None] + dm[m][None, :] + tol):
            raise InvalidMetricError("distance matrix violates the triangle inequality")


@dataclass(frozen=True)
class CenterSet:
    """At most k centers, given as dataset indices, coordinates, or both."""

    indices: np.ndarray | None = None
    coords: np.ndarray | None = None
    k: int | None = None

    def __post_init__(self):
        if self.indices is None and self.coords is None:
            raise ValueError("a center set needs indices or coordinates")
        size = None
        if self.indices is not None:
            idx = _frozen(np.asarray(self.indices, dtype=np.int64).ravel())
            if len(np.unique(idx)) != len(idx):
                raise ValueError("center indices must be pairwise distinct")
            object.__setattr__(self, "indices", idx)
            size = len(idx)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            object.__setattr__(self, "coords", _frozen(c))
            if size is not None and c.shape[0] != size:
                raise ValueError("indices and coords disagree on the number of centers")
            size = c.shape[0]
        if size == 0:
            raise ValueError("a center set needs at least one center")
        if self.k is None:
            object.__setattr__(self, "k", size)
        elif size > self.k:
            raise ValueError(f"{size} centers exceed k={self.k}")

    def __len__(self):
        return len(self.indices) if self.indices is not None else self.coords.shape[0]

    @classmethod
    def from_indices(cls, dataset: ColoredDataset, indices, k=None) -> "CenterSet":
        idx = np.asarray(indices, dtype=np.int64)
        coords = None if dataset.metric_mode else dataset.points[idx]
        return cls(indices=idx, coords=coords, k=k)


@dataclass(frozen=True)
class FairClustering:
    """Centers plus a per-point center index; cost is recomputed on construction."""

    center_set: CenterSet
    assignment: np.ndarray
    cost: float
    norm: NormSpec
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def k(self):
        return len(self.center_set)

    def clusters(self):
        return [np.flatnonzero(self.assignment == c) for c in range(self.k)]


def point_costs(dataset: ColoredDataset, centers: CenterSet, assignment, q: Exponent) -> np.ndarray:
    """Distance of every point to its assigned center."""
    assignment = np.asarray(assignment, dtype=np.int64)
    if dataset.metric_mode:
        if centers.indices is None:
            raise InvalidMetricError("metric-matrix mode needs centers given as point indices")
        return np.array(dataset.distance_matrix[np.arange(len(dataset)), centers.indices[assignment]])
    return row_norms(dataset.points - centers.coords[assignment], q)


def row_norms(diff: np.ndarray, q: Exponent) -> np.ndarray:
    diff = np.abs(np.atleast_2d(diff))
    if q is INF:
        return diff.max(axis=1)
    if q == 1:
        return diff.sum(axis=1)
    if q == 2:
        return np.sqrt((diff * diff).sum(axis=1))
    return (diff ** q).sum(axis=1) ** (1.0 / q)


def make_clustering(dataset: ColoredDataset, centers: CenterSet, assignment, norm: NormSpec, **meta) -> FairClustering:
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape != (len(dataset),):
        raise ValueError("assignment must cover every point")
    if assignment.min() < 0 or assignment.max() >= len(centers):
        raise ValueError("assignment refers to a nonexistent center")
    cost = norm.aggregate(point_costs(dataset, centers, assignment, norm.q))
    return FairClustering(centers, _frozen(assignment), cost, norm, dict(meta))


def clustering_cost(dataset: ColoredDataset, clustering: FairClustering) -> float:
    norm = clustering.norm
    return norm.aggregate(point_costs(dataset, clustering.center_set, clustering.assignment, norm.q))


def color_histogram(dataset: ColoredDataset, assignment, k: int) -> np.ndarray:
    """k x ell table of color counts per cluster."""
    hist = np.zeros((k, dataset.num_colors), dtype=np.int64)
    np.add.at(hist, (np.asarray(assignment, dtype=np.int64), dataset.colors), 1)
    return hist


def verify_balance(dataset: ColoredDataset, clustering: FairClustering):
    """Return (balanced, histogram). Empty clusters count as balanced."""
    hist = color_histogram(dataset, clustering.assignment, clustering.k)
    ok = bool(np.all(hist == hist[:, :1]))
    return ok, hist
