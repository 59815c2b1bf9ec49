"""Closed convex sets with exact Euclidean projections.

Every supported variant has a closed-form projection, so the classical
projection identities (variational inequality, non-expansiveness,
idempotence) hold to rounding error.  On top of the projections the
module provides

* the joint-infeasibility objective ``0.5 * sum_i ||x - P_i(x)||^2`` and
  its gradient ``sum_i (x - P_i(x))``, which interpret constrained
  averaging as gradient descent on a measure of distance to feasibility;
* :func:`intersection_error_bound`, a computable bound on how far an
  average of per-set feasible points can be from the intersection of the
  sets, valid whenever a ball of known radius fits inside every set;
* :func:`project_intersection`, a cyclic-correction (Dykstra) iteration
  used purely as a metric oracle for distances to intersections.

Vectors are plain 1-D float64 numpy arrays.  ``project``, ``distance``
and ``contains`` also accept batches of shape ``(..., n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FEASIBILITY_TOL = 1e-9
DYKSTRA_TOL = 1e-12


def as_vector(x, dim=None, name="x") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array, optionally of length ``dim``."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must have finite entries")
    if dim is not None and v.size != dim:
        raise ValueError(f"{name} has dimension {v.size}, expected {dim}")
    return v


class ConvexSet:
    """Nonempty closed convex subset of R^n with a closed-form projection."""

    dim: int

    def project(self, x):
        """Closest point of the set to ``x`` in the Euclidean norm."""
        raise NotImplementedError

    def distance(self, x):
        x = self._check_point(x)
        d = np.linalg.norm(x - self.project(x), axis=-1)
        return float(d) if d.ndim == 0 else d

    def contains(self, x, tol=FEASIBILITY_TOL):
        if tol < 0:
            raise ValueError("tol must be nonnegative")
        return self.distance(x) <= tol

    def interior_radius(self, point) -> float:
        """Largest r >= 0 such that the closed r-ball around ``point`` fits in the set.

        Returns 0 for boundary and exterior points alike; a positive value
        certifies that ``point`` is interior with margin r.
        """
        raise NotImplementedError

    def bounding_box(self):
        """Tight ``(lo, hi)`` coordinate bounds, or None when unbounded."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            got = x.shape[-1] if x.ndim else 0
            raise ValueError(f"point has dimension {got}, expected {self.dim}")
        if not np.all(np.isfinite(x)):
            raise ValueError("point must have finite entries")
        return x


class Box(ConvexSet):
    """Axis-aligned box ``{x : lo <= x <= hi}`` (componentwise)."""

    def __init__(self, lo, hi):
        self.lo = as_vector(lo, name="lo")
        self.hi = as_vector(hi, self.lo.size, name="hi")
        if np.any(self.lo > self.hi):
            raise ValueError("box requires lo <= hi componentwise")
        self.dim = self.lo.size

    def project(self, x):
        return np.clip(self._check_point(x), self.lo, self.hi)

    def interior_radius(self, point):
        point = as_vector(point, self.dim, "point")
        slack = min(np.min(point - self.lo), np.min(self.hi - point))
        return float(max(slack, 0.0))

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    def __eq__(self, other):
        return (
            isinstance(other, Box)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class Ball(ConvexSet):
    """Euclidean ball ``{x : ||x - center|| <= radius}``."""

    def __init__(self, center, radius):
        self.center = as_vector(center, name="center")
        self.radius = float(radius)
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError("ball requires radius > 0")
        self.dim = self.center.size

    def project(self, x):
        x = self._check_point(x)
        d = x - self.center
        r = np.linalg.norm(d, axis=-1)
        # branchless: scale is 1 inside, radius/r outside; max() avoids 0/0
        scale = self.radius / np.maximum(r, self.radius)
        return self.center + d * np.expand_dims(scale, -1)

    def distance(self, x):
        x = self._check_point(x)
        r = np.linalg.norm(x - self.center, axis=-1)
        d = np.maximum(r - self.radius, 0.0)
        return float(d) if d.ndim == 0 else d

    def interior_radius(self, point):
        point = as_vector(point, self.dim, "point")
        return float(max(self.radius - np.linalg.norm(point - self.center), 0.0))

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}

    def __eq__(self, other):
        return (
            isinstance(other, Ball)
            and np.array_equal(self.center, other.center)
            and self.radius == other.radius
        )

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Halfspace(ConvexSet):
    """Halfspace ``{x : normal . x <= offset}`` with a nonzero normal."""

    def __init__(self, normal, offset):
        self.normal = as_vector(normal, name="normal")
        if not np.any(self.normal != 0.0):
            raise ValueError("halfspace normal must be nonzero")
        self.offset = float(offset)
        if not math.isfinite(self.offset):
            raise ValueError("halfspace offset must be finite")
        self.dim = self.normal.size
        self._norm_sq = float(self.normal @ self.normal)
        self._norm = math.sqrt(self._norm_sq)

    def project(self, x):
        x = self._check_point(x)
        excess = np.maximum(x @ self.normal - self.offset, 0.0)
        return x - np.expand_dims(excess / self._norm_sq, -1) * self.normal

    def distance(self, x):
        x = self._check_point(x)
        d = np.maximum(x @ self.normal - self.offset, 0.0) / self._norm
        return float(d) if np.ndim(d) == 0 else d

    def interior_radius(self, point):
        point = as_vector(point, self.dim, "point")
        return float(max((self.offset - point @ self.normal) / self._norm, 0.0))

    def to_dict(self):
        return {"type": "halfspace", "normal": self.normal.tolist(), "offset": self.offset}

    def __eq__(self, other):
        return (
            isinstance(other, Halfspace)
            and np.array_equal(self.normal, other.normal)
            and self.offset == other.offset
        )

    def __repr__(self):
        return f"Halfspace(normal={self.normal.tolist()}, offset={self.offset})"


class Hyperplane(ConvexSet):
    """Affine hyperplane ``{x : normal . x = offset}`` with a nonzero normal."""

    def __init__(self, normal, offset):
        self.normal = as_vector(normal, name="normal")
        if not np.any(self.normal != 0.0):
            raise ValueError("hyperplane normal must be nonzero")
        self.offset = float(offset)
        if not math.isfinite(self.offset):
            raise ValueError("hyperplane offset must be finite")
        self.dim = self.normal.size
        self._norm_sq = float(self.normal @ self.normal)
        self._norm = math.sqrt(self._norm_sq)

    def project(self, x):
        x = self._check_point(x)
        excess = x @ self.normal - self.offset
        return x - np.expand_dims(excess / self._norm_sq, -1) * self.normal

    def distance(self, x):
        x = self._check_point(x)
        d = np.abs(x @ self.normal - self.offset) / self._norm
        return float(d) if np.ndim(d) == 0 else d

    def interior_radius(self, point):
        as_vector(point, self.dim, "point")
        return 0.0  # a hyperplane has empty interior

    def to_dict(self):
        return {"type": "hyperplane", "normal": self.normal.tolist(), "offset": self.offset}

    def __eq__(self, other):
        return (
            isinstance(other, Hyperplane)
            and np.array_equal(self.normal, other.normal)
            and self.offset == other.offset
        )

    def __repr__(self):
        return f"Hyperplane(normal={self.normal.tolist()}, offset={self.offset})"


class FullSpace(ConvexSet):
    """All of R^n; the identity projection."""

    def __init__(self, dim):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")

    def project(self, x):
        return self._check_point(x).copy()

    def distance(self, x):
        x = self._check_point(x)
        return 0.0 if x.ndim == 1 else np.zeros(x.shape[:-1])

    def interior_radius(self, point):
        as_vector(point, self.dim, "point")
        return math.inf

    def to_dict(self):
        return {"type": "fullspace", "dim": self.dim}

    def __eq__(self, other):
        return isinstance(other, FullSpace) and self.dim == other.dim

    def __repr__(self):
        return f"FullSpace(dim={self.dim})"


_SET_FIELDS = {
    "box": ("lo", "hi"),
    "ball": ("center", "radius"),
    "halfspace": ("normal", "offset"),
    "hyperplane": ("normal", "offset"),
    "fullspace": ("dim",),
}


def set_from_dict(data) -> ConvexSet:
    """Build a set from its tagged-record form, rejecting unknown fields."""
    if not isinstance(data, dict):
        raise ValueError("set description must be an object")
    kind = data.get("type")
    if kind not in _SET_FIELDS:
        raise ValueError(f"unknown set type {kind!r}")
    fields = _SET_FIELDS[kind]
    extra = sorted(set(data) - {"type", *fields})
    if extra:
        raise ValueError(f"unknown fields for {kind}: {extra}")
    missing = [f for f in fields if f not in data]
    if missing:
        raise ValueError(f"missing fields for {kind}: {missing}")
    if kind == "box":
        return Box(data["lo"], data["hi"])
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    if kind == "halfspace":
        return Halfspace(data["normal"], data["offset"])
    if kind == "hyperplane":
        return Hyperplane(data["normal"], data["offset"])
    return FullSpace(data["dim"])


def _require_sets(sets) -> int:
    if not sets:
        raise ValueError("need at least one set")
    dim = sets[0].dim
    for i, s in enumerate(sets):
        if s.dim != dim:
            raise ValueError(f"sets[{i}] has dimension {s.dim}, expected {dim}")
    return dim


def feasibility_objective(sets, x) -> float:
    """``0.5 * sum_i dist(x, X_i)^2`` over the given sets."""
    dim = _require_sets(sets)
    x = as_vector(x, dim)
    return 0.5 * float(sum(s.distance(x) ** 2 for s in sets))


def feasibility_gradient(sets, x) -> np.ndarray:
    """Gradient of :func:`feasibility_objective`: ``sum_i (x - P_i(x))``."""
    dim = _require_sets(sets)
    x = as_vector(x, dim)
    g = np.zeros(dim)
    for s in sets:
        g += x - s.project(x)
    return g


@dataclass
class ErrorBoundResult:
    """Certified blend of an averaged point toward a set intersection.

    ``s`` lies in every input set, ``epsilon`` is the summed distance of
    the average ``xhat`` from the individual sets, and ``bound`` is the
    certified ceiling on ``||xhat - s||``.
    """

    s: np.ndarray
    epsilon: float
    bound: float
    xhat: np.ndarray


def intersection_error_bound(sets, points, witness, radius, feas_tol=FEASIBILITY_TOL) -> ErrorBoundResult:
    """Bound the distance of ``mean(points)`` from the intersection of ``sets``.

    ``points[i]`` must belong to ``sets[i]`` and the closed ``radius``-ball
    around ``witness`` must fit inside every set; both preconditions are
    validated.  The returned blend ``s = (eps * witness + radius * xhat) /
    (eps + radius)`` is feasible for every set and satisfies

        ||xhat - s|| <= (sum_j ||points[j] - witness||) * eps / (radius * m)

    with ``eps = sum_j dist(xhat, X_j)``.  Both guarantees are re-checked at
    runtime before returning because downstream rate certificates rely on
    them; a failure indicates a bug, not bad input.
    """
    dim = _require_sets(sets)
    m = len(sets)
    if len(points) != m:
        raise ValueError(f"expected {m} points, got {len(points)}")
    witness = as_vector(witness, dim, "witness")
    radius = float(radius)
    if not (math.isfinite(radius) and radius > 0):
        raise ValueError("radius must be positive")
    pts = np.asarray([as_vector(p, dim, f"points[{i}]") for i, p in enumerate(points)])
    for i, s in enumerate(sets):
        d = s.distance(pts[i])
        if d > feas_tol:
            raise ValueError(f"points[{i}] is outside sets[{i}] (distance {d:.3g})")
    for i, s in enumerate(sets):
        have = s.interior_radius(witness)
        if have < radius:
            raise ValueError(
                f"ball of radius {radius:.6g} around the witness does not fit in "
                f"sets[{i}] (largest admissible radius {have:.6g})"
            )

    xhat = pts.mean(axis=0)
    epsilon = float(sum(s.distance(xhat) for s in sets))
    if epsilon == 0.0:
        blend = xhat.copy()
    else:
        blend = (epsilon * witness + radius * xhat) / (epsilon + radius)
    bound = float(np.linalg.norm(pts - witness, axis=1).sum() * epsilon / (radius * m))

    for i, s in enumerate(sets):
        d = s.distance(blend)
        if d > feas_tol:
            raise RuntimeError(
                f"internal error: blended point left sets[{i}] by {d:.3g}"
            )
    gap = float(np.linalg.norm(xhat - blend))
    if gap > bound + 1e-12:
        raise RuntimeError(f"internal error: ||xhat - s|| = {gap:.6g} exceeds bound {bound:.6g}")
    return ErrorBoundResult(s=blend, epsilon=epsilon, bound=bound, xhat=xhat)


def project_intersection(sets, x, tol=DYKSTRA_TOL, max_sweeps=100_000) -> np.ndarray:
    """Project ``x`` onto the intersection of ``sets`` by cyclic corrections.

    Dykstra's iteration: each sweep projects through the sets in order,
    carrying a correction term per set so the limit is the exact projection
    (not merely a feasible point).  Stops when a full sweep moves the
    iterate by less than ``tol``.  Raises ``RuntimeError`` if the sweep
    budget is exhausted, which usually means the intersection is empty.
    """
    dim = _require_sets(sets)
    x = as_vector(x, dim)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if all(s.distance(x) == 0.0 for s in sets):
        return x.copy()
    y = x.copy()
    corrections = np.zeros((len(sets), dim))
    for _ in range(max_sweeps):
        prev = y.copy()
        for i, s in enumerate(sets):
            z = y + corrections[i]
            y = s.project(z)
            corrections[i] = z - y
        if np.linalg.norm(y - prev) < tol:
            return y
    raise RuntimeError(
        f"cyclic projection did not converge within {max_sweeps} sweeps; "
        "the intersection may be empty"
    )


def distance_to_intersection(sets, x, tol=DYKSTRA_TOL, max_sweeps=100_000) -> float:
    """Euclidean distance from ``x`` to the intersection of ``sets``."""
    dim = _require_sets(sets)
    x = as_vector(x, dim)
    return float(np.linalg.norm(x - project_intersection(sets, x, tol=tol, max_sweeps=max_sweeps)))
