"""Independent reference solutions for optimize scenarios.

The distributed run is never trusted to grade itself: reference optima
come from a closed-form route (sums of quadratics, with clamping for
one-dimensional or separable box-constrained problems) or from an
exhaustive grid search over the bounding box of the feasible region with
repeated refinement around the incumbent, feasibility handled by
projecting candidate points onto the intersection.  Where both routes
apply they agree to well under the acceptance tolerances, which is
itself checked in the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .sets import Ball, Box, FullSpace, Halfspace, Hyperplane, project_intersection

GRID_TARGET_WIDTH = 1e-6


@dataclass
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    method: str


def total_objective(functions, x):
    """``sum_i f_i(x)``; broadcasts over batches of points."""
    total = functions[0].evaluate(x)
    for f in functions[1:]:
        total = total + f.evaluate(x)
    return total


def _interval(sets):
    """Feasible interval of a one-dimensional intersection."""
    lo, hi = -math.inf, math.inf
    for s in sets:
        if isinstance(s, Box):
            lo, hi = max(lo, s.lo[0]), min(hi, s.hi[0])
        elif isinstance(s, Ball):
            lo, hi = max(lo, s.center[0] - s.radius), min(hi, s.center[0] + s.radius)
        elif isinstance(s, Halfspace):
            a, b = s.normal[0], s.offset
            if a > 0:
                hi = min(hi, b / a)
            else:
                lo = max(lo, b / a)
        elif isinstance(s, Hyperplane):
            v = s.offset / s.normal[0]
            lo, hi = max(lo, v), min(hi, v)
        elif isinstance(s, FullSpace):
            continue
    if lo > hi + 1e-12:
        raise ValueError("feasible interval is empty")
    return lo, hi


def _analytic(functions, sets, n):
    from .subgradient import Quadratic

    if not all(isinstance(f, Quadratic) for f in functions):
        return None
    q_total = sum(f.Q for f in functions)
    b_total = sum(f.b for f in functions)
    eigs = np.linalg.eigvalsh(q_total)

    if eigs.min() > 1e-10:
        x_unc = np.linalg.solve(2.0 * q_total, -b_total)
        if all(s.contains(x_unc, 1e-9) for s in sets):
            return ReferenceSolution(x_unc, float(total_objective(functions, x_unc)), "analytic")

    if n == 1:
        lo, hi = _interval(sets)
        a = float(q_total[0, 0])
        b = float(b_total[0])
        if a > 1e-10:
            x = min(max(-b / (2.0 * a), lo), hi)
        elif abs(b) > 0:
            x = lo if b > 0 else hi
            if not math.isfinite(x):
                raise ValueError("objective is unbounded below on the feasible set")
        else:
            x = min(max(0.0, lo), hi)
        x_star = np.array([x])
        return ReferenceSolution(x_star, float(total_objective(functions, x_star)), "analytic")

    # separable quadratic over one shared box: componentwise clamp
    if (
        all(s == sets[0] for s in sets)
        and isinstance(sets[0], Box)
        and np.abs(q_total - np.diag(np.diag(q_total))).max() <= 1e-14
        and np.all(np.diag(q_total) > 1e-10)
    ):
        x_star = np.clip(-b_total / (2.0 * np.diag(q_total)), sets[0].lo, sets[0].hi)
        return ReferenceSolution(x_star, float(total_objective(functions, x_star)), "analytic")
    return None


def _feasible_bbox(sets):
    los, his = [], []
    for s in sets:
        bb = s.bounding_box()
        if bb is not None:
            los.append(bb[0])
            his.append(bb[1])
    if not los:
        raise ValueError("grid reference needs at least one bounded set")
    lo = np.max(np.asarray(los), axis=0)
    hi = np.min(np.asarray(his), axis=0)
    if np.any(lo > hi):
        raise ValueError("bounding boxes of the sets do not intersect")
    return lo, hi


def _grid(functions, sets, n):
    box_lo, box_hi = _feasible_bbox(sets)
    first_points = {1: 257, 2: 49, 3: 21}[n]
    refine_points = {1: 65, 2: 17, 3: 9}[n]

    cur_lo, cur_hi = box_lo.copy(), box_hi.copy()
    best_x, best_v = None, math.inf
    passes = 0
    while True:
        count = first_points if passes == 0 else refine_points
        axes = [np.linspace(cur_lo[d], cur_hi[d], count) for d in range(n)]
        pts = np.asarray(list(itertools.product(*axes)))
        cell = (cur_hi - cur_lo) / (count - 1)
        diag = float(np.linalg.norm(cell))

        # only near-feasible grid points are worth projecting
        total_dist = np.zeros(len(pts))
        for s in sets:
            total_dist += s.distance(pts)
        keep = pts[total_dist <= max(2.0 * diag, 1e-9)]
        if len(keep) == 0:
            keep = pts[np.argsort(total_dist)[:32]]
        projected = np.asarray([project_intersection(sets, p) for p in keep])
        values = np.asarray(total_objective(functions, projected))
        idx = int(np.argmin(values))
        if values[idx] < best_v:
            best_v = float(values[idx])
            best_x = projected[idx]

        passes += 1
        width = float(cell.max())
        if (width <= GRID_TARGET_WIDTH and passes >= 3) or passes > 80:
            break
        # shrink to a window of a few cells around the incumbent
        cur_lo = np.maximum(box_lo, best_x - 2.0 * cell)
        cur_hi = np.minimum(box_hi, best_x + 2.0 * cell)
    return ReferenceSolution(best_x, best_v, "grid-refine")


def solve_reference(scenario, method="auto") -> ReferenceSolution:
    """Solve an optimize scenario independently of the distributed run.

    ``method`` selects the route: ``"analytic"`` (closed form or clamped
    stationary point, sums of quadratics only), ``"grid"`` (refined
    exhaustive search, dimension at most 3), or ``"auto"`` to try the
    analytic route first and fall back to the grid.
    """
    if scenario.kind != "optimize":
        raise ValueError("reference solutions exist only for optimize scenarios")
    functions, sets, n = scenario.functions, scenario.sets, scenario.n
    if method not in ("auto", "analytic", "grid"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "analytic"):
        sol = _analytic(functions, sets, n)
        if sol is not None:
            return sol
        if method == "analytic":
            raise ValueError("no analytic route for this scenario")
    if n > 3:
        raise ValueError("grid reference is limited to dimension <= 3")
    return _grid(functions, sets, n)
