"""Declarative scenario files and their validation.

A scenario is a single JSON document describing one run.  Fields::

    {
      "kind": "consensus" | "optimize",
      "m": <agents>, "n": <dimension>,
      "sets": [<tagged set>, ...],                  # one per agent
      "functions": [<tagged objective>, ...],       # optimize only
      "schedule": {"kind": "uniform" | "metropolis" | "gossip" | "scripted", ...},
      "stepsize": {"kind": "harmonic" | "constant" | "scripted", ...},  # optimize only
      "regime": "A" | "B" | "uncovered",            # optimize only
      "witness": {"point": [...], "radius": r},     # optional interior-point witness
      "initial_points": [[...], ...] | "random",
      "horizon": <int>, "tol": <float>, "seed": <int>,
      "allow_uncovered": false,
      "allow_empty_intersection": false
    }

Unknown fields are rejected at every level.  Validation collects every
violated invariant with its field path and raises :class:`ScenarioError`
listing all of them: initial points must be feasible for their agent's
set, a witness ball must fit inside every set, the schedule must pass
:func:`cclab.network.validate_schedule` over the horizon, and optimize
scenarios must declare a regime consistent with their sets and weights.

Random initial points are drawn per agent by projecting a seeded uniform
sample from the set's bounding box (a fixed cube for unbounded sets), so
they are feasible by construction and reproducible from the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import network, subgradient
from .sets import FEASIBILITY_TOL, ConvexSet, as_vector, set_from_dict

SAMPLE_CUBE_HALFWIDTH = 5.0

_TOP_FIELDS = {
    "kind",
    "m",
    "n",
    "sets",
    "functions",
    "schedule",
    "stepsize",
    "regime",
    "witness",
    "initial_points",
    "horizon",
    "tol",
    "seed",
    "allow_uncovered",
    "allow_empty_intersection",
}


class ScenarioError(Exception):
    """Raised when a scenario fails to parse or validate."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("scenario validation failed:\n" + "\n".join(f"  - {m}" for m in self.messages))


@dataclass
class Witness:
    """Interior point of the set intersection with a certified ball radius."""

    point: np.ndarray
    radius: float

    def to_dict(self):
        return {"point": self.point.tolist(), "radius": self.radius}


def sample_feasible(set_: ConvexSet, rng) -> np.ndarray:
    """Feasible point of ``set_``: project a uniform sample of its bounding box."""
    bb = set_.bounding_box()
    if bb is None:
        lo = np.full(set_.dim, -SAMPLE_CUBE_HALFWIDTH)
        hi = np.full(set_.dim, SAMPLE_CUBE_HALFWIDTH)
    else:
        lo, hi = bb
    return set_.project(rng.uniform(lo, hi))


@dataclass
class Scenario:
    """Fully validated description of one run; build via :func:`load_scenario`."""

    kind: str
    m: int
    n: int
    sets: list
    schedule: network.WeightSchedule
    initial_points: np.ndarray
    initial_spec: str
    horizon: int
    tol: float
    seed: int
    functions: list | None = None
    stepsize: subgradient.StepsizeSchedule | None = None
    regime: str | None = None
    witness: Witness | None = None
    allow_uncovered: bool = False
    allow_empty_intersection: bool = False

    def to_dict(self) -> dict:
        data = {
            "kind": self.kind,
            "m": self.m,
            "n": self.n,
            "sets": [s.to_dict() for s in self.sets],
            "schedule": self.schedule.to_dict(),
            "initial_points": "random" if self.initial_spec == "random" else self.initial_points.tolist(),
            "horizon": self.horizon,
            "tol": self.tol,
            "seed": self.seed,
            "allow_uncovered": self.allow_uncovered,
            "allow_empty_intersection": self.allow_empty_intersection,
        }
        if self.functions is not None:
            data["functions"] = [f.to_dict() for f in self.functions]
        if self.stepsize is not None:
            data["stepsize"] = self.stepsize.to_dict()
        if self.regime is not None:
            data["regime"] = self.regime
        if self.witness is not None:
            data["witness"] = self.witness.to_dict()
        return data

    def with_overrides(self, seed=None, horizon=None, tol=None) -> "Scenario":
        """Re-validated copy with the given fields replaced.

        A new seed re-resolves "random" initial points; explicit points are
        kept as written.
        """
        data = self.to_dict()
        if seed is not None:
            data["seed"] = int(seed)
        if horizon is not None:
            data["horizon"] = int(horizon)
        if tol is not None:
            data["tol"] = float(tol)
        return scenario_from_dict(data)

    @staticmethod
    def from_dict(data) -> "Scenario":
        return scenario_from_dict(data)


def _expect_int(data, key, errors, minimum=None, default=None):
    if key not in data:
        if default is not None:
            return default
        errors.append(f"{key}: missing")
        return None
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{key}: must be an integer")
        return None
    if minimum is not None and value < minimum:
        errors.append(f"{key}: must be >= {minimum}")
        return None
    return value


def scenario_from_dict(data) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(["scenario must be a JSON object"])
    errors = []
    for key in sorted(set(data) - _TOP_FIELDS):
        errors.append(f"unknown field '{key}'")

    kind = data.get("kind")
    if kind not in ("consensus", "optimize"):
        errors.append(f"kind: must be 'consensus' or 'optimize', got {kind!r}")
    m = _expect_int(data, "m", errors, minimum=1)
    n = _expect_int(data, "n", errors, minimum=1)
    horizon = _expect_int(data, "horizon", errors, minimum=1, default=100_000)
    seed = _expect_int(data, "seed", errors, minimum=None, default=0)
    tol = data.get("tol", 1e-10)
    if not (isinstance(tol, (int, float)) and not isinstance(tol, bool) and tol > 0 and math.isfinite(tol)):
        errors.append("tol: must be a positive finite number")
        tol = 1e-10
    allow_uncovered = bool(data.get("allow_uncovered", False))
    allow_empty = bool(data.get("allow_empty_intersection", False))

    if errors and (m is None or n is None or kind not in ("consensus", "optimize")):
        raise ScenarioError(errors)

    # constraint sets
    sets = []
    raw_sets = data.get("sets")
    if not isinstance(raw_sets, list) or len(raw_sets) != m:
        errors.append(f"sets: must be a list of {m} set descriptions")
    else:
        for i, entry in enumerate(raw_sets):
            try:
                s = set_from_dict(entry)
                if s.dim != n:
                    errors.append(f"sets[{i}]: has dimension {s.dim}, expected {n}")
                else:
                    sets.append(s)
            except (ValueError, TypeError) as exc:
                errors.append(f"sets[{i}]: {exc}")

    # mixing schedule
    schedule = None
    if "schedule" not in data:
        errors.append("schedule: missing")
    else:
        try:
            schedule = network.schedule_from_dict(data["schedule"], m)
        except (ValueError, TypeError) as exc:
            errors.append(f"schedule: {exc}")
    if schedule is not None and horizon is not None:
        try:
            rep = network.validate_schedule(schedule, horizon)
            for msg in rep.violations:
                errors.append(f"schedule: {msg}")
        except ValueError as exc:
            errors.append(f"schedule: {exc}")

    # objectives and stepsize (optimize only)
    functions = None
    stepsize = None
    regime = data.get("regime")
    if kind == "optimize":
        raw_fns = data.get("functions")
        if not isinstance(raw_fns, list) or len(raw_fns) != m:
            errors.append(f"functions: must be a list of {m} objective descriptions")
        else:
            functions = []
            for i, entry in enumerate(raw_fns):
                try:
                    f = subgradient.function_from_dict(entry)
                    if f.dim != n:
                        errors.append(f"functions[{i}]: has dimension {f.dim}, expected {n}")
                    else:
                        functions.append(f)
                except (ValueError, TypeError) as exc:
                    errors.append(f"functions[{i}]: {exc}")
            if len(functions) != m:
                functions = None
        if "stepsize" not in data:
            errors.append("stepsize: missing")
        else:
            try:
                stepsize = subgradient.stepsize_from_dict(data["stepsize"])
            except (ValueError, TypeError) as exc:
                errors.append(f"stepsize: {exc}")
        if isinstance(stepsize, subgradient.ScriptedStepsize) and horizon is not None:
            if len(stepsize.values) < horizon:
                errors.append(
                    f"stepsize: scripted list has {len(stepsize.values)} values for horizon {horizon}"
                )
        if regime not in ("A", "B", "uncovered"):
            errors.append(f"regime: must be 'A', 'B' or 'uncovered', got {regime!r}")
            regime = None
    else:
        for key in ("functions", "stepsize", "regime"):
            if key in data:
                errors.append(f"{key}: not allowed for consensus scenarios")
        regime = None

    # witness
    witness = None
    if "witness" in data:
        raw = data["witness"]
        if not isinstance(raw, dict) or set(raw) != {"point", "radius"}:
            errors.append("witness: must be an object with fields 'point' and 'radius'")
        else:
            try:
                point = as_vector(raw["point"], n, "witness.point")
                radius = float(raw["radius"])
                if not (math.isfinite(radius) and radius > 0):
                    errors.append("witness: radius must be positive")
                else:
                    witness = Witness(point=point, radius=radius)
            except (ValueError, TypeError) as exc:
                errors.append(f"witness: {exc}")
    if witness is not None and len(sets) == m:
        for i, s in enumerate(sets):
            have = s.interior_radius(witness.point)
            if have < witness.radius:
                errors.append(
                    f"witness: ball of radius {witness.radius:.6g} does not fit in sets[{i}] "
                    f"(largest admissible radius {have:.6g})"
                )

    # regime consistency
    if kind == "optimize" and regime is not None and len(sets) == m and schedule is not None:
        identical = all(s == sets[0] for s in sets)
        uniform = schedule.kind == "uniform" or all(
            float(np.abs(schedule.matrix(k) - 1.0 / m).max()) <= 1e-15 for k in range(schedule.period)
        )
        if regime == "A":
            if not identical:
                errors.append("regime: 'A' requires all agents to share one constraint set")
        elif regime == "B":
            if uniform is False:
                errors.append("regime: 'B' requires the constant uniform (1/m) weights")
            if witness is None:
                errors.append("regime: 'B' requires an interior-point witness")
            for i, s in enumerate(sets):
                if s.bounding_box() is None:
                    errors.append(f"regime: 'B' requires compact sets, but sets[{i}] is unbounded")
        else:  # uncovered
            if not allow_uncovered:
                errors.append("regime: 'uncovered' runs need allow_uncovered = true")
        if regime == "A" and functions is not None and identical:
            for i, f in enumerate(functions):
                if isinstance(f, subgradient.Quadratic) and sets[0].bounding_box() is None:
                    errors.append(
                        f"functions[{i}]: quadratic objective over an unbounded shared set "
                        "has no subgradient bound"
                    )

    # initial points
    initial = None
    initial_spec = None
    raw_init = data.get("initial_points", "random")
    if raw_init == "random":
        initial_spec = "random"
        if len(sets) == m and seed is not None:
            rng = np.random.default_rng(seed)
            initial = np.asarray([sample_feasible(s, rng) for s in sets])
    elif isinstance(raw_init, list):
        initial_spec = "explicit"
        if len(raw_init) != m:
            errors.append(f"initial_points: expected {m} points, got {len(raw_init)}")
        else:
            rows = []
            for i, row in enumerate(raw_init):
                try:
                    rows.append(as_vector(row, n, f"initial_points[{i}]"))
                except (ValueError, TypeError) as exc:
                    errors.append(f"initial_points[{i}]: {exc}")
            if len(rows) == m:
                initial = np.asarray(rows)
                if len(sets) == m:
                    for i, s in enumerate(sets):
                        d = s.distance(initial[i])
                        if d > FEASIBILITY_TOL:
                            errors.append(
                                f"initial_points[{i}]: agent {i}'s point is outside its "
                                f"constraint set (distance {d:.6g})"
                            )
    else:
        errors.append("initial_points: must be 'random' or a list of points")

    if errors:
        raise ScenarioError(errors)

    return Scenario(
        kind=kind,
        m=m,
        n=n,
        sets=sets,
        schedule=schedule,
        initial_points=initial,
        initial_spec=initial_spec,
        horizon=horizon,
        tol=float(tol),
        seed=seed,
        functions=functions,
        stepsize=stepsize,
        regime=regime,
        witness=witness,
        allow_uncovered=allow_uncovered,
        allow_empty_intersection=allow_empty,
    )


def load_scenario(path) -> Scenario:
    """Load and fully validate a scenario file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError([f"cannot read {path}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"parse error in {path}: {exc}"]) from exc
    return scenario_from_dict(data)


def save_scenario(scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
