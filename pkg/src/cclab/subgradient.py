"""Distributed projected subgradient optimization.

Agents cooperatively minimize ``sum_i f_i(x)`` over the intersection of
their constraint sets.  Each round agent ``i`` mixes the received
estimates, takes a subgradient step on its own objective, and projects
onto its own set:

    mixed[i]  = sum_j A[j, i] * state[j]
    state'[i] = P_i(mixed[i] - alpha_k * g_i),   g_i in df_i(mixed[i])

As in the consensus module, the projection residual
``proj_err[i] = P_i(pre) - pre`` is stored and the next state composed
as ``pre + proj_err``, making the rewrite ``state' = mixed - alpha * g +
proj_err`` exact in floating point.

Two regimes carry convergence guarantees and are certified at runtime:

* regime ``A``: all agents share one constraint set, any validated
  time-varying schedule;
* regime ``B``: distinct compact sets, constant uniform ``1/m`` weights,
  and an interior-point witness for the intersection.

The uncovered combination (distinct sets with non-uniform weights) runs
only behind an explicit scenario flag.
"""

from __future__ import annotations

import math

import numpy as np

from .parallel import agent_pool, run_per_agent
from .report import Report, fmt_float
from .sets import FEASIBILITY_TOL, Box, as_vector, project_intersection, _require_sets
from .consensus import _check_mixing, _check_states

# ---------------------------------------------------------------------------
# objective oracles


class ConvexFunction:
    """Convex objective with exact value and subgradient selection.

    ``evaluate`` accepts a single point ``(n,)`` or a batch ``(..., n)``;
    ``subgradient`` takes a single point and returns one member of the
    subdifferential, with deterministic tie-breaking at kinks.
    """

    dim: int

    def evaluate(self, x):
        raise NotImplementedError

    def subgradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def norm_bound(self, set_) -> float:
        """Analytic L with ``||g|| <= L`` for all subgradients over ``set_``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            got = x.shape[-1] if x.ndim else 0
            raise ValueError(f"point has dimension {got}, expected {self.dim}")
        return x


class Quadratic(ConvexFunction):
    """``x' Q x + b' x + c`` with symmetric positive semidefinite ``Q``."""

    PSD_FLOOR = -1e-10

    def __init__(self, Q, b, c):
        q = np.asarray(Q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("Q must be a square matrix")
        if not np.all(np.isfinite(q)):
            raise ValueError("Q must be finite")
        if np.abs(q - q.T).max() > 1e-12:
            raise ValueError("Q must be symmetric")
        eigs = np.linalg.eigvalsh(q)
        if eigs.min() < self.PSD_FLOOR:
            raise ValueError(f"Q must be positive semidefinite (min eigenvalue {eigs.min():.3g})")
        self.Q = (q + q.T) / 2.0
        self.b = as_vector(b, q.shape[0], "b")
        self.c = float(c)
        self.dim = q.shape[0]
        self._opnorm = float(max(abs(eigs[0]), abs(eigs[-1])))

    def evaluate(self, x):
        x = self._check_point(x)
        val = np.einsum("...i,ij,...j->...", x, self.Q, x) + x @ self.b + self.c
        return float(val) if val.ndim == 0 else val

    def subgradient(self, x):
        x = as_vector(x, self.dim)
        return 2.0 * (self.Q @ x) + self.b

    def norm_bound(self, set_):
        bb = set_.bounding_box()
        if bb is None:
            raise ValueError("quadratic subgradients are unbounded on an unbounded set")
        lo, hi = bb
        reach = float(np.sqrt((np.maximum(np.abs(lo), np.abs(hi)) ** 2).sum()))
        return 2.0 * self._opnorm * reach + float(np.linalg.norm(self.b))

    def to_dict(self):
        return {"type": "quadratic", "Q": self.Q.tolist(), "b": self.b.tolist(), "c": self.c}

    def __eq__(self, other):
        return (
            isinstance(other, Quadratic)
            and np.array_equal(self.Q, other.Q)
            and np.array_equal(self.b, other.b)
            and self.c == other.c
        )


class NormDistance(ConvexFunction):
    """Euclidean distance ``||x - center||``; subgradient 0 at the center."""

    def __init__(self, center):
        self.center = as_vector(center, name="center")
        self.dim = self.center.size

    def evaluate(self, x):
        x = self._check_point(x)
        val = np.linalg.norm(x - self.center, axis=-1)
        return float(val) if val.ndim == 0 else val

    def subgradient(self, x):
        x = as_vector(x, self.dim)
        d = x - self.center
        norm = float(np.linalg.norm(d))
        return d / norm if norm > 0 else np.zeros(self.dim)

    def norm_bound(self, set_):
        return 1.0

    def to_dict(self):
        return {"type": "norm_distance", "center": self.center.tolist()}

    def __eq__(self, other):
        return isinstance(other, NormDistance) and np.array_equal(self.center, other.center)


class AbsoluteDeviation(ConvexFunction):
    """``sum_d |x_d - center_d|``; subgradient is the sign vector, 0 at kinks."""

    def __init__(self, center):
        self.center = as_vector(center, name="center")
        self.dim = self.center.size

    def evaluate(self, x):
        x = self._check_point(x)
        val = np.abs(x - self.center).sum(axis=-1)
        return float(val) if val.ndim == 0 else val

    def subgradient(self, x):
        x = as_vector(x, self.dim)
        return np.sign(x - self.center)

    def norm_bound(self, set_):
        return math.sqrt(self.dim)

    def to_dict(self):
        return {"type": "abs_deviation", "center": self.center.tolist()}

    def __eq__(self, other):
        return isinstance(other, AbsoluteDeviation) and np.array_equal(self.center, other.center)


class MaxAffine(ConvexFunction):
    """``max_r (a_r' x + b_r)``; at ties the smallest-index row is selected."""

    def __init__(self, rows):
        if not rows:
            raise ValueError("max-affine needs at least one row")
        slopes = []
        offsets = []
        for idx, (a, b) in enumerate(rows):
            slopes.append(as_vector(a, name=f"rows[{idx}].a"))
            offsets.append(float(b))
        dim = slopes[0].size
        for idx, a in enumerate(slopes):
            if a.size != dim:
                raise ValueError(f"rows[{idx}] has dimension {a.size}, expected {dim}")
        self.slopes = np.asarray(slopes)
        self.offsets = np.asarray(offsets)
        self.dim = dim

    def evaluate(self, x):
        x = self._check_point(x)
        val = (x @ self.slopes.T + self.offsets).max(axis=-1)
        return float(val) if val.ndim == 0 else val

    def subgradient(self, x):
        x = as_vector(x, self.dim)
        idx = int(np.argmax(self.slopes @ x + self.offsets))
        return self.slopes[idx].copy()

    def norm_bound(self, set_):
        return float(np.linalg.norm(self.slopes, axis=1).max())

    def to_dict(self):
        return {
            "type": "max_affine",
            "rows": [{"a": a.tolist(), "b": float(b)} for a, b in zip(self.slopes, self.offsets)],
        }

    def __eq__(self, other):
        return (
            isinstance(other, MaxAffine)
            and np.array_equal(self.slopes, other.slopes)
            and np.array_equal(self.offsets, other.offsets)
        )


def function_from_dict(data) -> ConvexFunction:
    """Build an objective from its tagged-record form, rejecting unknown fields."""
    if not isinstance(data, dict):
        raise ValueError("function description must be an object")
    kind = data.get("type")
    fields = {
        "quadratic": {"Q", "b", "c"},
        "norm_distance": {"center"},
        "abs_deviation": {"center"},
        "max_affine": {"rows"},
    }
    if kind not in fields:
        raise ValueError(f"unknown function type {kind!r}")
    extra = sorted(set(data) - {"type", *fields[kind]})
    if extra:
        raise ValueError(f"unknown fields for {kind}: {extra}")
    missing = [f for f in fields[kind] if f not in data]
    if missing:
        raise ValueError(f"missing fields for {kind}: {missing}")
    if kind == "quadratic":
        return Quadratic(data["Q"], data["b"], data["c"])
    if kind == "norm_distance":
        return NormDistance(data["center"])
    if kind == "abs_deviation":
        return AbsoluteDeviation(data["center"])
    rows = []
    for idx, row in enumerate(data["rows"]):
        if not isinstance(row, dict) or set(row) != {"a", "b"}:
            raise ValueError(f"rows[{idx}] must be an object with fields 'a' and 'b'")
        rows.append((row["a"], row["b"]))
    return MaxAffine(rows)


def subgradient_bound(function, set_) -> float:
    """Analytic uniform bound on ``||g||`` over ``set_`` for the given objective."""
    return function.norm_bound(set_)


def envelope_bound(functions, sets, alpha0) -> float:
    """Subgradient bound valid at every point the algorithm can evaluate.

    Mixing keeps evaluation points inside the convex hull of the union of
    the constraint sets; the hull's bounding box, inflated by the largest
    possible first step ``alpha0 * L0``, gives a compact envelope on which
    all objectives have bounded subgradients.  Requires every set bounded.
    """
    los, his = [], []
    for i, s in enumerate(sets):
        bb = s.bounding_box()
        if bb is None:
            raise ValueError(f"set {i} is unbounded; no envelope subgradient bound exists")
        los.append(bb[0])
        his.append(bb[1])
    lo = np.min(np.asarray(los), axis=0)
    hi = np.max(np.asarray(his), axis=0)
    hull = Box(lo, hi)
    l0 = max(f.norm_bound(hull) for f in functions)
    pad = float(alpha0) * l0
    inflated = Box(lo - pad, hi + pad)
    return max(f.norm_bound(inflated) for f in functions)


# ---------------------------------------------------------------------------
# stepsize schedules


class StepsizeSchedule:
    """Positive stepsize sequence with analytic summability flags.

    ``diverges`` states that the sum of the stepsizes is infinite and
    ``square_summable`` that the sum of their squares is finite; both are
    None when no analytic classification exists (scripted sequences).
    """

    diverges: bool | None
    square_summable: bool | None

    def alpha(self, k: int) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class HarmonicStepsize(StepsizeSchedule):
    """``alpha_k = a / (k + k0)``: diverging and square summable."""

    diverges = True
    square_summable = True

    def __init__(self, a, k0=1):
        self.a = float(a)
        self.k0 = int(k0)
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.k0 < 1:
            raise ValueError("k0 must be >= 1")

    def alpha(self, k):
        return self.a / (k + self.k0)

    def to_dict(self):
        return {"kind": "harmonic", "a": self.a, "k0": self.k0}

    def __eq__(self, other):
        return isinstance(other, HarmonicStepsize) and self.a == other.a and self.k0 == other.k0


class ConstantStepsize(StepsizeSchedule):
    """``alpha_k = a``: diverging but not square summable."""

    diverges = True
    square_summable = False

    def __init__(self, a):
        self.a = float(a)
        if not self.a > 0:
            raise ValueError("a must be positive")

    def alpha(self, k):
        return self.a

    def to_dict(self):
        return {"kind": "constant", "a": self.a}

    def __eq__(self, other):
        return isinstance(other, ConstantStepsize) and self.a == other.a


class ScriptedStepsize(StepsizeSchedule):
    """Explicit finite stepsize list; summability flags are unknown."""

    diverges = None
    square_summable = None

    def __init__(self, values):
        vals = [float(v) for v in values]
        if not vals:
            raise ValueError("scripted stepsizes need at least one value")
        if any(not v > 0 for v in vals):
            raise ValueError("stepsizes must be positive")
        self.values = vals

    def alpha(self, k):
        if k >= len(self.values):
            raise ValueError(f"scripted stepsizes exhausted at round {k}")
        return self.values[k]

    def to_dict(self):
        return {"kind": "scripted", "values": list(self.values)}

    def __eq__(self, other):
        return isinstance(other, ScriptedStepsize) and self.values == other.values


def stepsize_from_dict(data) -> StepsizeSchedule:
    if not isinstance(data, dict):
        raise ValueError("stepsize description must be an object")
    kind = data.get("kind")
    fields = {"harmonic": {"a", "k0"}, "constant": {"a"}, "scripted": {"values"}}
    if kind not in fields:
        raise ValueError(f"unknown stepsize kind {kind!r}")
    extra = sorted(set(data) - {"kind", *fields[kind]})
    if extra:
        raise ValueError(f"unknown fields for {kind}: {extra}")
    if kind == "harmonic":
        return HarmonicStepsize(data.get("a", 1.0), data.get("k0", 1))
    if kind == "constant":
        if "a" not in data:
            raise ValueError("constant stepsize needs field 'a'")
        return ConstantStepsize(data["a"])
    if "values" not in data:
        raise ValueError("scripted stepsize needs field 'values'")
    return ScriptedStepsize(data["values"])


# ---------------------------------------------------------------------------
# the algorithm


class OptStepRecord:
    """One round: mixed points, chosen subgradients, projection residuals."""

    def __init__(self, mixed, subgrads, proj_err, alpha):
        self.mixed = mixed
        self.subgrads = subgrads
        self.proj_err = proj_err
        self.alpha = alpha


def subgradient_step(states, weights, functions, sets, alpha):
    """Advance one optimization round; returns ``(next_states, OptStepRecord)``.

    With ``alpha == 0`` this reduces exactly to a projected-consensus round.
    """
    states = _check_states(states, sets)
    m = states.shape[0]
    if len(functions) != m:
        raise ValueError(f"got {len(functions)} objectives for {m} agents")
    weights = _check_mixing(weights, m)
    alpha = float(alpha)
    if alpha < 0:
        raise ValueError("alpha must be >= 0")

    mixed = weights.T @ states
    subgrads = np.empty_like(mixed)
    proj_err = np.empty_like(mixed)
    nxt = np.empty_like(mixed)

    def advance(i):
        subgrads[i] = functions[i].subgradient(mixed[i])
        pre = mixed[i] - alpha * subgrads[i]
        proj_err[i] = sets[i].project(pre) - pre
        nxt[i] = pre + proj_err[i]

    run_per_agent(None, advance, m)
    return nxt, OptStepRecord(mixed=mixed, subgrads=subgrads, proj_err=proj_err, alpha=alpha)


class OptTrace:
    """Complete record of a distributed projected-subgradient run."""

    def __init__(
        self,
        states,
        mixed,
        subgrads,
        proj_err,
        alphas,
        sets,
        functions,
        schedule,
        stepsize,
        regime,
        witness=None,
        seed=None,
        reference=None,
        bound=None,
        warnings=(),
    ):
        self.states = states          # (K+1, m, n)
        self.mixed = mixed            # (K, m, n)
        self.subgrads = subgrads      # (K, m, n)
        self.proj_err = proj_err      # (K, m, n)
        self.alphas = alphas          # (K,)
        self.sets = sets
        self.functions = functions
        self.schedule = schedule
        self.stepsize = stepsize
        self.regime = regime
        self.witness = witness
        self.seed = seed
        self.reference = reference
        self.bound = bound
        self.warnings = list(warnings)
        self.rounds = states.shape[0] - 1
        self.averages = states.mean(axis=1)
        self._cache = {}

    @property
    def estimate(self) -> np.ndarray:
        return self.averages[-1]

    @property
    def objective(self) -> float:
        return float(sum(f.evaluate(self.estimate) for f in self.functions))

    @property
    def gap(self) -> float | None:
        if self.reference is None:
            return None
        return self.objective - self.reference.f_star

    def estimate_distance(self) -> float:
        if "estimate_distance" not in self._cache:
            try:
                proj = project_intersection(self.sets, self.estimate)
                self._cache["estimate_distance"] = float(np.linalg.norm(self.estimate - proj))
            except RuntimeError:
                self._cache["estimate_distance"] = math.nan
        return self._cache["estimate_distance"]

    def disagreement_series(self) -> np.ndarray:
        if "disagreement" not in self._cache:
            diffs = self.states[:, :, None, :] - self.states[:, None, :, :]
            self._cache["disagreement"] = np.sqrt((diffs**2).sum(axis=-1)).max(axis=(1, 2))
        return self._cache["disagreement"]

    def deviation_series(self) -> np.ndarray:
        """Per-round ``max_i ||state_i(k) - average(k)||``."""
        if "deviation" not in self._cache:
            diffs = self.states - self.averages[:, None, :]
            self._cache["deviation"] = np.sqrt((diffs**2).sum(axis=-1)).max(axis=1)
        return self._cache["deviation"]

    def objective_series(self) -> np.ndarray:
        """``sum_i f_i(average(k))`` for every recorded round."""
        if "objective" not in self._cache:
            total = np.zeros(self.rounds + 1)
            for f in self.functions:
                total += f.evaluate(self.averages)
            self._cache["objective"] = total
        return self._cache["objective"]

    def average_distance_series(self) -> np.ndarray:
        if "avg_dist" not in self._cache:
            out = np.empty(self.rounds + 1)
            for k in range(self.rounds + 1):
                try:
                    proj = project_intersection(self.sets, self.averages[k])
                    out[k] = np.linalg.norm(self.averages[k] - proj)
                except RuntimeError:
                    out[k] = math.nan
            self._cache["avg_dist"] = out
        return self._cache["avg_dist"]

    def write_csv(self, trace_path, summary_path) -> None:
        """Write the per-agent trace and the per-round summary.

        Trace columns: ``k, agent, x0..x{n-1}, subgrad_norm, proj_err_norm,
        alpha`` (step columns empty on the final row).  Summary columns:
        ``k, objective_gap, disagreement, dist_avg_to_intersection`` with
        the gap left empty when no reference solution is available.
        """
        n = self.states.shape[2]
        gnorm = np.linalg.norm(self.subgrads, axis=2)
        pnorm = np.linalg.norm(self.proj_err, axis=2)
        with open(trace_path, "w", newline="") as fh:
            fh.write(
                "k,agent," + ",".join(f"x{d}" for d in range(n)) + ",subgrad_norm,proj_err_norm,alpha\n"
            )
            for k in range(self.rounds + 1):
                for i in range(self.states.shape[1]):
                    coords = ",".join(fmt_float(v) for v in self.states[k, i])
                    if k < self.rounds:
                        tail = f"{fmt_float(gnorm[k, i])},{fmt_float(pnorm[k, i])},{fmt_float(self.alphas[k])}"
                    else:
                        tail = ",,"
                    fh.write(f"{k},{i},{coords},{tail}\n")

        dis = self.disagreement_series()
        dist = self.average_distance_series()
        obj = self.objective_series()
        with open(summary_path, "w", newline="") as fh:
            fh.write("k,objective_gap,disagreement,dist_avg_to_intersection\n")
            for k in range(self.rounds + 1):
                gap = fmt_float(obj[k] - self.reference.f_star) if self.reference else ""
                fh.write(f"{k},{gap},{fmt_float(dis[k])},{fmt_float(dist[k])}\n")


def run_subgradient(scenario) -> OptTrace:
    """Run the distributed projected subgradient method to the horizon.

    The scenario declares its regime; runs outside the certified regimes
    are only possible behind the scenario's ``allow_uncovered`` flag and
    carry a warning in the trace.  A stepsize without certified
    divergence + square-summability also adds a warning (convergence
    guarantees need both).
    """
    if scenario.kind != "optimize":
        raise ValueError("run_subgradient needs an optimize scenario")
    from .reference import solve_reference  # local import to avoid a cycle

    sets = scenario.sets
    functions = scenario.functions
    sched = scenario.schedule
    horizon = scenario.horizon
    m, n = scenario.m, scenario.n

    warnings = []
    if scenario.regime == "uncovered":
        warnings.append("regime has no convergence guarantee (distinct sets, non-uniform weights)")
    if not (scenario.stepsize.diverges and scenario.stepsize.square_summable):
        warnings.append("stepsize is not certified diverging and square-summable")

    bound = None
    try:
        if scenario.regime == "A":
            bound = max(f.norm_bound(sets[0]) for f in functions)
        else:
            bound = envelope_bound(functions, sets, scenario.stepsize.alpha(0))
    except ValueError as exc:
        warnings.append(f"no analytic subgradient bound: {exc}")

    reference = None
    try:
        reference = solve_reference(scenario)
    except (ValueError, RuntimeError) as exc:
        warnings.append(f"no reference solution: {exc}")

    states = np.empty((horizon + 1, m, n))
    mixed = np.empty((horizon, m, n))
    subgrads = np.empty((horizon, m, n))
    perr = np.empty((horizon, m, n))
    alphas = np.empty(horizon)
    states[0] = scenario.initial_points

    with agent_pool() as pool:
        for k in range(horizon):
            alpha = scenario.stepsize.alpha(k)
            alphas[k] = alpha
            mixed[k] = sched.matrix(k).T @ states[k]

            def advance(i, k=k, alpha=alpha):
                subgrads[k, i] = functions[i].subgradient(mixed[k, i])
                pre = mixed[k, i] - alpha * subgrads[k, i]
                perr[k, i] = sets[i].project(pre) - pre
                states[k + 1, i] = pre + perr[k, i]

            run_per_agent(pool, advance, m)

    return OptTrace(
        states,
        mixed,
        subgrads,
        perr,
        alphas,
        sets,
        functions,
        sched,
        scenario.stepsize,
        scenario.regime,
        witness=scenario.witness,
        seed=scenario.seed,
        reference=reference,
        bound=bound,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# runtime certificates


def descent_inequality_check(trace, probe, L=None, slack=1e-9) -> Report:
    """Per-round progress inequality against a feasible probe point.

    For any ``probe`` in the intersection and every round ``k``:

        sum_i ||x_i(k+1) - z||^2 <= sum_i ||x_i(k) - z||^2
                                    + alpha_k^2 * sum_i ||g_i(k)||^2
                                    - 2 alpha_k * sum_i (f_i(mixed_i(k)) - f_i(z))
                                    - sum_i ||proj_err_i(k)||^2

    Doubly stochastic weights are part of the hypothesis; schedules that
    are not doubly stochastic make the check inapplicable.  When ``L`` is
    given, recorded subgradient norms are also verified against it.
    """
    n = trace.states.shape[2]
    probe = as_vector(probe, n, "probe")
    for i, s in enumerate(trace.sets):
        if not s.contains(probe, FEASIBILITY_TOL):
            raise ValueError(f"probe is not feasible for set {i} (distance {s.distance(probe):.3g})")

    rep = Report(name="descent-inequality")
    if not trace.schedule.doubly_stochastic:
        rep.applicable = False
        rep.info["reason"] = "schedule is not doubly stochastic"
        return rep

    sx = ((trace.states - probe) ** 2).sum(axis=(1, 2))
    gsq = (trace.subgrads**2).sum(axis=(1, 2))
    psq = (trace.proj_err**2).sum(axis=(1, 2))
    f_probe = sum(f.evaluate(probe) for f in trace.functions)
    f_mixed = np.zeros(trace.rounds)
    for i, f in enumerate(trace.functions):
        f_mixed += f.evaluate(trace.mixed[:, i, :])
    rhs = sx[:-1] + trace.alphas**2 * gsq - 2.0 * trace.alphas * (f_mixed - f_probe) - psq
    for k in np.nonzero(sx[1:] > rhs + slack)[0]:
        rep.fail(f"round {k}: {sx[k + 1]:.12g} exceeds allowed {rhs[k]:.12g}")
    if L is not None:
        gnorm = np.linalg.norm(trace.subgrads, axis=2)
        for k, i in zip(*np.nonzero(gnorm > L + 1e-12)):
            rep.fail(f"round {k}: subgradient norm {gnorm[k, i]:.6g} of agent {i} exceeds L={L:.6g}")
    rep.info = {"states_sq": sx}
    return rep


def residual_bound_check(trace, L=None, slack=1e-12) -> Report:
    """Residual ceiling ``||proj_err_i(k)|| <= alpha_k * L`` (shared-set regime).

    Valid when all agents share one constraint set: the mixed point is then
    feasible, so the projection can move the stepped point by at most the
    step length.  Raises on traces from distinct-set runs.
    """
    first = trace.sets[0]
    if any(s != first for s in trace.sets[1:]):
        raise ValueError("residual bound needs identical constraint sets for all agents")
    if L is None:
        L = trace.bound
    if L is None:
        raise ValueError("no subgradient bound available")
    rep = Report(name="residual-bound")
    pnorm = np.linalg.norm(trace.proj_err, axis=2)
    ceiling = trace.alphas[:, None] * L
    for k, i in zip(*np.nonzero(pnorm > ceiling + slack)):
        rep.fail(
            f"round {k}: residual {pnorm[k, i]:.6g} of agent {i} exceeds alpha*L={ceiling[k, 0]:.6g}"
        )
    rep.info = {"L": L}
    return rep


def disagreement_decay_check(trace, tail_tol=1e-4) -> Report:
    """Vanishing deviation from the average under a summable-square stepsize.

    Applicable only when the stepsize is certified diverging and square
    summable.  Asserts that the last decile of ``max_i ||x_i(k) - avg(k)||``
    stays at or below ``tail_tol``; the stepsize-weighted deviation sum is
    reported for monitoring but not bounded a priori.
    """
    rep = Report(name="disagreement-decay")
    if not (trace.stepsize.diverges and trace.stepsize.square_summable):
        rep.applicable = False
        rep.info["reason"] = "stepsize hypotheses not certified (need diverging + square-summable)"
        return rep
    dev = trace.deviation_series()
    tail_len = max(1, math.ceil(0.1 * dev.size))
    tail_max = float(dev[-tail_len:].max())
    if tail_max > tail_tol:
        rep.fail(f"tail deviation {tail_max:.6g} exceeds {tail_tol:g} over the last {tail_len} rounds")
    weighted = float(np.cumsum(trace.alphas * dev[:-1])[-1]) if trace.rounds else 0.0
    rep.info = {"tail_max": tail_max, "weighted_deviation_sum": weighted}
    return rep


def geometric_convolution(beta, gammas) -> np.ndarray:
    """Partial sums ``c_k = sum_{l<=k} beta**(k-l) * gamma_l``.

    For ``0 < beta < 1`` and ``gamma_k -> 0`` the sequence vanishes; it is
    the workhorse for turning geometric mixing plus vanishing per-round
    errors into vanishing accumulated errors.
    """
    beta = float(beta)
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    gammas = np.asarray(gammas, dtype=float)
    out = np.empty_like(gammas)
    acc = 0.0
    for k, g in enumerate(gammas):
        acc = beta * acc + g
        out[k] = acc
    return out
