"""Projected consensus over a time-varying mixing schedule.

Each round every agent forms a convex combination of the current agent
states and projects the result onto its own constraint set:

    mixed[i]  = sum_j A[j, i] * state[j]
    state'[i] = P_i(mixed[i])

The update splits into a linear mixing part and a projection residual
``proj_err[i] = P_i(mixed[i]) - mixed[i]``.  The residual is computed
first and the next state is composed as ``mixed + proj_err``, so the
decomposition ``state' = mixed + proj_err`` is exact in floating point
(the composed state can differ from the mathematically exact projection
by at most one rounding step, far below every tolerance used here).

Runs record states, mixed points and residuals for every round, enough
to replay all diagnostics: monotone Lyapunov sums toward any point of
the intersection, vanishing residuals, and (for equal uniform weights
with an interior-point witness) a geometric convergence-rate
certificate.
"""

from __future__ import annotations

import math

import numpy as np

from .parallel import agent_pool, run_per_agent
from .report import Report, fmt_float
from .sets import FEASIBILITY_TOL, as_vector, project_intersection, _require_sets

UNIFORM_ATOL = 1e-15


class StepRecord:
    """One round of the update: mixed points, projection residuals, their mean."""

    def __init__(self, mixed, proj_err, average):
        self.mixed = mixed
        self.proj_err = proj_err
        self.average = average


def disagreement(states) -> float:
    """Largest pairwise distance ``max_{i,j} ||state[i] - state[j]||``."""
    states = np.asarray(states, dtype=float)
    diffs = states[:, None, :] - states[None, :, :]
    return float(np.sqrt((diffs**2).sum(axis=-1)).max())


def _check_states(states, sets):
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        raise ValueError(f"states must be a (m, n) array, got shape {states.shape}")
    if not np.all(np.isfinite(states)):
        raise ValueError("states must be finite")
    m, n = states.shape
    if len(sets) != m:
        raise ValueError(f"got {m} states for {len(sets)} sets")
    if _require_sets(sets) != n:
        raise ValueError("set dimension does not match state dimension")
    return states


def _check_mixing(weights, m):
    a = np.asarray(weights, dtype=float)
    if a.shape != (m, m):
        raise ValueError(f"weight matrix must have shape ({m}, {m}), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("weight matrix must be finite")
    if np.any(a < 0):
        raise ValueError("weight matrix must be nonnegative")
    if np.any(np.abs(a.sum(axis=0) - 1.0) > 1e-12):
        raise ValueError("every column of the weight matrix must sum to 1")
    return a


def _project_rows(sets, mixed, out, pool=None):
    def fill(i):
        out[i] = sets[i].project(mixed[i]) - mixed[i]

    run_per_agent(pool, fill, len(sets))


def consensus_step(states, weights, sets, pool=None):
    """Advance one round; returns ``(next_states, StepRecord)``.

    ``states`` is the (m, n) row-stacked agent array, ``weights`` a
    column-stochastic mixing matrix (column ``i`` = agent ``i``'s weights).
    """
    states = _check_states(states, sets)
    weights = _check_mixing(weights, states.shape[0])
    mixed = weights.T @ states
    proj_err = np.empty_like(mixed)
    _project_rows(sets, mixed, proj_err, pool)
    nxt = mixed + proj_err
    return nxt, StepRecord(mixed=mixed, proj_err=proj_err, average=mixed.mean(axis=0))


class ConsensusTrace:
    """Complete record of a projected-consensus run."""

    def __init__(self, states, mixed, proj_err, sets, schedule, tol, converged, witness=None, seed=None):
        self.states = states          # (K+1, m, n)
        self.mixed = mixed            # (K, m, n)
        self.proj_err = proj_err      # (K, m, n)
        self.sets = sets
        self.schedule = schedule
        self.tol = tol
        self.converged = converged
        self.witness = witness
        self.seed = seed
        self.rounds = states.shape[0] - 1
        self.averages = states.mean(axis=1)   # (K+1, n)
        self._cache = {}

    @property
    def estimate(self) -> np.ndarray:
        """Average of the final agent states: the consensus point estimate."""
        return self.averages[-1]

    def estimate_distance(self) -> float:
        """Distance of the estimate from the set intersection (nan if unknown)."""
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

    def sum_sq_proj_err_series(self) -> np.ndarray:
        if "sum_sq_err" not in self._cache:
            self._cache["sum_sq_err"] = (self.proj_err**2).sum(axis=(1, 2))
        return self._cache["sum_sq_err"]

    def average_distance_series(self) -> np.ndarray:
        """Per-round distance of the state average from the intersection."""
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

        Trace columns: ``k, agent, x0..x{n-1}, proj_err_norm`` where the
        residual column belongs to the step leaving round ``k`` (empty on
        the final row).  Summary columns: ``k, disagreement,
        sum_sq_proj_err, dist_avg_to_intersection, lyapunov_states,
        lyapunov_mixed`` with the Lyapunov sums taken against the witness
        point when the scenario provides one (empty otherwise).
        """
        n = self.states.shape[2]
        err_norm = np.linalg.norm(self.proj_err, axis=2)
        with open(trace_path, "w", newline="") as fh:
            fh.write("k,agent," + ",".join(f"x{d}" for d in range(n)) + ",proj_err_norm\n")
            for k in range(self.rounds + 1):
                for i in range(self.states.shape[1]):
                    coords = ",".join(fmt_float(v) for v in self.states[k, i])
                    err = fmt_float(err_norm[k, i]) if k < self.rounds else ""
                    fh.write(f"{k},{i},{coords},{err}\n")

        dis = self.disagreement_series()
        sq = self.sum_sq_proj_err_series()
        dist = self.average_distance_series()
        if self.witness is not None:
            lyap_x = ((self.states - self.witness.point) ** 2).sum(axis=(1, 2))
            lyap_w = ((self.mixed - self.witness.point) ** 2).sum(axis=(1, 2))
        with open(summary_path, "w", newline="") as fh:
            fh.write(
                "k,disagreement,sum_sq_proj_err,dist_avg_to_intersection,"
                "lyapunov_states,lyapunov_mixed\n"
            )
            for k in range(self.rounds + 1):
                cells = [str(k), fmt_float(dis[k])]
                cells.append(fmt_float(sq[k]) if k < self.rounds else "")
                cells.append(fmt_float(dist[k]))
                if self.witness is not None:
                    cells.append(fmt_float(lyap_x[k]))
                    cells.append(fmt_float(lyap_w[k]) if k < self.rounds else "")
                else:
                    cells.extend(["", ""])
                fh.write(",".join(cells) + "\n")


def run_consensus(scenario) -> ConsensusTrace:
    """Run the projected consensus update on a consensus scenario.

    Stops as soon as the pairwise disagreement drops to ``tol`` *and* the
    last round's summed squared projection residual drops to ``tol**2``
    (disagreement alone can be small early on while the agents are still
    outside their sets), or when the horizon is exhausted; exhaustion is
    reported through ``trace.converged``, not raised.
    """
    if scenario.kind != "consensus":
        raise ValueError("run_consensus needs a consensus scenario")
    sets = scenario.sets
    sched = scenario.schedule
    tol = scenario.tol
    horizon = scenario.horizon
    m, n = scenario.m, scenario.n

    states = np.empty((horizon + 1, m, n))
    mixed = np.empty((horizon, m, n))
    perr = np.empty((horizon, m, n))
    states[0] = scenario.initial_points
    stop = horizon
    converged = False

    with agent_pool() as pool:
        for k in range(horizon + 1):
            x = states[k]
            if disagreement(x) <= tol:
                if k == 0:
                    settled = max(s.distance(x.mean(axis=0)) for s in sets) <= FEASIBILITY_TOL
                else:
                    settled = float((perr[k - 1] ** 2).sum()) <= tol * tol
                if settled:
                    stop = k
                    converged = True
                    break
            if k == horizon:
                break
            a = sched.matrix(k)
            mixed[k] = a.T @ x
            _project_rows(sets, mixed[k], perr[k], pool)
            states[k + 1] = mixed[k] + perr[k]

    return ConsensusTrace(
        states[: stop + 1].copy(),
        mixed[:stop].copy(),
        perr[:stop].copy(),
        sets,
        sched,
        tol,
        converged,
        witness=scenario.witness,
        seed=scenario.seed,
    )


def lyapunov_check(trace, probe, slack=1e-10) -> Report:
    """Verify the monotone-progress guarantees against a feasible probe point.

    For any ``probe`` in the intersection of the constraint sets, the sums
    ``sum_i ||state_i(k) - probe||^2`` and ``sum_i ||mixed_i(k) - probe||^2``
    must be nonincreasing in ``k``, the mixed sum can never exceed the state
    sum of the same round, and the residuals accumulated over the whole run
    satisfy ``sum_k sum_i ||proj_err_i(k)||^2 <= sum_i ||state_i(0) - probe||^2``.
    """
    n = trace.states.shape[2]
    probe = as_vector(probe, n, "probe")
    for i, s in enumerate(trace.sets):
        if not s.contains(probe, FEASIBILITY_TOL):
            raise ValueError(f"probe is not feasible for set {i} (distance {s.distance(probe):.3g})")

    rep = Report(name="lyapunov")
    sx = ((trace.states - probe) ** 2).sum(axis=(1, 2))
    sw = ((trace.mixed - probe) ** 2).sum(axis=(1, 2))
    for k in np.nonzero(sx[1:] > sx[:-1] + slack)[0]:
        rep.fail(f"state sum increased at round {k}: {sx[k]:.12g} -> {sx[k + 1]:.12g}")
    for k in np.nonzero(sw[1:] > sw[:-1] + slack)[0]:
        rep.fail(f"mixed sum increased at round {k}: {sw[k]:.12g} -> {sw[k + 1]:.12g}")
    for k in np.nonzero(sw > sx[:-1] + slack)[0]:
        rep.fail(f"mixed sum exceeds state sum at round {k}: {sw[k]:.12g} > {sx[k]:.12g}")
    total_err = float((trace.proj_err**2).sum())
    if total_err > sx[0] + slack:
        rep.fail(
            f"cumulative squared residual {total_err:.12g} exceeds initial spread {sx[0]:.12g}"
        )
    rep.info = {"states_sq": sx, "mixed_sq": sw, "cumulative_sq_err": total_err}
    return rep


def _is_uniform(schedule) -> bool:
    target = 1.0 / schedule.m
    return all(
        float(np.abs(schedule.matrix(k) - target).max()) <= UNIFORM_ATOL
        for k in range(schedule.period)
    )


def rate_certificate(trace, anchor, margin, slack=1e-12) -> Report:
    """Certify geometric convergence of an equal-uniform-weights run.

    Requires a converged trace produced with the constant ``1/m`` weights
    and an ``anchor`` point whose closed ``margin``-ball lies inside every
    constraint set.  With

        spread = (1 / margin) * sum_i ||state_i(0) - anchor||
        rate   = 1 - 1 / (4 * spread**2)

    the certificate checks ``sum_i ||state_i(k) - limit||^2 <= rate**k *
    sum_i ||state_i(0) - limit||^2`` at every recorded round, where
    ``limit`` is the final state average.  When the start is already so
    tight that ``rate <= 0`` (spread < 1/2), one mixing step necessarily
    lands every agent on the common average, so exact immediate agreement
    is checked instead.
    """
    n = trace.states.shape[2]
    anchor = as_vector(anchor, n, "anchor")
    margin = float(margin)
    if not margin > 0:
        raise ValueError("margin must be positive")
    for i, s in enumerate(trace.sets):
        have = s.interior_radius(anchor)
        if have < margin:
            raise ValueError(
                f"ball of radius {margin:.6g} around the anchor does not fit in set {i} "
                f"(largest admissible radius {have:.6g})"
            )
    if not _is_uniform(trace.schedule):
        raise ValueError("rate certificate requires the constant uniform (1/m) weights")
    if not trace.converged:
        raise ValueError("rate certificate requires a converged run")

    rep = Report(name="rate")
    limit = trace.averages[-1]
    spread = float(np.linalg.norm(trace.states[0] - anchor, axis=1).sum()) / margin
    sx = ((trace.states - limit) ** 2).sum(axis=(1, 2))
    if spread > 0.5:
        rate = 1.0 - 1.0 / (4.0 * spread**2)
        bounds = rate ** np.arange(trace.rounds + 1) * sx[0]
        for k in np.nonzero(sx > bounds + slack)[0]:
            rep.fail(f"round {k}: spread {sx[k]:.12g} exceeds certified {bounds[k]:.12g}")
    else:
        # tiny spread: every agent lands on the common average in one step
        rate = 0.0
        for k in np.nonzero(sx[1:] > slack * max(1.0, sx[0]))[0]:
            rep.fail(f"round {k + 1}: expected immediate agreement, spread {sx[k + 1]:.12g}")
    rep.info = {"spread": spread, "rate": rate, "limit": limit}
    return rep
