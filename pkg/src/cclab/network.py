"""Mixing-weight schedules over a time-slotted multi-agent system.

Storage convention, fixed once here and used across the whole package: a
weight matrix ``A`` holds in column ``i`` the averaging vector of agent
``i``, i.e. ``A[j, i]`` is the weight agent ``i`` places on the estimate
received from agent ``j``.  With agent states stacked as rows of ``X``,
one mixing round is ``A.T @ X``.  Columns summing to one means every
agent forms a convex combination of received estimates; rows summing to
one as well makes the matrix doubly stochastic, which gives every agent
equal long-run influence.

A schedule is a deterministic periodic generator of per-slot matrices,
characterised by a weight floor ``eta`` (every positive entry, and every
diagonal entry, is at least ``eta``) and a window length ``B`` such that
the union of the communication graphs over any ``B`` consecutive slots
is strongly connected.  Under those two properties the products of
scheduled matrices mix geometrically; :func:`ergodicity_bound` gives the
explicit rate and :func:`check_ergodicity` verifies it exhaustively on a
finite horizon.
"""

from __future__ import annotations

import numpy as np
import networkx as nx

from .report import Report

STOCH_TOL = 1e-12


def validate_weights(matrix, eta) -> Report:
    """Check one weight matrix against the standing weight assumptions.

    Reports every violated clause: nonnegativity, column sums (each agent's
    vector is stochastic), row sums (doubly stochastic), the ``eta`` floor
    on positive entries, and the ``eta`` floor on diagonal entries.
    Clause-level results are also available in ``report.info``.
    """
    eta = float(eta)
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("weight matrix must have finite entries")

    rep = Report(name="weights")
    clauses = {"negative": [], "column_sums": [], "row_sums": [], "floor": [], "diagonal": []}

    for j, i in zip(*np.nonzero(a < 0)):
        clauses["negative"].append(f"entry ({j}, {i}) is negative ({a[j, i]:.3g})")
    col = a.sum(axis=0)
    for i in np.nonzero(np.abs(col - 1.0) > STOCH_TOL)[0]:
        clauses["column_sums"].append(f"column {i} sums to {col[i]:.12g}, not 1")
    row = a.sum(axis=1)
    for j in np.nonzero(np.abs(row - 1.0) > STOCH_TOL)[0]:
        clauses["row_sums"].append(f"row {j} sums to {row[j]:.12g}, not 1")
    small = (a > 0) & (a < eta)
    for j, i in zip(*np.nonzero(small)):
        clauses["floor"].append(
            f"positive entry ({j}, {i}) = {a[j, i]:.3g} is below the floor {eta:.3g}"
        )
    d = np.diag(a)
    for i in np.nonzero(d < eta)[0]:
        clauses["diagonal"].append(f"diagonal entry {i} = {d[i]:.3g} is below the floor {eta:.3g}")

    for name in ("negative", "column_sums", "row_sums", "floor", "diagonal"):
        rep.violations.extend(clauses[name])
    rep.info = {k: v for k, v in clauses.items()}
    return rep


class WeightSchedule:
    """Deterministic periodic source of per-slot weight matrices.

    Built through :func:`make_schedule`.  ``matrix(k)`` is the matrix used
    in slot ``k``; schedules repeat with period ``period``, so validation
    over a horizon only needs to look at one period of distinct slots.
    """

    def __init__(self, kind, m, mats, B, eta, seed=0, edges=None):
        self.kind = kind
        self.m = int(m)
        self.B = int(B)
        self.eta = float(eta)
        self.seed = int(seed)
        self._mats = []
        for mat in mats:
            arr = np.array(mat, dtype=float)
            arr.setflags(write=False)
            self._mats.append(arr)
        self.period = len(self._mats)
        self.edges = edges
        self.doubly_stochastic = all(
            np.all(np.abs(mat.sum(axis=1) - 1.0) <= STOCH_TOL)
            and np.all(np.abs(mat.sum(axis=0) - 1.0) <= STOCH_TOL)
            for mat in self._mats
        )

    def matrix(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("slot index must be >= 0")
        return self._mats[k % self.period]

    def union_edges(self, start: int, stop: int) -> set:
        """Directed edges ``(j, i)`` active anywhere in slots ``[start, stop)``."""
        edges = set()
        for t in range(start, stop):
            js, is_ = np.nonzero(self.matrix(t) > 0)
            edges.update(zip(js.tolist(), is_.tolist()))
        return edges

    def to_dict(self) -> dict:
        data = {"kind": self.kind, "seed": self.seed, "B": self.B, "eta": self.eta}
        if self.kind == "metropolis":
            data["edges"] = [list(e) for e in self.edges]
        elif self.kind == "scripted":
            data["matrices"] = [mat.tolist() for mat in self._mats]
        return data

    def __repr__(self):
        return f"WeightSchedule(kind={self.kind!r}, m={self.m}, B={self.B}, eta={self.eta:.6g})"


def _min_positive(mats) -> float:
    values = [mat[mat > 0] for mat in mats]
    flat = np.concatenate([v for v in values if v.size]) if values else np.array([])
    if flat.size == 0:
        raise ValueError("weight matrices have no positive entries")
    return float(flat.min())


def make_schedule(kind, m, seed=0, *, edges=None, matrices=None, B=None, eta=None) -> WeightSchedule:
    """Build a weight schedule.

    Kinds:

    * ``uniform``: the constant matrix with every entry ``1/m``.
    * ``metropolis``: constant degree-based symmetric weights on an
      undirected connected graph given by ``edges``; off-diagonal weight
      ``1 / (1 + max(deg_i, deg_j))`` per edge, diagonal takes the rest.
    * ``gossip``: at slot ``k`` the pair ``(k mod m, (k+1) mod m)``
      averages with weight 1/2 while everyone else holds.
    * ``scripted``: replay (cyclically) an explicit list of ``matrices``.

    ``B`` defaults to the smallest window for which every window's union
    communication graph is strongly connected (``m - 1`` slots for the
    gossip rotation, one slot otherwise).  ``eta`` defaults to the minimum
    positive entry actually emitted; passing a larger value makes
    :func:`validate_schedule` enforce it.
    """
    m = int(m)
    if m < 1:
        raise ValueError("need at least one agent")
    if kind == "uniform":
        mats = [np.full((m, m), 1.0 / m)]
        default_B = 1
    elif kind == "metropolis":
        if not edges:
            raise ValueError("metropolis schedule needs an edge list")
        norm = set()
        for e in edges:
            i, j = int(e[0]), int(e[1])
            if i == j or not (0 <= i < m and 0 <= j < m):
                raise ValueError(f"invalid edge ({i}, {j})")
            norm.add((min(i, j), max(i, j)))
        edges = sorted(norm)
        graph = nx.Graph()
        graph.add_nodes_from(range(m))
        graph.add_edges_from(edges)
        if m > 1 and not nx.is_connected(graph):
            raise ValueError("metropolis schedule needs a connected base graph")
        deg = dict(graph.degree())
        w = np.zeros((m, m))
        for i, j in edges:
            w[i, j] = w[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
        np.fill_diagonal(w, 1.0 - w.sum(axis=1))
        mats = [w]
        default_B = 1
    elif kind == "gossip":
        if m < 2:
            raise ValueError("gossip rotation needs at least two agents")
        mats = []
        for k in range(m):
            a = np.eye(m)
            p, q = k % m, (k + 1) % m
            a[p, p] = a[q, q] = a[p, q] = a[q, p] = 0.5
            mats.append(a)
        default_B = max(1, m - 1)
    elif kind == "scripted":
        if not matrices:
            raise ValueError("scripted schedule needs a matrix list")
        mats = []
        for idx, mat in enumerate(matrices):
            arr = np.asarray(mat, dtype=float)
            if arr.shape != (m, m):
                raise ValueError(f"matrices[{idx}] has shape {arr.shape}, expected ({m}, {m})")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"matrices[{idx}] must have finite entries")
            mats.append(arr)
        default_B = len(mats)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")

    if B is None:
        B = default_B
    B = int(B)
    if B < 1:
        raise ValueError("B must be >= 1")
    if eta is None:
        eta = _min_positive(mats)
    return WeightSchedule(kind, m, mats, B, eta, seed=seed, edges=edges if kind == "metropolis" else None)


def schedule_from_dict(data, m) -> WeightSchedule:
    """Build a schedule from its scenario-file form, rejecting unknown fields."""
    if not isinstance(data, dict):
        raise ValueError("schedule description must be an object")
    kind = data.get("kind")
    allowed = {"kind", "seed", "B", "eta"}
    if kind == "metropolis":
        allowed.add("edges")
    elif kind == "scripted":
        allowed.add("matrices")
    extra = sorted(set(data) - allowed)
    if extra:
        raise ValueError(f"unknown fields: {extra}")
    if kind is None:
        raise ValueError("missing field 'kind'")
    return make_schedule(
        kind,
        m,
        seed=data.get("seed", 0),
        edges=data.get("edges"),
        matrices=data.get("matrices"),
        B=data.get("B"),
        eta=data.get("eta"),
    )


def validate_schedule(schedule, horizon) -> Report:
    """Check every emitted matrix and every window's union connectivity.

    Matrices must pass :func:`validate_weights` with the schedule's
    ``eta`` (row sums are only required when the schedule claims to be
    doubly stochastic), and for every window start ``k <= horizon - B``
    the union of the communication graphs over slots ``[k, k + B)`` must
    be strongly connected.  Periodicity means only one period of distinct
    slots and window starts needs checking; the first failing window is
    reported with its real slot index.
    """
    horizon = int(horizon)
    if horizon < schedule.B:
        raise ValueError(f"horizon {horizon} is shorter than the connectivity window {schedule.B}")
    rep = Report(name="schedule")
    for k in range(min(schedule.period, horizon)):
        w = validate_weights(schedule.matrix(k), schedule.eta)
        for clause, items in w.info.items():
            if clause == "row_sums" and not schedule.doubly_stochastic:
                continue
            for msg in items:
                rep.fail(f"slot {k}: {msg}")
    for k in range(min(schedule.period, horizon - schedule.B + 1)):
        edges = schedule.union_edges(k, k + schedule.B)
        graph = nx.DiGraph()
        graph.add_nodes_from(range(schedule.m))
        graph.add_edges_from(edges)
        if not nx.is_strongly_connected(graph):
            rep.fail(f"window [{k}, {k + schedule.B}): union graph is not strongly connected")
            rep.info["first_bad_window"] = k
            break
    return rep


def transition_matrix(schedule, s, k) -> np.ndarray:
    """Product of the scheduled matrices over slots ``s..k`` inclusive.

    With the column convention, the returned product ``P`` drives the
    purely linear part of a run as ``X(k+1) = P.T @ X(s)``; the weight
    that agent ``i`` accumulates on agent ``j``'s slot-``s`` state is
    ``P[j, i]``.
    """
    s, k = int(s), int(k)
    if s < 0 or k < s:
        raise ValueError("need 0 <= s <= k")
    product = schedule.matrix(s).copy()
    for t in range(s + 1, k + 1):
        product = product @ schedule.matrix(t)
    return product


def ergodicity_bound(eta, B, m, gap) -> float:
    """Geometric mixing bound for products of scheduled weight matrices.

    For a doubly stochastic schedule with weight floor ``eta`` and
    connectivity window ``B`` over ``m`` agents, every entry of a product
    spanning ``gap`` slots is within the returned value of ``1/m``:

        2 * (1 + eta**-B0) / (1 - eta**B0) * (1 - eta**B0) ** (gap / B0)

    with ``B0 = (m - 1) * B``.
    """
    eta = float(eta)
    B = int(B)
    m = int(m)
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if B < 1:
        raise ValueError("B must be >= 1")
    if m < 2:
        raise ValueError("m must be >= 2")
    if gap < 0:
        raise ValueError("gap must be >= 0")
    b0 = (m - 1) * B
    decay = 1.0 - eta**b0
    return 2.0 * (1.0 + eta ** (-b0)) / decay * decay ** (gap / b0)


def check_ergodicity(schedule, horizon, slack=1e-12) -> Report:
    """Exhaustively verify the mixing bound for all spans within a horizon.

    For doubly stochastic schedules, checks that every product over slots
    ``s..k`` (``0 <= s <= k <= horizon``) is doubly stochastic to 1e-12 and
    stays entrywise within :func:`ergodicity_bound` of ``1/m``.  For
    stochastic-only schedules the product's columns still agree in the
    limit even though the limit vector is not known in advance, so the
    per-row spread across columns is checked against twice the bound.
    Schedules failing :func:`validate_schedule` make the bound
    inapplicable; that is flagged rather than reported as a violation.
    """
    rep = Report(name="ergodicity")
    if schedule.m < 2:
        rep.applicable = False
        rep.info["reason"] = "single agent"
        return rep
    base = validate_schedule(schedule, horizon)
    if not base.passed:
        rep.applicable = False
        rep.info["reason"] = f"bound inapplicable: {base.violations[0]}"
        return rep
    m = schedule.m
    target = 1.0 / m
    pairs = 0
    worst = 0.0
    for s in range(horizon + 1):
        product = None
        for k in range(s, horizon + 1):
            product = schedule.matrix(s).copy() if k == s else product @ schedule.matrix(k)
            bound = ergodicity_bound(schedule.eta, schedule.B, m, k - s)
            pairs += 1
            if schedule.doubly_stochastic:
                sums_ok = (
                    np.all(np.abs(product.sum(axis=0) - 1.0) <= STOCH_TOL)
                    and np.all(np.abs(product.sum(axis=1) - 1.0) <= STOCH_TOL)
                )
                if not sums_ok:
                    rep.fail(f"product over [{s}, {k}] is not doubly stochastic to {STOCH_TOL:g}")
                dev = float(np.abs(product - target).max())
                worst = max(worst, dev / bound if bound else 0.0)
                if dev > bound + slack:
                    rep.fail(
                        f"span ({s}, {k}): max entry deviation {dev:.6g} exceeds bound {bound:.6g}"
                    )
            else:
                spread = float((product.max(axis=1) - product.min(axis=1)).max())
                worst = max(worst, spread / (2 * bound) if bound else 0.0)
                if spread > 2 * bound + slack:
                    rep.fail(
                        f"span ({s}, {k}): row spread {spread:.6g} exceeds 2x bound {2 * bound:.6g}"
                    )
    rep.info["pairs"] = pairs
    rep.info["worst_ratio"] = worst
    rep.info["mode"] = "deviation" if schedule.doubly_stochastic else "spread"
    return rep
