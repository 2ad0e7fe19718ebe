"""Offline reference computations for EaCC.

* ``in_stability_region`` decides, by a linear feasibility problem, whether a
  vector of average admission rates can be carried by some stationary mix of
  routing, processing, energy and link-activation decisions.
* ``solve_num`` finds the utility-maximizing admission vector on a grid.
* ``verify_maxweight`` checks one slot's decision against brute force.
* ``queue_bound`` and ``DriftConstantEstimator`` give the Lyapunov bound on
  the time-averaged total backlog.

Time-shared link capacity is described exactly. A medium shared by links
with independent ON probabilities ``p_l`` can serve link ``l`` a fraction
``rho_l`` of the slots if and only if, for every subset ``L`` of links,
``sum_{l in L} rho_l <= P(at least one link of L is ON)``.  The constraint
count grows as ``2**L`` in the number of uncertain links, which is why the
oracle is restricted to small systems.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .channel import EnumerationLimitError, NetworkMode, SourceLink
from .control import ControllerConstants, UtilitySpec, decision_objective
from .model import ContractViolation, DecisionVector, SystemState

MAX_DEVICES = 4
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class AverageModel:
    """Per-slot average capacities of a scenario.

    ``e_cap[n, k]`` is the energy filter's per-slot cap, already clipped by the
    credit rate. ``receivers`` lists the flows that carry traffic.
    """

    mode: NetworkMode
    source_p: np.ndarray
    source_rate: np.ndarray
    d2d_p: np.ndarray
    d2d_rate: np.ndarray
    d_max: np.ndarray
    e_cap: np.ndarray
    alpha: np.ndarray
    r_max: np.ndarray
    receivers: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.source_p.shape[0]

    @classmethod
    def from_config(cls, config) -> "AverageModel":
        """Averages of a ``ScenarioConfig``; batteries are taken at their
        initial level (exact when drains are zero)."""
        ch = config.channel
        credit = np.array(
            [b.credit_rate_above if b.initial_level >= b.threshold else 0.0 for b in config.battery]
        )
        e_cap = np.minimum(np.asarray(config.constants.e_max, float), credit[:, None])
        return cls(
            mode=config.mode,
            source_p=np.asarray(ch.source_p, float),
            source_rate=np.asarray(ch.source_rate, float),
            d2d_p=np.asarray(ch.d2d_p, float),
            d2d_rate=np.asarray(ch.d2d_rate, float),
            d_max=config.d_max_effective,
            e_cap=e_cap,
            alpha=np.asarray(config.alpha, float),
            r_max=np.asarray(config.constants.r_max, float),
            receivers=tuple(config.receivers),
        )

    @classmethod
    def simple(
        cls,
        n: int,
        *,
        mode: NetworkMode = NetworkMode.CELLULAR_D2D,
        source_p=1.0,
        source_rate=1.0,
        d2d_p=1.0,
        d2d_rate=1.0,
        d_max=1.0,
        e_cap=100.0,
        alpha=1.0,
        r_max=100.0,
        receivers=None,
    ) -> "AverageModel":
        vec = lambda v: np.array(np.broadcast_to(np.asarray(v, float), (n,)))  # noqa: E731
        grid = lambda v: np.array(np.broadcast_to(np.asarray(v, float), (n, n)))  # noqa: E731
        d2d_p, d2d_rate = grid(d2d_p), grid(d2d_rate)
        np.fill_diagonal(d2d_p, 0.0)
        np.fill_diagonal(d2d_rate, 0.0)
        return cls(
            mode=mode,
            source_p=vec(source_p),
            source_rate=vec(source_rate),
            d2d_p=d2d_p,
            d2d_rate=d2d_rate,
            d_max=vec(d_max),
            e_cap=grid(e_cap),
            alpha=grid(alpha),
            r_max=vec(r_max),
            receivers=tuple(range(n)) if receivers is None else tuple(receivers),
        )

    def check(self) -> None:
        for name in ("source_p", "source_rate", "d2d_p", "d2d_rate", "d_max", "e_cap", "alpha", "r_max"):
            a = np.asarray(getattr(self, name))
            if np.any(~np.isfinite(a)) or np.any(a < 0):
                raise ContractViolation(f"AverageModel.{name} must be finite and >= 0")
        if np.any(self.source_p > 1) or np.any(self.d2d_p > 1):
            raise ContractViolation("AverageModel probabilities must lie in [0, 1]")
        if self.n > MAX_DEVICES:
            raise EnumerationLimitError(
                f"oracle supports at most {MAX_DEVICES} devices, got {self.n}"
            )

    def usable(self) -> np.ndarray:
        """Pipelines ``(n, k)`` that can carry flow ``k`` at a positive rate."""
        n = self.n
        ok = np.zeros((n, n), dtype=bool)
        src = self.source_p * self.source_rate > 0
        d2d = self.d2d_p * self.d2d_rate > 0
        for i in range(n):
            for k in self.receivers:
                ok[i, k] = src[i] and self.d_max[i] > 0 and self.e_cap[i, k] > 0 and (
                    i == k or d2d[i, k]
                )
        return ok


@dataclass(frozen=True)
class BoundParams:
    """Drift constant ``B``, slack ``delta`` and utility weight ``M``."""

    B: float
    delta: float
    M: float = 1.0

    def check(self) -> None:
        if not (self.B >= 0 and self.delta > 0 and self.M > 0):
            raise ContractViolation("BoundParams need B >= 0, delta > 0 and M > 0")
        if not all(math.isfinite(v) for v in (self.B, self.delta, self.M)):
            raise ContractViolation("BoundParams must be finite")


class _Program:
    """Variables ``[x, d, e, h, rho]``; rows are the capacity-chain constraints."""

    def __init__(self, model: AverageModel, slack: float):
        model.check()
        self.model = model
        n = self.n = model.n
        nn = n * n
        self.links = self._links()
        self.n_var = 4 * nn + len(self.links)
        rows, cols, vals, rhs = [], [], [], []
        self._row = 0

        def add(entries, b):
            for c, v in entries:
                rows.append(self._row)
                cols.append(c)
                vals.append(v)
            rhs.append(b)
            self._row += 1

        X, D, E, H = (lambda i, k, o=o: o * nn + i * n + k for o in range(4))
        usable = model.usable()
        self.usable = usable

        # Bounds: unusable pipelines are pinned to zero.
        self.bounds = [(0.0, 0.0)] * self.n_var
        for i in range(n):
            for k in range(n):
                if usable[i, k]:
                    for f in (X, D, E):
                        self.bounds[f(i, k)] = (0.0, None)
                    if i != k:
                        self.bounds[H(i, k)] = (0.0, None)

        for i in range(n):
            for k in range(n):
                if not usable[i, k]:
                    continue
                add([(X(i, k), 1.0), (D(i, k), -1.0)], -slack)
                add([(D(i, k), model.alpha[i, k]), (E(i, k), -1.0)], -slack)
                if i != k:
                    add([(E(i, k), 1.0), (H(i, k), -1.0)], -slack)
            row = [(D(i, k), 1.0) for k in range(n) if usable[i, k]]
            if row:
                add(row, float(model.d_max[i]))
            row = [(E(i, k), 1.0 / model.e_cap[i, k]) for k in range(n) if usable[i, k]]
            if row:
                add(row, 1.0)

        # Link capacity: traffic on a link <= rate * served fraction.
        for j, (kind, i, k) in enumerate(self.links):
            r = 4 * nn + j
            self.bounds[r] = (0.0, None)
            if kind == "src":
                row = [(X(i, f), 1.0) for f in range(n) if usable[i, f]]
                add(row + [(r, -float(model.source_rate[i]))], 0.0)
            else:
                add([(H(i, k), 1.0), (r, -float(model.d2d_rate[i, k]))], 0.0)

        self._add_medium_constraints(add)
        self.rows, self.cols, self.vals, self.rhs = rows, cols, vals, rhs
        self.X = X

    def _links(self):
        m = self.model
        out = [("src", i, i) for i in range(self.n) if m.source_p[i] * m.source_rate[i] > 0]
        out += [
            ("d2d", i, k)
            for i in range(self.n)
            for k in range(self.n)
            if i != k and m.d2d_p[i, k] * m.d2d_rate[i, k] > 0
        ]
        return out

    def _add_medium_constraints(self, add) -> None:
        nn = self.n * self.n
        m = self.model
        shared = []
        for j, (kind, i, k) in enumerate(self.links):
            p = m.source_p[i] if kind == "src" else m.d2d_p[i, k]
            if kind == "src" and m.mode is NetworkMode.CELLULAR_D2D:
                # Dedicated spectrum: served whenever ON.
                add([(4 * nn + j, 1.0)], float(p))
            else:
                shared.append((4 * nn + j, float(p)))
        if not shared:
            return
        uncertain = [(c, p) for c, p in shared if p < 1.0]
        if len(uncertain) > 16:
            raise EnumerationLimitError("too many random links for exact capacity description")
        # Subsets containing a sure link are dominated by the all-links row.
        add([(c, 1.0) for c, _ in shared], 1.0)
        for size in range(1, len(uncertain) + 1):
            for subset in itertools.combinations(uncertain, size):
                miss = math.prod(1.0 - p for _, p in subset)
                add([(c, 1.0) for c, _ in subset], 1.0 - miss)

    def demand_rows(self, y, slack: float):
        """Rows ``y_k + slack <= sum_n x[n, k]`` for every receiver."""
        n = self.n
        rows, cols, vals, rhs = [], [], [], []
        for r, k in enumerate(self.model.receivers):
            for i in range(n):
                rows.append(r)
                cols.append(self.X(i, k))
                vals.append(-1.0)
            rhs.append(-(float(y[k]) + slack))
        return rows, cols, vals, rhs

    def matrix(self, extra=None, n_extra: int = 0):
        rows, cols, vals, rhs = list(self.rows), list(self.cols), list(self.vals), list(self.rhs)
        if extra is not None:
            r2, c2, v2, b2 = extra
            base = len(rhs)
            rows += [base + r for r in r2]
            cols += c2
            vals += v2
            rhs += b2
        a = sparse.csr_matrix((vals, (rows, cols)), shape=(len(rhs), self.n_var + n_extra))
        return a, np.asarray(rhs, float)

    def solve(self, c, extra=None, extra_bounds=()):
        a, b = self.matrix(extra, len(extra_bounds))
        return linprog(c, A_ub=a, b_ub=b, bounds=self.bounds + list(extra_bounds), method="highs")


def _check_y(y, model: AverageModel) -> np.ndarray:
    y = np.asarray(y, float)
    if y.shape != (model.n,):
        raise ContractViolation(f"y must have length {model.n}")
    if np.any(~np.isfinite(y)) or np.any(y < 0):
        raise ContractViolation("y must be finite and >= 0")
    return y


def in_stability_region(y, model: AverageModel, slack: float = 0.0) -> bool:
    """True iff ``y`` is carried with margin ``slack`` on every stage.

    The margin applies to the admission stage of each receiver and to each
    stage of every pipeline that can carry traffic; a flow that is not a
    receiver must have ``y = 0``.
    """
    y = _check_y(y, model)
    if slack < 0:
        raise ContractViolation("slack must be >= 0")
    if any(y[k] > 0 for k in range(model.n) if k not in model.receivers):
        return False
    if np.any(y > model.r_max + _FEAS_TOL):
        return False
    prog = _Program(model, slack)
    res = prog.solve(np.zeros(prog.n_var), prog.demand_rows(y, slack))
    return res.status == 0


def max_rate(model: AverageModel, k: int, fixed: Optional[dict[int, float]] = None) -> float:
    """Largest servable ``y_k`` given fixed rates for some other receivers
    (the rest set to zero). Returns ``-inf`` if the fixed rates are infeasible."""
    prog = _Program(model, 0.0)
    y = np.zeros(model.n)
    for j, v in (fixed or {}).items():
        y[j] = v
    rows, cols, vals, rhs = prog.demand_rows(y, 0.0)
    # Receiver k's row becomes  t - sum_n x[n, k] <= 0  for a new variable t.
    t = prog.n_var
    rows.append(model.receivers.index(k))
    cols.append(t)
    vals.append(1.0)
    rhs[model.receivers.index(k)] = 0.0
    c = np.zeros(t + 1)
    c[t] = -1.0
    res = prog.solve(c, (rows, cols, vals, rhs), [(0.0, float(model.r_max[k]))])
    if res.status != 0:
        return -math.inf
    return float(res.x[t])


def _grid_floor(v: float, resolution: float) -> float:
    return math.floor(v / resolution + 1e-9) * resolution


def solve_num(
    model: AverageModel, utility: UtilitySpec, resolution: float
) -> tuple[np.ndarray, float]:
    """Best grid point of total utility over the servable region.

    All receivers but the last are enumerated on the grid; for each
    combination the last receiver takes its largest servable grid value,
    which is optimal because utilities are increasing.
    """
    if not resolution > 0:
        raise ContractViolation("resolution must be > 0")
    model.check()
    rx = list(model.receivers)
    n = model.n
    if not rx:
        return np.zeros(n), 0.0
    *outer, last = rx
    ranges = []
    for k in outer:
        top = _grid_floor(max(max_rate(model, k), 0.0), resolution)
        ranges.append(np.arange(0, int(round(top / resolution)) + 1) * resolution)
    best_y, best_v = None, -math.inf
    for combo in itertools.product(*ranges):
        fixed = dict(zip(outer, combo))
        top = max_rate(model, last, fixed)
        if top == -math.inf:
            continue
        y = np.zeros(n)
        for k, v in fixed.items():
            y[k] = v
        y[last] = _grid_floor(max(top, 0.0), resolution)
        v = float(np.sum(utility.value(y[rx])))
        if v > best_v:
            best_y, best_v = y, v
    return best_y, best_v


def utility_gap(summary, y_star_value: float) -> float:
    """Oracle utility minus the run's utility at its average admissions."""
    return float(y_star_value - summary.sum_utility)


def queue_bound(params: BoundParams) -> float:
    params.check()
    return params.B / (2.0 * params.delta)


class DriftConstantEstimator:
    """Largest per-slot second-moment sum seen along a run.

    Feed it the trace records in order. For the free-draining ``Z[k, k]`` the
    departure term is the start-of-slot backlog.
    """

    def __init__(self, n: int):
        self.prev_z_diag = np.zeros(n)
        self.value = 0.0

    def add(self, rec) -> None:
        dec: DecisionVector = rec.decision
        inflow = dec.x.sum(axis=0)
        total = float(np.sum(inflow**2) + np.sum(dec.y**2))
        total += float(np.sum(dec.x**2) + np.sum(dec.d**2))
        total += float(np.sum((dec.d * dec.alpha) ** 2) + 2.0 * np.sum(dec.e**2))
        h = dec.h.copy()
        np.fill_diagonal(h, self.prev_z_diag)
        total += float(np.sum(h**2))
        self.value = max(self.value, total)
        self.prev_z_diag = np.diag(rec.z).copy()


def _levels(cap: float, resolution: float) -> np.ndarray:
    if cap <= 0:
        return np.zeros(1)
    pts = np.arange(0, int(math.floor(cap / resolution + 1e-9)) + 1) * resolution
    if cap - pts[-1] > 1e-12:
        pts = np.append(pts, cap)
    return pts


def _best_budgeted(weights: np.ndarray, caps: np.ndarray, resolution: float) -> float:
    """max sum_k w_k v_k over grid vectors with sum_k v_k / caps_k <= 1."""
    live = [k for k in range(len(weights)) if caps[k] > 0]
    if not live:
        return 0.0
    best = 0.0
    for combo in itertools.product(*(_levels(caps[k], resolution) for k in live)):
        if sum(v / caps[k] for v, k in zip(combo, live)) <= 1.0 + 1e-12:
            best = max(best, sum(weights[k] * v for v, k in zip(combo, live)))
    return best


def best_objective(
    state: SystemState,
    activations,
    constants: ControllerConstants,
    alpha: np.ndarray,
    resolution: float,
    d_max=None,
    receivers=None,
) -> float:
    """Brute-force maximum of the per-slot objective over a decision grid.

    Blocks are optimized separately since the objective is a sum of
    independent terms. Computation and source-link budgets are shared
    totals, so grid vectors within a row are limited by the row's cap.
    """
    n = state.n
    if n > 2:
        raise ContractViolation("exhaustive decision grids are limited to 2 devices")
    receivers = range(n) if receivers is None else receivers
    d_max = np.asarray(constants.d_max if d_max is None else d_max, float)
    g = constants.utility
    total = 0.0
    for k in range(n):
        if k in receivers:
            ys = _levels(constants.r_max[k], resolution)
            total += float(np.max(constants.m * g.value(ys) - state.s[k] * ys))
        else:
            total += float(constants.m * g.value(0.0))
    for i in range(n):
        w = state.u[i] - state.q[i] * alpha[i]
        # sum_k d <= D is the same as sum_k d / D <= 1.
        total += _best_budgeted(w, np.full(n, d_max[i]), resolution)
        cap = np.minimum(np.asarray(constants.e_max[i], float), state.credits[i])
        total += _best_budgeted(state.q[i] - state.z[i], cap, resolution)
    best_sched = -math.inf
    for act in activations:
        sc = 0.0
        for link, rate in zip(act.active, act.rates):
            if isinstance(link, SourceLink):
                w = state.s - state.u[link.n]
                sc += _best_budgeted(w, np.full(n, rate), resolution)
            else:
                sc += _best_budgeted(
                    np.array([state.z[link.n, link.k]]), np.array([rate]), resolution
                )
        best_sched = max(best_sched, sc)
    return total + best_sched


def verify_maxweight(
    state: SystemState,
    decision: DecisionVector,
    activations,
    constants: ControllerConstants,
    resolution: float,
    d_max=None,
    receivers=None,
    tolerance: float = 1e-7,
) -> bool:
    """True iff ``decision`` scores at least the best grid decision."""
    best = best_objective(
        state, activations, constants, decision.alpha, resolution, d_max, receivers
    )
    got = decision_objective(state, decision, constants)
    return got >= best - tolerance * max(1.0, abs(best))
