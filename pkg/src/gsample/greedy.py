"""Greedy sampling-set selection with optional fast incremental updates.

At every step the node whose addition minimizes the chosen cost joins the
set; ties break toward the smallest index. For diagonal noise covariance,
adding node a is the rank-one update K -> K + r_a r_a^T with
r_a = sqrt(R^-1_{a,a}) h_M(L)[:, a], which enables:

* exact-rank-one  Sherman-Morrison updates of K^-1 and the trace costs
                  (BMSE, BCRB, WC_MSE); values equal naive recomputation.
* eig-perturbation  first-order update of the smallest eigenvalue for
                  WC_BMSE: cost ~ 1/(lam_min + (r_a^T v_min)^2); the exact
                  eigenpair is refreshed after every accepted node.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .costs import CostKind, cost_value
from .estimator import EstimatorState, build_state
from .exceptions import InfeasibleError, ObservabilityError
from .model import BandlimitedSpec, ProblemInstance, SamplingVector

logger = logging.getLogger(__name__)

FAST_PATHS = ("off", "exact-rank-one", "eig-perturbation")
_RANK_ONE_KINDS = frozenset({CostKind.BMSE, CostKind.BCRB, CostKind.WC_MSE})
_BREAKDOWN_TOL = 1e-12
_RANGE_RTOL = 1e-8


@dataclass(frozen=True)
class GreedyConfig:
    """Either a budget of q nodes or a cost threshold to reach, plus a fast path."""

    kind: CostKind
    budget: int | None = None
    threshold: float | None = None
    fast_path: str = "off"
    band: BandlimitedSpec | None = None

    def __post_init__(self):
        kind = CostKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if (self.budget is None) == (self.threshold is None):
            raise ValueError("set exactly one of budget or threshold")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be positive")
        if self.fast_path not in FAST_PATHS:
            raise ValueError(f"fast_path must be one of {FAST_PATHS}")
        if self.fast_path == "eig-perturbation" and kind is not CostKind.WC_BMSE:
            raise ValueError("eig-perturbation only applies to WC_BMSE")
        if self.fast_path == "exact-rank-one" and kind not in _RANK_ONE_KINDS:
            raise ValueError("exact-rank-one applies to BMSE, BCRB, and WC_MSE")
        if kind in (CostKind.A_DESIGN, CostKind.E_DESIGN) and self.band is None:
            raise ValueError(f"{kind.value} requires a frequency band")


@dataclass
class GreedyResult:
    selected: list[int]
    costs: list[float]
    n_evaluations: int
    fast_path: str
    threshold_met: bool | None = None


def _sensor_column(instance: ProblemInstance, a: int) -> np.ndarray:
    """r_a = sqrt(R^-1_{a,a}) h_M(L)[:, a] for diagonal noise covariance."""
    return math.sqrt(instance.noise_inv[a, a]) * instance.h_m_mat[:, a]


def _trace_cost_after_rank_one(kind: CostKind, Ki: np.ndarray, r: np.ndarray,
                               hR: np.ndarray, mu: float, tr_Ki: float,
                               tr_Ki2_hR: float) -> tuple[float, float, float] | None:
    """Updated (cost, tr K^-1, tr K^-2 h_R) after K -> K + r r^T, or None on breakdown."""
    u = Ki @ r
    beta = 1.0 + float(r @ u)
    if beta <= _BREAKDOWN_TOL:
        return None
    uu = float(u @ u)
    tr_new = tr_Ki - uu / beta
    if kind is CostKind.BMSE:
        return tr_new, tr_new, tr_Ki2_hR
    hRu = hR @ u
    m = Ki @ hRu
    trh_new = tr_Ki2_hR - 2.0 * float(u @ m) / beta + uu * float(u @ hRu) / beta ** 2
    bcrb_new = tr_new - mu * trh_new
    if kind is CostKind.BCRB:
        return bcrb_new, tr_new, trh_new
    # WC_MSE: the spectral-norm term has no closed-form rank-one update, so
    # evaluate it on the rank-one-updated inverse.
    Ki_new = Ki - np.outer(u, u) / beta
    B = Ki_new @ hR
    S = B.T @ B
    smax_sq = float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])
    return bcrb_new + mu ** 2 * smax_sq, tr_new, trh_new


def greedy_step_fast(state: EstimatorState, a: int, kind=CostKind.BMSE) -> float:
    """Cost after adding node a, via the fast update matching `kind`.

    Requires diagonal noise covariance. Falls back to a naive recomputation
    on numerical breakdown of the rank-one update, or when the new sensor
    column leaves the range of a singular K (the pseudo-inverse update would
    be invalid there).
    """
    kind = CostKind(kind)
    inst = state.instance
    if not inst.noise_is_diagonal:
        raise ValueError("fast greedy updates require a diagonal noise covariance")
    r = _sensor_column(inst, a)
    if kind is CostKind.WC_BMSE:
        lam, v = state.min_eigenpair
        return 1.0 / (lam + float(r @ v) ** 2)
    if kind not in _RANK_ONE_KINDS:
        raise ValueError(f"no fast update for {kind.value}")
    in_range = True
    if state.singular:
        proj = state.range_projector @ r
        in_range = np.linalg.norm(r - proj) <= _RANGE_RTOL * max(np.linalg.norm(r), 1.0)
    if in_range:
        tr_Ki = float(np.trace(state.K_inv))
        if kind is CostKind.BMSE:
            trh = 0.0
        else:
            trh = float(np.sum((state.K_inv @ state.K_inv) * inst.h_r_mat))
        out = _trace_cost_after_rank_one(kind, state.K_inv, r, inst.h_r_mat,
                                         inst.mu, tr_Ki, trh)
        if out is not None:
            return out[0]
    values = state.d.values.copy()
    values[a] = 1.0
    return cost_value(kind, inst, SamplingVector(values, budget=state.d.n))


class _NaiveEvaluator:
    """One full cost evaluation per candidate."""

    def __init__(self, instance: ProblemInstance, config: GreedyConfig):
        self.instance = instance
        self.config = config
        self.selected_values = np.zeros(instance.n)

    def start_cost(self) -> float:
        return self._cost(self.selected_values)

    def _cost(self, values: np.ndarray) -> float:
        try:
            return cost_value(self.config.kind, self.instance,
                              SamplingVector(values, budget=self.instance.n),
                              band=self.config.band)
        except ObservabilityError:
            return math.inf

    def candidate_cost(self, a: int) -> float:
        values = self.selected_values.copy()
        values[a] = 1.0
        return self._cost(values)

    def accept(self, a: int, cost: float) -> None:
        self.selected_values[a] = 1.0


class _RankOneEvaluator:
    """Sherman-Morrison running caches for BMSE / BCRB / WC_MSE."""

    def __init__(self, instance: ProblemInstance, config: GreedyConfig):
        self.instance = instance
        self.kind = config.kind
        self.hR = instance.h_r_mat
        self.mu = instance.mu
        self.selected_values = np.zeros(instance.n)
        self._rebuild()

    def _rebuild(self) -> None:
        state = build_state(self.instance, SamplingVector(self.selected_values,
                                                          budget=self.instance.n))
        self.K = state.K.copy()
        self.Ki = state.K_inv.copy()
        self.singular = state.singular
        self.range_proj = state.range_projector if state.singular else None
        self.tr_Ki = float(np.trace(self.Ki))
        self.tr_Ki2_hR = float(np.sum((self.Ki @ self.Ki) * self.hR))

    def start_cost(self) -> float:
        return self._cost_from_caches()

    def _cost_from_caches(self) -> float:
        if self.kind is CostKind.BMSE:
            return self.tr_Ki
        bcrb_val = self.tr_Ki - self.mu * self.tr_Ki2_hR
        if self.kind is CostKind.BCRB:
            return bcrb_val
        B = self.Ki @ self.hR
        S = B.T @ B
        return bcrb_val + self.mu ** 2 * float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])

    def _in_range(self, r: np.ndarray) -> bool:
        if not self.singular:
            return True
        proj = self.range_proj @ r
        return np.linalg.norm(r - proj) <= _RANGE_RTOL * max(np.linalg.norm(r), 1.0)

    def candidate_cost(self, a: int) -> float:
        r = _sensor_column(self.instance, a)
        if self._in_range(r):
            out = _trace_cost_after_rank_one(self.kind, self.Ki, r, self.hR,
                                             self.mu, self.tr_Ki, self.tr_Ki2_hR)
            if out is not None:
                return out[0]
        values = self.selected_values.copy()
        values[a] = 1.0
        return cost_value(self.kind, self.instance,
                          SamplingVector(values, budget=self.instance.n))

    def accept(self, a: int, cost: float) -> None:
        r = _sensor_column(self.instance, a)
        self.selected_values[a] = 1.0
        self.K = self.K + np.outer(r, r)
        if self._in_range(r):
            out = _trace_cost_after_rank_one(self.kind, self.Ki, r, self.hR,
                                             self.mu, self.tr_Ki, self.tr_Ki2_hR)
            if out is not None:
                u = self.Ki @ r
                beta = 1.0 + float(r @ u)
                self.Ki = self.Ki - np.outer(u, u) / beta
                _, self.tr_Ki, self.tr_Ki2_hR = out
                return
        self._rebuild()


class _PerturbationEvaluator:
    """First-order smallest-eigenvalue updates for WC_BMSE candidates."""

    def __init__(self, instance: ProblemInstance, config: GreedyConfig):
        self.instance = instance
        self.selected_values = np.zeros(instance.n)
        self._refresh()

    def _refresh(self) -> None:
        self.state = build_state(self.instance, SamplingVector(self.selected_values,
                                                               budget=self.instance.n))
        self.lam_min, self.v_min = self.state.min_eigenpair

    def start_cost(self) -> float:
        return 1.0 / self.lam_min

    def candidate_cost(self, a: int) -> float:
        r = _sensor_column(self.instance, a)
        return 1.0 / (self.lam_min + float(r @ self.v_min) ** 2)

    def accept(self, a: int, cost: float) -> None:
        self.selected_values[a] = 1.0
        self._refresh()


def greedy_select(instance: ProblemInstance, config: GreedyConfig) -> GreedyResult:
    """Run the greedy loop until the budget or the cost threshold is reached.

    Candidates that are infeasible for the cost (A-design before the band is
    identifiable) count as +inf; if every candidate is +inf the smallest
    index wins, consistent with the tie rule.
    """
    n = instance.n
    fast = config.fast_path
    if fast != "off" and not instance.noise_is_diagonal:
        logger.warning("noise covariance is not diagonal; disabling fast path %r", fast)
        fast = "off"
    if fast == "exact-rank-one":
        evaluator = _RankOneEvaluator(instance, config)
    elif fast == "eig-perturbation":
        evaluator = _PerturbationEvaluator(instance, config)
    else:
        evaluator = _NaiveEvaluator(instance, config)

    threshold_mode = config.threshold is not None
    limit = n if threshold_mode else min(config.budget, n)
    selected: list[int] = []
    costs: list[float] = []
    n_eval = 0
    current = math.inf
    if threshold_mode:
        try:
            current = evaluator.start_cost()
        except ObservabilityError:
            current = math.inf
        if current <= config.threshold:
            return GreedyResult([], [], 0, fast, threshold_met=True)

    available = list(range(n))
    while len(selected) < limit:
        best_idx = None
        best_cost = math.inf
        for a in available:
            c = evaluator.candidate_cost(a)
            n_eval += 1
            if best_idx is None or c < best_cost:
                best_idx, best_cost = a, c
        evaluator.accept(best_idx, best_cost)
        available.remove(best_idx)
        selected.append(best_idx)
        costs.append(best_cost)
        current = best_cost
        if threshold_mode and current <= config.threshold:
            return GreedyResult(selected, costs, n_eval, fast, threshold_met=True)

    if threshold_mode:
        raise InfeasibleError(
            f"cost threshold {config.threshold} unreachable; best achieved {current}",
            best_cost=current,
        )
    return GreedyResult(selected, costs, n_eval, fast)
