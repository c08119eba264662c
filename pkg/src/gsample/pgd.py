"""Alternating projected gradient descent on the relaxed sampling problem.

The binary constraint d in {0,1}^N with ||d||^2 <= q is relaxed to the box
[0,1]^N intersected with the norm ball. Each iteration takes a backtracking
gradient step, then projects onto the ball and the box in that order. The
linesearch compares costs of binary-projected points, so the accepted-step
trace of projected costs is non-increasing by construction.

Baseline designs ride on the same machinery: A-design uses the BMSE
gradient and E-design the WC_BMSE gradient of a surrogate instance whose
regularizer is the ideal projector onto the band complement with a large
weight; LR-design uses the WC_BMSE gradient with an identity measurement
filter and the Laplacian as regularizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostKind, cost_value, gradient
from .estimator import build_state
from .model import BandlimitedSpec, ProblemInstance, SamplingVector
from .spectral import FilterSpec

BALL_MODES = ("norm-squared", "euclidean")

# Regularization weight of the bandlimited surrogate instances used to drive
# A-/E-design through the estimator-based gradients.
SURROGATE_WEIGHT = 1e4


@dataclass(frozen=True)
class PGDConfig:
    """Solver knobs; defaults follow the backtracking-linesearch recipe."""

    budget: int
    step_init: float = 1.0
    shrink: float = 0.5
    max_iters: int = 200
    max_backtracks: int = 30
    tol: float = 1e-6
    d0: np.ndarray | None = None
    alt_rounds: int = 1
    ball_mode: str = "norm-squared"

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.step_init <= 0.0:
            raise ValueError("initial step must be positive")
        if self.ball_mode not in BALL_MODES:
            raise ValueError(f"ball_mode must be one of {BALL_MODES}")
        if self.d0 is not None:
            d0 = np.asarray(self.d0, dtype=float).reshape(-1)
            if np.any(d0 <= 0.0) or np.any(d0 >= 1.0):
                raise ValueError("d0 must be strictly interior to (0,1)^N; "
                                 "coordinates at 0 have zero gradient and never move")
            if d0 @ d0 > self.budget + 1e-9:
                raise ValueError("d0 violates ||d||^2 <= q")
            object.__setattr__(self, "d0", d0)


@dataclass
class PGDIteration:
    iteration: int
    step: float
    projected_cost: float
    move_norm: float
    backtracks: int


@dataclass
class PGDResult:
    relaxed: np.ndarray
    binary: SamplingVector
    selected: tuple[int, ...]
    trace: list[PGDIteration]
    converged: bool
    stalled: bool

    @property
    def n_iterations(self) -> int:
        return len(self.trace)


def project_ball(y: np.ndarray, q: int, mode: str = "norm-squared") -> np.ndarray:
    """Shrink y into ||d||^2 <= q; identity when already feasible.

    The default scales by q/||y||^2 (which lands strictly inside the ball);
    the `euclidean` mode scales by sqrt(q)/||y||, the true nearest point.
    """
    y = np.asarray(y, dtype=float)
    ns = float(y @ y)
    if ns <= q:
        return y.copy()
    factor = q / ns if mode == "norm-squared" else np.sqrt(q / ns)
    return factor * y


def project_box(y: np.ndarray) -> np.ndarray:
    """Clamp elementwise to [0, 1]."""
    return np.clip(np.asarray(y, dtype=float), 0.0, 1.0)


def project_binary(y: np.ndarray, q: int) -> np.ndarray:
    """Round to {0,1}^N keeping at most q ones (the q largest pre-rounding).

    Ties in the pre-rounding values break toward the smaller index.
    """
    y = np.asarray(y, dtype=float)
    out = (y >= 0.5).astype(float)
    if out.sum() > q:
        order = np.argsort(-y, kind="stable")
        out = np.zeros_like(y)
        out[order[:q]] = 1.0
    return out


def _surrogate(instance: ProblemInstance, kind: CostKind,
               band: BandlimitedSpec | None) -> tuple[ProblemInstance, CostKind]:
    n = instance.n
    if kind is CostKind.LR_DESIGN:
        surrogate = ProblemInstance(
            decomp=instance.decomp,
            h_m=FilterSpec.identity(),
            h_r=FilterSpec.laplacian_power(1),
            noise_cov=np.eye(n),
            mu=instance.mu,
            x0=np.zeros(n),
        )
        return surrogate, CostKind.WC_BMSE
    if band is None:
        raise ValueError(f"{kind.value} requires a frequency band")
    surrogate = ProblemInstance(
        decomp=instance.decomp,
        h_m=FilterSpec.identity(),
        h_r=FilterSpec.ideal_projector(band.complement(n)),
        noise_cov=instance.noise_cov,
        mu=SURROGATE_WEIGHT,
        x0=np.zeros(n),
    )
    return surrogate, (CostKind.BMSE if kind is CostKind.A_DESIGN else CostKind.WC_BMSE)


def pgd_solve(instance: ProblemInstance, kind, config: PGDConfig,
              band: BandlimitedSpec | None = None) -> PGDResult:
    """Minimize a sampling cost over the relaxed feasible set.

    Returns both the relaxed iterate and its binary rounding. A step is
    accepted only if the binary-projected cost does not increase, both at
    the raw gradient point (the linesearch test) and after the ball/box
    projections; exhausting the backtracking budget stalls the solver.
    """
    kind = CostKind(kind)
    if kind in (CostKind.A_DESIGN, CostKind.E_DESIGN, CostKind.LR_DESIGN):
        instance, kind = _surrogate(instance, kind, band)

    n = instance.n
    q = config.budget
    if config.d0 is not None:
        d = config.d0.copy()
    else:
        d = np.clip(np.full(n, q / n), 0.01, 0.99)

    def binary_cost(vec: np.ndarray) -> float:
        rounded = project_binary(vec, q)
        return cost_value(kind, instance, SamplingVector(rounded, budget=q))

    def advance(vec: np.ndarray, step: float, grad: np.ndarray) -> np.ndarray:
        out = vec - step * grad
        for _ in range(config.alt_rounds):
            out = project_ball(out, q, config.ball_mode)
            out = project_box(out)
        return out

    trace: list[PGDIteration] = []
    converged = False
    stalled = False
    for k in range(config.max_iters):
        state = build_state(instance, SamplingVector.relaxed(d, budget=q))
        g = gradient(kind, state)
        if not np.all(np.isfinite(g)):
            raise ArithmeticError("gradient is not finite")
        base = binary_cost(d)
        step = config.step_init
        backtracks = 0
        accepted = False
        while backtracks <= config.max_backtracks:
            if (binary_cost(d - step * g) <= base
                    and binary_cost(advance(d, step, g)) <= base):
                accepted = True
                break
            step *= config.shrink
            backtracks += 1
        if not accepted:
            stalled = True
            trace.append(PGDIteration(k, step, base, 0.0, backtracks))
            break
        d_new = advance(d, step, g)
        move = float(np.linalg.norm(d_new - d))
        trace.append(PGDIteration(k, step, binary_cost(d_new), move, backtracks))
        d = d_new
        if move <= config.tol:
            converged = True
            break

    rounded = project_binary(d, q)
    binary = SamplingVector(rounded, budget=q)
    return PGDResult(
        relaxed=d,
        binary=binary,
        selected=binary.support,
        trace=trace,
        converged=converged,
        stalled=stalled,
    )
