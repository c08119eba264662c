"""The graph-filtered regularized ML estimator and its exact error measures.

For a sampling vector d the normal-equations matrix is

    K(d) = h_M(L) D R^-1 D h_M(L) + mu h_R(L),      D = diag(d),

and the estimate is x_hat = K^-1 (h_M(L) D R^-1 D y + mu h_R(L) x0). When K
is singular (regularizer with a kernel that the samples do not cover) the
Moore-Penrose pseudo-inverse is used throughout, with eigenvalues below
1e-10 * lam_max(K) treated as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ObservabilityError, RankError
from .model import BandlimitedSpec, ProblemInstance, SamplingVector, as_sampling_vector

PINV_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """K(d) together with its cached eigendecomposition and measurement part."""

    instance: ProblemInstance
    d: SamplingVector
    K: np.ndarray
    K_M: np.ndarray
    eigenvalues: np.ndarray   # of K, ascending
    eigenvectors: np.ndarray  # of K

    @property
    def n(self) -> int:
        return self.instance.n

    @cached_property
    def _zero_threshold(self) -> float:
        return PINV_RTOL * max(float(self.eigenvalues.max(initial=0.0)), 0.0)

    @cached_property
    def singular(self) -> bool:
        return bool(self.eigenvalues[0] <= self._zero_threshold)

    @cached_property
    def nonzero_mask(self) -> np.ndarray:
        return self.eigenvalues > self._zero_threshold

    @cached_property
    def K_inv(self) -> np.ndarray:
        """Inverse of K, or its pseudo-inverse when K is singular."""
        inv = np.where(self.nonzero_mask, 1.0 / np.where(self.nonzero_mask, self.eigenvalues, 1.0), 0.0)
        U = self.eigenvectors
        M = (U * inv) @ U.T
        return 0.5 * (M + M.T)

    @cached_property
    def range_projector(self) -> np.ndarray:
        """Orthogonal projector onto the range of K."""
        U = self.eigenvectors[:, self.nonzero_mask]
        return U @ U.T

    @property
    def lambda_min_nonzero(self) -> float:
        lam = self.eigenvalues[self.nonzero_mask]
        if lam.size == 0:
            raise RankError("K has no nonzero spectrum")
        return float(lam[0])

    @property
    def min_eigenpair(self) -> tuple[float, np.ndarray]:
        """Smallest nonzero eigenvalue of K and its eigenvector."""
        idx = int(np.flatnonzero(self.nonzero_mask)[0]) if self.nonzero_mask.any() else None
        if idx is None:
            raise RankError("K has no nonzero spectrum")
        return float(self.eigenvalues[idx]), self.eigenvectors[:, idx]

    def solve(self, B: np.ndarray) -> np.ndarray:
        return self.K_inv @ B


def measurement_matrix(instance: ProblemInstance, d: SamplingVector) -> np.ndarray:
    """h_M(L) D R^-1 D h_M(L), the data-dependent part of K."""
    dv = d.values
    hM = instance.h_m_mat
    W = (dv[:, None] * instance.noise_inv) * dv[None, :]
    M = hM @ W @ hM
    return 0.5 * (M + M.T)


def build_state(instance: ProblemInstance, d, allow_singular: bool = True) -> EstimatorState:
    """Assemble K(d) = K_M + mu h_R(L) and eigendecompose it once."""
    d = as_sampling_vector(d, instance.n)
    K_M = measurement_matrix(instance, d)
    K = K_M + instance.mu * instance.h_r_mat
    K = 0.5 * (K + K.T)
    lam, U = np.linalg.eigh(K)
    state = EstimatorState(instance, d, K, K_M, lam, U)
    if state.singular and not allow_singular:
        raise RankError("K(d) is numerically singular and the pseudo-inverse path is disabled")
    return state


def measurement_rank(instance: ProblemInstance, d) -> int:
    """Rank of D h_M(L); equal to n means x is identifiable without the prior."""
    d = as_sampling_vector(d, instance.n)
    M = d.values[:, None] * instance.h_m_mat
    return int(np.linalg.matrix_rank(M))


def estimate(state: EstimatorState, y: np.ndarray) -> np.ndarray:
    """GFR-ML estimate from measurements y (masked to the sampled support).

    Accepts a single vector (n,) or a batch (n, trials); the estimate is
    linear in y so batches are solved in one pass.
    """
    inst = state.instance
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = y[:, None] if single else y
    dv = state.d.values
    Ym = dv[:, None] * Y
    T = dv[:, None] * (inst.noise_inv @ Ym)
    rhs = inst.h_m_mat @ T + (inst.mu * (inst.h_r_mat @ inst.x0))[:, None]
    X = state.K_inv @ rhs
    return X[:, 0] if single else X


def bias(state: EstimatorState, x: np.ndarray) -> np.ndarray:
    """Mean of x_hat - x for a fixed true signal x."""
    inst = state.instance
    x = np.asarray(x, dtype=float)
    return state.K_inv @ (state.K_M @ x + inst.mu * (inst.h_r_mat @ inst.x0)) - x


def variance_trace(state: EstimatorState) -> float:
    """tr(K^-1 K_M K^-1), the noise contribution to the estimator MSE."""
    A = state.K_inv @ state.K_M
    return float(np.sum(A * state.K_inv))


def analytic_mse(state: EstimatorState, x: np.ndarray) -> float:
    """Exact MSE at a fixed x: squared-bias term plus the variance trace."""
    inst = state.instance
    x = np.asarray(x, dtype=float)
    b = inst.mu * (state.K_inv @ (inst.h_r_mat @ (x - inst.x0)))
    return float(b @ b) + variance_trace(state)


def estimate_bandlimited(instance: ProblemInstance, band: BandlimitedSpec, d,
                         y: np.ndarray) -> np.ndarray:
    """Generalized least squares for a signal confined to a frequency band.

    With U the band's eigenvector basis and H = h_M(L) U, solves

        x_hat = U (H^T D R^-1 D H)^-1 H^T D R^-1 D y,

    which lives in span(U). Raises ObservabilityError when the sampled Gram
    matrix is rank deficient (the band is not identifiable from the samples).
    """
    d = as_sampling_vector(d, instance.n)
    U = band.basis(instance.decomp)
    H = instance.h_m_mat @ U
    dv = d.values
    DH = dv[:, None] * H
    G = DH.T @ instance.noise_inv @ DH
    G = 0.5 * (G + G.T)
    lam = np.linalg.eigvalsh(G)
    if lam[0] <= 1e-12 * max(1.0, lam[-1]):
        raise ObservabilityError("band is not identifiable from the sampled nodes")
    y = np.asarray(y, dtype=float)
    rhs = DH.T @ (instance.noise_inv @ (dv * y))
    coeff = np.linalg.solve(G, rhs)
    return U @ coeff
