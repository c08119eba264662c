"""Sampling-design cost functions and their analytic gradients.

Four estimator-driven costs share the matrix K(d):

    bcrb     tr(K^-1 K_M K^-1)          lower bound at the estimator's bias
    wc_mse   bcrb + mu^2 sigma_max^2(K^-1 h_R)   worst bias over a unit ball
    bmse     tr(K^-1)                   Bayesian MSE under the Gaussian prior
    wc_bmse  1 / lam_min(K)             worst-direction Bayesian MSE

Three classical baselines operate on the bandlimited Gram matrix
G = V_{S,B}^T R_{S,S}^-1 V_{S,B} (A- and E-design) or on diag(d)^2 + mu L
(LR-design). E- and LR-design are negated so that every cost is minimized.

All gradients share the form -2 diag(R^-1 D h_M K^-1 Q K^-1 h_M) with a
cost-specific Q; each Q carries the mu factors required by
K_M = K - mu h_R and is validated against finite differences in the tests.
"""

from __future__ import annotations

import warnings
from enum import Enum

import numpy as np

from .estimator import EstimatorState, build_state, variance_trace
from .exceptions import ObservabilityError, RankError
from .model import BandlimitedSpec, ProblemInstance, as_sampling_vector

_DEGENERACY_RTOL = 1e-9


class CostKind(str, Enum):
    BCRB = "BCRB"
    WC_MSE = "WC_MSE"
    BMSE = "BMSE"
    WC_BMSE = "WC_BMSE"
    A_DESIGN = "A_DESIGN"
    E_DESIGN = "E_DESIGN"
    LR_DESIGN = "LR_DESIGN"


GFR_KINDS = frozenset({CostKind.BCRB, CostKind.WC_MSE, CostKind.BMSE, CostKind.WC_BMSE})
BASELINE_KINDS = frozenset({CostKind.A_DESIGN, CostKind.E_DESIGN, CostKind.LR_DESIGN})


def bcrb(state: EstimatorState) -> float:
    """tr(K^-1 K_M K^-1); the variance term of the exact MSE."""
    return variance_trace(state)


def wc_mse(state: EstimatorState) -> float:
    """bcrb plus the worst squared bias over ||x - x0|| <= 1."""
    inst = state.instance
    M = state.K_inv @ inst.h_r_mat
    S = M.T @ M  # h_R K^-2 h_R
    smax_sq = float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])
    return bcrb(state) + inst.mu ** 2 * smax_sq


def bmse(state: EstimatorState) -> float:
    """tr(K^-1) (pseudo-inverse when K is singular)."""
    return float(np.trace(state.K_inv))


def wc_bmse(state: EstimatorState) -> float:
    """Largest eigenvalue of K^+, i.e. 1 over the smallest nonzero eigenvalue."""
    return 1.0 / state.lambda_min_nonzero


def _band_gram(instance: ProblemInstance, band: BandlimitedSpec, d) -> np.ndarray:
    d = as_sampling_vector(d, instance.n)
    if d.mode != "binary":
        raise ValueError("bandlimited design costs are defined for binary sampling vectors")
    support = list(d.support)
    V_sb = instance.decomp.eigenvectors[np.ix_(support, list(band.indices))]
    R_ss = instance.noise_cov[np.ix_(support, support)]
    G = V_sb.T @ np.linalg.solve(R_ss, V_sb) if support else np.zeros((band.size, band.size))
    return 0.5 * (G + G.T)


def a_design_cost(instance: ProblemInstance, band: BandlimitedSpec, d) -> float:
    """tr(G^-1) of the sampled bandlimited Gram matrix."""
    d = as_sampling_vector(d, instance.n)
    if len(d.support) < band.size:
        raise ObservabilityError("A-design needs at least as many samples as band frequencies")
    G = _band_gram(instance, band, d)
    lam = np.linalg.eigvalsh(G)
    if lam[0] <= 1e-12 * max(1.0, lam[-1]):
        raise ObservabilityError("sampled bandlimited Gram matrix is rank deficient")
    return float(np.trace(np.linalg.inv(G)))


def e_design_cost(instance: ProblemInstance, band: BandlimitedSpec, d) -> float:
    """Negated smallest Gram eigenvalue (0, the worst value, when unidentifiable)."""
    G = _band_gram(instance, band, d)
    lam = np.linalg.eigvalsh(G)
    lam_min = float(lam[0])
    if lam_min <= 1e-12 * max(1.0, float(lam[-1])):
        return 0.0
    return -lam_min


def lr_design_cost(instance: ProblemInstance, d) -> float:
    """Negated smallest eigenvalue of D^T D + mu L."""
    d = as_sampling_vector(d, instance.n)
    L = instance.decomp.reconstruct()
    M = np.diag(d.values ** 2) + instance.mu * L
    return -float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def cost_value(kind, instance: ProblemInstance, d, band: BandlimitedSpec | None = None) -> float:
    """Evaluate any cost on a sampling vector; the uniform solver entry point."""
    kind = CostKind(kind)
    if kind in GFR_KINDS:
        state = build_state(instance, d)
        return {
            CostKind.BCRB: bcrb,
            CostKind.WC_MSE: wc_mse,
            CostKind.BMSE: bmse,
            CostKind.WC_BMSE: wc_bmse,
        }[kind](state)
    if kind is CostKind.LR_DESIGN:
        return lr_design_cost(instance, d)
    if band is None:
        raise ValueError(f"{kind.value} requires a frequency band")
    if kind is CostKind.A_DESIGN:
        return a_design_cost(instance, band, d)
    return e_design_cost(instance, band, d)


def _pick_extreme_vector(values: np.ndarray, vectors: np.ndarray, extreme_idx: int,
                         label: str) -> np.ndarray:
    """Deterministic eigenvector choice; warns when the eigenvalue is degenerate.

    Among eigenvectors whose eigenvalue ties the extreme one within relative
    tolerance, pick the one whose largest-magnitude entry sits at the
    smallest index, so repeated runs return the same (sub)gradient.
    """
    ext = values[extreme_idx]
    tol = _DEGENERACY_RTOL * max(1.0, abs(ext))
    close = np.flatnonzero(np.abs(values - ext) <= tol)
    if close.size > 1:
        warnings.warn(
            f"{label} eigenvalue is degenerate (multiplicity {close.size}); "
            "returning a subgradient with a deterministic eigenvector choice",
            stacklevel=3,
        )
        best = min(close, key=lambda j: (int(np.argmax(np.abs(vectors[:, j]))), int(j)))
    else:
        best = close[0]
    v = vectors[:, best]
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0.0 else v


def gradient(kind, state: EstimatorState) -> np.ndarray:
    """Gradient of a GFR cost with respect to the sampling vector d.

    For R = sigma^2 I every entry with d_n = 0 is exactly zero, which is why
    the projected-gradient solver must start from an interior point.
    """
    kind = CostKind(kind)
    if kind not in GFR_KINDS:
        raise ValueError(f"no analytic gradient for {kind.value}")
    if state.singular:
        raise RankError("cost gradients require an invertible K(d)")
    inst = state.instance
    dv = state.d.values
    hM = inst.h_m_mat
    hR = inst.h_r_mat
    Ki = state.K_inv
    Rinv = inst.noise_inv
    mu = inst.mu

    if kind is CostKind.WC_BMSE:
        lam_min = state.eigenvalues[0]
        u = _pick_extreme_vector(state.eigenvalues, state.eigenvectors, 0, "smallest K")
        hMu = hM @ u
        return (-2.0 / lam_min ** 2) * ((Rinv @ (dv * hMu)) * hMu)

    if kind is CostKind.BMSE:
        Q = np.eye(state.n)
    else:
        A = Ki @ hR
        Q = np.eye(state.n) - mu * (A + A.T)
        if kind is CostKind.WC_MSE:
            M = Ki @ hR
            S = M.T @ M
            S = 0.5 * (S + S.T)
            vals, vecs = np.linalg.eigh(S)
            u = _pick_extreme_vector(vals, vecs, state.n - 1, "largest bias-direction")
            hRu = hR @ u
            KihRu = Ki @ hRu
            Q = Q + mu ** 2 * (np.outer(KihRu, hRu) + np.outer(hRu, KihRu))

    M = Rinv @ (dv[:, None] * hM) @ Ki @ Q @ (Ki @ hM)
    return -2.0 * np.diag(M).copy()
