"""Measurement model, Gaussian prior, and synthetic-data generation.

The observation is y = h_M(L) x + e with e ~ N(0, R), observed only on a
sampled node set encoded by a 0/1 indicator d (D = diag(d)). The prior
x ~ N(x0, (1/mu) h_R(L)^+) doubles as the quadratic regularizer of the
estimator, with h_R required to have nonnegative responses.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import InfeasibleError
from .graphs import WeightedGraph, is_connected
from .spectral import FilterSpec, SpectralDecomposition, filter_matrix

_BINARY_ATOL = 1e-12
_NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SamplingVector:
    """Node-selection vector d with a sampling budget q (sum d_n^2 <= q).

    `binary` mode requires every entry in {0, 1}; `relaxed` mode allows the
    box [0, 1] and is what the projected-gradient solver iterates on.
    """

    values: np.ndarray
    budget: int
    mode: str = "binary"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        n = v.size
        if not (1 <= int(self.budget) <= n):
            raise ValueError(f"budget must be a positive integer <= {n}, got {self.budget}")
        if self.mode == "binary":
            if not np.all(np.isin(v, (0.0, 1.0))):
                raise ValueError("binary sampling vector must have entries in {0, 1}")
            if v.sum() > self.budget + _BINARY_ATOL:
                raise ValueError("binary sampling vector exceeds its budget")
        elif self.mode == "relaxed":
            if np.any(v < -_BINARY_ATOL) or np.any(v > 1.0 + _BINARY_ATOL):
                raise ValueError("relaxed sampling vector must lie in [0, 1]")
            if v @ v > self.budget + _NORM_TOL:
                raise ValueError("relaxed sampling vector violates ||d||^2 <= q")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "budget", int(self.budget))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.values > 0.5)) if self.mode == "binary" \
            else tuple(int(i) for i in np.flatnonzero(self.values))

    @classmethod
    def from_indices(cls, indices, n_nodes: int, budget: int | None = None) -> "SamplingVector":
        idx = sorted(set(int(i) for i in indices))
        if idx and not (0 <= idx[0] and idx[-1] < n_nodes):
            raise ValueError("selected index outside the node range")
        v = np.zeros(n_nodes)
        v[idx] = 1.0
        if budget is None:
            budget = max(len(idx), 1)
        return cls(v, budget=budget, mode="binary")

    @classmethod
    def full(cls, n_nodes: int) -> "SamplingVector":
        return cls(np.ones(n_nodes), budget=n_nodes, mode="binary")

    @classmethod
    def empty(cls, n_nodes: int, budget: int | None = None) -> "SamplingVector":
        return cls(np.zeros(n_nodes), budget=budget if budget is not None else n_nodes,
                   mode="binary")

    @classmethod
    def relaxed(cls, values, budget: int) -> "SamplingVector":
        return cls(np.asarray(values, dtype=float), budget=budget, mode="relaxed")


def as_sampling_vector(d, n_nodes: int, budget: int | None = None) -> SamplingVector:
    """Coerce an array-like into a SamplingVector (binary if entries are 0/1)."""
    if isinstance(d, SamplingVector):
        return d
    v = np.asarray(d, dtype=float).reshape(-1)
    if v.size != n_nodes:
        raise ValueError("sampling vector length does not match the instance")
    mode = "binary" if np.all(np.isin(v, (0.0, 1.0))) else "relaxed"
    if budget is None:
        budget = n_nodes
    return SamplingVector(v, budget=budget, mode=mode)


@dataclass(frozen=True)
class BandlimitedSpec:
    """A set of graph-frequency indices (positions in the ascending spectrum)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if not idx:
            raise ValueError("frequency band must be non-empty")
        if idx[0] < 0:
            raise ValueError("frequency indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return len(self.indices)

    def complement(self, n: int) -> tuple[int, ...]:
        if self.indices[-1] >= n:
            raise ValueError("band index outside the spectrum")
        return tuple(sorted(set(range(n)) - set(self.indices)))

    def basis(self, decomp: SpectralDecomposition) -> np.ndarray:
        """Eigenvector columns spanning the band subspace."""
        if self.indices[-1] >= decomp.n:
            raise ValueError("band index outside the spectrum")
        return decomp.eigenvectors[:, list(self.indices)]

    @classmethod
    def low_half(cls, n: int) -> "BandlimitedSpec":
        return cls(tuple(range(n // 2)))

    @classmethod
    def high_half(cls, n: int) -> "BandlimitedSpec":
        return cls(tuple(range(n - n // 2, n)))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Everything needed to form the estimator: spectrum, filters, noise, prior.

    Fields
    ------
    decomp : spectral decomposition of the graph Laplacian
    h_m    : measurement filter (y = h_M(L) x + e)
    h_r    : regularizer filter; responses must be >= 0
    noise_cov : N x N symmetric positive-definite noise covariance R
    mu     : regularization weight / inverse prior variance scale (>= 0)
    x0     : reference signal, the prior mean
    """

    decomp: SpectralDecomposition
    h_m: FilterSpec
    h_r: FilterSpec
    noise_cov: np.ndarray
    mu: float
    x0: np.ndarray

    def __post_init__(self):
        n = self.decomp.n
        R = np.asarray(self.noise_cov, dtype=float)
        if R.shape != (n, n):
            raise ValueError("noise covariance shape does not match the graph size")
        if not np.allclose(R, R.T, rtol=0.0, atol=1e-10 * max(1.0, float(np.abs(R).max()))):
            raise ValueError("noise covariance must be symmetric")
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError as exc:
            raise ValueError("noise covariance must be positive definite") from exc
        if self.mu < 0.0:
            raise ValueError("mu must be nonnegative")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.size != n:
            raise ValueError("x0 length does not match the graph size")
        resp = self.h_r.response(self.decomp.eigenvalues)
        if np.any(resp < -1e-12):
            raise ValueError("regularizer responses must be nonnegative")
        kernel = resp <= 1e-12 * max(1.0, float(resp.max(initial=0.0)))
        if np.any(kernel):
            comp = self.decomp.eigenvectors[:, kernel].T @ x0
            if np.linalg.norm(comp) > 1e-12 * (1.0 + np.linalg.norm(x0)):
                warnings.warn(
                    "x0 has components in the kernel of the regularizer; they shift "
                    "the estimate in unpenalized directions",
                    stacklevel=2,
                )
        R = R.copy()
        x0 = x0.copy()
        R.setflags(write=False)
        x0.setflags(write=False)
        object.__setattr__(self, "noise_cov", R)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def n(self) -> int:
        return self.decomp.n

    @cached_property
    def h_m_mat(self) -> np.ndarray:
        return filter_matrix(self.decomp, self.h_m)

    @cached_property
    def h_r_mat(self) -> np.ndarray:
        return filter_matrix(self.decomp, self.h_r)

    @cached_property
    def noise_is_diagonal(self) -> bool:
        return not np.any(self.noise_cov != np.diag(np.diag(self.noise_cov)))

    @cached_property
    def noise_inv(self) -> np.ndarray:
        if self.noise_is_diagonal:
            return np.diag(1.0 / np.diag(self.noise_cov))
        return np.linalg.inv(self.noise_cov)

    @cached_property
    def noise_chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.noise_cov)

    @cached_property
    def prior_half(self) -> np.ndarray:
        """V diag(sqrt(h_R(lam)^+)), so prior_half z has covariance h_R(L)^+."""
        resp = self.h_r.dagger().response(self.decomp.eigenvalues)
        return self.decomp.eigenvectors * np.sqrt(resp)


def sample_prior(instance: ProblemInstance, rng: np.random.Generator,
                 size: int | None = None) -> np.ndarray:
    """Draw x ~ N(x0, (1/mu) h_R(L)^+); kernel directions of h_R stay at x0."""
    if instance.mu <= 0.0:
        raise ValueError("prior sampling needs mu > 0")
    shape = (instance.n,) if size is None else (instance.n, size)
    z = rng.standard_normal(shape)
    dev = instance.prior_half @ z / np.sqrt(instance.mu)
    if size is None:
        return instance.x0 + dev
    return instance.x0[:, None] + dev


def sample_measurement(instance: ProblemInstance, x: np.ndarray, d: SamplingVector,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw D (h_M(L) x + e) with e ~ N(0, R); entries off the support are zero."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    e = instance.noise_chol @ rng.standard_normal(shape)
    clean = instance.h_m_mat @ x + e
    if x.ndim == 1:
        return d.values * clean
    return d.values[:, None] * clean


def perturb_topology(graph: WeightedGraph, delta: int, rng: np.random.Generator,
                     return_ops: bool = False):
    """Apply exactly `delta` random edge additions/removals, staying connected.

    Each operation picks add-vs-remove uniformly (when both are possible) and
    a uniform location; removals that disconnect the graph are rejected and
    resampled, up to 100 attempts per operation. Added edges reuse a weight
    drawn uniformly from the current edge weights.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    n = graph.n_nodes
    edges = {(k, l): w for k, l, w in graph.edges}
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    ops: list[tuple[str, int, int]] = []
    for _ in range(delta):
        for attempt in range(100):
            non_edges = [p for p in all_pairs if p not in edges]
            can_add = bool(non_edges)
            can_remove = bool(edges)
            if not can_add and not can_remove:
                raise InfeasibleError("graph admits no topology perturbation")
            if can_add and can_remove:
                op = "add" if rng.random() < 0.5 else "remove"
            else:
                op = "add" if can_add else "remove"
            if op == "add":
                pair = non_edges[int(rng.integers(len(non_edges)))]
                weights = list(edges.values())
                w = weights[int(rng.integers(len(weights)))] if weights else 1.0
                edges[pair] = w
                ops.append(("add", pair[0], pair[1]))
                break
            pair = list(edges)[int(rng.integers(len(edges)))]
            w = edges.pop(pair)
            candidate = WeightedGraph(n, tuple((k, l, wt) for (k, l), wt in edges.items()))
            if is_connected(candidate):
                ops.append(("remove", pair[0], pair[1]))
                break
            edges[pair] = w  # rejected: removal disconnects
        else:
            raise InfeasibleError(
                "could not find a connectivity-preserving perturbation in 100 attempts"
            )
    out = WeightedGraph(n, tuple((k, l, w) for (k, l), w in edges.items()))
    if return_ops:
        return out, ops
    return out
