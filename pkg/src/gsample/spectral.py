"""Laplacian eigendecompositions and spectral graph filters.

The Laplacian factors as L = V diag(lam) V^T with orthonormal V. A graph
filter is a scalar frequency response h evaluated on the eigenvalues; its
matrix form is h(L) = V diag(h(lam)) V^T. Numerically equal eigenvalues are
grouped and share one response value, so the filter is well defined on
degenerate spectra.

Eigenvalues are stored in ascending order (lam[0] = 0 for connected graphs),
and each eigenvector's sign is fixed so its largest-magnitude entry is
positive, which makes decompositions reproducible across runs.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

# Relative tolerance under which two eigenvalues count as equal (they then
# share one filter response value).
GROUP_RTOL = 1e-9

_FAMILIES = frozenset({
    "identity",
    "laplacian-power",
    "gmrf",
    "tikhonov",
    "diffusion",
    "inverse-diffusion",
    "ideal-projector",
    "custom",
})


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Laplacian."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        V = np.asarray(self.eigenvectors, dtype=float)
        if V.shape != (lam.size, lam.size):
            raise ValueError("eigenvector matrix must be square and match the eigenvalue count")
        if np.any(np.diff(lam) < -1e-12 * max(1.0, float(np.abs(lam).max(initial=0.0)))):
            raise ValueError("eigenvalues must be sorted ascending")
        lam = lam.copy()
        V = V.copy()
        lam.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", V)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self) -> np.ndarray:
        """Reassemble the decomposed matrix V diag(lam) V^T."""
        V = self.eigenvectors
        M = (V * self.eigenvalues) @ V.T
        return 0.5 * (M + M.T)


def spectral_decompose(L: np.ndarray) -> SpectralDecomposition:
    """Eigendecompose a symmetric matrix with a deterministic sign convention."""
    L = np.asarray(L, dtype=float)
    scale = max(1.0, float(np.abs(L).max(initial=0.0)))
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError("input must be a square matrix")
    if not np.allclose(L, L.T, rtol=0.0, atol=1e-10 * scale):
        raise ValueError("input matrix is not symmetric")
    lam, V = np.linalg.eigh(0.5 * (L + L.T))
    V = V.copy()
    for j in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0.0:
            V[:, j] = -V[:, j]
    return SpectralDecomposition(lam, V)


def eigenvalue_groups(eigenvalues: np.ndarray, rtol: float = GROUP_RTOL) -> list[tuple[int, int]]:
    """Half-open index ranges of eigenvalues that are equal within tolerance.

    The gap test is |lam_i - lam_{i-1}| <= rtol * max(1, lam_max); runs of
    close eigenvalues are chained into a single group.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        return []
    scale = max(1.0, float(lam[-1]))
    groups = []
    start = 0
    for i in range(1, lam.size):
        if lam[i] - lam[i - 1] > rtol * scale:
            groups.append((start, i))
            start = i
    groups.append((start, lam.size))
    return groups


@dataclass(frozen=True)
class FilterSpec:
    """A scalar frequency response applied to Laplacian eigenvalues.

    Families
    --------
    identity            h(lam) = 1
    laplacian-power     h(lam) = lam**power
    gmrf                h(lam) = lam**-1/2 for lam > 0, else 0
    tikhonov            h(lam) = 1 / (1 + alpha*lam)
    diffusion           h(lam) = exp(-tau*lam)
    inverse-diffusion   h(lam) = exp(+tau*lam)
    ideal-projector     h = 1 on a set of frequency indices, 0 elsewhere
    custom              tabulated response per eigenvalue index

    `exponent` raises the family response to a power; for negative exponents
    zero responses stay zero (pseudo-inverse convention), so `dagger()` is
    simply exponent negation.
    """

    kind: str
    power: int = 1
    alpha: float = 1.0
    tau: float = 0.5
    band: tuple[int, ...] | None = None
    table: tuple[float, ...] | None = None
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in _FAMILIES:
            raise ValueError(f"unknown filter family {self.kind!r}")
        if self.kind == "ideal-projector" and not self.band:
            raise ValueError("ideal-projector needs a non-empty frequency index set")
        if self.kind == "custom" and not self.table:
            raise ValueError("custom filter needs a tabulated response")

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls) -> "FilterSpec":
        return cls("identity")

    @classmethod
    def laplacian_power(cls, power: int = 1) -> "FilterSpec":
        return cls("laplacian-power", power=int(power))

    @classmethod
    def gmrf(cls) -> "FilterSpec":
        return cls("gmrf")

    @classmethod
    def tikhonov(cls, alpha: float) -> "FilterSpec":
        return cls("tikhonov", alpha=float(alpha))

    @classmethod
    def diffusion(cls, tau: float) -> "FilterSpec":
        return cls("diffusion", tau=float(tau))

    @classmethod
    def inverse_diffusion(cls, tau: float) -> "FilterSpec":
        return cls("inverse-diffusion", tau=float(tau))

    @classmethod
    def ideal_projector(cls, indices) -> "FilterSpec":
        return cls("ideal-projector", band=tuple(sorted(int(i) for i in set(indices))))

    @classmethod
    def custom(cls, values) -> "FilterSpec":
        return cls("custom", table=tuple(float(v) for v in values))

    def dagger(self) -> "FilterSpec":
        """Pseudo-inverse response: 1/h where h is nonzero, 0 where h is 0."""
        return dataclasses.replace(self, exponent=-self.exponent)

    # -- evaluation --------------------------------------------------------

    def response(self, eigenvalues: np.ndarray) -> np.ndarray:
        """Evaluate the response on a sorted eigenvalue vector, grouped."""
        lam = np.asarray(eigenvalues, dtype=float).reshape(-1)
        groups = eigenvalue_groups(lam)
        scale = max(1.0, float(lam[-1])) if lam.size else 1.0
        out = np.empty(lam.size)
        for start, stop in groups:
            rep = float(lam[start:stop].mean())
            if abs(rep) <= GROUP_RTOL * scale:
                rep = 0.0
            out[start:stop] = self._base_value(rep, start, stop)
        if self.exponent != 1.0:
            ztol = 1e-12 * max(1.0, float(np.abs(out).max(initial=0.0)))
            if self.exponent < 0.0:
                with np.errstate(divide="ignore", invalid="ignore"):
                    out = np.where(np.abs(out) > ztol, out ** self.exponent, 0.0)
            else:
                out = out ** self.exponent
        return out

    def _base_value(self, rep: float, start: int, stop: int) -> float:
        if self.kind == "identity":
            return 1.0
        if self.kind == "laplacian-power":
            if self.power < 0 and rep == 0.0:
                return 0.0
            return rep ** self.power
        if self.kind == "gmrf":
            return 0.0 if rep == 0.0 else rep ** -0.5
        if self.kind == "tikhonov":
            return 1.0 / (1.0 + self.alpha * rep)
        if self.kind == "diffusion":
            return math.exp(-self.tau * rep)
        if self.kind == "inverse-diffusion":
            return math.exp(self.tau * rep)
        if self.kind == "ideal-projector":
            # A degenerate group is inside the band as soon as one of its
            # indices is, which keeps the response constant on the group.
            return 1.0 if any(start <= i < stop for i in self.band) else 0.0
        if self.kind == "custom":
            if stop > len(self.table):
                raise ValueError("custom table shorter than the eigenvalue count")
            vals = np.asarray(self.table[start:stop])
            if vals.size > 1:
                vscale = max(1.0, float(np.abs(vals).max(initial=0.0)))
                if float(vals.max() - vals.min()) > 1e-9 * vscale:
                    raise ValueError(
                        "custom table assigns different responses to equal eigenvalues "
                        f"(indices {start}..{stop - 1})"
                    )
            return float(vals[0])
        raise AssertionError(self.kind)


def filter_matrix(decomp: SpectralDecomposition, spec: FilterSpec) -> np.ndarray:
    """Materialize h(L) = V diag(h(lam)) V^T for a response spec."""
    resp = spec.response(decomp.eigenvalues)
    if not np.all(np.isfinite(resp)):
        raise ValueError(f"filter response is not finite at some eigenvalue: {spec}")
    V = decomp.eigenvectors
    M = (V * resp) @ V.T
    return 0.5 * (M + M.T)


def apply_filter(decomp: SpectralDecomposition, spec: FilterSpec, a: np.ndarray) -> np.ndarray:
    """Filter a signal by transforming, scaling per frequency, transforming back."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] != decomp.n:
        raise ValueError("signal length does not match the decomposition")
    resp = spec.response(decomp.eigenvalues)
    if not np.all(np.isfinite(resp)):
        raise ValueError(f"filter response is not finite at some eigenvalue: {spec}")
    ahat = decomp.eigenvectors.T @ a
    if a.ndim == 1:
        return decomp.eigenvectors @ (resp * ahat)
    return decomp.eigenvectors @ (resp[:, None] * ahat)


def gft(decomp: SpectralDecomposition, a: np.ndarray) -> np.ndarray:
    """Graph Fourier transform: project onto the eigenbasis."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] != decomp.n:
        raise ValueError("signal length does not match the decomposition")
    return decomp.eigenvectors.T @ a


def igft(decomp: SpectralDecomposition, ahat: np.ndarray) -> np.ndarray:
    """Inverse graph Fourier transform."""
    ahat = np.asarray(ahat, dtype=float)
    if ahat.shape[0] != decomp.n:
        raise ValueError("spectrum length does not match the decomposition")
    return decomp.eigenvectors @ ahat


def total_variation(L: np.ndarray, a: np.ndarray) -> float:
    """Quadratic form a^T L a, the graph smoothness measure."""
    a = np.asarray(a, dtype=float)
    return float(a @ (np.asarray(L, dtype=float) @ a))
