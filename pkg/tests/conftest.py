"""Shared builders for random but seeded test instances."""

from __future__ import annotations

import numpy as np
import pytest

from gsample.graphs import WeightedGraph, build_laplacian
from gsample.harness import generate_er_graph
from gsample.model import ProblemInstance
from gsample.spectral import FilterSpec, spectral_decompose


def er_decomposition(seed: int, n: int, p: float = 0.35):
    rng = np.random.default_rng(seed)
    graph = generate_er_graph(n, p, 1.0, 0.2, rng)
    return graph, spectral_decompose(build_laplacian(graph))


def make_instance(seed: int = 0, n: int = 12, p: float = 0.35,
                  h_m: FilterSpec | None = None, h_r: FilterSpec | None = None,
                  mu: float = 0.5, sigma2: float = 0.1,
                  x0: np.ndarray | None = None) -> ProblemInstance:
    """ER-graph instance with PD regularizer and diagonal noise by default."""
    _, decomp = er_decomposition(seed, n, p)
    return ProblemInstance(
        decomp=decomp,
        h_m=h_m if h_m is not None else FilterSpec.diffusion(0.4),
        h_r=h_r if h_r is not None else FilterSpec.tikhonov(0.2).dagger(),
        noise_cov=sigma2 * np.eye(n),
        mu=mu,
        x0=x0 if x0 is not None else np.zeros(n),
    )


@pytest.fixture
def path3() -> WeightedGraph:
    return WeightedGraph(3, ((0, 1, 1.0), (1, 2, 1.0)))


@pytest.fixture
def triangle() -> WeightedGraph:
    return WeightedGraph(3, ((0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)))
