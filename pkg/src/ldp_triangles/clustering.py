"""Two-star counting under edge LDP and the clustering-coefficient pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .mechanisms import STARS, Variant, stream
from .two_round import Clipping, EstimateResult, ProtocolConfig, run_protocol


def estimate_2stars_ldp(graph: Graph, eps0: float, eps1: float, alpha: float, rng: np.random.Generator) -> float:
    """Sum over users of C(clipped degree, 2) + Lap(C(d~, 2) / eps1).

    Each user clips its full neighbor list with a noisy degree d~ spent from
    eps0. Only the clipped degree matters, so projection is applied to counts.
    """
    if eps0 <= 0 or eps1 <= 0:
        raise ValueError("budgets must be positive")
    deg = graph.degrees.astype(float)
    d_tilde = np.maximum(deg + rng.laplace(0.0, 1.0 / eps0, size=graph.n) + alpha, 0.0)
    clipped = np.where(deg > d_tilde, np.floor(d_tilde), deg)
    stars = clipped * (clipped - 1) / 2
    scale = np.maximum(d_tilde * (d_tilde - 1) / 2, 0.0) / eps1
    reports = stars + rng.laplace(0.0, 1.0, size=graph.n) * scale
    return math.fsum(reports.tolist())


@dataclass(frozen=True)
class ClusteringEstimate:
    coefficient: float | None
    triangles: float
    two_stars: float
    triangle_result: EstimateResult

    @property
    def defined(self) -> bool:
        return self.coefficient is not None


def estimate_clustering(
    graph: Graph,
    epsilon: float,
    mu_star: float,
    seed: int,
    *,
    triangle_config: ProtocolConfig | None = None,
    star_eps0: float | None = None,
    star_eps1: float | None = None,
    alpha: float = 150.0,
) -> ClusteringEstimate:
    """3 f^_triangles / f^_2stars.

    Defaults: triangles via OneNS with double clipping at total budget
    epsilon; 2-stars with eps0 = epsilon/10 and eps1 = 9 epsilon/10. The
    coefficient is None when the 2-star estimate is not positive.
    """
    config = triangle_config or ProtocolConfig.default(
        Variant.ONE_NS, epsilon, mu_star, Clipping.DOUBLE, alpha=alpha, seed=seed
    )
    tri = run_protocol(graph, config)
    stars = estimate_2stars_ldp(
        graph,
        star_eps0 if star_eps0 is not None else epsilon / 10,
        star_eps1 if star_eps1 is not None else 9 * epsilon / 10,
        alpha,
        stream(seed, STARS),
    )
    coeff = 3 * tri.estimate / stars if stars > 0 else None
    return ClusteringEstimate(coeff, tri.estimate, stars, tri)
