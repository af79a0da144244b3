"""One-round baselines: noisy-triangle counting after randomized response.

Every user perturbs its lower-triangular bits once and the server estimates
the triangle count from the noisy graph alone. The biased estimator counts
noisy triangles directly. The unbiased estimators classify all node triples by
their number of noisy edges and invert the per-triple mixing matrix. The ARR
variant first undoes the extra edge sampling.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .graph import Graph, count_kstars, count_triangles
from .mechanisms import ArrParams, bits_per_index, warner_keep_prob
from .two_round import DegenerateBudgetError, NoisyEdgeSet, sample_noisy_edges

# Warner RR keeps every pair of the lower triangle as a candidate 1, so the
# noisy graph is dense; beyond this size it no longer fits a desk machine.
DENSE_NODE_LIMIT = 3000


@dataclass(frozen=True)
class TripleCounts:
    """Numbers of node triples spanning exactly 3, 2, 1 and 0 edges."""

    m3: float
    m2: float
    m1: float
    m0: float

    def by_edges(self) -> np.ndarray:
        """Counts indexed by edge count: [m0, m1, m2, m3]."""
        return np.array([self.m0, self.m1, self.m2, self.m3], dtype=float)


def count_noisy_triples(noisy: NoisyEdgeSet | Graph) -> TripleCounts:
    g = noisy.to_graph() if isinstance(noisy, NoisyEdgeSet) else noisy
    n = g.n
    m3 = count_triangles(g)
    m2 = count_kstars(g, 2) - 3 * m3
    m1 = g.num_edges * (n - 2) - 2 * m2 - 3 * m3 if n >= 2 else 0
    m0 = math.comb(n, 3) - m3 - m2 - m1
    return TripleCounts(m3, m2, m1, m0)


def mixing_matrix(q: float) -> np.ndarray:
    """M[s, t] = Pr[noisy triple has s edges | true triple has t edges].

    Each true edge survives with probability 1 - q and each non-edge appears
    with probability q, independently.
    """
    out = np.zeros((4, 4))
    for t in range(4):
        for kept in range(t + 1):
            p_kept = math.comb(t, kept) * (1 - q) ** kept * q ** (t - kept)
            for added in range(3 - t + 1):
                p_added = math.comb(3 - t, added) * q ** added * (1 - q) ** (3 - t - added)
                out[kept + added, t] += p_kept * p_added
    return out


@functools.lru_cache(maxsize=64)
def _triangle_row(q: float) -> tuple[float, ...]:
    """Row of M^-1 that recovers the 3-edge count, solved at 50 digits."""
    with mpmath.workdps(50):
        qm = mpmath.mpf(q)
        mat = mpmath.matrix(4, 4)
        for t in range(4):
            for kept in range(t + 1):
                for added in range(3 - t + 1):
                    mat[kept + added, t] += (
                        mpmath.binomial(t, kept) * (1 - qm) ** kept * qm ** (t - kept)
                        * mpmath.binomial(3 - t, added) * qm ** added * (1 - qm) ** (3 - t - added)
                    )
        inv = mpmath.inverse(mat)
        return tuple(float(inv[3, s]) for s in range(4))


def _invert(q: float, observed: np.ndarray) -> float:
    """Third component of M^-1 applied to counts indexed by edge count."""
    if abs(q - 0.5) < 1e-15:
        raise DegenerateBudgetError("randomized response with epsilon = 0 carries no signal")
    row = _triangle_row(float(q))
    return math.fsum(w * float(x) for w, x in zip(row, observed))


def _noisy_graph(graph: Graph, epsilon: float, p2: float, rng: np.random.Generator) -> NoisyEdgeSet:
    if p2 >= 1.0 and graph.n > DENSE_NODE_LIMIT:
        raise ValueError(f"randomized response without sampling is limited to n <= {DENSE_NODE_LIMIT}")
    return sample_noisy_edges(graph, ArrParams.from_sampling(epsilon, p2), rng)


METHODS = ("rr-biased", "rr-unbiased", "arr-unbiased")


@dataclass(frozen=True)
class OneRoundResult:
    estimate: float
    ul_bits: np.ndarray  # per user: one index per reported noisy edge


def run_one_round(graph: Graph, method: str, epsilon: float, rng: np.random.Generator, p2: float = 1.0) -> OneRoundResult:
    """Runs one of METHODS; ``p2`` is only read by arr-unbiased."""
    if method not in METHODS:
        raise ValueError(f"unknown one-round method {method!r}; expected one of {', '.join(METHODS)}")
    if method == "arr-unbiased":
        if not (0.0 < p2 <= 1.0):
            raise ValueError("p2 must lie in (0, 1]")
    else:
        p2 = 1.0
    if method != "rr-biased" and epsilon <= 0:
        raise DegenerateBudgetError("epsilon must be positive")
    noisy = _noisy_graph(graph, epsilon, p2, rng)
    ul = noisy.row_sizes.astype(np.int64) * bits_per_index(graph.n)
    if method == "rr-biased":
        est = float(count_triangles(noisy.to_graph()))
    else:
        counts = count_noisy_triples(noisy)
        if method == "arr-unbiased":
            counts = sampling_corrected_counts(counts, p2, graph.n)
        est = _invert(1.0 - warner_keep_prob(epsilon), counts.by_edges())
    return OneRoundResult(est, ul)


def rr_biased_estimate(graph: Graph, epsilon: float, rng: np.random.Generator) -> float:
    """Number of triangles in the Warner-RR noisy graph."""
    return run_one_round(graph, "rr-biased", epsilon, rng).estimate


def rr_unbiased_estimate(graph: Graph, epsilon: float, rng: np.random.Generator) -> float:
    return run_one_round(graph, "rr-unbiased", epsilon, rng).estimate


def sampling_corrected_counts(counts: TripleCounts, p2: float, n: int) -> TripleCounts:
    """Undoes independent edge sampling with probability p2 (unbiased in expectation)."""
    m3 = counts.m3 / p2 ** 3
    m2 = counts.m2 / p2 ** 2 - 3 * (1 - p2) * m3
    m1 = counts.m1 / p2 - 3 * (1 - p2) ** 2 * m3 - 2 * (1 - p2) * m2
    m0 = math.comb(n, 3) - m3 - m2 - m1
    return TripleCounts(m3, m2, m1, m0)


def arr_unbiased_estimate(graph: Graph, epsilon: float, p2: float, rng: np.random.Generator) -> float:
    """Warner RR followed by edge sampling with probability p2, then inversion."""
    return run_one_round(graph, "arr-unbiased", epsilon, rng, p2).estimate


def arr_sampling_rate(epsilon: float, mu: float) -> float:
    """p2 such that RR followed by sampling keeps a true edge with probability mu."""
    return min(1.0, mu / warner_keep_prob(epsilon))
