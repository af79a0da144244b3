"""Utility metrics and the communication-cost model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mechanisms import Variant, bits_per_index

DEFAULT_LINK_RATE = 20e6  # bits per second


def relative_error(estimate: float, truth: float, n: int) -> float:
    """|estimate - truth| / max(truth, 0.001 n)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return abs(estimate - truth) / max(truth, 0.001 * n)


def l2_loss(estimates: Sequence[float], truth: float) -> float:
    """Mean squared error over trials."""
    est = np.asarray(estimates, dtype=float)
    return float(np.mean((est - truth) ** 2)) if len(est) else 0.0


@dataclass(frozen=True)
class ErrorReport:
    l2_loss: float
    relative_error: float
    relative_error_sem: float
    trials: int
    seed: int

    @classmethod
    def from_estimates(cls, estimates: Sequence[float], truth: float, n: int, seed: int = 0) -> "ErrorReport":
        rel = np.array([relative_error(e, truth, n) for e in estimates])
        sem = float(rel.std(ddof=1) / math.sqrt(len(rel))) if len(rel) > 1 else 0.0
        return cls(l2_loss(estimates, truth), float(rel.mean()), sem, len(rel), seed)


def l2_loss_bound(
    variant: Variant,
    mu: float,
    eps1: float,
    eps2: float,
    n: int,
    d_max: int,
    four_cycles: int,
    two_stars: int,
    three_stars: int,
) -> float:
    """Closed-form upper bound on the expected squared error of a plain two-round run.

    ``mu`` is the per-variant ARR keep probability, not mu*. The first term
    covers the randomized edges and the second the Laplace noise of round 2.
    """
    if mu <= 0 or eps1 <= 0:
        raise ValueError("mu and eps1 must be positive")
    gap = (1.0 - math.exp(-eps1)) ** 2
    p = variant.power
    c4, s2, s3 = float(four_cycles), float(two_stars), float(three_stars)
    if variant is Variant.FULL:
        sampling = (2 * c4 + s2) / (mu * gap)
    else:
        sampling = (mu ** (p - 1) * (2 * c4 + 6 * s3) + s2) / (mu ** p * gap)
    noise = 0.0 if math.isinf(eps2) else 2 * n * d_max ** 2 / (mu ** (2 * p) * gap * eps2 ** 2)
    return sampling + noise


def transfer_seconds(bits: float, rate: float = DEFAULT_LINK_RATE) -> float:
    if rate <= 0:
        raise ValueError("link rate must be positive")
    return bits / rate


@dataclass(frozen=True)
class CostReport:
    """Per-user communication costs in bits.

    ``analytic_*`` are worst-case bounds; ``sparse_*`` replace mu by
    mu e^-eps1, which is accurate when almost all bits are 0. ``measured_*``
    hold the max over users of the trial-averaged bits, when available.
    """

    analytic_dl_bound: float
    analytic_ul_bound: float
    sparse_dl_approx: float
    sparse_ul_approx: float
    measured_dl_max: float | None = None
    measured_ul_max: float | None = None

    def transfer_seconds(self, bits: float, rate: float = DEFAULT_LINK_RATE) -> float:
        return transfer_seconds(bits, rate)


def analytic_costs(variant: Variant, n: int, mu_star: float, eps1: float) -> CostReport:
    """Download <= mu* n^2 log n and upload <= mu n log n + 64, with log n = ceil(log2 n)."""
    bits = bits_per_index(n)
    mu = variant.mu_from_star(mu_star)
    shrink = math.exp(-eps1)
    return CostReport(
        analytic_dl_bound=mu_star * n * n * bits,
        analytic_ul_bound=mu * n * bits + 64,
        sparse_dl_approx=mu_star * shrink ** variant.power * n * n * bits,
        sparse_ul_approx=mu * shrink * n * bits + 64,
    )


def measured_costs(dl_bits: np.ndarray, ul_bits: np.ndarray) -> tuple[float, float]:
    """Max over users of per-user bits averaged over trials.

    Args:
      dl_bits, ul_bits: arrays of shape (trials, n).
    """
    dl = np.asarray(dl_bits, dtype=float).mean(axis=0)
    ul = np.asarray(ul_bits, dtype=float).mean(axis=0)
    return float(dl.max()), float(ul.max())
