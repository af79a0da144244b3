"""Local randomizers and clipping primitives.

Covers asymmetric randomized response (ARR), Laplace noise, edge clipping by a
noisy degree, the Bernoulli KL divergence, Chernoff-style bounds on how often a
per-edge noisy triangle count exceeds a threshold, and the threshold search.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

# round tags for deriving independent random streams
ROUND1 = 1
ROUND2 = 2
ONE_ROUND = 3
STARS = 4


def stream(seed: int, *tags: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``(seed, *tags)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, tags)])))


def trial_seed(master_seed: int, trial: int) -> int:
    """Deterministic per-trial seed derived by hashing (master seed, trial index)."""
    return int(np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1, np.uint64)[0])


def bits_per_index(n: int) -> int:
    """Bits to encode one node index: ceil(log2 n), at least 1."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def warner_keep_prob(epsilon: float) -> float:
    """p1 = e^eps / (e^eps + 1), the probability Warner RR reports the true bit."""
    if math.isinf(epsilon):
        return 1.0
    return 1.0 / (1.0 + math.exp(-epsilon))


class Variant(enum.Enum):
    """Message-selection rule; ``power`` k gives the normalized level mu* = mu^k."""

    FULL = "full"
    ONE_NS = "onens"
    TWO_NS = "twons"

    @property
    def power(self) -> int:
        return {Variant.FULL: 1, Variant.ONE_NS: 2, Variant.TWO_NS: 3}[self]

    def mu_star(self, mu: float) -> float:
        return mu ** self.power

    def mu_from_star(self, mu_star: float) -> float:
        """Exact k-th root, polished with one Newton step."""
        if mu_star < 0:
            raise ValueError("mu* must be nonnegative")
        k = self.power
        if k == 1 or mu_star in (0.0, 1.0):
            return float(mu_star)
        if k == 2:
            return math.sqrt(mu_star)
        x = mu_star ** (1.0 / 3.0)
        return x - (x ** 3 - mu_star) / (3 * x * x)

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.strip().lower().replace("-", "").replace("_", "")
        for v in cls:
            if v.value == key:
                return v
        raise ValueError(f"unknown variant {text!r}; expected full, onens or twons")


@dataclass(frozen=True)
class ArrParams:
    """ARR with budget ``epsilon``: Pr[1|1] = mu, Pr[1|0] = mu * e^-epsilon."""

    epsilon: float
    mu: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not (0.0 <= self.mu <= self.p1 * (1 + 1e-12)):
            raise ValueError(f"mu={self.mu} must lie in [0, {self.p1}] for epsilon={self.epsilon}")

    @property
    def rho(self) -> float:
        return math.exp(-self.epsilon)

    @property
    def p1(self) -> float:
        return warner_keep_prob(self.epsilon)

    @property
    def p2(self) -> float:
        """Edge-sampling probability so that mu = p1 * p2."""
        return self.mu / self.p1

    @classmethod
    def from_sampling(cls, epsilon: float, p2: float) -> "ArrParams":
        if not (0.0 <= p2 <= 1.0):
            raise ValueError("p2 must lie in [0, 1]")
        return cls(epsilon, warner_keep_prob(epsilon) * p2)


@dataclass(frozen=True)
class ClipParams:
    """Edge-clipping margin ``alpha``, excess cap ``beta`` and degree budget ``epsilon0``."""

    epsilon0: float
    alpha: float = 150.0
    beta: float = 1e-6

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if not self.epsilon0 > 0:
            raise ValueError("epsilon0 must be positive")


def arr_bit(bit: int, params: ArrParams, rng: np.random.Generator) -> int:
    p = params.mu if bit else params.mu * params.rho
    return int(rng.random() < p)


def arr_bits(bits: np.ndarray, params: ArrParams, rng: np.random.Generator) -> np.ndarray:
    """Vectorized ARR over an array of 0/1 inputs."""
    bits = np.asarray(bits)
    p = np.where(bits.astype(bool), params.mu, params.mu * params.rho)
    return (rng.random(bits.shape) < p).astype(np.int8)


def arr_lower_list(neighbors: np.ndarray, i: int, params: ArrParams, rng: np.random.Generator) -> np.ndarray:
    """Indices j < i whose ARR output bit is 1, ascending.

    True neighbors survive independently with probability mu. The number of
    reported non-neighbors is Binomial(#non-neighbors, mu*rho), placed on a
    uniform subset, which has the same law as flipping every bit separately.
    """
    nb = np.asarray(neighbors, dtype=np.int64)
    nb = nb[nb < i]
    kept = nb[rng.random(len(nb)) < params.mu]
    zeros = i - len(nb)
    k = int(rng.binomial(zeros, params.mu * params.rho)) if zeros > 0 else 0
    if k == 0:
        return kept
    ranks = np.sort(rng.choice(zeros, size=k, replace=False))
    fake = ranks_to_non_neighbors(ranks, nb)
    return np.union1d(kept, fake)


def ranks_to_non_neighbors(ranks: np.ndarray, sorted_neighbors: np.ndarray) -> np.ndarray:
    """Maps rank r to the r-th integer (0-based) not in ``sorted_neighbors``."""
    shifted = sorted_neighbors - np.arange(len(sorted_neighbors))
    return ranks + np.searchsorted(shifted, ranks, side="right")


def laplace(scale: float, rng: np.random.Generator) -> float:
    if scale < 0:
        raise ValueError("Laplace scale must be nonnegative")
    if scale == 0:
        return 0.0
    return float(rng.laplace(0.0, scale))


def noisy_degree(degree: int | np.ndarray, noise: float | np.ndarray, alpha: float):
    """d~ = max(d + noise + alpha, 0)."""
    return np.maximum(np.asarray(degree, dtype=float) + noise + alpha, 0.0)


def edge_clip(
    neighbors: np.ndarray,
    clip: ClipParams,
    rng: np.random.Generator,
    *,
    noise: float | None = None,
    priority: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Projects a neighbor list so its size never exceeds a noisy degree.

    Args:
      neighbors: ascending neighbor list.
      clip: clipping parameters.
      rng: random stream; draws the Laplace noise and the removal choice.
      noise: if given, used in place of the Lap(1/epsilon0) draw.
      priority: optional ranking of node IDs; when projection keeps ``k``
        neighbors it keeps the ``k`` with lowest ``priority`` instead of a
        uniform subset. Lets callers couple projections of two inputs.

    Returns:
      (clipped ascending list, d~).
    """
    nb = np.asarray(neighbors, dtype=np.int64)
    if noise is None:
        noise = float(rng.laplace(0.0, 1.0 / clip.epsilon0))
    d_tilde = float(noisy_degree(len(nb), noise, clip.alpha))
    if len(nb) <= d_tilde:
        return nb, d_tilde
    keep = int(math.floor(d_tilde))
    if priority is not None:
        chosen = nb[np.argsort(np.asarray(priority)[nb], kind="stable")[:keep]]
    else:
        chosen = rng.choice(nb, size=keep, replace=False)
    return np.sort(chosen), d_tilde


def kl_bernoulli(p1: float, p2: float) -> float:
    """KL divergence D(Ber(p1) || Ber(p2)) with 0 log 0 = 0."""
    if not (0.0 <= p1 <= 1.0):
        raise ValueError("p1 must lie in [0, 1]")
    if not (0.0 < p2 < 1.0):
        raise ValueError("p2 must lie strictly inside (0, 1)")
    out = 0.0
    if p1 > 0:
        out += p1 * (math.log(p1) - math.log(p2))
    if p1 < 1:
        out += (1 - p1) * (math.log1p(-p1) - math.log1p(-p2))
    return out


def _kl_array(x: np.ndarray, p: float) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(x > 0, x * (np.log(np.where(x > 0, x, 1.0)) - math.log(p)), 0.0)
        b = np.where(x < 1, (1 - x) * (np.log1p(-np.where(x < 1, x, 0.0)) - math.log1p(-p)), 0.0)
    return a + b


def _bound_array(variant: Variant, kappa: np.ndarray, d_tilde: np.ndarray, mu: float) -> np.ndarray:
    ratio = np.minimum(kappa / d_tilde, 1.0)
    if variant is Variant.FULL:
        out = np.exp(-d_tilde * _kl_array(ratio, mu))
    elif variant is Variant.ONE_NS:
        out = np.exp(-d_tilde * _kl_array(ratio, mu * mu))
    else:
        out = mu * np.exp(-d_tilde * _kl_array(np.maximum(ratio, mu * mu), mu * mu))
    return np.clip(out, 0.0, 1.0)


def excess_prob_bound(variant: Variant, kappa: float, d_tilde: float, mu: float) -> float:
    """Upper bound on Pr(t_ij > kappa) given noisy degree d~.

    Full:  exp(-d~ D(kappa/d~ || mu))
    OneNS: exp(-d~ D(kappa/d~ || mu^2))
    TwoNS: mu exp(-d~ D(max(kappa, mu^2 d~)/d~ || mu^2))
    """
    if not d_tilde > 0:
        raise ValueError("d~ must be positive")
    if not (0.0 < mu < 1.0):
        raise ValueError("mu must lie strictly inside (0, 1)")
    floor = variant.mu_star(mu) * d_tilde
    if kappa < floor * (1 - 1e-12):
        raise ValueError(f"kappa={kappa} is below mu* d~={floor}")
    return float(_bound_array(variant, np.array([kappa], dtype=float), np.array([d_tilde], dtype=float), mu)[0])


def clipping_thresholds(variant: Variant, mu: float, d_tilde: np.ndarray, beta: float) -> np.ndarray:
    """Vectorized :func:`clipping_threshold`.

    The bound is nonincreasing in kappa above mu* d~, so bisection over the
    integer multiplier finds the same smallest lambda as a linear scan.
    """
    d = np.asarray(d_tilde, dtype=float)
    out = np.zeros_like(d)
    live = d > 0
    if not live.any():
        return out
    ms = variant.mu_star(mu)
    dl = d[live]
    if ms >= 1.0 or mu >= 1.0:
        out[live] = dl
        return out
    if ms <= 0.0:
        return out
    cap = math.ceil(1.0 / ms)

    def ok(lam: np.ndarray) -> np.ndarray:
        kappa = lam * ms * dl
        return (kappa >= dl) | (_bound_array(variant, kappa, dl, mu) <= beta)

    lo = np.ones(len(dl))
    hi = np.full(len(dl), float(cap))
    done = ok(lo)
    hi[done] = 1.0
    lo[~done] = 1.0
    # invariant for unfinished entries: ok(hi) true, ok(lo) false
    while True:
        active = hi - lo > 1
        if not active.any():
            break
        mid = np.floor((lo + hi) / 2)
        good = ok(mid)
        hi = np.where(active & good, mid, hi)
        lo = np.where(active & ~good, mid, lo)
    out[live] = np.minimum(hi * ms * dl, dl)
    return out


def clipping_threshold(variant: Variant, mu: float, d_tilde: float, beta: float) -> float:
    """Smallest kappa = lambda mu* d~ (integer lambda >= 1) whose excess bound is <= beta, capped at d~."""
    return float(clipping_thresholds(variant, mu, np.array([d_tilde], dtype=float), beta)[0])
