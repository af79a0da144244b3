"""Two-round triangle counting with ARR, per-variant messages and optional clipping.

Round 1: every user i reports, via ARR, the indices j < i of its noisy bits.
The server collects them into E' and sends user i a message M_i of noisy
edges. Round 2: user i counts noisy triangles it closes with M_i, debiases,
adds Laplace noise and uploads one real number. The server rescales the sum.

The simulator is vectorized across users. Each (seed, round) pair owns one
random stream and draws are laid out by user index, so a run is a pure
function of the seed. Per-user reference functions are exposed alongside and
follow the same formulas; tests cross-check the two.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph, gather_rows
from .mechanisms import (
    ROUND1,
    ROUND2,
    ArrParams,
    ClipParams,
    Variant,
    bits_per_index,
    clipping_threshold,
    clipping_thresholds,
    edge_clip,
    stream,
)
from .metrics import CostReport, analytic_costs

UPLOAD_REAL_BITS = 64


class DegenerateBudgetError(ValueError):
    """The estimator's normalizing constant is zero (e.g. epsilon1 = 0)."""


class Clipping(enum.Enum):
    NONE = "none"      # Laplace scale d_max / eps2 with d_max public
    EDGE = "edge"      # edge clipping only, Laplace scale d~ / eps2
    DOUBLE = "double"  # edge clipping plus per-edge triangle clipping at kappa

    @classmethod
    def parse(cls, text: str) -> "Clipping":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown clipping mode {text!r}; expected none, edge or double") from None


@dataclass(frozen=True)
class ProtocolConfig:
    """Parameters of one two-round run.

    ``mu_star`` is the variant-normalized sampling level; the ARR probability is
    its 1st, 2nd or 3rd root. ``d_max`` is only read in plain mode and defaults
    to the graph's maximum degree.
    """

    variant: Variant
    eps1: float
    eps2: float
    mu_star: float
    clipping: Clipping = Clipping.NONE
    eps0: float = 0.0
    alpha: float = 150.0
    beta: float = 1e-6
    d_max: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.eps1 < 0 or not self.eps2 > 0:
            raise ValueError("need eps1 >= 0 and eps2 > 0")
        if not (0.0 <= self.mu_star <= 1.0):
            raise ValueError("mu* must lie in [0, 1]")
        self.arr  # validates mu <= p1
        if self.clipping is not Clipping.NONE:
            self.clip

    @classmethod
    def default(
        cls,
        variant: Variant,
        epsilon: float,
        mu_star: float,
        clipping: Clipping = Clipping.DOUBLE,
        **kwargs,
    ) -> "ProtocolConfig":
        """Splits a total budget: eps/10 to degrees and 9eps/20 per round when clipping, else eps/2 each."""
        if clipping is Clipping.NONE:
            return cls(variant, epsilon / 2, epsilon / 2, mu_star, clipping, **kwargs)
        return cls(variant, 9 * epsilon / 20, 9 * epsilon / 20, mu_star, clipping, eps0=epsilon / 10, **kwargs)

    @property
    def mu(self) -> float:
        return self.variant.mu_from_star(self.mu_star)

    @property
    def rho(self) -> float:
        return math.exp(-self.eps1)

    @property
    def arr(self) -> ArrParams:
        return ArrParams(self.eps1, min(self.mu, 1.0))

    @property
    def clip(self) -> ClipParams:
        return ClipParams(self.eps0, self.alpha, self.beta)

    @property
    def total_epsilon(self) -> float:
        extra = self.eps0 if self.clipping is not Clipping.NONE else 0.0
        return extra + self.eps1 + self.eps2

    def with_seed(self, seed: int) -> "ProtocolConfig":
        return replace(self, seed=seed)

    def describe(self) -> dict:
        return {
            "variant": self.variant.value,
            "clipping": self.clipping.value,
            "eps0": self.eps0,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "mu_star": self.mu_star,
            "mu": self.mu,
            "alpha": self.alpha,
            "beta": self.beta,
            "d_max": self.d_max,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class NoisyEdgeSet:
    """Server-side set E' of noisy edges (j, k), j < k.

    Stored by the reporting user: row k lists the j < k with r_{k,j} = 1.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "NoisyEdgeSet":
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(arr) and np.any(arr[:, 0] >= arr[:, 1]):
            raise ValueError("pairs must satisfy j < k")
        keys = np.unique(arr[:, 1] * n + arr[:, 0]) if len(arr) else np.zeros(0, dtype=np.int64)
        rows, cols = keys // max(n, 1), keys % max(n, 1)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        return cls(n, indptr, cols)

    def __len__(self) -> int:
        return len(self.indices)

    def row(self, k: int) -> np.ndarray:
        """The j < k with (j, k) in E', ascending."""
        return self.indices[self.indptr[k]:self.indptr[k + 1]]

    @property
    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def keys(self) -> np.ndarray:
        """Sorted keys k*n + j, one per pair."""
        cached = self.__dict__.get("_keys")
        if cached is None:
            rows = np.repeat(np.arange(self.n, dtype=np.int64), self.row_sizes)
            cached = rows * self.n + self.indices
            object.__setattr__(self, "_keys", cached)
        return cached

    def contains_many(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Vectorized membership of pairs (lo, hi) with lo < hi."""
        q = np.asarray(hi, dtype=np.int64) * self.n + np.asarray(lo, dtype=np.int64)
        keys = self.keys
        if len(keys) == 0:
            return np.zeros(q.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(keys, q), len(keys) - 1)
        return keys[pos] == q

    def __contains__(self, pair) -> bool:
        j, k = sorted(map(int, pair))
        return bool(self.contains_many(np.array([j]), np.array([k]))[0])

    def pairs(self) -> np.ndarray:
        """All pairs as an (m, 2) array sorted by (j, k)."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.row_sizes)
        out = np.column_stack([self.indices, rows])
        return out[np.lexsort((out[:, 1], out[:, 0]))]

    def to_graph(self) -> Graph:
        return Graph.from_edges(self.n, self.pairs())


# ------------------------------------------------------------------ round 1

def _distinct_ranks(rng: np.random.Generator, k: np.ndarray, pop: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each user u draws a uniform k[u]-subset of range(pop[u]).

    Returns (owner, rank) sorted by owner then rank. Sparse users redraw
    duplicates until they hold k[u] distinct values; users with
    k[u] > pop[u]/2 sample the excluded set instead.
    """
    users = np.arange(len(k), dtype=np.int64)
    base = int(pop.max()) + 1 if len(pop) else 1
    dense = k * 2 > pop
    sparse_k = np.where(dense, pop - k, k)
    acc = np.zeros(0, dtype=np.int64)
    while True:
        have = np.bincount(acc // base, minlength=len(k)) if len(acc) else np.zeros(len(k), dtype=np.int64)
        deficit = sparse_k - have
        if not np.any(deficit > 0):
            break
        own = np.repeat(users, np.maximum(deficit, 0))
        cand = (rng.random(len(own)) * pop[own]).astype(np.int64)
        cand = np.minimum(cand, pop[own] - 1)
        acc = np.union1d(acc, own * base + cand)
    if np.any(dense & (k > 0)):
        du = users[dense & (k > 0)]
        full_own = np.repeat(du, pop[du])
        starts = np.cumsum(pop[du]) - pop[du]
        full_rank = np.arange(len(full_own), dtype=np.int64) - np.repeat(starts, pop[du])
        full = full_own * base + full_rank
        excluded = acc[dense[acc // base]]
        kept_dense = np.setdiff1d(full, excluded, assume_unique=True)
        acc = np.union1d(acc[~dense[acc // base]], kept_dense)
    return acc // base, acc % base


def sample_noisy_edges(graph: Graph, params: ArrParams, rng: np.random.Generator) -> NoisyEdgeSet:
    """Applies ARR to every lower-triangular bit of the adjacency matrix."""
    n = graph.n
    lindptr, lidx = graph.lower
    lens = np.diff(lindptr)
    rows = np.repeat(np.arange(n, dtype=np.int64), lens)
    kept = rng.random(len(lidx)) < params.mu
    zeros = np.arange(n, dtype=np.int64) - lens
    k = rng.binomial(zeros, params.mu * params.rho) if n else np.zeros(0, dtype=np.int64)
    owner, ranks = _distinct_ranks(rng, k.astype(np.int64), zeros)
    # rank r of user i maps to the r-th index below i that is not a neighbor
    shifted = lidx - (np.arange(len(lidx), dtype=np.int64) - lindptr[rows])
    width = n + 1
    pos = np.searchsorted(rows * width + shifted, owner * width + ranks, side="right")
    fake = ranks + pos - lindptr[owner]
    all_rows = np.concatenate([rows[kept], owner])
    all_cols = np.concatenate([lidx[kept], fake])
    order = np.lexsort((all_cols, all_rows))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(all_rows, minlength=n), out=indptr[1:])
    return NoisyEdgeSet(n, indptr, all_cols[order])


def round1(graph: Graph, config: ProtocolConfig) -> tuple[NoisyEdgeSet, np.ndarray]:
    """Round 1 for all users. Returns E' and per-user upload bits of the index lists."""
    noisy = sample_noisy_edges(graph, config.arr, stream(config.seed, ROUND1))
    return noisy, noisy.row_sizes * bits_per_index(graph.n)


def expected_noisy_edges(graph: Graph, config: ProtocolConfig) -> float:
    m, n = graph.num_edges, graph.n
    return config.mu * m + config.mu * config.rho * (n * (n - 1) / 2 - m)


# ------------------------------------------------------------------ messages

def build_message(variant: Variant, noisy: NoisyEdgeSet, i: int) -> np.ndarray:
    """M_i as an (m, 2) array of pairs (j, k), j < k < i, sorted.

    Full keeps every noisy pair below i; OneNS keeps those with (k, i) in E';
    TwoNS additionally needs (j, i) in E'.
    """
    if variant is Variant.FULL:
        ks = np.arange(i, dtype=np.int64)
    else:
        ks = noisy.row(i)
    js, owner = gather_rows(noisy.indptr, noisy.indices, ks)
    kk = ks[owner]
    if variant is Variant.TWO_NS:
        ok = np.isin(js, noisy.row(i))
        js, kk = js[ok], kk[ok]
    out = np.column_stack([js, kk])
    return out[np.lexsort((kk, js))]


def message_sizes(variant: Variant, noisy: NoisyEdgeSet) -> np.ndarray:
    """|M_i| for every user without materializing the messages."""
    n = noisy.n
    sizes = noisy.row_sizes
    if variant is Variant.FULL:
        return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64) if n else sizes
    if variant is Variant.ONE_NS:
        return np.bincount(
            np.repeat(np.arange(n), sizes), weights=sizes[noisy.indices], minlength=n
        ).astype(np.int64)
    # TwoNS: noisy triangles of E' whose largest node is i
    mat = sp.csr_matrix((np.ones(len(noisy.indices), dtype=np.int64), noisy.indices, noisy.indptr), shape=(n, n))
    out = np.zeros(n, dtype=np.int64)
    step = max(1, 2_000_000 // max(1, n))
    for start in range(0, n, step):
        block = mat[start:start + step]
        if block.nnz:
            out[start:start + step] = np.asarray((block @ mat).multiply(block).sum(axis=1)).ravel()
    return out


# ------------------------------------------------------------------ round 2, per user

def triangle_counts_from_message(lower_neighbors: np.ndarray, message: np.ndarray) -> np.ndarray:
    """t_{i,j} for each j in ``lower_neighbors``: #k with a_ik = 1 and (j, k) in M_i."""
    nb = np.asarray(lower_neighbors, dtype=np.int64)
    msg = np.asarray(message, dtype=np.int64).reshape(-1, 2)
    if len(nb) == 0 or len(msg) == 0:
        return np.zeros(len(nb), dtype=np.int64)
    hit = np.isin(msg[:, 0], nb) & np.isin(msg[:, 1], nb)
    return np.bincount(np.searchsorted(nb, msg[hit, 0]), minlength=len(nb)).astype(np.int64)


def _lower(neighbors: np.ndarray, i: int) -> np.ndarray:
    nb = np.asarray(neighbors, dtype=np.int64)
    return np.sort(nb[nb < i])


def round2_user_plain(
    neighbors: np.ndarray,
    i: int,
    message: np.ndarray,
    d_max: int,
    config: ProtocolConfig,
    rng: np.random.Generator,
    *,
    add_noise: bool = True,
) -> float:
    """w_i = t_i - mu* rho s_i, plus Lap(d_max / eps2) when ``add_noise``."""
    nb = _lower(neighbors, i)
    t = int(triangle_counts_from_message(nb, message).sum())
    s = len(nb) * (len(nb) - 1) // 2
    w = t - config.mu_star * config.rho * s
    if add_noise:
        w += float(rng.laplace(0.0, 1.0)) * _scale(d_max, config.eps2)
    return w


def round2_user_doubleclip(
    neighbors: np.ndarray,
    i: int,
    message: np.ndarray,
    config: ProtocolConfig,
    rng: np.random.Generator,
    *,
    degree_noise: float | None = None,
    priority: np.ndarray | None = None,
    kappa: float | None = None,
    add_noise: bool = True,
) -> tuple[float, float, float]:
    """Edge clipping, then per-edge triangle clipping at kappa.

    Returns (w_i, d~_i, kappa_i). ``degree_noise``, ``priority`` and ``kappa``
    override the random degree noise, the projection choice and the threshold
    search; tests use them to reach rare branches.
    """
    nb, d_tilde = edge_clip(_lower(neighbors, i), config.clip, rng, noise=degree_noise, priority=priority)
    if kappa is None:
        kappa = clipping_threshold(config.variant, config.mu, d_tilde, config.beta)
    t_ij = triangle_counts_from_message(nb, message)
    t = float(np.minimum(t_ij, kappa).sum())
    s = len(nb) * (len(nb) - 1) // 2
    w = t - config.mu_star * config.rho * s
    if add_noise:
        w += float(rng.laplace(0.0, 1.0)) * _scale(kappa, config.eps2)
    return w, d_tilde, kappa


def _scale(sensitivity, eps2: float):
    if math.isinf(eps2):
        return np.zeros_like(np.asarray(sensitivity, dtype=float)) if np.ndim(sensitivity) else 0.0
    return np.asarray(sensitivity, dtype=float) / eps2 if np.ndim(sensitivity) else sensitivity / eps2


# ------------------------------------------------------------------ reports

@dataclass(frozen=True)
class UserReport:
    i: int
    r: np.ndarray
    w_hat: float
    ul_bits: int
    dl_bits: int | None
    message_size: int | None
    d_tilde: float | None = None
    kappa: float | None = None


@dataclass(frozen=True, eq=False)
class UserReports:
    """Column-oriented per-user reports; indexing yields :class:`UserReport`."""

    noisy: NoisyEdgeSet
    w_hat: np.ndarray
    w: np.ndarray
    t: np.ndarray
    s: np.ndarray
    message_size: np.ndarray | None
    ul_bits: np.ndarray
    dl_bits: np.ndarray | None
    d_tilde: np.ndarray | None = None
    kappa: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.w_hat)

    def __getitem__(self, i: int) -> UserReport:
        return UserReport(
            i=i,
            r=self.noisy.row(i),
            w_hat=float(self.w_hat[i]),
            ul_bits=int(self.ul_bits[i]),
            dl_bits=None if self.dl_bits is None else int(self.dl_bits[i]),
            message_size=None if self.message_size is None else int(self.message_size[i]),
            d_tilde=None if self.d_tilde is None else float(self.d_tilde[i]),
            kappa=None if self.kappa is None else float(self.kappa[i]),
        )

    def __iter__(self) -> Iterator[UserReport]:
        return (self[i] for i in range(len(self)))


def _wedges(indptr: np.ndarray, indices: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Entry positions (p, q), p < q, of every pair inside each row of ``rows``."""
    starts, stops = indptr[rows], indptr[rows + 1]
    lens = stops - starts
    offsets = np.cumsum(lens) - lens
    entries = np.arange(int(lens.sum()), dtype=np.int64) + np.repeat(starts - offsets, lens)
    owner_len = np.repeat(lens, lens)
    owner_start = np.repeat(starts, lens)
    partners = owner_len - 1 - (entries - owner_start)
    p = np.repeat(entries, partners)
    first = np.cumsum(partners) - partners
    q = p + 1 + (np.arange(len(p), dtype=np.int64) - np.repeat(first, partners))
    return p.astype(np.int64), q.astype(np.int64)


def _row_chunks(lens: np.ndarray, budget: int = 8_000_000) -> Iterator[np.ndarray]:
    pairs = lens * (lens - 1) // 2
    start, acc = 0, 0
    for i, c in enumerate(pairs.tolist()):
        if acc and acc + c > budget:
            yield np.arange(start, i)
            start, acc = i, 0
        acc += c
    if start < len(lens):
        yield np.arange(start, len(lens))


def noisy_triangle_counts(variant: Variant, noisy: NoisyEdgeSet, indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """t_{i,j} for every entry of a lower-triangular CSR (row i, entry j < i).

    A wedge j < k < i of user i closes a noisy triangle if (j, k) is in E';
    OneNS also needs (k, i) and TwoNS also needs (j, i).
    """
    n = len(indptr) - 1
    out = np.zeros(len(indices), dtype=np.int64)
    rows_of = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    for rows in _row_chunks(np.diff(indptr)):
        p, q = _wedges(indptr, indices, rows)
        if len(p) == 0:
            continue
        i = rows_of[p]
        j, k = indices[p], indices[q]
        hit = noisy.contains_many(j, k)
        if variant is not Variant.FULL:
            hit &= noisy.contains_many(k, i)
        if variant is Variant.TWO_NS:
            hit &= noisy.contains_many(j, i)
        out += np.bincount(p[hit], minlength=len(indices))
    return out


def _project(rng, indptr, indices, d_tilde) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly trims rows longer than floor(d~)."""
    lens = np.diff(indptr)
    over = np.nonzero(lens > d_tilde)[0]
    if len(over) == 0:
        return indptr, indices
    keep = np.ones(len(indices), dtype=bool)
    for i in over.tolist():
        a, b = indptr[i], indptr[i + 1]
        m = int(math.floor(d_tilde[i]))
        mask = np.zeros(b - a, dtype=bool)
        mask[rng.choice(b - a, size=m, replace=False)] = True
        keep[a:b] = mask
    rows = np.repeat(np.arange(len(lens), dtype=np.int64), lens)
    new_ptr = np.zeros_like(indptr)
    np.cumsum(np.bincount(rows[keep], minlength=len(lens)), out=new_ptr[1:])
    return new_ptr, indices[keep]


def round2(
    graph: Graph,
    noisy: NoisyEdgeSet,
    config: ProtocolConfig,
    ul_round1: np.ndarray | None = None,
    meter_download: bool = True,
) -> UserReports:
    """Round 2 for all users (vectorized).

    ``meter_download=False`` skips computing |M_i|, which for TwoNS costs a
    sparse matrix product; message sizes and download bits are then None.
    """
    n = graph.n
    rng = stream(config.seed, ROUND2)
    indptr, indices = graph.lower
    d_tilde = kappa = None
    if config.clipping is not Clipping.NONE:
        noise = rng.laplace(0.0, 1.0 / config.eps0, size=n)
        d_tilde = np.maximum(np.diff(indptr) + noise + config.alpha, 0.0)
        indptr, indices = _project(rng, indptr, indices, d_tilde)
    t_ij = noisy_triangle_counts(config.variant, noisy, indptr, indices)
    lens = np.diff(indptr)
    rows = np.repeat(np.arange(n, dtype=np.int64), lens)
    if config.clipping is Clipping.DOUBLE:
        kappa = clipping_thresholds(config.variant, config.mu, d_tilde, config.beta)
        t = np.bincount(rows, weights=np.minimum(t_ij, kappa[rows]), minlength=n)
        sens = kappa
    else:
        t = np.bincount(rows, weights=t_ij, minlength=n)
        sens = d_tilde if config.clipping is Clipping.EDGE else np.full(n, float(config.d_max if config.d_max is not None else graph.max_degree))
    s = (lens * (lens - 1) // 2).astype(float)
    w = t - config.mu_star * config.rho * s
    w_hat = w + rng.laplace(0.0, 1.0, size=n) * _scale(sens, config.eps2)
    bits = bits_per_index(n)
    sizes = message_sizes(config.variant, noisy) if meter_download else None
    if ul_round1 is None:
        ul_round1 = noisy.row_sizes * bits
    return UserReports(
        noisy=noisy,
        w_hat=w_hat,
        w=w,
        t=t,
        s=s,
        message_size=sizes,
        ul_bits=ul_round1 + UPLOAD_REAL_BITS,
        dl_bits=None if sizes is None else sizes * 2 * bits,
        d_tilde=d_tilde,
        kappa=kappa,
    )


# ------------------------------------------------------------------ aggregation

@dataclass(frozen=True, eq=False)
class EstimateResult:
    estimate: float
    config: ProtocolConfig
    reports: UserReports | None
    cost_dl_bits: int | None
    cost_ul_bits: int
    bounds: CostReport
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_transcript(self) -> dict:
        users = []
        if self.reports is not None:
            rep = self.reports
            for i in range(len(rep)):
                users.append({
                    "i": i,
                    "r_size": int(rep.noisy.row_sizes[i]),
                    "m_size": None if rep.message_size is None else int(rep.message_size[i]),
                    "w_hat": float(rep.w_hat[i]),
                    "d_tilde": None if rep.d_tilde is None else float(rep.d_tilde[i]),
                    "kappa": None if rep.kappa is None else float(rep.kappa[i]),
                })
        return {
            "config": self.config.describe(),
            "estimate": self.estimate,
            "cost_dl_bits": self.cost_dl_bits,
            "cost_ul_bits": self.cost_ul_bits,
            "analytic_dl_bound_bits": self.bounds.analytic_dl_bound,
            "analytic_ul_bound_bits": self.bounds.analytic_ul_bound,
            "users": users,
        }


def aggregate(reports: UserReports | Sequence[UserReport], config: ProtocolConfig, n: int | None = None) -> EstimateResult:
    """f^ = sum_i w^_i / (mu* (1 - rho)); costs are the per-user maxima."""
    norm = config.mu_star * (1.0 - config.rho)
    if norm == 0.0:
        raise DegenerateBudgetError("mu* (1 - e^-eps1) is zero; need eps1 > 0 and mu* > 0")
    if isinstance(reports, UserReports):
        w_hat, dl, ul = reports.w_hat, reports.dl_bits, reports.ul_bits
        n = len(reports) if n is None else n
    else:
        w_hat = np.array([r.w_hat for r in reports], dtype=float)
        dl = None if any(r.dl_bits is None for r in reports) else np.array([r.dl_bits for r in reports], dtype=np.int64)
        ul = np.array([r.ul_bits for r in reports], dtype=np.int64)
        n = len(reports) if n is None else n
    estimate = math.fsum(w_hat.tolist()) / norm
    return EstimateResult(
        estimate=estimate,
        config=config,
        reports=reports if isinstance(reports, UserReports) else None,
        cost_dl_bits=None if dl is None else (int(dl.max()) if len(dl) else 0),
        cost_ul_bits=int(ul.max()) if len(ul) else 0,
        bounds=analytic_costs(config.variant, max(n, 1), config.mu_star, config.eps1),
    )


def run_protocol(graph: Graph, config: ProtocolConfig, meter_download: bool = True) -> EstimateResult:
    """Both rounds and aggregation; deterministic in ``config.seed``."""
    start = time.perf_counter()
    noisy, ul1 = round1(graph, config)
    reports = round2(graph, noisy, config, ul1, meter_download)
    result = aggregate(reports, config, graph.n)
    return replace(result, wall_time_s=time.perf_counter() - start)
