"""Undirected simple graphs, edge-list I/O, generators and exact subgraph counters.

Graphs are stored in compressed sparse row form: ``indices[indptr[i]:indptr[i+1]]``
is the ascending neighbor list of node ``i``. Node IDs are dense and 0-based.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Iterable

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised for malformed edge-list input."""


_HEADER = re.compile(r"^#\s*n\s*=\s*(\d+)\s*$")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph in CSR form."""

    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges: Iterable | np.ndarray) -> "Graph":
        """Builds a graph from (u, v) pairs; symmetrizes, dedups and drops loops."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError(f"node index out of range for n={n}")
        arr = arr[arr[:, 0] != arr[:, 1]]
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        keys = np.unique(lo * max(n, 1) + hi)
        lo, hi = keys // max(n, 1), keys % max(n, 1)
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(indptr, dst.astype(np.int64))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        iu = np.triu_indices(n, 1)
        return cls.from_edges(n, np.column_stack(iu))

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def lower_neighbors(self, i: int) -> np.ndarray:
        """Neighbors j < i (a prefix of the sorted list)."""
        nb = self.neighbors(i)
        return nb[: np.searchsorted(nb, i)]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        pos = np.searchsorted(nb, v)
        return bool(pos < len(nb) and nb[pos] == v)

    @cached_property
    def lower(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR of the lower-triangular adjacency: row i holds neighbors j < i."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        keep = self.indices < rows
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows[keep], minlength=self.n), out=indptr[1:])
        return indptr, self.indices[keep]

    def edges(self) -> np.ndarray:
        """All edges as an (m, 2) array with u < v, sorted lexicographically."""
        indptr, idx = self.lower
        hi = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(indptr))
        out = np.column_stack([idx, hi])
        return out[np.lexsort((out[:, 1], out[:, 0]))]

    def to_scipy(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices), dtype=np.int64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def validate(self) -> None:
        """Checks sortedness, bounds, loops, duplicates and symmetry."""
        n = self.n
        if self.indptr[0] != 0 or np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must start at 0 and be nondecreasing")
        if self.indptr[-1] != len(self.indices):
            raise ValueError("indptr does not match indices length")
        if len(self.indices) == 0:
            return
        if self.indices.min() < 0 or self.indices.max() >= n:
            raise ValueError("neighbor index out of range")
        rows = np.repeat(np.arange(n, dtype=np.int64), self.degrees)
        if np.any(rows == self.indices):
            raise ValueError("self-loop present")
        same_row = rows[1:] == rows[:-1]
        if np.any(same_row & (self.indices[1:] <= self.indices[:-1])):
            raise ValueError("neighbor lists must be strictly ascending")
        fwd = np.sort(rows * n + self.indices)
        bwd = np.sort(self.indices * n + rows)
        if not np.array_equal(fwd, bwd):
            raise ValueError("adjacency is not symmetric")


def load_edge_list(stream: IO[str]) -> Graph:
    """Parses whitespace-separated ``u v`` lines.

    Lines starting with ``#`` are comments, except ``# n=<int>`` which fixes the
    node count. Without a header, n is one more than the largest ID seen.
    """
    declared: int | None = None
    us: list[int] = []
    vs: list[int] = []
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            m = _HEADER.match(text)
            if m:
                declared = int(m.group(1))
            continue
        parts = text.split()
        if len(parts) < 2:
            raise GraphFormatError(f"line {lineno}: expected two node IDs, got {text!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: node IDs must be integers, got {text!r}") from None
        if u < 0 or v < 0:
            raise GraphFormatError(f"line {lineno}: node IDs must be nonnegative")
        if declared is not None and max(u, v) >= declared:
            raise GraphFormatError(f"line {lineno}: node ID {max(u, v)} is out of bounds for n={declared}")
        us.append(u)
        vs.append(v)
    if declared is not None:
        n = declared
    else:
        n = max(max(us, default=-1), max(vs, default=-1)) + 1
    return Graph.from_edges(n, np.column_stack([np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64)]))


def read_edge_list(path: str) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh)


def write_edge_list(graph: Graph, stream: IO[str]) -> None:
    """Writes the header and each edge once, smaller ID first, sorted."""
    stream.write(f"# n={graph.n}\n")
    edges = graph.edges()
    if len(edges):
        stream.write("\n".join(f"{u} {v}" for u, v in edges.tolist()))
        stream.write("\n")


def generate_ba(n: int, m: int, seed: int) -> Graph:
    """Barabási–Albert graph grown from an m-node clique.

    Each new node picks m distinct existing nodes with probability proportional
    to degree. The first new node has exactly m candidates and links to all of
    them, which also covers m = 1 where the seed node has degree 0.
    """
    if not (1 <= m < n):
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    total = m * (m - 1) // 2 + (n - m) * m
    src = np.empty(total, dtype=np.int64)
    dst = np.empty(total, dtype=np.int64)
    # every edge endpoint appears once here, so uniform picks are degree-biased
    pool = np.empty(2 * total, dtype=np.int64)
    e = 0
    for u in range(m):
        for v in range(u + 1, m):
            src[e], dst[e] = u, v
            pool[2 * e], pool[2 * e + 1] = u, v
            e += 1
    size = 2 * e
    for v in range(m, n):
        if v == m:
            targets = np.arange(m, dtype=np.int64)
        else:
            chosen: dict[int, None] = {}
            while len(chosen) < m:
                for t in pool[rng.integers(0, size, size=2 * (m - len(chosen)))].tolist():
                    chosen.setdefault(t)
                    if len(chosen) == m:
                        break
            targets = np.fromiter(chosen, dtype=np.int64, count=m)
        src[e:e + m] = v
        dst[e:e + m] = targets
        pool[size:size + m] = targets
        pool[size + m:size + 2 * m] = v
        size += 2 * m
        e += m
    return Graph.from_edges(n, np.column_stack([src, dst]))


def sample_induced(graph: Graph, n_sub: int, seed: int) -> Graph:
    """Induced subgraph on a uniform n_sub-subset, relabeled in original order."""
    if n_sub > graph.n or n_sub < 0:
        raise ValueError(f"cannot sample {n_sub} nodes from a graph with {graph.n}")
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(graph.n, size=n_sub, replace=False))
    relabel = np.full(graph.n, -1, dtype=np.int64)
    relabel[keep] = np.arange(n_sub)
    edges = graph.edges()
    a, b = relabel[edges[:, 0]], relabel[edges[:, 1]]
    ok = (a >= 0) & (b >= 0)
    return Graph.from_edges(n_sub, np.column_stack([a[ok], b[ok]]))


def disjoint_union(graphs: Iterable[Graph]) -> Graph:
    parts, offset = [], 0
    for g in graphs:
        parts.append(g.edges() + offset)
        offset += g.n
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)
    return Graph.from_edges(offset, edges)


def gather_rows(indptr: np.ndarray, indices: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Concatenates CSR rows; also returns, per value, the position of its row in ``rows``."""
    rows = np.asarray(rows, dtype=np.int64)
    starts = indptr[rows]
    lens = indptr[rows + 1] - starts
    total = int(lens.sum())
    owner = np.repeat(np.arange(len(rows), dtype=np.int64), lens)
    offsets = np.cumsum(lens) - lens
    pos = np.arange(total, dtype=np.int64) - offsets[owner] + starts[owner]
    return indices[pos], owner


# ---------------------------------------------------------------- counters

def _degree_oriented(graph: Graph) -> tuple[sp.csr_matrix, np.ndarray]:
    """Orients every edge toward the endpoint of higher (degree, id) rank."""
    n = graph.n
    order = np.lexsort((np.arange(n), graph.degrees))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    edges = graph.edges()
    if len(edges) == 0:
        return sp.csr_matrix((n, n), dtype=np.int64), rank
    ru, rv = rank[edges[:, 0]], rank[edges[:, 1]]
    lo, hi = np.minimum(ru, rv), np.maximum(ru, rv)
    mat = sp.csr_matrix((np.ones(len(lo), dtype=np.int64), (lo, hi)), shape=(n, n))
    mat.sort_indices()
    return mat, rank


def count_triangles(graph: Graph) -> int:
    """Exact triangle count.

    For each oriented edge (u, w) the forward neighbor lists of u and w are
    intersected; with a degree-based orientation every triangle is seen once
    and forward lists stay short on skewed graphs.
    """
    if graph.n <= 256:
        a = np.zeros((graph.n, graph.n), dtype=np.int64)
        rows = np.repeat(np.arange(graph.n), graph.degrees)
        a[rows, graph.indices] = 1
        return int(((a @ a) * a).sum()) // 6
    fwd, _ = _degree_oriented(graph)
    total = 0
    step = max(1, 4_000_000 // max(1, graph.n))
    for start in range(0, graph.n, step):
        block = fwd[start:start + step]
        if block.nnz == 0:
            continue
        total += int((block @ fwd).multiply(block).sum())
    return total


def count_kstars(graph: Graph, k: int) -> int:
    """Number of k-stars: sum of C(d_i, k) over nodes."""
    if k < 1:
        raise ValueError("k must be at least 1")
    vals, counts = np.unique(graph.degrees, return_counts=True)
    return sum(math.comb(int(d), k) * int(c) for d, c in zip(vals, counts))


def count_4cycles(graph: Graph) -> int:
    """Exact number of simple 4-cycles.

    Each cycle is charged to its highest-ranked node v and the opposite node w:
    with c(w) paths v-u-w through lower-ranked u, v contributes C(c(w), 2).
    """
    n = graph.n
    if n == 0:
        return 0
    order = np.lexsort((np.arange(n), graph.degrees))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    total = 0
    for v in range(n):
        rv = rank[v]
        us = graph.neighbors(v)
        us = us[rank[us] < rv]
        if len(us) < 2:
            continue
        ws, _ = gather_rows(graph.indptr, graph.indices, us)
        ws = ws[rank[ws] < rv]
        if len(ws) < 2:
            continue
        c = np.unique(ws, return_counts=True)[1]
        total += int((c * (c - 1) // 2).sum())
    return total


@dataclass(frozen=True)
class ExactCounts:
    n: int
    edges: int
    triangles: int
    two_stars: int
    three_stars: int
    four_cycles: int | None
    max_degree: int
    mean_degree: float

    @property
    def clustering_coefficient(self) -> float | None:
        if self.two_stars == 0:
            return None
        return 3 * self.triangles / self.two_stars


def exact_counts(graph: Graph, with_four_cycles: bool = True) -> ExactCounts:
    return ExactCounts(
        n=graph.n,
        edges=graph.num_edges,
        triangles=count_triangles(graph),
        two_stars=count_kstars(graph, 2),
        three_stars=count_kstars(graph, 3),
        four_cycles=count_4cycles(graph) if with_four_cycles else None,
        max_degree=graph.max_degree,
        mean_degree=2 * graph.num_edges / graph.n if graph.n else 0.0,
    )
