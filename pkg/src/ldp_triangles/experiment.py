"""Seeded experiment runner: graph sources, repeated trials, CSV rows.

A run loads one graph, computes the exact statistics once and then executes
``trials`` independent protocol runs. Trial ``t`` draws all of its randomness
from ``trial_seed(seed, t)``, so rows do not depend on the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .clustering import estimate_clustering
from .graph import Graph, exact_counts, generate_ba, read_edge_list, sample_induced
from .mechanisms import ONE_ROUND, Variant, stream, trial_seed, warner_keep_prob
from .metrics import measured_costs, relative_error
from .one_round import METHODS as ONE_ROUND_METHODS
from .one_round import arr_sampling_rate, run_one_round
from .two_round import Clipping, ProtocolConfig, expected_noisy_edges, run_protocol

WORKERS_ENV = "LDP_TRIANGLES_WORKERS"
TWO_ROUND = ("full", "onens", "twons")
ALGORITHMS = TWO_ROUND + ONE_ROUND_METHODS + ("cluster",)
DEFAULT_EDGE_CAP = 2e8
DEFAULT_CELL_CAP = 200

COLUMNS = (
    "dataset", "algorithm", "quantity", "clipping", "epsilon", "mu_star", "seed", "trial",
    "estimate", "truth", "rel_err", "rel_err_sem", "rel_err_median", "l2",
    "dl_bits_max", "ul_bits_max", "runtime_ms",
)


class ExperimentError(ValueError):
    """Invalid experiment specification or a run refused by a guard."""


# ------------------------------------------------------------ graph sources

@dataclass(frozen=True)
class GraphSource:
    """Where the input graph comes from.

    Text forms: ``ba:n=2000,m=10[,seed=0]``, ``file:PATH`` (or a bare path),
    and ``sample:n=1000[,seed=0],from=<source>`` with ``from`` last.
    """

    kind: str
    path: str | None = None
    n: int | None = None
    m: int | None = None
    seed: int = 0
    parent: "GraphSource | None" = None

    @classmethod
    def parse(cls, text: str) -> "GraphSource":
        text = text.strip()
        if text.startswith("ba:"):
            kv = _key_values(text[3:], {"n", "m", "seed"})
            if "n" not in kv or "m" not in kv:
                raise ExperimentError(f"ba source needs n and m: {text!r}")
            return cls("ba", n=kv["n"], m=kv["m"], seed=kv.get("seed", 0))
        if text.startswith("sample:"):
            body = text[7:]
            head, sep, parent = body.partition("from=")
            if not sep or not parent:
                raise ExperimentError(f"sample source needs from=<source> last: {text!r}")
            kv = _key_values(head.rstrip(","), {"n", "seed"})
            if "n" not in kv:
                raise ExperimentError(f"sample source needs n: {text!r}")
            return cls("sample", n=kv["n"], seed=kv.get("seed", 0), parent=cls.parse(parent))
        if text.startswith("file:"):
            text = text[5:]
        if not text:
            raise ExperimentError("empty graph source")
        return cls("file", path=text)

    @classmethod
    def from_json(cls, obj: Any) -> "GraphSource":
        if isinstance(obj, str):
            return cls.parse(obj)
        if not isinstance(obj, dict) or "type" not in obj:
            raise ExperimentError(f"graph must be a string or an object with a type: {obj!r}")
        kind = obj["type"]
        if kind == "ba":
            return cls("ba", n=int(obj["n"]), m=int(obj["m"]), seed=int(obj.get("seed", 0)))
        if kind == "file":
            return cls("file", path=str(obj["path"]))
        if kind == "sample":
            parent = obj.get("from") or {"type": "file", "path": obj["file"]}
            return cls("sample", n=int(obj["n"]), seed=int(obj.get("seed", 0)), parent=cls.from_json(parent))
        raise ExperimentError(f"unknown graph type {kind!r}")

    def label(self) -> str:
        if self.kind == "ba":
            return f"ba:n={self.n},m={self.m},seed={self.seed}"
        if self.kind == "sample":
            return f"sample:n={self.n},seed={self.seed},from={self.parent.label()}"
        return f"file:{self.path}"

    def with_n(self, n: int) -> "GraphSource":
        if self.kind == "file":
            raise ExperimentError("cannot sweep n over a file source; use sample:...")
        return dataclasses.replace(self, n=n)

    def load(self) -> Graph:
        if self.kind == "ba":
            return generate_ba(self.n, self.m, self.seed)
        if self.kind == "sample":
            return sample_induced(self.parent.load(), self.n, self.seed)
        return read_edge_list(self.path)


def _key_values(text: str, allowed: set[str]) -> dict[str, int]:
    out = {}
    for part in filter(None, text.split(",")):
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or key not in allowed:
            raise ExperimentError(f"bad graph parameter {part!r}; expected one of {sorted(allowed)}")
        try:
            out[key] = int(value)
        except ValueError:
            raise ExperimentError(f"graph parameter {key} must be an integer, got {value!r}") from None
    return out


# --------------------------------------------------------------------- spec

@dataclass(frozen=True)
class ExperimentSpec:
    graph: GraphSource
    algorithm: str = "onens"
    clipping: str = "double"
    epsilon: float = 1.0
    eps0: float | None = None
    eps1: float | None = None
    eps2: float | None = None
    mu_star: float = 1e-3
    alpha: float = 150.0
    beta: float = 1e-6
    d_max: int | None = None
    trials: int = 10
    seed: int = 0
    link_rate: float = 20e6
    max_noisy_edges: float = DEFAULT_EDGE_CAP
    timing: bool = False

    FIELDS = ("graph", "algorithm", "clipping", "epsilon", "eps0", "eps1", "eps2", "mu_star", "alpha",
              "beta", "d_max", "trials", "seed", "link_rate", "max_noisy_edges", "timing")

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ExperimentError(f"algorithm must be one of {', '.join(ALGORITHMS)}")
        try:
            Clipping.parse(self.clipping)
        except ValueError as exc:
            raise ExperimentError(str(exc)) from None
        if self.trials < 1:
            raise ExperimentError("trials must be at least 1")
        if not self.epsilon > 0:
            raise ExperimentError("epsilon must be positive")
        if not (0 < self.mu_star <= 1):
            raise ExperimentError("mu_star must lie in (0, 1]")
        self.split()  # validates the budget split

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentSpec":
        unknown = set(data) - set(cls.FIELDS)
        if unknown:
            raise ExperimentError(f"unknown spec keys: {', '.join(sorted(unknown))}")
        if "graph" not in data:
            raise ExperimentError("spec needs a graph source")
        kw = dict(data)
        kw["graph"] = kw["graph"] if isinstance(kw["graph"], GraphSource) else GraphSource.from_json(kw["graph"])
        return cls(**kw)

    def to_json(self) -> dict:
        out = {f: getattr(self, f) for f in self.FIELDS}
        out["graph"] = self.graph.label()
        return out

    @property
    def clip_mode(self) -> Clipping:
        return Clipping.parse(self.clipping)

    def split(self) -> tuple[float, float, float]:
        """(eps0, eps1, eps2) for the triangle protocol; defaults depend on clipping."""
        eps = self.epsilon
        given = (self.eps0, self.eps1, self.eps2)
        clipped = self.clip_mode is not Clipping.NONE
        if all(v is None for v in given):
            return (eps / 10, 9 * eps / 20, 9 * eps / 20) if clipped else (0.0, eps / 2, eps / 2)
        e0 = self.eps0 if self.eps0 is not None else 0.0
        if self.eps1 is None or self.eps2 is None or (clipped and self.eps0 is None):
            raise ExperimentError("give the full budget split (eps0 with clipping, eps1, eps2) or none of it")
        if not clipped and e0 != 0.0:
            raise ExperimentError("eps0 is only spent with clipping")
        if not math.isclose(e0 + self.eps1 + self.eps2, eps, rel_tol=1e-9):
            raise ExperimentError(f"budget split {e0}+{self.eps1}+{self.eps2} does not sum to epsilon={eps}")
        return e0, self.eps1, self.eps2

    def protocol_config(self, variant: Variant, seed: int) -> ProtocolConfig:
        e0, e1, e2 = self.split()
        try:
            return ProtocolConfig(variant, e1, e2, self.mu_star, self.clip_mode, eps0=e0, alpha=self.alpha,
                                  beta=self.beta, d_max=self.d_max, seed=seed)
        except ValueError as exc:
            raise ExperimentError(str(exc)) from None


# ---------------------------------------------------------------- execution

@dataclass
class Truth:
    triangles: int
    two_stars: int
    clustering: float | None


@dataclass
class TrialOutcome:
    rows: list[dict]
    dl_bits: np.ndarray | None
    ul_bits: np.ndarray
    transcript: dict | None = None


@dataclass
class RunResult:
    rows: list[dict]
    transcripts: list[dict] = field(default_factory=list)

    def summary_rows(self) -> list[dict]:
        return [r for r in self.rows if r["trial"] == "summary"]


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ExperimentError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def check_memory(spec: ExperimentSpec, graph: Graph) -> None:
    """Refuses runs whose expected noisy edge set exceeds ``max_noisy_edges``."""
    n, m = graph.n, graph.num_edges
    if spec.algorithm in TWO_ROUND or spec.algorithm == "cluster":
        variant = Variant.ONE_NS if spec.algorithm == "cluster" else Variant.parse(spec.algorithm)
        expected = expected_noisy_edges(graph, spec.protocol_config(variant, 0))
    else:
        keep = warner_keep_prob(spec.epsilon)
        p2 = arr_sampling_rate(spec.epsilon, spec.mu_star) if spec.algorithm == "arr-unbiased" else 1.0
        expected = p2 * (keep * m + (1 - keep) * (n * (n - 1) / 2 - m))
    if expected > spec.max_noisy_edges:
        raise ExperimentError(
            f"expected noisy edge count {expected:.3g} exceeds the cap {spec.max_noisy_edges:.3g}; "
            f"lower mu_star or raise max_noisy_edges"
        )


def _row(spec: ExperimentSpec, dataset: str, quantity: str, seed: int, trial: Any, estimate, truth, n: int,
         dl, ul, runtime_ms) -> dict:
    if estimate is None or truth is None:
        rel = l2 = None
    else:
        rel = abs(estimate - truth) / truth if quantity == "clustering" else relative_error(estimate, truth, n)
        l2 = (estimate - truth) ** 2
    return {
        "dataset": dataset, "algorithm": spec.algorithm, "quantity": quantity,
        "clipping": spec.clipping if spec.algorithm not in ONE_ROUND_METHODS else "none",
        "epsilon": spec.epsilon, "mu_star": spec.mu_star, "seed": seed, "trial": trial,
        "estimate": estimate, "truth": truth, "rel_err": rel, "rel_err_sem": None, "rel_err_median": None,
        "l2": l2, "dl_bits_max": dl, "ul_bits_max": ul, "runtime_ms": runtime_ms,
    }


def run_trial(spec: ExperimentSpec, graph: Graph, truth: Truth, dataset: str, trial: int,
              transcript: bool = False) -> TrialOutcome:
    seed = trial_seed(spec.seed, trial)
    start = time.perf_counter()
    dl = None
    record = None
    if spec.algorithm in TWO_ROUND:
        res = run_protocol(graph, spec.protocol_config(Variant.parse(spec.algorithm), seed))
        values = [("triangles", res.estimate, truth.triangles)]
        dl, ul = res.reports.dl_bits, res.reports.ul_bits
        record = res.to_transcript() if transcript else None
    elif spec.algorithm == "cluster":
        cfg = spec.protocol_config(Variant.ONE_NS, seed)
        est = estimate_clustering(graph, spec.epsilon, spec.mu_star, seed, triangle_config=cfg, alpha=spec.alpha)
        values = [
            ("triangles", est.triangles, truth.triangles),
            ("two_stars", est.two_stars, truth.two_stars),
            ("clustering", est.coefficient, truth.clustering),
        ]
        rep = est.triangle_result.reports
        dl, ul = rep.dl_bits, rep.ul_bits
        if transcript:
            record = est.triangle_result.to_transcript()
            record["two_stars_estimate"] = est.two_stars
    else:
        p2 = arr_sampling_rate(spec.epsilon, spec.mu_star)
        res1 = run_one_round(graph, spec.algorithm, spec.epsilon, stream(seed, ONE_ROUND), p2)
        values = [("triangles", res1.estimate, truth.triangles)]
        ul = res1.ul_bits
        dl = np.zeros_like(ul)
        record = {"estimate": res1.estimate, "p2": p2} if transcript else None
    runtime = (time.perf_counter() - start) * 1e3 if spec.timing else None
    dl_max = int(dl.max()) if dl is not None and len(dl) else (0 if dl is not None else None)
    ul_max = int(ul.max()) if len(ul) else 0
    rows = [_row(spec, dataset, q, seed, trial, e, t, graph.n, dl_max, ul_max, runtime) for q, e, t in values]
    if record is not None:
        record = {"trial": trial, "seed": seed, **record}
    return TrialOutcome(rows, dl, ul, record)


def _trial_job(args) -> TrialOutcome:
    return run_trial(*args)


def _summaries(spec: ExperimentSpec, outcomes: Sequence[TrialOutcome], dataset: str, n: int,
               wall_ms: float | None) -> list[dict]:
    dl_all = [o.dl_bits for o in outcomes]
    ul_all = np.stack([o.ul_bits for o in outcomes]) if outcomes[0].ul_bits.size else None
    if ul_all is None:
        dl_max = ul_max = 0.0
    elif any(d is None for d in dl_all):
        dl_max = None
        ul_max = measured_costs(ul_all, ul_all)[1]
    else:
        dl_max, ul_max = measured_costs(np.stack(dl_all), ul_all)
    out = []
    for q_index, first in enumerate(outcomes[0].rows):
        rows = [o.rows[q_index] for o in outcomes]
        ests = [r["estimate"] for r in rows if r["estimate"] is not None]
        rels = np.array([r["rel_err"] for r in rows if r["rel_err"] is not None], dtype=float)
        l2s = [r["l2"] for r in rows if r["l2"] is not None]
        summary = dict(first)
        summary.update(
            seed=spec.seed, trial="summary",
            estimate=math.fsum(ests) / len(ests) if ests else None,
            rel_err=float(rels.mean()) if len(rels) else None,
            rel_err_sem=float(rels.std(ddof=1) / math.sqrt(len(rels))) if len(rels) > 1 else (0.0 if len(rels) else None),
            rel_err_median=float(np.median(rels)) if len(rels) else None,
            l2=math.fsum(l2s) / len(l2s) if l2s else None,
            dl_bits_max=dl_max, ul_bits_max=ul_max, runtime_ms=wall_ms,
        )
        out.append(summary)
    return out


def run_experiment(spec: ExperimentSpec, *, transcripts: bool = False, graph: Graph | None = None) -> RunResult:
    """All trials of ``spec``: per-trial rows in trial order, then summary rows."""
    start = time.perf_counter()
    graph = graph if graph is not None else spec.graph.load()
    check_memory(spec, graph)
    counts = exact_counts(graph, with_four_cycles=False)
    truth = Truth(counts.triangles, counts.two_stars, counts.clustering_coefficient)
    dataset = spec.graph.label()
    jobs = [(spec, graph, truth, dataset, t, transcripts) for t in range(spec.trials)]
    workers = min(_worker_count(), spec.trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_job, jobs))
    else:
        outcomes = [_trial_job(j) for j in jobs]
    rows = [r for o in outcomes for r in o.rows]
    wall = (time.perf_counter() - start) * 1e3 if spec.timing else None
    rows += _summaries(spec, outcomes, dataset, graph.n, wall)
    return RunResult(rows, [o.transcript for o in outcomes if o.transcript is not None])


# -------------------------------------------------------------------- bench

@dataclass(frozen=True)
class BenchGrid:
    """Cartesian sweep around a base spec; empty axes keep the base value."""

    base: ExperimentSpec
    algorithms: tuple[str, ...] = ()
    clippings: tuple[str, ...] = ()
    epsilons: tuple[float, ...] = ()
    mu_stars: tuple[float, ...] = ()
    sizes: tuple[int, ...] = ()

    def cells(self) -> list[ExperimentSpec]:
        b = self.base
        out = []
        for algo, clip, eps, ms, n in itertools.product(
            self.algorithms or (b.algorithm,),
            self.clippings or (b.clipping,),
            self.epsilons or (b.epsilon,),
            self.mu_stars or (b.mu_star,),
            self.sizes or (None,),
        ):
            graph = b.graph if n is None else b.graph.with_n(n)
            out.append(dataclasses.replace(b, graph=graph, algorithm=algo, clipping=clip, epsilon=eps, mu_star=ms))
        return out


def run_bench(grid: BenchGrid, max_cells: int = DEFAULT_CELL_CAP) -> list[dict]:
    """Summary rows for every cell; graphs are loaded once per distinct source."""
    cells = grid.cells()
    if len(cells) > max_cells:
        raise ExperimentError(f"grid has {len(cells)} cells, above the cap of {max_cells}")
    graphs: dict[str, Graph] = {}
    rows = []
    for spec in cells:
        key = spec.graph.label()
        if key not in graphs:
            graphs[key] = spec.graph.load()
        rows += run_experiment(spec, graph=graphs[key]).summary_rows()
    return rows


# ---------------------------------------------------------------------- csv

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def write_csv(rows: Iterable[dict], stream_out) -> None:
    writer = csv.writer(stream_out, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in COLUMNS])


def csv_text(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def write_transcripts(spec: ExperimentSpec, transcripts: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"spec": spec.to_json(), "trials": transcripts}, fh, indent=1, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
