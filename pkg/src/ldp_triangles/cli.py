"""Command-line entry point: ``ldp-triangles {exact,run,bench,gen-ba,sample}``."""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager

from .graph import GraphFormatError, exact_counts, write_edge_list
from .mechanisms import Variant
from .metrics import analytic_costs, transfer_seconds
from .two_round import DegenerateBudgetError
from .experiment import (
    ALGORITHMS,
    DEFAULT_CELL_CAP,
    WORKERS_ENV,
    BenchGrid,
    ExperimentError,
    ExperimentSpec,
    GraphSource,
    run_bench,
    run_experiment,
    write_csv,
    write_transcripts,
)

# flag dest -> spec field
_SPEC_FLAGS = {
    "graph": "graph", "algorithm": "algorithm", "clipping": "clipping", "epsilon": "epsilon",
    "eps0": "eps0", "eps1": "eps1", "eps2": "eps2", "mu_star": "mu_star", "alpha": "alpha", "beta": "beta",
    "d_max": "d_max", "trials": "trials", "seed": "seed", "link_rate": "link_rate",
    "max_noisy_edges": "max_noisy_edges", "timing": "timing",
}


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", metavar="JSON", help="experiment spec file; flags override its keys")
    p.add_argument("--graph", help="ba:n=N,m=M[,seed=S] | file:PATH | sample:n=N[,seed=S],from=SOURCE")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--clipping", choices=("none", "edge", "double"))
    p.add_argument("--epsilon", type=float, help="total privacy budget")
    p.add_argument("--eps0", type=float, help="degree-noise budget (clipping only)")
    p.add_argument("--eps1", type=float, help="round-1 budget")
    p.add_argument("--eps2", type=float, help="round-2 budget")
    p.add_argument("--mu-star", dest="mu_star", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--d-max", dest="d_max", type=int, help="public max degree for plain runs")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--link-rate", dest="link_rate", type=float, help="bits per second (default 20e6)")
    p.add_argument("--max-noisy-edges", dest="max_noisy_edges", type=float)
    p.add_argument("--timing", action=argparse.BooleanOptionalAction, default=None,
                   help="fill runtime_ms (makes output nondeterministic)")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldp-triangles",
        description="Triangle counting under edge local differential privacy.",
        epilog=f"Set {WORKERS_ENV} to run trials in that many worker processes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="print exact graph statistics")
    p.add_argument("graph", help="graph source")
    p.add_argument("--no-four-cycles", action="store_true", help="skip the 4-cycle count")

    p = sub.add_parser("run", help="repeated trials of one configuration")
    _add_spec_flags(p)
    p.add_argument("--transcript", metavar="PATH", help="write per-trial JSON transcripts")

    p = sub.add_parser("bench", help="cartesian sweep, one summary row per cell")
    _add_spec_flags(p)
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS)
    p.add_argument("--clippings", nargs="+", choices=("none", "edge", "double"))
    p.add_argument("--epsilons", nargs="+", type=float)
    p.add_argument("--mu-stars", dest="mu_stars", nargs="+", type=float)
    p.add_argument("--sizes", nargs="+", type=int, help="node counts for ba/sample sources")
    p.add_argument("--max-cells", type=int, default=DEFAULT_CELL_CAP)

    p = sub.add_parser("gen-ba", help="write a preferential-attachment graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="edge-list path (default stdout)")

    p = sub.add_parser("sample", help="write the subgraph induced by n random nodes")
    p.add_argument("graph", help="graph source")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="edge-list path (default stdout)")
    return parser


def spec_from_args(args: argparse.Namespace, timing_default: bool = False) -> ExperimentSpec:
    data: dict = {}
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ExperimentError(f"{args.spec}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ExperimentError(f"{args.spec}: spec must be a JSON object")
    for dest, key in _SPEC_FLAGS.items():
        value = getattr(args, dest)
        if value is not None:
            data[key] = value
    data.setdefault("timing", timing_default)
    if "graph" not in data:
        raise ExperimentError("a graph source is required (--graph or the spec file)")
    return ExperimentSpec.from_mapping(data)


@contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _fmt(value) -> str:
    if value is None:
        return "undefined"
    return f"{value:.6g}" if isinstance(value, float) else str(value)


def cmd_exact(args) -> int:
    g = GraphSource.parse(args.graph).load()
    c = exact_counts(g, with_four_cycles=not args.no_four_cycles)
    for key, value in (
        ("nodes", c.n), ("edges", c.edges), ("triangles", c.triangles), ("two_stars", c.two_stars),
        ("three_stars", c.three_stars), ("four_cycles", c.four_cycles),
        ("clustering", c.clustering_coefficient), ("max_degree", c.max_degree), ("mean_degree", c.mean_degree),
    ):
        print(f"{key}={_fmt(value)}")
    return 0


def _cost_note(spec: ExperimentSpec, rows: list[dict], n: int) -> str:
    summary = rows[-1]
    variant = Variant.ONE_NS if spec.algorithm == "cluster" else Variant.parse(spec.algorithm)
    bounds = analytic_costs(variant, n, spec.mu_star, spec.split()[1])
    parts = [f"analytic download bound {bounds.analytic_dl_bound:.4g} bits "
             f"({transfer_seconds(bounds.analytic_dl_bound, spec.link_rate):.4g} s)"]
    if summary["dl_bits_max"] is not None:
        parts.append(f"measured {summary['dl_bits_max']:.4g} bits "
                     f"({transfer_seconds(summary['dl_bits_max'], spec.link_rate):.4g} s)")
    return "; ".join(parts) + f" at {spec.link_rate:.4g} bit/s"


def cmd_run(args) -> int:
    spec = spec_from_args(args)
    graph = spec.graph.load()
    result = run_experiment(spec, transcripts=bool(args.transcript), graph=graph)
    with _output(args.output) as out:
        write_csv(result.rows, out)
    if args.transcript:
        write_transcripts(spec, result.transcripts, args.transcript)
    if spec.algorithm not in ("rr-biased", "rr-unbiased", "arr-unbiased"):
        print(_cost_note(spec, result.rows, graph.n), file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    spec = spec_from_args(args, timing_default=True)
    grid = BenchGrid(
        spec,
        algorithms=tuple(args.algorithms or ()),
        clippings=tuple(args.clippings or ()),
        epsilons=tuple(args.epsilons or ()),
        mu_stars=tuple(args.mu_stars or ()),
        sizes=tuple(args.sizes or ()),
    )
    rows = run_bench(grid, args.max_cells)
    with _output(args.output) as out:
        write_csv(rows, out)
    return 0


def cmd_gen_ba(args) -> int:
    g = GraphSource("ba", n=args.n, m=args.m, seed=args.seed).load()
    with _output(args.output) as out:
        write_edge_list(g, out)
    return 0


def cmd_sample(args) -> int:
    source = GraphSource("sample", n=args.n, seed=args.seed, parent=GraphSource.parse(args.graph))
    g = source.load()
    with _output(args.output) as out:
        write_edge_list(g, out)
    return 0


COMMANDS = {"exact": cmd_exact, "run": cmd_run, "bench": cmd_bench, "gen-ba": cmd_gen_ba, "sample": cmd_sample}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ExperimentError, DegenerateBudgetError) as exc:
        parser.exit(2, f"{parser.prog}: error: {exc}\n")
    except GraphFormatError as exc:
        parser.exit(1, f"{parser.prog}: error: {exc}\n")
    except OSError as exc:
        parser.exit(1, f"{parser.prog}: error: {exc.filename or ''}: {exc.strerror}\n")
    except ValueError as exc:
        parser.exit(2, f"{parser.prog}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
