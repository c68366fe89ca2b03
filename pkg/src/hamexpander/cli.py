"""Command-line front end.

Every subcommand writes one JSON document (or a text table for `mixing`)
to stdout or --out.  Exit codes: 0 success, 2 computation failure or
abstention, 64 usage error, 65 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import generators as gen
from .config import load_config
from .graph import (GraphFormatError, expansion_certificate, far_from_bipartite, format_edge_list,
                    parse_edge_list)
from .rng import parse_seed

EXIT_OK = 0
EXIT_FAIL = 2
EXIT_USAGE = 64
EXIT_INPUT = 65

log = logging.getLogger("hamexpander")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class ComputationFailure(Exception):
    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _graph(path: str, detect_side: bool = True):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        g = parse_edge_list(text)
    except GraphFormatError as exc:
        raise InputError(f"{path}: {exc}") from None
    if detect_side and g.m and g.is_connected():
        side = g.two_colouring()
        if side is not None and int(side.sum()) * 2 == g.n:
            g = g.with_side(side)
    return g


def _pairs(path: str) -> list[tuple[int, int]]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    out = []
    for k, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"{path}:{k}: expected two vertex ids")
        try:
            out.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise InputError(f"{path}:{k}: not an integer") from None
    return out


def _vertex_sets(path: str) -> list[list[int]]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    out = []
    for k, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0]
        try:
            out.append([int(t) for t in line.split()])
        except ValueError:
            raise InputError(f"{path}:{k}: not an integer") from None
    return out


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"not a list of integers: {text!r}") from None


def _check_vertices(g, vs):
    for v in vs:
        if not 0 <= v < g.n:
            raise InputError(f"vertex {v} out of range")


# ----------------------------------------------------------------------
# subcommands

def cmd_gen(args, config):
    kind = args.kind
    p = args.params
    meta: dict = {"kind": kind, "seed": args.seed}
    try:
        if kind == "kneser":
            n, k = (int(x) for x in _need(p, 2, "N K"))
            g = gen.kneser(n, k)
            meta.update(gen.kneser_metadata(n, k))
        elif kind == "cayley":
            orders = _int_list(_need(p, 1, "ORDERS")[0])
            if args.gens is None:
                raise UsageError("cayley needs --gens")
            if len(orders) == 1:
                S = _int_list(args.gens)
            else:
                S = [tuple(_int_list(t)) for t in args.gens.split(";")]
            g = gen.cayley_abelian(orders, S)
            meta.update({"orders": orders, "generators": [list(s) if isinstance(s, tuple) else s for s in S]})
        elif kind == "regular":
            n, d = (int(x) for x in _need(p, 2, "N D"))
            g = gen.random_bipartite_regular(n, d, args.seed) if args.bipartite else gen.random_regular(n, d, args.seed)
            meta.update({"n": n, "d": d, "bipartite": bool(args.bipartite)})
        elif kind == "percolate":
            path, prob = _need(p, 2, "GRAPH P")
            base = _graph(path, detect_side=False)
            g = gen.percolate(base, float(prob), args.seed)
            meta.update({"p": float(prob), "source_d": base.d_max})
        elif kind == "coset-glue":
            order, index = (int(x) for x in _need(p, 2, "ORDER INDEX"))
            if args.gens is None:
                raise UsageError("coset-glue needs --gens")
            if index < 1 or order % index:
                raise UsageError("INDEX must divide ORDER")
            g = gen.cayley_abelian([order], _int_list(args.gens))
            cosets = [[v for v in range(order) if v % index == r] for r in range(index)]
            plan = gen.coset_euler_glue(g, cosets, args.threshold, args.seed)
            meta.update({"order": order, "index": index, "tour": plan.tour,
                         "matching": [list(e) for e in plan.matching],
                         "pairs": [[list(pr) for pr in lst] for lst in plan.pairs], "case": plan.case})
        else:
            raise UsageError(f"unknown generator {kind!r}")
    except (ValueError, gen.GenerationError, gen.GlueError) as exc:
        if isinstance(exc, gen.GlueError):
            raise ComputationFailure(str(exc), {"witness": exc.witness}) from None
        raise InputError(str(exc)) from None
    meta.update({"vertices": g.n, "edges": g.m, "d_min": g.d_min, "d_max": g.d_max})
    text = format_edge_list(g)
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out + ".json").write_text(_dump(meta))
        return meta
    return {"edge_list": text, "metadata": meta}


def _need(params, k, names):
    if len(params) != k:
        raise UsageError(f"expected parameters {names}")
    return params


def cmd_certify(args, config):
    g = _graph(args.graph, detect_side=False)
    exhaustive = True if args.exhaustive else None
    if exhaustive and g.n > 20:
        raise InputError("exhaustive certificates are limited to n <= 20")
    cert = expansion_certificate(g, args.samples, args.seed, exhaustive)
    out = {"expansion": cert.to_dict()}
    if g.m:
        mode = "exhaustive" if args.exhaustive else None
        out["bipartiteness"] = far_from_bipartite(g, mode, args.seed).to_dict()
    return out


def cmd_spectra(args, config):
    from .spectral import SpectralConvergenceError, spectral_summary

    g = _graph(args.graph, detect_side=False)
    try:
        s = spectral_summary(g, method=args.method)
    except SpectralConvergenceError as exc:
        raise ComputationFailure(str(exc)) from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = s.to_dict()
    out["gap"] = s.gap
    return out


def cmd_mixing(args, config):
    from .spectral import empirical_mixing

    g = _graph(args.graph)
    _check_vertices(g, [args.start])
    try:
        curve = empirical_mixing(g, args.start, args.t_max, bipartite=g.side is not None)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.json:
        return {"tv": curve.tv, "envelope": curve.envelope, "bipartite": curve.bipartite,
                "mixing_time": curve.mixing_time(args.tol)}
    rows = ["step\ttv"] + [f"{t}\t{v:.12g}" for t, v in enumerate(curve.tv)]
    return "\n".join(rows) + "\n"


def cmd_walk(args, config):
    from .walks import build_conditioned, random_walk, sample_conditioned

    g = _graph(args.graph)
    _check_vertices(g, [args.a] + ([args.b] if args.b is not None else []))
    if args.ell < 1:
        raise UsageError("ell must be positive")
    from .rng import stream

    if args.b is None:
        walks = [list(random_walk(g, args.a, args.ell, stream(args.seed, "cli-walk", i)).vertices)
                 for i in range(args.count)]
        return {"walks": walks}
    s = build_conditioned(g, args.b, args.ell)
    if not s.supports(args.a):
        raise ComputationFailure(f"no walk of length {args.ell} from {args.a} to {args.b}")
    out = {"walks": [list(sample_conditioned(s, args.a, stream(args.seed, "cli-walk", i)).vertices)
                     for i in range(args.count)]}
    if args.exact_law:
        out["f_table"] = s.f_tables.tolist()
        out["log_norm"] = s.log_norm.tolist()
    return out


def cmd_connect(args, config):
    from .connector import ConnectorError, PairBatch, connect

    g = _graph(args.graph)
    pairs = _pairs(args.pairs)
    forbidden = _int_list(args.forbidden) if args.forbidden else []
    _check_vertices(g, [v for pr in pairs for v in pr] + forbidden)
    ell = args.ell or config.ell
    try:
        batch = PairBatch.make(g, pairs, forbidden, ell)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        res = connect(g, batch, config, args.seed)
    except ConnectorError as exc:
        raise ComputationFailure(str(exc), getattr(exc, "diagnostics", None)) from None
    return res.to_dict()


def cmd_absorb(args, config):
    from .absorber import AbsorberError, absorb, build_absorber

    g = _graph(args.graph)
    kind = args.kind or ("bipartite" if g.side is not None else "general")
    if kind == "bipartite" and g.side is None:
        raise InputError("bipartite absorber needs a balanced bipartite graph")
    forbidden = _int_list(args.forbidden) if args.forbidden else []
    _check_vertices(g, forbidden)
    try:
        H = build_absorber(g, kind, config, forbidden, args.seed)
    except AbsorberError as exc:
        raise ComputationFailure(str(exc)) from None
    out = H.to_dict()
    if args.queries:
        answers = []
        for Rp in _vertex_sets(args.queries):
            try:
                path = absorb(H, Rp)
            except ValueError as exc:
                raise InputError(f"query {Rp}: {exc}") from None
            except AbsorberError as exc:
                raise ComputationFailure(str(exc)) from None
            answers.append({"R_prime": sorted(Rp), "path": path})
        out["queries"] = answers
    return out


def cmd_reservoir(args, config):
    from .reservoir import (ConnectThroughFailure, SpreadViolation, connect_through, reachable_probe,
                            robust_vertex_expansion_probe, sample_reservoir)

    g = _graph(args.graph)
    pairs = _pairs(args.pairs) if args.pairs else []
    avoid = {v for pr in pairs for v in pr}
    _check_vertices(g, avoid)
    res = sample_reservoir(g, args.p, avoid, args.seed, args.ell, args.D, args.rho, args.balanced)
    out = {"reservoir": res.to_dict()}
    if pairs:
        try:
            paths = connect_through(res, pairs, seed=args.seed, waive_spread=args.waive_spread,
                                    restarts=config.reservoir_retries)
        except SpreadViolation as exc:
            raise InputError(str(exc)) from None
        except ConnectThroughFailure as exc:
            raise ComputationFailure(str(exc), {"failed_pairs": [list(p) for p in exc.failed_pairs]}) from None
        out["paths"] = paths
    if args.probe:
        out["reachable_probe"] = reachable_probe(g, res.vertices, args.mu, res.ell, args.trials, args.seed)
        if args.rho is not None:
            from .reservoir import robust_expansion_params

            gamma, s = robust_expansion_params(args.rho, g.d_avg)
            out["expansion_probe"] = robust_vertex_expansion_probe(g, gamma, s, args.trials, args.seed, args.rho)
    return out


def cmd_hamilton(args, config):
    from .pipeline import hamilton_cycle

    g = _graph(args.graph, detect_side=False)
    res = hamilton_cycle(g, config, args.seed)
    log.info("stage timings: %s", {k: round(v, 4) for k, v in res.timings.items()})
    out = res.to_dict()
    if res.outcome != "cycle":
        raise ComputationFailure("no verified Hamilton cycle", out)
    return out


def cmd_oracle(args, config):
    from .pipeline import OracleSizeError, exact_oracle

    g = _graph(args.graph, detect_side=False)
    try:
        ok, cycle = exact_oracle(g, config.exact_max_n)
    except OracleSizeError as exc:
        raise InputError(str(exc)) from None
    return {"hamiltonian": ok, "cycle": cycle}


BENCH_KINDS = ("regular", "bipartite", "kneser", "circulant")


def cmd_bench(args, config):
    from .pipeline import hamilton_cycle

    rows = []
    for kind in args.kinds.split(","):
        if kind not in BENCH_KINDS:
            raise UsageError(f"unknown bench kind {kind!r}")
        ok = 0
        for r in range(args.runs):
            seed = args.seed + r
            if kind == "regular":
                g = gen.random_regular(args.n, args.d, seed)
            elif kind == "bipartite":
                g = gen.random_bipartite_regular(args.n, args.d, seed)
            elif kind == "kneser":
                g = gen.kneser(10, 3)
            else:
                g = gen.percolate(gen.circulant(args.n, range(1, args.d + 1)), 0.5, seed)
            t0 = time.perf_counter()
            res = hamilton_cycle(g, config, seed)
            log.info("bench %s run %d: %s in %.3fs", kind, r, res.outcome, time.perf_counter() - t0)
            ok += res.outcome == "cycle"
        rows.append({"kind": kind, "runs": args.runs, "cycles": ok, "rate": ok / args.runs})
    return {"results": rows}


COMMANDS = {
    "gen": cmd_gen, "certify": cmd_certify, "spectra": cmd_spectra, "mixing": cmd_mixing, "walk": cmd_walk,
    "connect": cmd_connect, "absorb": cmd_absorb, "reservoir": cmd_reservoir, "hamilton": cmd_hamilton,
    "oracle": cmd_oracle, "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", default="0", help="integer seed, or 'random'")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--threads", type=int, default=1, help="worker cap (results do not depend on it)")
    common.add_argument("--config", help="key=value config file")
    common.add_argument("-v", "--verbose", action="store_true", help="stage diagnostics on stderr")

    p = _Parser(prog="hamexpander", description="Hamilton cycles in regular expanders, with verification.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("gen", parents=[common], help="generate an instance")
    s.add_argument("kind", choices=["kneser", "cayley", "regular", "percolate", "coset-glue"])
    s.add_argument("params", nargs="*")
    s.add_argument("--gens", help="generators: '1,-1,2,-2' or ';'-separated tuples")
    s.add_argument("--bipartite", action="store_true")
    s.add_argument("--threshold", type=int, default=1, help="coset matching-size threshold")

    s = sub.add_parser("certify", parents=[common], help="expansion and bipartiteness certificates")
    s.add_argument("graph")
    s.add_argument("--exhaustive", action="store_true")
    s.add_argument("--samples", type=int, default=200)

    s = sub.add_parser("spectra", parents=[common], help="normalized-adjacency extremes")
    s.add_argument("graph")
    s.add_argument("--method", choices=["dense", "iterative"])

    s = sub.add_parser("mixing", parents=[common], help="exact TV-to-stationarity curve")
    s.add_argument("graph")
    s.add_argument("--start", type=int, default=0)
    s.add_argument("--t-max", type=int, default=50)
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--json", action="store_true")

    s = sub.add_parser("walk", parents=[common], help="random or endpoint-conditioned walks")
    s.add_argument("graph")
    s.add_argument("a", type=int)
    s.add_argument("ell", type=int)
    s.add_argument("--to", dest="b", type=int)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--exact-law", action="store_true")

    s = sub.add_parser("connect", parents=[common], help="join endpoint pairs by disjoint paths")
    s.add_argument("graph")
    s.add_argument("pairs")
    s.add_argument("--ell", type=int)
    s.add_argument("--forbidden")

    s = sub.add_parser("absorb", parents=[common], help="build an absorber and answer queries")
    s.add_argument("graph")
    s.add_argument("--kind", choices=["general", "bipartite"])
    s.add_argument("--queries", help="file with one R' set per line")
    s.add_argument("--forbidden")

    s = sub.add_parser("reservoir", parents=[common], help="sample a reservoir, route pairs, run probes")
    s.add_argument("graph")
    s.add_argument("--p", type=float, default=0.1)
    s.add_argument("--pairs")
    s.add_argument("--ell", type=int)
    s.add_argument("--D", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--balanced", action="store_true")
    s.add_argument("--waive-spread", action="store_true")
    s.add_argument("--probe", action="store_true")
    s.add_argument("--mu", type=float, default=1.0)
    s.add_argument("--trials", type=int, default=100)

    s = sub.add_parser("hamilton", parents=[common], help="find and verify a Hamilton cycle")
    s.add_argument("graph")

    s = sub.add_parser("oracle", parents=[common], help="exact Hamiltonicity for n <= 22")
    s.add_argument("graph")

    s = sub.add_parser("bench", parents=[common], help="success rates on generated instances")
    s.add_argument("--kinds", default="regular,bipartite")
    s.add_argument("--runs", type=int, default=3)
    s.add_argument("--n", type=int, default=1024)
    s.add_argument("--d", type=int, default=32)
    return p


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        try:
            args.seed = parse_seed(args.seed)
        except ValueError:
            raise UsageError(f"bad seed {args.seed!r}") from None
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="%(levelname)s %(message)s")
        try:
            config = load_config(args.config, master_seed=args.seed, threads=args.threads)
        except (OSError, ValueError) as exc:
            raise InputError(f"config: {exc}") from None
        for note in config.adjustments:
            log.warning("config adjusted: %s", note)
        result = COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationFailure as exc:
        print(f"failure: {exc}", file=sys.stderr)
        if exc.payload is not None:
            _emit(args, _dump(exc.payload), stdout)
        return EXIT_FAIL
    text = result if isinstance(result, str) else _dump(result)
    if not (args.command == "gen" and args.out):
        _emit(args, text, stdout)
    return EXIT_OK


def _emit(args, text, stdout):
    if getattr(args, "out", None) and args.command != "gen":
        Path(args.out).write_text(text)
    else:
        stdout.write(text)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
