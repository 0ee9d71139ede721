"""Command-line interface.

Subcommands: geodesic, mean, project, pca, simulate, plot-simplex. Every
run writes a ``run.json`` with the resolved configuration and package
version into the output directory, and numeric output is formatted at 12
significant digits, so identical seeds and inputs give byte-identical
files. Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from ._util import fmt
from .frechet import WeightedSample, cyclic_mean, sturm_mean
from .geodesic import distance, geodesic, point_on_geodesic
from .locus import (ProjectorConfig, SimplexPoint, VertexSet, project_all,
                    simplex_topology_map, sum_sq_projected)
from .newick import (NewickError, read_leaf_map, read_newick_file,
                     write_newick, write_newick_file)
from .pca import ProposalKernel, fit_component
from .simulate import (SurfaceDatasetSpec, coalescent_quadruple, kingman_tree,
                       make_surface_dataset)
from .ternary import lattice_csv, ternary_svg
from .trees import TreeError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _default_threads() -> int:
    env = os.environ.get("TSP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_io_options(p, vertices=False, data=True):
    if vertices:
        p.add_argument("--vertices", required=True, help="Newick file of vertex trees")
    if data:
        p.add_argument("--input", required=True, help="Newick file, one tree per line")
    p.add_argument("--root-label", required=True,
                   help="taxon name mapped to the root leaf (index 0)")
    p.add_argument("--leaf-map", help="JSON sidecar pinning label -> index")
    p.add_argument("--missing-length", default="error",
                   help="'error' or a default length for edges without one")
    p.add_argument("--pendant", choices=("include", "ignore"), default="ignore",
                   help="whether pendant edges enter distances")


def _add_common(p):
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--json", action="store_true", help="print a JSON summary to stdout")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: TSP_THREADS or all cores)")


def build_parser() -> _Parser:
    parser = _Parser(prog="treespace",
                     description="Statistics in the space of phylogenetic trees")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geodesic", help="geodesic between two trees")
    p.add_argument("first", help="Newick file with the source tree")
    p.add_argument("second", help="Newick file with the target tree")
    p.add_argument("--t", type=float, default=None,
                   help="emit the tree this proportion along the geodesic")
    p.add_argument("--support", action="store_true",
                   help="emit the support decomposition as JSON")
    _add_io_options(p, data=False)
    _add_common(p)

    p = sub.add_parser("mean", help="weighted Frechet mean of a sample")
    _add_io_options(p)
    p.add_argument("--weights", help="text file, one weight per line")
    p.add_argument("--method", choices=("sturm", "cyclic"), default="cyclic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=100_000)
    _add_common(p)

    p = sub.add_parser("project", help="project trees onto a locus surface")
    _add_io_options(p, vertices=True)
    p.add_argument("--method", choices=("geometric", "exhaustive"), default="geometric")
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("pca", help="fit a principal component")
    _add_io_options(p)
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernels", help="JSON file with proposal kernel settings")
    p.add_argument("--conv-window", type=int, default=20)
    p.add_argument("--conv-threshold", type=float, default=1e-3)
    p.add_argument("--max-sweeps", type=int, default=200)
    _add_common(p)

    p = sub.add_parser("simulate", help="generate synthetic tree data")
    mode = p.add_subparsers(dest="mode", required=True)

    c = mode.add_parser("coalescent", help="coalescent species trees")
    c.add_argument("--n-taxa", type=int, required=True)
    c.add_argument("--n-trees", type=int, default=1)
    c.add_argument("--seed", type=int, default=0)
    _add_common(c)

    q = mode.add_parser("quadruple",
                        help="species tree plus four gene trees (u, v0, v1, v2, z)")
    q.add_argument("--n-taxa", type=int, required=True)
    q.add_argument("--count", type=int, default=1)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--theta", type=float, default=1.0)
    _add_common(q)

    s = mode.add_parser("surface", help="dispersed sample around a known surface")
    s.add_argument("--spec", required=True, help="JSON file with the dataset recipe")
    s.add_argument("--truth-resolution", type=int, default=50)
    s.add_argument("--no-truth", action="store_true",
                   help="skip the exhaustive reference projection")
    _add_common(s)

    p = sub.add_parser("plot-simplex", help="ternary diagram of a k=2 surface")
    _add_io_options(p, vertices=True, data=False)
    p.add_argument("--input", help="optional Newick data to project and overlay")
    p.add_argument("--resolution", type=int, default=40)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)

    return parser


def _write_run_json(args, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    resolved = {k: v for k, v in sorted(vars(args).items())}
    resolved["version"] = __version__
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _read_trees(path, args):
    leaf_order = read_leaf_map(args.leaf_map) if args.leaf_map else None
    missing = args.missing_length
    if missing != "error":
        missing = float(missing)
    return read_newick_file(path, args.root_label, missing, leaf_order)


def _emit(args, summary: dict, lines: list[str]):
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _cmd_geodesic(args) -> int:
    x = _read_trees(args.first, args)[0]
    y = _read_trees(args.second, args)[0]
    y = y.reindexed(x.leaves)
    g = geodesic(x, y, args.pendant)
    summary = {"distance": float(fmt(g.length)), "n_legs": g.support.n_legs,
               "simple_legs": [len(a) == 1 and len(b) == 1
                               for a, b in zip(g.support.a_sets, g.support.b_sets)]}
    lines = [f"distance {fmt(g.length)}", f"legs {g.support.n_legs}"]
    if args.t is not None:
        tree = point_on_geodesic(g, args.t)
        path = os.path.join(args.out, "interpolated.nwk")
        write_newick_file(path, [tree])
        summary["interpolated"] = path
        lines.append(f"interpolated tree at t={fmt(args.t)} -> {path}")
    if args.support:
        support = {
            "A": [[str(s) for s in sorted(block, key=lambda s: s.mask)]
                  for block in g.support.a_sets],
            "B": [[str(s) for s in sorted(block, key=lambda s: s.mask)]
                  for block in g.support.b_sets],
            "C": {str(s): [float(fmt(a)) for a in pair]
                  for s, pair in sorted(g.support.common_splits.items(),
                                        key=lambda kv: kv[0].mask)},
        }
        path = os.path.join(args.out, "support.json")
        with open(path, "w") as fh:
            json.dump(support, fh, indent=2)
            fh.write("\n")
        summary["support"] = support
        lines.append(f"support -> {path}")
    _emit(args, summary, lines)
    return 0


def _cmd_mean(args) -> int:
    trees = _read_trees(args.input, args)
    weights = None
    if args.weights:
        with open(args.weights) as fh:
            weights = [float(line.strip()) for line in fh
                       if line.strip() and not line.startswith("#")]
    sample = WeightedSample(trees, weights)
    if args.method == "cyclic":
        result = cyclic_mean(sample, args.eps, args.window, args.max_iter, args.pendant)
    else:
        result = sturm_mean(sample, args.seed, args.eps, args.window,
                            args.max_iter, args.pendant)
    mean_path = os.path.join(args.out, "mean.nwk")
    write_newick_file(mean_path, [result.mean])
    stats = {"objective": float(fmt(result.objective)),
             "iterations": result.iterations, "converged": result.converged,
             "method": args.method}
    with open(os.path.join(args.out, "mean.json"), "w") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(args, {**stats, "mean": write_newick(result.mean)},
          [f"mean -> {mean_path}",
           f"objective {fmt(result.objective)} after {result.iterations} iterations"
           f" (converged: {result.converged})"])
    return 0


def _projection_rows(results):
    k = len(results[0].weights.p) - 1
    header = "index," + ",".join(f"p{i}" for i in range(k + 1)) + \
        ",distance,topology,tie_count"
    rows = [header]
    for i, res in enumerate(results):
        weights = ",".join(fmt(w) for w in res.weights.p)
        rows.append(f'{i},{weights},{fmt(res.distance)},"{res.projected.topology()}",'
                    f"{res.tie_count}")
    return rows


def _cmd_project(args) -> int:
    vertices = VertexSet(_read_trees(args.vertices, args))
    trees = [t.reindexed(vertices.leaves) for t in _read_trees(args.input, args)]
    config = ProjectorConfig(method=args.method, eps=args.eps,
                             restarts=args.restarts, resolution=args.resolution,
                             seed=args.seed, n_jobs=args.threads or _default_threads(),
                             pendant_mode=args.pendant)
    results = project_all(trees, vertices, config)
    rows = _projection_rows(results)
    path = os.path.join(args.out, "projections.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    d2 = sum(res.distance ** 2 for res in results)
    _emit(args, {"projections": path, "sum_sq_projected": float(fmt(d2)),
                 "n": len(results)},
          [f"projections -> {path}", f"sum of squared distances {fmt(d2)}"])
    return 0


def _cmd_pca(args) -> int:
    trees = _read_trees(args.input, args)
    kernels = None
    if args.kernels:
        with open(args.kernels) as fh:
            kernels = tuple(ProposalKernel(**item) for item in json.load(fh))
    component = fit_component(trees, args.order, kernels, args.restarts,
                              args.conv_window, args.conv_threshold, args.seed,
                              max_sweeps=args.max_sweeps,
                              n_jobs=args.threads or _default_threads())
    os.makedirs(args.out, exist_ok=True)
    write_newick_file(os.path.join(args.out, "vertices.nwk"),
                      component.vertices.vertices)
    with open(os.path.join(args.out, "projections.csv"), "w") as fh:
        fh.write("\n".join(_projection_rows(component.stats.per_datum)) + "\n")
    stats = {"order": component.order, "seed": component.seed,
             "sum_sq_projected": float(fmt(component.stats.sum_sq_projected)),
             "r_squared": float(fmt(component.stats.r_squared)),
             "sweeps": component.trace[-1][0]}
    with open(os.path.join(args.out, "stats.json"), "w") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(args.out, "trace.csv"), "w") as fh:
        fh.write("sweep,sum_sq_projected\n")
        for sweep, d2 in component.trace:
            fh.write(f"{sweep},{fmt(d2)}\n")
    _emit(args, stats, [f"fitted order-{component.order} component -> {args.out}",
                        f"sum of squared distances {fmt(stats['sum_sq_projected'])}"
                        f", r2 {fmt(stats['r_squared'])}"])
    return 0


def _cmd_simulate(args) -> int:
    if args.mode == "coalescent":
        trees = [kingman_tree(args.n_taxa, seed=args.seed + i)
                 for i in range(args.n_trees)]
        path = os.path.join(args.out, "trees.nwk")
        write_newick_file(path, trees)
        _emit(args, {"trees": path, "n": len(trees)}, [f"{len(trees)} trees -> {path}"])
        return 0
    if args.mode == "quadruple":
        roles = {"u": [], "v0": [], "v1": [], "v2": [], "z": []}
        for i in range(args.count):
            u, v0, v1, v2, z = coalescent_quadruple(args.n_taxa, args.seed + i,
                                                    args.theta)
            for name, tree in zip(roles, (u, v0, v1, v2, z)):
                roles[name].append(tree)
        paths = {}
        for name, trees in roles.items():
            paths[name] = os.path.join(args.out, f"{name}.nwk")
            write_newick_file(paths[name], trees)
        _emit(args, {"files": paths, "count": args.count},
              [f"{args.count} quadruples -> {args.out}"])
        return 0
    with open(args.spec) as fh:
        raw = json.load(fh)
    raw["dirichlet_alpha"] = tuple(raw.get("dirichlet_alpha", (4.0, 4.0, 4.0)))
    spec = SurfaceDatasetSpec(**raw)
    W, Z, truth = make_surface_dataset(spec, args.truth_resolution,
                                       n_jobs=args.threads or _default_threads(),
                                       compute_truth=not args.no_truth)
    write_newick_file(os.path.join(args.out, "vertices.nwk"), W.vertices)
    write_newick_file(os.path.join(args.out, "data.nwk"), Z)
    summary = {"n_points": len(Z), "vertices": 3}
    if truth is not None:
        summary["true_sum_sq"] = float(fmt(truth.sum_sq_projected))
        summary["true_r_squared"] = float(fmt(truth.r_squared))
        with open(os.path.join(args.out, "truth.json"), "w") as fh:
            json.dump({"sum_sq_projected": float(fmt(truth.sum_sq_projected)),
                       "r_squared": float(fmt(truth.r_squared)),
                       "distances": [float(fmt(r.distance)) for r in truth.per_datum],
                       "weights": [[float(fmt(w)) for w in r.weights.p]
                                   for r in truth.per_datum]},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
    _emit(args, summary, [f"surface dataset -> {args.out}"])
    return 0


def _cmd_plot_simplex(args) -> int:
    vertices = VertexSet(_read_trees(args.vertices, args))
    topo_map = simplex_topology_map(vertices, args.resolution,
                                    pendant_mode=args.pendant,
                                    n_jobs=args.threads or _default_threads())
    points = None
    if args.input:
        trees = [t.reindexed(vertices.leaves) for t in _read_trees(args.input, args)]
        config = ProjectorConfig(restarts=args.restarts, seed=args.seed,
                                 n_jobs=args.threads or _default_threads(),
                                 pendant_mode=args.pendant)
        points = [res.weights for res in project_all(trees, vertices, config)]
    svg_path = os.path.join(args.out, "simplex.svg")
    with open(svg_path, "w") as fh:
        fh.write(ternary_svg(topo_map, points))
    csv_path = os.path.join(args.out, "simplex_lattice.csv")
    with open(csv_path, "w") as fh:
        fh.write(lattice_csv(topo_map))
    _emit(args, {"svg": svg_path, "lattice": csv_path,
                 "regions": topo_map.n_regions},
          [f"diagram -> {svg_path}", f"lattice -> {csv_path}",
           f"{topo_map.n_regions} topology regions"])
    return 0


_COMMANDS = {
    "geodesic": _cmd_geodesic,
    "mean": _cmd_mean,
    "project": _cmd_project,
    "pca": _cmd_pca,
    "simulate": _cmd_simulate,
    "plot-simplex": _cmd_plot_simplex,
}


def run(argv=None) -> int:
    """Entry point returning the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        _write_run_json(args, args.out)
        return _COMMANDS[args.command](args)
    except (TreeError, NewickError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
