"""Command-line interface.

Subcommands: gen, broadcast, stats, root-posterior, estimate, moments,
experiment.  The experiment runner honours the RBL_SEED environment
variable (overrides the config seed) and exits with status 2 on config
errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .broadcast import BitAssignment, Visibility, assign_bits
from .estimators import StructParams, bayes_estimate, centroid_estimate, majority_estimate, structured_estimate
from .generate import PaParams, generate_pa, generate_urrt
from .harness import ConfigError, ExperimentConfig, emit_results, run_experiment
from .isomorphism import root_likelihoods
from .moments import lemma_bounds
from .rng import RngStream
from .structure import centroids, structural_summary
from .tree import read_tree_file, write_tree_file


def _cmd_gen(args) -> int:
    rng = RngStream(args.seed, args.stream_id)
    if args.model == "urrt":
        tree = generate_urrt(args.n, rng)
        beta = None
    else:
        if args.beta is None:
            print("gen: --beta is required for the pa model", file=sys.stderr)
            return 2
        tree = generate_pa(args.n, PaParams(args.beta), rng)
        beta = args.beta
    write_tree_file(args.out, tree, model=args.model, beta=beta, seed=args.seed)
    return 0


def _cmd_broadcast(args) -> int:
    tree = read_tree_file(args.tree)
    bits = assign_bits(tree, args.q, RngStream(args.seed))
    if args.leaves_only:
        bits = bits.masked_to_leaves(tree)
    with open(args.out, "w", encoding="utf-8") as fh:
        vis = "leaves" if args.leaves_only else "all"
        fh.write(f"# q={args.q} seed={args.seed} visibility={vis}\n")
        for v in bits.visible_vertices():
            fh.write(f"{int(v)} {bits.bit(int(v)):+d}\n")
    return 0


def _read_bits_file(path, n_vertices: int) -> BitAssignment:
    bits = np.zeros(n_vertices, dtype=np.int8)
    mask = np.zeros(n_vertices, dtype=bool)
    visibility = Visibility.ALL_VERTICES
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "visibility=leaves" in line:
                    visibility = Visibility.LEAVES_ONLY
                continue
            v_s, b_s = line.split()
            v, b = int(v_s), int(b_s)
            if b not in (-1, 1):
                raise ValueError(f"bit of vertex {v} must be -1 or +1")
            bits[v] = b
            mask[v] = True
    return BitAssignment(bits, visibility, mask)


def _cmd_stats(args) -> int:
    tree = read_tree_file(args.tree)
    summary = structural_summary(tree)
    cents = centroids(tree, summary)
    writer = csv.writer(sys.stdout)
    writer.writerow(["section", "key", "value"])
    for c in cents:
        writer.writerow(["centroid", "vertex", int(c)])
    for v in range(tree.n_vertices):
        writer.writerow(["phi", v, int(summary.phi[v])])
    hist = np.bincount(summary.depth)
    for d, count in enumerate(hist):
        writer.writerow(["depth_histogram", d, int(count)])
    return 0


def _cmd_root_posterior(args) -> int:
    tree = read_tree_file(args.tree)
    post = root_likelihoods(tree)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["v", "log_lambda", "posterior"])
        for v in range(tree.n_vertices):
            writer.writerow([v, repr(float(post.log_lambda[v])), repr(float(post.posterior[v]))])
    return 0


def _cmd_estimate(args) -> int:
    tree = read_tree_file(args.tree)
    bits = _read_bits_file(args.bits, tree.n_vertices)
    if args.leaves_only and bits.visibility is not Visibility.LEAVES_ONLY:
        bits = BitAssignment(bits._bits, Visibility.LEAVES_ONLY, tree.is_leaf & bits.visible_mask)
    rng = RngStream(args.seed)
    if args.estimator == "majority":
        est = majority_estimate(tree, bits)
    elif args.estimator == "centroid":
        est = centroid_estimate(tree, bits, rng)
    elif args.estimator == "bayes":
        est = bayes_estimate(tree, bits)
    else:
        params = StructParams(r=args.r, k=args.k, epsilon=args.eps if args.eps else -1.0)
        est = structured_estimate(tree, bits, params, rng)
    print(f"{est.value:+d}")
    return 0


def _cmd_moments(args) -> int:
    try:
        bounds = lemma_bounds(args.lemma, args.q, args.i, args.n, args.beta)
    except ValueError as exc:
        print(f"moments: {exc}", file=sys.stderr)
        return 2
    writer = csv.writer(sys.stdout)
    writer.writerow(["lemma", "quantity", "lower", "exact", "upper"])
    for b in bounds:
        writer.writerow(
            [
                args.lemma,
                b.quantity,
                "" if b.lower is None else repr(b.lower),
                "" if b.exact is None else repr(b.exact),
                "" if b.upper is None else repr(b.upper),
            ]
        )
    return 0


def _cmd_experiment(args) -> int:
    try:
        config = ExperimentConfig.from_json(args.config)
        if "RBL_SEED" in os.environ:
            config.seed = int(os.environ["RBL_SEED"])
        results = run_experiment(config, threads=args.threads)
    except ConfigError as exc:
        print(f"experiment: config error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        emit_results(results, args.format, args.out)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(["estimator", "q", "error_rate", "ci_halfwidth"])
        for r in results:
            writer.writerow([r.estimator_id, r.q, r.error_rate, r.ci_halfwidth])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrtcast",
        description="Broadcasting and root-bit reconstruction on random recursive trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random recursive tree")
    p.add_argument("--model", choices=("urrt", "pa"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream-id", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("broadcast", help="assign broadcast bits down a tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--leaves-only", action="store_true")
    p.set_defaults(func=_cmd_broadcast)

    p = sub.add_parser("stats", help="centroids, phi values and depth histogram")
    p.add_argument("--tree", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("root-posterior", help="per-vertex root likelihoods")
    p.add_argument("--tree", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_root_posterior)

    p = sub.add_parser("estimate", help="estimate the root bit from a bits file")
    p.add_argument("--tree", required=True)
    p.add_argument("--bits", required=True)
    p.add_argument(
        "--estimator", choices=("majority", "centroid", "bayes", "structured"), required=True
    )
    p.add_argument("--leaves-only", action="store_true")
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("moments", help="closed-form moment bounds")
    p.add_argument(
        "--lemma", choices=("l8", "l9", "l10", "l12", "l14", "leaf", "pa1", "pa2"), required=True
    )
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
