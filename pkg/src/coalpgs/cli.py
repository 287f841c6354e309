"""Command-line front end.

Subcommands: `simulate` (forward data generation), `infer` (posterior
genealogy sampling), `surface` (infer + theta relative-likelihood CSV),
`oracle-check` (small-n verification suite), `diagnostics` (report from a
checkpoint).  Exit codes: 0 success, 1 usage/config error, 2 data error,
3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import util
from .config import RunConfig, resolve_grid
from .errors import ConfigError, DataError, CoalpgsError
from .genealogy import (Alignment, Genealogy, parse_alignment, simulate_prior,
                        simulate_data, write_alignment, save_genealogy)
from .pgs import (diagnostics, load_checkpoint, pgs_run,
                  relative_likelihood_surface)

log = logging.getLogger("coalpgs")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_CONFIG_FLAGS = [
    ("--model", str, "mutation model: binary | stepwise"),
    ("--num-states", int, "number of states K (stepwise)"),
    ("--theta0", float, "sampling theta"),
    ("--iterations", int, "PGS iterations"),
    ("--burn-in", int, "discarded initial iterations"),
    ("--thinning", int, "retention interval"),
    ("--particles", int, "cSMC particle count"),
    ("--gibbs-rounds", int, "time-Gibbs rounds per iteration"),
    ("--csmc-mode", str, "sis | smc"),
    ("--grid-points", int, "time-conditional grid resolution"),
    ("--seed", int, "master seed"),
    ("--checkpoint-path", str, "checkpoint file"),
    ("--checkpoint-interval", int, "iterations between checkpoints"),
]


def _add_config_flags(p: argparse.ArgumentParser, with_grid: bool = False) -> None:
    p.add_argument("--config", help="flat JSON config file; flags override it")
    for flag, typ, hlp in _CONFIG_FLAGS:
        p.add_argument(flag, type=typ, help=hlp, default=None)
    p.add_argument("--data", help="alignment file", default=None)
    p.add_argument("--out", help="output file", default=None)
    if with_grid:
        p.add_argument("--theta-grid", help="comma-separated theta values", default=None)
        p.add_argument("--grid-min", type=float, default=None)
        p.add_argument("--grid-max", type=float, default=None)
        p.add_argument("--grid-count", type=int, default=None)
        p.add_argument("--grid-spacing", choices=["log", "linear"], default=None)


def _build_config(args) -> RunConfig:
    obj = {}
    if args.config:
        cfg = RunConfig.load(args.config)
        obj = cfg.to_json()
    for flag, _, _ in _CONFIG_FLAGS:
        name = flag.lstrip("-").replace("-", "_")
        val = getattr(args, name, None)
        if val is not None:
            obj[name] = val
    if getattr(args, "data", None):
        obj["input_path"] = args.data
    if getattr(args, "out", None):
        obj["output_path"] = args.out
    if getattr(args, "theta_grid", None):
        obj["theta_grid"] = [float(t) for t in args.theta_grid.split(",")]
    elif getattr(args, "grid_min", None) is not None:
        obj["theta_grid"] = resolve_grid(args.grid_min, args.grid_max,
                                         args.grid_count or 9,
                                         args.grid_spacing or "log")
    return RunConfig.from_json(obj)


def _load_data(config: RunConfig) -> Alignment:
    if not config.input_path:
        raise ConfigError("no input alignment given (--data or input_path)")
    return parse_alignment(config.input_path, num_states=config.num_states)


def cmd_simulate(args) -> int:
    config = _build_config(args)
    n = args.n
    rng = util.substream(config.seed, util.TAG_SIMULATE)
    model = config.make_model()
    g = simulate_prior(n, rng)
    aln = simulate_data(g, model, config.theta0, args.loci, rng)
    prefix = args.out or "simulated"
    write_alignment(f"{prefix}.aln.txt", aln,
                    header=f"synthetic: model={config.model} K={config.num_states} "
                           f"theta={config.theta0} n={n} loci={args.loci} seed={config.seed}")
    save_genealogy(f"{prefix}.tree.json", g)
    print(f"wrote {prefix}.aln.txt and {prefix}.tree.json")
    return EXIT_OK


def cmd_infer(args) -> int:
    config = _build_config(args)
    aln = _load_data(config)
    model = config.make_model()
    state = pgs_run(aln, model, config)
    out = {
        "diagnostics": diagnostics(state),
        "samples": [g.to_json() for g in state.samples],
        "sample_logliks": state.sample_logliks,
    }
    payload = json.dumps(out, indent=2)
    if config.output_path:
        with open(config.output_path, "w") as fh:
            fh.write(payload + "\n")
        print(f"wrote {len(state.samples)} samples to {config.output_path}")
    else:
        print(payload)
    return EXIT_OK


def cmd_surface(args) -> int:
    config = _build_config(args)
    if not config.theta_grid:
        raise ConfigError("surface needs a theta grid (--theta-grid or --grid-min/max)")
    aln = _load_data(config)
    model = config.make_model()
    state = pgs_run(aln, model, config)
    est = relative_likelihood_surface(state.samples, aln, model,
                                      config.theta_grid, config.theta0)
    csv = est.to_csv()
    if config.output_path:
        with open(config.output_path, "w") as fh:
            fh.write(csv)
        print(f"wrote surface CSV to {config.output_path}")
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def cmd_diagnostics(args) -> int:
    state, _ = load_checkpoint(args.checkpoint)
    print(json.dumps(diagnostics(state), indent=2))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    """Small-scale equivalence suite: message passing against brute force,
    node invariance, and structure-count identities."""
    from . import belief, mutation, oracle
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    failures = []

    def check(name, ok):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    for n, expected in [(2, 1), (3, 3), (4, 18), (5, 180), (6, 2700)]:
        got = len(oracle.enumerate_structures(n).structures)
        check(f"structure count n={n} ({got})", got == expected)

    worst_bf, worst_node = 0.0, 0.0
    for _ in range(25):
        n = int(rng.integers(2, 6))
        K = int(rng.integers(2, 5))
        model = mutation.make_binary_model() if K == 2 else mutation.make_stepwise_model(K)
        g = simulate_prior(n, rng)
        aln = Alignment(rng.integers(0, K, size=(n, int(rng.integers(1, 3)))))
        theta = float(rng.uniform(0.1, 10.0))
        store = belief.MessageStore(g, aln, model, theta)
        ll = store.log_likelihood()
        bf = oracle.brute_force_likelihood(g, aln, model, theta)
        worst_bf = max(worst_bf, abs(np.exp(ll) - bf) / bf)
        for node in range(n, 2 * n - 2):
            worst_node = max(worst_node, abs(store.log_likelihood(at_node=node) - ll))
    check(f"BP vs brute force (worst rel {worst_bf:.2e})", worst_bf < 1e-10)
    check(f"node invariance (worst diff {worst_node:.2e})", worst_node < 1e-8)

    model = mutation.make_binary_model()
    aln = Alignment(np.array([[0], [0], [1]]))
    post = oracle.structure_posterior(aln, model, 1.5)
    idx = post.structures.index([(0, 1), (2, 3)])
    check("n=3 posterior favors the identical pair", post.values[idx] == post.values.max())

    if failures:
        return EXIT_INTERNAL
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("COALPGS_LOG_LEVEL", "WARNING"))
    parser = argparse.ArgumentParser(prog="coalpgs",
                                     description="Particle Gibbs sampler for the coalescent")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="forward-simulate a genealogy and alignment")
    p.add_argument("--n", type=int, required=True, help="number of individuals")
    p.add_argument("--loci", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="sample posterior genealogies")
    _add_config_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("surface", help="estimate the theta relative-likelihood surface")
    _add_config_flags(p, with_grid=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("oracle-check", help="run the small-n verification suite")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("diagnostics", help="report from a checkpoint file")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_diagnostics)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CoalpgsError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
