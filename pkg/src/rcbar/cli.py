"""Command line front end.

Subcommands: ``simulate``, ``estimate``, ``theory``, ``mc``, ``check`` and
``replay`` (re-run a manifest). Exit codes: 0 success, 2 input error,
3 hypothesis gate, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__
from ._kernels import BACKEND
from .errors import HypothesisGateError, MonteCarloAborted, NotPositiveDefinite, SingularDesign, UnstableMoment
from .estimate import estimate_all
from .io import (
    ConfigError,
    config_to_dict,
    dumps_json,
    parse_config,
    parse_seed,
    read_tree_csv,
    samples_to_csv,
    spec_from_dict,
    experiment_from_dict,
    tree_to_csv,
)
from .model import derive_moment_set, validate_hypotheses
from .montecarlo import CLT_MODES, MODES, ExperimentConfig, run_experiment
from .simulate import simulate_tree
from .theory import limit_matrices

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GATE = 3
EXIT_NUMERIC = 4


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load_config(args):
    """Config from ``--config`` (or an embedded echo when replaying)."""
    if getattr(args, "config_doc", None) is not None:
        doc = args.config_doc
        spec, exp = spec_from_dict(doc), experiment_from_dict(doc)
    else:
        spec, exp = parse_config(args.config)
    report = validate_hypotheses(derive_moment_set(spec))
    for line in report.lines():
        print(line, file=sys.stderr)
    return spec, exp, report


def _require_gate(report, gate):
    if not report.gate(gate):
        raise HypothesisGateError(report, gate)


def _pick(cli_value, exp, key, default=None):
    if cli_value is not None:
        return cli_value
    if key in exp:
        return exp[key]
    if default is None:
        raise ConfigError("required (give it on the command line or in the config's experiment block)", key)
    return default


def cmd_simulate(args):
    spec, exp, _ = _load_config(args)
    n = _pick(args.generations, exp, "generations")
    seed = _pick(args.seed, exp, "seed")
    if n < 1:
        raise ConfigError("must be >= 1", "generations")
    tree = simulate_tree(spec, n, seed)
    _write(args.out, tree_to_csv(tree))
    return {"config": config_to_dict(spec, exp), "master_seed": seed, "outputs": [args.out]}


def cmd_estimate(args):
    tree = read_tree_csv(args.tree)
    bundle = estimate_all(tree)
    _write(args.out, dumps_json(bundle.to_dict()))
    return {"outputs": [args.out]}


def cmd_theory(args):
    spec, exp, report = _load_config(args)
    _require_gate(report, "consistency")
    limits = limit_matrices(derive_moment_set(spec))
    _write(args.out, dumps_json(limits.to_dict()))
    return {"config": config_to_dict(spec, exp), "outputs": [args.out]}


def cmd_mc(args):
    spec, exp, report = _load_config(args)
    mode = _pick(args.mode, exp, "mode")
    _require_gate(report, "clt" if mode in CLT_MODES else "consistency")
    try:
        cfg = ExperimentConfig(
            spec=spec,
            n_generations=_pick(args.generations, exp, "generations"),
            replicates=_pick(args.replicates, exp, "replicates"),
            master_seed=_pick(args.seed, exp, "seed"),
            mode=mode,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    result = run_experiment(cfg)
    doc = {"experiment": cfg.to_dict(), "report": result.to_dict()}
    _write(args.out, dumps_json(doc))
    outputs = [args.out]
    if args.dump_samples:
        if mode not in CLT_MODES:
            raise ConfigError("sample dumps exist only for CLT modes", "dump-samples")
        _write(args.dump_samples, samples_to_csv(result.replicate_ids, result.standardized_samples))
        outputs.append(args.dump_samples)
    return {"config": config_to_dict(spec, exp), "master_seed": cfg.master_seed, "outputs": outputs}


def cmd_check(args):
    spec, _, report = _load_config(args)
    print(dumps_json(report.to_dict()), end="")
    _require_gate(report, "clt")
    return None


def cmd_replay(args):
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        argv = manifest["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"unreadable manifest: {exc}") from None
    replay_args = build_parser().parse_args(argv)
    if manifest.get("config") is not None and hasattr(replay_args, "config"):
        replay_args.config_doc = manifest["config"]
    return replay_args, argv


def build_parser():
    parser = argparse.ArgumentParser(prog="rcbar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rcbar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def seed_arg(p):
        p.add_argument("--seed", type=lambda v: parse_seed(v), default=None, help="decimal or 0x-hex 64-bit seed")

    def manifest_arg(p):
        p.add_argument("--manifest", default=None, help="where to write the run manifest (default: OUT.manifest.json)")

    p = sub.add_parser("simulate", help="simulate one tree to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--generations", type=int, default=None)
    seed_arg(p)
    p.add_argument("--out", required=True)
    manifest_arg(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="least-squares estimates from a tree CSV")
    p.add_argument("--tree", required=True)
    p.add_argument("--out", required=True)
    manifest_arg(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("theory", help="limit matrices as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    manifest_arg(p)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("mc", help="Monte Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--replicates", type=int, default=None)
    seed_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-samples", default=None)
    manifest_arg(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("check", help="hypothesis report only")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def _run(args, argv):
    started = time.perf_counter()
    info = args.func(args)
    if info is None or not hasattr(args, "out"):
        return
    manifest = {
        "tool": "rcbar",
        "version": __version__,
        "backend": BACKEND,
        "command": args.command,
        "argv": list(argv),
        "config": info.get("config"),
        "master_seed": info.get("master_seed"),
        "outputs": info["outputs"],
        "duration_seconds": time.perf_counter() - started,
    }
    _write(args.manifest or args.out + ".manifest.json", dumps_json(manifest))


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        if args.command == "replay":
            _run(*cmd_replay(args))
        else:
            _run(args, argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HypothesisGateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (SingularDesign, NotPositiveDefinite, UnstableMoment, MonteCarloAborted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
