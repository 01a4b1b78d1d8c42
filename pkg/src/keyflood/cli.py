"""Command-line front end.

Verbs: ``generate``, ``run``, ``verify``, ``export``, ``bench``.  Experiment
settings come from built-in defaults, then an optional INI file
(``--config``, section ``[experiment]``), then flags.  The default output
directory is taken from ``KEYFLOOD_OUT`` when set.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path

from keyflood import checks, engine, suite, traceio
from keyflood.errors import ConfigError, KeyfloodError, RoundBudgetExceeded
from keyflood.generate import ExperimentConfig, generate
from keyflood.network import Network

log = logging.getLogger("keyflood")

OUT_ENV = "KEYFLOOD_OUT"
CONFIG_SECTION = "experiment"


# -- configuration -------------------------------------------------------------------


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_ids(text: str) -> list[str]:
    # "-" stands for the empty identifier, which cannot be written otherwise
    return ["" if x.strip() == "-" else x.strip() for x in text.split(",") if x.strip()]


def _parse_opt_int(text: str) -> int | None:
    return None if str(text).strip().lower() in ("", "none") else int(text)


_CONVERTERS = {
    "n": int, "p": float, "min_id_length": int, "max_id_length": int, "id_length": int,
    "short_length": int, "short_position": _parse_opt_int, "explicit_ids": _parse_ids,
    "shuffle_links": _parse_bool, "seed": int, "repetitions": int, "budget": _parse_opt_int,
    "workers": int,
}

_HELP = {
    "topology": "path, cycle, grid, star, complete or random",
    "n": "number of nodes",
    "p": "edge probability of random graphs",
    "ids": "identifier scheme: uniform, adversarial, late_divergence or explicit",
    "min_id_length": "shortest uniform identifier",
    "max_id_length": "longest uniform identifier",
    "id_length": "length of the long identifiers in the adversarial schemes",
    "short_length": "length of the single short identifier (adversarial)",
    "short_position": "node holding the short/minimal identifier (default: most eccentric)",
    "explicit_ids": "comma-separated identifiers for the explicit scheme ('-' is empty)",
    "shuffle_links": "shuffle link order at every node (true/false)",
    "variant": "message_terminating, processor_terminating or baseline",
    "seed": "base seed",
    "repetitions": "runs per configuration (seeds seed:0 .. seed:r-1)",
    "budget": "round budget override",
    "workers": "worker processes",
    "out_dir": f"output directory (default ${OUT_ENV} or .)",
}


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("experiment")
    group.add_argument("--config", help="INI file with an [experiment] section")
    for name in ExperimentConfig.field_names():
        group.add_argument(_flag(name), dest=name, default=None, help=_HELP.get(name),
                           type=_CONVERTERS.get(name, str))


def read_config_file(path: str | Path) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    if not parser.has_section(CONFIG_SECTION):
        raise ConfigError(f"{path} has no [{CONFIG_SECTION}] section")
    known = set(ExperimentConfig.field_names())
    values = {}
    for key, raw in parser.items(CONFIG_SECTION):
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(f"{path}: unknown setting {key!r}")
        values[name] = _CONVERTERS.get(name, str)(raw)
    return values


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {"out_dir": os.environ.get(OUT_ENV, ".")}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for name in ExperimentConfig.field_names():
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if values.get("explicit_ids") and "ids" not in values:
        values["ids"] = "explicit"
    if values.get("ids") == "explicit" and "n" not in values:
        values["n"] = len(values.get("explicit_ids", []))
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- networks on disk ----------------------------------------------------------------


def save_network(net: Network, path: Path) -> None:
    path.write_text(json.dumps({"ids": list(net.ids), "links": [list(l) for l in net.links]},
                               indent=1) + "\n")


def load_network(path: str | Path) -> Network:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read network file {path}: {exc}") from exc
    return Network(tuple(data["ids"]), tuple(tuple(l) for l in data["links"]))


# -- verbs --------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = build_config(args)
    out = _out_dir(cfg)
    for rep in range(cfg.repetitions):
        net = generate(cfg, rep)
        path = out / f"network-{cfg.topology}-n{net.n}-s{cfg.seed}-r{rep}.json"
        save_network(net, path)
        print(f"{path}  n={net.n} edges={len(net.edges())} diameter={net.diameter} "
              f"min_node={net.min_node}")
    return 0


def _run_one(net: Network, cfg: ExperimentConfig, rep: int, out: Path, compact: bool, plot: bool):
    stem = f"trace-{cfg.variant}-{cfg.topology}-n{net.n}-s{cfg.seed}-r{rep}"
    trace = engine.run(net, cfg.variant, cfg.budget, record_states=not compact,
                       meta={"seed": cfg.seed, "repetition": rep})
    traceio.dump_trace(trace, out / f"{stem}.jsonl")
    row = {"trace": f"{stem}.jsonl", "n": net.n, "diameter": net.diameter,
           "key_length": len(trace.k_min), "variant": cfg.variant,
           "termination_round": trace.termination_round,
           "min_id": engine.extract_min(trace, 0)}
    if cfg.variant != engine.BASELINE:
        row["max_delay"] = max(engine.delays(trace).max_delay.values())
    if plot and cfg.variant != engine.BASELINE:
        from keyflood import plotting
        plotting.plot_delays(trace, out / f"{stem}-delays.png")
    return row


def cmd_run(args) -> int:
    cfg = build_config(args)
    out = _out_dir(cfg)
    rows = []
    for rep in range(cfg.repetitions):
        net = load_network(args.network) if args.network else generate(cfg, rep)
        rows.append(_run_one(net, cfg, rep, out, args.compact, not args.no_plots))
        print(", ".join(f"{k}={v}" for k, v in rows[-1].items()))
    traceio.write_csv(out / "runs.csv", rows)
    return 0


def _print_violations(items, limit=20):
    for label, v in items[:limit]:
        print(f"  {label}: {v}")
    if len(items) > limit:
        print(f"  ... {len(items) - limit} more")


def cmd_verify(args) -> int:
    if args.trace:
        trace = traceio.load_trace(args.trace)
        found = checks.verify_trace(trace)
        if trace.variant == engine.PROCESSOR_TERMINATING:
            from keyflood.generate import rng_for
            found += checks.injection_violations(trace, rng_for(0))
        replay = engine.replay_violations(trace) if not trace.compact else []
        for v in found:
            print(v)
        for p in replay:
            print(p)
        print(f"{args.trace}: {len(found) + len(replay)} violations")
        return 1 if found or replay else 0
    cfg = build_config(args)
    out = _out_dir(cfg)
    if args.corpus:
        configs, variants = suite.corpus(args.corpus_size), suite.CHECKED_VARIANTS
    else:
        configs, variants = [cfg], None
    report = suite.run_suite(configs, variants, workers=cfg.workers)
    rows = report.rows()
    traceio.write_csv(out / "verify.csv", rows)
    (out / "violations.txt").write_text("".join(f"{l}: {v}\n" for l, v in report.violations()))
    if not args.no_plots:
        from keyflood import plotting
        plotting.plot_suite(rows, out / "verify.png")
    print(f"{len(report.results)} runs in {report.seconds:.1f}s; "
          f"{sum(1 for r in report.results if r.violations)} with violations")
    for name, count in report.by_invariant().items():
        print(f"  {name}: {count} runs")
    _print_violations(report.violations())
    return 0 if report.ok else 1


def cmd_export(args) -> int:
    trace = traceio.load_trace(args.trace)
    out = Path(args.output) if args.output else Path(args.trace).with_suffix("." + args.format)
    if args.format == "dot":
        tree = engine.extract_spanning_tree(trace)
        out.write_text(traceio.tree_to_dot(trace.network, tree))
    elif args.format == "csv":
        report = engine.delays(trace) if trace.variant != engine.BASELINE else None
        arrival = engine.k_min_arrival_steps(trace)
        final = trace.final
        rows = []
        for v in range(trace.network.n):
            parent = final[v].arrivals[-1].source
            rows.append({
                "node": v, "id": trace.network.ids[v], "degree": trace.network.degree(v),
                "parent": None if parent is None else trace.network.links[v][parent],
                "kmin_step": arrival.get(v),
                "max_delay": None if report is None else report.max_delay[v],
            })
        traceio.write_csv(out, rows)
    else:
        traceio.dump_trace(trace, out)
    print(out)
    return 0


def cmd_bench(args) -> int:
    cfg = build_config(args)
    out = _out_dir(cfg)
    report = suite.bench(args.diameters, args.key_targets, variant=args.fast_variant,
                         baseline=args.baseline, seed=cfg.seed, constant=args.constant,
                         baseline_factor=args.baseline_factor, workers=cfg.workers)
    rows = [vars(p) for p in report.points]
    traceio.write_csv(out / "bench.csv", rows)
    if not args.no_plots:
        from keyflood import plotting
        plotting.plot_bench(report, out / "bench.png")
    for p in report.points:
        rel = "<=" if p.variant != engine.BASELINE else ">="
        print(f"{p.variant:22s} D={p.diameter:4d} |K|={p.key_length:5d} T={p.rounds:7d} "
              f"{rel} {p.bound:9.0f}  ratio={p.ratio:.2f}  {'ok' if p.ok else 'FAIL'}")
    lo, hi = report.ratio_range()
    print(f"time bound: {'ok' if report.bound_ok else 'FAIL'}; "
          f"separation: {'ok' if report.separation_ok else 'FAIL'}; ratio {lo:.2f}..{hi:.2f}")
    return 0 if report.ok else 1


# -- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="keyflood", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", help="write generated networks as JSON")
    add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="simulate and write traces plus a CSV summary")
    add_config_flags(p)
    p.add_argument("--network", help="JSON network file instead of generating one")
    p.add_argument("--compact", action="store_true", help="store messages only")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="check a trace file or a batch of fresh runs")
    add_config_flags(p)
    p.add_argument("--trace", help="check this trace file instead of running")
    p.add_argument("--corpus", action="store_true", help="use the standard mixed corpus")
    p.add_argument("--corpus-size", type=int, default=504)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="convert a trace file")
    p.add_argument("trace")
    p.add_argument("--format", choices=("jsonl", "dot", "csv"), default="dot")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("bench", help="round counts on rings against the restart baseline")
    add_config_flags(p)
    p.add_argument("--diameters", type=int, nargs="+", default=[10, 25, 50, 100])
    p.add_argument("--key-targets", type=int, nargs="+", default=[64, 256, 1024])
    p.add_argument("--fast-variant", default=engine.MESSAGE_TERMINATING,
                   choices=(engine.MESSAGE_TERMINATING, engine.PROCESSOR_TERMINATING))
    p.add_argument("--baseline", choices=("largest", "all", "none"), default="largest")
    p.add_argument("--constant", type=float, default=8.0)
    p.add_argument("--baseline-factor", type=float, default=0.5)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RoundBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (KeyfloodError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
